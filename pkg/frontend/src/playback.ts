import type { Rollout } from "./types.js";

/**
 * Shared playback clock for the two rollout panes.  Time is in rollout
 * seconds, advanced at 1x real time while playing, clamped to the longer of
 * the two durations; both panes read frames from the same clock so differing
 * release times stay comparable.
 */
export class PlaybackClock {
  time = 0;
  playing = false;
  /** set once the clock has swept the full duration while playing */
  playedThrough = false;
  readonly duration: number;

  constructor(durations: number[]) {
    this.duration = Math.max(0, ...durations);
  }

  play(): void {
    if (this.time >= this.duration) this.time = 0;
    this.playing = true;
  }

  pause(): void {
    this.playing = false;
  }

  /** Advance by wall-clock dt (seconds); returns the clamped playback time. */
  tick(dt: number): number {
    if (this.playing) {
      this.time += dt;
      if (this.time >= this.duration) {
        this.time = this.duration;
        this.playing = false;
        this.playedThrough = true;
      }
    }
    return this.time;
  }

  /** Scrub to an absolute time, clamped to [0, duration]. */
  scrub(t: number): number {
    this.time = Math.min(Math.max(t, 0), this.duration);
    return this.time;
  }

  replay(): void {
    this.time = 0;
    this.playing = true;
  }
}

/** Index of the last sample with timestamp <= t (clamped to the final frame). */
export function frameIndexAt(times: number[], t: number): number {
  if (times.length === 0) return 0;
  if (t <= times[0]) return 0;
  if (t >= times[times.length - 1]) return times.length - 1;
  let lo = 0;
  let hi = times.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (times[mid] <= t) lo = mid;
    else hi = mid;
  }
  return lo;
}

export function rolloutDuration(rollout: Rollout): number {
  return rollout.t.length > 0 ? rollout.t[rollout.t.length - 1] : 0;
}

/** Fraction of the timeline at which the release marker sits, or null. */
export function releaseFraction(rollout: Rollout): number | null {
  const d = rolloutDuration(rollout);
  if (rollout.release_t === null || d <= 0) return null;
  return Math.min(rollout.release_t / d, 1);
}
