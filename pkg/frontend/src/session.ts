import { ApiError, ServiceClient } from "./api.js";
import type { Choice, SessionState } from "./types.js";

export type Phase = "idle" | "loading" | "review" | "done" | "error";

/**
 * DOM-free driver of one preference session.
 *
 * Guards the A/B buttons behind a full playthrough of both candidates,
 * serializes submissions (one in flight), recovers from a 409 (stale query
 * after a dropped response) by refreshing the server-side state, and keeps
 * the current state on network failure so a resubmission is safe.
 */
export class SessionDriver {
  phase: Phase = "idle";
  state: SessionState | null = null;
  bothViewed = false;
  lastError: string | null = null;
  private inFlight = false;

  constructor(private client: ServiceClient) {}

  get canSubmit(): boolean {
    return this.phase === "review" && this.bothViewed && !this.inFlight;
  }

  markViewed(): void {
    this.bothViewed = true;
  }

  async start(): Promise<SessionState> {
    this.phase = "loading";
    try {
      this.state = await this.client.createSession();
      this.phase = this.state.done ? "done" : "review";
      this.bothViewed = false;
      this.lastError = null;
      return this.state;
    } catch (err) {
      this.phase = "error";
      this.lastError = String(err);
      throw err;
    }
  }

  async submit(choice: Choice): Promise<SessionState> {
    if (!this.state || this.state.done || !this.state.query) {
      throw new Error("no open query to answer");
    }
    if (!this.canSubmit) {
      throw new Error("both candidates must play through before submitting");
    }
    this.inFlight = true;
    try {
      const next = await this.client.submitPreference(
        this.state.session_id,
        choice,
        this.state.query.id,
      );
      this.applyState(next);
      return next;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // stale query id: our previous submission landed; resync
        const fresh = await this.client.getSession(this.state.session_id);
        this.applyState(fresh);
        return fresh;
      }
      // network drop: stay on the open query so the same submission can retry
      this.lastError = String(err);
      throw err;
    } finally {
      this.inFlight = false;
    }
  }

  async refresh(): Promise<SessionState> {
    if (!this.state) throw new Error("session not started");
    const fresh = await this.client.getSession(this.state.session_id);
    this.applyState(fresh);
    return fresh;
  }

  private applyState(next: SessionState): void {
    const advanced =
      this.state === null ||
      next.iteration !== this.state.iteration ||
      next.done !== this.state.done;
    this.state = next;
    this.phase = next.done ? "done" : "review";
    this.lastError = null;
    if (advanced) this.bothViewed = false;
  }
}
