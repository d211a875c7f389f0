import { ServiceClient } from "./api.js";
import { PlaybackClock, releaseFraction, rolloutDuration } from "./playback.js";
import { drawHeightStrip, drawTopDown, fitViewport, formatParams } from "./render.js";
import { SessionDriver } from "./session.js";
import type { Choice, Query, Rollout } from "./types.js";

const client = new ServiceClient("");
const driver = new SessionDriver(client);

const el = (id: string) => document.getElementById(id)!;
const canvasA = el("pane-a") as HTMLCanvasElement;
const canvasB = el("pane-b") as HTMLCanvasElement;
const stripA = el("strip-a") as HTMLCanvasElement;
const stripB = el("strip-b") as HTMLCanvasElement;
const scrubber = el("scrubber") as HTMLInputElement;

let clock = new PlaybackClock([0]);
let rolloutA: Rollout | null = null;
let rolloutB: Rollout | null = null;
let lastFrame = performance.now();

function setBanner(text: string | null): void {
  const banner = el("banner");
  banner.textContent = text ?? "";
  banner.style.display = text ? "block" : "none";
}

function updateButtons(): void {
  (el("prefer-a") as HTMLButtonElement).disabled = !driver.canSubmit;
  (el("prefer-b") as HTMLButtonElement).disabled = !driver.canSubmit;
  el("guard-note").textContent = driver.canSubmit
    ? "Pick the handover you preferred."
    : "Buttons unlock after both rollouts have played through once.";
}

async function loadQuery(query: Query): Promise<void> {
  rolloutA = query.a.rollout ?? (await client.getRollout(query.a.rollout_id!));
  rolloutB = query.b.rollout ?? (await client.getRollout(query.b.rollout_id!));
  clock = new PlaybackClock([rolloutDuration(rolloutA), rolloutDuration(rolloutB)]);
  scrubber.max = String(clock.duration);
  scrubber.value = "0";
  el("params-a").textContent = formatParams(query.a.params);
  el("params-b").textContent = formatParams(query.b.params);
  el("progress").textContent =
    `comparison ${query.id + 1} of ${driver.state?.budget ?? "?"}`;
  for (const [rollout, id] of [
    [rolloutA, "release-a"],
    [rolloutB, "release-b"],
  ] as const) {
    const frac = releaseFraction(rollout);
    el(id).textContent =
      rollout.release_t !== null
        ? `releases at ${rollout.release_t.toFixed(2)} s (${Math.round((frac ?? 0) * 100)}% of playback)`
        : "no release (timeout)";
  }
  clock.play();
  updateButtons();
}

function showCompletion(): void {
  el("review").style.display = "none";
  el("completion").style.display = "block";
  const s = driver.state!;
  el("incumbent").textContent = s.incumbent ? formatParams(s.incumbent) : "?";
  const list = el("history-list");
  list.innerHTML = "";
  for (const entry of s.history ?? []) {
    const li = document.createElement("li");
    li.textContent = `#${entry.iteration + 1}: action ${entry.winner} beat ${entry.loser}`;
    list.appendChild(li);
  }
  el("posterior-note").textContent = s.posterior_summary
    ? `posterior over ${s.posterior_summary.n_records} comparisons, ` +
      `utility range [${s.posterior_summary.mean_min.toFixed(3)}, ` +
      `${s.posterior_summary.mean_max.toFixed(3)}]`
    : "";
}

async function submit(choice: Choice): Promise<void> {
  try {
    setBanner(null);
    const next = await driver.submit(choice);
    if (next.done) {
      showCompletion();
    } else if (next.query) {
      await loadQuery(next.query);
    }
  } catch {
    setBanner(`submission failed (${driver.lastError ?? "network error"}); ` +
      "state preserved, try again");
  }
  updateButtons();
}

function renderLoop(now: number): void {
  const dt = Math.min((now - lastFrame) / 1000, 0.1);
  lastFrame = now;
  const t = clock.tick(dt);
  if (!clock.playing) {
    if (clock.playedThrough && !driver.bothViewed) {
      driver.markViewed();
      updateButtons();
    }
  } else {
    scrubber.value = String(t);
  }
  if (rolloutA && rolloutB) {
    drawTopDown(canvasA.getContext("2d")!, rolloutA,
      fitViewport(rolloutA, canvasA.width, canvasA.height), t);
    drawTopDown(canvasB.getContext("2d")!, rolloutB,
      fitViewport(rolloutB, canvasB.width, canvasB.height), t);
    drawHeightStrip(stripA.getContext("2d")!, rolloutA, t);
    drawHeightStrip(stripB.getContext("2d")!, rolloutB, t);
  }
  requestAnimationFrame(renderLoop);
}

async function boot(): Promise<void> {
  el("play").addEventListener("click", () => clock.play());
  el("pause").addEventListener("click", () => clock.pause());
  el("replay").addEventListener("click", () => clock.replay());
  scrubber.addEventListener("input", () => clock.scrub(Number(scrubber.value)));
  el("prefer-a").addEventListener("click", () => void submit("a"));
  el("prefer-b").addEventListener("click", () => void submit("b"));
  updateButtons();
  try {
    const state = await driver.start();
    if (state.query) await loadQuery(state.query);
  } catch {
    setBanner(`could not start a session (${driver.lastError}); ` +
      "is the service running?");
  }
  requestAnimationFrame(renderLoop);
}

void boot();
