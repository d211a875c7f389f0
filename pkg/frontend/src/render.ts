import { frameIndexAt } from "./playback.js";
import type { HandoverParams, Rollout } from "./types.js";

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** Fit the scene (receiver path + traces) into a canvas with a margin. */
export function fitViewport(rollout: Rollout, width: number, height: number): Viewport {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const p of rollout.receiver) {
    xs.push(p[0]);
    ys.push(p[1]);
  }
  for (const p of rollout.ee) {
    xs.push(p[0]);
    ys.push(p[1]);
  }
  for (const p of rollout.target) {
    xs.push(p[0]);
    ys.push(p[1]);
  }
  const minX = Math.min(...xs, -0.5);
  const maxX = Math.max(...xs, 0.5);
  const minY = Math.min(...ys, -0.5);
  const maxY = Math.max(...ys, 0.5);
  const margin = 24;
  const scale = Math.min(
    (width - 2 * margin) / Math.max(maxX - minX, 1e-6),
    (height - 2 * margin) / Math.max(maxY - minY, 1e-6),
  );
  return {
    scale,
    offsetX: margin - minX * scale,
    offsetY: height - margin + minY * scale,
  };
}

function toPx(v: Viewport, x: number, y: number): [number, number] {
  return [v.offsetX + x * v.scale, v.offsetY - y * v.scale];
}

function drawPath(
  ctx: CanvasRenderingContext2D,
  v: Viewport,
  points: number[][],
  upTo: number,
  color: string,
): void {
  if (upTo < 1) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  const [x0, y0] = toPx(v, points[0][0], points[0][1]);
  ctx.moveTo(x0, y0);
  for (let i = 1; i <= upTo; i++) {
    const [x, y] = toPx(v, points[i][0], points[i][1]);
    ctx.lineTo(x, y);
  }
  ctx.stroke();
}

/** Top-down x-y view: giver base cross, receiver dot, ee + target traces. */
export function drawTopDown(
  ctx: CanvasRenderingContext2D,
  rollout: Rollout,
  v: Viewport,
  time: number,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, width, height);

  const [gx, gy] = toPx(v, 0, 0);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(gx - 6, gy);
  ctx.lineTo(gx + 6, gy);
  ctx.moveTo(gx, gy - 6);
  ctx.lineTo(gx, gy + 6);
  ctx.stroke();

  const frame = frameIndexAt(rollout.t, time);
  drawPath(ctx, v, rollout.target, frame, "#b46");
  drawPath(ctx, v, rollout.ee, frame, "#27c");

  const rFrame = frameIndexAt(rollout.receiver_t, time);
  const rp = rollout.receiver[rFrame];
  if (rp) {
    const [rx, ry] = toPx(v, rp[0], rp[1]);
    ctx.fillStyle = "#2a2";
    ctx.beginPath();
    ctx.arc(rx, ry, 6, 0, 2 * Math.PI);
    ctx.fill();
  }

  const ee = rollout.ee[frame];
  if (ee) {
    const [ex, ey] = toPx(v, ee[0], ee[1]);
    ctx.fillStyle = "#27c";
    ctx.beginPath();
    ctx.arc(ex, ey, 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  if (rollout.release_t !== null && time >= rollout.release_t) {
    const relFrame = frameIndexAt(rollout.t, rollout.release_t);
    const rp2 = rollout.ee[relFrame];
    const [x, y] = toPx(v, rp2[0], rp2[1]);
    ctx.strokeStyle = "#e33";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(x, y, 9, 0, 2 * Math.PI);
    ctx.stroke();
  }
}

/** Height strip: z of the end-effector and target over time with a cursor. */
export function drawHeightStrip(
  ctx: CanvasRenderingContext2D,
  rollout: Rollout,
  time: number,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#f4f4f4";
  ctx.fillRect(0, 0, width, height);
  if (rollout.t.length < 2) return;
  const duration = rollout.t[rollout.t.length - 1];
  const zs = rollout.ee.map((p) => p[2]).concat(rollout.target.map((p) => p[2]));
  const minZ = Math.min(...zs);
  const maxZ = Math.max(...zs, minZ + 1e-6);
  const toX = (t: number) => (t / Math.max(duration, 1e-6)) * (width - 8) + 4;
  const toY = (z: number) => height - 4 - ((z - minZ) / (maxZ - minZ)) * (height - 8);

  for (const [series, color] of [
    [rollout.target, "#b46"],
    [rollout.ee, "#27c"],
  ] as const) {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(toX(rollout.t[0]), toY(series[0][2]));
    for (let i = 1; i < rollout.t.length; i++) {
      ctx.lineTo(toX(rollout.t[i]), toY(series[i][2]));
    }
    ctx.stroke();
  }

  if (rollout.release_t !== null) {
    ctx.strokeStyle = "#e33";
    ctx.beginPath();
    ctx.moveTo(toX(rollout.release_t), 0);
    ctx.lineTo(toX(rollout.release_t), height);
    ctx.stroke();
  }

  ctx.strokeStyle = "#333";
  ctx.beginPath();
  ctx.moveTo(toX(Math.min(time, duration)), 0);
  ctx.lineTo(toX(Math.min(time, duration)), height);
  ctx.stroke();
}

export function formatParams(params: HandoverParams): string {
  return (
    `K ${params.stiffness.toFixed(1)} N/m · B ${params.damping.toFixed(1)} N·s/m · ` +
    `t_f ${params.forecast_time.toFixed(2)} s · f_r ${params.release_force.toFixed(1)} N`
  );
}
