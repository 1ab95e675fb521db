/** Pure renderers: state in, draw operations out.
 *
 * Keeping the drawing declarative makes the view testable without a DOM;
 * the canvas layer just walks the returned operation list.
 */

import { PhaseSample, StateMessage, WinMask } from "./protocol.js";
import { makeViewport, toScreen } from "./transform.js";

export type DrawOp =
  | { kind: "axes"; label: string }
  | { kind: "polyline"; points: [number, number][]; color: string; width: number }
  | { kind: "rect"; x: number; y: number; w: number; h: number; color: string; fill: boolean }
  | { kind: "cells"; points: [number, number][]; size: number; color: string }
  | { kind: "dot"; x: number; y: number; r: number; color: string }
  | { kind: "text"; x: number; y: number; text: string; color: string };

const STEP_COLORS = ["#3b82f6", "#10b981", "#f59e0b", "#ef4444", "#8b5cf6", "#14b8a6", "#f97316"];

export function decodeMask(mask: WinMask): [number, number][] {
  const raw = atob(mask.bits_b64);
  const out: [number, number][] = [];
  for (let i = 0; i < mask.nx * mask.nv; i++) {
    const byte = raw.charCodeAt(i >> 3);
    const bit = (byte >> (7 - (i & 7))) & 1;
    if (bit) {
      const ix = Math.floor(i / mask.nv);
      const iv = i % mask.nv;
      out.push([mask.x0 + (ix + 0.5) * mask.dx, mask.v0 + (iv + 0.5) * mask.dv]);
    }
  }
  return out;
}

/** Main panel: sagittal phase plane with trajectory and winning-set mask. */
export function renderPhaseView(
  trajectories: PhaseSample[][],
  latest: StateMessage | null,
  width = 760,
  height = 420,
): DrawOp[] {
  const ops: DrawOp[] = [{ kind: "axes", label: "x [m] vs vx [m/s]" }];
  const xs: number[] = [];
  const ys: number[] = [];
  for (const t of trajectories) {
    for (const p of t) {
      xs.push(p[0]);
      ys.push(p[1]);
    }
  }
  if (latest?.win_mask) {
    xs.push(latest.win_mask.x0, latest.win_mask.x0 + latest.win_mask.nx * latest.win_mask.dx);
    ys.push(latest.win_mask.v0, latest.win_mask.v0 + latest.win_mask.nv * latest.win_mask.dv);
  }
  if (xs.length === 0) {
    return ops; // nothing to draw beyond the axes
  }
  const vp = makeViewport(xs, ys, width, height);
  if (latest?.win_mask) {
    const pts = decodeMask(latest.win_mask).map(([x, v]) => toScreen(vp, x, v));
    ops.push({ kind: "cells", points: pts, size: 3, color: "rgba(250, 220, 70, 0.45)" });
  }
  trajectories.forEach((traj, i) => {
    ops.push({
      kind: "polyline",
      points: traj.map((p) => toScreen(vp, p[0], p[1])),
      color: STEP_COLORS[i % STEP_COLORS.length],
      width: 2,
    });
  });
  if (latest) {
    const [sx, sy] = toScreen(vp, latest.state[0], latest.state[1]);
    ops.push({ kind: "dot", x: sx, y: sy, r: 5, color: "#111827" });
    const [kx, ky] = toScreen(vp, latest.keyframe[0], latest.keyframe[1]);
    ops.push({ kind: "dot", x: kx, y: ky, r: 4, color: "#dc2626" });
  }
  return ops;
}

/** Overlay panel: progression/deviation plane with the margin boxes. */
export function renderMarginOverlay(
  latest: StateMessage | null,
  width = 360,
  height = 420,
): DrawOp[] {
  const ops: DrawOp[] = [{ kind: "axes", label: "zeta vs sigma" }];
  if (!latest || !latest.margins) {
    return ops;
  }
  const trace: [number, number][] = [];
  for (const p of latest.phase_polyline) {
    if (p[2] !== null && p[3] !== null) {
      trace.push([p[2], p[3]]);
    }
  }
  const boxes = [latest.margins.initial, latest.margins.final];
  const xs: number[] = [];
  const ys: number[] = [];
  for (const b of boxes) {
    xs.push(b.offset[0] - b.d_zeta, b.offset[0] + b.d_zeta);
    ys.push(b.offset[1] - b.d_sigma, b.offset[1] + b.d_sigma);
  }
  for (const [z, s] of trace.slice(-150)) {
    if (Math.abs(z) < 3 && Math.abs(s) < 3) {
      xs.push(z);
      ys.push(s);
    }
  }
  const vp = makeViewport(xs, ys, width, height);
  const colors = ["#2563eb", "#dc2626"];
  boxes.forEach((b, i) => {
    const [x0, y0] = toScreen(vp, b.offset[0] - b.d_zeta, b.offset[1] + b.d_sigma);
    const [x1, y1] = toScreen(vp, b.offset[0] + b.d_zeta, b.offset[1] - b.d_sigma);
    ops.push({
      kind: "rect",
      x: x0,
      y: y0,
      w: x1 - x0,
      h: y1 - y0,
      color: colors[i],
      fill: false,
    });
  });
  if (trace.length) {
    ops.push({
      kind: "polyline",
      points: trace.map(([z, s]) => toScreen(vp, z, s)),
      color: "#6b7280",
      width: 1.5,
    });
  }
  return ops;
}
