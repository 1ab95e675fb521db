/** Session protocol messages exchanged with the planner service. */

export interface MarginBox {
  d_zeta: number;
  d_sigma: number;
  offset: [number, number];
  center: [number, number];
  mode: string;
}

export interface WinMask {
  x0: number;
  v0: number;
  dx: number;
  dv: number;
  nx: number;
  nv: number;
  bits_b64: string;
}

export interface HistoryRow {
  step: number;
  e: string;
  q: number;
  s: number;
  p: number;
}

/** Polyline sample: [x, vx, zeta (nullable), sigma (nullable)]. */
export type PhaseSample = [number, number, number | null, number | null];

export interface StateMessage {
  type: "state";
  session: number;
  step: number;
  node: number;
  q: number;
  q_name: string;
  e: string;
  e_options: string[];
  p: string;
  s: string;
  keyframe: [number, number];
  state: [number, number];
  phase_polyline: PhaseSample[];
  win_mask: WinMask | null;
  margins: { initial: MarginBox; final: MarginBox } | null;
  outcome: string | null;
  history: HistoryRow[];
}

export interface RejectedMessage {
  type: "rejected";
  reason: string;
}

export type ServerMessage = StateMessage | RejectedMessage;

export interface EnvActionMessage {
  type: "env_action";
  action: string;
}

export interface ResetMessage {
  type: "reset";
  first_env?: string;
}

export type ClientMessage = EnvActionMessage | ResetMessage;

export const ENV_ACTIONS = [
  "e_md",
  "e_hd",
  "e_mu",
  "e_hu",
  "e_tc_nc",
  "e_tc_hc",
  "e_ha",
  "e_np",
] as const;

export type EnvAction = (typeof ENV_ACTIONS)[number];
