/** View model: a pure reducer over server messages.
 *
 * The console never computes dynamics or strategy; it mirrors the session
 * state, accumulates the decision history and the drawn trajectory, and
 * tracks which environment actions are currently clickable.
 */

import {
  HistoryRow,
  PhaseSample,
  ServerMessage,
  StateMessage,
} from "./protocol.js";
import { admissibleAfter } from "./rules.js";

export interface ViewModel {
  connected: boolean;
  session: number;
  step: number;
  /** latest decision shown in the header */
  decision: { q: string; p: string; s: string; e: string } | null;
  /** actions the user may click right now (server list, cross-checked) */
  clickable: string[];
  /** one trajectory per completed step */
  trajectories: PhaseSample[][];
  latest: StateMessage | null;
  history: HistoryRow[];
  outcome: string | null;
  toast: string | null;
  pending: boolean;
}

export function initialModel(): ViewModel {
  return {
    connected: false,
    session: 0,
    step: 0,
    decision: null,
    clickable: [],
    trajectories: [],
    latest: null,
    history: [],
    outcome: null,
    toast: null,
    pending: false,
  };
}

export function applyServer(model: ViewModel, msg: ServerMessage): ViewModel {
  if (msg.type === "rejected") {
    return { ...model, toast: msg.reason, pending: false };
  }
  const fresh = msg.session !== model.session;
  const trajectories = fresh ? [] : model.trajectories.slice();
  if (msg.phase_polyline.length > 0) {
    trajectories.push(msg.phase_polyline);
  }
  // Server admissibility is authoritative; the local mirror must agree on
  // every offered action (a disagreement means the mirror is stale).
  const mirror = new Set<string>(admissibleAfter(msg.e));
  const clickable = msg.e_options.filter((a) => mirror.has(a));
  return {
    connected: true,
    session: msg.session,
    step: msg.step,
    decision: { q: msg.q_name, p: msg.p, s: msg.s, e: msg.e },
    clickable,
    trajectories,
    latest: msg,
    history: msg.history,
    outcome: msg.outcome,
    toast: null,
    pending: false,
  };
}

export function markPending(model: ViewModel): ViewModel {
  return { ...model, pending: true, toast: null };
}

export function canSend(model: ViewModel, action: string): boolean {
  return !model.pending && model.clickable.includes(action);
}

/** Decision triple sequence (q, s, p ids) for parity checks. */
export function decisionSequence(model: ViewModel): [number, number, number][] {
  return model.history.map((h) => [h.q, h.s, h.p]);
}
