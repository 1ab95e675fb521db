/** Client-side mirror of the environment's own consecutive-action rules.
 *
 * The server's `e_options` field stays authoritative; this mirror only
 * pre-disables buttons so the console never offers a move the server
 * would reject.
 */

import { ENV_ACTIONS, EnvAction } from "./protocol.js";

const FORBIDDEN_AFTER: Record<string, EnvAction[]> = {
  e_tc_hc: ["e_tc_hc", "e_ha", "e_np"],
  e_tc_nc: ["e_tc_hc", "e_ha", "e_np"],
  e_np: ["e_tc_hc", "e_tc_nc"],
};

export function admissibleAfter(current: string): EnvAction[] {
  const forbidden = new Set(FORBIDDEN_AFTER[current] ?? []);
  return ENV_ACTIONS.filter((a) => !forbidden.has(a));
}

export function isAdmissible(current: string, next: string): boolean {
  return admissibleAfter(current).includes(next as EnvAction);
}
