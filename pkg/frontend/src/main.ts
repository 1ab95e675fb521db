/** Browser entry: websocket wiring and DOM updates.
 *
 * The user plays the adversarial environment: each button injects one
 * environment action, the planner answers with its keyframe/contact/mode
 * decision and the executed phase-space trajectory.
 */

import {
  ViewModel,
  applyServer,
  canSend,
  initialModel,
  markPending,
} from "./model.js";
import { ENV_ACTIONS, ServerMessage } from "./protocol.js";
import { paint } from "./canvas.js";
import { renderMarginOverlay, renderPhaseView } from "./view.js";

const ACTION_LABELS: Record<string, string> = {
  e_md: "terrain: gently down",
  e_hd: "terrain: sharply down",
  e_mu: "terrain: gently up",
  e_hu: "terrain: sharply up",
  e_tc_nc: "crack + reachable ceiling",
  e_tc_hc: "crack + high ceiling",
  e_ha: "human appears",
  e_np: "narrow passage",
};

let model: ViewModel = initialModel();
let socket: WebSocket | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

function connect(): void {
  const url = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
  socket = new WebSocket(url);
  socket.onmessage = (ev) => {
    const msg = JSON.parse(ev.data) as ServerMessage;
    model = applyServer(model, msg);
    redraw();
  };
  socket.onclose = () => {
    model = { ...initialModel(), toast: "disconnected - retrying" };
    redraw();
    setTimeout(connect, 1500);
  };
}

function send(payload: object): void {
  socket?.send(JSON.stringify(payload));
}

function redraw(): void {
  const status = $("status");
  status.textContent = model.toast
    ? model.toast
    : model.connected
      ? `step ${model.step}` +
        (model.outcome ? ` - ${model.outcome.replaceAll("_", " ")}` : "")
      : "connecting";
  status.className = model.toast ? "toast" : "ok";

  const dec = $("decision");
  dec.textContent = model.decision
    ? `env ${model.decision.e} -> keyframe ${model.decision.q}, ` +
      `mode ${model.decision.p}, contacts ${model.decision.s}`
    : "-";

  const buttons = $("actions");
  buttons.innerHTML = "";
  for (const action of ENV_ACTIONS) {
    const b = document.createElement("button");
    b.textContent = ACTION_LABELS[action] ?? action;
    b.disabled = !canSend(model, action);
    b.onclick = () => {
      model = markPending(model);
      redraw();
      send({ type: "env_action", action });
    };
    buttons.appendChild(b);
  }
  const reset = document.createElement("button");
  reset.textContent = "reset";
  reset.className = "reset";
  reset.onclick = () => send({ type: "reset" });
  buttons.appendChild(reset);

  const hist = $("history");
  hist.innerHTML =
    "<tr><th>step</th><th>env</th><th>q</th><th>s</th><th>p</th></tr>" +
    model.history
      .map(
        (h) =>
          `<tr><td>${h.step}</td><td>${h.e}</td><td>${h.q}</td><td>${h.s}</td><td>${h.p}</td></tr>`,
      )
      .join("");

  const phase = $("phase") as HTMLCanvasElement;
  paint(
    phase.getContext("2d")!,
    renderPhaseView(model.trajectories, model.latest, phase.width, phase.height),
  );
  const overlay = $("overlay") as HTMLCanvasElement;
  paint(
    overlay.getContext("2d")!,
    renderMarginOverlay(model.latest, overlay.width, overlay.height),
  );
}

window.addEventListener("DOMContentLoaded", () => {
  redraw();
  connect();
});
