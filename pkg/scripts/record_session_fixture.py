#!/usr/bin/env python3
"""Record an interactive session fixture for the browser console tests.

Drives the session engine through a fair 21-action environment cycle,
captures every server message, replays the same action list through the
scripted reactive runner, and asserts the decision sequences agree before
freezing everything into frontend/fixtures/session_fixture.json.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from locoplan.harness import run_reactive, solve_task_automaton
from locoplan.scenarios import EnvStep, ReactiveScenario
from locoplan.service import SessionEngine
from locoplan.task_game import cycling_fair_env, env_allowed_next


def main() -> None:
    engine = SessionEngine()
    envs = cycling_fair_env(21)
    messages = [engine.reset(envs[0].name)]
    for e in envs[1:]:
        msg = engine.handle({"type": "env_action", "action": e.name})
        assert msg["type"] == "state", msg
        messages.append(msg)
    expected = [[h["q"], h["s"], h["p"]] for h in engine.history]

    scn = ReactiveScenario(
        name="fixture_replay",
        env_script=[EnvStep(e.name) for e in envs],
        initial_contact_x=0.0,
        full_box=(-0.2, 14.2, 0.2, 1.9),
    )
    model, auto = solve_task_automaton()
    run = run_reactive(scn, auto, model, None, seed=0)
    cli = [[q, int(s), int(p)] for q, _, s, p in run.trace]
    assert cli == expected[: len(cli)], "decision parity broken at record time"
    assert len(cli) >= 15

    probe = None
    for i, msg in enumerate(messages):
        allowed = set(msg["e_options"])
        for cand in ("e_tc_hc", "e_ha", "e_np", "e_tc_nc"):
            if cand not in allowed:
                probe = {"after_message": i, "action": cand}
                break
        if probe:
            break
    assert probe, "cycle never visited a restricted state"

    out = Path(__file__).resolve().parents[1] / "frontend" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": "locoplan-session-fixture/1",
        "actions": [e.name for e in envs],
        "messages": messages,
        "expected_decisions": expected,
        "cli_decisions": cli,
        "rejected_probe": probe,
    }
    (out / "session_fixture.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    print(f"recorded {len(messages)} messages, {len(expected)} decisions -> {out}")


if __name__ == "__main__":
    main()
