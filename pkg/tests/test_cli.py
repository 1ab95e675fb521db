"""Command-line plumbing and the interactive session engine."""

import json
from pathlib import Path

import numpy as np
import pytest

from locoplan.cli import main
from locoplan.scenarios import (
    OwsScenario,
    ModeSpec,
    case_replan_in_flight,
    scenario_from_json,
    scenario_to_json,
)
from locoplan.service import SessionEngine
from locoplan.task_game import EnvAction


@pytest.fixture(scope="module")
def small_ows_scenario(tmp_path_factory):
    """Trimmed one-step scenario: fast enough for plumbing tests."""
    scn = OwsScenario(
        name="unit_walk",
        kf_initial=(0.0, 0.5),
        kf_final=(0.5, 0.6),
        mode1=ModeSpec("PIPM", 3.0, (2.0, 4.0)),
        mode2=ModeSpec("PIPM", 3.0, (2.0, 4.0)),
        state_box=(-0.12, 0.68, 0.3, 1.1),
        margins_initial=(0.05, 0.002),
        margins_final=(0.05, 0.006),
        disturbance=(0.05, 0.1),
        eta=(0.008, 0.008),
        control_step=0.25,
        trials=20,
        seed=3,
    )
    path = tmp_path_factory.mktemp("scn") / "unit_walk.json"
    path.write_text(scenario_to_json(scn))
    return path


class TestScenarioIo:
    def test_roundtrip(self, small_ows_scenario):
        text = small_ows_scenario.read_text()
        scn = scenario_from_json(text)
        assert scenario_to_json(scn) == text

    def test_reactive_roundtrip(self):
        scn = case_replan_in_flight()
        back = scenario_from_json(scenario_to_json(scn))
        assert scenario_to_json(back) == scenario_to_json(scn)
        assert back.env_script[2].abrupt_change_to == "e_tc_nc" 


class TestSynthTask:
    def test_writes_deterministic_automaton(self, tmp_path):
        out1 = tmp_path / "a1.json"
        out2 = tmp_path / "a2.json"
        assert main(["synth-task", "--out", str(out1)]) == 0
        assert main(["synth-task", "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        doc = json.loads(out1.read_text())
        assert doc["indexing"]["env"][0] == "e_md"
        assert len(doc["indexing"]["keyframes"]) == 27

    def test_contradiction_exits_2(self, tmp_path, capsys):
        rc = main(
            ["synth-task", "--out", str(tmp_path / "x.json"), "--inject-contradiction"]
        )
        assert rc == 2
        assert "unrealizable" in capsys.readouterr().err


class TestSynthReachAndMonteCarlo:
    def test_pipeline(self, small_ows_scenario, tmp_path):
        poldir = tmp_path / "policies"
        rc = main(["synth-reach", str(small_ows_scenario), "--out", str(poldir)])
        assert rc == 0
        assert (poldir / "index.json").exists()

        outdir = tmp_path / "mc"
        rc = main(
            [
                "monte-carlo", str(small_ows_scenario),
                "--policies", str(poldir), "--out", str(outdir),
                "--trials", "20", "--seed", "5",
            ]
        )
        assert rc == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["trials"] == 20
        assert report["successes"] == 20
        csv_lines = (outdir / "report.csv").read_text().splitlines()
        assert csv_lines[0] == "trial,outcome,holds"
        assert sum("reached_goal" in ln for ln in csv_lines[1:]) == report["successes"]


class TestRunScenario:
    def test_replan_scenario_logs(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["run-scenario", "replan_in_flight", "--out", str(out), "--seed", "0"])
        assert rc == 0
        csv_text = (out / "log.csv").read_text()
        assert csv_text.splitlines()[0].startswith("step,zeta,x,vx,mode")
        steps = json.loads((out / "steps.json").read_text())
        assert any(o["kind"] == "replanned" for o in steps["outcomes"])
        assert any(t["p"] == "PPM" for t in steps["trace"])
        assert (out / "polyline_step1.csv").exists()

    def test_rejected_action_logged(self, tmp_path):
        from locoplan.scenarios import ReactiveScenario, EnvStep, scenario_to_json

        scn = ReactiveScenario(
            name="reject",
            env_script=[
                EnvStep("e_md"),
                EnvStep("e_tc_hc"),
                EnvStep("e_tc_hc"),
                EnvStep("e_md"),
            ],
            keyframe_overrides={1: (0.5, 0.6)},
        )
        path = tmp_path / "reject.json"
        path.write_text(scenario_to_json(scn))
        out = tmp_path / "run"
        assert main(["run-scenario", str(path), "--out", str(out)]) == 0
        steps = json.loads((out / "steps.json").read_text())
        assert any(r["action"] == "e_tc_hc" for r in steps["rejected"])


class TestSessionEngine:
    @pytest.fixture(scope="class")
    def engine(self):
        return SessionEngine(idle_timeout=0.2)

    def test_reset_and_step_flow(self, engine):
        msg = engine.reset("e_md")
        assert msg["type"] == "state"
        assert msg["step"] == 0
        assert set(msg["e_options"]) == {e.name for e in EnvAction}
        out = engine.handle({"type": "env_action", "action": "e_md"})
        assert out["type"] == "state"
        assert out["step"] == 1
        assert out["outcome"] == "reached_goal"
        assert len(out["phase_polyline"]) > 2

    def test_inadmissible_action_rejected_with_rule(self, engine):
        engine.reset("e_md")
        first = engine.handle({"type": "env_action", "action": "e_tc_hc"})
        assert first["type"] == "state"
        again = engine.handle({"type": "env_action", "action": "e_tc_hc"})
        assert again["type"] == "rejected"
        assert "S_e-1" in again["reason"]

    def test_unknown_message_rejected(self, engine):
        assert engine.handle({"type": "bogus"})["type"] == "rejected"

    def test_idle_timeout_expires_cleanly(self):
        import time

        eng = SessionEngine(idle_timeout=0.05)
        eng.reset("e_md")
        time.sleep(0.08)
        assert eng.expire_if_idle()
        assert eng.session is None
        out = eng.handle({"type": "env_action", "action": "e_md"})
        assert out["type"] == "rejected"

    def test_decision_parity_with_reactive_run(self):
        """A recorded interactive session replays identically through the
        scripted reactive loop (same (q, s, p) per step)."""
        from locoplan.harness import run_reactive, solve_task_automaton
        from locoplan.scenarios import EnvStep, ReactiveScenario
        from locoplan.task_game import cycling_fair_env

        engine = SessionEngine()
        envs = cycling_fair_env(21)
        engine.reset(envs[0].name)
        for e in envs[1:]:
            msg = engine.handle({"type": "env_action", "action": e.name})
            assert msg["type"] == "state", msg
        recorded = [(h["q"], h["s"], h["p"]) for h in engine.history]

        scn = ReactiveScenario(
            name="parity",
            env_script=[EnvStep(e.name) for e in envs],
            initial_contact_x=0.0,
            full_box=(-0.2, 14.2, 0.2, 1.9),  # room for 20 steps
        )
        model, auto = solve_task_automaton()
        run = run_reactive(scn, auto, model, None, seed=0)
        replayed = [(q, int(s), int(p)) for q, _, s, p in run.trace]
        assert replayed == recorded[: len(replayed)]
        assert len(replayed) >= 15
