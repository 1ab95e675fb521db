"""Command-line interface.

Subcommands::

    locoplan synth-task   --out automaton.json
    locoplan synth-reach  SCENARIO --out DIR [--step N] [--disturbance a,b]
    locoplan monte-carlo  SCENARIO --policies DIR --out DIR [--trials N]
                          [--seed S] [--r-sim a,b] [--open-loop]
    locoplan run-scenario SCENARIO --out DIR [--policies DIR] [--seed S]
    locoplan serve        [--port P] [--scenario S] [--policies DIR]

Scenario arguments accept a built-in name or a JSON file path; all
experiment parameters live in the scenario document, the flags only pick
files, seeds, trial counts, and ports.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _pair(text: str):
    a, b = text.split(",")
    return (float(a), float(b))


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="locoplan", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-task", help="synthesize the task-level strategy automaton")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--inject-contradiction", action="store_true",
        help="make the game unrealizable (diagnostics)",
    )

    p = sub.add_parser("synth-reach", help="synthesize reachability policies")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--step", type=int, default=None,
                   help="restrict a reactive scenario to one step index")
    p.add_argument("--disturbance", type=_pair, default=None,
                   help="override the modeled disturbance bound (a,b)")
    p.add_argument("--cells", choices=("center", "cross", "full"), default=None)

    p = sub.add_parser("monte-carlo", help="run one-step Monte-Carlo trials")
    p.add_argument("scenario")
    p.add_argument("--policies", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--r-sim", type=_pair, default=None)
    p.add_argument("--open-loop", action="store_true")

    p = sub.add_parser("run-scenario", help="run a reactive scenario end to end")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--policies", default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("serve", help="serve the interactive session endpoint")
    p.add_argument("--port", type=int, default=8716)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--scenario", default="interactive")
    p.add_argument("--policies", default=None)
    p.add_argument("--static", default=None)
    return ap


def cmd_synth_task(args) -> int:
    from locoplan.task_game import (
        StrategyAutomaton,
        build_locomotion_game,
        solve_locomotion_game,
    )

    model = build_locomotion_game(inject_contradiction=args.inject_contradiction)
    result = solve_locomotion_game(model)
    if not isinstance(result, StrategyAutomaton):
        report = {
            "realizable": False,
            "losing_initial_env": [e.name for e in result.losing_initial_env],
        }
        print(json.dumps(report, indent=2))
        print("unrealizable", file=sys.stderr)
        return 2
    Path(args.out).write_text(result.to_json())
    print(f"automaton: {len(result.nodes)} nodes, {len(result.edges)} edges -> {args.out}")
    return 0


def cmd_synth_reach(args) -> int:
    from locoplan.harness import (
        build_step_library,
        plan_reactive_steps,
        solve_task_automaton,
        synthesize_ows_scenario,
    )
    from locoplan.phase_plan import PlanError
    from locoplan.reach_synth import PolicyStore
    from locoplan.scenarios import OwsScenario, ReactiveScenario, load_scenario

    scn = load_scenario(args.scenario)
    out = Path(args.out)
    store = PolicyStore()
    try:
        if isinstance(scn, OwsScenario):
            policy, _ = synthesize_ows_scenario(scn, disturbance=args.disturbance)
            if not policy.is_reachable:
                print("center keyframe pair is not robustly reachable", file=sys.stderr)
                return 2
            store.add(policy)
        else:
            assert isinstance(scn, ReactiveScenario)
            if args.cells:
                scn.cell_block = args.cells
            model, auto = solve_task_automaton()
            if args.disturbance:
                scn.disturbance = args.disturbance
            steps = plan_reactive_steps(scn, auto, model)
            if args.step is not None:
                steps = [s for s in steps if s.index == args.step]
                if not steps:
                    print(f"no step {args.step} in scenario", file=sys.stderr)
                    return 2
            admitted = 0
            for sp in steps:
                rfts = build_step_library(scn, sp, store)
                admitted += len(rfts.transitions)
                (out / f"rfts_step{sp.index}.json").parent.mkdir(
                    parents=True, exist_ok=True
                )
                (out / f"rfts_step{sp.index}.json").write_text(rfts.to_json())
            if admitted == 0:
                print("no admitted transitions", file=sys.stderr)
                return 2
    except PlanError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    store.save_dir(str(out))
    print(f"{len(store)} policies -> {out}")
    return 0


def cmd_monte_carlo(args) -> int:
    from locoplan.harness import monte_carlo_report, report_to_csv, report_to_json_dict
    from locoplan.reach_synth import PolicyStore
    from locoplan.scenarios import OwsScenario, load_scenario

    scn = load_scenario(args.scenario)
    if not isinstance(scn, OwsScenario):
        print("monte-carlo expects a one-step scenario", file=sys.stderr)
        return 2
    try:
        store = PolicyStore.load_dir(args.policies)
    except FileNotFoundError:
        print(f"no policy index under {args.policies}", file=sys.stderr)
        return 2
    handles = store.handles()
    if not handles:
        print("policy store is empty", file=sys.stderr)
        return 2
    policy = store.get(handles[0])
    report = monte_carlo_report(
        scn,
        policy,
        trials=args.trials,
        r_sim=args.r_sim,
        seed=args.seed,
        open_loop=args.open_loop,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report_to_json_dict(report), indent=2, sort_keys=True)
    )
    (out / "report.csv").write_text(report_to_csv(report))
    print(f"{report.successes}/{report.trials} trials reached the goal margin")
    return 0


def cmd_run_scenario(args) -> int:
    from locoplan.executor import REACHED_GOAL
    from locoplan.harness import run_reactive, solve_task_automaton
    from locoplan.reach_synth import PolicyStore
    from locoplan.scenarios import ReactiveScenario, load_scenario

    scn = load_scenario(args.scenario)
    if not isinstance(scn, ReactiveScenario):
        print("run-scenario expects a reactive scenario", file=sys.stderr)
        return 2
    store = PolicyStore.load_dir(args.policies) if args.policies else None
    model, auto = solve_task_automaton()
    seed = args.seed if args.seed is not None else (scn.seeds[0] if scn.seeds else 0)
    run = run_reactive(scn, auto, model, store, seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "log.csv").write_text(run.log.to_csv())
    (out / "log.json").write_text(
        json.dumps(run.log.to_json_dict(), indent=1, sort_keys=True)
    )
    steps_doc = {
        "trace": [
            {"q": q, "e": e.name, "s": s.name, "p": p.name}
            for q, e, s, p in run.trace
        ],
        "outcomes": [
            {"kind": o.kind, "reason": o.reason, "policy_switches": o.policy_switches}
            for o in run.outcomes
        ],
        "rejected": [
            {"step": i, "action": a.name, "reason": r} for i, a, r in run.rejected
        ],
        "keyframes": [list(k) for k in run.keyframes],
    }
    (out / "steps.json").write_text(json.dumps(steps_doc, indent=2, sort_keys=True))
    for idx in sorted({r.step for r in run.log.records}):
        pts = [
            f"{r.x:.10g},{r.vx:.10g}" for r in run.log.records if r.step == idx
        ]
        (out / f"polyline_step{idx}.csv").write_text("x,vx\n" + "\n".join(pts) + "\n")
    ok = sum(1 for o in run.outcomes if o.kind == REACHED_GOAL)
    print(f"{ok}/{len(run.outcomes)} steps reached their goal margin -> {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from locoplan.reach_synth import PolicyStore
    from locoplan.scenarios import ReactiveScenario, load_scenario
    from locoplan.service import SessionEngine, make_app

    scn = load_scenario(args.scenario)
    if not isinstance(scn, ReactiveScenario):
        print("serve expects a reactive scenario", file=sys.stderr)
        return 2
    store = PolicyStore.load_dir(args.policies) if args.policies else None
    engine = SessionEngine(scenario=scn, store=store)
    app = make_app(engine, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "synth-task": cmd_synth_task,
    "synth-reach": cmd_synth_reach,
    "monte-carlo": cmd_monte_carlo,
    "run-scenario": cmd_run_scenario,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
