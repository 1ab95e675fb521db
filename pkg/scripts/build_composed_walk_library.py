#!/usr/bin/env python3
"""Build the per-step controller library of the composed six-step walk.

By default each step uses the plus-shaped 5-cell block on both the initial
and the final keyframe grid (25 cell pairs per step).  ``--full`` switches
to the complete neighbour block with halved keyframe-grid granularity,
i.e. a 5x5 cell block per side and up to 625 pairs per step; expect this
to run for a long time.

Usage: python3 scripts/build_composed_walk_library.py --out DIR [--full]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from locoplan.harness import (
    build_step_library,
    plan_reactive_steps,
    run_reactive,
    solve_task_automaton,
)
from locoplan.reach_synth import PolicyStore, ReachabilityBackend
from locoplan.rfts import RiemGrid, build_rfts
from locoplan.scenarios import case_composed_walk


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/composed_walk_library")
    ap.add_argument("--full", action="store_true",
                    help="5x5 keyframe-cell block per side (long job)")
    ap.add_argument("--validate-runs", type=int, default=2)
    args = ap.parse_args()

    model, auto = solve_task_automaton()
    scn = case_composed_walk()
    store = PolicyStore()
    t00 = time.time()
    for step in plan_reactive_steps(scn, auto, model):
        t0 = time.time()
        if not args.full:
            rfts = build_step_library(scn, step, store)
        else:
            backend = ReachabilityBackend(
                state_box=step.state_box,
                control1=step.control1,
                control2=step.control2,
                disturbance=scn.disturbance,
                dzeta=scn.dzeta,
                eta=scn.eta,
                control_step=scn.control_step,
                s1=step.s1,
                s2=step.s2,
            )
            e1, e2 = step.margins
            grid = RiemGrid(
                min(e1.d_zeta, e2.d_zeta) / 2.0, min(e1.d_sigma, e2.d_sigma) / 2.0
            )
            rfts = build_rfts(
                step.kf_initial, step.kf_final, step.params1, step.params2,
                step.s1, step.s2, e1, e2, grid, backend, store=store,
                cell_block=None,
            )
        print(
            f"step {step.index} {step.params1.mode.name}->{step.params2.mode.name}: "
            f"{len(rfts.transitions)} admitted transitions ({time.time() - t0:.0f}s)",
            flush=True,
        )
    print(f"library: {len(store)} policies in {time.time() - t00:.0f}s")
    store.save_dir(args.out)
    print(f"saved -> {args.out}")

    for seed in range(args.validate_runs):
        run = run_reactive(scn, auto, model, store, seed)
        kinds = [o.kind for o in run.outcomes]
        print(f"validation seed {seed}: {kinds}")


if __name__ == "__main__":
    main()
