#!/usr/bin/env python3
"""Success-rate sweep over modeled disturbance levels.

Synthesizes one controller per level, simulates every level under the same
disturbance realization and start states, and prints the closed-loop rates
next to the fixed-control open-loop baseline.

Usage: python3 scripts/success_rate_sweep.py [--trials N] [--seed S]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from locoplan.abstraction import build_abstraction
from locoplan.executor import monte_carlo_ows, sample_initial_states
from locoplan.reach_synth import synthesize_pair
from locoplan.scenarios import CURVE_LEVELS, case_success_curve


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=313)
    args = ap.parse_args()

    scn = case_success_curve()
    r_sim = scn.r_sim
    policies = {}
    for level in CURVE_LEVELS:
        t0 = time.time()
        plan, sub = scn.build()
        sub.disturbance = level
        ab = build_abstraction(sub, eta=scn.eta, control_step=scn.control_step)
        syn = synthesize_pair(ab)
        policies[level] = (syn.as_policy((0, 0), (0, 0)), plan)
        print(f"synthesized D={level} in {time.time() - t0:.1f}s "
              f"(win1={int(syn.win1.sum())})")

    top, top_plan = policies[CURVE_LEVELS[-1]]
    starts = sample_initial_states(top, args.trials, np.random.default_rng(args.seed))
    print(f"\nsimulating {args.trials} trials at r_sim={r_sim} ({scn.sampler}):")
    for i, level in enumerate(CURVE_LEVELS):
        pol, _ = policies[level]
        rep = monte_carlo_ows(
            pol, args.trials, r_sim, seed=1000 + i, starts=starts, sampler=scn.sampler
        )
        print(f"  D{i}={level}: success {rep.success_rate:.3f}")
    rep = monte_carlo_ows(
        top, args.trials, r_sim, seed=2000, starts=starts, sampler=scn.sampler,
        open_loop=True, nominal_plan=top_plan,
    )
    print(f"  open-loop baseline: success {rep.success_rate:.3f}")


if __name__ == "__main__":
    main()
