#!/usr/bin/env python3
"""Synthesize the reference single-step walk controller and report the
winning-set coverage of the initial margin box.

Usage: python3 scripts/build_walk_step.py [--out DIR] [--disturbance a,b]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from locoplan.abstraction import build_abstraction, save_abstraction
from locoplan.reach_synth import PolicyStore, synthesize_pair
from locoplan.scenarios import case_single_step_walk


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/walk_step")
    ap.add_argument("--disturbance", default=None, help="override bound 'a,b'")
    ap.add_argument("--cache-abstraction", action="store_true")
    args = ap.parse_args()

    scn = case_single_step_walk()
    plan, sub = scn.build()
    if args.disturbance:
        a, b = args.disturbance.split(",")
        sub.disturbance = (float(a), float(b))
    t0 = time.time()
    ab = build_abstraction(sub, eta=scn.eta, control_step=scn.control_step)
    syn = synthesize_pair(ab)
    pol = syn.as_policy((0, 0), (0, 0))
    init = ab.initial_cells()
    cover = (init & syn.win1).sum() / init.sum()
    print(
        f"grid {ab.grid.nx}x{ab.grid.nv}, {len(ab.controls1)} controls, "
        f"D_r={sub.disturbance}"
    )
    print(
        f"reachable={pol.is_reachable}  win1={int(syn.win1.sum())} "
        f"win2={int(syn.win2.sum())}  initial-margin coverage={cover:.3f}  "
        f"({time.time() - t0:.1f}s)"
    )
    out = Path(args.out)
    store = PolicyStore()
    store.add(pol)
    store.save_dir(str(out))
    if args.cache_abstraction:
        save_abstraction(ab, str(out / "abstraction.bin"))
    print(f"policy -> {out}")


if __name__ == "__main__":
    main()
