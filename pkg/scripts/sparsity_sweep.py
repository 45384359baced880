#!/usr/bin/env python3
"""Sweep every method over sampling rates and write one CSV of metrics.

    python3 scripts/sparsity_sweep.py --model runs/unroll.rmu --out sweep.csv

Without --model the unrolled method is skipped and only the classical
solvers and interpolators run.
"""

import argparse
import sys
import time

import numpy as np

from radiomap.io import read_checkpoint, write_reports_csv
from radiomap.metrics import standard_methods, sweep
from radiomap.propagation import SceneSpec, generate_scene


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=2)
    ap.add_argument("--grid", type=int, nargs=2, default=(64, 64), metavar=("H", "W"))
    ap.add_argument("--bands", type=int, default=3)
    ap.add_argument("--sparsities", type=float, nargs="+",
                    default=(1.0, 5.0, 10.0, 20.0))
    ap.add_argument("--seeds", type=int, nargs="+", default=(0, 1, 2, 3, 4))
    ap.add_argument("--spike-percent", type=float, default=0.75,
                    help="obstructed cells, percent of grid")
    ap.add_argument("--scene-seed", type=int, default=9000)
    ap.add_argument("--model", default=None, help="unrolled checkpoint to include")
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args(argv)

    h, w = args.grid
    scenes = []
    for s in range(args.scenes):
        spec = SceneSpec.random(h, w, args.bands, n_transmitters=1 + s % 2,
                                n_obstructions=round(args.spike_percent / 100 * h * w),
                                obstruction_depth=15.0, seed=args.scene_seed + s)
        scenes.append(generate_scene(spec).ground_truth)

    model = read_checkpoint(args.model) if args.model else None
    methods = standard_methods(model)
    if model is None:
        methods.pop("unroll", None)

    t0 = time.time()
    reports = sweep(methods, scenes, sparsities=args.sparsities, seeds=args.seeds)
    write_reports_csv(args.out, reports)
    print(f"{len(reports)} rows -> {args.out} in {time.time() - t0:.0f} s")

    for name in methods:
        curve = []
        for sp in args.sparsities:
            vals = [r.psnr_db for r in reports
                    if r.method == name and r.sparsity_percent == sp]
            curve.append(np.nanmean(vals))
        print(f"{name:>8}: " + "  ".join(f"{sp:g}%={c:.2f}"
                                         for sp, c in zip(args.sparsities, curve)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
