#!/usr/bin/env python3
"""Train the unrolled solver on generated scenes and save a checkpoint.

Writes the checkpoint next to a loss-history CSV so runs can be compared:

    python3 scripts/train_model.py --scenes 50 --epochs 10 --out runs/unroll.rmu
"""

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from radiomap.io import write_checkpoint
from radiomap.propagation import SceneSpec, generate_scene, sample_mask
from radiomap.unrolled import TrainConfig, UnrolledModel, train


def build_dataset(n_scenes, h, w, k_bands, sparsity, spike_percent, seed0):
    pairs = []
    for i in range(n_scenes):
        spec = SceneSpec.random(h, w, k_bands, n_transmitters=1 + i % 2,
                                n_obstructions=round(spike_percent / 100 * h * w),
                                obstruction_depth=15.0, seed=seed0 + i)
        truth = generate_scene(spec).ground_truth
        mask = sample_mask(h, w, sparsity, seed=seed0 + 1000 + i)
        pairs.append((truth, mask))
    return pairs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=50)
    ap.add_argument("--grid", type=int, nargs=2, default=(64, 64), metavar=("H", "W"))
    ap.add_argument("--bands", type=int, default=3)
    ap.add_argument("--sparsity", type=float, default=10.0,
                    help="observed cells, percent")
    ap.add_argument("--spike-percent", type=float, default=0.75,
                    help="obstructed cells, percent of grid")
    ap.add_argument("--k-blocks", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="unroll.rmu")
    args = ap.parse_args(argv)

    h, w = args.grid
    t0 = time.time()
    pairs = build_dataset(args.scenes, h, w, args.bands, args.sparsity,
                          args.spike_percent, seed0=5000 + 10_000 * args.seed)
    print(f"[{time.time() - t0:5.1f}s] {len(pairs)} scenes built")

    model = UnrolledModel.create(h=h, w=w, k_bands=args.bands,
                                 k_blocks=args.k_blocks, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed)
    model, hist = train(model, pairs, cfg)
    # per-sample train losses, per-epoch validation losses
    n_ep = len(hist["val"]) or args.epochs
    tr = np.asarray(hist["train"], dtype=float).reshape(n_ep, -1).mean(axis=1)
    val = hist["val"] or [float("nan")] * n_ep
    best = hist["best_val"] or [float("nan")] * n_ep
    print(f"[{time.time() - t0:5.1f}s] trained: "
          f"train {tr[-1]:.5f}, val {val[-1]:.5f}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_checkpoint(out, model)
    with open(out.with_suffix(".loss.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["epoch", "train", "val", "best_val"])
        for ep in range(n_ep):
            wr.writerow([ep, f"{tr[ep]:.6f}", f"{val[ep]:.6f}", f"{best[ep]:.6f}"])
    print(f"checkpoint -> {out}, losses -> {out.with_suffix('.loss.csv')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
