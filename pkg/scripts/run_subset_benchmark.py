#!/usr/bin/env python3
"""Desk-scale subset-training benchmark.

Trains on 10% per-class subsets plus their bounded augmentations under three
arms (coreset+aug, random+aug, coreset without aug) across seeds and reports
mean test accuracy per arm.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from coreaug.augment import TransformSpec
from coreaug.coreset import SelectionConfig
from coreaug.data import gen_dataset, split_dataset
from coreaug.trainer import LrSchedule, TrainConfig, train


def run_arm(tr, te, baseline, eps, seed, args):
    cfg = TrainConfig(
        regime="coreset_only",
        selection=SelectionConfig(stop="fixed_size", fraction=args.fraction),
        transform=TransformSpec(kind=args.transform_kind, epsilon0=eps, r=args.r,
                                seed=seed),
        refresh_r=args.refresh_r,
        epochs=args.epochs,
        lr=LrSchedule(args.lr, (2 * args.epochs // 3,), 0.1),
        batch_size=args.batch_size,
        seed=seed,
        baseline=baseline,
        hidden_sizes=(args.hidden,),
        activation=args.activation,
    )
    record = train(cfg, tr, te)
    return record.rows[-1].test_acc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=900)
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--noise", type=float, default=0.25)
    ap.add_argument("--margin", type=float, default=0.35)
    ap.add_argument("--data-seed", type=int, default=100)
    ap.add_argument("--test-fraction", type=float, default=1.0 / 3.0)
    ap.add_argument("--fraction", type=float, default=0.1)
    ap.add_argument("--epsilon0", type=float, default=16.0 / 255.0)
    ap.add_argument("--transform-kind", default="uniform_ball")
    ap.add_argument("--r", type=int, default=1)
    ap.add_argument("--refresh-r", type=int, default=1)
    ap.add_argument("--epochs", type=int, default=90)
    ap.add_argument("--lr", type=float, default=0.001)
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--activation", default="relu")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="results/subset_benchmark.json")
    args = ap.parse_args()

    full = gen_dataset("gaussian_blobs", args.n, args.d, args.classes,
                       seed=args.data_seed, noise=args.noise, margin=args.margin)
    tr, te = split_dataset(full, args.test_fraction, seed=0)
    print(f"train {tr.n} / test {te.n}, fraction {args.fraction}, "
          f"epsilon0 {args.epsilon0:.4f}")
    arms = {
        "coreset+aug": ("ours", args.epsilon0),
        "random+aug": ("random", args.epsilon0),
        "coreset-noaug": ("ours", 0.0),
    }
    results = {}
    for name, (baseline, eps) in arms.items():
        accs = [run_arm(tr, te, baseline, eps, seed, args)
                for seed in range(args.seeds)]
        results[name] = {"mean": float(np.mean(accs)), "std": float(np.std(accs)),
                         "accs": accs}
        print(f"{name:14s} mean={results[name]['mean']:.4f} "
              f"std={results[name]['std']:.4f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"config": vars(args), "results": results},
                              indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
