#!/usr/bin/env python3
"""Label-noise robustness of subset selection.

Injects label noise, warms a small net up on the noisy data, then compares how
many flipped-label points land inside equal-size coreset, max-loss, and random
selections.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from coreaug.coreset import (
    SelectionConfig,
    max_loss_subset,
    random_subset,
    select_all_classes,
)
from coreaug.data import gen_dataset
from coreaug.model import MLP, forward, gradient_proxy
from coreaug.trainer import inject_label_noise, noisy_selection_audit, sgd_warmup


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=600)
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--noise-frac", type=float, default=0.30)
    ap.add_argument("--fraction", type=float, default=0.1)
    ap.add_argument("--warmup-epochs", type=int, default=15)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="results/noise_robustness.json")
    args = ap.parse_args()

    rows = []
    for seed in range(args.seeds):
        data = gen_dataset("gaussian_blobs", args.n, args.d, 3, seed=50, noise=0.10)
        noisy, mask = inject_label_noise(data, args.noise_frac, seed=seed)
        net = MLP.init([args.d, 16, 3], activation="tanh", seed=seed)
        sgd_warmup(net, noisy, epochs=args.warmup_epochs, lr=0.002,
                   batch_size=32, seed=seed)
        preds = forward(net, noisy.features)
        losses = 0.5 * np.sum((preds - noisy.one_hot_labels()) ** 2, axis=1)
        coreset = select_all_classes(
            gradient_proxy(net, noisy, "last_layer"),
            SelectionConfig(stop="fixed_size", fraction=args.fraction))
        max_loss = max_loss_subset(losses, None, noisy.labels,
                                   fraction=args.fraction)
        rand = random_subset(noisy.n, None, noisy.labels, seed=seed,
                             fraction=args.fraction)
        row = {
            "seed": seed,
            "coreset": noisy_selection_audit(coreset.indices, mask),
            "max_loss": noisy_selection_audit(max_loss.indices, mask),
            "random": noisy_selection_audit(rand.indices, mask),
        }
        rows.append(row)
        print(f"seed {seed}: coreset={row['coreset']:.3f} "
              f"max_loss={row['max_loss']:.3f} random={row['random']:.3f}")
    means = {k: float(np.mean([r[k] for r in rows]))
             for k in ("coreset", "max_loss", "random")}
    print("means:", {k: round(v, 3) for k, v in means.items()},
          f"(injected fraction {args.noise_frac})")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"config": vars(args), "rows": rows,
                               "means": means}, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
