"""Weighted SGD over three training regimes with periodic subset refresh.

Regimes assemble the epoch's weighted pool from a freshly selected subset and
its bounded augmentations:

* ``coreset_only``: the weighted subset itself (integer weights) plus its
  augmented copies (divided weights).
* ``full_plus_coreset_aug``: all training rows at weight 1 plus the augmented
  subset at divided weights.
* ``random_plus_coreset_aug``: a fixed random fraction of the data at weight 1
  plus the augmented subset at divided weights.

Weights enter the gradient, not the sampling probability: mini-batches are
drawn uniformly from the pool and each step applies the weighted gradient sum.
Every random draw derives from the config seed, so a config reproduces its
record bit for bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .augment import TransformSpec, perturb
from .coreset import (
    SelectionConfig,
    max_loss_subset,
    random_subset,
    select_all_classes,
)
from .model import (
    MLP,
    Dataset,
    forward,
    gradient_proxy,
    jacobian,
    one_hot,
    weighted_gradient,
)

__all__ = [
    "LrSchedule",
    "TrainConfig",
    "EpochRow",
    "TrainRecord",
    "inject_label_noise",
    "weighted_gradient_step",
    "evaluate",
    "train",
    "initial_pool",
    "sgd_warmup",
    "noisy_selection_audit",
    "pl_convergence_envelope",
    "measure_pl_constants",
]

REGIMES = ("coreset_only", "full_plus_coreset_aug", "random_plus_coreset_aug")
BASELINES = ("ours", "random", "max_loss")

CSV_HEADER = "epoch,train_loss,test_loss,test_acc,grad_norm,refreshed,selection_ms,points_touched"


@dataclass(frozen=True)
class LrSchedule:
    """Step schedule: eta(epoch) = initial * factor^(decay epochs passed)."""

    initial: float
    decay_epochs: tuple[int, ...] = ()
    factor: float = 0.1

    def value(self, epoch: int) -> float:
        drops = sum(1 for e in self.decay_epochs if epoch >= e)
        return self.initial * self.factor**drops


@dataclass(frozen=True)
class TrainConfig:
    regime: str = "full_plus_coreset_aug"
    selection: SelectionConfig = field(default_factory=lambda: SelectionConfig(fraction=0.1))
    transform: TransformSpec = field(default_factory=TransformSpec)
    refresh_r: int = 1
    epochs: int = 10
    lr: LrSchedule = field(default_factory=lambda: LrSchedule(0.01))
    batch_size: int = 32
    seed: int = 0
    label_noise_frac: float = 0.0
    baseline: str = "ours"
    proxy_mode: str = "last_layer"
    random_fraction: float = 0.5
    hidden_sizes: tuple[int, ...] = (32,)
    activation: str = "tanh"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}")
        if self.refresh_r < 1 or self.epochs < 1:
            raise ValueError("refresh_r and epochs must be >= 1")
        if not 0.0 <= self.label_noise_frac < 1.0:
            raise ValueError("label_noise_frac must lie in [0, 1)")


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    test_loss: float
    test_acc: float
    grad_norm: float
    refreshed: bool
    selection_ms: float
    points_touched: int


@dataclass
class TrainRecord:
    rows: list[EpochRow]
    initial_grad_norm: float
    noisy_mask: np.ndarray | None = None
    selection_events: list[tuple[int, np.ndarray]] = field(default_factory=list)
    final_params: np.ndarray | None = None

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in self.rows:
                fh.write(
                    f"{r.epoch},{r.train_loss!r},{r.test_loss!r},{r.test_acc!r},"
                    f"{r.grad_norm!r},{int(r.refreshed)},{r.selection_ms!r},{r.points_touched}\n"
                )


def inject_label_noise(data: Dataset, frac: float, seed: int = 0):
    """Flip floor(frac * n) uniformly chosen labels to a uniformly chosen
    different class. Returns the noisy dataset and the boolean flip mask."""
    if not 0.0 <= frac < 1.0:
        raise ValueError("frac must lie in [0, 1)")
    mask = np.zeros(data.n, dtype=bool)
    if frac == 0.0:
        return data, mask
    if data.num_classes < 2:
        raise ValueError("cannot flip labels with a single class")
    rng = np.random.default_rng(seed)
    count = int(math.floor(frac * data.n))
    chosen = rng.choice(data.n, size=count, replace=False)
    labels = data.labels.copy()
    for i in chosen:
        draw = int(rng.integers(0, data.num_classes - 1))
        labels[i] = draw + (draw >= labels[i])
        mask[i] = True
    return data.with_labels(labels), mask


def weighted_gradient_step(net: MLP, X_batch, y_batch, rho, eta: float) -> MLP:
    """W <- W - eta * sum_i rho_i * grad_i. Updates the network in place."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0.0):
        raise ValueError("weights must be nonnegative")
    grad = weighted_gradient(net, X_batch, y_batch, rho)
    net.set_params(net.get_params() - eta * grad)
    return net


def evaluate(net: MLP, data: Dataset) -> tuple[float, float]:
    """(mean squared-error loss with the 1/2 factor, argmax accuracy).

    Prediction ties resolve to the smallest class index.
    """
    preds = forward(net, data.features)
    r = preds - data.one_hot_labels()
    mean_loss = 0.5 * float(np.sum(r * r)) / data.n
    acc = float(np.mean(np.argmax(preds, axis=1) == data.labels))
    return mean_loss, acc


@dataclass
class _Pool:
    X: np.ndarray
    Y: np.ndarray
    w: np.ndarray
    origins: np.ndarray


def _select_subset(config: TrainConfig, net: MLP, data: Dataset,
                   refresh_idx: int):
    """(global indices, per-original-row weights, per-augmented-copy weights)."""
    sel = config.selection
    if config.baseline == "ours":
        proxies = gradient_proxy(net, data, config.proxy_mode)
        coreset = select_all_classes(proxies, sel, r=config.transform.r)
        return coreset.indices, coreset.gamma.astype(np.float64), coreset.rho
    if config.baseline == "random":
        bs = random_subset(data.n, sel.k_per_class, data.labels,
                           seed=[config.seed, 23, refresh_idx],
                           fraction=sel.fraction)
    else:
        preds = forward(net, data.features)
        r = preds - data.one_hot_labels()
        losses = 0.5 * np.sum(r * r, axis=1)
        bs = max_loss_subset(losses, sel.k_per_class, data.labels,
                             fraction=sel.fraction)
    return bs.indices, bs.weights, bs.weights / config.transform.r


def _build_pool(config: TrainConfig, data: Dataset, indices, orig_w, aug_w,
                refresh_idx: int, base_indices) -> _Pool:
    Y_all = one_hot(data.labels, data.num_classes)
    X_sel = data.features[indices]
    aug = perturb(config.transform, X_sel, round_index=refresh_idx,
                  labels=data.labels[indices])
    aug_Y = one_hot(aug.labels, data.num_classes)
    aug_weights = np.repeat(aug_w, config.transform.r)
    aug_origins = np.asarray(indices)[aug.origin]
    if config.regime == "coreset_only":
        base_X, base_Y = X_sel, Y_all[indices]
        base_w, base_o = orig_w, np.asarray(indices)
    elif config.regime == "full_plus_coreset_aug":
        base_X, base_Y = data.features, Y_all
        base_w, base_o = np.ones(data.n), np.arange(data.n)
    else:
        base_X, base_Y = data.features[base_indices], Y_all[base_indices]
        base_w, base_o = np.ones(len(base_indices)), np.asarray(base_indices)
    return _Pool(
        X=np.concatenate([base_X, aug.features]),
        Y=np.concatenate([base_Y, aug_Y]),
        w=np.concatenate([base_w, aug_weights]),
        origins=np.concatenate([base_o, aug_origins]),
    )


def _pool_metrics(net: MLP, pool: _Pool) -> tuple[float, float]:
    preds = forward(net, pool.X)
    r = preds - pool.Y
    train_loss = 0.5 * float(np.sum(pool.w * np.sum(r * r, axis=1)))
    grad = weighted_gradient(net, pool.X, pool.Y, pool.w)
    return train_loss, float(np.linalg.norm(grad))


def train(config: TrainConfig, data: Dataset, test_data: Dataset) -> TrainRecord:
    """Run the configured regime and return per-epoch metrics.

    Subsets are re-selected every ``refresh_r`` epochs using the proxies (or
    losses) at the current weights; the grad_norm column is the weighted-pool
    gradient norm at the end of the epoch, and ``initial_grad_norm`` is the
    same quantity at initialization.
    """
    if config.label_noise_frac > 0.0:
        data, noisy_mask = inject_label_noise(
            data, config.label_noise_frac, seed=[config.seed, 11])
    else:
        noisy_mask = np.zeros(data.n, dtype=bool)
    net = MLP.init([data.dim, *config.hidden_sizes, data.num_classes],
                   activation=config.activation, seed=[config.seed, 5])
    batch_rng = np.random.default_rng([config.seed, 7])
    base_indices = None
    if config.regime == "random_plus_coreset_aug":
        base = random_subset(data.n, None, data.labels,
                             seed=[config.seed, 13], fraction=config.random_fraction)
        base_indices = base.indices
    pool: _Pool | None = None
    rows: list[EpochRow] = []
    events: list[tuple[int, np.ndarray]] = []
    touched: set[int] = set()
    initial_grad_norm = None
    refresh_idx = -1
    for epoch in range(config.epochs):
        refreshed = epoch % config.refresh_r == 0
        selection_ms = 0.0
        if refreshed or pool is None:
            refresh_idx += 1
            t0 = time.perf_counter()
            indices, orig_w, aug_w = _select_subset(config, net, data, refresh_idx)
            pool = _build_pool(config, data, indices, orig_w, aug_w,
                               refresh_idx, base_indices)
            selection_ms = (time.perf_counter() - t0) * 1000.0
            events.append((epoch, np.asarray(indices)))
            touched.update(int(o) for o in pool.origins)
        if initial_grad_norm is None:
            _, initial_grad_norm = _pool_metrics(net, pool)
        eta = config.lr.value(epoch)
        order = batch_rng.permutation(pool.X.shape[0])
        for start in range(0, order.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            weighted_gradient_step(net, pool.X[batch], pool.Y[batch],
                                   pool.w[batch], eta)
        train_loss, grad_norm = _pool_metrics(net, pool)
        test_loss, test_acc = evaluate(net, test_data)
        rows.append(EpochRow(
            epoch=epoch, train_loss=train_loss, test_loss=test_loss,
            test_acc=test_acc, grad_norm=grad_norm, refreshed=refreshed,
            selection_ms=selection_ms, points_touched=len(touched),
        ))
    return TrainRecord(rows=rows, initial_grad_norm=float(initial_grad_norm),
                       noisy_mask=noisy_mask, selection_events=events,
                       final_params=net.get_params())


def initial_pool(config: TrainConfig, data: Dataset):
    """Reconstruct the epoch-0 training pool exactly as ``train`` builds it:
    same net init, same selection streams. Returns (net, X, Y, weights,
    selected indices, gamma-style original-row weights)."""
    if config.label_noise_frac > 0.0:
        data, _ = inject_label_noise(data, config.label_noise_frac,
                                     seed=[config.seed, 11])
    net = MLP.init([data.dim, *config.hidden_sizes, data.num_classes],
                   activation=config.activation, seed=[config.seed, 5])
    base_indices = None
    if config.regime == "random_plus_coreset_aug":
        base_indices = random_subset(data.n, None, data.labels,
                                     seed=[config.seed, 13],
                                     fraction=config.random_fraction).indices
    indices, orig_w, aug_w = _select_subset(config, net, data, 0)
    pool = _build_pool(config, data, indices, orig_w, aug_w, 0, base_indices)
    return net, pool.X, pool.Y, pool.w, np.asarray(indices), orig_w


def sgd_warmup(net: MLP, data: Dataset, epochs: int, lr: float,
               batch_size: int = 32, seed: int = 0) -> MLP:
    """Plain uniform-weight mini-batch SGD, in place. Used to pretrain nets
    before spectrum analysis or loss-based selection."""
    Y = one_hot(data.labels, data.num_classes)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(data.n)
        for start in range(0, data.n, batch_size):
            batch = order[start:start + batch_size]
            weighted_gradient_step(net, data.features[batch], Y[batch],
                                   np.ones(batch.size), lr)
    return net


def noisy_selection_audit(indices, noisy_mask: np.ndarray) -> float:
    """Fraction of selected points whose label was flipped."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty selection")
    return float(np.mean(noisy_mask[idx]))


def pl_convergence_envelope(alpha: float, eta: float, g0: float, xi: float,
                            slack: float, t: int) -> float:
    """Gradient-norm envelope (1/sqrt(alpha)) (1 - alpha eta / 2)^(t/2)
    (2 G0 + xi + slack) for gradient-dominated training."""
    base = 1.0 - alpha * eta / 2.0
    if base <= 0.0:
        raise ValueError("alpha * eta / 2 must stay below 1")
    return (2.0 * g0 + xi + slack) * base ** (t / 2.0) / math.sqrt(alpha)


def measure_pl_constants(net: MLP, X, Y, weights) -> tuple[float, float, float]:
    """Measured (alpha, lambda, beta) for a single-layer (linear) model.

    alpha is twice the smallest positive eigenvalue of the weighted Gauss
    Hessian (gradient domination constant of the weighted squared loss),
    lambda its largest eigenvalue (smoothness of the total loss), and beta the
    largest per-example smoothness w_i * (||x_i||^2 + 1).
    """
    if len(net.weights) != 1:
        raise ValueError("PL constants are measured on linear (single-layer) models")
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    jac = jacobian(net, X)
    C = net.num_outputs
    row_scale = np.repeat(np.sqrt(w), C)
    weighted_jac = jac * row_scale[:, None]
    svals = np.linalg.svd(weighted_jac, compute_uv=False)
    positive = svals[svals > 1e-10 * svals[0]]
    alpha = 2.0 * float(positive[-1] ** 2)
    lam = float(svals[0] ** 2)
    beta = float(np.max(w * (np.sum(X * X, axis=1) + 1.0)))
    return alpha, lam, beta
