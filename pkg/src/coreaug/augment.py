"""Label-invariant bounded additive augmentation.

Every transform draws an additive displacement, rescales it onto the l2 budget
``epsilon0`` when it exceeds it, and clamps the result back into [0, 1].
Clamping only shrinks the distance to the source row, so the budget invariant
holds exactly. Randomness is counter-based: the draw for a given
(seed, round, copy) block is an independent stream, so outputs are bit-stable
and rows never share RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, frobenius_norm, spectral_norm
from .model import MLP, jacobian

__all__ = [
    "TransformSpec",
    "AugmentedSet",
    "PerturbationReport",
    "perturb",
    "perturbation_matrix",
]

TRANSFORM_KINDS = ("uniform_ball", "gaussian_clipped", "pixel_jitter")


@dataclass(frozen=True)
class TransformSpec:
    """Bounded additive transform family.

    ``epsilon0`` is the l2 budget in feature units (pixel-scale values like 8
    and 16 correspond to 8/255 and 16/255 on [0, 1] features); ``r`` is the
    number of augmented copies per source row.
    """

    kind: str = "uniform_ball"
    epsilon0: float = 16.0 / 255.0
    r: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"kind must be one of {TRANSFORM_KINDS}, got {self.kind!r}")
        if self.epsilon0 < 0.0:
            raise ValueError("epsilon0 must be >= 0")
        if self.r < 1:
            raise ValueError("r must be >= 1")


@dataclass(frozen=True)
class AugmentedSet:
    """Augmented rows in copy-major order: output row i*r + c copies source i."""

    features: np.ndarray
    origin: np.ndarray
    labels: np.ndarray | None = None


def _raw_displacements(spec: TransformSpec, k: int, d: int,
                       rng: np.random.Generator) -> np.ndarray:
    eps = spec.epsilon0
    if spec.kind == "uniform_ball":
        direction = rng.standard_normal((k, d))
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        radius = eps * rng.uniform(0.0, 1.0, size=(k, 1)) ** (1.0 / d)
        return direction / norms * radius
    if spec.kind == "gaussian_clipped":
        return rng.standard_normal((k, d)) * (eps / np.sqrt(d))
    # pixel_jitter: perturb a random 25% coordinate subset of each row
    n_coords = max(1, int(np.ceil(0.25 * d)))
    scores = rng.uniform(size=(k, d))
    cut = np.sort(scores, axis=1)[:, n_coords - 1:n_coords]
    mask = scores <= cut
    values = rng.uniform(-eps, eps, size=(k, d))
    return values * mask


def perturb(spec: TransformSpec, X, round_index: int = 0,
            labels: np.ndarray | None = None) -> AugmentedSet:
    """Emit ``spec.r`` bounded perturbed copies of every row of X.

    Each copy block c is drawn from the stream keyed by (seed, round, c), so a
    fixed (spec, X, round_index) reproduces bit-identical output. With
    ``round_index`` varying, each round plays the role of one transform applied
    to all rows.
    """
    X = as_matrix(X, "X")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError("X entries must lie in [0, 1]")
    k, d = X.shape
    eps = spec.epsilon0
    out = np.empty((k * spec.r, d))
    for copy in range(spec.r):
        rng = np.random.default_rng([spec.seed, round_index, copy])
        delta = _raw_displacements(spec, k, d, rng)
        norms = np.linalg.norm(delta, axis=1)
        scale = np.ones(k)
        over = norms > eps
        if np.any(over):
            scale[over] = eps / norms[over]
        out[copy::spec.r] = np.clip(X + delta * scale[:, None], 0.0, 1.0)
    origin = np.repeat(np.arange(k), spec.r)
    aug_labels = None
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape[0] != k:
            raise ValueError("labels must have one entry per source row")
        aug_labels = labels[origin]
    return AugmentedSet(features=out, origin=origin, labels=aug_labels)


@dataclass(frozen=True)
class PerturbationReport:
    """Derivative-matrix shift E for one augmentation round, with its norms.

    ``frobenius_bound`` is sqrt(n) * l_hat * epsilon0 when an estimated
    derivative Lipschitz constant was supplied, else None.
    """

    E: np.ndarray
    norm2: float
    norm_frobenius: float
    n: int
    epsilon_measured: float
    frobenius_bound: float | None


def perturbation_matrix(net: MLP, X, X_aug_round,
                        l_hat: float | None = None,
                        epsilon0: float | None = None) -> PerturbationReport:
    """E = J(augmented rows) - J(original rows) for a single-copy round.

    ``X_aug_round`` must hold exactly one augmentation per source row. The
    reported bound uses the supplied budget (or, if omitted, the largest
    measured row displacement).
    """
    X = as_matrix(X, "X")
    Xa = as_matrix(X_aug_round, "X_aug_round")
    if Xa.shape != X.shape:
        raise ValueError(f"expected one augmentation per row: {Xa.shape} vs {X.shape}")
    E = jacobian(net, Xa) - jacobian(net, X)
    eps_measured = float(np.max(np.linalg.norm(Xa - X, axis=1)))
    eps = eps_measured if epsilon0 is None else float(epsilon0)
    bound = None if l_hat is None else float(np.sqrt(X.shape[0]) * l_hat * eps)
    return PerturbationReport(
        E=E,
        norm2=spectral_norm(E),
        norm_frobenius=frobenius_norm(E),
        n=X.shape[0],
        epsilon_measured=eps_measured,
        frobenius_bound=bound,
    )
