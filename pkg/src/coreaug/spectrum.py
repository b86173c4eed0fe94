"""Numerical checks of derivative-spectrum perturbation theory.

Given a clean stacked derivative matrix J and its augmented counterpart
J + E, this module pairs the two singular spectra by rank, summarizes the
shifts and subspace rotations in 30 equal-count bins, and audits the classical
bounds that govern them: the Weyl singular-value bound, the Wedin-style
singular-vector bound, the expected eigenvalue shift under a piecewise-uniform
shift model, constant-kernel residual dynamics, and the gradient bounds for a
common linear transform applied to a weighted subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .augment import TransformSpec, perturb
from .linalg import as_matrix, principal_angles, spectral_norm, svd
from .model import MLP, Dataset, forward, jacobian, weighted_gradient

__all__ = [
    "SpectrumBin",
    "WeylVerdict",
    "SpectrumReport",
    "ShiftRecord",
    "ShiftReport",
    "VectorBoundReport",
    "DecompositionReport",
    "DynamicsReport",
    "EnvelopeReport",
    "LinearBoundReport",
    "LinearSgdEnvelopeReport",
    "eigengap",
    "weyl_check",
    "spectrum_report",
    "perturbation_decomposition",
    "expected_shift_model_check",
    "expected_shift_empirical",
    "singular_vector_bound_check",
    "residual_dynamics_check",
    "augmented_dynamics_envelope_check",
    "generalization_bound_value",
    "linear_transform_bound_check",
    "linear_transform_sgd_envelope",
]

NUM_BINS = 30
WEYL_TOL = 1e-8


def eigengap(sigma: np.ndarray) -> float:
    """Minimum spacing of consecutive singular values, with a trailing zero
    sentinel (the gap of the smallest value to zero counts)."""
    s = np.asarray(sigma, dtype=np.float64)
    padded = np.concatenate([s, [0.0]])
    return float(np.min(padded[:-1] - padded[1:]))


@dataclass(frozen=True)
class WeylVerdict:
    passed: bool
    max_violation: float
    e_norm2: float
    tolerance: float = WEYL_TOL


def weyl_check(sigma_clean, sigma_aug, e_norm2: float,
               tolerance: float = WEYL_TOL) -> WeylVerdict:
    """No rank-paired singular value may move more than the perturbation norm:
    |sigma_aug_i - sigma_clean_i| <= ||E||_2 + tolerance."""
    s0 = np.asarray(sigma_clean, dtype=np.float64)
    s1 = np.asarray(sigma_aug, dtype=np.float64)
    if s0.shape != s1.shape:
        raise ValueError("spectra must be rank-paired with equal lengths")
    violation = float(np.max(np.abs(s1 - s0)) - e_norm2)
    return WeylVerdict(passed=violation <= tolerance, max_violation=violation,
                       e_norm2=float(e_norm2), tolerance=tolerance)


@dataclass
class SpectrumBin:
    index: int
    sigma_lo: float
    sigma_hi: float
    mean_delta_sigma: float
    mean_angle_rad: float
    count: int


@dataclass
class SpectrumReport:
    """Rank-paired spectra, their perturbation norms, and binned summaries.

    Bin 0 covers the smallest singular values and bin 29 the largest; bin
    populations differ by at most one, with remainders pushed to the lowest
    bins.
    """

    sigma_clean: np.ndarray
    sigma_aug: np.ndarray
    e_norm2: float
    e_norm_frobenius: float
    eigengap: float
    bins: list[SpectrumBin]
    weyl: WeylVerdict

    def to_json_dict(self) -> dict:
        return {
            "sigma_clean": [float(s) for s in self.sigma_clean],
            "sigma_aug": [float(s) for s in self.sigma_aug],
            "e_norm2": self.e_norm2,
            "e_norm_frobenius": self.e_norm_frobenius,
            "eigengap": self.eigengap,
            "weyl": {
                "passed": self.weyl.passed,
                "max_violation": self.weyl.max_violation,
                "e_norm2": self.weyl.e_norm2,
            },
            "bins": [
                {
                    "bin": b.index,
                    "sigma_lo": b.sigma_lo,
                    "sigma_hi": b.sigma_hi,
                    "mean_delta_sigma": b.mean_delta_sigma,
                    "mean_angle_rad": b.mean_angle_rad,
                    "count": b.count,
                }
                for b in self.bins
            ],
        }

    def write_bins_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("bin,sigma_lo,sigma_hi,mean_delta_sigma,mean_angle_rad\n")
            for b in self.bins:
                fh.write(f"{b.index},{b.sigma_lo!r},{b.sigma_hi!r},"
                         f"{b.mean_delta_sigma!r},{b.mean_angle_rad!r}\n")


def _bin_slices(k: int, num_bins: int) -> list[np.ndarray]:
    """Partition ascending sorted indices 0..k-1 into equal-count bins, the
    remainder spread one each to the lowest bins."""
    base, rem = divmod(k, num_bins)
    sizes = [base + (1 if b < rem else 0) for b in range(num_bins)]
    out = []
    start = 0
    for size in sizes:
        out.append(np.arange(start, start + size))
        start += size
    return out


def spectrum_report(J_clean, J_aug, num_bins: int = NUM_BINS) -> SpectrumReport:
    """Pair the two spectra by rank and summarize shift and rotation per bin."""
    jc = as_matrix(J_clean, "J_clean")
    ja = as_matrix(J_aug, "J_aug")
    if jc.shape != ja.shape:
        raise ValueError(f"shape mismatch: {jc.shape} vs {ja.shape}")
    dec_c = svd(jc)
    dec_a = svd(ja)
    e_norm2 = spectral_norm(ja - jc)
    e_normf = float(np.linalg.norm(ja - jc))
    k = dec_c.sigma.shape[0]
    # ascending order so bin 0 holds the smallest singular values
    asc = np.arange(k - 1, -1, -1)
    s_c = dec_c.sigma[asc]
    s_a = dec_a.sigma[asc]
    delta = s_a - s_c
    bins: list[SpectrumBin] = []
    for b, ids in enumerate(_bin_slices(k, num_bins)):
        if ids.size == 0:
            bins.append(SpectrumBin(b, math.nan, math.nan, math.nan, math.nan, 0))
            continue
        cols = asc[ids]
        angles = principal_angles(dec_c.U[:, cols], dec_a.U[:, cols])
        bins.append(SpectrumBin(
            index=b,
            sigma_lo=float(s_c[ids].min()),
            sigma_hi=float(s_c[ids].max()),
            mean_delta_sigma=float(delta[ids].mean()),
            mean_angle_rad=float(angles.mean()),
            count=int(ids.size),
        ))
    return SpectrumReport(
        sigma_clean=dec_c.sigma,
        sigma_aug=dec_a.sigma,
        e_norm2=e_norm2,
        e_norm_frobenius=e_normf,
        eigengap=eigengap(dec_c.sigma),
        bins=bins,
        weyl=weyl_check(dec_c.sigma, dec_a.sigma, e_norm2),
    )


@dataclass
class DecompositionReport:
    """Split of a perturbation into the column space of the transposed
    derivative matrix and its orthogonal complement.

    The squared perturbed singular values decompose as (sigma + mu)^2 +
    zeta^2 with |mu| bounded by the in-space norm and zeta pinched between the
    extreme singular values of the out-of-space block. ``mu_feasible`` records,
    for the largest and smallest index, whether the observed shift is
    consistent with those ranges.
    """

    pe_norm2: float
    perp_e_norm2: float
    perp_e_sigma_min: float
    projector_identity_error: float
    numerical_rank: int
    mu_feasible: dict[str, bool]


def perturbation_decomposition(J, E) -> DecompositionReport:
    jt = as_matrix(J, "J").T
    et = as_matrix(E, "E").T
    if jt.shape != et.shape:
        raise ValueError("J and E must share a shape")
    dec = svd(jt)
    smax = dec.sigma[0] if dec.sigma.size else 0.0
    rank = int(np.sum(dec.sigma > 1e-10 * max(smax, 1e-300)))
    u_r = dec.U[:, :rank]
    p = u_r @ u_r.T
    p_perp = np.eye(p.shape[0]) - p
    pe = p @ et
    ppe = p_perp @ et
    pe_norm2 = spectral_norm(pe) if rank else 0.0
    ppe_svals = np.linalg.svd(ppe, compute_uv=False)
    perp_norm2 = float(ppe_svals[0]) if ppe_svals.size else 0.0
    perp_min = float(ppe_svals[-1]) if ppe_svals.size else 0.0
    identity_err = float(np.linalg.norm(p + p_perp - np.eye(p.shape[0])))

    tilde = svd(jt + et).sigma
    clean = dec.sigma
    feasible: dict[str, bool] = {}
    tol = 1e-8 * max(1.0, float(tilde[0]) ** 2)
    for tag, i in (("top", 0), ("bottom", clean.size - 1)):
        # (sigma + mu)^2 must land in [tilde^2 - zhi^2, tilde^2 - zlo^2] for
        # some |mu| <= pe_norm2; intersect that with the reachable range
        mu_lo = max(0.0, clean[i] - pe_norm2)
        mu_hi = clean[i] + pe_norm2
        reach_lo, reach_hi = mu_lo**2, mu_hi**2
        target_lo = tilde[i] ** 2 - perp_norm2**2
        target_hi = tilde[i] ** 2 - perp_min**2
        feasible[tag] = reach_lo <= target_hi + tol and target_lo <= reach_hi + tol
    return DecompositionReport(
        pe_norm2=pe_norm2,
        perp_e_norm2=perp_norm2,
        perp_e_sigma_min=perp_min,
        projector_identity_error=identity_err,
        numerical_rank=rank,
        mu_feasible=feasible,
    )


@dataclass
class ShiftRecord:
    index: int
    sigma: float
    p_hat: float
    predicted: float
    empirical: float
    standard_error: float

    @property
    def within_3se(self) -> bool:
        return abs(self.empirical - self.predicted) <= 3.0 * self.standard_error


@dataclass
class ShiftReport:
    records: list[ShiftRecord]
    e_norm_mean: float
    draws: int

    @property
    def all_within_3se(self) -> bool:
        return all(r.within_3se for r in self.records)


def _shift_prediction(sigma: float, p: float, e_norm: float) -> float:
    return sigma * sigma + sigma * (1.0 - 2.0 * p) * e_norm + e_norm * e_norm / 3.0


def expected_shift_model_check(sigma, p, e_norm: float, draws: int,
                               seed: int = 0) -> ShiftReport:
    """Monte Carlo over the shift model itself: each singular value moves by a
    draw that is uniform on [-e_norm, 0] with probability p_i and uniform on
    [0, e_norm] otherwise. The empirical mean of the squared shifted values
    must match sigma^2 + sigma (1 - 2 p) e + e^2/3 within sampling error.
    """
    if draws < 100:
        raise ValueError("draws must be >= 100")
    sigma = np.asarray(sigma, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    records = []
    for i in range(sigma.size):
        down = rng.uniform(size=draws) < p[i]
        mag = rng.uniform(0.0, e_norm, size=draws)
        delta = np.where(down, -mag, mag)
        lam = (sigma[i] + delta) ** 2
        emp = float(lam.mean())
        se = float(lam.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0
        records.append(ShiftRecord(
            index=i, sigma=float(sigma[i]), p_hat=float(p[i]),
            predicted=_shift_prediction(float(sigma[i]), float(p[i]), e_norm),
            empirical=emp, standard_error=se,
        ))
    return ShiftReport(records=records, e_norm_mean=float(e_norm), draws=draws)


def expected_shift_empirical(net: MLP, data: Dataset, spec: TransformSpec,
                             draws: int, seed: int = 0) -> ShiftReport:
    """Monte Carlo over real augmentation rounds: estimate the per-index
    decrease probability and the mean squared singular values, then evaluate
    the closed form with the mean perturbation norm. This audits how well the
    uniform-shift model describes real augmentation; agreement is reported,
    not asserted.
    """
    if draws < 100:
        raise ValueError("draws must be >= 100")
    jac = jacobian(net, data.features)
    sig = svd(jac).sigma
    k = sig.size
    lam_samples = np.empty((draws, k))
    downs = np.zeros(k)
    e_norms = np.empty(draws)
    one_copy = TransformSpec(kind=spec.kind, epsilon0=spec.epsilon0, r=1,
                             seed=spec.seed)
    for d in range(draws):
        x_aug = perturb(one_copy, data.features, round_index=seed * 100003 + d).features
        j_aug = jacobian(net, x_aug)
        s_aug = np.linalg.svd(j_aug, compute_uv=False)
        e_norms[d] = float(np.linalg.svd(j_aug - jac, compute_uv=False)[0]) \
            if spec.epsilon0 > 0.0 else 0.0
        lam_samples[d] = s_aug**2
        downs += (s_aug < sig).astype(np.float64)
    p_hat = downs / draws if spec.epsilon0 > 0.0 else np.zeros(k)
    e_mean = float(e_norms.mean())
    records = []
    for i in range(k):
        emp = float(lam_samples[:, i].mean())
        se = float(lam_samples[:, i].std(ddof=1) / math.sqrt(draws))
        records.append(ShiftRecord(
            index=i, sigma=float(sig[i]), p_hat=float(p_hat[i]),
            predicted=_shift_prediction(float(sig[i]), float(p_hat[i]), e_mean),
            empirical=emp, standard_error=se,
        ))
    return ShiftReport(records=records, e_norm_mean=e_mean, draws=draws)


@dataclass
class VectorBoundReport:
    """Per-index audit of ||u_i - u~_i|| <= 2 sqrt(2) ||E||_2 / gap, applicable
    only when the spectrum gap is at least twice the perturbation norm."""

    skipped: bool
    reason: str
    gap: float
    e_norm2: float
    deviations: np.ndarray | None = None
    bound: float = math.nan

    @property
    def passed(self) -> bool:
        if self.skipped:
            return False
        return bool(np.all(self.deviations <= self.bound + 1e-9))


def singular_vector_bound_check(J, E) -> VectorBoundReport:
    j = as_matrix(J, "J")
    e = as_matrix(E, "E")
    if j.shape != e.shape:
        raise ValueError("J and E must share a shape")
    dec = svd(j)
    gap = eigengap(dec.sigma)
    e2 = spectral_norm(e)
    if gap < 2.0 * e2:
        return VectorBoundReport(skipped=True,
                                 reason=f"gap {gap:.3e} < 2 ||E||_2 {2 * e2:.3e}",
                                 gap=gap, e_norm2=e2)
    dec_t = svd(j + e)
    devs = np.empty(dec.sigma.size)
    for i in range(dec.sigma.size):
        u = dec.U[:, i]
        ut = dec_t.U[:, i]
        if float(u @ ut) < 0.0:
            ut = -ut
        devs[i] = float(np.linalg.norm(u - ut))
    bound = 2.0 * math.sqrt(2.0) * e2 / gap if gap > 0.0 else math.inf
    return VectorBoundReport(skipped=False, reason="", gap=gap, e_norm2=e2,
                             deviations=devs, bound=bound)


@dataclass
class DynamicsReport:
    """Residual norms predicted by the initial-kernel eigendecomposition
    versus the norms measured along plain full-batch gradient descent."""

    predicted_norms: np.ndarray
    actual_norms: np.ndarray
    relative_deviation: np.ndarray

    @property
    def max_relative_deviation(self) -> float:
        return float(np.max(self.relative_deviation))


def residual_dynamics_check(net: MLP, data: Dataset, eta: float,
                            steps: int) -> DynamicsReport:
    """Predict r_t = sum_i (1 - eta lam_i)^t u_i (u_i . r_0) from the initial
    kernel and compare with actual gradient descent, step by step.

    The sum runs over every kernel eigendirection including the zero
    eigenvalues: residual mass outside the range of the derivative matrix
    persists unchanged, so the prediction keeps it rather than dropping it.
    """
    work = net.copy()
    jac = jacobian(work, data.features)
    dec = svd(jac)
    lam = dec.sigma**2
    if eta * lam[0] >= 2.0:
        raise ValueError("eta * lambda_max must stay below 2 for stable dynamics")
    Y = data.one_hot_labels()
    r0 = (forward(work, data.features) - Y).ravel()
    coeffs = dec.U.T @ r0
    predicted = np.empty(steps + 1)
    actual = np.empty(steps + 1)
    rel = np.empty(steps + 1)
    r_actual = r0.copy()
    for t in range(steps + 1):
        decay = (1.0 - eta * lam) ** t
        r_pred = r0 + dec.U @ ((decay - 1.0) * coeffs)
        predicted[t] = float(np.linalg.norm(r_pred))
        actual[t] = float(np.linalg.norm(r_actual))
        rel[t] = float(np.linalg.norm(r_pred - r_actual) / max(actual[t], 1e-300))
        if t < steps:
            grad = weighted_gradient(work, data.features, Y, np.ones(data.n))
            work.set_params(work.get_params() - eta * grad)
            r_actual = (forward(work, data.features) - Y).ravel()
    return DynamicsReport(predicted_norms=predicted, actual_norms=actual,
                          relative_deviation=rel)


@dataclass
class EnvelopeReport:
    skipped: bool
    reason: str
    steps: np.ndarray | None = None
    mean_actual: np.ndarray | None = None
    bound: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        if self.skipped:
            return False
        return bool(np.all(self.mean_actual <= self.bound + 1e-9))


def augmented_dynamics_envelope_check(net: MLP, data: Dataset,
                                      spec: TransformSpec, eta: float,
                                      steps: int, rounds: int = 10) -> EnvelopeReport:
    """Mean residual norm over augmentation rounds versus the expected-shift
    dynamics bound evaluated with measured spectra, decrease probabilities,
    the mean perturbation norm and the spectrum gap.

    Meaningful when the stacked derivative matrix has full row rank (residual
    mass outside its range never decays, and the bound carries no persistent
    term). A degenerate gap is a reported skip, except at zero budget where
    the gap-dependent slack vanishes.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    jac = jacobian(net, data.features)
    dec = svd(jac)
    sig = dec.sigma
    gap = eigengap(sig)
    if gap <= 1e-12 and spec.epsilon0 > 0.0:
        return EnvelopeReport(skipped=True, reason=f"degenerate gap {gap:.3e}")
    Y = data.one_hot_labels()
    yvec = Y.ravel()
    k = sig.size
    one_copy = TransformSpec(kind=spec.kind, epsilon0=spec.epsilon0, r=1,
                             seed=spec.seed)
    actual = np.zeros((rounds, steps + 1))
    downs = np.zeros(k)
    e_norms = np.empty(rounds)
    for s in range(rounds):
        x_aug = perturb(one_copy, data.features, round_index=s).features
        j_aug = jacobian(net, x_aug)
        s_aug = np.linalg.svd(j_aug, compute_uv=False)
        downs += (s_aug < sig).astype(np.float64)
        e_norms[s] = spectral_norm(j_aug - jac)
        work = net.copy()
        for t in range(steps + 1):
            r = (forward(work, x_aug) - Y).ravel()
            actual[s, t] = float(np.linalg.norm(r))
            if t < steps:
                grad = weighted_gradient(work, x_aug, Y, np.ones(data.n))
                work.set_params(work.get_params() - eta * grad)
    e_mean = float(e_norms.mean())
    p_hat = downs / rounds if spec.epsilon0 > 0.0 else np.zeros(k)
    lam_expected = np.array([
        _shift_prediction(float(sig[i]), float(p_hat[i]), e_mean) for i in range(k)
    ])
    slack = 0.0 if e_mean == 0.0 else 2.0 * k * math.sqrt(2.0) * e_mean / gap
    terms = (dec.U.T @ yvec) ** 2 + slack
    t_axis = np.arange(steps + 1)
    bound = np.sqrt(np.clip(
        ((1.0 - eta * lam_expected[None, :]) ** (2 * t_axis[:, None]) * terms[None, :]).sum(axis=1),
        0.0, None))
    return EnvelopeReport(skipped=False, reason="", steps=t_axis,
                          mean_actual=actual.mean(axis=0), bound=bound)


def generalization_bound_value(sigma_min: float, n: int, L: float,
                               epsilon0: float) -> float:
    """Closed-form bound sqrt(2) / (sigma_min + sqrt(n) L epsilon0); the
    log(1/delta) additive term is reported symbolically elsewhere, never
    folded in numerically."""
    if sigma_min <= 0.0:
        raise ValueError("sigma_min must be positive")
    return math.sqrt(2.0) / (sigma_min + math.sqrt(n) * L * epsilon0)


@dataclass
class LinearBoundReport:
    """Gradient-difference audits for a common linear transform F.

    ``subset_lhs``: normed difference between full augmented gradient sum and
    the weighted subset's augmented gradient sum; bounded by ||F|| (xi +
    sqrt(d) n omega). ``combined_lhs``: same, with plain and augmented
    gradients pooled; bounded by (||F|| + 1) xi + sqrt(d) ||F|| n omega.
    """

    xi: float
    omega: float
    f_norm2: float
    subset_lhs: float
    subset_bound: float
    combined_lhs: float
    combined_bound: float

    @property
    def passed(self) -> bool:
        return (self.subset_lhs <= self.subset_bound + 1e-9
                and self.combined_lhs <= self.combined_bound + 1e-9)


def _linear_grad_sum(W: np.ndarray, X: np.ndarray, Y: np.ndarray,
                     weights: np.ndarray) -> np.ndarray:
    residual = X @ W - Y
    return X.T @ (residual * weights[:, None])


def linear_transform_bound_check(W_lin, X, Y, F, indices, gamma) -> LinearBoundReport:
    """Audit the weighted-subset gradient bounds for f(x) = W^T x augmented by
    the common linear map x -> F x, with every quantity measured."""
    W = as_matrix(W_lin, "W_lin")
    X = as_matrix(X, "X")
    Y = np.asarray(Y, dtype=np.float64)
    F = as_matrix(F, "F")
    idx = np.asarray(indices, dtype=np.int64)
    gam = np.asarray(gamma, dtype=np.float64)
    n, d = X.shape
    Xa = X @ F.T
    omega = float(np.max(np.linalg.norm(Xa @ W - X @ W, axis=1)))
    f2 = spectral_norm(F)
    ones = np.ones(n)
    full_plain = _linear_grad_sum(W, X, Y, ones)
    sub_plain = _linear_grad_sum(W, X[idx], Y[idx], gam)
    xi = float(np.linalg.norm(full_plain - sub_plain))
    full_aug = _linear_grad_sum(W, Xa, Y, ones)
    sub_aug = _linear_grad_sum(W, Xa[idx], Y[idx], gam)
    subset_lhs = float(np.linalg.norm(full_aug - sub_aug))
    subset_bound = f2 * (xi + math.sqrt(d) * n * omega)
    combined_lhs = float(np.linalg.norm((full_plain + full_aug) - (sub_plain + sub_aug)))
    combined_bound = (f2 + 1.0) * xi + math.sqrt(d) * f2 * n * omega
    return LinearBoundReport(xi=xi, omega=omega, f_norm2=f2,
                             subset_lhs=subset_lhs, subset_bound=subset_bound,
                             combined_lhs=combined_lhs, combined_bound=combined_bound)


@dataclass
class LinearSgdEnvelopeReport:
    alpha: float
    eta: float
    g0_full: float
    envelope_constant: float
    grad_norms: np.ndarray
    envelope: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.grad_norms <= self.envelope + 1e-9))


def linear_transform_sgd_envelope(W0, X, Y, F, indices, gamma,
                                  steps: int) -> LinearSgdEnvelopeReport:
    """Run full-batch descent on the weighted subset plus its F-augmentation
    and compare the gradient-norm trajectory with the measured convergence
    envelope (1/sqrt(alpha)) (1 - alpha eta / 2)^(t/2) (G0' + combined bound).
    """
    report = linear_transform_bound_check(W0, X, Y, F, indices, gamma)
    W = as_matrix(W0, "W0").copy()
    X = as_matrix(X, "X")
    Y = np.asarray(Y, dtype=np.float64)
    F = as_matrix(F, "F")
    idx = np.asarray(indices, dtype=np.int64)
    gam = np.asarray(gamma, dtype=np.float64)
    pool_X = np.concatenate([X[idx], X[idx] @ F.T])
    pool_Y = np.concatenate([Y[idx], Y[idx]])
    pool_w = np.concatenate([gam, gam])
    scaled = pool_X * np.sqrt(pool_w)[:, None]
    svals = np.linalg.svd(scaled, compute_uv=False)
    positive = svals[svals > 1e-10 * max(svals[0], 1e-300)]
    alpha = 2.0 * float(positive[-1] ** 2)
    lam = float(svals[0] ** 2)
    beta = float(np.max(pool_w * np.sum(pool_X * pool_X, axis=1)))
    eta = alpha / (lam * beta)
    full_aug_X = np.concatenate([X, X @ F.T])
    full_aug_Y = np.concatenate([Y, Y])
    g0_full = float(np.linalg.norm(
        _linear_grad_sum(W, full_aug_X, full_aug_Y, np.ones(2 * X.shape[0]))))
    constant = g0_full + report.combined_bound
    grad_norms = np.empty(steps + 1)
    envelope = np.empty(steps + 1)
    for t in range(steps + 1):
        grad = _linear_grad_sum(W, pool_X, pool_Y, pool_w)
        grad_norms[t] = float(np.linalg.norm(grad))
        envelope[t] = constant * (1.0 - alpha * eta / 2.0) ** (t / 2.0) / math.sqrt(alpha)
        W = W - eta * grad
    return LinearSgdEnvelopeReport(alpha=alpha, eta=eta, g0_full=g0_full,
                                   envelope_constant=constant,
                                   grad_norms=grad_norms, envelope=envelope)
