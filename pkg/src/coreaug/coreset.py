"""Per-class selection of weighted representative subsets in gradient space.

The objective is the coverage norm: the root of summed squared distances from
every class member to its nearest selected element, with an empty-set sentinel
``c1`` per row. Greedy selection maximizes the per-step reduction of that
norm. Because the square root is strictly monotone, the argmax is identical to
maximizing the reduction of the summed squares, which is what the engines
track internally; the squared form has nonincreasing marginal gains, so lazy
evaluation certifies exactly the same picks as the naive scan.

All engines share one scalar gain expression (a single-column 1-D reduction),
so naive, lazy, and fully-sampled stochastic runs agree bit for bit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, frobenius_norm
from .model import (
    MLP,
    Dataset,
    GradientProxySet,
    jacobian,
    per_example_gradients,
    residuals,
)

__all__ = [
    "SelectionConfig",
    "SelectionResult",
    "ClassCoreset",
    "WeightedCoreset",
    "BaselineSubset",
    "AlignmentReport",
    "NtkBoundVerdict",
    "pairwise_distances",
    "distance_matrix",
    "g_frobenius",
    "facility_location_objective",
    "greedy_select",
    "lazy_greedy_select",
    "stochastic_greedy_select",
    "compute_weights",
    "divide_weights",
    "alignment_error",
    "select_all_classes",
    "max_loss_subset",
    "random_subset",
    "coreset_ntk_bound_check",
]

ENGINES = ("naive", "lazy", "stochastic")
STOP_MODES = ("xi_threshold", "fixed_size")


@dataclass(frozen=True)
class SelectionConfig:
    """How to stop, which engine to run, and the engine's knobs.

    ``xi`` is used iff ``stop == "xi_threshold"``; ``k_per_class`` or
    ``fraction`` iff ``stop == "fixed_size"``. ``c1`` defaults to twice the
    largest pairwise distance in the class, a sentinel that dominates any
    achievable coverage value. ``stochastic_sample`` defaults to
    ceil((n_c / k) * ln(100)) for fixed-size runs and ceil(n_c / 8) for
    threshold runs.
    """

    stop: str = "fixed_size"
    xi: float | None = None
    k_per_class: int | None = None
    fraction: float | None = None
    engine: str = "lazy"
    stochastic_sample: int | None = None
    seed: int = 0
    c1: float | None = None

    def __post_init__(self):
        if self.stop not in STOP_MODES:
            raise ValueError(f"stop must be one of {STOP_MODES}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.stop == "xi_threshold":
            if self.xi is None or self.xi <= 0.0:
                raise ValueError("xi_threshold mode needs xi > 0")
        else:
            if self.k_per_class is None and self.fraction is None:
                raise ValueError("fixed_size mode needs k_per_class or fraction")
            if self.k_per_class is not None and self.k_per_class < 1:
                raise ValueError("k_per_class must be >= 1")
            if self.fraction is not None and not (0.0 < self.fraction <= 1.0):
                raise ValueError("fraction must lie in (0, 1]")


@dataclass
class SelectionResult:
    """Selected local indices in pick order, the coverage-norm value after each
    pick, and the number of marginal-gain evaluations spent."""

    indices: list[int]
    trace: list[float]
    evaluations: int


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix: symmetric, zero diagonal, nonnegative."""
    p = as_matrix(points, "points")
    sq = np.sum(p * p, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (p @ p.T)
    np.maximum(d2, 0.0, out=d2)
    d = np.sqrt(d2)
    np.fill_diagonal(d, 0.0)
    return 0.5 * (d + d.T)


def distance_matrix(proxies: GradientProxySet, label: int) -> np.ndarray:
    """Within-class distance matrix over proxy vectors."""
    idx = np.flatnonzero(proxies.labels == label)
    if idx.size == 0:
        raise ValueError(f"class {label} is empty")
    return pairwise_distances(proxies.proxies[idx])


def _resolve_c1(config: SelectionConfig, D: np.ndarray) -> float:
    if config.c1 is not None:
        return float(config.c1)
    return 2.0 * float(D.max())


def _resolve_k(config: SelectionConfig, n_c: int) -> int | None:
    if config.stop != "fixed_size":
        return None
    k = config.k_per_class
    if k is None:
        k = max(1, int(round(config.fraction * n_c)))
    if k > n_c:
        raise ValueError(f"k={k} exceeds class population {n_c}")
    return k


def g_frobenius(D, S, c1: float) -> float:
    """Coverage norm sqrt(sum_i min_{j in S} D[i, j]^2); sqrt(n)*c1 when S is empty."""
    D = as_matrix(D, "D")
    if len(S) == 0:
        return math.sqrt(D.shape[0]) * c1
    dmin = D[:, sorted(int(s) for s in S)].min(axis=1)
    return math.sqrt(float(np.sum(dmin * dmin)))


def facility_location_objective(D, S, cap: float | None = None) -> float:
    """Coverage sum ``sum_i (cap - min_{j in S} D[i, j])``, cap defaulting to max D.

    The monotone submodular surrogate used for approximation-guarantee checks.
    """
    D = as_matrix(D, "D")
    if cap is None:
        cap = float(D.max())
    if len(S) == 0:
        return 0.0
    dmin = D[:, sorted(int(s) for s in S)].min(axis=1)
    return float(np.sum(cap - dmin))


class _GreedyState:
    """Shared bookkeeping so every engine evaluates gains with identical
    floating-point expressions (1-D reductions over a single column)."""

    def __init__(self, D: np.ndarray, config: SelectionConfig):
        self.D2 = D * D
        self.n_c = D.shape[0]
        self.c1 = _resolve_c1(config, D)
        self.k = _resolve_k(config, self.n_c)
        self.config = config
        self.dmin2 = np.full(self.n_c, self.c1 * self.c1)
        self.q = float(np.sum(self.dmin2))
        self.remaining = np.ones(self.n_c, dtype=bool)
        self.S: list[int] = []
        self.trace: list[float] = []
        self.evaluations = 0

    def gain(self, s: int) -> tuple[float, float]:
        """(marginal gain, resulting summed squared coverage) for candidate s."""
        nq = float(np.minimum(self.dmin2, self.D2[:, s]).sum())
        self.evaluations += 1
        return self.q - nq, nq

    def best_of(self, candidates) -> tuple[int, float, float]:
        """Largest-gain candidate over an ascending index iterable; ties keep
        the smallest index (the first strict improvement wins)."""
        best_gain = -math.inf
        best_idx = -1
        best_nq = math.inf
        for s in candidates:
            g, nq = self.gain(int(s))
            if g > best_gain:
                best_gain, best_idx, best_nq = g, int(s), nq
        return best_idx, best_gain, best_nq

    def select(self, s: int, nq: float) -> None:
        self.S.append(s)
        self.remaining[s] = False
        np.minimum(self.dmin2, self.D2[:, s], out=self.dmin2)
        self.q = nq
        self.trace.append(math.sqrt(max(nq, 0.0)))

    def done(self) -> bool:
        if self.q <= 0.0 or len(self.S) == self.n_c:
            return True
        if self.config.stop == "fixed_size":
            return len(self.S) >= self.k
        return self.trace[-1] <= self.config.xi

    def result(self) -> SelectionResult:
        return SelectionResult(self.S, self.trace, self.evaluations)


def greedy_select(D, config: SelectionConfig) -> SelectionResult:
    """Naive greedy: every step scans all remaining candidates.

    Picks the candidate with the largest coverage-norm reduction, ties broken
    by smallest index. Stops at |S| = k (fixed_size), at norm <= xi
    (xi_threshold), or as soon as the norm hits zero; at least one element is
    always selected.
    """
    state = _GreedyState(as_matrix(D, "D"), config)
    while True:
        s, _, nq = state.best_of(np.flatnonzero(state.remaining))
        state.select(s, nq)
        if state.done():
            return state.result()


def lazy_greedy_select(D, config: SelectionConfig) -> SelectionResult:
    """Lazy greedy: a stale-gain priority queue, re-evaluating top candidates
    until the current best gain is certified against everything left.

    Stale gains upper-bound current ones in exact arithmetic (squared-coverage
    gains are nonincreasing as the selection grows), but floating-point sums
    can understate a stale key by an ulp; the certification therefore keeps
    popping while the next stale key sits within a rounding margin of the best
    current gain, and resolves that near-tie set with the naive comparator.
    The output (set, order, trace) is identical to the naive scan.
    """
    state = _GreedyState(as_matrix(D, "D"), config)
    margin = 1e-9 * state.q
    heap = []
    for s in range(state.n_c):
        g, nq = state.gain(s)
        heap.append((-g, s, nq))
    heapq.heapify(heap)
    first_step = True
    while True:
        best_gain = -math.inf
        best_idx = -1
        best_nq = math.inf
        examined: list[tuple[float, int, float]] = []
        while heap:
            neg_key, s, nq = heap[0]
            if not state.remaining[s]:
                heapq.heappop(heap)
                continue
            if -neg_key + margin < best_gain:
                break
            heapq.heappop(heap)
            if first_step:
                g = -neg_key
            else:
                g, nq = state.gain(s)
            examined.append((g, s, nq))
            better = g > best_gain or (g == best_gain and s < best_idx)
            if better:
                best_gain, best_idx, best_nq = g, s, nq
        for g, s, nq in examined:
            if s != best_idx:
                heapq.heappush(heap, (-g, s, nq))
        state.select(best_idx, best_nq)
        first_step = False
        if state.done():
            return state.result()


def stochastic_greedy_select(D, config: SelectionConfig) -> SelectionResult:
    """Stochastic greedy: each step evaluates a uniform random candidate sample
    of size ``stochastic_sample`` (capped at what remains) and takes its best.
    Deterministic given the config seed; a sample covering everything that
    remains reduces to the naive scan.
    """
    D = as_matrix(D, "D")
    state = _GreedyState(D, config)
    if config.stochastic_sample is not None:
        sample_size = config.stochastic_sample
    elif state.k is not None:
        sample_size = int(np.ceil((state.n_c / state.k) * np.log(100.0)))
    else:
        sample_size = int(np.ceil(state.n_c / 8.0))
    if sample_size < 1:
        raise ValueError("stochastic_sample must be >= 1")
    rng = np.random.default_rng(config.seed)
    while True:
        cand = np.flatnonzero(state.remaining)
        take = min(sample_size, cand.size)
        sample = np.sort(rng.choice(cand, size=take, replace=False))
        s, _, nq = state.best_of(sample)
        state.select(s, nq)
        if state.done():
            return state.result()


_ENGINE_FNS = {
    "naive": greedy_select,
    "lazy": lazy_greedy_select,
    "stochastic": stochastic_greedy_select,
}


def compute_weights(D, S) -> np.ndarray:
    """Nearest-selected assignment counts, aligned with the order of S.

    Every class point is assigned to its nearest element of S, ties going to
    the smallest index in S; gamma_j is the count assigned to j and the counts
    sum to the class population.
    """
    D = as_matrix(D, "D")
    S = [int(s) for s in S]
    if len(S) == 0:
        raise ValueError("S must be nonempty")
    s_arr = np.asarray(S)
    order = np.argsort(s_arr, kind="stable")
    cols = s_arr[order]
    assign = np.argmin(D[:, cols], axis=1)
    counts_sorted = np.bincount(assign, minlength=cols.size)
    gamma = np.empty(len(S), dtype=np.int64)
    gamma[order] = counts_sorted
    return gamma


def divide_weights(gamma, r: int) -> np.ndarray:
    """rho_j = gamma_j / r, exactly."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return np.asarray(gamma, dtype=np.float64) / r


@dataclass
class ClassCoreset:
    label: int
    indices: list[int]
    gamma: np.ndarray
    rho: np.ndarray
    g_frobenius: float
    trace: list[float]


@dataclass
class WeightedCoreset:
    """Per-class selections with integer weights gamma and divided weights rho."""

    classes: list[ClassCoreset]
    engine: str
    seed: int
    r: int = 1
    warnings: list[str] = field(default_factory=list)

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([np.asarray(c.indices, dtype=np.int64) for c in self.classes])

    @property
    def gamma(self) -> np.ndarray:
        return np.concatenate([c.gamma for c in self.classes])

    @property
    def rho(self) -> np.ndarray:
        return np.concatenate([c.rho for c in self.classes])

    def validate(self, class_sizes: dict[int, int] | None = None) -> None:
        seen: set[int] = set()
        for c in self.classes:
            if any(i in seen for i in c.indices):
                raise ValueError("coreset indices are not distinct")
            seen.update(c.indices)
            if np.any(c.gamma < 1):
                raise ValueError(f"class {c.label} has a zero weight")
            if not np.allclose(c.rho * self.r, c.gamma):
                raise ValueError("rho must equal gamma / r exactly")
            if class_sizes is not None and int(c.gamma.sum()) != class_sizes[c.label]:
                raise ValueError(f"class {c.label} weights do not sum to its population")
            if np.any(np.diff(c.trace) >= 0.0):
                raise ValueError("objective trace is not strictly decreasing")

    def to_json_dict(self) -> dict:
        return {
            "classes": [
                {
                    "class": int(c.label),
                    "indices": [int(i) for i in c.indices],
                    "gamma": [int(g) for g in c.gamma],
                    "rho": [float(x) for x in c.rho],
                    "g_frobenius": float(c.g_frobenius),
                    "trace": [float(t) for t in c.trace],
                }
                for c in self.classes
            ],
            "engine": self.engine,
            "seed": int(self.seed),
        }


def select_all_classes(proxies: GradientProxySet, config: SelectionConfig,
                       r: int = 1) -> WeightedCoreset:
    """Run the configured engine on every class and merge the results.

    Classes are processed in label order; empty classes are skipped with a
    warning record. Weight conservation holds per class: gamma sums to the
    class population.
    """
    engine = _ENGINE_FNS[config.engine]
    classes: list[ClassCoreset] = []
    warnings: list[str] = []
    for label in range(proxies.num_classes):
        idx = np.flatnonzero(proxies.labels == label)
        if idx.size == 0:
            warnings.append(f"class {label} is empty; skipped")
            continue
        D = pairwise_distances(proxies.proxies[idx])
        result = engine(D, config)
        gamma = compute_weights(D, result.indices)
        classes.append(ClassCoreset(
            label=label,
            indices=[int(idx[i]) for i in result.indices],
            gamma=gamma,
            rho=divide_weights(gamma, r),
            g_frobenius=g_frobenius(D, result.indices, _resolve_c1(config, D)),
            trace=result.trace,
        ))
    return WeightedCoreset(classes=classes, engine=config.engine,
                           seed=config.seed, r=r, warnings=warnings)


@dataclass
class BaselineSubset:
    """A baseline selection: indices with uniform per-class weights n_c / k."""

    indices: np.ndarray
    weights: np.ndarray
    per_class: dict[int, np.ndarray]


def _per_class_k(k: int | None, fraction: float | None, n_c: int) -> int:
    kc = max(1, int(round(fraction * n_c))) if fraction is not None else int(k)
    if kc > n_c:
        raise ValueError(f"k={kc} exceeds class population {n_c}")
    return kc


def max_loss_subset(losses, k: int | None, labels,
                    fraction: float | None = None) -> BaselineSubset:
    """Top-k per-example losses within each class; ties to the smallest index."""
    losses = np.asarray(losses, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    indices, weights, per_class = [], [], {}
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        kc = _per_class_k(k, fraction, idx.size)
        order = np.argsort(-losses[idx], kind="stable")
        chosen = idx[order[:kc]]
        per_class[int(label)] = chosen
        indices.append(chosen)
        weights.append(np.full(kc, idx.size / kc))
    return BaselineSubset(np.concatenate(indices), np.concatenate(weights), per_class)


def random_subset(n: int, k: int | None, labels, seed: int = 0,
                  fraction: float | None = None) -> BaselineSubset:
    """Uniform without-replacement per-class sample with weights n_c / k."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != n:
        raise ValueError("labels length must equal n")
    rng = np.random.default_rng(seed)
    indices, weights, per_class = [], [], {}
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        kc = _per_class_k(k, fraction, idx.size)
        chosen = np.sort(rng.choice(idx, size=kc, replace=False))
        per_class[int(label)] = chosen
        indices.append(chosen)
        weights.append(np.full(kc, idx.size / kc))
    return BaselineSubset(np.concatenate(indices), np.concatenate(weights), per_class)


@dataclass
class AlignmentReport:
    """Measured weighted-subset gradient-sum error against its coverage bound.

    Per class: ``error_c = || sum_i g_i - sum_{j in S_c} gamma_j g_j ||`` over
    proxy vectors; ``bound_c = sqrt(n_c) * coverage_norm_c``. The bound follows
    from the triangle inequality (the error is at most the sum of per-point
    nearest distances) and Cauchy-Schwarz, so it always dominates the error.
    """

    error_total: float
    bound_total: float
    per_class_error: dict[int, float]
    per_class_bound: dict[int, float]

    @property
    def passed(self) -> bool:
        return self.error_total <= self.bound_total + 1e-9


def alignment_error(proxies: GradientProxySet, coreset: WeightedCoreset) -> AlignmentReport:
    per_err: dict[int, float] = {}
    per_bound: dict[int, float] = {}
    for c in coreset.classes:
        idx = np.flatnonzero(proxies.labels == c.label)
        vectors = proxies.proxies[idx]
        global_to_local = {int(g): p for p, g in enumerate(idx)}
        local_s = np.asarray([global_to_local[i] for i in c.indices])
        total = vectors.sum(axis=0)
        approx = (vectors[local_s] * c.gamma[:, None]).sum(axis=0)
        D = pairwise_distances(vectors)
        cov = g_frobenius(D, list(local_s), c1=2.0 * float(D.max()))
        per_err[c.label] = float(np.linalg.norm(total - approx))
        per_bound[c.label] = math.sqrt(idx.size) * cov
    return AlignmentReport(
        error_total=sum(per_err.values()),
        bound_total=sum(per_bound.values()),
        per_class_error=per_err,
        per_class_bound=per_bound,
    )


@dataclass
class NtkBoundVerdict:
    """Exact-gradient audit of the coreset-kernel eigenvalue lower bound.

    Checks sqrt(sum of coreset NTK eigenvalues) >= |full gradient norm - xi|
    divided by the weight-scaled coreset residual norm, where xi is the
    measured alignment error of the weighted coreset on exact per-example
    gradients.
    """

    lhs: float
    rhs: float
    xi: float
    full_grad_norm: float
    weighted_residual_norm: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def coreset_ntk_bound_check(net: MLP, data: Dataset,
                            coreset: WeightedCoreset) -> NtkBoundVerdict:
    grads = per_example_gradients(net, data)
    full = grads.sum(axis=0)
    idx = coreset.indices
    gamma = coreset.gamma.astype(np.float64)
    approx = (grads[idx] * gamma[:, None]).sum(axis=0)
    xi = float(np.linalg.norm(full - approx))
    full_norm = float(np.linalg.norm(full))
    lhs = frobenius_norm(jacobian(net, data.features[idx]))
    r_s = residuals(net, data.subset(idx))
    res_norm = float(np.linalg.norm(r_s * gamma[:, None]))
    if res_norm < 1e-300:
        rhs = 0.0
        passed = abs(full_norm - xi) <= 1e-9
    else:
        rhs = abs(full_norm - xi) / res_norm
        passed = lhs + 1e-9 >= rhs
    return NtkBoundVerdict(
        lhs=lhs, rhs=rhs, xi=xi, full_grad_norm=full_norm,
        weighted_residual_norm=res_norm, passed=passed,
    )
