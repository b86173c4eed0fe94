import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coreaug.coreset import (
    SelectionConfig,
    alignment_error,
    compute_weights,
    coreset_ntk_bound_check,
    distance_matrix,
    divide_weights,
    facility_location_objective,
    g_frobenius,
    greedy_select,
    lazy_greedy_select,
    max_loss_subset,
    pairwise_distances,
    random_subset,
    select_all_classes,
    stochastic_greedy_select,
)
from coreaug.model import Dataset, GradientProxySet, MLP, gradient_proxy


def random_points(seed, n, p=3, scale=1.0):
    return scale * np.random.default_rng(seed).standard_normal((n, p))


def proxy_set(points, labels=None, C=None):
    labels = np.zeros(points.shape[0], dtype=int) if labels is None else labels
    C = int(labels.max()) + 1 if C is None else C
    return GradientProxySet(points, labels, "residual", C)


def brute_g(D, S, c1):
    """Direct per-point minimum scan, summed by hand."""
    if not S:
        return math.sqrt(D.shape[0]) * c1
    total = 0.0
    for i in range(D.shape[0]):
        total += min(D[i, j] for j in S) ** 2
    return math.sqrt(total)


class TestDistanceMatrix:
    def test_identical_proxies(self):
        pts = np.tile([[1.0, 2.0]], (4, 1))
        D = pairwise_distances(pts)
        assert np.array_equal(D, np.zeros((4, 4)))

    def test_two_points(self):
        D = pairwise_distances(np.array([[0.0, 0.0], [3.0, 4.0]]))
        assert np.allclose(D, [[0.0, 5.0], [5.0, 0.0]], atol=1e-12)

    def test_matches_brute_force(self):
        pts = random_points(0, 12, p=4)
        D = pairwise_distances(pts)
        for i in range(12):
            for j in range(12):
                assert D[i, j] == pytest.approx(
                    np.linalg.norm(pts[i] - pts[j]), abs=1e-9)

    def test_per_class(self):
        pts = random_points(1, 10)
        labels = np.array([0, 1] * 5)
        D = distance_matrix(proxy_set(pts, labels), 1)
        assert D.shape == (5, 5)
        expected = pairwise_distances(pts[labels == 1])
        assert np.array_equal(D, expected)

    def test_empty_class_errors(self):
        with pytest.raises(ValueError):
            distance_matrix(proxy_set(random_points(2, 4), np.zeros(4, dtype=int), C=2), 1)


class TestGFrobenius:
    def test_full_set_is_zero(self):
        D = pairwise_distances(random_points(3, 6))
        assert g_frobenius(D, list(range(6)), c1=10.0) == 0.0

    def test_empty_set_sentinel(self):
        D = np.zeros((4, 4))
        assert g_frobenius(D, [], c1=10.0) == pytest.approx(20.0)

    def test_brute_force_oracle(self):
        D = pairwise_distances(random_points(4, 5))
        assert g_frobenius(D, [2], c1=1.0) == pytest.approx(brute_g(D, [2], 1.0))


def fl_optimum(D, k, cap):
    """Exhaustive search over all k-subsets."""
    best = -math.inf
    for S in itertools.combinations(range(D.shape[0]), k):
        best = max(best, facility_location_objective(D, list(S), cap))
    return best


def min_cover_size(D, xi, c1):
    """Smallest subset with coverage norm <= xi, by full enumeration."""
    n = D.shape[0]
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            if brute_g(D, list(S), c1) <= xi:
                return size
    return n


class TestGreedy:
    def test_all_identical_points(self):
        D = np.zeros((5, 5))
        res = greedy_select(D, SelectionConfig(stop="fixed_size", k_per_class=3))
        assert res.indices == [0]
        assert res.trace == [0.0]

    def test_k_exceeding_class_errors(self):
        D = pairwise_distances(random_points(5, 4))
        with pytest.raises(ValueError):
            greedy_select(D, SelectionConfig(stop="fixed_size", k_per_class=9))

    def test_fraction_of_one_selects_everything(self):
        D = pairwise_distances(random_points(6, 7))
        res = greedy_select(D, SelectionConfig(stop="fixed_size", fraction=1.0))
        assert sorted(res.indices) == list(range(7))
        assert res.trace[-1] == 0.0

    def test_facility_location_guarantee(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(5, 13))
            k = int(rng.integers(1, 5))
            D = pairwise_distances(rng.standard_normal((n, 3)))
            cap = float(D.max())
            res = greedy_select(D, SelectionConfig(stop="fixed_size",
                                                   k_per_class=min(k, n)))
            achieved = facility_location_objective(D, res.indices[:k], cap)
            opt = fl_optimum(D, min(k, n), cap)
            assert achieved >= (1.0 - 1.0 / math.e) * opt - 1e-9

    def test_cover_log_approximation(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            n = int(rng.integers(5, 11))
            pts = rng.standard_normal((n, 2))
            D = pairwise_distances(pts)
            c1 = 2.0 * float(D.max())
            xi = 0.4 * brute_g(D, [0], c1)
            res = greedy_select(D, SelectionConfig(stop="xi_threshold", xi=xi, c1=c1))
            assert res.trace[-1] <= xi
            opt = min_cover_size(D, xi, c1)
            assert len(res.indices) <= (1.0 + math.log(n)) * opt + 1e-9

    def test_trace_strictly_decreasing(self):
        D = pairwise_distances(random_points(9, 20))
        res = greedy_select(D, SelectionConfig(stop="fixed_size", k_per_class=10))
        assert all(b < a for a, b in zip(res.trace, res.trace[1:]))


class TestLazyGreedy:
    @given(seed=st.integers(0, 300))
    @settings(max_examples=40)
    def test_identical_to_naive(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 60))
        k = int(rng.integers(1, n + 1))
        D = pairwise_distances(rng.standard_normal((n, 3)))
        cfg = SelectionConfig(stop="fixed_size", k_per_class=k)
        naive = greedy_select(D, cfg)
        lazy = lazy_greedy_select(D, cfg)
        assert lazy.indices == naive.indices
        assert lazy.trace == naive.trace

    def test_identical_under_xi_threshold(self):
        D = pairwise_distances(random_points(10, 40))
        cfg = SelectionConfig(stop="xi_threshold", xi=0.5)
        naive = greedy_select(D, cfg)
        lazy = lazy_greedy_select(D, cfg)
        assert lazy.indices == naive.indices
        assert lazy.trace == naive.trace

    def test_single_element_class(self):
        D = np.zeros((1, 1))
        res = lazy_greedy_select(D, SelectionConfig(stop="fixed_size", k_per_class=1))
        assert res.indices == [0]

    def test_fewer_evaluations_than_naive(self):
        D = pairwise_distances(random_points(11, 150))
        cfg = SelectionConfig(stop="fixed_size", k_per_class=20)
        naive = greedy_select(D, cfg)
        lazy = lazy_greedy_select(D, cfg)
        assert lazy.evaluations <= naive.evaluations


class TestStochasticGreedy:
    def test_full_sampling_degenerates_to_naive(self):
        D = pairwise_distances(random_points(12, 25))
        cfg_s = SelectionConfig(stop="fixed_size", k_per_class=6,
                                engine="stochastic", stochastic_sample=25, seed=3)
        cfg_n = SelectionConfig(stop="fixed_size", k_per_class=6)
        assert stochastic_greedy_select(D, cfg_s).indices == greedy_select(D, cfg_n).indices

    def test_seed_determinism(self):
        D = pairwise_distances(random_points(13, 40))
        cfg = SelectionConfig(stop="fixed_size", k_per_class=8,
                              engine="stochastic", stochastic_sample=5, seed=11)
        a = stochastic_greedy_select(D, cfg)
        b = stochastic_greedy_select(D, cfg)
        assert a.indices == b.indices and a.trace == b.trace

    def test_objective_close_to_naive(self):
        D = pairwise_distances(random_points(14, 120, p=4))
        cap = float(D.max())
        cfg_n = SelectionConfig(stop="fixed_size", k_per_class=12)
        naive_obj = facility_location_objective(
            D, greedy_select(D, cfg_n).indices, cap)
        objs = []
        for seed in range(10):
            cfg = SelectionConfig(stop="fixed_size", k_per_class=12,
                                  engine="stochastic", seed=seed)
            objs.append(facility_location_objective(
                D, stochastic_greedy_select(D, cfg).indices, cap))
        assert np.mean(objs) >= 0.95 * naive_obj


class TestWeights:
    def test_all_points_selected(self):
        D = pairwise_distances(random_points(15, 8))
        gamma = compute_weights(D, list(range(8)))
        assert np.array_equal(gamma, np.ones(8, dtype=int))

    def test_single_medoid(self):
        D = pairwise_distances(random_points(16, 7))
        assert np.array_equal(compute_weights(D, [4]), [7])

    def test_brute_force_assignment(self):
        D = pairwise_distances(random_points(17, 15))
        S = [2, 9, 13]
        gamma = compute_weights(D, S)
        counts = {j: 0 for j in S}
        for i in range(15):
            best = min(S, key=lambda j: (D[i, j], j))
            counts[best] += 1
        assert list(gamma) == [counts[j] for j in S]

    def test_tie_goes_to_smallest_selected_index(self):
        # point 0 is equidistant from the two selected points
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
        D = pairwise_distances(pts)
        gamma = compute_weights(D, [2, 1])
        # order follows S: index 2 then index 1; point 0 ties -> index 1 wins
        assert list(gamma) == [1, 2]

    def test_divide_weights(self):
        assert np.array_equal(divide_weights(np.array([4, 2]), 2), [2.0, 1.0])
        assert np.array_equal(divide_weights(np.array([3, 5]), 1), [3.0, 5.0])

    @given(seed=st.integers(0, 500))
    @settings(max_examples=30)
    def test_weight_conservation(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 30))
        k = int(rng.integers(1, n + 1))
        r = int(rng.integers(1, 5))
        D = pairwise_distances(rng.standard_normal((n, 2)))
        S = list(rng.choice(n, size=k, replace=False))
        gamma = compute_weights(D, S)
        assert gamma.sum() == n
        rho = divide_weights(gamma, r)
        assert rho.sum() * r == pytest.approx(n)


class TestSelectAllClasses:
    def test_fraction_one_is_whole_dataset(self):
        pts = random_points(18, 12)
        labels = np.array([0, 1, 2] * 4)
        proxies = proxy_set(pts, labels)
        coreset = select_all_classes(proxies, SelectionConfig(fraction=1.0))
        assert sorted(coreset.indices.tolist()) == list(range(12))
        assert np.array_equal(coreset.gamma, np.ones(12, dtype=int))

    def test_balanced_classes_equal_share(self):
        pts = random_points(19, 30)
        labels = np.repeat([0, 1, 2], 10)
        coreset = select_all_classes(proxy_set(pts, labels),
                                     SelectionConfig(fraction=0.1))
        sizes = [len(c.indices) for c in coreset.classes]
        assert sizes == [1, 1, 1]

    def test_matches_independent_engine_runs(self):
        pts = random_points(20, 24)
        labels = np.repeat([0, 1], 12)
        proxies = proxy_set(pts, labels)
        cfg = SelectionConfig(stop="fixed_size", k_per_class=4, engine="naive")
        coreset = select_all_classes(proxies, cfg)
        for c in coreset.classes:
            idx = np.flatnonzero(labels == c.label)
            res = greedy_select(pairwise_distances(pts[idx]), cfg)
            assert [idx[i] for i in res.indices] == c.indices
            assert res.trace == c.trace

    def test_empty_class_warns(self):
        pts = random_points(21, 6)
        labels = np.zeros(6, dtype=int)
        coreset = select_all_classes(
            GradientProxySet(pts, labels, "residual", 2),
            SelectionConfig(fraction=0.5))
        assert len(coreset.classes) == 1
        assert any("class 1" in w for w in coreset.warnings)

    def test_validate_passes_on_engine_output(self):
        pts = random_points(22, 40)
        labels = np.repeat([0, 1], 20)
        coreset = select_all_classes(proxy_set(pts, labels),
                                     SelectionConfig(fraction=0.3), r=2)
        coreset.validate({0: 20, 1: 20})

    def test_json_schema(self):
        pts = random_points(23, 10)
        labels = np.repeat([0, 1], 5)
        coreset = select_all_classes(proxy_set(pts, labels),
                                     SelectionConfig(fraction=0.4), r=2)
        payload = coreset.to_json_dict()
        assert set(payload) == {"classes", "engine", "seed"}
        for entry in payload["classes"]:
            assert set(entry) == {"class", "indices", "gamma", "rho",
                                  "g_frobenius", "trace"}
            assert len(entry["indices"]) == len(entry["gamma"]) == len(entry["rho"])


class TestBaselines:
    def test_max_loss_tie_rule(self):
        losses = np.ones(8)
        labels = np.repeat([0, 1], 4)
        subset = max_loss_subset(losses, 2, labels)
        assert np.array_equal(subset.per_class[0], [0, 1])
        assert np.array_equal(subset.per_class[1], [4, 5])

    def test_max_loss_outlier_always_included(self):
        losses = np.array([0.1, 0.2, 9.0, 0.3, 0.1, 0.2])
        labels = np.zeros(6, dtype=int)
        for k in range(1, 6):
            assert 2 in max_loss_subset(losses, k, labels).indices

    def test_max_loss_sort_oracle(self):
        rng = np.random.default_rng(24)
        losses = rng.uniform(size=20)
        labels = rng.integers(0, 2, 20)
        subset = max_loss_subset(losses, 3, labels)
        for label in (0, 1):
            idx = np.flatnonzero(labels == label)
            expected = sorted(idx, key=lambda i: (-losses[i], i))[:3]
            assert list(subset.per_class[label]) == expected

    def test_random_subset_full_class(self):
        labels = np.repeat([0, 1], 6)
        subset = random_subset(12, 6, labels, seed=0)
        assert sorted(subset.indices.tolist()) == list(range(12))
        assert np.allclose(subset.weights, 1.0)

    def test_random_subset_repeatable(self):
        labels = np.repeat([0, 1, 2], 10)
        a = random_subset(30, 3, labels, seed=42)
        b = random_subset(30, 3, labels, seed=42)
        assert np.array_equal(a.indices, b.indices)

    def test_random_subset_uniform_frequencies(self):
        labels = np.zeros(10, dtype=int)
        counts = np.zeros(10)
        draws = 10_000
        for seed in range(draws):
            counts[random_subset(10, 3, labels, seed=seed).indices] += 1
        p = 3 / 10
        sigma = math.sqrt(draws * p * (1 - p))
        assert np.all(np.abs(counts - draws * p) <= 3 * sigma)

    def test_k_too_large_errors(self):
        with pytest.raises(ValueError):
            random_subset(4, 5, np.zeros(4, dtype=int), seed=0)


class TestAlignmentError:
    def test_full_selection_zero_error(self):
        pts = random_points(25, 9)
        labels = np.repeat([0, 1, 2], 3)
        proxies = proxy_set(pts, labels)
        coreset = select_all_classes(proxies, SelectionConfig(fraction=1.0))
        report = alignment_error(proxies, coreset)
        assert report.error_total == pytest.approx(0.0, abs=1e-9)
        assert report.passed

    def test_duplicated_dataset_exact(self):
        base = random_points(26, 5)
        pts = np.vstack([base, base])
        labels = np.zeros(10, dtype=int)
        proxies = proxy_set(pts, labels)
        coreset = select_all_classes(proxies, SelectionConfig(stop="fixed_size",
                                                              k_per_class=5))
        report = alignment_error(proxies, coreset)
        assert np.array_equal(np.sort(coreset.gamma), [2, 2, 2, 2, 2])
        assert report.error_total == pytest.approx(0.0, abs=1e-9)

    @given(seed=st.integers(0, 400))
    @settings(max_examples=50)
    def test_bound_dominates_error(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 40))
        pts = rng.standard_normal((n, 4))
        labels = np.zeros(n, dtype=int)
        proxies = proxy_set(pts, labels)
        k = int(rng.integers(1, n + 1))
        coreset = select_all_classes(proxies,
                                     SelectionConfig(stop="fixed_size", k_per_class=k))
        report = alignment_error(proxies, coreset)
        assert report.error_total <= report.bound_total + 1e-9


class TestMonotoneCoverage:
    @given(seed=st.integers(0, 400))
    @settings(max_examples=40)
    def test_coverage_norm_nonincreasing_along_chains(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 25))
        D = pairwise_distances(rng.standard_normal((n, 3)))
        c1 = 2.0 * float(D.max())
        order = list(rng.permutation(n))
        prev = g_frobenius(D, [], c1)
        for size in range(1, n + 1):
            cur = g_frobenius(D, order[:size], c1)
            assert cur <= prev + 1e-12
            prev = cur

    @given(seed=st.integers(0, 300))
    @settings(max_examples=30)
    def test_squared_coverage_gains_nonincreasing_along_greedy_path(self, seed):
        # greedy maximizes these gains, so its own gain sequence is sorted
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 30))
        D = pairwise_distances(rng.standard_normal((n, 3)))
        c1 = 2.0 * float(D.max())
        res = greedy_select(D, SelectionConfig(stop="fixed_size", k_per_class=n, c1=c1))
        q_values = [n * c1 * c1] + [t * t for t in res.trace]
        gains = -np.diff(q_values)
        assert np.all(np.diff(gains) <= 1e-9 * q_values[0])

    @given(seed=st.integers(0, 300))
    @settings(max_examples=30)
    def test_fl_surrogate_is_submodular(self, seed):
        # gain of a fixed element never grows as the base set grows
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 25))
        D = pairwise_distances(rng.standard_normal((n, 3)))
        cap = float(D.max())
        perm = list(rng.permutation(n))
        small = perm[:int(rng.integers(1, n - 1))]
        big = perm[:int(rng.integers(len(small), n - 1)) + 1]
        e = perm[-1]
        gain_small = (facility_location_objective(D, small + [e], cap)
                      - facility_location_objective(D, small, cap))
        gain_big = (facility_location_objective(D, big + [e], cap)
                    - facility_location_objective(D, big, cap))
        assert gain_big <= gain_small + 1e-9


class TestNtkBound:
    def test_full_selection_cauchy_schwarz(self):
        rng = np.random.default_rng(27)
        data = Dataset(rng.uniform(0, 1, (10, 4)), rng.integers(0, 2, 10), 2)
        net = MLP.init([4, 5, 2], seed=1)
        proxies = gradient_proxy(net, data, "last_layer")
        coreset = select_all_classes(proxies, SelectionConfig(fraction=1.0))
        verdict = coreset_ntk_bound_check(net, data, coreset)
        assert verdict.xi == pytest.approx(0.0, abs=1e-9)
        assert verdict.passed

    def test_zero_residual(self):
        net = MLP.zeros([3, 2])
        net.biases[-1] = np.array([1.0, 0.0])
        rng = np.random.default_rng(28)
        data = Dataset(rng.uniform(0, 1, (6, 3)), np.zeros(6, dtype=int), 2)
        proxies = gradient_proxy(net, data, "residual")
        coreset = select_all_classes(proxies, SelectionConfig(stop="fixed_size",
                                                              k_per_class=2))
        verdict = coreset_ntk_bound_check(net, data, coreset)
        assert verdict.passed

    def test_random_instances(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            n = int(rng.integers(8, 30))
            d = int(rng.integers(3, 6))
            data = Dataset(rng.uniform(0, 1, (n, d)), rng.integers(0, 2, n), 2)
            net = MLP.init([d, 6, 2], seed=int(rng.integers(1 << 20)))
            proxies = gradient_proxy(net, data, "last_layer")
            coreset = select_all_classes(
                proxies, SelectionConfig(stop="fixed_size", k_per_class=2))
            assert coreset_ntk_bound_check(net, data, coreset).passed
