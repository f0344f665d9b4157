import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mediatop.data import AnnealingSchedule, ConfigError, Lattice, VectorDataset
from mediatop.euclid import (EuclideanPrototypes, batch_kmeans, batch_ng,
                             batch_som, compute_ranks, quantization_error,
                             rank_table, som_winner, winner_index)


class TestWinner:
    def test_obvious(self):
        w = EuclideanPrototypes(np.array([[0.0, 0], [5, 5]]))
        assert winner_index([0, 0], w) == 0

    def test_tie_breaks_low_index(self):
        w = EuclideanPrototypes(np.array([[2.0, 2], [0, 0]]))
        assert winner_index([1, 1], w) == 0

    def test_derived(self):
        w = EuclideanPrototypes(np.array([[0.0, 0], [3, 0], [10, 0]]))
        assert winner_index([4, 0], w) == 1


class TestRanks:
    def test_simple(self):
        assert rank_table(np.array([[4.0, 1, 9]]))[0].tolist() == [1, 0, 2]

    def test_all_tied(self):
        assert rank_table(np.array([[2.0, 2, 2]]))[0].tolist() == [0, 1, 2]

    def test_stable_tie(self):
        assert rank_table(np.array([[2.0, 2, 1, 5]]))[0].tolist() == [1, 2, 0, 3]

    def test_compute_ranks_entry_point(self):
        w = EuclideanPrototypes(np.array([[2.0], [1.0], [3.0]]))
        assert compute_ranks([1.0], w).tolist() == [1, 0, 2]

    @given(st.integers(0, 2 ** 31 - 1))
    def test_rows_are_permutations(self, seed):
        rng = np.random.default_rng(seed)
        d = rng.random((8, 5))
        ranks = rank_table(d)
        for row in ranks:
            assert sorted(row.tolist()) == list(range(5))

    def test_rank_zero_is_winner(self, rng):
        d = rng.random((30, 6))
        ranks = rank_table(d)
        assert np.array_equal(np.argmin(d, axis=1), np.argmin(ranks, axis=1))


class TestQuantizationError:
    def test_zero_when_exact(self):
        pts = np.array([[1.0, 1], [2, 2]])
        protos = EuclideanPrototypes(pts.copy())
        qe = quantization_error(VectorDataset(pts), protos, np.array([0, 1]))
        assert qe.e_half == 0.0

    def test_half_convention(self):
        pts = np.array([[0.0], [0.0]])
        protos = EuclideanPrototypes(np.array([[np.sqrt(2.0)]]))
        qe = quantization_error(VectorDataset(pts), protos, np.array([0, 0]))
        assert qe.e_half == pytest.approx(2.0)
        assert qe.e_norm == pytest.approx(1.0)

    def test_median_mode_from_matrix(self):
        m = np.array([[0.0, 4], [4, 0]])
        qe = quantization_error(m, np.array([0]), np.array([0, 0]))
        assert qe.e_half == pytest.approx(2.0)


def kmeans_brute_force(points, k):
    """Best half quantization error over all k-partitions (tiny N only)."""
    n = len(points)
    best = np.inf
    for assign in itertools.product(range(k), repeat=n):
        cost = 0.0
        ok = True
        for j in range(k):
            members = points[[i for i in range(n) if assign[i] == j]]
            if len(members) == 0:
                ok = False
                break
            mu = members.mean(axis=0)
            cost += ((members - mu) ** 2).sum()
        if ok:
            best = min(best, 0.5 * cost)
    return best


class TestBatchKmeans:
    def test_two_separated_pairs(self):
        # k-means is init sensitive; seed 1 reaches the global optimum here
        pts = np.array([[0.0, 0], [0, 1], [10, 0], [10, 1]])
        res = batch_kmeans(VectorDataset(pts), 2, epochs=50, init_seed=1)
        got = np.array(sorted(res.prototypes.w.tolist()))
        assert np.allclose(got, [[0, 0.5], [10, 0.5]], atol=1e-12)
        assert res.history[-1]["e_half"] == pytest.approx(0.5 * (4 * 0.25))

    def test_k_equals_n(self):
        pts = np.arange(6.0).reshape(6, 1)
        res = batch_kmeans(VectorDataset(pts), 6, epochs=20, init_seed=1)
        assert res.history[-1]["e_half"] == pytest.approx(0.0)

    def test_1d_matches_brute_force(self):
        pts = np.array([[0.0], [1.0], [9.0], [10.0]])
        res = batch_kmeans(VectorDataset(pts), 2, epochs=50, init_seed=3)
        assert sorted(res.prototypes.w[:, 0].tolist()) == pytest.approx([0.5, 9.5])
        assert res.history[-1]["e_half"] == pytest.approx(kmeans_brute_force(pts, 2))

    def test_rejects_too_many_prototypes(self):
        with pytest.raises(ConfigError):
            batch_kmeans(VectorDataset(np.ones((3, 1))), 4)

    def test_cost_monotone(self, rng):
        pts = rng.normal(size=(60, 3))
        res = batch_kmeans(VectorDataset(pts), 5, epochs=100, init_seed=2)
        eh = [h["e_half"] for h in res.history]
        assert all(a >= b - 1e-9 for a, b in zip(eh, eh[1:]))


class TestBatchNg:
    def test_k1_is_global_mean(self, rng):
        pts = rng.normal(size=(25, 2))
        res = batch_ng(VectorDataset(pts), 1, AnnealingSchedule(2, 2, 10), 0)
        assert np.allclose(res.prototypes.w[0], pts.mean(axis=0), atol=1e-9)

    def test_sigma_zero_limit_matches_kmeans(self):
        pts = np.array([[0.0], [1.0], [9.0], [10.0], [20.0], [21.0]])
        ng = batch_ng(VectorDataset(pts), 3, AnnealingSchedule(1e-6, 1e-6, 60), 4)
        km = batch_kmeans(VectorDataset(pts), 3, epochs=60, init_seed=4)
        assert np.allclose(sorted(ng.prototypes.w[:, 0]), sorted(km.prototypes.w[:, 0]),
                           atol=1e-9)

    def test_cost_monotone_at_fixed_sigma(self, rng):
        pts = rng.normal(size=(50, 2))
        res = batch_ng(VectorDataset(pts), 4, AnnealingSchedule(1.5, 1.5, 80), 1)
        costs = [h["cost"] for h in res.history]
        assert all(a >= b - 1e-9 for a, b in zip(costs, costs[1:]))

    def test_finite_convergence_constant_sigma(self, rng):
        pts = rng.normal(size=(120, 3))
        res = batch_ng(VectorDataset(pts), 6, AnnealingSchedule(1.0, 1.0, 500), 7)
        assert res.epochs_run < 500


class TestSomWinner:
    def test_sigma_zero_equals_plain_winner(self):
        w = EuclideanPrototypes(np.array([[0.0], [3.0], [10.0]]))
        lat = Lattice.chain(3)
        assert som_winner([4.0], w, lat, 1e-6) == winner_index([4.0], w)

    def test_k1(self):
        w = EuclideanPrototypes(np.array([[5.0]]))
        assert som_winner([0.0], w, Lattice.chain(1), 1.0) == 0

    def test_chain_neighborhood_average(self):
        # distances to the three prototypes: 1, 1, 100; chain lattice, sigma 1.
        # unit 0 averages out the far prototype more strongly than unit 1.
        w = EuclideanPrototypes(np.array([[1.0], [3.0], [12.0]]))
        x = [2.0]
        d = ((w.w[:, 0] - 2.0) ** 2)
        assert d.tolist() == [1.0, 1.0, 100.0]
        assert som_winner(x, w, Lattice.chain(3), 1.0) == 0


class TestBatchSom:
    def test_sigma_zero_limit_matches_kmeans(self):
        pts = np.array([[0.0], [1.0], [9.0], [10.0]])
        som = batch_som(VectorDataset(pts), Lattice.chain(2),
                        AnnealingSchedule(1e-9, 1e-9, 50), 3)
        km = batch_kmeans(VectorDataset(pts), 2, epochs=50, init_seed=3)
        assert np.allclose(sorted(som.prototypes.w[:, 0]), sorted(km.prototypes.w[:, 0]),
                           atol=1e-9)

    def test_k1_is_global_mean(self, rng):
        pts = rng.normal(size=(30, 2))
        res = batch_som(VectorDataset(pts), Lattice.chain(1),
                        AnnealingSchedule(1, 1, 20), 0)
        assert np.allclose(res.prototypes.w[0], pts.mean(axis=0), atol=1e-9)

    def test_two_point_fixed_point(self):
        # 2-unit chain on {0, 10} at sigma=1: the linear fixed point is
        # w0 = 10 e^{-1} / (1 + e^{-1}), w1 = 10 / (1 + e^{-1}).
        pts = np.array([[0.0], [10.0]])
        res = batch_som(VectorDataset(pts), Lattice.chain(2),
                        AnnealingSchedule(1.0, 1.0, 200), 0)
        lo, hi = sorted(res.prototypes.w[:, 0])
        assert lo == pytest.approx(2.689414213699951, abs=1e-9)
        assert hi == pytest.approx(7.310585786300049, abs=1e-9)
        assert lo + hi == pytest.approx(10.0, abs=1e-9)

    def test_cost_monotone_at_fixed_sigma(self, rng):
        pts = rng.normal(size=(40, 2))
        res = batch_som(VectorDataset(pts), Lattice.rectangular(2, 2),
                        AnnealingSchedule(0.8, 0.8, 100), 5)
        costs = [h["cost"] for h in res.history]
        assert all(a >= b - 1e-9 for a, b in zip(costs, costs[1:]))

    def test_finite_convergence(self, rng):
        pts = rng.normal(size=(150, 2))
        res = batch_som(VectorDataset(pts), Lattice.rectangular(2, 3),
                        AnnealingSchedule(1.0, 1.0, 500), 2)
        assert res.epochs_run < 500
