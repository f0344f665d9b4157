import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mediatop.data import (AnnealingSchedule, ConfigError, DataError, Lattice,
                           MatrixSource, MetricSource, SequenceDataset,
                           VectorDataset, cosine_dissimilarity,
                           load_dissimilarity, load_sequence_file,
                           load_vector_file, materialize_dissimilarity,
                           neighborhood_weight, save_dissimilarity, sigma_at,
                           squared_euclidean, validate_source,
                           weighted_edit_distance, zscore_standardize)


class TestNeighborhoodWeight:
    def test_zero_distance(self):
        assert neighborhood_weight(0, 2.0) == 1.0

    def test_unit(self):
        assert neighborhood_weight(1, 1.0) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_derived_value(self):
        # exp(-3/1.5) = exp(-2)
        assert neighborhood_weight(3, 1.5) == pytest.approx(0.1353352832366127, abs=1e-15)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            neighborhood_weight(1.0, 0.0)
        with pytest.raises(ValueError):
            neighborhood_weight(1.0, -2.0)

    @given(st.floats(0.01, 50), st.floats(0.01, 20), st.floats(0.01, 20))
    def test_strictly_decreasing(self, sigma, t1, dt):
        assert neighborhood_weight(t1 + dt, sigma) < neighborhood_weight(t1, sigma)


class TestSchedule:
    def test_constant(self):
        s = AnnealingSchedule(4, 4, 10)
        assert sigma_at(s, 5) == 4.0

    def test_endpoint(self):
        s = AnnealingSchedule(8, 0.5, 5)
        assert sigma_at(s, 4) == 0.5

    def test_geometric_midpoint(self):
        # 8 * (0.5/8)^(2/4) = 8 * 0.25
        s = AnnealingSchedule(8, 0.5, 5)
        assert sigma_at(s, 2) == pytest.approx(2.0, rel=1e-12)

    def test_single_epoch_returns_start(self):
        assert sigma_at(AnnealingSchedule(8, 0.5, 1), 0) == 8.0

    def test_out_of_range(self):
        s = AnnealingSchedule(8, 0.5, 5)
        with pytest.raises(ValueError):
            sigma_at(s, 5)
        with pytest.raises(ValueError):
            sigma_at(s, -1)

    def test_monotone_nonincreasing(self):
        s = AnnealingSchedule(9, 0.02, 40)
        vals = [sigma_at(s, t) for t in range(40)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_invalid_construction(self):
        with pytest.raises(ConfigError):
            AnnealingSchedule(0.5, 8, 5)
        with pytest.raises(ConfigError):
            AnnealingSchedule(1, 0, 5)


class TestMetrics:
    def test_sqeuclidean_identity(self):
        assert squared_euclidean([1, 2], [1, 2]) == 0.0

    def test_sqeuclidean_pythagorean(self):
        assert squared_euclidean([0, 0], [3, 4]) == 25.0

    def test_sqeuclidean_derived(self):
        assert squared_euclidean([1, -1, 2], [2, 1, 0]) == 9.0

    def test_sqeuclidean_shape_mismatch(self):
        with pytest.raises(ValueError):
            squared_euclidean([1, 2], [1, 2, 3])

    def test_cosine_parallel(self):
        assert cosine_dissimilarity([1, 0], [2, 0]) == pytest.approx(0.0, abs=1e-15)

    def test_cosine_orthogonal(self):
        assert cosine_dissimilarity([1, 0], [0, 5]) == pytest.approx(1.0, abs=1e-15)

    def test_cosine_antiparallel(self):
        assert cosine_dissimilarity([1, 1], [-1, -1]) == pytest.approx(2.0, abs=1e-15)

    def test_cosine_zero_norm(self):
        with pytest.raises(ValueError):
            cosine_dissimilarity([0, 0], [1, 1])


def brute_force_edit(a, b, indel):
    """Exhaustive recursion over all edit scripts; oracle for small cases."""
    if len(a) == 0:
        return len(b) * indel
    if len(b) == 0:
        return len(a) * indel
    return min(
        brute_force_edit(a[1:], b[1:], indel) + abs(a[0] - b[0]),
        brute_force_edit(a[1:], b, indel) + indel,
        brute_force_edit(a, b[1:], indel) + indel,
    )


class TestEditDistance:
    def test_identical(self):
        assert weighted_edit_distance([3, 1, 2], [3, 1, 2], 4.5) == 0.0

    def test_substitution_cheaper_than_indels(self):
        assert weighted_edit_distance([3], [5], 4.5) == 2.0

    def test_single_deletion(self):
        assert weighted_edit_distance([1, 2], [1], 4.5) == 4.5

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=5),
           st.lists(st.floats(-5, 5), min_size=1, max_size=5))
    def test_matches_exhaustive_oracle(self, a, b):
        got = weighted_edit_distance(a, b, 4.5)
        want = brute_force_edit(tuple(a), tuple(b), 4.5)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    @given(st.lists(st.floats(-9, 9), min_size=1, max_size=12),
           st.lists(st.floats(-9, 9), min_size=1, max_size=12))
    def test_symmetry_and_identity(self, a, b):
        assert weighted_edit_distance(a, b, 4.5) == pytest.approx(
            weighted_edit_distance(b, a, 4.5), rel=1e-12, abs=1e-12)
        assert weighted_edit_distance(a, a, 4.5) == 0.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            weighted_edit_distance([], [1], 4.5)


class TestZscore:
    def test_two_point_column_population(self):
        ds = VectorDataset(np.array([[2.0], [4.0]]))
        out = zscore_standardize(ds, "population")
        assert out.points[:, 0] == pytest.approx([-1.0, 1.0], abs=1e-12)

    def test_two_point_column_sample(self):
        ds = VectorDataset(np.array([[2.0], [4.0]]))
        out = zscore_standardize(ds, "sample")
        assert out.points[:, 0] == pytest.approx([-0.7071067811865476, 0.7071067811865476],
                                                 abs=1e-12)

    def test_constant_column_centered_only(self):
        ds = VectorDataset(np.array([[5.0], [5.0], [5.0]]))
        out = zscore_standardize(ds)
        assert out.points[:, 0] == pytest.approx([0, 0, 0], abs=1e-12)

    def test_idempotent(self, rng):
        pts = rng.normal(3, 7, size=(40, 5))
        once = zscore_standardize(VectorDataset(pts))
        twice = zscore_standardize(once)
        assert np.allclose(once.points, twice.points, atol=1e-9)

    def test_standardized_moments(self, rng):
        pts = rng.normal(3, 7, size=(40, 5))
        out = zscore_standardize(VectorDataset(pts))
        assert np.allclose(out.points.mean(axis=0), 0, atol=1e-9)
        assert np.allclose(out.points.std(axis=0, ddof=0), 1, atol=1e-9)

    def test_labels_unchanged(self):
        labels = np.array([[1.0, 0], [0, 1], [1, 0]])
        ds = VectorDataset(np.array([[1.0], [2], [3]]), labels=labels)
        out = zscore_standardize(ds)
        assert np.array_equal(out.labels, labels)


class TestMaterialize:
    def test_identical_points(self):
        ds = VectorDataset(np.ones((3, 2)))
        src = materialize_dissimilarity(ds, "sqeuclidean")
        assert np.array_equal(src.matrix, np.zeros((3, 3)))

    def test_two_points(self):
        ds = VectorDataset(np.array([[0.0, 0], [3, 4]]))
        src = materialize_dissimilarity(ds, "sqeuclidean")
        assert src.access(0, 1) == pytest.approx(25.0)

    def test_sequences_edit(self):
        ds = SequenceDataset([np.array([1.0, 2.0]), np.array([1.0])])
        src = materialize_dissimilarity(ds, "edit", 4.5)
        assert src.access(0, 1) == pytest.approx(4.5)

    def test_metric_mismatch(self):
        ds = SequenceDataset([np.array([1.0])])
        with pytest.raises(ConfigError):
            materialize_dissimilarity(ds, "sqeuclidean")

    def test_invariants_all_pairs(self, rng):
        ds = VectorDataset(rng.normal(size=(50, 3)))
        src = materialize_dissimilarity(ds, "sqeuclidean")
        m = src.matrix
        assert np.array_equal(m, m.T)
        assert np.all(np.diag(m) == 0)
        assert np.all(m >= 0) and np.all(np.isfinite(m))
        validate_source(src, sample_pairs=200)

    def test_cosine_range(self, rng):
        ds = VectorDataset(rng.normal(size=(30, 4)))
        src = materialize_dissimilarity(ds, "cosine")
        assert src.matrix.max() <= 2.0 and src.matrix.min() >= 0.0


class TestSources:
    def test_metric_source_matches_materialized(self, rng):
        ds = VectorDataset(rng.normal(size=(20, 3)))
        lazy = MetricSource(ds, "sqeuclidean")
        full = materialize_dissimilarity(ds, "sqeuclidean")
        rows = np.array([1, 5, 7])
        cols = np.array([0, 2, 19])
        assert np.allclose(lazy.block(rows, cols), full.matrix[np.ix_(rows, cols)],
                           rtol=1e-12, atol=1e-12)

    def test_matrix_source_detects_asymmetry(self):
        m = np.array([[0.0, 1], [2, 0]])
        src = MatrixSource(m)
        assert not src.symmetry_declared
        with pytest.raises(ConfigError):
            src.symmetric_block(np.array([0, 1]))

    def test_symmetric_block_mirrors_upper_triangle(self, rng):
        m = rng.random((6, 6))
        m = np.triu(m, 1) + np.triu(m, 1).T
        src = MatrixSource(m)
        sub = src.symmetric_block(np.array([0, 2, 4]))
        assert np.array_equal(sub, sub.T)
        assert np.all(np.diag(sub) == 0)

    def test_validate_rejects_nonzero_diagonal(self):
        src = MatrixSource(np.array([[1.0, 0], [0, 0]]), symmetric=True)
        with pytest.raises(DataError):
            validate_source(src)


class TestLattice:
    def test_rectangular_distances(self):
        lat = Lattice.rectangular(2, 3)
        assert lat.k == 6
        assert lat.nd(0, 0) == 0
        assert lat.nd(0, 1) == pytest.approx(1.0)
        assert lat.nd(0, 4) == pytest.approx(np.sqrt(2))

    def test_hexagonal_axial_geometry(self):
        lat = Lattice.hexagonal(2, 2)
        # axial offset: neighbor below is at distance 1 as well
        assert lat.nd(0, 2) == pytest.approx(1.0)
        assert lat.nd(0, 1) == pytest.approx(1.0)

    def test_explicit_table_validation(self):
        with pytest.raises(ConfigError):
            Lattice.from_distances(np.array([[0.0, 1], [2, 0]]))
        with pytest.raises(ConfigError):
            Lattice.from_distances(np.array([[0.0, 0], [0, 0]]))

    def test_diameter(self):
        lat = Lattice.chain(4)
        assert lat.diameter() == pytest.approx(3.0)


class TestFileFormats:
    def test_vector_file_with_labels(self, tmp_path):
        p = tmp_path / "v.csv"
        p.write_text("1.0,2.0,a\n3.0,4.0,b\n5.0,6.0,a\n")
        ds = load_vector_file(p, labels="last")
        assert ds.points.shape == (3, 2)
        assert ds.class_names == ["a", "b"]
        assert np.array_equal(ds.labels[:, 0], [1, 0, 1])

    def test_vector_file_whitespace(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("1 2\n3 4\n")
        ds = load_vector_file(p)
        assert ds.points.shape == (2, 2)

    def test_vector_file_bad_value(self, tmp_path):
        p = tmp_path / "v.csv"
        p.write_text("1.0,x\n")
        with pytest.raises(DataError):
            load_vector_file(p)

    def test_sequence_file(self, tmp_path):
        p = tmp_path / "s.txt"
        p.write_text("1 2 3\n4 5\n")
        ds = load_sequence_file(p)
        assert ds.n == 2
        assert ds.sequences[1].tolist() == [4.0, 5.0]

    @pytest.mark.parametrize("fmt", ["binary", "text"])
    def test_dissimilarity_round_trip(self, tmp_path, fmt, rng):
        m = rng.random((7, 7))
        m = np.triu(m, 1) + np.triu(m, 1).T
        p = tmp_path / f"d.{fmt}"
        save_dissimilarity(p, m, fmt=fmt)
        back = load_dissimilarity(p)
        assert np.array_equal(back.matrix, m)

    def test_truncated_binary_rejected(self, tmp_path):
        m = np.zeros((3, 3))
        p = tmp_path / "d.dsm"
        save_dissimilarity(p, m, fmt="binary")
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(DataError):
            load_dissimilarity(p)


class TestVectorDataset:
    def test_label_row_sum_enforced(self):
        with pytest.raises(DataError):
            VectorDataset(np.ones((2, 2)), labels=np.array([[0.5, 0.2], [1, 0]]))

    def test_fuzzy_labels_allowed(self):
        ds = VectorDataset(np.ones((2, 2)), labels=np.array([[0.5, 0.5], [1, 0]]))
        assert ds.crisp_classes().tolist() == [0, 0]

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError):
            VectorDataset(np.array([[np.nan, 1.0]]))
