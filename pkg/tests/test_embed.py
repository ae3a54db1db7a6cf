import math

import numpy as np
import pytest

from prisomap.datasets import gen_swiss_roll
from prisomap.embed import (
    apply_component_policy,
    classical_mds,
    elbow,
    embedding_descriptor,
    isomap,
    load_embedding_csv,
    pca,
    pr_isomap,
    save_embedding_csv,
)
from prisomap.errors import DisconnectedGraph, GraphTooFragmented
from prisomap.evaluate import residual_variance
from prisomap.geodesics import GeodesicMatrix, all_pairs
from prisomap.graph import knn_graph
from prisomap.linalg import pairwise_dists


def line_in_r3(n=20, spacing=0.7):
    direction = np.array([1.0, 2.0, -2.0])
    direction /= np.linalg.norm(direction)
    return np.arange(n)[:, None] * spacing * direction[None, :]


class TestPrIsomap:
    def test_line_chart_recovery(self):
        spacing = 0.7
        x = line_in_r3(20, spacing)
        emb = pr_isomap(x, k=2, h=2 * spacing + 1e-9, p=1)
        got = pairwise_dists(emb.coordinates)
        idx = np.arange(20)
        want = np.abs(idx[:, None] - idx[None, :]) * spacing
        assert np.abs(got - want).max() <= 1e-6

    def test_infinite_h_reduces_to_isomap(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1, (60, 4))
        a = pr_isomap(x, k=5, h=math.inf, p=3)
        b = isomap(x, k=5, p=3)
        assert a.coordinates.tobytes() == b.coordinates.tobytes()
        assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
        assert a.clamped_count == b.clamped_count

    def test_disconnected_error_policy(self):
        x = np.vstack([np.zeros((5, 2)) + np.arange(5)[:, None] * 0.1,
                       np.ones((5, 2)) * 100 + np.arange(5)[:, None] * 0.1])
        with pytest.raises(DisconnectedGraph):
            pr_isomap(x, k=2, h=1.0, p=1)

    def test_largest_component_policy(self):
        x = np.vstack([np.arange(8)[:, None] * 0.1,
                       100.0 + np.arange(2)[:, None] * 0.1])
        emb = pr_isomap(x, k=2, h=1.0, p=1, component_policy="largest_component")
        assert emb.component_policy_applied
        np.testing.assert_array_equal(emb.kept_indices, np.arange(8))
        assert emb.coordinates.shape == (8, 1)

    def test_too_fragmented(self):
        x = np.arange(12)[:, None] * 10.0  # every point isolated under h=1
        with pytest.raises(GraphTooFragmented):
            pr_isomap(x, k=2, h=1.0, p=1, component_policy="largest_component")

    def test_column_means_zero_and_eigenvalue_order(self):
        rng = np.random.default_rng(1)
        x = rng.normal(0, 1, (50, 3))
        emb = pr_isomap(x, k=6, h=math.inf, p=3)
        assert np.abs(emb.coordinates.mean(axis=0)).max() <= 1e-8
        assert np.all(np.diff(emb.eigenvalues) <= 1e-12)

    def test_determinism(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0, 1, (40, 3))
        a = pr_isomap(x, k=4, h=math.inf, p=2)
        b = pr_isomap(x.copy(), k=4, h=math.inf, p=2)
        assert a.coordinates.tobytes() == b.coordinates.tobytes()

    def test_p_validation(self):
        x = line_in_r3(10)
        with pytest.raises(ValueError):
            pr_isomap(x, k=2, h=math.inf, p=10)


class TestIsomap:
    def test_swiss_roll_residual_variance(self):
        sample = gen_swiss_roll(2000, noise_sd=0.0, density_exponent=0.0, seed=11)
        emb = isomap(sample.ambient, k=10, p=2)
        geo = all_pairs(knn_graph(sample.ambient, k=10, h=math.inf))
        rv = residual_variance(geo.values, pairwise_dists(emb.coordinates))
        assert rv <= 0.05

    def test_flat_data_complete_graph(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 2, (30, 2))
        emb = isomap(x, k=29, p=2)
        got = pairwise_dists(emb.coordinates)
        want = pairwise_dists(x)
        assert np.abs(got - want).max() <= 1e-6 * max(1.0, want.max())


class TestClassicalMds:
    def test_two_points(self):
        emb = classical_mds(np.array([[0.0], [1.0]]), p=1)
        np.testing.assert_allclose(np.abs(emb.coordinates[:, 0]), [0.5, 0.5], atol=1e-12)
        assert emb.coordinates[0, 0] * emb.coordinates[1, 0] < 0

    def test_exact_on_flat_points(self):
        rng = np.random.default_rng(4)
        x = rng.normal(0, 1, (25, 3))
        emb = classical_mds(x, p=3)
        got = pairwise_dists(emb.coordinates)
        want = pairwise_dists(x)
        assert np.abs(got - want).max() <= 1e-8 * max(1.0, want.max())

    def test_matches_pca_up_to_sign(self):
        rng = np.random.default_rng(5)
        x = rng.normal(0, 1, (30, 5))
        x = x - x.mean(axis=0)
        a = classical_mds(x, p=3).coordinates
        b = pca(x, p=3).coordinates
        for j in range(3):
            same = np.abs(a[:, j] - b[:, j]).max()
            flipped = np.abs(a[:, j] + b[:, j]).max()
            assert min(same, flipped) <= 1e-8


class TestPca:
    def test_axis_aligned(self):
        emb = pca(np.array([[-1.0, 0.0], [1.0, 0.0]]), p=1)
        np.testing.assert_allclose(np.abs(emb.coordinates[:, 0]), [1.0, 1.0], atol=1e-12)

    def test_eigenvalues_rotation_invariant(self):
        rng = np.random.default_rng(6)
        x = rng.normal(0, 1, (40, 4))
        q, _ = np.linalg.qr(rng.normal(0, 1, (4, 4)))
        a = pca(x, p=4).eigenvalues
        b = pca(x @ q, p=4).eigenvalues
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_full_dimension_preserves_distances(self):
        rng = np.random.default_rng(7)
        x = rng.normal(0, 1, (20, 3))
        emb = pca(x, p=3)
        np.testing.assert_allclose(
            pairwise_dists(emb.coordinates), pairwise_dists(x), atol=1e-9
        )

    def test_population_covariance_eigenvalues(self):
        rng = np.random.default_rng(8)
        x = rng.normal(0, 1, (35, 3))
        xc = x - x.mean(axis=0)
        want = np.sort(np.linalg.eigvalsh(xc.T @ xc / 35))[::-1]
        np.testing.assert_allclose(pca(x, p=3).eigenvalues, want, atol=1e-10)

    def test_p_validation(self):
        x = np.zeros((5, 2))
        with pytest.raises(ValueError):
            pca(x, p=3)


class TestFlatCaseChain:
    def test_methods_agree_on_flat_data(self):
        rng = np.random.default_rng(9)
        x = rng.normal(0, 1, (40, 2))
        x = x - x.mean(axis=0)
        d_pca = pairwise_dists(pca(x, p=2).coordinates)
        d_mds = pairwise_dists(classical_mds(x, p=2).coordinates)
        d_iso = pairwise_dists(isomap(x, k=39, p=2).coordinates)
        scale = d_pca.max()
        assert np.abs(d_pca - d_mds).max() <= 1e-6 * scale
        assert np.abs(d_pca - d_iso).max() <= 1e-6 * scale

    def test_translation_invariance(self):
        rng = np.random.default_rng(10)
        x = rng.normal(0, 1, (30, 3))
        shift = np.array([100.0, -50.0, 7.0])
        for method in (lambda d: pca(d, 2), lambda d: classical_mds(d, 2),
                       lambda d: isomap(d, 4, 2)):
            a = pairwise_dists(method(x).coordinates)
            b = pairwise_dists(method(x + shift).coordinates)
            assert np.abs(a - b).max() <= 1e-9 * max(1.0, a.max())


class TestComponentPolicy:
    @staticmethod
    def two_block_geo(sizes=(8, 2)):
        n = sum(sizes)
        values = np.full((n, n), math.inf)
        start = 0
        for size in sizes:
            block = np.abs(np.subtract.outer(np.arange(size), np.arange(size))).astype(float)
            values[start : start + size, start : start + size] = block
            start += size
        return GeodesicMatrix(values=values, finite_fraction=float(
            sum(s * s for s in sizes)) / n**2, fingerprint={})

    def test_identity_when_connected(self):
        geo = GeodesicMatrix(values=np.zeros((4, 4)), finite_fraction=1.0, fingerprint={})
        out, kept = apply_component_policy(geo, "error")
        assert out is geo
        np.testing.assert_array_equal(kept, np.arange(4))
        out2, kept2 = apply_component_policy(geo, "largest_component")
        np.testing.assert_array_equal(kept2, np.arange(4))

    def test_largest_component_restriction(self):
        geo = self.two_block_geo((8, 2))
        out, kept = apply_component_policy(geo, "largest_component")
        assert out.values.shape == (8, 8)
        np.testing.assert_array_equal(kept, np.arange(8))
        assert np.all(np.isfinite(out.values))

    def test_error_policy_raises(self):
        geo = self.two_block_geo((8, 2))
        with pytest.raises(DisconnectedGraph) as err:
            apply_component_policy(geo, "error")
        assert err.value.summary == [8, 2]

    def test_unknown_policy(self):
        geo = self.two_block_geo((8, 2))
        with pytest.raises(ValueError):
            apply_component_policy(geo, "whatever")


class TestHelpers:
    def test_elbow_picks_knee(self):
        lam = np.array([10.0, 9.5, 1.0, 0.9, 0.85])
        assert elbow(lam) == 2

    def test_embedding_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        x = rng.normal(0, 1, (15, 3))
        emb = classical_mds(x, p=2)
        path = tmp_path / "emb.csv"
        save_embedding_csv(emb, path)
        idx, coords = load_embedding_csv(path)
        np.testing.assert_array_equal(idx, np.arange(15))
        assert coords.tobytes() == emb.coordinates.tobytes()

    def test_descriptor_spectrum_and_elbow(self):
        rng = np.random.default_rng(13)
        x = rng.normal(0, 1, (25, 6))
        emb = pca(x, p=2, spectrum=6)
        desc = embedding_descriptor(emb)
        assert len(desc["spectrum"]) == 6
        assert isinstance(desc["elbow_p"], int)
        assert desc["method"]["method"] == "pca"
