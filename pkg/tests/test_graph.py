import numpy as np
import pytest

from aghash.errors import ParameterError, ShapeError
from aghash.graph import (
    GraphConfig,
    aux_similarity,
    build_graph,
    fuse,
    median_bandwidth,
    normalize,
    save_graph,
    visual_similarity,
)


class TestVisualSimilarity:
    def test_identical_items(self):
        X = np.ones((3, 4))
        with pytest.warns(UserWarning):
            S, sigma = visual_similarity(X)
        assert np.array_equal(S, np.ones((4, 4)))
        assert sigma == 1.0

    def test_kernel_value_at_two_sigma_squared(self):
        # squared distance 2*sigma^2 gives exp(-1)
        sigma = 1.7
        X = np.array([[0.0, sigma * np.sqrt(2.0)]])
        S, _ = visual_similarity(X, bandwidth=sigma)
        assert S[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_large_bandwidth_limit(self):
        rng = np.random.default_rng(0)
        S, _ = visual_similarity(rng.standard_normal((3, 5)), bandwidth=1e9)
        assert np.allclose(S, 1.0, atol=1e-12)

    def test_unit_diagonal_and_range(self):
        rng = np.random.default_rng(1)
        S, _ = visual_similarity(rng.standard_normal((4, 6)))
        assert np.array_equal(np.diag(S), np.ones(6))
        assert S.min() > 0.0 and S.max() <= 1.0

    def test_median_heuristic_value(self):
        X = np.array([[0.0, 1.0, 3.0]])
        # pairwise distances 1, 2, 3 -> median 2
        assert median_bandwidth(X) == 2.0


class TestAuxSimilarity:
    def test_shared_count(self):
        Y = np.array([[1.0, 1], [0, 1], [1, 1]])
        assert aux_similarity(Y)[0, 1] == 2.0

    def test_orthogonal(self):
        Y = np.eye(3)
        assert aux_similarity(Y)[0, 1] == 0.0

    def test_self_count(self):
        Y = np.array([[1.0], [1.0], [0.0], [1.0]])
        assert aux_similarity(Y)[0, 0] == 3.0

    def test_integer_valued_bounded(self):
        rng = np.random.default_rng(2)
        Y = (rng.random((5, 8)) < 0.5).astype(float)
        Sa = aux_similarity(Y)
        assert np.array_equal(Sa, np.round(Sa))
        assert Sa.max() <= 5


class TestFuse:
    def test_mu_zero_is_aux_only(self):
        rng = np.random.default_rng(3)
        Sv = rng.random((4, 4))
        Sa = rng.random((4, 4))
        assert np.array_equal(fuse(Sv, Sa, 0.0), Sa)

    def test_zero_aux(self):
        Sv = np.full((3, 3), 0.5)
        assert np.array_equal(fuse(Sv, np.zeros((3, 3)), 1.0), Sv)

    def test_scalar_arithmetic(self):
        assert fuse(np.array([[0.5]]), np.array([[2.0]]), 1.0)[0, 0] == 2.5

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            fuse(np.ones((2, 2)), np.ones((3, 3)), 1.0)


class TestNormalize:
    def test_all_ones(self):
        n = 5
        g = normalize(np.ones((n, n)))
        assert np.allclose(g.S_tilde, np.full((n, n), 1.0 / n), atol=1e-12)
        assert np.array_equal(g.degrees, np.full(n, float(n)))

    def test_diagonal(self):
        g = normalize(np.diag([4.0, 4.0]))
        assert g.S_tilde[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_isolated_node(self):
        S = np.zeros((3, 3))
        S[:2, :2] = 1.0
        g = normalize(S)
        assert np.array_equal(g.S_tilde[2], np.zeros(3))
        assert np.array_equal(g.S_tilde[:, 2], np.zeros(3))

    def test_rejects_asymmetric(self):
        with pytest.raises(ParameterError):
            normalize(np.array([[0.0, 1.0], [0.5, 0.0]]))

    def test_rejects_negative(self):
        with pytest.raises(ParameterError):
            normalize(np.array([[0.0, -1.0], [-1.0, 0.0]]))

    def test_symmetry_preserved_random(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            A = rng.random((6, 6))
            S = A + A.T
            g = normalize(S)
            assert np.allclose(g.S_tilde, g.S_tilde.T, atol=1e-12)
            assert g.S_tilde.min() >= 0.0

    def test_spectral_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            A = rng.random((20, 20))
            g = normalize(A + A.T)
            top = np.linalg.eigvalsh(g.S_tilde).max()
            assert top <= 1.0 + 1e-8


class TestBuildGraph:
    def test_variants(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((3, 5))
        Y = (rng.random((2, 5)) < 0.5).astype(float)
        full, sigma = build_graph(X, Y, GraphConfig())
        aux_only, s2 = build_graph(X, Y, GraphConfig(variant="aux-only"))
        assert sigma is not None and s2 is None
        assert np.array_equal(aux_only.S, aux_similarity(Y))
        vis, _ = build_graph(X, Y, GraphConfig(variant="visual-only"))
        assert np.array_equal(np.diag(vis.S), np.ones(5))
        assert np.allclose(full.S, 1.0 * vis.S + aux_similarity(Y))

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            GraphConfig(mu=-1.0)
        with pytest.raises(ParameterError):
            GraphConfig(bandwidth=0.0)
        with pytest.raises(ParameterError):
            GraphConfig(variant="sparse")


def test_graph_export(tmp_path):
    S = np.array([[0.0, 1.5], [1.5, 0.0]])
    p = tmp_path / "g.txt"
    save_graph(p, S)
    lines = p.read_text().splitlines()
    assert lines[0] == "2"
    assert [float(v) for v in lines[1].split(",")] == [0.0, 1.5]
