import numpy as np
import pytest

from heis_imcf.api.errors import DimensionMismatchError, InvalidParameterError
from heis_imcf.models.geometry_models import FrameVector, GeometryParams, GroupPoint
from heis_imcf.services import group_geometry as gg


def point(x, y, t):
    return GroupPoint([x], [y], t)


def random_point(rng, n=1, scale=2.0):
    return GroupPoint(rng.uniform(-scale, scale, n), rng.uniform(-scale, scale, n), rng.uniform(-scale, scale))


def random_vector(rng, n=1):
    return FrameVector(rng.normal(size=n), rng.normal(size=n), rng.normal())


class TestGroupLaw:
    def test_identity(self, rng):
        g = random_point(rng)
        assert gg.group_mul(GroupPoint.origin(), g).allclose(g)
        assert gg.group_mul(g, GroupPoint.origin()).allclose(g)

    def test_product_of_unit_vectors(self):
        assert gg.group_mul(point(1, 0, 0), point(0, 1, 0)).allclose(point(1, 1, 0.5))

    @pytest.mark.parametrize('n', [1, 2, 3])
    def test_axioms(self, rng, n):
        for _ in range(50):
            g, h, k = (random_point(rng, n) for _ in range(3))
            assert gg.group_mul(gg.group_mul(g, h), k).allclose(gg.group_mul(g, gg.group_mul(h, k)))
            assert gg.group_mul(g, gg.group_inv(g)).allclose(GroupPoint.origin(n))

    def test_inverse_formula(self):
        assert gg.group_inv(point(1, 1, 0.5)).allclose(point(-1, -1, -0.5))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            gg.group_mul(GroupPoint.origin(1), GroupPoint.origin(2))


class TestDilations:
    def test_formula(self):
        assert gg.dilate(2.0, point(1, 0, 1)).allclose(point(2, 0, 4))

    def test_automorphism(self, rng):
        for _ in range(50):
            g, h = random_point(rng), random_point(rng)
            lam = rng.uniform(0.1, 5.0)
            left = gg.dilate(lam, gg.group_mul(g, h))
            right = gg.group_mul(gg.dilate(lam, g), gg.dilate(lam, h))
            assert left.allclose(right, tol=1e-10)

    @pytest.mark.parametrize('lam', [0.0, -1.0])
    def test_rejects_nonpositive(self, lam):
        with pytest.raises(InvalidParameterError):
            gg.dilate(lam, point(1, 0, 0))


class TestGauges:
    def test_values(self):
        assert gg.koranyi_N(point(1, 0, 0)) == 1.0
        assert gg.koranyi_norm(point(0, 0, 1)) == pytest.approx(2.0)

    def test_homogeneity(self, rng):
        for _ in range(50):
            g = random_point(rng)
            assert gg.koranyi_norm(gg.dilate(3.0, g)) == pytest.approx(3.0 * gg.koranyi_norm(g), rel=1e-12)

    def test_eps_gauge_values(self):
        assert gg.eps_gauge(point(0, 0, 1), 1.0) == pytest.approx(2.0)
        assert gg.eps_gauge(point(0, 0, 1), 2.0) == pytest.approx(1.0)

    def test_eps_gauge_bounds(self, rng):
        for _ in range(200):
            g = random_point(rng)
            eps = rng.uniform(0.05, 1.0)
            value = gg.eps_gauge(g, eps)
            assert value <= gg.koranyi_norm(g) + 1e-12
            if value >= eps:
                assert value >= 0.5 * gg.koranyi_norm(g) - 1e-12

    def test_eps_gauge_rejects_zero(self):
        with pytest.raises(InvalidParameterError):
            gg.eps_gauge(point(1, 0, 0), 0.0)

    def test_array_forms_agree(self, rng):
        center = (0.3, -0.2, 0.1)
        xyz = rng.uniform(-2, 2, (3, 20))
        distances = gg.gauge_distance_arrays(center, *xyz)
        g0 = GroupPoint.from_array(center)
        for k in range(20):
            expected = gg.koranyi_norm(gg.recenter(g0, GroupPoint.from_array(xyz[:, k])))
            assert distances[k] == pytest.approx(expected, rel=1e-12)


class TestFrames:
    def test_vertical_coordinate(self):
        g = point(0.4, -1.0, 0.3)
        V = gg.frame_from_euclidean(g, [0.0, 0.0, 1.0], 0.5)
        np.testing.assert_allclose(V.as_array(), [0.5, 0.2, 0.5])

    def test_horizontal_coordinate(self):
        V = gg.frame_from_euclidean(point(2, 3, 4), [1.0, 0.0, 0.0], 0.7)
        np.testing.assert_allclose(V.as_array(), [1.0, 0.0, 0.0])

    def test_gradient_of_N(self, rng):
        for _ in range(20):
            g = random_point(rng)
            x, y, t = g.x[0], g.y[0], g.t
            z2 = x * x + y * y
            partials = [4 * x * z2, 4 * y * z2, 32 * t]
            V = gg.frame_from_euclidean(g, partials, 0.0)
            assert V.a[0] == pytest.approx(4 * x * z2 - 16 * y * t)
            assert V.b[0] == pytest.approx(4 * y * z2 + 16 * x * t)


class TestConnection:
    def test_horizontal_pairs_vanish(self):
        for i, j in [(0, 0), (1, 1)]:
            assert np.allclose(gg.connection_coeff(i, j, 1, 0.5).as_array(), 0.0)

    def test_xy_gives_half_t(self):
        eps = 0.4
        np.testing.assert_allclose(gg.connection_coeff(0, 1, 1, eps).as_array(), [0, 0, 1 / (2 * eps)])

    @pytest.mark.parametrize('n', [1, 2])
    def test_constant_squares(self, n):
        eps = 0.3
        table = gg.connection_table(n, eps)
        for j in range(2 * n):
            assert np.sum(table[:, j, :] ** 2) == pytest.approx(1 / (2 * eps ** 2))
        assert np.sum(table[:, 2 * n, :] ** 2) == pytest.approx(n / (2 * eps ** 2))

    def test_metric_compatibility(self):
        table = gg.connection_table(2, 0.6)
        dim = table.shape[0]
        for i in range(dim):
            for j in range(dim):
                for k in range(dim):
                    assert table[i, j, k] == pytest.approx(-table[i, k, j], abs=1e-12)

    def test_zero_eps_rejected(self):
        with pytest.raises(InvalidParameterError):
            gg.connection_coeff(0, 1, 1, 0.0)


class TestRicci:
    def test_horizontal_and_vertical(self):
        eps = 0.5
        X = FrameVector.basis(1, 0)
        T = FrameVector.basis(1, 2)
        assert gg.ricci_eps(X, X, eps) == pytest.approx(-1 / (2 * eps ** 2))
        assert gg.ricci_eps(T, T, eps) == pytest.approx(1 / (2 * eps ** 2))

    @pytest.mark.parametrize('n', [1, 2])
    def test_oracle_matches_formula(self, rng, n):
        for _ in range(100):
            U, V = random_vector(rng, n), random_vector(rng, n)
            eps = rng.uniform(0.1, 1.0)
            assert gg.ricci_trace(U, V, eps) == pytest.approx(gg.ricci_eps(U, V, eps), rel=1e-10, abs=1e-10)

    def test_symmetry(self):
        M = gg.ricci_matrix(2, 0.7)
        np.testing.assert_allclose(M, M.T)
        np.testing.assert_allclose(M, gg.ricci_matrix(2, 0.7, source='oracle'), atol=1e-10)

    def test_curvature_antisymmetry(self, rng):
        U, V, W, Z = (random_vector(rng) for _ in range(4))
        eps = 0.8
        assert np.allclose(gg.curvature_oracle(U, U, W, eps).as_array(), 0.0)
        left = gg.curvature_oracle(U, V, W, eps).inner(Z)
        right = gg.curvature_oracle(V, U, W, eps).inner(Z)
        assert left == pytest.approx(-right)

    def test_unknown_source(self):
        with pytest.raises(InvalidParameterError):
            gg.ricci_matrix(1, 0.5, source='table')


def test_geometry_params_q():
    assert GeometryParams(n=3, eps=0.2).Q == 8
    with pytest.raises(InvalidParameterError):
        GeometryParams(n=1, eps=1.5)
