import numpy as np
import pytest

from heis_imcf.api.errors import DimensionMismatchError, InvalidParameterError
from heis_imcf.models.grid_models import Box, ScalarField
from heis_imcf.services import grid_fields as gf
from heis_imcf.services.closed_form_service import n_derivative_arrays


def field(box, fn):
    return ScalarField(fn(*box.coords), box)


@pytest.fixture
def unit_box():
    return Box(1.0, 1.0, (33, 33, 33))


class TestBox:
    def test_spacings_and_refinement(self):
        box = Box(2.0, 1.0, (17, 17, 33))
        assert box.hx == pytest.approx(0.25)
        assert box.ht == pytest.approx(1 / 16)
        fine = box.refined()
        assert fine.m == (33, 33, 65)
        np.testing.assert_allclose(fine.axes[0][::2], box.axes[0])

    def test_minimum_nodes(self):
        with pytest.raises(InvalidParameterError):
            Box(1.0, 1.0, (15, 16, 16))

    def test_scaled(self):
        box = Box(1.0, 1.0, 17).scaled(2.0)
        assert (box.Lxy, box.Lt) == (2.0, 4.0)

    def test_field_shape_checked(self, small_box):
        with pytest.raises(DimensionMismatchError):
            ScalarField(np.zeros((3, 3, 3)), small_box)


class TestFrameGradient:
    def test_linear_exactness(self, unit_box):
        grad = gf.frame_gradient_eps(field(unit_box, lambda x, y, t: x), 0.5)
        np.testing.assert_allclose(grad.a, 1.0, atol=1e-12)
        np.testing.assert_allclose(grad.b, 0.0, atol=1e-12)
        np.testing.assert_allclose(grad.c, 0.0, atol=1e-12)

    def test_vertical_component_dropped_at_zero_eps(self, unit_box):
        grad = gf.frame_gradient_eps(field(unit_box, lambda x, y, t: t), 0.0)
        assert np.all(grad.c == 0.0)
        np.testing.assert_allclose(grad.a, -0.5 * unit_box.coords[1], atol=1e-12)

    def test_matches_n_closed_form_at_second_order(self):
        errors = []
        for m in (17, 33):
            box = Box(1.0, 1.0, (m, m, m))
            x, y, t = box.coords
            grad = gf.frame_gradient_eps(ScalarField((x * x + y * y) ** 2 + 16 * t * t, box), 1.0)
            xn, yn, tn = n_derivative_arrays(x, y, t)
            err = np.maximum(np.abs(grad.a - xn), np.abs(grad.b - yn))
            errors.append(err)
        coarse = errors[0][1:-1, 1:-1, 1:-1].max()
        fine = errors[1][::2, ::2, ::2][1:-1, 1:-1, 1:-1].max()
        assert np.log2(coarse / fine) >= 1.9

    def test_vertical_derivative_exact_on_quadratics(self, unit_box):
        Tf = gf.vertical_derivative(unit_box.coords[2] ** 2, unit_box)
        np.testing.assert_allclose(Tf, 2 * unit_box.coords[2], atol=1e-12)


class TestDivergence:
    def test_constant_field(self, unit_box):
        ones = np.ones(unit_box.shape)
        from heis_imcf.models.grid_models import FrameField
        div = gf.divergence_eps(FrameField(ones, 2 * ones, 0 * ones, unit_box), 0.3)
        np.testing.assert_allclose(div.values, 0.0, atol=1e-12)

    def test_horizontal_laplacian_of_n(self):
        box = Box(1.0, 1.0, (33, 33, 33))
        x, y, t = box.coords
        lap = gf.laplacian_eps(ScalarField((x * x + y * y) ** 2 + 16 * t * t, box), 0.0)
        inner = gf.interior_nodes(box, 2)
        expected = 24.0 * (x * x + y * y)
        assert np.max(np.abs(lap.values - expected)[inner]) < 0.1


class TestPLaplacian:
    def test_p2_independent_of_sigma(self, unit_box):
        v = field(unit_box, lambda x, y, t: np.sin(x) * np.cos(y) + t * x)
        a = gf.p_laplace_residual(v, 2.0, 0.5, sigma=0.0).values
        b = gf.p_laplace_residual(v, 2.0, 0.5, sigma=0.7).values
        np.testing.assert_allclose(a, b)
        np.testing.assert_allclose(a, gf.laplacian_eps(v, 0.5).values)

    def test_p2_superposition(self, unit_box):
        v = field(unit_box, lambda x, y, t: x * y * t)
        w = field(unit_box, lambda x, y, t: np.exp(x) + t)
        both = gf.p_laplace_residual(v.with_values(v.values + 2 * w.values), 2.0, 0.4).values
        split = gf.p_laplace_residual(v, 2.0, 0.4).values + 2 * gf.p_laplace_residual(w, 2.0, 0.4).values
        np.testing.assert_allclose(both, split, atol=1e-10)

    def test_flat_nodes_give_zero(self, unit_box):
        v = field(unit_box, lambda x, y, t: 0 * x)
        assert np.all(gf.p_laplace_residual(v, 1.5, 0.0).values == 0.0)


class TestLinearized:
    def test_p2_is_laplacian(self, unit_box):
        v = field(unit_box, lambda x, y, t: x + 0.5 * y + t)
        psi = field(unit_box, lambda x, y, t: np.cos(x + t) * y)
        np.testing.assert_allclose(gf.linearized_apply(v, psi, 2.0, 0.5).values,
                                   gf.laplacian_eps(psi, 0.5).values, atol=1e-10)

    def test_square_identity(self, unit_box):
        p, eps = 1.5, 0.5
        v = field(unit_box, lambda x, y, t: x + 0.5 * y)
        lhs = gf.linearized_apply(v, v.with_values(v.values ** 2), p, eps).values
        rhs = 2 * (p - 1) * gf.frame_gradient_eps(v, eps).norm() ** p
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)

    def test_degenerate_nodes_excluded(self, unit_box):
        v = field(unit_box, lambda x, y, t: x * x + y * y)
        out = gf.linearized_apply(v, v, 1.5, 0.0)
        assert out.excluded is not None and np.any(out.excluded)
        assert np.all(out.values[out.excluded] == 0.0)


class TestSecondOrder:
    def test_rough_hessian_quadratic(self, unit_box):
        x, y, t = unit_box.coords
        H = gf.rough_hessian(ScalarField(x * y + t * t, unit_box), 1.0)
        np.testing.assert_allclose(H[..., 0, 1], 1 + t - 0.5 * x * y, atol=1e-10)
        np.testing.assert_allclose(H[..., 2, 2], 2.0, atol=1e-10)

    def test_symplectic_orthogonality(self, unit_box):
        v = field(unit_box, lambda x, y, t: np.sin(x + 2 * y) + t * t)
        J = gf.symplectic_grad(v, 0.5)
        grad = gf.frame_gradient_eps(v, 0.5)
        np.testing.assert_allclose(J.inner(grad), 0.0, atol=1e-12)
        assert np.all(J.norm() <= grad.norm() + 1e-12)

    def test_mean_curvature_of_planes(self, unit_box):
        H = gf.mean_curvature(field(unit_box, lambda x, y, t: x + 2 * y), 0.0)
        np.testing.assert_allclose(H.values, 0.0, atol=1e-10)


class TestEnergies:
    def test_node_volumes(self, small_box):
        assert gf.node_volumes(small_box).sum() == pytest.approx(small_box.volume)

    def test_linear_dirichlet_energy(self, unit_box):
        v = field(unit_box, lambda x, y, t: 3 * x)
        assert gf.dirichlet_energy(v, 2.0, 0.0) == pytest.approx(0.5 * 9 * unit_box.volume)

    def test_energy_J_without_u(self, unit_box):
        u = field(unit_box, lambda x, y, t: 0 * x)
        w = field(unit_box, lambda x, y, t: 2 * y)
        K = gf.interior_nodes(unit_box, 1)
        expected = (2 ** 1.5 / 1.5) * gf.node_volumes(unit_box)[K].sum()
        assert gf.energy_J(u, w, K, 1.5, 0.0) == pytest.approx(expected)


class TestNodeSets:
    def test_evaluation_nodes(self, koranyi_mask):
        evaluation = gf.evaluation_nodes(koranyi_mask)
        assert not np.any(evaluation & koranyi_mask.obstacle)
        assert not np.any(evaluation & ~gf.interior_nodes(koranyi_mask.box))
        layer = gf.boundary_layer(koranyi_mask)
        assert np.any(layer) and np.all(evaluation[layer])

    def test_stencil_halo(self, small_box):
        nodes = np.zeros(small_box.shape, dtype=bool)
        nodes[8, 8, 8] = True
        assert gf.stencil_halo(nodes).sum() == 27

    def test_gauge_distance(self, small_box):
        d = gf.gauge_distance(small_box)
        assert d[8, 8, 8] == 0.0
        assert d[16, 8, 8] == pytest.approx(2.0)
