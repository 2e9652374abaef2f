"""
Grid Field Service
==================
Frame-aligned finite differences on uniform grids of H^1.

Derivatives take second-order Euclidean partials (central inside, one-sided
second order on the faces) and combine them with the frame coefficients
X = d_x - (y/2) d_t, Y = d_y + (x/2) d_t, T_eps = eps d_t.

This service provides:
1. Frame gradient, divergence and the Laplacian of the eps-metric
2. Regularized p-Laplace residual and the linearized operator L_v
3. Rough Hessian and symplectic gradient
4. Energies J, J1 and the regularized Dirichlet energy
5. IMCF residual and horizontal mean curvature of level sets
6. Node volumes, stencil-valid evaluation sets and their boundary layer
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from config import Config
from heis_imcf.models.grid_models import Box, DomainMask, ScalarField, FrameField
from heis_imcf.services.group_geometry import gauge_distance_arrays

logger = logging.getLogger(__name__)

_CUBE = np.ones((3, 3, 3), dtype=bool)


# =============================================================================
# STENCILS
# =============================================================================

def euclidean_partials(values: np.ndarray, box: Box) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tuple(np.gradient(values, *box.spacings, edge_order=2))


def frame_derivatives(values: np.ndarray, box: Box, eps: float):
    """(X f, Y f, T_eps f) as arrays"""
    dx, dy, dt = euclidean_partials(values, box)
    x, y, _ = box.coords
    return dx - 0.5 * y * dt, dy + 0.5 * x * dt, eps * dt


def vertical_derivative(values: np.ndarray, box: Box) -> np.ndarray:
    """T f = d_t f"""
    return np.gradient(values, box.ht, axis=2, edge_order=2)


def frame_gradient_eps(f: ScalarField, eps: float) -> FrameField:
    a, b, c = frame_derivatives(f.values, f.box, eps)
    if eps == 0:
        c = np.zeros_like(c)
    return FrameField(a, b, c, f.box)


def divergence_eps(Z: FrameField, eps: float) -> ScalarField:
    box = Z.box
    xa, _, _ = frame_derivatives(Z.a, box, eps)
    _, yb, _ = frame_derivatives(Z.b, box, eps)
    total = xa + yb
    if eps != 0:
        total = total + eps * vertical_derivative(Z.c, box)
    return ScalarField(total, box)


def laplacian_eps(f: ScalarField, eps: float) -> ScalarField:
    return divergence_eps(frame_gradient_eps(f, eps), eps)


def gradient_floor(values: np.ndarray, floor: float = None) -> float:
    """Absolute gradient floor: GRADIENT_FLOOR times max |v|"""
    floor = Config.GRADIENT_FLOOR if floor is None else floor
    return floor * float(np.max(np.abs(values)))


def degenerate_nodes(grad: FrameField, values: np.ndarray, floor: float = None) -> np.ndarray:
    return grad.norm() < gradient_floor(values, floor)


def stencil_halo(nodes: np.ndarray) -> np.ndarray:
    """Nodes whose composed stencils touch any of `nodes`"""
    if not np.any(nodes):
        return nodes.copy()
    return ndimage.binary_dilation(nodes, structure=_CUBE)


def _restrict(values: np.ndarray, f: ScalarField) -> np.ndarray:
    if f.mask is not None:
        values = np.where(f.mask.interior, values, 0.0)
    return values


# =============================================================================
# NONLINEAR OPERATORS
# =============================================================================

def p_laplace_residual(v: ScalarField, p: float, eps: float, sigma: float = 0.0) -> ScalarField:
    """div_eps((sigma + |grad v|^2)^((p-2)/2) grad v) on INTERIOR nodes"""
    grad = frame_gradient_eps(v, eps)
    g2 = grad.norm_squared()
    flat = g2 == 0.0
    if p == 2.0:
        weight = np.ones_like(g2)
    elif sigma > 0:
        weight = (sigma + g2) ** ((p - 2.0) / 2.0)
    else:
        with np.errstate(divide='ignore'):
            weight = np.where(flat, 0.0, g2 ** ((p - 2.0) / 2.0))
    residual = divergence_eps(grad.scaled(weight), eps).values
    if sigma == 0 and p != 2.0:
        residual = np.where(flat, 0.0, residual)
    return ScalarField(_restrict(residual, v), v.box, v.mask)


def linearized_apply(v: ScalarField, psi: ScalarField, p: float, eps: float,
                     floor: float = None) -> ScalarField:
    """
    L_v(psi) = div_eps(A_v grad psi), A_v = |grad v|^(p-2) (Id + (p-2) nu (x) nu).

    Nodes where |grad v| is below the floor, and every node whose stencil
    reaches them, are returned in `excluded` with value 0.
    """
    grad = frame_gradient_eps(v, eps)
    norm = grad.norm()
    degenerate = degenerate_nodes(grad, v.values, floor)
    safe = np.where(degenerate, 1.0, norm)
    nu = grad.scaled(np.where(degenerate, 0.0, 1.0 / safe))

    gpsi = frame_gradient_eps(psi, eps)
    along = nu.inner(gpsi)
    weight = np.where(degenerate, 0.0, safe ** (p - 2.0))
    flux = (gpsi + nu.scaled((p - 2.0) * along)).scaled(weight)

    result = divergence_eps(flux, eps).values
    excluded = stencil_halo(degenerate)
    result = np.where(excluded, 0.0, result)
    return ScalarField(_restrict(result, v), v.box, v.mask, excluded)


def imcf_residual(u: ScalarField, p: float, eps: float) -> ScalarField:
    """div_eps(|grad u|^(p-2) grad u) - |grad u|^p"""
    grad = frame_gradient_eps(u, eps)
    g2 = grad.norm_squared()
    flat = g2 == 0.0
    with np.errstate(divide='ignore'):
        weight = np.where(flat, 0.0, g2 ** ((p - 2.0) / 2.0))
    residual = divergence_eps(grad.scaled(weight), eps).values - g2 ** (p / 2.0)
    return ScalarField(_restrict(residual, u), u.box, u.mask, stencil_halo(flat))


def mean_curvature(u: ScalarField, eps: float, floor: float = None) -> ScalarField:
    """div_eps(grad u / |grad u|); horizontal mean curvature of the level sets when eps = 0"""
    grad = frame_gradient_eps(u, eps)
    norm = grad.norm()
    degenerate = degenerate_nodes(grad, u.values, floor)
    unit = grad.scaled(np.where(degenerate, 0.0, 1.0 / np.where(degenerate, 1.0, norm)))
    excluded = stencil_halo(degenerate)
    curvature = np.where(excluded, 0.0, divergence_eps(unit, eps).values)
    return ScalarField(_restrict(curvature, u), u.box, u.mask, excluded)


# =============================================================================
# SECOND DERIVATIVES
# =============================================================================

def rough_hessian(v: ScalarField, eps: float) -> np.ndarray:
    """H[..., i, j] = E_i (E_j v) with E = (X, Y, T_eps)"""
    first = frame_derivatives(v.values, v.box, eps)
    H = np.empty(v.box.shape + (3, 3))
    for j, component in enumerate(first):
        for i, derivative in enumerate(frame_derivatives(component, v.box, eps)):
            H[..., i, j] = derivative
    return H


def symplectic_grad(v: ScalarField, eps: float = 0.0) -> FrameField:
    """(Y v, -X v, 0)"""
    xv, yv, _ = frame_derivatives(v.values, v.box, eps)
    return FrameField(yv, -xv, np.zeros_like(xv), v.box)


# =============================================================================
# QUADRATURE AND ENERGIES
# =============================================================================

def node_volumes(box: Box) -> np.ndarray:
    """Dual-cell volumes; they sum to the box volume"""
    weights = []
    for count, spacing in zip(box.m, box.spacings):
        w = np.full(count, spacing)
        w[0] = w[-1] = 0.5 * spacing
        weights.append(w)
    return np.einsum('i,j,k->ijk', *weights)


def _weighted_sum(density: np.ndarray, box: Box, K: Optional[np.ndarray]) -> float:
    vol = node_volumes(box)
    if K is not None:
        vol = np.where(K, vol, 0.0)
    return float(np.sum(density * vol))


def energy_J(u: ScalarField, w: ScalarField, K: np.ndarray, p: float, eps: float) -> float:
    """Sum over K of |grad w|^p / p + w |grad u|^p"""
    gw = frame_gradient_eps(w, eps).norm()
    gu = frame_gradient_eps(u, eps).norm()
    return _weighted_sum(gw ** p / p + w.values * gu ** p, u.box, K)


def energy_J1(u: ScalarField, w: ScalarField, K: np.ndarray, eps: float) -> float:
    gw = frame_gradient_eps(w, eps).norm()
    gu = frame_gradient_eps(u, eps).norm()
    return _weighted_sum(gw + w.values * gu, u.box, K)


def dirichlet_energy(v: ScalarField, p: float, eps: float, sigma: float = 0.0,
                     K: np.ndarray = None) -> float:
    g2 = frame_gradient_eps(v, eps).norm_squared()
    return _weighted_sum((sigma + g2) ** (p / 2.0) / p, v.box, K)


# =============================================================================
# NODE SETS
# =============================================================================

def face_distance(box: Box) -> np.ndarray:
    """Chebyshev index distance of each node to the nearest box face"""
    per_axis = [np.minimum(np.arange(k), np.arange(k)[::-1]) for k in box.m]
    I, J, K = np.meshgrid(*per_axis, indexing='ij')
    return np.minimum(np.minimum(I, J), K)


def obstacle_distance(mask: DomainMask) -> np.ndarray:
    """Chessboard index distance to the nearest OBSTACLE node"""
    if not np.any(mask.obstacle):
        return np.full(mask.box.shape, np.iinfo(np.int32).max, dtype=np.int64)
    return ndimage.distance_transform_cdt(~mask.obstacle, metric='chessboard')


def interior_nodes(box: Box, margin: int = None) -> np.ndarray:
    margin = Config.STENCIL_MARGIN if margin is None else margin
    return face_distance(box) >= margin


def evaluation_nodes(mask: DomainMask, margin: int = None) -> np.ndarray:
    """INTERIOR nodes at least `margin` nodes from OBSTACLE and from the faces"""
    margin = Config.STENCIL_MARGIN if margin is None else margin
    return mask.interior & interior_nodes(mask.box, margin) & (obstacle_distance(mask) >= margin)


def boundary_layer(mask: DomainMask, margin: int = None) -> np.ndarray:
    """Evaluation nodes exactly `margin` nodes away from OBSTACLE"""
    margin = Config.STENCIL_MARGIN if margin is None else margin
    return evaluation_nodes(mask, margin) & (obstacle_distance(mask) == margin)


def gauge_distance(box: Box, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    return gauge_distance_arrays(center, *box.coords)
