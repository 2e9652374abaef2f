"""
Group Geometry Service
======================
Exact algebra of the Heisenberg group H^n in exponential coordinates.

This service provides:
1. Group law, inverse and anisotropic dilations
2. Korányi gauge N = |z|^4 + 16 t^2, its norm N^(1/4) and the eps-gauge
3. Frame components of Euclidean gradients for X_i, Y_i, T_eps
4. Levi-Civita connection, brackets, curvature and Ricci form of the
   Riemannian metric that makes {X_i, Y_i, T_eps} orthonormal
5. Array versions of the n = 1 formulas for grid work
"""

from typing import Tuple

import numpy as np

from heis_imcf.api.errors import DimensionMismatchError, InvalidParameterError
from heis_imcf.models.geometry_models import GroupPoint, FrameVector


def _require_same_n(*points):
    n = points[0].n
    for other in points[1:]:
        if other.n != n:
            raise DimensionMismatchError(n, other.n)
    return n


def _require_positive_eps(eps: float):
    if not eps > 0:
        raise InvalidParameterError('eps', eps, 'a positive real')


# =============================================================================
# GROUP LAW
# =============================================================================

def group_mul(g: GroupPoint, h: GroupPoint) -> GroupPoint:
    _require_same_n(g, h)
    t = g.t + h.t + 0.5 * float(np.dot(g.x, h.y) - np.dot(h.x, g.y))
    return GroupPoint(g.x + h.x, g.y + h.y, t)


def group_inv(g: GroupPoint) -> GroupPoint:
    return GroupPoint(-g.x, -g.y, -g.t)


def dilate(lam: float, g: GroupPoint) -> GroupPoint:
    if not lam > 0:
        raise InvalidParameterError('lambda', lam, 'a positive real')
    return GroupPoint(lam * g.x, lam * g.y, lam * lam * g.t)


def recenter(g0: GroupPoint, g: GroupPoint) -> GroupPoint:
    """g0^-1 * g"""
    return group_mul(group_inv(g0), g)


# =============================================================================
# GAUGES
# =============================================================================

def koranyi_N(g: GroupPoint) -> float:
    z2 = g.z_squared
    return z2 * z2 + 16.0 * g.t * g.t


def koranyi_norm(g: GroupPoint) -> float:
    return koranyi_N(g) ** 0.25


def eps_gauge(g: GroupPoint, eps: float) -> float:
    _require_positive_eps(eps)
    z2 = g.z_squared
    t4 = g.t ** 4
    small_scale = (z2 * z2 + 16.0 * t4 / eps ** 4) ** 0.25
    return min(small_scale, koranyi_norm(g))


# =============================================================================
# FRAMES
# =============================================================================

def frame_from_euclidean(g: GroupPoint, euclid_partials, eps: float) -> FrameVector:
    """Frame components of the gradient from (d_x, d_y, d_t) partials at g"""
    partials = np.asarray(euclid_partials, dtype=float)
    if partials.shape != (2 * g.n + 1,):
        raise DimensionMismatchError(g.n, (partials.size - 1) // 2)
    dx, dy, dt = partials[:g.n], partials[g.n:2 * g.n], partials[2 * g.n]
    return FrameVector(dx - 0.5 * g.y * dt, dy + 0.5 * g.x * dt, eps * dt)


def frame_components(x, y, dx, dy, dt, eps: float):
    """Array form of frame_from_euclidean for n = 1"""
    return dx - 0.5 * y * dt, dy + 0.5 * x * dt, eps * dt


# =============================================================================
# CONNECTION AND CURVATURE
# =============================================================================

def covariant_derivative(U: FrameVector, V: FrameVector, eps: float) -> FrameVector:
    """
    Levi-Civita derivative of the constant-coefficient field V along U.

    The only nonzero basis derivatives are
    nabla_{X_i} Y_i = -nabla_{Y_i} X_i = T_eps / (2 eps),
    nabla_{X_i} T_eps = nabla_{T_eps} X_i = -Y_i / (2 eps),
    nabla_{Y_i} T_eps = nabla_{T_eps} Y_i = X_i / (2 eps).
    """
    _require_positive_eps(eps)
    _require_same_n(U, V)
    k = 1.0 / (2.0 * eps)
    a = k * (U.b * V.c + U.c * V.b)
    b = -k * (U.a * V.c + U.c * V.a)
    c = k * float(np.dot(U.a, V.b) - np.dot(U.b, V.a))
    return FrameVector(a, b, c)


def connection_coeff(i: int, j: int, n: int, eps: float) -> FrameVector:
    """nabla_{E_i} E_j with E ordered X_1..X_n, Y_1..Y_n, T_eps"""
    _require_positive_eps(eps)
    return covariant_derivative(FrameVector.basis(n, i), FrameVector.basis(n, j), eps)


def connection_table(n: int, eps: float) -> np.ndarray:
    """G[i, j, :] = components of nabla_{E_i} E_j"""
    dim = 2 * n + 1
    table = np.zeros((dim, dim, dim))
    for i in range(dim):
        for j in range(dim):
            table[i, j] = connection_coeff(i, j, n, eps).as_array()
    return table


def lie_bracket(U: FrameVector, V: FrameVector, eps: float) -> FrameVector:
    """[X_i, Y_j] = delta_ij T = delta_ij T_eps / eps; all other brackets vanish"""
    _require_positive_eps(eps)
    _require_same_n(U, V)
    c = float(np.dot(U.a, V.b) - np.dot(U.b, V.a)) / eps
    return FrameVector(np.zeros(U.n), np.zeros(U.n), c)


def curvature_oracle(U: FrameVector, V: FrameVector, W: FrameVector, eps: float) -> FrameVector:
    """R(U, V) W = nabla_U nabla_V W - nabla_V nabla_U W - nabla_[U,V] W"""
    _require_positive_eps(eps)
    _require_same_n(U, V, W)
    first = covariant_derivative(U, covariant_derivative(V, W, eps), eps)
    second = covariant_derivative(V, covariant_derivative(U, W, eps), eps)
    third = covariant_derivative(lie_bracket(U, V, eps), W, eps)
    return first - second - third


def ricci_eps(U: FrameVector, V: FrameVector, eps: float) -> float:
    _require_positive_eps(eps)
    n = _require_same_n(U, V)
    inv = 1.0 / (2.0 * eps * eps)
    return -inv * U.inner(V) + (n + 1) * inv * U.c * V.c


def ricci_trace(U: FrameVector, V: FrameVector, eps: float) -> float:
    """-sum_k <R(U, E_k) V, E_k> from the curvature oracle"""
    n = _require_same_n(U, V)
    total = 0.0
    for k in range(2 * n + 1):
        E = FrameVector.basis(n, k)
        total -= curvature_oracle(U, E, V, eps).inner(E)
    return total


def ricci_matrix(n: int, eps: float, source: str = 'formula') -> np.ndarray:
    dim = 2 * n + 1
    form = ricci_eps if source == 'formula' else ricci_trace
    if source not in ('formula', 'oracle'):
        raise InvalidParameterError('source', source, "'formula' or 'oracle'")
    out = np.zeros((dim, dim))
    for i in range(dim):
        for j in range(dim):
            out[i, j] = form(FrameVector.basis(n, i), FrameVector.basis(n, j), eps)
    return out


# =============================================================================
# ARRAY FORMS (n = 1)
# =============================================================================

def group_mul_arrays(x0, y0, t0, x, y, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return x0 + x, y0 + y, t0 + t + 0.5 * (x0 * y - x * y0)


def recenter_arrays(center, x, y, t):
    """Coordinates of g0^-1 * g for arrays of g"""
    x0, y0, t0 = center
    return group_mul_arrays(-x0, -y0, -t0, x, y, t)


def koranyi_N_arrays(x, y, t) -> np.ndarray:
    z2 = x * x + y * y
    return z2 * z2 + 16.0 * t * t


def koranyi_norm_arrays(x, y, t) -> np.ndarray:
    return koranyi_N_arrays(x, y, t) ** 0.25


def gauge_distance_arrays(center, x, y, t) -> np.ndarray:
    """||g0^-1 * g|| for arrays of g"""
    return koranyi_norm_arrays(*recenter_arrays(center, x, y, t))
