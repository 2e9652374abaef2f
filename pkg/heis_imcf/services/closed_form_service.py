"""
Closed-Form Service
===================
Exact formulas for the Korányi gauge, the power barriers built on it and
the explicit solutions they produce.

This service provides:
1. Frame derivatives and rough Hessian of N = |z|^4 + 16 t^2
2. PowerBarrier values, gradients, rough Hessians and p-Laplacians
3. Barrier thresholds (critical alpha, K constants, Sobolev minimum)
4. The three-term decomposition of the Riemannian p-Laplacian of a barrier
5. Exact potentials, the exact IMCF function and in/out sphere laws
6. eps-perimeter of Korányi balls by surface quadrature
7. Seeded samplers on and outside gauge spheres
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn

from config import Config
from heis_imcf.api.errors import (
    InvalidParameterError, SingularPointError, QuadratureError,
)
from heis_imcf.models.barrier_models import PowerBarrier, FlowLaw
from heis_imcf.models.geometry_models import GroupPoint, FrameVector
from heis_imcf.services.group_geometry import (
    group_mul, recenter, koranyi_N, koranyi_norm, koranyi_N_arrays, recenter_arrays,
)

logger = logging.getLogger(__name__)


def _check_p(p: float, Q: int):
    if not 1.0 < p < Q:
        raise InvalidParameterError('p', p, f'a real in (1, {Q})')


def _check_eps(eps: float):
    if not 0.0 <= eps <= 1.0:
        raise InvalidParameterError('eps', eps, 'a real in [0, 1]')


def _check_radius(name: str, r: float):
    if not r > 0:
        raise InvalidParameterError(name, r, 'a positive radius')


def _recentered(barrier: PowerBarrier, g: GroupPoint) -> GroupPoint:
    local = recenter(barrier.g0, g)
    distance = koranyi_norm(local)
    threshold = Config.SINGULAR_RADIUS * barrier.R0
    if distance < threshold:
        raise SingularPointError(distance, threshold)
    return local


# =============================================================================
# DERIVATIVES OF N
# =============================================================================

def n_frame_derivatives(g: GroupPoint) -> np.ndarray:
    """(X_i N, Y_i N, T N) at g, with X_i N = 4 x_i |z|^2 - 16 y_i t, Y_i N = 4 y_i |z|^2 + 16 x_i t, T N = 32 t"""
    z2 = g.z_squared
    xn = 4.0 * g.x * z2 - 16.0 * g.y * g.t
    yn = 4.0 * g.y * z2 + 16.0 * g.x * g.t
    return np.concatenate([xn, yn, [32.0 * g.t]])


def n_rough_hessian(g: GroupPoint) -> np.ndarray:
    """
    H[i, j] = E_i (E_j N) for E = (X_1..X_n, Y_1..Y_n, T).

    The matrix is not symmetric: H[X_i, Y_i] - H[Y_i, X_i] = T N.
    """
    n = g.n
    x, y, t = g.x, g.y, g.t
    eye = np.eye(n)
    A = 8.0 * (np.outer(x, x) + np.outer(y, y)) + 4.0 * g.z_squared * eye
    M = 8.0 * (np.outer(y, x) - np.outer(x, y)) - 16.0 * t * eye

    H = np.zeros((2 * n + 1, 2 * n + 1))
    H[:n, :n] = A
    H[n:2 * n, n:2 * n] = A
    H[n:2 * n, :n] = M
    H[:n, n:2 * n] = -M
    H[2 * n, :n] = H[:n, 2 * n] = -16.0 * y
    H[2 * n, n:2 * n] = H[n:2 * n, 2 * n] = 16.0 * x
    H[2 * n, 2 * n] = 32.0
    return H


def horizontal_laplacian_N(g: GroupPoint) -> float:
    return 8.0 * (2 + g.n) * g.z_squared


def n_derivative_arrays(x, y, t):
    """Array form of n_frame_derivatives for n = 1"""
    z2 = x * x + y * y
    return 4.0 * x * z2 - 16.0 * y * t, 4.0 * y * z2 + 16.0 * x * t, 32.0 * t


# =============================================================================
# POWER BARRIER
# =============================================================================

def _eps_scale(n: int, eps: float) -> np.ndarray:
    return np.concatenate([np.ones(2 * n), [eps]])


def phi_value(barrier: PowerBarrier, g: GroupPoint) -> float:
    local = _recentered(barrier, g)
    return (koranyi_N(local) / barrier.R0 ** 4) ** barrier.alpha


def _phi_grad_full(barrier: PowerBarrier, g: GroupPoint) -> np.ndarray:
    local = _recentered(barrier, g)
    N = koranyi_N(local)
    alpha = barrier.alpha
    factor = alpha * N ** (alpha - 1.0) / barrier.R0 ** (4.0 * alpha)
    return factor * n_frame_derivatives(local)


def phi_grad0(barrier: PowerBarrier, g: GroupPoint) -> FrameVector:
    full = _phi_grad_full(barrier, g)
    full[-1] = 0.0
    return FrameVector.from_array(full)


def phi_grad_eps(barrier: PowerBarrier, g: GroupPoint, eps: float) -> FrameVector:
    _check_eps(eps)
    full = _phi_grad_full(barrier, g)
    return FrameVector.from_array(full * _eps_scale(g.n, eps))


def phi_vertical_derivative(barrier: PowerBarrier, g: GroupPoint) -> float:
    """T Phi with the unscaled vertical field"""
    return float(_phi_grad_full(barrier, g)[-1])


def phi_rough_hessian(barrier: PowerBarrier, g: GroupPoint, eps: float) -> np.ndarray:
    """E_i E_j Phi in the frame {X_i, Y_i, T_eps}"""
    _check_eps(eps)
    local = _recentered(barrier, g)
    N = koranyi_N(local)
    alpha = barrier.alpha
    c = barrier.R0 ** (-4.0 * alpha)
    dN = n_frame_derivatives(local)
    H = c * alpha * ((alpha - 1.0) * N ** (alpha - 2.0) * np.outer(dN, dN)
                     + N ** (alpha - 1.0) * n_rough_hessian(local))
    D = _eps_scale(g.n, eps)
    return D[:, None] * H * D[None, :]


def phi_horizontal_laplacian(barrier: PowerBarrier, g: GroupPoint) -> float:
    """8 alpha (2 alpha + n) |z|^2 N^(alpha - 1), normalized by R0"""
    local = _recentered(barrier, g)
    alpha = barrier.alpha
    N = koranyi_N(local)
    c = barrier.R0 ** (-4.0 * alpha)
    return c * 8.0 * alpha * (2.0 * alpha + g.n) * local.z_squared * N ** (alpha - 1.0)


def phi_plap_eps(barrier: PowerBarrier, g: GroupPoint, p: float, eps: float) -> float:
    """
    Riemannian p-Laplacian of the barrier from its closed-form rough Hessian:
    |grad|^(p-4) (|grad|^2 Delta Phi + (p - 2) <H grad, grad>).
    """
    grad = phi_grad_eps(barrier, g, eps).as_array()
    H = phi_rough_hessian(barrier, g, eps)
    g2 = float(grad @ grad)
    if g2 == 0.0:
        return 0.0
    return g2 ** ((p - 4.0) / 2.0) * (g2 * np.trace(H) + (p - 2.0) * float(grad @ H @ grad))


def phi_value_arrays(barrier: PowerBarrier, x, y, t) -> np.ndarray:
    """Barrier on coordinate arrays (n = 1); the centre itself maps to +inf"""
    x0, y0, t0 = (float(barrier.g0.x[0]), float(barrier.g0.y[0]), barrier.g0.t)
    N = koranyi_N_arrays(*recenter_arrays((x0, y0, t0), x, y, t))
    with np.errstate(divide='ignore'):
        return (N / barrier.R0 ** 4) ** barrier.alpha


# =============================================================================
# HORIZONTAL P-LAPLACIAN
# =============================================================================

def plap0_phi_closed(alpha: float, p: float, g: GroupPoint) -> float:
    """
    Horizontal p-Laplacian of N^alpha at g (centre at the origin):
    (4|alpha|)^(p-2) |z|^p N^beta 4 alpha (4 alpha (p - 1) - (p - Q)),
    beta = (2 alpha (p - 1) - p) / 2.
    """
    Q = 2 * g.n + 2
    _check_p(p, Q)
    N = koranyi_N(g)
    if N == 0.0:
        raise SingularPointError(0.0, Config.SINGULAR_RADIUS)
    return _plap0_formula(alpha, p, Q, g.z_squared, N)


def plap0_phi_closed_arrays(alpha: float, p: float, x, y, t, Q: int = 4) -> np.ndarray:
    _check_p(p, Q)
    z2 = x * x + y * y
    N = z2 * z2 + 16.0 * t * t
    return _plap0_formula(alpha, p, Q, z2, N)


def _plap0_formula(alpha, p, Q, z2, N):
    beta = (2.0 * alpha * (p - 1.0) - p) / 2.0
    return ((4.0 * abs(alpha)) ** (p - 2.0) * np.power(z2, p / 2.0) * np.power(N, beta)
            * 4.0 * alpha * (4.0 * alpha * (p - 1.0) - (p - Q)))


def plap0_finite_difference(alpha: float, p: float, g: GroupPoint, h: float = 1e-3) -> float:
    """
    Nested central differences along the flows of X_i and Y_i.

    g * exp(s X_i) is the integral curve of X_i, so each difference quotient
    is second order in h.
    """
    n = g.n

    def shift(point, k, s):
        offset = np.zeros(2 * n + 1)
        offset[k] = s
        return group_mul(point, GroupPoint.from_array(offset))

    def value(point):
        return koranyi_N(point) ** alpha

    def horizontal_grad(point):
        return np.array([(value(shift(point, k, h)) - value(shift(point, k, -h))) / (2.0 * h)
                         for k in range(2 * n)])

    def flux(point, k):
        grad = horizontal_grad(point)
        return float(np.dot(grad, grad)) ** ((p - 2.0) / 2.0) * grad[k]

    return sum((flux(shift(g, k, h), k) - flux(shift(g, k, -h), k)) / (2.0 * h)
               for k in range(2 * n))


# =============================================================================
# THRESHOLDS
# =============================================================================

def critical_alpha(p: float, Q: int = 4) -> float:
    _check_p(p, Q)
    return (p - Q) / (4.0 * (p - 1.0))


def barrier_K(p: float, eps: float, R0: float, Q: int = 4) -> float:
    _check_p(p, Q)
    _check_eps(eps)
    _check_radius('R0', R0)
    return (Q - p) / 4.0 + eps ** 4 * (2.0 / R0 ** 2 + 8.0 * Q / R0 ** 4)


def uniform_barrier_K(p: float, eps: float, R0: float, Q: int = 4) -> float:
    """Same as barrier_K with eps^2 in place of eps^4"""
    _check_p(p, Q)
    _check_eps(eps)
    _check_radius('R0', R0)
    return (Q - p) / 4.0 + eps ** 2 * (2.0 / R0 ** 2 + 8.0 * Q / R0 ** 4)


K_RULES = {
    'quartic': barrier_K,
    'quadratic': uniform_barrier_K,
}


def resolve_K(rule: str, p: float, eps: float, R0: float, Q: int = 4) -> float:
    if rule not in K_RULES:
        raise InvalidParameterError('k_rule', rule, ' or '.join(sorted(K_RULES)))
    return K_RULES[rule](p, eps, R0, Q)


# Below this eps the quartic K leaves the subsolution sum negative near |z| = R0, t = 0
QUARTIC_EPS_FLOOR = 0.25


def k_rule_note(rule: str, eps: float) -> Optional[str]:
    """Known deviation of a K rule at this eps, or None"""
    if rule == 'quartic' and 0.0 < eps < QUARTIC_EPS_FLOOR:
        return (f"quartic K is below the subsolution threshold for eps < {QUARTIC_EPS_FLOOR:g}; "
                f"negative sums near |z| = R0, t = 0 are expected, k_rule 'quadratic' avoids them")
    return None


def sobolev_K_min(p: float, Q: int = 4) -> float:
    _check_p(p, Q)
    return (Q - p) * (p - 1.0) / (4.0 * p)


def boundary_gradient_constants(R0: float, Q: int = 4) -> Tuple[float, float]:
    """(C0, K) of the boundary gradient bounds uniform in p"""
    _check_radius('R0', R0)
    C0 = (4.0 / R0) * np.sqrt(1.0 + 4.0 / R0 ** 2)
    K = (Q - 1) / 4.0 + (2.0 / R0 ** 2 + 8.0 * Q / R0 ** 4)
    return float(C0), float(K)


def tilt_mu(eps: float, p: float, Rstar: float, Q: int = 4) -> float:
    _check_p(p, Q)
    _check_radius('Rstar', Rstar)
    return eps ** 4 / (p - 1.0) * (8.0 / Rstar ** 2 + 32.0 * Q / Rstar ** 4)


# =============================================================================
# SUBSOLUTION DECOMPOSITION
# =============================================================================

def subsolution_terms(alpha: float, p: float, eps: float, g: GroupPoint,
                      normalized: bool = False) -> Tuple[float, float, float]:
    """
    Terms (I, II, III) whose sum equals |grad Phi|^2 Delta Phi + (p - 2) <D^2 Phi grad Phi, grad Phi>
    for Phi = N^alpha in the eps-metric, g relative to the centre.

    With normalized=True every term is divided by |alpha|^3 N^(3 alpha - 4) (alpha < 0 only).
    """
    Q = 2 * g.n + 2
    z2 = g.z_squared
    t2 = g.t * g.t
    N = koranyi_N(g)
    if N == 0.0:
        raise SingularPointError(0.0, Config.SINGULAR_RADIUS)

    bracket_1 = 4.0 * alpha * (p - 1.0) + Q - p
    bracket_2 = z2 * z2 + 8.0 * t2 * (Q + 4.0 * (2.0 * alpha - 1.0) * (p - 1.0))
    bracket_3 = z2 * z2 + 16.0 * (2.0 * alpha - 1.0) * t2

    if normalized:
        if not alpha < 0:
            raise InvalidParameterError('alpha', alpha, 'a negative exponent when normalized')
        one = -64.0 * z2 * z2 * N * N * bracket_1
        two = -512.0 * eps ** 2 * N * z2 * bracket_2
        three = -32768.0 * eps ** 4 * (p - 1.0) * t2 * bracket_3
        return one, two, three

    one = (4.0 * alpha) ** 3 * z2 * z2 * N ** (3.0 * alpha - 2.0) * bracket_1
    two = eps ** 2 * (8.0 * alpha) ** 3 * N ** (3.0 * alpha - 3.0) * z2 * bracket_2
    three = eps ** 4 * (32.0 * alpha) ** 3 * (p - 1.0) * N ** (3.0 * alpha - 4.0) * t2 * bracket_3
    return one, two, three


def subsolution_terms_arrays(alpha: float, p: float, eps: float, x, y, t, Q: int = 4):
    """Normalized (I, II, III) on coordinate arrays relative to the centre"""
    if not alpha < 0:
        raise InvalidParameterError('alpha', alpha, 'a negative exponent when normalized')
    z2 = x * x + y * y
    t2 = t * t
    N = z2 * z2 + 16.0 * t2
    one = -64.0 * z2 * z2 * N * N * (4.0 * alpha * (p - 1.0) + Q - p)
    two = -512.0 * eps ** 2 * N * z2 * (z2 * z2 + 8.0 * t2 * (Q + 4.0 * (2.0 * alpha - 1.0) * (p - 1.0)))
    three = -32768.0 * eps ** 4 * (p - 1.0) * t2 * (z2 * z2 + 16.0 * (2.0 * alpha - 1.0) * t2)
    return one, two, three


def subsolution_margins(alpha: float, p: float, eps: float, rows: np.ndarray, Q: int = 4,
                        slack: float = 1e-9) -> Tuple[int, np.ndarray]:
    """
    (violations, relative margins) of I + II + III at sample rows (x, y, t).

    A sample violates when the sum is below -slack times the scale of the
    first bracket's summands plus |II| + |III|; at the critical exponent
    the first bracket cancels to round-off.
    """
    x, y, t = rows[:, 0], rows[:, 1], rows[:, 2]
    one, two, three = subsolution_terms_arrays(alpha, p, eps, x, y, t, Q)
    z2 = x * x + y * y
    N = z2 * z2 + 16.0 * t * t
    scale = 64.0 * z2 * z2 * N * N * (4.0 * abs(alpha) * (p - 1.0) + Q) + np.abs(two) + np.abs(three)
    total = one + two + three
    relative = np.where(scale > 0, total / np.where(scale > 0, scale, 1.0), 0.0)
    return int(np.count_nonzero(total < -slack * scale)), relative


def boundary_derivative_bounds(barrier: PowerBarrier, p: float, K: float, samples: np.ndarray) -> dict:
    """Largest |grad_0 Phi| and |T Phi| on sampled sphere points against 4K/(R0(p-1)) and 8K/(R0^2(p-1))"""
    R0 = barrier.R0
    grad_bound = 4.0 * K / (R0 * (p - 1.0))
    t_bound = 8.0 * K / (R0 * R0 * (p - 1.0))
    grad_max = 0.0
    t_max = 0.0
    for row in samples:
        g = GroupPoint.from_array(row)
        grad_max = max(grad_max, phi_grad0(barrier, g).norm())
        t_max = max(t_max, abs(phi_vertical_derivative(barrier, g)))
    return {
        'grad_max': grad_max, 'grad_bound': grad_bound,
        't_max': t_max, 't_bound': t_bound,
        'passed': grad_max <= grad_bound * (1.0 + Config.EXACT_TOL)
        and t_max <= t_bound * (1.0 + Config.EXACT_TOL),
    }


# =============================================================================
# EXACT SOLUTIONS AND FLOW LAWS
# =============================================================================

def decay_exponent(p: float, Q: int = 4) -> float:
    """gamma = (Q - p) / (p - 1)"""
    _check_p(p, Q)
    return (Q - p) / (p - 1.0)


def exact_subriemannian_potential(g: GroupPoint, g0: GroupPoint, Rstar: float, p: float, Q: int = 4) -> float:
    _check_radius('Rstar', Rstar)
    gamma = decay_exponent(p, Q)
    return (koranyi_norm(recenter(g0, g)) / Rstar) ** (-gamma)


def power_potential_arrays(center, Rstar: float, p: float, x, y, t, Q: int = 4) -> np.ndarray:
    """(||g0^-1 g|| / R*)^(-gamma) on coordinate arrays, clipped to 1 inside the ball"""
    _check_radius('Rstar', Rstar)
    gamma = decay_exponent(p, Q)
    r = koranyi_N_arrays(*recenter_arrays(center, x, y, t)) ** 0.25
    with np.errstate(divide='ignore'):
        return np.minimum(1.0, (r / Rstar) ** (-gamma))


def exact_imcf(g: GroupPoint, g0: GroupPoint, R0: float, Q: int = 4) -> float:
    _check_radius('R0', R0)
    return (Q - 1) * np.log(koranyi_norm(recenter(g0, g)) / R0)


def exact_imcf_arrays(center, R0: float, x, y, t, Q: int = 4) -> np.ndarray:
    _check_radius('R0', R0)
    r = koranyi_N_arrays(*recenter_arrays(center, x, y, t)) ** 0.25
    with np.errstate(divide='ignore'):
        return (Q - 1) * np.log(r / R0)


def sphere_radius(flowlaw: FlowLaw, s) -> float:
    return flowlaw.radius(s)


def inout_radii(s, eps: float, Rstar: float, Rbar: float, Chat: float, C0: float, Q: int = 4):
    """(phi_eps(s), psi(s)): radii of the inner and outer spheres enclosing {u = s}"""
    _check_eps(eps)
    if Chat < 1 or C0 < 1:
        raise InvalidParameterError('Chat/C0', (Chat, C0), 'constants >= 1')
    growth = np.exp(np.asarray(s, dtype=float) / (Q - 1))
    phi = Rstar * Chat ** (-eps ** 4 / (Q - 1)) * growth
    psi = C0 ** (1.0 / (Q - 1)) * Rbar * growth
    return phi, psi


def pointwise_lower_bound(g: GroupPoint, g0: GroupPoint, Rstar: float, p: float, Q: int,
                          eps: float, Chat: float) -> float:
    gamma = decay_exponent(p, Q)
    r = koranyi_norm(recenter(g0, g))
    return Chat ** (-eps ** 4 / (p - 1.0)) * (r / Rstar) ** (-gamma)


def pointwise_upper_bound(g: GroupPoint, g0: GroupPoint, Rbar: float, p: float, Q: int, C0: float) -> float:
    gamma = decay_exponent(p, Q)
    r = koranyi_norm(recenter(g0, g))
    return C0 ** (1.0 / (p - 1.0)) * (r / Rbar) ** (-gamma)


def two_sided_u_bounds(g: GroupPoint, g0: GroupPoint, eps: float, Rstar: float, Rbar: float,
                       Chat: float, C0: float, Q: int = 4) -> Tuple[float, float]:
    """
    Envelopes of the IMCF function:
    (Q - 1) log(||g||/Rbar) - log C0 <= u <= (Q - 1) log(||g||/R*) + eps^4 log Chat.
    """
    r = koranyi_norm(recenter(g0, g))
    lower = (Q - 1) * np.log(r / Rbar) - np.log(C0)
    upper = (Q - 1) * np.log(r / Rstar) + eps ** 4 * np.log(Chat)
    return float(lower), float(upper)


# =============================================================================
# PERIMETER
# =============================================================================

def horizontal_perimeter_exact(r: float) -> float:
    """pi r^3 / 2 times the integral of sqrt(cos) over (-pi/2, pi/2)"""
    _check_radius('r', r)
    integral = np.sqrt(np.pi) * gamma_fn(0.75) / gamma_fn(1.25)
    return float(np.pi * r ** 3 * integral / 2.0)


def _graded_panels(panels: int, grading: float) -> np.ndarray:
    """Breakpoints on [0, pi/2] clustered geometrically toward pi/2"""
    distances = (np.pi / 2.0) * grading ** np.arange(1, panels)
    return np.concatenate([[0.0], np.pi / 2.0 - distances, [np.pi / 2.0]])


def koranyi_perimeter_eps(r: float, eps: float, n: int = 1, panels: int = 24,
                          order: int = 12, phi_points: int = 16) -> float:
    """
    eps times the eps-perimeter of the Korányi ball B_r(0) in H^1.

    The sphere is parametrized by |z|^2 = r^2 cos(theta), 4t = r^2 sin(theta)
    and the azimuth of z. In these coordinates dsigma / |grad N| = dtheta dphi / 16,
    so the integrand is sqrt((XN)^2 + (YN)^2 + eps^2 (TN)^2) / 16.
    Gauss-Legendre panels in theta are graded toward the two characteristic
    points, where the eps = 0 integrand vanishes like sqrt(cos(theta)).
    """
    _check_radius('r', r)
    _check_eps(eps)
    if n != 1:
        raise InvalidParameterError('n', n, 'n = 1 for surface quadrature')

    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = _graded_panels(panels, 0.5)
    edges = np.concatenate([-half[::-1], half[1:]])

    theta_parts, weight_parts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
        theta_parts.append(mid + rad * nodes)
        weight_parts.append(rad * weights)
    theta = np.concatenate(theta_parts)
    w_theta = np.concatenate(weight_parts)

    phi = 2.0 * np.pi * np.arange(phi_points) / phi_points
    w_phi = 2.0 * np.pi / phi_points

    T, P = np.meshgrid(theta, phi, indexing='ij')
    rho = r * np.sqrt(np.clip(np.cos(T), 0.0, None))
    x, y, t = rho * np.cos(P), rho * np.sin(P), r * r * np.sin(T) / 4.0
    xn, yn, tn = n_derivative_arrays(x, y, t)
    integrand = np.sqrt(xn * xn + yn * yn + eps * eps * tn * tn) / 16.0

    total = float(np.sum(w_theta[:, None] * integrand) * w_phi)
    if not np.isfinite(total):
        raise QuadratureError(details={'r': r, 'eps': eps})
    return total


# =============================================================================
# SAMPLERS
# =============================================================================

def _translate_rows(g0: GroupPoint, local: np.ndarray) -> np.ndarray:
    n = g0.n
    x, y, t = local[:, :n], local[:, n:2 * n], local[:, 2 * n]
    t_new = g0.t + t + 0.5 * (y @ g0.x - x @ g0.y)
    return np.column_stack([x + g0.x, y + g0.y, t_new])


def _sphere_rows(n: int, r: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    count = r.size
    theta = rng.uniform(-np.pi / 2.0, np.pi / 2.0, count)
    direction = rng.standard_normal((count, 2 * n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    rho = r * np.sqrt(np.cos(theta))
    z = rho[:, None] * direction
    t = r * r * np.sin(theta) / 4.0
    return np.column_stack([z, t])


def sample_gauge_sphere(g0: GroupPoint, r: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rows (x, y, t) with ||g0^-1 g|| = r"""
    _check_radius('r', r)
    return _translate_rows(g0, _sphere_rows(g0.n, np.full(count, float(r)), rng))


def sample_exterior(g0: GroupPoint, r_min: float, r_max: float, count: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Rows with gauge distance log-uniform in [r_min, r_max]"""
    _check_radius('r_min', r_min)
    if r_max < r_min:
        raise InvalidParameterError('r_max', r_max, f'>= r_min={r_min}')
    radii = np.exp(rng.uniform(np.log(r_min), np.log(r_max), count))
    return _translate_rows(g0, _sphere_rows(g0.n, radii, rng))
