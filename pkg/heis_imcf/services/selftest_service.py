"""
Self-Test Service
=================
Registry of algebra, closed-form and stencil invariants run by `heis-imcf selftest`.

This service provides:
1. A decorator-based registry of named checks
2. Group axioms, dilation homogeneity and Ricci-oracle agreement on random samples
3. Exactness of the grid stencils on low-degree polynomials
4. Closed-form derivative, p-Laplacian and perimeter cross-checks
5. A checklist rendering of the outcome
"""

import logging
from typing import Callable, Dict, List, Sequence

import numpy as np

from config import Config
from heis_imcf.api.errors import ConfigError
from heis_imcf.models.geometry_models import FrameVector, GroupPoint
from heis_imcf.models.grid_models import Box, ScalarField
from heis_imcf.models.report_models import CheckKind, CheckReport
from heis_imcf.services import closed_form_service as cf
from heis_imcf.services.grid_fields import (
    frame_derivatives, interior_nodes, laplacian_eps, vertical_derivative,
)
from heis_imcf.services.group_geometry import (
    covariant_derivative, dilate, eps_gauge, group_inv, group_mul, koranyi_norm,
    lie_bracket, ricci_eps, ricci_trace,
)
from heis_imcf.services.observability import metrics

logger = logging.getLogger(__name__)

SAMPLES = 1000
SELFTEST_BOX = Box(2.0, 2.0, (17, 17, 17))

_CHECKS: Dict[str, Callable[[np.random.Generator], CheckReport]] = {}


def selftest(name: str):
    """Register a check under `name`"""
    def decorator(f):
        _CHECKS[name] = f
        return f
    return decorator


def registered_checks() -> List[str]:
    return list(_CHECKS)


def _report(name: str, worst: float, tolerance: float, evaluated: int, **details) -> CheckReport:
    return CheckReport(name=name, evaluated=evaluated, worst=float(worst), tolerance=tolerance,
                       passed=bool(worst <= tolerance), kind=CheckKind.EQUALITY, details=details)


def _random_point(rng: np.random.Generator, n: int, scale: float = 2.0) -> GroupPoint:
    return GroupPoint.from_array(rng.uniform(-scale, scale, 2 * n + 1))


def _random_vector(rng: np.random.Generator, n: int) -> FrameVector:
    return FrameVector.from_array(rng.standard_normal(2 * n + 1))


def _gap(a: GroupPoint, b: GroupPoint) -> float:
    return float(np.max(np.abs(a.as_array() - b.as_array())) / (1.0 + np.max(np.abs(b.as_array()))))


# =============================================================================
# GROUP ALGEBRA
# =============================================================================

@selftest('group_axioms')
def check_group_axioms(rng: np.random.Generator) -> CheckReport:
    worst = 0.0
    for k in range(SAMPLES):
        n = 1 + k % 3
        g, h, f = (_random_point(rng, n) for _ in range(3))
        e = GroupPoint.origin(n)
        worst = max(worst,
                    _gap(group_mul(group_mul(g, h), f), group_mul(g, group_mul(h, f))),
                    _gap(group_mul(g, e), g),
                    _gap(group_mul(g, group_inv(g)), e),
                    _gap(group_mul(group_inv(g), g), e))
    return _report('group_axioms', worst, Config.EXACT_TOL, SAMPLES)


@selftest('dilation_homogeneity')
def check_dilation_homogeneity(rng: np.random.Generator) -> CheckReport:
    """||delta_lam g|| = lam ||g|| and delta_lam is a group automorphism"""
    worst = 0.0
    for k in range(SAMPLES):
        n = 1 + k % 2
        g, h = _random_point(rng, n), _random_point(rng, n)
        lam = float(np.exp(rng.uniform(-2.0, 2.0)))
        norm = koranyi_norm(g)
        worst = max(worst,
                    abs(koranyi_norm(dilate(lam, g)) - lam * norm) / (1.0 + lam * norm),
                    _gap(dilate(lam, group_mul(g, h)), group_mul(dilate(lam, g), dilate(lam, h))))
    return _report('dilation_homogeneity', worst, Config.EXACT_TOL, SAMPLES)


@selftest('eps_gauge_bounds')
def check_eps_gauge_bounds(rng: np.random.Generator) -> CheckReport:
    """eps-gauge never exceeds the Korányi norm and is nonincreasing in eps"""
    worst = 0.0
    for _ in range(SAMPLES):
        g = _random_point(rng, 1)
        e1, e2 = np.sort(rng.uniform(0.05, 1.0, 2))
        small, large = eps_gauge(g, e1), eps_gauge(g, e2)
        worst = max(worst, small - koranyi_norm(g), large - small, 0.0)
    return _report('eps_gauge_bounds', worst, Config.EXACT_TOL, SAMPLES)


@selftest('connection_levi_civita')
def check_connection(rng: np.random.Generator) -> CheckReport:
    """Torsion-free and metric for constant-coefficient fields"""
    worst = 0.0
    for k in range(SAMPLES):
        n = 1 + k % 2
        eps = float(rng.uniform(0.1, 1.0))
        U, V, W = (_random_vector(rng, n) for _ in range(3))
        torsion = covariant_derivative(U, V, eps) - covariant_derivative(V, U, eps) - lie_bracket(U, V, eps)
        metric = covariant_derivative(W, U, eps).inner(V) + U.inner(covariant_derivative(W, V, eps))
        scale = 1.0 / eps
        worst = max(worst, float(np.max(np.abs(torsion.as_array()))) / scale, abs(metric) / scale)
    return _report('connection_levi_civita', worst, Config.EXACT_TOL, SAMPLES)


@selftest('ricci_oracle')
def check_ricci_oracle(rng: np.random.Generator) -> CheckReport:
    worst = 0.0
    for k in range(SAMPLES):
        n = 1 + k % 2
        eps = float(rng.uniform(0.1, 1.0))
        U, V = _random_vector(rng, n), _random_vector(rng, n)
        formula = ricci_eps(U, V, eps)
        traced = ricci_trace(U, V, eps)
        worst = max(worst, abs(formula - traced) * eps * eps / (1.0 + U.norm() * V.norm()))
    return _report('ricci_oracle', worst, Config.EXACT_TOL, SAMPLES)


# =============================================================================
# CLOSED FORMS
# =============================================================================

@selftest('n_gradient_identity')
def check_n_gradient_identity(rng: np.random.Generator) -> CheckReport:
    """|grad_0 N|^2 = 16 |z|^2 N and the trace of the horizontal rough Hessian"""
    worst = 0.0
    for k in range(SAMPLES):
        n = 1 + k % 3
        g = _random_point(rng, n)
        d = cf.n_frame_derivatives(g)
        N = g.z_squared ** 2 + 16.0 * g.t ** 2
        horizontal = float(np.dot(d[:2 * n], d[:2 * n]))
        trace = float(np.trace(cf.n_rough_hessian(g)[:2 * n, :2 * n]))
        scale = 1.0 + 16.0 * g.z_squared * N
        worst = max(worst, abs(horizontal - 16.0 * g.z_squared * N) / scale,
                    abs(trace - cf.horizontal_laplacian_N(g)) / (1.0 + abs(trace)))
    return _report('n_gradient_identity', worst, Config.EXACT_TOL, SAMPLES)


@selftest('plap_closed_vs_flow_differences')
def check_plap_closed_form(rng: np.random.Generator) -> CheckReport:
    count = 200
    worst = 0.0
    for _ in range(count):
        p = float(rng.choice([1.2, 1.5, 2.0]))
        # off the critical exponent so the closed form does not vanish
        alpha = cf.critical_alpha(p) * float(rng.choice([0.4, 0.7, 1.4]))
        row = cf.sample_exterior(GroupPoint.origin(), 1.0, 3.0, 1, rng)[0]
        g = GroupPoint.from_array(row)
        if g.z_squared < 0.05:
            continue
        closed = cf.plap0_phi_closed(alpha, p, g)
        numeric = cf.plap0_finite_difference(alpha, p, g, h=1e-3)
        worst = max(worst, abs(closed - numeric) / (1e-6 + abs(closed)))
    return _report('plap_closed_vs_flow_differences', worst, 1e-3, count)


@selftest('subsolution_sign')
def check_subsolution_sign(rng: np.random.Generator) -> CheckReport:
    count = 10_000
    violations = 0
    for p in (1.2, 1.5, 2.0):
        for eps in (0.0, 0.3, 1.0):
            K = cf.barrier_K(p, eps, 1.0)
            rows = cf.sample_exterior(GroupPoint.origin(), 1.0, 10.0, count, rng)
            violations += cf.subsolution_margins(-K / (p - 1.0), p, eps, rows)[0]
    report = CheckReport(name='subsolution_sign', evaluated=9 * count, worst=float(violations),
                         tolerance=0.0, passed=violations == 0, kind=CheckKind.INEQUALITY)
    return report


@selftest('perimeter_limit')
def check_perimeter_limit(rng: np.random.Generator) -> CheckReport:
    """eps Per_eps(B_1) nondecreasing in eps and within 1% of Per_0 at eps = 0.05"""
    eps_grid = np.linspace(0.05, 1.0, 20)
    values = np.array([cf.koranyi_perimeter_eps(1.0, e) for e in eps_grid])
    exact = cf.horizontal_perimeter_exact(1.0)
    monotone = bool(np.all(np.diff(values) >= -Config.EXACT_TOL * exact))
    gap = abs(values[0] - exact) / exact
    return CheckReport(name='perimeter_limit', evaluated=eps_grid.size, worst=gap, tolerance=1e-2,
                       passed=monotone and gap <= 1e-2, kind=CheckKind.INEQUALITY,
                       details={'monotone': monotone, 'per_0': exact, 'eps_per_005': float(values[0])})


@selftest('quadrature_at_zero')
def check_quadrature_at_zero(rng: np.random.Generator) -> CheckReport:
    exact = cf.horizontal_perimeter_exact(1.0)
    gap = abs(cf.koranyi_perimeter_eps(1.0, 0.0) - exact) / exact
    return _report('quadrature_at_zero', gap, 5e-3, 1)


# =============================================================================
# STENCILS
# =============================================================================

def _polynomial_field(box: Box, eps: float):
    x, y, t = box.coords
    f = x * x + x * y - 0.5 * y * y + 2.0 * t + 0.25 * x * t
    # X f, Y f, T f of the quadratic above
    ft = 2.0 + 0.25 * x
    fx = 2.0 * x + y + 0.25 * t
    fy = x - y
    return f, (fx - 0.5 * y * ft, fy + 0.5 * x * ft, eps * ft)


@selftest('frame_stencil_exactness')
def check_frame_stencil(rng: np.random.Generator) -> CheckReport:
    box = SELFTEST_BOX
    worst = 0.0
    for eps in (0.0, 0.5, 1.0):
        f, exact = _polynomial_field(box, eps)
        for grid, closed in zip(frame_derivatives(f, box, eps), exact):
            worst = max(worst, float(np.max(np.abs(grid - closed))) / (1.0 + float(np.max(np.abs(closed)))))
    return _report('frame_stencil_exactness', worst, Config.EXACT_TOL, box.size)


@selftest('discrete_commutator')
def check_discrete_commutator(rng: np.random.Generator) -> CheckReport:
    """X_h Y_h - Y_h X_h = (A_x + A_y) D_t / 2 away from the faces, A the neighbour average"""
    box = SELFTEST_BOX
    x, y, t = box.coords
    f = x * y * t + x * x + t * t
    X, Y, _ = frame_derivatives(f, box, 0.0)
    XY = frame_derivatives(Y, box, 0.0)[0]
    YX = frame_derivatives(X, box, 0.0)[1]
    dt = vertical_derivative(f, box)
    average = np.zeros_like(dt)
    average[1:-1, :, :] += 0.5 * (dt[2:, :, :] + dt[:-2, :, :])
    average[:, 1:-1, :] += 0.5 * (dt[:, 2:, :] + dt[:, :-2, :])
    inside = interior_nodes(box, 2)
    gap = np.abs(XY - YX - 0.5 * average)[inside]
    worst = float(np.max(gap)) / (1.0 + float(np.max(np.abs(dt))))
    return _report('discrete_commutator', worst, Config.EXACT_TOL, int(np.count_nonzero(inside)))


@selftest('laplacian_polynomial')
def check_laplacian_polynomial(rng: np.random.Generator) -> CheckReport:
    """Delta_eps of x^2 + y^2 + t^2 is 4 + (|z|^2 / 2 + 2 eps^2) inside the box"""
    box = SELFTEST_BOX
    x, y, t = box.coords
    worst = 0.0
    inside = interior_nodes(box, 2)
    for eps in (0.0, 0.5):
        f = ScalarField(x * x + y * y + t * t, box)
        grid = laplacian_eps(f, eps).values
        exact = 4.0 + 0.5 * (x * x + y * y) + 2.0 * eps * eps
        worst = max(worst, float(np.max(np.abs(grid - exact)[inside])) / float(np.max(exact)))
    return _report('laplacian_polynomial', worst, Config.EXACT_TOL, int(np.count_nonzero(inside)))


# =============================================================================
# RUNNER
# =============================================================================

def run_selftests(names: Sequence[str] = None, seed: int = None) -> List[CheckReport]:
    """Run the selected checks in registration order"""
    selected = registered_checks() if not names else list(names)
    unknown = [name for name in selected if name not in _CHECKS]
    if unknown:
        raise ConfigError(f"Unknown self-test(s): {', '.join(unknown)}", field='checks')

    rng = np.random.default_rng(Config.DEFAULT_SEED if seed is None else seed)
    reports = []
    for name in selected:
        report = _CHECKS[name](rng)
        metrics.increment('selftests_total', labels={'status': 'pass' if report.passed else 'fail'})
        logger.info(report.summary_line(), extra={'extra_data': report.to_dict()})
        reports.append(report)
    return reports


def format_checklist(reports: Sequence[CheckReport]) -> str:
    lines = []
    for report in reports:
        mark = '✅' if report.passed else '❌'
        lines.append(f"{mark} {report.name:<34} worst={report.worst:.3e} tol={report.tolerance:.1e}")
    passed = sum(r.passed for r in reports)
    lines.append(f"{passed}/{len(reports)} self-tests passed")
    return '\n'.join(lines)
