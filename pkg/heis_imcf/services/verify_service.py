"""
Verification Service
====================
Node-wise identity and inequality checks on closed-form and solver fields.

Equality checks compare two independently evaluated sides L and R with
errors e = |L - R| / S, S = max over the evaluation set of max(|L|, |R|).
A check passes when the fraction of nodes with e <= tol reaches
`pass_fraction` and, when a field on the refined grid is supplied, the
measured order under one h-halving is at least MIN_ORDER.

Inequality checks report normalized margins (L - R) / S and pass when the
0.1% quantile of the margin is at least -c h.
"""

import logging
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from config import Config
from heis_imcf.api.errors import EmptyEvaluationSetError, InvalidParameterError
from heis_imcf.models.barrier_models import PowerBarrier
from heis_imcf.models.geometry_models import GroupPoint
from heis_imcf.models.grid_models import Box, ScalarField, FrameField
from heis_imcf.models.report_models import CheckKind, CheckReport, WeakNormParams
from heis_imcf.services import closed_form_service as cf
from heis_imcf.services.grid_fields import (
    boundary_layer, divergence_eps, evaluation_nodes, frame_derivatives, frame_gradient_eps,
    gauge_distance, interior_nodes, linearized_apply, node_volumes, p_laplace_residual,
    rough_hessian, stencil_halo, symplectic_grad, vertical_derivative,
)
from heis_imcf.services.group_geometry import connection_table, ricci_matrix
from heis_imcf.services.observability import metrics

logger = logging.getLogger(__name__)

MIN_ORDER = 1.5
MARGIN_QUANTILE = 1e-3


# =============================================================================
# REPORT HELPERS
# =============================================================================

def convergence_order(e_coarse: float, e_fine: float, exact_floor: float = None) -> float:
    """log2(e_coarse / e_fine); inf when the fine error sits at round-off"""
    floor = Config.EXACT_TOL if exact_floor is None else exact_floor
    if e_fine <= floor:
        return float('inf')
    if e_coarse <= floor:
        return 0.0
    return float(np.log2(e_coarse / e_fine))


def _relative_errors(L: np.ndarray, R: np.ndarray, region: np.ndarray) -> np.ndarray:
    lhs, rhs = L[region], R[region]
    scale = float(np.max(np.maximum(np.abs(lhs), np.abs(rhs)))) if lhs.size else 0.0
    if scale == 0.0:
        return np.zeros_like(lhs)
    return np.abs(lhs - rhs) / scale


def _aggregate(errors: np.ndarray) -> float:
    return float(np.sqrt(np.mean(errors ** 2))) if errors.size else 0.0


def _coarse_view(fine: np.ndarray) -> np.ndarray:
    return fine[::2, ::2, ::2]


def _equality_report(name: str, sides, region: np.ndarray, tol: float, pass_fraction: float,
                     fine_sides=None, excluded: int = 0, details: dict = None) -> CheckReport:
    if not np.any(region):
        raise EmptyEvaluationSetError(name)
    L, R = sides
    errors = _relative_errors(L, R, region)
    fraction = float(np.mean(errors <= tol))

    order = None
    if fine_sides is not None:
        Lf, Rf = (_coarse_view(a) for a in fine_sides)
        fine_errors = _relative_errors(Lf, Rf, region)
        floor = Config.EXACT_TOL
        coarse_agg, fine_agg = _aggregate(errors), _aggregate(fine_errors)
        if coarse_agg <= floor and fine_agg <= floor:
            order = float('inf')
        else:
            order = convergence_order(coarse_agg, fine_agg, floor)

    passed = fraction >= pass_fraction and (order is None or order >= MIN_ORDER)
    info = {'pass_fraction': fraction, 'required_fraction': pass_fraction,
            'rms_error': _aggregate(errors)}
    info.update(details or {})
    report = CheckReport(name=name, evaluated=int(np.count_nonzero(region)),
                         worst=float(np.max(errors)) if errors.size else 0.0,
                         tolerance=tol, passed=passed, kind=CheckKind.EQUALITY,
                         order=order, excluded=excluded, details=info)
    record_report(report)
    return report


def _inequality_report(name: str, L: np.ndarray, R: np.ndarray, region: np.ndarray, h: float,
                       c: float, excluded: int = 0, details: dict = None) -> CheckReport:
    if not np.any(region):
        raise EmptyEvaluationSetError(name)
    lhs, rhs = L[region], R[region]
    scale = float(np.max(np.maximum(np.abs(lhs), np.abs(rhs))))
    margin = (lhs - rhs) / scale if scale > 0 else np.zeros_like(lhs)
    quantile = float(np.quantile(margin, MARGIN_QUANTILE))
    tol = c * h
    info = {'quantile_margin': quantile, 'c': c, 'h': h,
            'nonnegative_fraction': float(np.mean(margin >= 0.0))}
    info.update(details or {})
    report = CheckReport(name=name, evaluated=int(margin.size), worst=float(np.min(margin)),
                         tolerance=tol, passed=quantile >= -tol, kind=CheckKind.INEQUALITY,
                         excluded=excluded, details=info)
    record_report(report)
    return report


def record_report(report: CheckReport):
    metrics.increment('checks_total', labels={'status': 'pass' if report.passed else 'fail'})
    logger.info(report.summary_line(), extra={'extra_data': report.to_dict()})


# =============================================================================
# DERIVED QUANTITIES
# =============================================================================

class FieldCalculus:
    """Frame derivatives of one field shared by the identity checks"""

    def __init__(self, v: ScalarField, p: float, eps: float, floor: float = None):
        self.v = v
        self.p = float(p)
        self.eps = float(eps)
        self.floor = floor

    @cached_property
    def grad(self) -> FrameField:
        return frame_gradient_eps(self.v, self.eps)

    @cached_property
    def norm(self) -> np.ndarray:
        return self.grad.norm()

    @cached_property
    def degenerate(self) -> np.ndarray:
        floor = Config.GRADIENT_FLOOR if self.floor is None else self.floor
        return self.norm < floor * float(np.max(np.abs(self.v.values)))

    @cached_property
    def safe_norm(self) -> np.ndarray:
        return np.where(self.degenerate, 1.0, self.norm)

    @cached_property
    def nu(self) -> FrameField:
        return self.grad.scaled(np.where(self.degenerate, 0.0, 1.0 / self.safe_norm))

    @cached_property
    def grad_sq(self) -> ScalarField:
        return self.v.with_values(self.grad.norm_squared())

    @cached_property
    def grad_of_grad_sq(self) -> FrameField:
        return frame_gradient_eps(self.grad_sq, self.eps)

    @cached_property
    def Tv(self) -> ScalarField:
        return self.v.with_values(vertical_derivative(self.v.values, self.v.box))

    @cached_property
    def grad_Tv(self) -> FrameField:
        return frame_gradient_eps(self.Tv, self.eps)

    @cached_property
    def hessian(self) -> np.ndarray:
        return rough_hessian(self.v, self.eps)

    @cached_property
    def hessian_sq(self) -> np.ndarray:
        return np.sum(self.hessian ** 2, axis=(-2, -1))

    @cached_property
    def symplectic_coupling(self) -> np.ndarray:
        """<grad_{0,J} v, grad_eps T v>"""
        return symplectic_grad(self.v, self.eps).inner(self.grad_Tv)

    @cached_property
    def excluded(self) -> np.ndarray:
        return stencil_halo(self.degenerate)

    def power(self, exponent: float) -> np.ndarray:
        return np.where(self.degenerate, 0.0, self.safe_norm ** exponent)

    def apply_L(self, psi: np.ndarray) -> np.ndarray:
        return linearized_apply(self.v, self.v.with_values(psi), self.p, self.eps, self.floor).values


def _region(v: ScalarField, excluded: np.ndarray, region: Optional[np.ndarray], margin: int = None) -> np.ndarray:
    base = evaluation_nodes(v.mask, margin) if v.mask is not None else interior_nodes(v.box, margin)
    if region is not None:
        base = base & region
    return base & ~excluded


def _check_p(p: float):
    if not 1.0 < p <= 2.0:
        raise InvalidParameterError('p', p, 'a real in (1, 2]')


# =============================================================================
# IDENTITIES
# =============================================================================

def _kn_sides(calc: FieldCalculus):
    p = calc.p
    L = calc.apply_L(calc.grad_sq.values)
    gf2 = calc.grad_of_grad_sq.norm_squared()
    R = (calc.power(p - 2.0) * (2.0 * calc.hessian_sq + 4.0 * calc.symplectic_coupling)
         + 0.5 * (p - 2.0) * calc.power(p - 4.0) * gf2)
    return L, R


def check_kn_identity(v: ScalarField, p: float, eps: float, v_fine: ScalarField = None,
                      tol: float = 5e-2, pass_fraction: float = 0.99,
                      region: np.ndarray = None) -> CheckReport:
    """L_v(|grad v|^2) against the rough-Hessian form of its right-hand side"""
    _check_p(p)
    calc = FieldCalculus(v, p, eps)
    nodes = _region(v, calc.excluded, region)
    fine = _kn_sides(FieldCalculus(v_fine, p, eps)) if v_fine is not None else None
    return _equality_report('kn_identity', _kn_sides(calc), nodes, tol, pass_fraction, fine,
                            excluded=int(np.count_nonzero(calc.excluded)), details={'p': p, 'eps': eps})


def _hessian_sides(calc: FieldCalculus, ricci_source: str):
    eps = calc.eps
    H = calc.hessian
    g = calc.grad.stack()
    Gamma = connection_table(1, eps)
    # rows of the covariant Hessian: nabla_{E_i} grad v
    covariant = H + np.einsum('...j,ijk->...ik', g, Gamma)
    ric = ricci_matrix(1, eps, source=ricci_source)
    L = 2.0 * np.sum(covariant ** 2, axis=(-2, -1)) + 2.0 * np.einsum('...i,ij,...j->...', g, ric, g)
    R = 2.0 * calc.hessian_sq + 4.0 * calc.symplectic_coupling
    return L, R


def check_hessian_cancellation(v: ScalarField, eps: float, v_fine: ScalarField = None,
                               tol: float = 5e-2, pass_fraction: float = 0.99,
                               ricci_source: str = 'formula', region: np.ndarray = None) -> CheckReport:
    """2|D^2 v|^2 + 2 Ric(grad v) against 2|rough Hessian|^2 + 4 <grad_{0,J} v, grad T v>"""
    if not eps > 0:
        raise InvalidParameterError('eps', eps, 'a positive real for the covariant Hessian')
    calc = FieldCalculus(v, 2.0, eps)
    nodes = _region(v, np.zeros(v.box.shape, dtype=bool), region)
    fine = _hessian_sides(FieldCalculus(v_fine, 2.0, eps), ricci_source) if v_fine is not None else None
    return _equality_report('hessian_cancellation', _hessian_sides(calc, ricci_source), nodes, tol,
                            pass_fraction, fine, details={'eps': eps, 'ricci_source': ricci_source})


def _lv_sides(calc: FieldCalculus):
    p = calc.p
    v = calc.v.values
    L_v2 = calc.apply_L(v * v)
    R_v2 = 2.0 * (p - 1.0) * calc.power(p)

    Tv = calc.Tv.values
    gT2 = calc.grad_Tv.norm_squared()
    along = calc.nu.inner(calc.grad_Tv)
    L_T2 = calc.apply_L(Tv * Tv)
    R_T2 = (2.0 * (p - 1.0) * calc.power(p - 2.0) * gT2
            + 2.0 * (2.0 - p) * calc.power(p - 2.0) * (gT2 - along * along))
    return (L_v2, R_v2), (L_T2, R_T2)


def check_lv_identities(v: ScalarField, p: float, eps: float, v_fine: ScalarField = None,
                        tol: float = 5e-2, pass_fraction: float = 0.99,
                        region: np.ndarray = None) -> CheckReport:
    """L_v(v^2) = 2(p-1)|grad v|^p and the (T v)^2 identity, node-wise"""
    _check_p(p)
    calc = FieldCalculus(v, p, eps)
    nodes = _region(v, calc.excluded, region)
    if not np.any(nodes):
        raise EmptyEvaluationSetError('lv_identities')
    (a_L, a_R), (b_L, b_R) = _lv_sides(calc)
    errors = np.maximum(_relative_errors(a_L, a_R, nodes), _relative_errors(b_L, b_R, nodes))

    # pack the worse identity per node into a single pair of sides
    L = np.zeros(v.box.shape)
    R = np.zeros(v.box.shape)
    L[nodes] = errors
    sides = (L, R)
    fine_sides = None
    if v_fine is not None:
        fine_calc = FieldCalculus(v_fine, p, eps)
        (fa_L, fa_R), (fb_L, fb_R) = _lv_sides(fine_calc)
        coarse_nodes = np.zeros(v_fine.box.shape, dtype=bool)
        coarse_nodes[::2, ::2, ::2] = nodes
        fine_err = np.maximum(_relative_errors(fa_L, fa_R, coarse_nodes),
                              _relative_errors(fb_L, fb_R, coarse_nodes))
        Lf = np.zeros(v_fine.box.shape)
        Lf[coarse_nodes] = fine_err
        fine_sides = (Lf, np.zeros(v_fine.box.shape))
    return _error_report('lv_identities', sides, nodes, tol, pass_fraction, fine_sides,
                         excluded=int(np.count_nonzero(calc.excluded)), details={'p': p, 'eps': eps})


def _error_report(name, sides, region, tol, pass_fraction, fine_sides, excluded, details):
    """Equality report when L already holds node-wise relative errors"""
    errors = sides[0][region]
    fraction = float(np.mean(errors <= tol))
    order = None
    if fine_sides is not None:
        fine_errors = _coarse_view(fine_sides[0])[region]
        coarse_agg, fine_agg = _aggregate(errors), _aggregate(fine_errors)
        floor = Config.EXACT_TOL
        order = float('inf') if fine_agg <= floor else convergence_order(coarse_agg, fine_agg, floor)
    passed = fraction >= pass_fraction and (order is None or order >= MIN_ORDER)
    info = {'pass_fraction': fraction, 'required_fraction': pass_fraction, 'rms_error': _aggregate(errors)}
    info.update(details)
    report = CheckReport(name=name, evaluated=int(errors.size), worst=float(np.max(errors)),
                         tolerance=tol, passed=passed, order=order, excluded=excluded, details=info)
    record_report(report)
    return report


# =============================================================================
# INEQUALITIES
# =============================================================================

def check_kato(v: ScalarField, p: float, eps: float, c: float = 2.0, n: int = 1,
               region: np.ndarray = None) -> CheckReport:
    """2|grad v|^2 |rough Hessian|^2 >= (1/2)(1 + (p-1)^2/(2n)) <nu, grad |grad v|^2>^2"""
    _check_p(p)
    calc = FieldCalculus(v, p, eps)
    nodes = _region(v, calc.excluded, region)
    lhs = 2.0 * calc.grad.norm_squared() * calc.hessian_sq
    along = calc.nu.inner(calc.grad_of_grad_sq)
    rhs = 0.5 * (1.0 + (p - 1.0) ** 2 / (2.0 * n)) * along * along
    return _inequality_report('kato', lhs, rhs, nodes, v.box.h, c,
                              excluded=int(np.count_nonzero(calc.excluded)), details={'p': p, 'eps': eps})


def check_bochner_inequality(v: ScalarField, p: float, eps: float, c: float = 2.0, n: int = 1,
                             region: np.ndarray = None) -> CheckReport:
    """Lower bound for L_v(|grad v|^2 + (T v)^2)"""
    _check_p(p)
    calc = FieldCalculus(v, p, eps)
    nodes = _region(v, calc.excluded, region)

    Tv = calc.Tv.values
    lhs = calc.apply_L(calc.grad_sq.values + Tv * Tv)

    gT2 = calc.grad_Tv.norm_squared()
    along_T = calc.nu.inner(calc.grad_Tv)
    gf2 = calc.grad_of_grad_sq.norm_squared()
    along_f = calc.nu.inner(calc.grad_of_grad_sq)
    rhs = (1.5 * (p - 1.0) * calc.power(p - 2.0) * gT2
           - 8.0 * calc.power(p)
           + (2.0 - p) * calc.power(p - 2.0) * (gT2 - along_T ** 2)
           - 0.5 * (2.0 - p) * calc.power(p - 4.0) * (gf2 - along_f ** 2)
           + (0.5 * (p - 1.0) + (p - 1.0) ** 2 / (4.0 * n)) * calc.power(p - 4.0) * along_f ** 2)
    return _inequality_report('bochner_inequality', lhs, rhs, nodes, v.box.h, c,
                              excluded=int(np.count_nonzero(calc.excluded)), details={'p': p, 'eps': eps})


# =============================================================================
# SOLVER-SIDE CHECKS
# =============================================================================

def check_boundary_gradient(sol, R0: float, K_used: float = None, k_rule: str = 'quartic',
                            tol: float = None) -> CheckReport:
    """
    On the boundary layer: |grad_0 v| <= 4K/(R0(p-1)) (1 + tol) and
    |T v| <= 8K/(R0^2 (p-1)) (1 + tol); tol defaults to the layer offset 3h/R0.
    """
    v = sol.v
    mask = v.mask
    p = sol.p
    K = cf.resolve_K(k_rule, p, sol.eps, R0) if K_used is None else K_used
    tol = Config.STENCIL_MARGIN * v.box.h / R0 if tol is None else tol
    layer = boundary_layer(mask)
    if not np.any(layer):
        raise EmptyEvaluationSetError('boundary_gradient')

    xv, yv, _ = frame_derivatives(v.values, v.box, 0.0)
    grad0 = np.sqrt(xv * xv + yv * yv)[layer]
    Tv = np.abs(vertical_derivative(v.values, v.box))[layer]
    grad_bound = 4.0 * K / (R0 * (p - 1.0))
    t_bound = 8.0 * K / (R0 * R0 * (p - 1.0))
    ratio = max(float(np.max(grad0)) / grad_bound, float(np.max(Tv)) / t_bound)
    report = CheckReport(
        name='boundary_gradient', evaluated=int(np.count_nonzero(layer)), worst=ratio,
        tolerance=1.0 + tol, passed=ratio <= 1.0 + tol, kind=CheckKind.INEQUALITY,
        details={'grad_max': float(np.max(grad0)), 'grad_bound': grad_bound,
                 't_max': float(np.max(Tv)), 't_bound': t_bound, 'K': K, 'p': p, 'k_rule': k_rule},
    )
    note = None if K_used is not None else cf.k_rule_note(k_rule, sol.eps)
    if note:
        report.details['k_rule_note'] = note
    record_report(report)
    return report


def _log_gradient_maxima(sol, Q: int) -> dict:
    v = sol.v
    mask = v.mask
    p = sol.p
    nodes = evaluation_nodes(mask)
    layer = boundary_layer(mask)
    if not np.any(nodes) or not np.any(layer):
        raise EmptyEvaluationSetError('differential_harnack')
    values = np.where(v.values > 0, v.values, np.nan)
    full = (p - 1.0) * frame_gradient_eps(v, sol.eps).norm() / values
    vertical = (p - 1.0) * np.abs(vertical_derivative(v.values, v.box)) / values
    return {
        'p': p,
        'M_p': float(np.nanmax(full[nodes])),
        'M_bar': float(np.nanmax(full[layer])),
        'M_star': float(np.nanmax(vertical[layer])),
        'vertical_interior': float(np.nanmax(vertical[nodes] ** 2)),
        'vertical_layer': float(np.nanmax(vertical[layer] ** 2)),
    }


def check_differential_harnack(sols: Sequence, tol: float = 0.05, Q: int = 4,
                               stability: float = 2.0) -> CheckReport:
    """
    (a) interior max of (p-1)^2 (Tv)^2 / v^2 within (1 + tol) of its boundary-layer max,
    (b) M_p^2 <= M_bar^2 + 5Q M_star^2 + 4Q + tol, M_bar and M_star taken over every p,
    (c) max M_p / min M_p <= stability across the continuation.
    """
    rows = [_log_gradient_maxima(sol, Q) for sol in sols]
    if not rows:
        raise EmptyEvaluationSetError('differential_harnack')
    # Boundary-layer constants are sups over the whole continuation
    M_bar = max(row['M_bar'] for row in rows)
    M_star = max(row['M_star'] for row in rows)
    bound = M_bar ** 2 + 5.0 * Q * M_star ** 2 + 4.0 * Q
    worst = -np.inf
    vertical_ok = full_ok = True
    for row in rows:
        worst = max(worst, row['M_p'] ** 2 - bound)
        vertical_ok &= row['vertical_interior'] <= row['vertical_layer'] * (1.0 + tol)
        full_ok &= row['M_p'] ** 2 <= bound + tol
    M = [row['M_p'] for row in rows]
    spread = max(M) / min(M) if min(M) > 0 else float('inf')
    stable = spread <= stability
    report = CheckReport(
        name='differential_harnack', evaluated=len(rows), worst=float(worst), tolerance=tol,
        passed=bool(vertical_ok and full_ok and stable), kind=CheckKind.INEQUALITY,
        details={'vertical_ok': bool(vertical_ok), 'full_ok': bool(full_ok), 'spread': spread,
                 'M_bar': M_bar, 'M_star': M_star, 'bound': bound, 'per_p': rows},
    )
    record_report(report)
    return report


def check_two_sided_u(u: ScalarField, eps: float, Rstar: float, Rbar: float,
                      g0=(0.0, 0.0, 0.0), Q: int = 4, slope_tol: float = 0.1) -> CheckReport:
    """Minimal C0, Chat >= 1 for the logarithmic envelopes and the slope of u against log ||g||"""
    nodes = evaluation_nodes(u.mask) if u.mask is not None else interior_nodes(u.box)
    r = gauge_distance(u.box, g0)
    nodes = nodes & np.isfinite(u.values) & (r > 0)
    if not np.any(nodes):
        raise EmptyEvaluationSetError('two_sided_u')
    log_r = np.log(r[nodes])
    values = u.values[nodes]

    log_C0 = max(0.0, float(np.max((Q - 1) * (log_r - np.log(Rbar)) - values)))
    excess = float(np.max(values - (Q - 1) * (log_r - np.log(Rstar))))
    if eps > 0:
        log_Chat = max(0.0, excess / eps ** 4)
        upper_ok = True
    else:
        log_Chat = 0.0
        upper_ok = excess <= Config.STENCIL_MARGIN * u.box.h * (Q - 1) / Rstar
    slope = float(np.polyfit(log_r, values, 1)[0])
    slope_ok = abs(slope - (Q - 1)) <= slope_tol * (Q - 1)
    report = CheckReport(
        name='two_sided_u', evaluated=int(values.size), worst=abs(slope - (Q - 1)) / (Q - 1),
        tolerance=slope_tol, passed=bool(slope_ok and upper_ok), kind=CheckKind.INEQUALITY,
        details={'slope': slope, 'target_slope': Q - 1, 'log_C0': log_C0, 'log_Chat': log_Chat,
                 'C0': float(np.exp(min(log_C0, 700.0))), 'Chat': float(np.exp(min(log_Chat, 700.0))),
                 'upper_ok': bool(upper_ok)},
    )
    record_report(report)
    return report


def check_pointwise_bounds(sol, Rstar: float, Rbar: float, Q: int = 4, tol: float = 1e-2) -> CheckReport:
    """Fitted Chat, C0 >= 1 for Chat^(-eps^4/(p-1)) (r/R*)^-gamma <= v <= C0^(1/(p-1)) (r/Rbar)^-gamma"""
    v = sol.v
    p, eps = sol.p, sol.eps
    nodes = evaluation_nodes(v.mask) & (v.values > 0)
    if not np.any(nodes):
        raise EmptyEvaluationSetError('pointwise_bounds')
    gamma = cf.decay_exponent(p, Q)
    log_r = np.log(gauge_distance(v.box, v.mask.center)[nodes])
    log_v = np.log(v.values[nodes])

    lower_gap = float(np.max(-gamma * (log_r - np.log(Rstar)) - log_v))
    log_C0 = max(0.0, float((p - 1.0) * np.max(log_v + gamma * (log_r - np.log(Rbar)))))
    if eps > 0:
        log_Chat = max(0.0, (p - 1.0) * lower_gap / eps ** 4)
        lower_ok = True
    else:
        log_Chat = 0.0
        lower_ok = lower_gap <= tol
    report = CheckReport(
        name='pointwise_bounds', evaluated=int(np.count_nonzero(nodes)), worst=lower_gap,
        tolerance=tol, passed=bool(lower_ok and np.isfinite(log_C0)), kind=CheckKind.INEQUALITY,
        details={'log_Chat': log_Chat, 'log_C0': log_C0, 'p': p, 'eps': eps},
    )
    record_report(report)
    return report


def check_exact_potential(sol, Rstar: float, r_min: float, r_max: float, tol: float = 0.02,
                          Q: int = 4) -> CheckReport:
    """Relative max error of v against the exact power on the annulus r_min <= ||g|| <= r_max"""
    v = sol.v
    r = gauge_distance(v.box, v.mask.center)
    nodes = v.mask.interior & (r >= r_min) & (r <= r_max)
    if not np.any(nodes):
        raise EmptyEvaluationSetError('exact_potential')
    exact = (r[nodes] / Rstar) ** (-cf.decay_exponent(sol.p, Q))
    error = float(np.max(np.abs(v.values[nodes] - exact) / exact))
    report = CheckReport(name='exact_potential', evaluated=int(np.count_nonzero(nodes)), worst=error,
                         tolerance=tol, passed=error <= tol,
                         details={'r_min': r_min, 'r_max': r_max, 'p': sol.p,
                                  'max_principle_violation': getattr(sol, 'max_principle_violation', 0.0),
                                  'clamped_nodes': getattr(sol, 'clamped_nodes', 0)})
    record_report(report)
    return report


def check_imcf_equation(u: ScalarField, p: float, eps: float, tol: float = 5e-2,
                        pass_fraction: float = 0.99, region: np.ndarray = None) -> CheckReport:
    """div(|grad u|^(p-2) grad u) against |grad u|^p"""
    grad = frame_gradient_eps(u, eps)
    g2 = grad.norm_squared()
    flat = g2 == 0.0
    with np.errstate(divide='ignore'):
        weight = np.where(flat, 0.0, g2 ** ((p - 2.0) / 2.0))
    L = divergence_eps(grad.scaled(weight), eps).values
    R = g2 ** (p / 2.0)
    excluded = stencil_halo(flat)
    nodes = _region(u, excluded, region)
    return _equality_report('imcf_equation', (L, R), nodes, tol, pass_fraction,
                            excluded=int(np.count_nonzero(excluded)), details={'p': p, 'eps': eps})


# =============================================================================
# CLOSED-FORM CHECKS
# =============================================================================

def _annulus(box: Box, r_min: float, r_max: float) -> np.ndarray:
    r = gauge_distance(box)
    return (r >= r_min) & (r <= r_max) & interior_nodes(box)


def _plap_grid_error(p: float, alpha: float, box: Box, r_min: float, r_max: float):
    x, y, t = box.coords
    barrier = PowerBarrier(GroupPoint.origin(), 1.0, alpha)
    phi = ScalarField(cf.phi_value_arrays(barrier, x, y, t), box)
    grid = p_laplace_residual(phi, p, 0.0).values
    exact = cf.plap0_phi_closed_arrays(alpha, p, x, y, t)
    region = _annulus(box, r_min, r_max)
    if p < 2.0:
        region &= np.sqrt(x * x + y * y) >= 4.0 * box.h
    return np.abs(grid - exact), region


def check_closed_form_plap(p: float, alpha: float, box: Box, r_min: float = 1.2, r_max: float = 2.5,
                           tol: float = 5e-3, refine: bool = True) -> CheckReport:
    """Grid horizontal p-Laplacian of N^alpha against the closed form (absolute max error)"""
    error, region = _plap_grid_error(p, alpha, box, r_min, r_max)
    if not np.any(region):
        raise EmptyEvaluationSetError('closed_form_plap')
    worst = float(np.max(error[region]))
    order = None
    if refine:
        fine_error, _ = _plap_grid_error(p, alpha, box.refined(), r_min, r_max)
        order = convergence_order(worst, float(np.max(_coarse_view(fine_error)[region])))
    passed = worst <= tol and (order is None or order >= MIN_ORDER)
    report = CheckReport(name='closed_form_plap', evaluated=int(np.count_nonzero(region)), worst=worst,
                         tolerance=tol, passed=passed, order=order,
                         details={'p': p, 'alpha': alpha, 'h': box.h})
    record_report(report)
    return report


def _n_derivative_sides(box: Box):
    x, y, t = box.coords
    N = x ** 4 + 2 * x * x * y * y + y ** 4 + 16.0 * t * t
    xn, yn, _ = frame_derivatives(N, box, 0.0)
    tn = vertical_derivative(N, box)
    exact = cf.n_derivative_arrays(x, y, t)
    return np.stack([xn, yn, tn]), np.stack(exact)


def check_closed_form_derivatives(box: Box, tol: float = 1e-2, pass_fraction: float = 1.0,
                                  refine: bool = True) -> CheckReport:
    """X N, Y N, T N on the grid against the closed forms"""
    region = interior_nodes(box)
    L, R = _n_derivative_sides(box)
    errors = np.max([_relative_errors(L[k], R[k], region) for k in range(3)], axis=0)
    fraction = float(np.mean(errors <= tol))
    order = None
    if refine:
        fine = box.refined()
        Lf, Rf = _n_derivative_sides(fine)
        fine_errors = np.max([_relative_errors(_coarse_view(Lf[k]), _coarse_view(Rf[k]), region)
                              for k in range(3)], axis=0)
        order = convergence_order(_aggregate(errors), _aggregate(fine_errors))
    passed = fraction >= pass_fraction and (order is None or order >= MIN_ORDER)
    report = CheckReport(name='closed_form_derivatives', evaluated=int(errors.size),
                         worst=float(np.max(errors)), tolerance=tol, passed=passed, order=order,
                         details={'pass_fraction': fraction, 'h': box.h})
    record_report(report)
    return report


def check_subsolution_and_barriers(p: float, eps: float, R0: float = 1.0, count: int = 100_000,
                                   rng: np.random.Generator = None, k_rule: str = 'quartic',
                                   r_max: float = 10.0, sol=None, tol: float = 1e-2,
                                   Q: int = 4) -> CheckReport:
    """
    Sign of the three-term decomposition at sampled points with ||g|| >= R0
    and, when a solution is supplied, v >= barrier node-wise outside the obstacle.
    """
    rng = rng if rng is not None else np.random.default_rng(Config.DEFAULT_SEED)
    K = cf.resolve_K(k_rule, p, eps, R0, Q)
    alpha = -K / (p - 1.0)
    rows = cf.sample_exterior(GroupPoint.origin(), R0, r_max, count, rng)

    violations, relative = cf.subsolution_margins(alpha, p, eps, rows, Q)

    details = {'K': K, 'alpha': alpha, 'k_rule': k_rule, 'violations': violations,
               'p': p, 'eps': eps, 'R0': R0}
    note = cf.k_rule_note(k_rule, eps)
    if note:
        details['k_rule_note'] = note
        logger.warning(note, extra={'extra_data': {'violations': violations, 'p': p, 'eps': eps}})
    passed = violations == 0
    if sol is not None:
        v = sol.v
        barrier = PowerBarrier(GroupPoint.from_array(v.mask.center), R0, alpha)
        values = cf.phi_value_arrays(barrier, *v.box.coords)
        nodes = v.mask.interior
        gap = float(np.max(values[nodes] - v.values[nodes]))
        details['barrier_gap'] = gap
        passed = passed and gap <= tol
    report = CheckReport(name='subsolution_and_barriers', evaluated=int(count),
                         worst=float(np.min(relative)), tolerance=tol, passed=passed,
                         kind=CheckKind.INEQUALITY, details=details)
    record_report(report)
    return report


# =============================================================================
# INFORMATIONAL MEASUREMENTS
# =============================================================================

def _ball_nodes(box: Box, center, r: float) -> np.ndarray:
    return gauge_distance(box, center) < r


def harnack_ratio(sol, centers: Iterable, r: float) -> CheckReport:
    """sup / inf of v on B_r(c) for centres with B_2r(c) inside the domain"""
    v = sol.v
    ratios: List[float] = []
    used = []
    for center in centers:
        outer_ball = _ball_nodes(v.box, center, 2.0 * r)
        if not np.any(outer_ball) or not np.all(v.mask.interior[outer_ball]):
            continue
        inner = v.values[_ball_nodes(v.box, center, r)]
        if inner.size == 0 or np.min(inner) <= 0:
            continue
        ratios.append(float(np.max(inner) / np.min(inner)))
        used.append(list(center))
    report = CheckReport(name='harnack_ratio', evaluated=len(ratios),
                         worst=max(ratios) if ratios else float('nan'), tolerance=float('nan'),
                         passed=True, kind=CheckKind.INFORMATIONAL,
                         details={'r': r, 'ratios': ratios, 'centers': used, 'p': sol.p})
    record_report(report)
    return report


def gradient_ratio(sol, center, r: float, theta: float = 0.5) -> CheckReport:
    """max |grad v| on B_(theta r) over the p-mean of |grad v| on B_r"""
    if not 0 < theta < 1:
        raise InvalidParameterError('theta', theta, 'a real in (0, 1)')
    v = sol.v
    grad = frame_gradient_eps(v, sol.eps).norm()
    outer = _ball_nodes(v.box, center, r) & v.mask.interior
    inner = _ball_nodes(v.box, center, theta * r) & v.mask.interior
    if not np.any(inner):
        raise EmptyEvaluationSetError('gradient_ratio')
    vol = node_volumes(v.box)
    p_mean = float((np.sum(grad[outer] ** sol.p * vol[outer]) / np.sum(vol[outer])) ** (1.0 / sol.p))
    ratio = float(np.max(grad[inner])) / p_mean if p_mean > 0 else float('inf')
    report = CheckReport(name='gradient_ratio', evaluated=int(np.count_nonzero(outer)), worst=ratio,
                         tolerance=float('nan'), passed=bool(np.isfinite(ratio)),
                         kind=CheckKind.INFORMATIONAL,
                         details={'r': r, 'theta': theta, 'p': sol.p, 'eps': sol.eps})
    record_report(report)
    return report


def weak_sigma_norm(v: ScalarField, params: WeakNormParams) -> float:
    """max over rho of rho^sigma |{v > rho}| with node-volume measure"""
    vol = node_volumes(v.box)
    values = v.values
    if v.mask is not None:
        keep = ~v.mask.obstacle
        values, vol = values[keep], vol[keep]
    else:
        values, vol = values.ravel(), vol.ravel()
    order = np.argsort(values)[::-1]
    sorted_values = values[order]
    cumulative = np.cumsum(vol[order])
    best = 0.0
    for rho in params.rho_grid:
        count = int(np.searchsorted(-sorted_values, -rho, side='left'))
        measure = float(cumulative[count - 1]) if count > 0 else 0.0
        best = max(best, rho ** params.sigma_exp * measure)
    return best


def check_weak_norm_stability(norms_by_p: Dict[float, float], factor: float = 3.0) -> CheckReport:
    values = [v for v in norms_by_p.values() if v > 0]
    spread = max(values) / min(values) if values else float('inf')
    report = CheckReport(name='weak_norm_stability', evaluated=len(norms_by_p), worst=spread,
                         tolerance=factor, passed=spread <= factor, kind=CheckKind.INEQUALITY,
                         details={str(k): v for k, v in sorted(norms_by_p.items())})
    record_report(report)
    return report


def check_flow_slopes(slopes: dict, Q: int = 4, tol: float = 0.1) -> CheckReport:
    target = 1.0 / (Q - 1)
    worst = max(abs(slopes['slope_inner'] - target), abs(slopes['slope_outer'] - target)) / target
    report = CheckReport(name='flow_slopes', evaluated=int(slopes.get('levels', 0)), worst=worst,
                         tolerance=tol, passed=worst <= tol, details=dict(slopes))
    record_report(report)
    return report


def check_eps_trend(distances: Dict[float, float]) -> CheckReport:
    """Distances to the eps = 0 solution must shrink strictly as eps decreases"""
    ordered = [distances[eps] for eps in sorted(distances)]
    steps = np.diff(ordered)
    worst = float(np.min(steps)) if steps.size else 0.0
    report = CheckReport(name='eps_trend', evaluated=len(ordered), worst=worst, tolerance=0.0,
                         passed=bool(np.all(steps > 0)), kind=CheckKind.INEQUALITY,
                         details={f"{eps:g}": d for eps, d in sorted(distances.items())})
    record_report(report)
    return report


# =============================================================================
# NEGATIVE CONTROL
# =============================================================================

def perturbed_field(v: ScalarField, amplitude: float = 0.05, seed: int = None) -> ScalarField:
    """v plus a smooth sine product of relative size `amplitude` with a non-constant Laplacian"""
    rng = np.random.default_rng(Config.DEFAULT_SEED if seed is None else seed)
    x, y, t = v.box.coords
    kx, ky = rng.uniform(1.0, 2.0, 2) * np.pi / v.box.Lxy
    kt = rng.uniform(1.0, 2.0) * np.pi / v.box.Lt
    phases = rng.uniform(0.0, 2.0 * np.pi, 3)
    scale = amplitude * float(np.max(np.abs(v.values)) or 1.0)
    bump = scale * np.sin(kx * x + phases[0]) * np.sin(ky * y + phases[1]) * np.sin(kt * t + phases[2])
    return v.with_values(v.values + bump)
