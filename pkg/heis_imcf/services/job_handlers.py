"""
Job Handlers
============
Handlers for the sweep jobs of the command line, one job per (p, eps) or eps.

Registered job types:
1. barrier.samples      - three-term decomposition and p-Laplacian columns on samples
2. solve.continuation   - p-continuation with field and diagnostics output
3. flow.levels          - level-set radii of u against the in/out sphere laws
4. verify.suite         - the identity and inequality suite on solver output
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from config import Config
from heis_imcf.api.errors import ConfigError, EmptyEvaluationSetError, NonConvergedError
from heis_imcf.models.barrier_models import PowerBarrier
from heis_imcf.models.geometry_models import GroupPoint
from heis_imcf.models.grid_models import Box, DomainMask, ScalarField
from heis_imcf.models.report_models import CheckKind, CheckReport, WeakNormParams
from heis_imcf.models.solver_models import OuterBC, PotentialSolution, SolverConfig
from heis_imcf.services import closed_form_service as cf
from heis_imcf.services import verify_service as vs
from heis_imcf.services.field_io import load_field, save_field, write_json, write_table_csv
from heis_imcf.services.grid_fields import evaluation_nodes
from heis_imcf.services.job_service import register_handler
from heis_imcf.services.obstacle_service import build_domain_mask, parse_obstacle
from heis_imcf.services.solver_service import (
    CapacitarySolver, cosine_bumps, extract_level_radii, fit_flow_constants, fit_level_slopes,
    local_minimality_test, to_imcf,
)

logger = logging.getLogger(__name__)


# =============================================================================
# SHARED HELPERS
# =============================================================================

def field_name(kind: str, eps: float, p: float) -> str:
    return f"{kind}_eps{eps:g}_p{p:g}"


def _box(payload: dict) -> Box:
    box = payload['box']
    return Box(box['Lxy'], box['Lt'], box['m'])


def _problem(payload: dict, box: Box = None):
    box = box or _box(payload)
    mask = build_domain_mask(box, parse_obstacle(payload['obstacle']))
    cfg = SolverConfig.from_dict({**payload.get('solver', {}), 'eps': payload['eps']})
    return mask, cfg


def _meta(payload: dict, box: Box = None, **extra) -> dict:
    box = box or _box(payload)
    meta = {
        'config_hash': payload.get('config_hash', ''),
        'seed': payload.get('seed', Config.DEFAULT_SEED),
        'eps': payload.get('eps'),
        'Lxy': box.Lxy, 'Lt': box.Lt, 'm': 'x'.join(str(k) for k in box.m),
    }
    meta.update(extra)
    return meta


def _out_dir(payload: dict) -> Path:
    out = Path(payload.get('out_dir', Config.OUTPUT_DIR))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _warm_start(resume: Optional[str], eps: float, p: float, box: Box) -> Optional[np.ndarray]:
    if not resume:
        return None
    path = Path(resume)
    if not (path / f"{field_name('v', eps, p)}.json").exists():
        return None
    saved = load_field(path, field_name('v', eps, p))
    if saved.box.m != box.m:
        raise ConfigError(f"Resume field grid {saved.box.m} does not match {box.m}", field='resume')
    logger.info(f"Warm start for eps={eps:g}, p={p:g} from {path}")
    return saved.values


def run_continuation(mask: DomainMask, cfg: SolverConfig, resume: str = None,
                     on_solution: Callable[[PotentialSolution], None] = None) -> List[PotentialSolution]:
    """Continuation down cfg.p_continuation with resume warm starts taking priority"""
    solver = CapacitarySolver(mask, cfg.eps)
    solutions: List[PotentialSolution] = []
    warm, warm_p = None, None
    for p in cfg.p_continuation:
        saved = _warm_start(resume, cfg.eps, p, mask.box)
        if saved is not None:
            sol = solver.solve(cfg.with_p(p), initial=saved, initial_p=p)
        else:
            sol = solver.solve(cfg.with_p(p), initial=warm, initial_p=warm_p)
        solutions.append(sol)
        if on_solution is not None:
            on_solution(sol)
        warm, warm_p = sol.v.values, p
    return solutions


# =============================================================================
# BARRIER
# =============================================================================

BARRIER_HEADER = ['x', 'y', 't', 'I', 'II', 'III', 'sum', 'plap0_closed', 'plap0_fd']


def handle_barrier_samples(payload: dict) -> dict:
    """
    Normalized three-term decomposition at exterior samples, with the closed-form
    horizontal p-Laplacian of the barrier exponent and a finite-difference column
    on the first `fd_samples` rows.
    """
    p, eps = float(payload['p']), float(payload['eps'])
    R0 = float(payload.get('R0', 1.0))
    rng = np.random.default_rng(payload.get('seed', Config.DEFAULT_SEED))
    K = cf.resolve_K(payload.get('k_rule', 'quartic'), p, eps, R0)
    alpha = -K / (p - 1.0)

    rows = cf.sample_exterior(GroupPoint.origin(), R0, float(payload.get('r_max', 10.0)),
                              int(payload.get('samples', 100_000)), rng)
    x, y, t = rows.T
    one, two, three = cf.subsolution_terms_arrays(alpha, p, eps, x, y, t)
    violations, _ = cf.subsolution_margins(alpha, p, eps, rows)
    closed = cf.plap0_phi_closed_arrays(alpha, p, x, y, t)

    fd = np.full(rows.shape[0], np.nan)
    for k in range(min(int(payload.get('fd_samples', 200)), rows.shape[0])):
        fd[k] = cf.plap0_finite_difference(alpha, p, GroupPoint.from_array(rows[k]))

    sphere = cf.sample_gauge_sphere(GroupPoint.origin(), R0, int(payload.get('sphere_samples', 500)), rng)
    bounds = cf.boundary_derivative_bounds(PowerBarrier(GroupPoint.origin(), R0, alpha), p, K, sphere)

    table = np.column_stack([x, y, t, one, two, three, one + two + three, closed, fd])
    name = f"barrier_p{p:g}_eps{eps:g}.csv"
    write_table_csv(_out_dir(payload) / name, BARRIER_HEADER, table.tolist(),
                    meta={'config_hash': payload.get('config_hash', ''), 'seed': payload.get('seed'),
                          'p': p, 'eps': eps, 'R0': R0, 'K': K, 'alpha': alpha, 'normalized': True})
    return {'p': p, 'eps': eps, 'K': K, 'alpha': alpha, 'violations': violations,
            'boundary_bounds': bounds, 'file': name,
            'passed': violations == 0 and bool(bounds['passed'])}


# =============================================================================
# SOLVE
# =============================================================================

def handle_solve_continuation(payload: dict) -> dict:
    mask, cfg = _problem(payload)
    out = _out_dir(payload)
    meta = _meta(payload, mask.box)
    stages: List[dict] = []

    def save(sol: PotentialSolution):
        save_field(sol.v, out, field_name('v', sol.eps, sol.p), meta={**meta, 'p': sol.p})
        if sol.u is not None:
            save_field(sol.u, out, field_name('u', sol.eps, sol.p), meta={**meta, 'p': sol.p})
        stages.append(sol.to_dict())

    try:
        run_continuation(mask, cfg, payload.get('resume'), on_solution=save)
    except NonConvergedError as e:
        partial = e.solution
        if partial is not None:
            save_field(partial.v, out, field_name('v_partial', partial.eps, partial.p),
                       meta={**meta, 'p': partial.p})
            stages.append(partial.to_dict())
        write_json(out / f"diagnostics_eps{cfg.eps:g}.json",
                   {'stages': stages, 'converged': False, 'mask': mask.counts()}, meta=meta)
        e.partial = {'eps': cfg.eps, 'stages': len(stages), 'converged': False}
        raise

    write_json(out / f"diagnostics_eps{cfg.eps:g}.json",
               {'stages': stages, 'converged': True, 'mask': mask.counts()}, meta=meta)
    return {'eps': cfg.eps, 'stages': len(stages), 'converged': True,
            'p_final': stages[-1]['p'], 'residual': stages[-1]['residual_norm']}


# =============================================================================
# FLOW
# =============================================================================

FLOW_HEADER = ['s', 'r_inner', 'r_outer', 'phi_eps', 'psi', 'status', 'crossings']


def _flow_u(payload: dict, mask: DomainMask, cfg: SolverConfig) -> ScalarField:
    if payload.get('mode', 'numeric') == 'exact':
        values = cf.exact_imcf_arrays(mask.center, mask.r_inner, *mask.box.coords)
        return ScalarField(np.where(mask.obstacle, 0.0, values), mask.box, mask)
    final = run_continuation(mask, cfg, payload.get('resume'))[-1]
    return final.u if final.u is not None else to_imcf(final)


def handle_flow_levels(payload: dict) -> dict:
    mask, cfg = _problem(payload)
    u = _flow_u(payload, mask, cfg)
    Rstar, Rbar = mask.r_inner, mask.r_outer
    s_values = [float(s) for s in payload.get('s_values', np.linspace(0.0, 2.0, 9))]

    levels = [extract_level_radii(u, s, mask.center) for s in s_values]
    slopes = fit_level_slopes(levels)
    constants = fit_flow_constants(levels, cfg.eps, Rstar, Rbar)
    phi, psi = cf.inout_radii(np.array(s_values), cfg.eps, Rstar, Rbar, constants['Chat'], constants['C0'])

    rows = [[lv.s, lv.r_inner, lv.r_outer, float(a), float(b), lv.status, lv.crossings]
            for lv, a, b in zip(levels, phi, psi)]
    name = f"flow_eps{cfg.eps:g}.csv"
    meta = _meta(payload, mask.box, mode=payload.get('mode', 'numeric'), Rstar=Rstar, Rbar=Rbar,
                 Chat=constants['Chat'], C0=constants['C0'],
                 slope_inner=slopes['slope_inner'], slope_outer=slopes['slope_outer'])
    write_table_csv(_out_dir(payload) / name, FLOW_HEADER, rows, meta=meta)

    report = vs.check_flow_slopes(slopes)
    return {'eps': cfg.eps, 'file': name, 'slopes': slopes, 'constants': constants,
            'report': report.to_dict(), 'passed': report.passed and constants['inner_ok']}


# =============================================================================
# VERIFY
# =============================================================================

@dataclass
class SuiteContext:
    payload: dict
    mask: DomainMask
    cfg: SolverConfig
    solutions: List[PotentialSolution]
    fine: Optional[PotentialSolution] = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(Config.DEFAULT_SEED))

    @property
    def target(self) -> PotentialSolution:
        """Solution at the configured check exponent (nearest available p)"""
        p = float(self.payload.get('p_check', 1.5))
        return min(self.solutions, key=lambda sol: abs(sol.p - p))

    @property
    def eps(self) -> float:
        return self.cfg.eps

    @property
    def fine_v(self) -> Optional[ScalarField]:
        return None if self.fine is None else self.fine.v

    @property
    def tol(self) -> float:
        return float(self.payload.get('tol', 5e-2))

    @property
    def pass_fraction(self) -> float:
        return float(self.payload.get('pass_fraction', 0.99))


def _negative_control(ctx: SuiteContext) -> CheckReport:
    """Every identity check must fail on a perturbed field"""
    sol = ctx.target
    bumped = vs.perturbed_field(sol.v, float(ctx.payload.get('perturbation', 0.05)), ctx.payload.get('seed'))
    outcomes = {
        'kn_identity': vs.check_kn_identity(bumped, sol.p, ctx.eps, tol=ctx.tol).passed,
        'lv_identities': vs.check_lv_identities(bumped, sol.p, ctx.eps, tol=ctx.tol).passed,
    }
    caught = [name for name, passed in outcomes.items() if not passed]
    report = CheckReport(name='negative_control', evaluated=len(outcomes),
                         worst=float(len(outcomes) - len(caught)), tolerance=0.0,
                         passed=len(caught) == len(outcomes), kind=CheckKind.INEQUALITY,
                         details={'caught': caught})
    return report


def _weak_norms(ctx: SuiteContext) -> CheckReport:
    norms = {sol.p: vs.weak_sigma_norm(sol.v, WeakNormParams.for_exponents(sol.p))
             for sol in ctx.solutions}
    return vs.check_weak_norm_stability(norms, float(ctx.payload.get('weak_norm_factor', 3.0)))


def _minimality(ctx: SuiteContext) -> CheckReport:
    sol = min(ctx.solutions, key=lambda s: s.p)
    u = sol.u if sol.u is not None else to_imcf(sol)
    h = u.box.h
    radius = float(ctx.payload.get('bump_radius', 4.0 * h))
    K = evaluation_nodes(ctx.mask)
    bumps = cosine_bumps(u, K, int(ctx.payload.get('bumps', 50)), radius,
                         float(ctx.payload.get('bump_amplitude', 0.05)), ctx.rng)
    report = local_minimality_test(u, bumps, K, sol.p, ctx.eps, radius)
    vs.record_report(report)
    return report


def _harnack_centers(ctx: SuiteContext) -> List[tuple]:
    if 'harnack_centers' in ctx.payload:
        return [tuple(c) for c in ctx.payload['harnack_centers']]
    x0, y0, t0 = ctx.mask.center
    d = 2.5 * ctx.mask.r_outer
    return [(x0 + d, y0, t0), (x0, y0 + d, t0), (x0 - d, y0, t0)]


def _exact_potential(ctx: SuiteContext) -> Optional[CheckReport]:
    if ctx.eps != 0.0 or ctx.cfg.outer_bc != OuterBC.EXACT_POWER:
        return None
    r_min, r_max = ctx.payload.get('annulus', [1.2 * ctx.mask.r_outer, 3.0 * ctx.mask.r_outer])
    return vs.check_exact_potential(ctx.target, ctx.mask.r_inner, r_min, r_max,
                                    float(ctx.payload.get('oracle_tol', 0.02)))


def _final_u(ctx: SuiteContext) -> ScalarField:
    sol = ctx.solutions[-1]
    return sol.u if sol.u is not None else to_imcf(sol)


SUITE: Dict[str, Callable[[SuiteContext], Optional[CheckReport]]] = {
    'kn_identity': lambda ctx: vs.check_kn_identity(
        ctx.target.v, ctx.target.p, ctx.eps, ctx.fine_v, ctx.tol, ctx.pass_fraction),
    'hessian_cancellation': lambda ctx: None if ctx.eps == 0 else vs.check_hessian_cancellation(
        ctx.target.v, ctx.eps, ctx.fine_v, ctx.tol, ctx.pass_fraction),
    'lv_identities': lambda ctx: vs.check_lv_identities(
        ctx.target.v, ctx.target.p, ctx.eps, ctx.fine_v, ctx.tol, ctx.pass_fraction),
    'kato': lambda ctx: vs.check_kato(ctx.target.v, ctx.target.p, ctx.eps),
    'bochner_inequality': lambda ctx: vs.check_bochner_inequality(ctx.target.v, ctx.target.p, ctx.eps)
    if 0 < ctx.eps else None,
    'negative_control': _negative_control,
    'boundary_gradient': lambda ctx: vs.check_boundary_gradient(
        ctx.target, ctx.mask.r_inner, k_rule=ctx.payload.get('k_rule', 'quartic')),
    'differential_harnack': lambda ctx: vs.check_differential_harnack(ctx.solutions),
    'two_sided_u': lambda ctx: vs.check_two_sided_u(
        _final_u(ctx), ctx.eps, ctx.mask.r_inner, ctx.mask.r_outer, ctx.mask.center),
    'pointwise_bounds': lambda ctx: vs.check_pointwise_bounds(ctx.target, ctx.mask.r_inner, ctx.mask.r_outer),
    'subsolution_and_barriers': lambda ctx: vs.check_subsolution_and_barriers(
        ctx.target.p, ctx.eps, ctx.mask.r_inner, int(ctx.payload.get('samples', 100_000)), ctx.rng,
        ctx.payload.get('k_rule', 'quartic'), sol=ctx.target if ctx.cfg.outer_bc == OuterBC.EXACT_POWER else None),
    'imcf_equation': lambda ctx: vs.check_imcf_equation(_final_u(ctx), ctx.solutions[-1].p, ctx.eps),
    'weak_norm_stability': _weak_norms,
    'exact_potential': _exact_potential,
    'local_minimality': _minimality,
    'harnack_ratio': lambda ctx: vs.harnack_ratio(
        ctx.target, _harnack_centers(ctx), float(ctx.payload.get('harnack_radius', 0.5 * ctx.mask.r_outer))),
    'gradient_ratio': lambda ctx: vs.gradient_ratio(
        ctx.target, _harnack_centers(ctx)[0], float(ctx.payload.get('harnack_radius', 0.5 * ctx.mask.r_outer))),
}


def handle_verify_suite(payload: dict) -> dict:
    mask, cfg = _problem(payload)
    names = payload.get('checks') or list(SUITE)
    unknown = [name for name in names if name not in SUITE]
    if unknown:
        raise ConfigError(f"Unknown check(s): {', '.join(unknown)}", field='checks')

    solutions = run_continuation(mask, cfg, payload.get('resume'))
    ctx = SuiteContext(payload, mask, cfg, solutions,
                       rng=np.random.default_rng(payload.get('seed', Config.DEFAULT_SEED)))
    if payload.get('refine', False):
        fine_mask, _ = _problem(payload, mask.box.refined())
        ctx.fine = _refined_target(fine_mask, cfg, ctx)

    reports: List[dict] = []
    failed: List[str] = []
    for name in names:
        try:
            report = SUITE[name](ctx)
        except EmptyEvaluationSetError as e:
            report = CheckReport(name=name, evaluated=0, worst=float('nan'), tolerance=float('nan'),
                                 passed=False, details={'error': e.message})
        if report is None:
            continue
        reports.append(report.to_dict())
        if not report.passed and report.kind != CheckKind.INFORMATIONAL:
            failed.append(report.name)

    solver = [{'p': sol.p, 'iterations': sol.iterations, 'residual_norm': sol.residual_norm,
               'max_principle_violation': sol.max_principle_violation, 'clamped_nodes': sol.clamped_nodes}
              for sol in solutions]
    name = f"verify_eps{cfg.eps:g}.json"
    write_json(_out_dir(payload) / name,
               {'checks': reports, 'failed': failed, 'passed': not failed, 'solver': solver},
               meta=_meta(payload, mask.box, p_check=ctx.target.p))
    return {'eps': cfg.eps, 'file': name, 'reports': reports, 'failed': failed, 'passed': not failed,
            'solver': solver}


def _refined_target(fine_mask: DomainMask, cfg: SolverConfig, ctx: SuiteContext) -> PotentialSolution:
    """Continuation on the refined grid down to the check exponent"""
    target_p = ctx.target.p
    schedule = tuple(p for p in cfg.p_continuation if p >= target_p)
    fine_cfg = SolverConfig.from_dict({**cfg.to_dict(), 'p_continuation': schedule})
    return run_continuation(fine_mask, fine_cfg)[-1]


register_handler('barrier.samples', handle_barrier_samples)
register_handler('solve.continuation', handle_solve_continuation)
register_handler('flow.levels', handle_flow_levels)
register_handler('verify.suite', handle_verify_suite)
