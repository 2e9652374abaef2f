"""
Capacitary Solver Service
=========================
p-capacitary potentials of gauge-ball obstacles and the IMCF functions
derived from them.

This service provides:
1. Lagged-diffusivity Picard iteration over a decreasing sigma schedule
2. Profile unknown with the obstacle surface extrapolated into ghost nodes
3. Maximum-principle clamp with reporting and the substitution u = (1 - p) log v
4. p-continuation with warm starts and per-p diagnostics
5. Level-set radii of u, their slope fits and fitted flow constants
6. Dilated problems and the local minimality test for J
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from heis_imcf.api.errors import (
    EmptyObstacleError, InvalidParameterError, MaxPrincipleViolationError, NonConvergedError,
    NonPositivePotentialError, TruncatedLevelDataError,
)
from heis_imcf.models.grid_models import DomainMask, ScalarField
from heis_imcf.models.report_models import CheckKind, CheckReport
from heis_imcf.models.solver_models import (
    InitialGuess, LevelRadii, LevelStatus, OuterBC, PotentialSolution, Scheme, SolverConfig,
)
from heis_imcf.services.closed_form_service import decay_exponent, power_potential_arrays
from heis_imcf.services.grid_fields import (
    energy_J, evaluation_nodes, frame_gradient_eps,
)
from heis_imcf.services.group_geometry import gauge_distance_arrays
from heis_imcf.services.linear_solver import PreconditionedCG, Q1FrameStiffness
from heis_imcf.services.obstacle_service import dilate_mask
from heis_imcf.services.observability import metrics, track_performance

logger = logging.getLogger(__name__)

# Lower bound on the extrapolated capacitary distance at ghost nodes
GHOST_FLOOR = 0.5
# Weight of the unit-slope prior, relative to the ghost's squared level deficit
SLOPE_PRIOR = 1.0
PROFILE_FLOOR = 1e-12

# 26-neighbourhood as (a, b, c) steps along (x, y, t)
_NEIGHBOURS = [(a, b, c) for c in (-1, 0, 1) for b in (-1, 0, 1) for a in (-1, 0, 1) if (a, b, c) != (0, 0, 0)]


def _flat(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=float).ravel(order='F')


def _unflat(flat: np.ndarray, shape) -> np.ndarray:
    return flat.reshape(shape, order='F')


class CapacitarySolver:
    """
    Q1 solution of the sigma-regularized p-Laplace problem with v = 1 on
    the obstacle and the configured outer boundary values.

    Scheme.VOXEL minimizes the discrete energy over nodal v. Scheme.PROFILE
    iterates on w = v^(1/gamma), gamma = (Q - p)/(p - 1), which is 1/psi
    for a ball of level function psi. The surface v = 1
    sits between nodes: every OBSTACLE node with a free neighbour is a
    ghost whose capacitary distance 1/w is extrapolated linearly in psi
    from its free neighbours, once per Picard step. Energy monotonicity
    across Picard steps holds for Scheme.VOXEL only; under PROFILE the
    recorded energy is that of v = w^gamma with v = 1 on OBSTACLE.

    One instance caches the Q1 geometry for one (mask, eps) pair.
    """

    def __init__(self, mask: DomainMask, eps: float, Q: int = 4):
        if not np.any(mask.obstacle):
            raise EmptyObstacleError(details={'box': mask.box.metadata()})
        self.mask = mask
        self.eps = float(eps)
        self.Q = Q
        self.stiffness = Q1FrameStiffness(mask.box, eps)
        self.free = _flat(mask.interior).astype(bool)
        self.obstacle = _flat(mask.obstacle).astype(bool)
        self.level = None if mask.level is None else _flat(mask.level)
        self.ghosts, self.neighbours, self.neighbour_free = self._ghost_stencil()

    def _ghost_stencil(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Ghost node indices, their 26 neighbour indices and which neighbours are free"""
        if self.level is None:
            return np.empty(0, dtype=int), np.empty((0, 26), dtype=int), np.empty((0, 26), dtype=bool)
        mx, my, _ = self.mask.box.m
        steps = np.array([a + mx * (b + my * c) for a, b, c in _NEIGHBOURS])
        # OBSTACLE never touches the faces, so every neighbour index is in range
        obstacle = np.flatnonzero(self.obstacle)
        neighbours = obstacle[:, None] + steps[None, :]
        neighbour_free = self.free[neighbours]
        touching = np.any(neighbour_free, axis=1)
        return obstacle[touching], neighbours[touching], neighbour_free[touching]

    def power(self, cfg: SolverConfig) -> float:
        """Exponent with v = w^power for the configured scheme"""
        return decay_exponent(cfg.p, self.Q) if cfg.scheme == Scheme.PROFILE else 1.0

    # -------------------------------------------------------------------------
    # boundary data and initial guesses
    # -------------------------------------------------------------------------

    def _reference_radius(self) -> float:
        return self.mask.r_inner if self.mask.r_inner else self.mask.r_outer

    def dirichlet_values(self, cfg: SolverConfig) -> np.ndarray:
        values = np.zeros(self.mask.box.shape)
        if cfg.outer_bc == OuterBC.EXACT_POWER:
            outer = power_potential_arrays(self.mask.center, self._reference_radius(), cfg.p,
                                           *self.mask.box.coords, Q=self.Q)
            values = np.where(self.mask.outer, outer, 0.0)
        values[self.mask.obstacle] = 1.0
        return values

    def initial_guess(self, cfg: SolverConfig, initial: Optional[np.ndarray] = None,
                      initial_p: Optional[float] = None) -> np.ndarray:
        """
        Potential values to start from.

        `initial` holds the potential of a solve at `initial_p` (default
        cfg.p). Under Scheme.PROFILE a guess from another p keeps its
        profile w and takes the new exponent.
        """
        base = self.dirichlet_values(cfg)
        if initial is not None:
            guess = np.asarray(initial, dtype=float)
            source_p = cfg.p if initial_p is None else float(initial_p)
        else:
            source_p = 2.0 if cfg.initial_guess == InitialGuess.LINEAR_POWER else cfg.p
            guess = power_potential_arrays(self.mask.center, self._reference_radius(), source_p,
                                           *self.mask.box.coords, Q=self.Q)
        if cfg.scheme == Scheme.PROFILE and source_p != cfg.p:
            ratio = decay_exponent(cfg.p, self.Q) / decay_exponent(source_p, self.Q)
            guess = np.maximum(guess, 0.0) ** ratio
        return np.where(self.mask.interior, guess, base)

    # -------------------------------------------------------------------------
    # Picard iteration
    # -------------------------------------------------------------------------

    def weights(self, w_flat: np.ndarray, p: float, sigma: float, power: float = 1.0) -> np.ndarray:
        """Gauss-point weights w^(power - 1) (sigma + |grad v|^2)^((p - 2)/2) for v = w^power"""
        n_cells = self.stiffness.n_cells
        floor = Config.GRADIENT_FLOOR
        if power == 1.0:
            if p == 2.0:
                return np.ones((n_cells, 8))
            g2 = self.stiffness.gradient_squared(w_flat)
            return (sigma + np.maximum(g2, floor * floor)) ** ((p - 2.0) / 2.0)

        wq = np.maximum(self.stiffness.quadrature_values(w_flat), PROFILE_FLOOR)
        scale = wq ** (power - 1.0)
        if p == 2.0:
            return scale
        g2 = power * power * wq ** (2.0 * power - 2.0) * self.stiffness.gradient_squared(w_flat)
        return scale * (sigma + np.maximum(g2, floor * floor)) ** ((p - 2.0) / 2.0)

    def potential(self, w_flat: np.ndarray, power: float) -> np.ndarray:
        """v = w^power (sign kept), 1 on OBSTACLE"""
        v = w_flat if power == 1.0 else np.sign(w_flat) * np.abs(w_flat) ** power
        return np.where(self.obstacle, 1.0, v)

    def extrapolate_ghosts(self, w_flat: np.ndarray, damping: float = 1.0) -> None:
        """
        Move ghost values toward the line 1/w = 1 + s (level - 1) fitted
        to the free neighbours.

        The fit is pulled toward s = 1 (exact for a lone ball) with weight
        SLOPE_PRIOR (level_ghost - 1)^2, so ghosts whose free neighbours
        sit almost on the surface do not amplify noise.
        """
        if self.ghosts.size == 0:
            return
        deficit = self.level[self.ghosts] - 1.0
        prior = SLOPE_PRIOR * deficit * deficit
        offset = np.where(self.neighbour_free, self.level[self.neighbours] - 1.0, 0.0)
        distance = 1.0 / np.maximum(w_flat[self.neighbours], PROFILE_FLOOR)
        slope = (np.sum(offset * (distance - 1.0), axis=1) + prior) / (np.sum(offset * offset, axis=1) + prior)
        target = np.maximum(1.0 + deficit * np.maximum(slope, 0.0), GHOST_FLOOR)
        w_flat[self.ghosts] += damping * (1.0 / target - w_flat[self.ghosts])

    def _residual(self, A_ff, A_fd, w_flat: np.ndarray):
        b = -(A_fd @ w_flat[~self.free])
        r = A_ff @ w_flat[self.free] - b
        scale = np.linalg.norm(b)
        return b, float(np.linalg.norm(r) / scale) if scale > 0 else float(np.linalg.norm(r))

    @track_performance('solve_capacitary')
    def solve(self, cfg: SolverConfig, initial: Optional[np.ndarray] = None,
              initial_p: Optional[float] = None) -> PotentialSolution:
        cfg.validate()
        if cfg.eps != self.eps:
            raise InvalidParameterError('eps', cfg.eps, f'the solver metric eps={self.eps}')
        shape = self.mask.box.shape
        power = self.power(cfg)
        w = np.maximum(_flat(self.initial_guess(cfg, initial, initial_p)), 0.0) ** (1.0 / power)

        ghosts = cfg.scheme == Scheme.PROFILE and self.ghosts.size > 0
        if cfg.scheme == Scheme.PROFILE and not ghosts:
            logger.warning("Mask carries no obstacle level function; the surface stays on the nodes")
        if ghosts:
            self.extrapolate_ghosts(w)

        linear = cfg.p == 2.0 and power == 1.0
        cg_solver = PreconditionedCG(rtol=cfg.cg_tol, maxiter=cfg.max_cg_iter)
        schedule = cfg.sigma_schedule[-1:] if cfg.p == 2.0 else cfg.sigma_schedule
        history: List[dict] = []
        iterations = 0
        residual = np.inf
        converged = True

        for stage, sigma in enumerate(schedule):
            last_stage = stage == len(schedule) - 1
            stage_tol = cfg.picard_tol if last_stage else max(cfg.picard_tol, sigma)
            stage_done = False

            for step in range(cfg.max_picard + 1):
                if ghosts:
                    self.extrapolate_ghosts(w, cfg.ghost_damping)
                A = self.stiffness.assemble(self.weights(w, cfg.p, sigma, power))
                A_ff, A_fd = PreconditionedCG.split(A, self.free)
                b, residual = self._residual(A_ff, A_fd, w)
                energy = self.stiffness.energy(self.potential(w, power), cfg.p, sigma)
                history.append({'sigma': sigma, 'step': step, 'residual': residual, 'energy': energy})
                logger.debug("Picard step", extra={'extra_data': history[-1]})

                if residual < stage_tol:
                    stage_done = True
                    break
                if step == cfg.max_picard:
                    break

                # Inexact inner solves: one decade below the current outer residual
                rtol = cfg.cg_tol if linear else max(cfg.cg_tol, cfg.cg_forcing * residual)
                w_free, _, cg_iterations = cg_solver.solve(A_ff, b, x0=w[self.free], rtol=rtol)
                w[self.free] = w_free
                iterations += 1
                history[-1]['cg_iterations'] = cg_iterations

            if not stage_done:
                if last_stage:
                    converged = False
                else:
                    logger.warning(f"Stage sigma={sigma:.1e} stopped at residual {residual:.3e}")

        metrics.increment('picard_iterations', iterations)
        values = _unflat(self.potential(w, power), shape)
        violation, clamped = clamp_to_boundary_range(values, self.mask, cfg.max_principle_tol)
        solution = self._package(values, cfg, residual, iterations, converged, history, violation, clamped)

        if not converged:
            metrics.increment('solver_non_converged')
            raise NonConvergedError(
                f"Picard budget exhausted at p={cfg.p}, eps={cfg.eps}: residual {residual:.3e}",
                solution=solution,
                details={'residual': residual, 'iterations': iterations},
            )

        if violation > cfg.clamp_tol:
            metrics.increment('max_principle_violations')
            raise MaxPrincipleViolationError(violation, cfg.clamp_tol, 'INTERIOR (before clamping)')
        if clamped:
            metrics.increment('clamped_solutions')
            logger.warning(f"Clamped {clamped} interior nodes into the boundary range at p={cfg.p}",
                           extra={'extra_data': {'max_principle_violation': violation, 'eps': cfg.eps}})

        check_maximum_principle(solution.v, self.mask, cfg.max_principle_tol)
        logger.info(f"Solved p={cfg.p} eps={cfg.eps} in {iterations} linear solves",
                    extra={'extra_data': {'residual': residual, 'energy': solution.energy,
                                          'scheme': cfg.scheme, 'ghosts': int(self.ghosts.size)}})
        return solution

    def _package(self, values, cfg, residual, iterations, converged, history,
                 violation: float = 0.0, clamped: int = 0) -> PotentialSolution:
        field = ScalarField(values, self.mask.box, self.mask)
        grad = frame_gradient_eps(field, cfg.eps).norm()
        floor = Config.GRADIENT_FLOOR * float(np.max(np.abs(values)))
        excluded = self.mask.interior & (grad < floor)

        region = evaluation_nodes(self.mask)
        safe_v = np.where(values > 0, values, np.inf)
        ratio = (cfg.p - 1.0) * grad / safe_v
        max_log_gradient = float(np.max(ratio[region])) if np.any(region) else float('nan')
        history = list(history) + [{'max_log_gradient': max_log_gradient,
                                    'max_principle_violation': violation, 'clamped_nodes': clamped}]

        energy = self.stiffness.energy(_flat(values), cfg.p, cfg.sigma_schedule[-1])
        u = None
        if converged and np.all(values[~self.mask.outer] > 0):
            u = to_imcf_values(values, self.mask, cfg.p)
        return PotentialSolution(
            v=field.with_values(values, excluded),
            u=None if u is None else ScalarField(u, self.mask.box, self.mask),
            p=cfg.p, eps=cfg.eps,
            residual_norm=residual, energy=energy, iterations=iterations,
            excluded_nodes=int(np.count_nonzero(excluded)),
            converged=converged, history=history,
            max_principle_violation=violation, clamped_nodes=clamped,
        )


def solve_capacitary(mask: DomainMask, cfg: SolverConfig, initial: np.ndarray = None) -> PotentialSolution:
    return CapacitarySolver(mask, cfg.eps).solve(cfg, initial)


# =============================================================================
# MAXIMUM PRINCIPLE AND IMCF SUBSTITUTION
# =============================================================================

def clamp_to_boundary_range(values: np.ndarray, mask: DomainMask, tol: float) -> Tuple[float, int]:
    """
    Clamp INTERIOR values into the range of the Dirichlet data, in place,
    when they leave it by more than tol.

    Returns (raw violation, clamped node count).
    """
    inner = mask.interior
    if not np.any(inner):
        return 0.0, 0
    boundary = values[mask.dirichlet]
    lo, hi = float(np.min(boundary)), float(np.max(boundary))
    violation = max(float(np.max(values[inner])) - hi, lo - float(np.min(values[inner])), 0.0)
    if violation <= tol:
        return violation, 0
    outside = inner & ((values < lo) | (values > hi))
    values[outside] = np.clip(values[outside], lo, hi)
    return violation, int(np.count_nonzero(outside))


def check_maximum_principle(v: ScalarField, mask: DomainMask, tol: float) -> float:
    """
    Interior values must stay within the range of the Dirichlet data.

    Returns the signed violation (<= tol on success).
    """
    boundary = v.values[mask.dirichlet]
    inner = v.values[mask.interior]
    if inner.size == 0:
        return 0.0
    violation = max(float(np.max(inner) - np.max(boundary)), float(np.min(boundary) - np.min(inner)))
    if violation > tol:
        where = 'above' if np.max(inner) - np.max(boundary) >= np.min(boundary) - np.min(inner) else 'below'
        raise MaxPrincipleViolationError(violation, tol, f"INTERIOR ({where} the boundary range)")
    return violation


def to_imcf_values(values: np.ndarray, mask: DomainMask, p: float, floor: float = None) -> np.ndarray:
    inner = ~mask.outer
    v = values if floor is None else np.maximum(values, floor)
    bad = inner & ~(v > 0)
    if np.any(bad):
        raise NonPositivePotentialError(int(np.count_nonzero(bad)), float(np.min(values[inner])))

    u = np.zeros_like(values)
    u[inner] = (1.0 - p) * np.log(v[inner])
    u[mask.obstacle] = 0.0

    outer = mask.outer
    positive = outer & (v > 0)
    u[positive] = (1.0 - p) * np.log(v[positive])
    u[outer & ~positive] = np.max(u[inner | positive])
    return u


def to_imcf(sol: PotentialSolution, floor: float = None) -> ScalarField:
    """u = (1 - p) log v; u = 0 on OBSTACLE"""
    mask = sol.v.mask
    return ScalarField(to_imcf_values(sol.v.values, mask, sol.p, floor), sol.v.box, mask)


# =============================================================================
# CONTINUATION
# =============================================================================

def continuation(mask: DomainMask, cfg: SolverConfig, initial: np.ndarray = None) -> List[PotentialSolution]:
    """
    Solve down cfg.p_continuation, warm-starting each p from the previous one.

    `initial` is taken as a potential for the first p of the list.
    """
    solver = CapacitarySolver(mask, cfg.eps)
    solutions: List[PotentialSolution] = []
    warm, warm_p = initial, cfg.p_continuation[0]
    for p in cfg.p_continuation:
        sol = solver.solve(cfg.with_p(p), initial=warm, initial_p=warm_p)
        logger.info(f"Continuation p={p}", extra={'extra_data': {
            'iterations': sol.iterations, 'max_log_gradient': sol.max_log_gradient()}})
        solutions.append(sol)
        warm, warm_p = sol.v.values, p
    return solutions


def eps_sweep(mask: DomainMask, cfg: SolverConfig, eps_values: Sequence[float]) -> Dict[float, float]:
    """Max INTERIOR distance between each eps solution and the eps = 0 solution at cfg.p"""
    inner = mask.interior
    base = solve_capacitary(mask, cfg.with_eps(0.0)).v.values
    distances: Dict[float, float] = {}
    for eps in eps_values:
        values = solve_capacitary(mask, cfg.with_eps(eps)).v.values
        distances[float(eps)] = float(np.max(np.abs(values - base)[inner]))
        logger.info(f"eps sweep eps={eps:g}", extra={'extra_data': {'distance': distances[float(eps)]}})
    return distances


# =============================================================================
# LEVEL SETS
# =============================================================================

def _edge_crossings(values: np.ndarray, box, s: float):
    coords = box.coords
    points = []
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        a, b = values[tuple(lo)], values[tuple(hi)]
        cross = np.isfinite(a) & np.isfinite(b) & ((a - s) * (b - s) <= 0) & (a != b)
        if not np.any(cross):
            continue
        lam = (s - a[cross]) / (b[cross] - a[cross])
        points.append(np.stack([c[tuple(lo)][cross] + lam * (c[tuple(hi)][cross] - c[tuple(lo)][cross])
                                for c in coords], axis=1))
    return np.concatenate(points) if points else np.empty((0, 3))


def extract_level_radii(u: ScalarField, s: float, g0=(0.0, 0.0, 0.0)) -> LevelRadii:
    """Smallest and largest gauge distance from g0 of the crossings of {u = s}"""
    points = _edge_crossings(u.values, u.box, s)
    if points.shape[0] == 0:
        return LevelRadii(s, float('nan'), float('nan'), LevelStatus.EMPTY, 0)

    radii = gauge_distance_arrays(tuple(g0), points[:, 0], points[:, 1], points[:, 2])
    faces = np.zeros(u.box.shape, dtype=bool)
    faces[[0, -1], :, :] = faces[:, [0, -1], :] = faces[:, :, [0, -1]] = True
    status = LevelStatus.TRUNCATED if np.any(u.values[faces] <= s) else LevelStatus.OK
    return LevelRadii(s, float(np.min(radii)), float(np.max(radii)), status, int(points.shape[0]))


def fit_level_slopes(levels: Sequence[LevelRadii]) -> dict:
    """Least-squares slopes of log r_inner and log r_outer against s over OK levels"""
    ok = [lv for lv in levels if lv.status == LevelStatus.OK]
    if len(ok) < 2:
        raise TruncatedLevelDataError("Fewer than two untruncated levels",
                                      details={'levels': len(levels), 'ok': len(ok)})
    s = np.array([lv.s for lv in ok])
    inner = np.polyfit(s, np.log([lv.r_inner for lv in ok]), 1)
    outer = np.polyfit(s, np.log([lv.r_outer for lv in ok]), 1)
    return {'slope_inner': float(inner[0]), 'slope_outer': float(outer[0]),
            'intercept_inner': float(inner[1]), 'intercept_outer': float(outer[1]), 'levels': len(ok)}


def fit_flow_constants(levels: Sequence[LevelRadii], eps: float, Rstar: float, Rbar: float,
                       Q: int = 4) -> dict:
    """
    Smallest Chat, C0 >= 1 with phi_eps(s) <= r_inner and r_outer <= psi(s).

    For eps = 0 the inner sphere does not depend on Chat; `inner_ok`
    reports whether it encloses nothing beyond the measured radii.
    """
    ok = [lv for lv in levels if lv.status == LevelStatus.OK]
    if not ok:
        raise TruncatedLevelDataError("No untruncated level to fit", details={'levels': len(levels)})
    s = np.array([lv.s for lv in ok])
    growth = np.exp(s / (Q - 1))
    inner_log_ratio = np.log(Rstar * growth / np.array([lv.r_inner for lv in ok]))
    outer_log_ratio = np.log(np.array([lv.r_outer for lv in ok]) / (Rbar * growth))

    log_C0 = max(0.0, float((Q - 1) * np.max(outer_log_ratio)))
    if eps > 0:
        log_Chat = max(0.0, float((Q - 1) * np.max(inner_log_ratio) / eps ** 4))
        inner_ok = True
    else:
        log_Chat = 0.0
        inner_ok = bool(np.max(inner_log_ratio) <= 0.0)
    with np.errstate(over='ignore'):
        return {'Chat': float(np.exp(log_Chat)), 'C0': float(np.exp(log_C0)),
                'log_Chat': log_Chat, 'log_C0': log_C0, 'inner_ok': inner_ok}


# =============================================================================
# DILATION AND MINIMALITY
# =============================================================================

def dilate_problem(mask: DomainMask, cfg: SolverConfig, lam: float):
    """(mask, cfg) of the dilated problem: box and obstacle under delta_lam, eps -> lam * eps"""
    return dilate_mask(mask, lam), cfg.with_eps(lam * cfg.eps)


def cosine_bumps(u: ScalarField, K: np.ndarray, count: int, radius: float, amplitude: float,
                 rng: np.random.Generator) -> List[np.ndarray]:
    """
    Smooth bumps amplitude * cos^2(pi d / (2 radius)) in Euclidean distance d,
    centred at random nodes whose whole support lies in K. Signs alternate.
    """
    x, y, t = u.box.coords
    candidates = np.flatnonzero(K.ravel())
    bumps: List[np.ndarray] = []
    attempts = 0
    while len(bumps) < count and attempts < 50 * count and candidates.size:
        attempts += 1
        idx = candidates[rng.integers(candidates.size)]
        cx, cy, ct = x.ravel()[idx], y.ravel()[idx], t.ravel()[idx]
        d = np.sqrt((x - cx) ** 2 + (y - cy) ** 2 + (t - ct) ** 2)
        support = d < radius
        if not np.all(K[support]):
            continue
        sign = 1.0 if len(bumps) % 2 == 0 else -1.0
        bumps.append(np.where(support, sign * amplitude * np.cos(np.pi * d / (2.0 * radius)) ** 2, 0.0))
    return bumps


def local_minimality_test(sol_u: ScalarField, bumps: Sequence[np.ndarray], K: np.ndarray, p: float,
                          eps: float, radius: float, c: float = 5.0) -> CheckReport:
    """
    J(u, u; K) <= J(u, u + b; K) + tol for every bump b,
    tol = c h (4 pi radius^2).
    """
    tol = c * sol_u.box.h * 4.0 * np.pi * radius ** 2
    base = energy_J(sol_u, sol_u, K, p, eps)
    margins = [energy_J(sol_u, sol_u.with_values(sol_u.values + b), K, p, eps) - base for b in bumps]
    worst = float(min(margins)) if margins else 0.0
    return CheckReport(
        name='local_minimality', evaluated=len(margins), worst=worst, tolerance=tol,
        passed=worst >= -tol, kind=CheckKind.INEQUALITY,
        details={'base_energy': base, 'radius': radius, 'nodes_in_K': int(np.count_nonzero(K))},
    )
