"""
Solver Models
=============
Configuration and result records of the capacitary solver.

This module provides:
1. Boundary-condition and level-status constants
2. SolverConfig with range and monotonicity checks
3. PotentialSolution (potential, IMCF function, diagnostics)
4. LevelRadii for one level set of the IMCF function
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from heis_imcf.api.errors import InvalidParameterError
from heis_imcf.models.grid_models import ScalarField


class OuterBC:
    """Outer boundary condition constants"""
    EXACT_POWER = 'EXACT_POWER'
    ZERO = 'ZERO'

    ALL = (EXACT_POWER, ZERO)


class Scheme:
    """Discretization constants"""
    PROFILE = 'PROFILE'   # unknown v^(1/gamma), obstacle surface extrapolated into ghost nodes
    VOXEL = 'VOXEL'       # unknown v, v = 1 on every OBSTACLE node

    ALL = (PROFILE, VOXEL)


class InitialGuess:
    """Cold-start constants"""
    LINEAR_POWER = 'LINEAR_POWER'   # the p = 2 power profile
    EXACT_POWER = 'EXACT_POWER'     # the power profile for the target p

    ALL = (LINEAR_POWER, EXACT_POWER)


class LevelStatus:
    """Level-set extraction outcome"""
    OK = 'OK'
    TRUNCATED = 'TRUNCATED'
    EMPTY = 'EMPTY'


DEFAULT_SIGMA_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
DEFAULT_P_CONTINUATION = (2.0, 1.7, 1.5, 1.3, 1.2, 1.1)


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    eps: float = 0.0
    sigma_schedule: tuple = DEFAULT_SIGMA_SCHEDULE
    picard_tol: float = 1e-8
    cg_tol: float = 1e-10
    max_picard: int = 200
    outer_bc: str = OuterBC.EXACT_POWER
    p_continuation: tuple = DEFAULT_P_CONTINUATION
    max_principle_tol: float = 1e-8
    clamp_tol: float = 1e-3
    scheme: str = Scheme.PROFILE
    cg_forcing: float = 0.1
    ghost_damping: float = 0.5
    initial_guess: str = InitialGuess.LINEAR_POWER
    max_cg_iter: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'sigma_schedule', tuple(float(s) for s in self.sigma_schedule))
        object.__setattr__(self, 'p_continuation', tuple(float(q) for q in self.p_continuation))
        self.validate()

    def validate(self):
        if not 1.0 < self.p <= 2.0:
            raise InvalidParameterError('p', self.p, 'a real in (1, 2]')
        if not 0.0 <= self.eps <= 1.0:
            raise InvalidParameterError('eps', self.eps, 'a real in [0, 1]')
        if not self.sigma_schedule or any(s < 0 for s in self.sigma_schedule):
            raise InvalidParameterError('sigma_schedule', self.sigma_schedule, 'nonnegative regularizers')
        if any(b >= a for a, b in zip(self.sigma_schedule, self.sigma_schedule[1:])):
            raise InvalidParameterError('sigma_schedule', self.sigma_schedule, 'a strictly decreasing list')
        if any(not 1.0 < q <= 2.0 for q in self.p_continuation):
            raise InvalidParameterError('p_continuation', self.p_continuation, 'values in (1, 2]')
        if any(b >= a for a, b in zip(self.p_continuation, self.p_continuation[1:])):
            raise InvalidParameterError('p_continuation', self.p_continuation, 'a strictly decreasing list')
        for name in ('picard_tol', 'cg_tol', 'max_principle_tol'):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(name, getattr(self, name), 'a positive tolerance')
        if int(self.max_picard) != self.max_picard or self.max_picard < 1:
            raise InvalidParameterError('max_picard', self.max_picard, 'a positive integer')
        if self.outer_bc not in OuterBC.ALL:
            raise InvalidParameterError('outer_bc', self.outer_bc, ' or '.join(OuterBC.ALL))
        if self.initial_guess not in InitialGuess.ALL:
            raise InvalidParameterError('initial_guess', self.initial_guess, ' or '.join(InitialGuess.ALL))
        if self.scheme not in Scheme.ALL:
            raise InvalidParameterError('scheme', self.scheme, ' or '.join(Scheme.ALL))
        if self.clamp_tol < self.max_principle_tol:
            raise InvalidParameterError('clamp_tol', self.clamp_tol, 'at least max_principle_tol')
        if not 0.0 <= self.cg_forcing < 1.0:
            raise InvalidParameterError('cg_forcing', self.cg_forcing, 'a real in [0, 1)')
        if not 0.0 < self.ghost_damping <= 1.0:
            raise InvalidParameterError('ghost_damping', self.ghost_damping, 'a real in (0, 1]')

    def with_p(self, p: float) -> 'SolverConfig':
        return replace(self, p=float(p))

    def with_eps(self, eps: float) -> 'SolverConfig':
        return replace(self, eps=float(eps))

    @classmethod
    def from_dict(cls, data: dict) -> 'SolverConfig':
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> dict:
        return {
            'p': self.p, 'eps': self.eps,
            'sigma_schedule': list(self.sigma_schedule),
            'picard_tol': self.picard_tol, 'cg_tol': self.cg_tol,
            'max_picard': self.max_picard, 'outer_bc': self.outer_bc,
            'p_continuation': list(self.p_continuation),
            'max_principle_tol': self.max_principle_tol,
            'clamp_tol': self.clamp_tol,
            'scheme': self.scheme,
            'cg_forcing': self.cg_forcing,
            'ghost_damping': self.ghost_damping,
            'initial_guess': self.initial_guess,
        }


@dataclass(frozen=True, eq=False)
class PotentialSolution:
    """Capacitary potential v, its IMCF function u = (1 - p) log v and diagnostics"""
    v: ScalarField
    u: Optional[ScalarField]
    p: float
    eps: float
    residual_norm: float
    energy: float
    iterations: int
    excluded_nodes: int
    converged: bool = True
    # Raw excursion beyond the Dirichlet range before clamping
    max_principle_violation: float = 0.0
    clamped_nodes: int = 0
    history: List[dict] = field(default_factory=list)

    def max_log_gradient(self) -> Optional[float]:
        """max (p - 1)|grad v| / v over the recorded history"""
        for record in reversed(self.history):
            if 'max_log_gradient' in record:
                return record['max_log_gradient']
        return None

    def to_dict(self) -> dict:
        return {
            'p': self.p,
            'eps': self.eps,
            'residual_norm': self.residual_norm,
            'energy': self.energy,
            'iterations': self.iterations,
            'excluded_nodes': self.excluded_nodes,
            'converged': self.converged,
            'max_principle_violation': self.max_principle_violation,
            'clamped_nodes': self.clamped_nodes,
            'v_min': float(np.min(self.v.values)),
            'v_max': float(np.max(self.v.values)),
            'history': list(self.history),
        }


@dataclass(frozen=True)
class LevelRadii:
    s: float
    r_inner: float
    r_outer: float
    status: str = LevelStatus.OK
    crossings: int = 0

    def to_dict(self) -> dict:
        return {'s': self.s, 'r_inner': self.r_inner, 'r_outer': self.r_outer,
                'status': self.status, 'crossings': self.crossings}
