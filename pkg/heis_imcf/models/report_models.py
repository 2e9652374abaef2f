from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from heis_imcf.api.errors import InvalidParameterError


class CheckKind:
    """Check kind constants"""
    EQUALITY = 'equality'
    INEQUALITY = 'inequality'
    INFORMATIONAL = 'informational'


def _json_float(value):
    if value is None:
        return None
    value = float(value)
    if np.isnan(value):
        return 'nan'
    if np.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return value


@dataclass
class CheckReport:
    """
    Outcome of one identity or inequality check.

    `worst` is the worst relative error (equalities) or the worst
    normalized margin (inequalities, negative means violated).
    """
    name: str
    evaluated: int
    worst: float
    tolerance: float
    passed: bool
    kind: str = CheckKind.EQUALITY
    order: Optional[float] = None
    excluded: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'kind': self.kind,
            'evaluated': int(self.evaluated),
            'excluded': int(self.excluded),
            'worst': _json_float(self.worst),
            'tolerance': _json_float(self.tolerance),
            'order': _json_float(self.order),
            'passed': bool(self.passed),
            'details': {k: _json_float(v) if isinstance(v, (float, np.floating)) else v
                        for k, v in self.details.items()},
        }

    def summary_line(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        order = '-' if self.order is None else f"{self.order:.2f}"
        return (f"{self.name:<34} {status:<5} {self.evaluated:>9d} {self.excluded:>8d} "
                f"{self.worst:>12.4e} {self.tolerance:>10.2e} {order:>7}")


@dataclass(frozen=True)
class WeakNormParams:
    """Weak-L^sigma quasinorm parameters; sigma = Q(p - 1)/(Q - p)"""
    sigma_exp: float
    rho_grid: Sequence[float]

    def __post_init__(self):
        if not self.sigma_exp > 0:
            raise InvalidParameterError('sigma_exp', self.sigma_exp, 'a positive exponent')
        if len(self.rho_grid) == 0 or any(r <= 0 for r in self.rho_grid):
            raise InvalidParameterError('rho_grid', self.rho_grid, 'positive thresholds')

    @classmethod
    def for_exponents(cls, p: float, Q: int = 4, rho_grid: Sequence[float] = None) -> 'WeakNormParams':
        if not 1.0 < p < Q:
            raise InvalidParameterError('p', p, f'a real in (1, {Q})')
        if rho_grid is None:
            rho_grid = tuple(np.geomspace(1e-6, 1.0, 61)[:-1])
        return cls(Q * (p - 1.0) / (Q - p), tuple(float(r) for r in rho_grid))
