from dataclasses import dataclass

import numpy as np

from heis_imcf.api.errors import InvalidParameterError
from heis_imcf.models.geometry_models import GroupPoint


@dataclass(frozen=True, eq=False)
class PowerBarrier:
    """
    N(g0^-1 g)^alpha / R0^(4 alpha): a negative power of the Korányi gauge
    normalized to equal 1 on the gauge sphere of radius R0 about g0.
    """
    g0: GroupPoint
    R0: float
    alpha: float

    def __post_init__(self):
        if not self.R0 > 0:
            raise InvalidParameterError('R0', self.R0, 'a positive radius')
        if not np.isfinite(self.alpha):
            raise InvalidParameterError('alpha', self.alpha, 'a finite real')

    @classmethod
    def from_constant(cls, g0: GroupPoint, R0: float, K: float, p: float) -> 'PowerBarrier':
        """alpha = -K / (p - 1)"""
        if not p > 1:
            raise InvalidParameterError('p', p, 'p > 1')
        return cls(g0, R0, -K / (p - 1.0))


@dataclass(frozen=True)
class FlowLaw:
    """Expanding gauge spheres R(s) = R0 exp(s / (Q - 1))"""
    R0: float
    Q: int = 4

    def __post_init__(self):
        if not self.R0 > 0:
            raise InvalidParameterError('R0', self.R0, 'a positive radius')
        if self.Q < 4 or self.Q % 2:
            raise InvalidParameterError('Q', self.Q, 'an even integer >= 4')

    def radius(self, s):
        return self.R0 * np.exp(np.asarray(s, dtype=float) / (self.Q - 1))
