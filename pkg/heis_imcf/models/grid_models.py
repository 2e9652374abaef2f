"""
Grid Models
===========
Uniform Cartesian grids over boxes of H^1 = R^3 and the fields living on them.

Arrays are indexed [i, j, k] along (x, y, t); flat serialization is
x-fastest (Fortran order).
"""

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from heis_imcf.api.errors import InvalidParameterError, DimensionMismatchError

MIN_NODES = 16


@dataclass(frozen=True)
class Box:
    """[-Lxy, Lxy]^2 x [-Lt, Lt] sampled with m = (mx, my, mt) nodes"""
    Lxy: float
    Lt: float
    m: Tuple[int, int, int] = (33, 33, 33)

    def __post_init__(self):
        m = self.m
        if isinstance(m, int):
            m = (m, m, m)
        m = tuple(int(k) for k in m)
        if len(m) != 3:
            raise InvalidParameterError('m', self.m, 'an int or three ints')
        if min(m) < MIN_NODES:
            raise InvalidParameterError('m', self.m, f'at least {MIN_NODES} nodes per axis')
        if not (self.Lxy > 0 and self.Lt > 0):
            raise InvalidParameterError('Lxy/Lt', (self.Lxy, self.Lt), 'positive half-widths')
        object.__setattr__(self, 'm', m)
        object.__setattr__(self, 'Lxy', float(self.Lxy))
        object.__setattr__(self, 'Lt', float(self.Lt))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.m

    @property
    def size(self) -> int:
        return int(np.prod(self.m))

    @property
    def hx(self) -> float:
        return 2.0 * self.Lxy / (self.m[0] - 1)

    @property
    def hy(self) -> float:
        return 2.0 * self.Lxy / (self.m[1] - 1)

    @property
    def ht(self) -> float:
        return 2.0 * self.Lt / (self.m[2] - 1)

    @property
    def spacings(self) -> Tuple[float, float, float]:
        return self.hx, self.hy, self.ht

    @property
    def h(self) -> float:
        """Largest spacing"""
        return max(self.spacings)

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy * self.ht

    @property
    def volume(self) -> float:
        return 4.0 * self.Lxy * self.Lxy * 2.0 * self.Lt

    @cached_property
    def axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.linspace(-self.Lxy, self.Lxy, self.m[0]),
                np.linspace(-self.Lxy, self.Lxy, self.m[1]),
                np.linspace(-self.Lt, self.Lt, self.m[2]))

    @cached_property
    def coords(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(*self.axes, indexing='ij'))

    def refined(self) -> 'Box':
        """Halve every spacing; coarse node i sits at fine node 2i"""
        return Box(self.Lxy, self.Lt, tuple(2 * k - 1 for k in self.m))

    def scaled(self, lam: float) -> 'Box':
        """Image under the group dilation delta_lam"""
        if lam <= 0:
            raise InvalidParameterError('lambda', lam, 'a positive real')
        return Box(lam * self.Lxy, lam * lam * self.Lt, self.m)

    def metadata(self) -> dict:
        return {
            'Lxy': self.Lxy, 'Lt': self.Lt, 'm': list(self.m),
            'h': [self.hx, self.hy, self.ht], 'order': 'x-fastest',
        }


class NodeLabel(IntEnum):
    OBSTACLE = 0
    INTERIOR = 1
    OUTER_BOUNDARY = 2


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Per-node labels plus the gauge radii bracketing the obstacle"""
    box: Box
    labels: np.ndarray
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    r_inner: Optional[float] = None
    r_outer: Optional[float] = None
    # Obstacle level function: < 1 inside, 1 on the surface, > 1 outside
    level: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.labels.shape != self.box.shape:
            raise DimensionMismatchError(self.labels.size, self.box.size)
        if self.level is not None and np.shape(self.level) != self.box.shape:
            raise DimensionMismatchError(np.size(self.level), self.box.size)

    @property
    def obstacle(self) -> np.ndarray:
        return self.labels == NodeLabel.OBSTACLE

    @property
    def interior(self) -> np.ndarray:
        return self.labels == NodeLabel.INTERIOR

    @property
    def outer(self) -> np.ndarray:
        return self.labels == NodeLabel.OUTER_BOUNDARY

    @property
    def dirichlet(self) -> np.ndarray:
        return ~self.interior

    def counts(self) -> dict:
        return {label.name: int(np.count_nonzero(self.labels == label)) for label in NodeLabel}


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values of a scalar function"""
    values: np.ndarray
    box: Box
    mask: Optional[DomainMask] = None
    excluded: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.box.shape:
            raise DimensionMismatchError(values.size, self.box.size)
        object.__setattr__(self, 'values', values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def with_values(self, values: np.ndarray, excluded: np.ndarray = None) -> 'ScalarField':
        return ScalarField(values, self.box, self.mask, excluded)


@dataclass(frozen=True, eq=False)
class FrameField:
    """Frame components (a, b, c) of a vector field at every node (n = 1)"""
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    box: Box

    def norm_squared(self) -> np.ndarray:
        return self.a * self.a + self.b * self.b + self.c * self.c

    def norm(self) -> np.ndarray:
        return np.sqrt(self.norm_squared())

    def inner(self, other: 'FrameField') -> np.ndarray:
        return self.a * other.a + self.b * other.b + self.c * other.c

    def scaled(self, weight: np.ndarray) -> 'FrameField':
        return FrameField(weight * self.a, weight * self.b, weight * self.c, self.box)

    def __add__(self, other: 'FrameField') -> 'FrameField':
        return FrameField(self.a + other.a, self.b + other.b, self.c + other.c, self.box)

    def stack(self) -> np.ndarray:
        return np.stack([self.a, self.b, self.c], axis=-1)
