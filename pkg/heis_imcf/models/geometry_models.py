"""
Geometry Models
===============
Value types for points of the Heisenberg group and tangent vectors
expressed in the orthonormal frame {X_i, Y_i, T_eps}.

This module provides:
1. GeometryParams (n, eps and the homogeneous dimension Q = 2n + 2)
2. GroupPoint in exponential coordinates (x, y, t)
3. FrameVector with the eps-inner product and vector arithmetic
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from heis_imcf.api.errors import DimensionMismatchError, InvalidParameterError


@dataclass(frozen=True)
class GeometryParams:
    """Dimension and metric parameter of one computation"""
    n: int = 1
    eps: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError('n', self.n, 'a positive integer')
        if not 0.0 <= self.eps <= 1.0:
            raise InvalidParameterError('eps', self.eps, 'a real in [0, 1]')

    @property
    def Q(self) -> int:
        return 2 * self.n + 2


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise InvalidParameterError(name, values, 'a 1-d sequence of reals')
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(name, values, 'finite coordinates')
    return arr


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """A point g = (x, y, t) of H^n"""
    x: np.ndarray
    y: np.ndarray
    t: float

    def __post_init__(self):
        x = _as_vector(self.x, 'x')
        y = _as_vector(self.y, 'y')
        if x.shape != y.shape:
            raise DimensionMismatchError(x.size, y.size)
        t = float(self.t)
        if not np.isfinite(t):
            raise InvalidParameterError('t', self.t, 'a finite real')
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 't', t)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def z_squared(self) -> float:
        return float(np.dot(self.x, self.x) + np.dot(self.y, self.y))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, [self.t]])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'GroupPoint':
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size < 3 or arr.size % 2 == 0:
            raise InvalidParameterError('coordinates', values, 'a (2n+1)-vector')
        n = (arr.size - 1) // 2
        return cls(arr[:n], arr[n:2 * n], arr[2 * n])

    @classmethod
    def origin(cls, n: int = 1) -> 'GroupPoint':
        return cls(np.zeros(n), np.zeros(n), 0.0)

    def allclose(self, other: 'GroupPoint', tol: float = 1e-12) -> bool:
        if self.n != other.n:
            return False
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=0.0, atol=tol))

    def __repr__(self):
        return f"GroupPoint(x={self.x.tolist()}, y={self.y.tolist()}, t={self.t!r})"


@dataclass(frozen=True, eq=False)
class FrameVector:
    """Tangent vector sum a_i X_i + b_i Y_i + c T_eps"""
    a: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        a = _as_vector(self.a, 'a')
        b = _as_vector(self.b, 'b')
        if a.shape != b.shape:
            raise DimensionMismatchError(a.size, b.size)
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'c', float(self.c))

    @property
    def n(self) -> int:
        return self.a.size

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, [self.c]])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'FrameVector':
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size < 3 or arr.size % 2 == 0:
            raise InvalidParameterError('components', values, 'a (2n+1)-vector')
        n = (arr.size - 1) // 2
        return cls(arr[:n], arr[n:2 * n], arr[2 * n])

    @classmethod
    def zero(cls, n: int = 1) -> 'FrameVector':
        return cls(np.zeros(n), np.zeros(n), 0.0)

    @classmethod
    def basis(cls, n: int, k: int) -> 'FrameVector':
        """E_k with the ordering X_1..X_n, Y_1..Y_n, T_eps"""
        if not 0 <= k <= 2 * n:
            raise InvalidParameterError('k', k, f'a frame index in [0, {2 * n}]')
        arr = np.zeros(2 * n + 1)
        arr[k] = 1.0
        return cls.from_array(arr)

    def _check(self, other: 'FrameVector'):
        if self.n != other.n:
            raise DimensionMismatchError(self.n, other.n)

    def inner(self, other: 'FrameVector') -> float:
        self._check(other)
        return float(np.dot(self.as_array(), other.as_array()))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def horizontal(self) -> 'FrameVector':
        return FrameVector(self.a, self.b, 0.0)

    def __add__(self, other: 'FrameVector') -> 'FrameVector':
        self._check(other)
        return FrameVector.from_array(self.as_array() + other.as_array())

    def __sub__(self, other: 'FrameVector') -> 'FrameVector':
        self._check(other)
        return FrameVector.from_array(self.as_array() - other.as_array())

    def __mul__(self, scalar: float) -> 'FrameVector':
        return FrameVector.from_array(float(scalar) * self.as_array())

    __rmul__ = __mul__

    def __neg__(self) -> 'FrameVector':
        return self * -1.0

    def allclose(self, other: 'FrameVector', tol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=0.0, atol=tol))

    def __repr__(self):
        return f"FrameVector(a={self.a.tolist()}, b={self.b.tolist()}, c={self.c!r})"
