"""Invertible maps of the chart R^n used as group actions and deck transformations.

Every map accepts a single point of shape (n,) or a batch of shape (N, n) and returns
the same shape. Jacobians come back as (n, n) or (N, n, n).
"""

import math
from abc import ABCMeta, abstractmethod
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import newton

from equitrace.exceptions import NoConvergence


class ChartMap(metaclass=ABCMeta):
    dim: int

    @abstractmethod
    def __call__(self, m: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def jacobian(self, m: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def inverse(self) -> "ChartMap":
        pass

    def power(self, k: int) -> "ChartMap":
        if k == 0:
            return AffineMap.identity(self.dim)
        base = self if k > 0 else self.inverse()
        if abs(k) == 1:
            return base
        return ComposedMap([base] * abs(k))

    def describe(self) -> str:
        return type(self).__name__


class AffineMap(ChartMap):
    def __init__(self, matrix: Sequence, shift: Optional[Sequence] = None):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.dim = self.matrix.shape[0]
        self.shift = (
            np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=float)
        )
        if self.matrix.shape != (self.dim, self.dim) or self.shift.shape != (self.dim,):
            raise ValueError(
                f"Affine map needs a square matrix and a matching shift, got"
                f" {self.matrix.shape} and {self.shift.shape}"
            )
        if abs(np.linalg.det(self.matrix)) < 1e-14:
            raise ValueError("Affine map matrix is singular")

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.eye(dim))

    @classmethod
    def translation(cls, shift: Sequence) -> "AffineMap":
        shift = np.asarray(shift, dtype=float)
        return cls(np.eye(shift.size), shift)

    @property
    def is_translation(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.dim)))

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        return m @ self.matrix.T + self.shift

    def jacobian(self, m):
        m = np.asarray(m, dtype=float)
        if m.ndim == 1:
            return self.matrix.copy()
        return np.broadcast_to(self.matrix, (m.shape[0], self.dim, self.dim)).copy()

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.matrix)
        return AffineMap(inv, -inv @ self.shift)

    def power(self, k: int) -> "AffineMap":
        if k == 0:
            return AffineMap.identity(self.dim)
        if self.is_translation:
            return AffineMap.translation(k * self.shift)
        base = self if k > 0 else self.inverse()
        out = AffineMap.identity(self.dim)
        for _ in range(abs(k)):
            out = base.after(out)
        return out

    def after(self, other: "AffineMap") -> "AffineMap":
        """self o other"""
        return AffineMap(
            self.matrix @ other.matrix, self.matrix @ other.shift + self.shift
        )

    def describe(self) -> str:
        return f"affine(A={self.matrix.tolist()}, b={self.shift.tolist()})"


class ComposedMap(ChartMap):
    """maps[0] o maps[1] o ... o maps[-1]"""

    def __init__(self, maps: Sequence[ChartMap]):
        if len(maps) == 0:
            raise ValueError("ComposedMap needs at least one map")
        self.maps = list(maps)
        self.dim = self.maps[0].dim

    def __call__(self, m):
        out = np.asarray(m, dtype=float)
        for f in reversed(self.maps):
            out = f(out)
        return out

    def jacobian(self, m):
        cur = np.asarray(m, dtype=float)
        jac = None
        for f in reversed(self.maps):
            step = f.jacobian(cur)
            jac = step if jac is None else step @ jac
            cur = f(cur)
        return jac

    def inverse(self) -> "ComposedMap":
        return ComposedMap([f.inverse() for f in reversed(self.maps)])

    def describe(self) -> str:
        return " o ".join(f.describe() for f in self.maps)


class CircleLiftMap(ChartMap):
    """Applies the k-th iterate of f(x) = x + amplitude * sin(2 pi x) on one axis.

    f is the lift of a degree-one circle diffeomorphism, so f(x + 1) = f(x) + 1, and it
    stays a diffeomorphism while |amplitude| < 1 / (2 pi). Remaining coordinates are
    shifted by `shift`, whose entry on `axis` must be zero.
    """

    def __init__(
        self,
        amplitude: float,
        power: int = 1,
        axis: int = 0,
        dim: int = 1,
        shift: Optional[Sequence] = None,
    ):
        if abs(amplitude) * 2 * math.pi >= 1:
            raise ValueError(
                f"Circle lift with amplitude {amplitude} is not a diffeomorphism"
            )
        self.amplitude = float(amplitude)
        self.iterate = int(power)
        self.axis = axis
        self.dim = dim
        self.shift = np.zeros(dim) if shift is None else np.asarray(shift, dtype=float)
        if self.shift[axis] != 0:
            raise ValueError("Circle lift shift must vanish on the lifted axis")

    def lift(self, x):
        return x + self.amplitude * np.sin(2 * np.pi * x)

    def lift_prime(self, x):
        return 1 + 2 * np.pi * self.amplitude * np.cos(2 * np.pi * x)

    def lift_inverse(self, y):
        """Inverts on the fractional part, using lift(x + k) = lift(x) + k."""
        y = np.asarray(y, dtype=float)
        whole = np.floor(y)
        frac = y - whole
        try:
            x = newton(
                lambda x: self.lift(x) - frac,
                frac.copy(),
                fprime=self.lift_prime,
                tol=1e-13,
                maxiter=100,
            )
        except RuntimeError as exc:
            raise NoConvergence(f"Circle lift inversion failed: {exc}") from exc
        return np.asarray(x) + whole

    def iterate_with_derivative(self, x):
        x = np.array(x, dtype=float, copy=True)
        deriv = np.ones_like(x)
        if self.iterate >= 0:
            for _ in range(self.iterate):
                deriv = deriv * self.lift_prime(x)
                x = self.lift(x)
        else:
            for _ in range(-self.iterate):
                x = self.lift_inverse(x)
                deriv = deriv / self.lift_prime(x)
        return x, deriv

    def __call__(self, m):
        m = np.array(m, dtype=float, copy=True)
        x, _ = self.iterate_with_derivative(m[..., self.axis])
        m = m + self.shift
        m[..., self.axis] = x
        return m

    def jacobian(self, m):
        m = np.asarray(m, dtype=float)
        _, deriv = self.iterate_with_derivative(m[..., self.axis])
        jac = np.zeros(m.shape[:-1] + (self.dim, self.dim))
        idx = np.arange(self.dim)
        jac[..., idx, idx] = 1.0
        jac[..., self.axis, self.axis] = deriv
        return jac

    def inverse(self) -> "CircleLiftMap":
        return CircleLiftMap(
            self.amplitude, -self.iterate, self.axis, self.dim, -self.shift
        )

    def power(self, k: int) -> ChartMap:
        if k == 0:
            return AffineMap.identity(self.dim)
        return CircleLiftMap(
            self.amplitude, self.iterate * k, self.axis, self.dim, k * self.shift
        )

    def describe(self) -> str:
        return (
            f"circle-lift(amplitude={self.amplitude}, power={self.iterate},"
            f" axis={self.axis}, shift={self.shift.tolist()})"
        )
