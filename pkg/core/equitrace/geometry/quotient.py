"""Closed-form deck identifications M -> M / Gamma for compact quotient runs."""

from abc import ABCMeta, abstractmethod
from typing import List, Sequence, Tuple

import numpy as np

from equitrace.geometry.maps import AffineMap


class DeckQuotient(metaclass=ABCMeta):
    dim: int

    @abstractmethod
    def reduce(self, p: np.ndarray, q: np.ndarray) -> Tuple[AffineMap, Tuple[int, ...]]:
        """Deck transformation gamma with gamma(q) closest to p, and its payload."""

    @abstractmethod
    def displacement(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Batched p - gamma(q) for the closest deck image of each q."""

    def distance(self, p: np.ndarray, q: np.ndarray) -> float:
        return float(np.linalg.norm(self.displacement(p, q)))

    @abstractmethod
    def deck_map(self, payload: Tuple[int, ...]) -> AffineMap:
        pass

    @abstractmethod
    def generators(self) -> List[Tuple[int, ...]]:
        """Payloads of a generating set of deck transformations."""

    @abstractmethod
    def describe(self) -> str:
        pass


class LatticeQuotient(DeckQuotient):
    """R^n modulo the box lattice spanned by `periods` along the coordinate axes."""

    def __init__(self, periods: Sequence[float]):
        self.periods = np.asarray(periods, dtype=float)
        self.dim = self.periods.size

    def _shift(self, p, q):
        return np.round((np.asarray(p) - np.asarray(q)) / self.periods)

    def reduce(self, p, q):
        k = self._shift(p, q)
        return AffineMap.translation(k * self.periods), tuple(int(v) for v in k)

    def displacement(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return p - q - self._shift(p, q) * self.periods

    def deck_map(self, payload):
        return AffineMap.translation(np.asarray(payload, dtype=float) * self.periods)

    def generators(self):
        return [tuple(int(i == j) for j in range(self.dim)) for i in range(self.dim)]

    def describe(self) -> str:
        return f"lattice(periods={self.periods.tolist()})"


class MappingTorusQuotient(DeckQuotient):
    """Mapping torus of a unimodular integer matrix A acting on the torus R^k / Z^k.

    Chart coordinates are (v, s) with v in R^k and s in R. Points are identified by
    (v, s + 1) ~ (A v, s) and by integer translations of v, so the deck elements are
    (v, s) -> (A^j v + a, s - j) with payload (j, a_1, ..., a_k).
    """

    def __init__(self, matrix: Sequence):
        self.matrix = np.asarray(matrix, dtype=float)
        if round(abs(np.linalg.det(self.matrix))) != 1:
            raise ValueError("Mapping torus matrix must be unimodular")
        self.inverse_matrix = np.round(np.linalg.inv(self.matrix))
        self.fiber_dim = self.matrix.shape[0]
        self.dim = self.fiber_dim + 1

    def matrix_power(self, j: int) -> np.ndarray:
        base = self.matrix if j >= 0 else self.inverse_matrix
        return np.linalg.matrix_power(base, abs(int(j)))

    def element(self, j: int, shift: Sequence[float]) -> AffineMap:
        k = self.fiber_dim
        lin = np.eye(self.dim)
        lin[:k, :k] = self.matrix_power(j)
        b = np.zeros(self.dim)
        b[:k] = shift
        b[k] = -j
        return AffineMap(lin, b)

    def reduce(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        k = self.fiber_dim
        j = int(np.round(q[k] - p[k]))
        a = np.round(p[:k] - self.matrix_power(j) @ q[:k])
        return self.element(j, a), (j,) + tuple(int(v) for v in a)

    def displacement(self, p, q):
        single = np.ndim(p) == 1 and np.ndim(q) == 1
        p, q = np.broadcast_arrays(
            np.atleast_2d(np.asarray(p, dtype=float)),
            np.atleast_2d(np.asarray(q, dtype=float)),
        )
        k = self.fiber_dim
        j = np.round(q[:, k] - p[:, k]).astype(int)
        out = np.empty(p.shape)
        for jj in np.unique(j):
            sel = j == jj
            image = q[sel, :k] @ self.matrix_power(jj).T
            dv = p[sel, :k] - image
            out[sel, :k] = dv - np.round(dv)
            out[sel, k] = p[sel, k] - (q[sel, k] - jj)
        return out[0] if single else out

    def deck_map(self, payload):
        return self.element(payload[0], payload[1:])

    def generators(self):
        k = self.fiber_dim
        return [(1,) + (0,) * k] + [
            (0,) + tuple(int(i == j) for j in range(k)) for i in range(k)
        ]

    def describe(self) -> str:
        return f"mapping-torus(A={self.matrix.astype(int).tolist()})"
