import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from equitrace.exceptions import ValidationError
from equitrace.geometry.quotient import DeckQuotient


@dataclass
class CoverChart:
    """The cover M as one global chart R^n.

    `sample_box` bounds the region used for sampled checks (a fundamental domain for
    cocompact actions). `quotient`, when set, identifies points of M modulo deck
    transformations so that runs take place on the compact quotient M / Gamma.
    """

    dim: int
    coordinates: List[str] = field(default_factory=list)
    sample_box: Optional[List[Tuple[float, float]]] = None
    quotient: Optional[DeckQuotient] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("chart.dim", "dimension must be at least 1")
        if not self.coordinates:
            self.coordinates = [f"x{i + 1}" for i in range(self.dim)]
        if len(self.coordinates) != self.dim:
            raise ValidationError(
                "chart.coordinates",
                f"expected {self.dim} labels, got {len(self.coordinates)}",
            )
        if self.sample_box is None:
            self.sample_box = [(0.0, 1.0)] * self.dim
        if len(self.sample_box) != self.dim:
            raise ValidationError("chart.sample_box", f"expected {self.dim} intervals")

    def point(self, m: Sequence[float]) -> np.ndarray:
        arr = np.asarray(m, dtype=float).reshape(-1)
        if arr.size != self.dim:
            raise ValidationError(
                "point", f"expected {self.dim} coordinates, got {arr.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("point", f"coordinates must be finite: {arr.tolist()}")
        return arr

    def grid_shape(self, count: int = 1000) -> Tuple[int, ...]:
        return (max(2, math.ceil(count ** (1.0 / self.dim))),) * self.dim

    def sample_grid(self, count: int = 1000) -> np.ndarray:
        """Deterministic cell-centred grid of about `count` points over the sample box.

        Points are in C order over `grid_shape(count)`.
        """
        per_axis = self.grid_shape(count)[0]
        axes = [
            lo + (hi - lo) * (np.arange(per_axis) + 0.5) / per_axis
            for lo, hi in self.sample_box
        ]
        return np.array(list(itertools.product(*axes)), dtype=float)

    def random_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo = np.array([b[0] for b in self.sample_box])
        hi = np.array([b[1] for b in self.sample_box])
        return lo + (hi - lo) * rng.random((count, self.dim))
