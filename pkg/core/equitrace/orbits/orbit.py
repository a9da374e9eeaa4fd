"""Records for (x, l)-periodic flow curves and the identifications that compare them."""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import numpy as np

from equitrace.exceptions import ValidationError
from equitrace.geometry.group import (
    FiniteGroup,
    FreeAbelianGroup,
    GroupElt,
    TranslationLine,
)
from equitrace.geometry.maps import ChartMap

if TYPE_CHECKING:
    from equitrace.flow.system import CoverSystem

PERIODIC = "periodic"
PROPER_LINE = "proper-line"


@dataclass
class PoincareData:
    P: np.ndarray
    det_one_minus_p: float
    nondegenerate: bool
    eigen_residual: float = 0.0


@dataclass
class DelocalizedOrbit:
    """One time-shift class of curves with gamma(l) = x gamma(0).

    `tau` is the shortest positive time after which the curve returns to an identified
    point (modulo the centralizer of x, or modulo deck transformations on a quotient).
    `deck` holds the deck payload playing the role of x in quotient runs.
    """

    x: GroupElt
    l: float
    m0: np.ndarray
    residual: float
    kind: str = PERIODIC
    t_sharp: Optional[float] = None
    tau: Optional[float] = None
    deck: Optional[Tuple[int, ...]] = None
    ident: str = ""
    poincare: Optional[PoincareData] = None
    t_gamma: Optional[float] = None

    @property
    def sort_key(self) -> Tuple:
        return (self.l,) + tuple(float(v) for v in self.m0)

    @property
    def label(self) -> str:
        if self.deck is None:
            return str(self.x)
        return "deck " + ",".join(map(str, self.deck))

    def to_record(self) -> Dict:
        record = {"x_payload": self.label, "l": self.l}
        for i, v in enumerate(self.m0):
            record[f"m0_{i + 1}"] = float(v)
        record.update(
            kind=self.kind,
            T_sharp=self.t_sharp,
            T_gamma=self.t_gamma,
            det_one_minus_P=(
                self.poincare.det_one_minus_p if self.poincare is not None else None
            ),
            residual=self.residual,
        )
        return record


@dataclass(frozen=True)
class PeriodWindow:
    """Periods searched for. A window straddling 0 is split around +-l_eps on request."""

    l_min: float
    l_max: float
    both_signs: bool = False
    l_eps: float = 0.1

    def __post_init__(self):
        if not self.l_min < self.l_max:
            raise ValidationError("orbits.l_window", "l_min must be below l_max")
        if self.l_min <= 0 <= self.l_max:
            if not self.both_signs:
                raise ValidationError("orbits.l_window", "periods must avoid 0")
            if self.l_eps <= 0 or -self.l_eps <= self.l_min or self.l_eps >= self.l_max:
                raise ValidationError(
                    "orbits.l_eps", "l_eps must be positive and inside the window"
                )

    @property
    def intervals(self) -> List[Tuple[float, float]]:
        if self.l_min <= 0 <= self.l_max:
            return [(self.l_min, -self.l_eps), (self.l_eps, self.l_max)]
        return [(self.l_min, self.l_max)]

    @property
    def min_abs(self) -> float:
        return min(min(abs(a), abs(b)) for a, b in self.intervals)

    def contains(self, l: float, tol: float = 0.0) -> bool:
        return any(a - tol <= l <= b + tol for a, b in self.intervals)

    def covers(self, lo: float, hi: float) -> bool:
        return any(a <= lo and hi <= b for a, b in self.intervals)

    def to_list(self) -> List[List[float]]:
        return [[a, b] for a, b in self.intervals]


@dataclass
class Identification:
    """Points of M identified modulo the centralizer of x, or modulo deck transformations
    when the run takes place on a compact quotient."""

    system: "CoverSystem"
    x: GroupElt
    elements: List[GroupElt] = field(default_factory=list)

    def __post_init__(self):
        group = self.system.group
        if self.system.is_quotient_run or isinstance(group, TranslationLine):
            self.elements = []
        elif isinstance(group, FiniteGroup):
            self.elements = (
                group.ball() if group.is_abelian else group.centralizer(self.x)
            )
        elif isinstance(group, FreeAbelianGroup):
            self.elements = group.ball(self.system.search_radius)
        else:
            self.elements = [group.identity()]
        self.maps = [group.action_map(z) for z in self.elements]

    @property
    def kind(self) -> str:
        if self.system.is_quotient_run:
            return "quotient"
        if isinstance(self.system.group, TranslationLine):
            return "line"
        return "discrete"

    def nearest(self, p: np.ndarray, q: np.ndarray) -> Tuple[object, ChartMap, float]:
        """Identification z minimising |p - z q|, its map and the distance."""
        if self.kind == "quotient":
            gamma, payload = self.system.chart.quotient.reduce(p, q)
            return payload, gamma, float(np.linalg.norm(p - gamma(q)))
        group = self.system.group
        z, dist = group.locate(p, q, self.elements)
        return z, group.action_map(z), dist

    def gaps(self, p: np.ndarray, curve: np.ndarray) -> np.ndarray:
        """min over identifications z of |p - z c| for every row c of `curve`."""
        if self.kind == "quotient":
            gaps = self.system.chart.quotient.displacement(p, curve)
            return np.linalg.norm(gaps, axis=-1)
        if self.kind == "line":
            v = self.system.group.direction
            d = p - curve
            d = d - np.outer(d @ v / (v @ v), v)
            return np.linalg.norm(d, axis=-1)
        return np.min(
            np.stack([np.linalg.norm(p - f(curve), axis=-1) for f in self.maps]), axis=0
        )


def action_of(system: "CoverSystem", orbit: DelocalizedOrbit) -> ChartMap:
    """The map X with phi_l(m0) = X(m0): x itself, or the deck transformation."""
    if orbit.deck is not None:
        return system.chart.quotient.deck_map(orbit.deck)
    return system.group.action_map(orbit.x)
