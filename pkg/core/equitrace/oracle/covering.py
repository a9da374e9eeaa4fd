"""Covering-space decomposition: the classical trace on X = M / Gamma against the sum over
conjugacy classes of Gamma of the delocalised traces upstairs."""

import logging
import math
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from equitrace.exceptions import ValidationError
from equitrace.flow.system import CoverSystem
from equitrace.geometry.group import FiniteGroup, FreeAbelianGroup, GroupElt
from equitrace.geometry.maps import CircleLiftMap
from equitrace.orbits.orbit import PeriodWindow
from equitrace.orbits.search import SeedSpec
from equitrace.trace.comb import assemble, pair
from equitrace.trace.testfn import TestFunction

log = logging.getLogger(__name__)

EXACT_TOL = 1e-6


class QuotientFlow(metaclass=ABCMeta):
    """Closed-form closed orbits of the induced flow on the compact quotient."""

    @abstractmethod
    def atoms(self, lo: float, hi: float) -> List[Tuple[float, float]]:
        """(l, sum of T# / |det(I - P)|) for every period l in [lo, hi]."""

    @abstractmethod
    def describe(self) -> str:
        pass


@dataclass(frozen=True)
class CircleFlow(QuotientFlow):
    """Unit-speed flow on the circle R / length Z."""

    length: float = 1.0

    def atoms(self, lo, hi):
        ks = range(math.ceil(lo / self.length), math.floor(hi / self.length) + 1)
        return [(k * self.length, self.length) for k in ks if k != 0]

    def describe(self):
        return f"circle(length={self.length:g})"


@dataclass(frozen=True)
class SuspensionFlow(QuotientFlow):
    """Unit-roof suspension of the circle map f(x) = x + amplitude sin(2 pi x) mod 1.

    Closed orbits of period n correspond to fixed points of f^n, found as roots of
    f^n(x) - x - k on a sign-change sweep refined by Brent's method.
    """

    amplitude: float
    grid: int = 4096

    def fixed_points(self, n: int) -> List[Tuple[float, float]]:
        """(x, (f^n)'(x)) for the fixed points x in [0, 1) of f^n, n >= 1."""
        lift = CircleLiftMap(self.amplitude, power=n)
        xs = np.linspace(0.0, 1.0, self.grid + 1)
        images, _ = lift.iterate_with_derivative(xs)
        reach = math.ceil(n * abs(self.amplitude)) + 1
        roots = []
        for k in range(-reach, reach + 1):
            values = images - xs - k
            for i in range(self.grid):
                if values[i] == 0.0:
                    roots.append(xs[i])
                elif values[i] * values[i + 1] < 0:
                    roots.append(
                        brentq(
                            lambda x: float(lift.iterate_with_derivative(x)[0]) - x - k,
                            xs[i],
                            xs[i + 1],
                            xtol=1e-15,
                            rtol=4 * np.finfo(float).eps,
                        )
                    )
        unique: List[float] = []
        for x in sorted(r % 1.0 for r in roots):
            gap = min((abs(x - u) for u in unique), default=1.0)
            if gap > 1e-9 and abs(x - 1.0) > 1e-9:
                unique.append(x)
        out = []
        for x in unique:
            _, deriv = lift.iterate_with_derivative(np.array(x))
            out.append((x, float(deriv)))
        return out

    def atoms(self, lo, hi):
        out = []
        for n in range(math.ceil(lo), math.floor(hi) + 1):
            if n == 0:
                continue
            weights = []
            for _, deriv in self.fixed_points(abs(n)):
                multiplier = deriv if n > 0 else 1.0 / deriv
                weights.append(1.0 / abs(1.0 - multiplier))
            if weights:
                out.append((float(n), math.fsum(weights)))
        return out

    def describe(self):
        return f"suspension(f = x + {self.amplitude:g} sin(2 pi x))"


@dataclass
class CoveringReport:
    lhs: float
    rhs: float
    radius: int
    exact: bool
    shell_bound: float
    downstairs_atoms: List[Tuple[float, float]] = field(default_factory=list)
    elements: List[Dict] = field(default_factory=list)

    @property
    def difference(self) -> float:
        return abs(self.lhs - self.rhs)

    def agrees(self, tol: float = EXACT_TOL) -> bool:
        return self.difference <= tol

    def passed(self, tol: float = EXACT_TOL) -> bool:
        return self.exact and self.agrees(tol)

    def to_dict(self):
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "difference": self.difference,
            "radius": self.radius,
            "exact": self.exact,
            "agrees": self.agrees(),
            "shell_bound": self.shell_bound,
            "downstairs_atoms": [{"l": l, "weight": w} for l, w in self.downstairs_atoms],
            "elements": self.elements,
        }


def conjugacy_classes(system: CoverSystem, radius: int) -> List[GroupElt]:
    """One representative per conjugacy class among elements of word length <= radius."""
    group = system.group
    if not isinstance(group, (FreeAbelianGroup, FiniteGroup)):
        raise ValidationError(
            "group.kind", "the covering check needs a discrete deck group"
        )
    elements = [g for g in group.ball(radius) if group.word_length(g) <= radius]
    if group.is_abelian:
        return elements
    seen, reps = set(), []
    for g in sorted(elements):
        if g in seen:
            continue
        reps.append(g)
        seen.update(group.conjugate(h, g) for h in group.ball(radius))
    return reps


def _reach(system: CoverSystem, g: GroupElt, samples: np.ndarray, speed: float) -> float:
    """Lower bound on |l| for any (g, l)-curve: least displacement over max speed."""
    moved = system.group.act(g, samples)
    return float(np.min(np.linalg.norm(moved - samples, axis=-1))) / speed


def covering_check(
    system: CoverSystem,
    quotient: QuotientFlow,
    psi: TestFunction,
    radius: int,
    seeds: SeedSpec = SeedSpec(),
    n_jobs: int = 1,
) -> CoveringReport:
    lo, hi = psi.support
    if lo <= 0 <= hi:
        raise ValidationError("psi", "test function support must avoid 0")
    window = PeriodWindow(lo, hi)
    top = max(abs(lo), abs(hi))
    downstairs = quotient.atoms(lo, hi)
    lhs = math.fsum(w * float(psi(l)) for l, w in downstairs)

    samples = system.chart.sample_grid(1000)
    speed = float(np.max(np.linalg.norm(system.field.velocity(samples), axis=-1)))
    elements = []
    terms = []
    for g in conjugacy_classes(system, radius):
        reach = _reach(system, g, samples, speed)
        record = {"gamma": str(g), "reach": reach}
        if reach > top:
            record["skipped"] = True
            elements.append(record)
            continue
        comb = assemble(system, g, window, radius=radius, seeds=seeds, n_jobs=n_jobs)
        value = pair(comb, psi)
        record.update(
            skipped=False, pairing=value, atoms=[a.to_dict() for a in comb.atoms]
        )
        elements.append(record)
        terms.append(value)
    rhs = math.fsum(terms)

    group = system.group
    shell = [g for g in group.ball(radius + 1) if group.word_length(g) == radius + 1]
    bound = min((_reach(system, g, samples, speed) for g in shell), default=math.inf)
    exact = isinstance(group, FiniteGroup) or bound > top
    if not exact:
        log.warning(
            f"Covering sum truncated at radius {radius}:"
            f" the next shell reaches l = {bound:.4g}"
        )
    report = CoveringReport(
        lhs=lhs,
        rhs=rhs,
        radius=radius,
        exact=exact,
        shell_bound=bound,
        downstairs_atoms=downstairs,
        elements=elements,
    )
    log.info(
        f"Covering check on {quotient.describe()}: LHS {lhs:.12g}, RHS {rhs:.12g},"
        f" exact={exact}"
    )
    if exact and not report.agrees():
        log.warning(
            f"Covering sum is exact but misses the quotient trace by"
            f" {report.difference:.3e}"
        )
    return report


def quotient_run_pairing(
    quotient_system: CoverSystem, psi: TestFunction, seeds: Optional[SeedSpec] = None
) -> float:
    """Classical trace pairing from a G-trivial run on a compact quotient chart."""
    if not quotient_system.is_quotient_run:
        raise ValidationError("chart.quotient", "a quotient chart is required")
    lo, hi = psi.support
    comb = assemble(
        quotient_system,
        quotient_system.group.identity(),
        PeriodWindow(lo, hi),
        seeds=seeds or SeedSpec(),
    )
    return pair(comb, psi)
