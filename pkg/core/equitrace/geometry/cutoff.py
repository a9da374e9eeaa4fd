"""Cutoff functions chi whose group translates sum (or integrate) to one."""

import logging
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from equitrace.exceptions import CoverageFailure, ValidationError
from equitrace.geometry.chart import CoverChart
from equitrace.geometry.group import (
    FiniteGroup,
    FreeAbelianGroup,
    GroupElt,
    GroupModel,
    TranslationLine,
    TrivialGroup,
)

log = logging.getLogger(__name__)

COVERAGE_FLOOR = 1e-8


@dataclass(frozen=True)
class BumpWindow:
    """w(m) = floor + exp(1 - 1 / (1 - |m - c|^2 / r^2)) inside the ball, floor outside.

    With floor = 0 the profile is smooth with compact support and peak value 1.
    """

    center: Tuple[float, ...]
    radius: float
    floor: float = 0.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("window.radius", "radius must be positive")
        if self.floor < 0:
            raise ValidationError("window.floor", "floor must be non-negative")

    @property
    def compact(self) -> bool:
        return self.floor == 0.0

    def __call__(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        t2 = np.sum((m - np.asarray(self.center)) ** 2, axis=-1) / self.radius**2
        inside = t2 < 1.0
        safe = np.where(inside, t2, 0.0)
        bump = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe)), 0.0)
        return bump + self.floor

    def line_support(self, base: np.ndarray, direction: np.ndarray) -> Optional[Tuple]:
        """Parameter interval where base + s * direction lies inside the ball."""
        d = base - np.asarray(self.center)
        a = float(direction @ direction)
        b = float(2 * d @ direction)
        c = float(d @ d - self.radius**2)
        disc = b * b - 4 * a * c
        if disc <= 0:
            return None
        root = np.sqrt(disc)
        return ((-b - root) / (2 * a), (-b + root) / (2 * a))


class CutoffFunction(metaclass=ABCMeta):
    window: Optional[BumpWindow] = None

    @abstractmethod
    def __call__(self, m: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def partition_sum(self, m: np.ndarray) -> np.ndarray:
        """Sum over x in G of chi(x m), or the integral over G for continuous groups."""

    def partition_residual(self, samples: np.ndarray) -> float:
        return float(np.max(np.abs(self.partition_sum(samples) - 1.0)))


class ConstantCutoff(CutoffFunction):
    def __init__(self, value: float, group_size: int = 1):
        self.value = float(value)
        self.group_size = group_size

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        return np.full(m.shape[:-1], self.value) if m.ndim > 1 else self.value

    def partition_sum(self, m):
        m = np.atleast_2d(np.asarray(m, dtype=float))
        return np.full(m.shape[0], self.value * self.group_size)


class QuotientCutoff(CutoffFunction):
    """chi(m) = w(m) / sum_x w(x m) over a finite candidate set of a discrete group."""

    def __init__(self, window: BumpWindow, group: GroupModel, candidates: List[GroupElt]):
        self.window = window
        self.group = group
        self.candidates = sorted(candidates)
        self.candidate_maps = [group.action_map(x) for x in self.candidates]

    def denominator(self, m: np.ndarray) -> np.ndarray:
        total = np.zeros(np.asarray(m).shape[:-1])
        for f in self.candidate_maps:
            total = total + self.window(f(m))
        return total

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        num = self.window(m)
        denom = self.denominator(m)
        return np.where(num > 0, num / np.where(denom > 0, denom, 1.0), 0.0)

    def partition_sum(self, m):
        m = np.atleast_2d(np.asarray(m, dtype=float))
        total = np.zeros(m.shape[0])
        for f in self.candidate_maps:
            total = total + self(f(m))
        return total


class LineCutoff(CutoffFunction):
    """chi(m) = w(m) / integral of w(m + a v) da for G = R translating along v."""

    def __init__(self, window: BumpWindow, group: TranslationLine):
        if not window.compact:
            raise ValidationError("window.floor", "translation-line cutoffs need floor 0")
        self.window = window
        self.group = group

    def line_integral(self, m: np.ndarray) -> float:
        span = self.window.line_support(m, self.group.direction)
        if span is None:
            return 0.0
        value, _ = quad(
            lambda a: float(self.window(m + a * self.group.direction)),
            span[0],
            span[1],
            epsabs=1e-14,
            epsrel=1e-13,
            limit=200,
        )
        return value

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        if m.ndim > 1:
            # the normaliser is constant along each G-orbit
            num = self.window(m)
            unit = self.group.direction / np.linalg.norm(self.group.direction)
            proj = np.round(m - np.outer(m @ unit, unit), 12)
            lines, inverse = np.unique(proj, axis=0, return_inverse=True)
            norms = np.array([self.line_integral(p) for p in lines])[inverse.ravel()]
            return np.where(num > 0, num / np.where(norms > 0, norms, 1.0), 0.0)
        num = float(self.window(m))
        if num == 0.0:
            return 0.0
        return num / self.line_integral(m)

    def transverse_representatives(self, m: np.ndarray) -> np.ndarray:
        """One point per distinct G-orbit (line) among the rows of m."""
        m = np.atleast_2d(np.asarray(m, dtype=float))
        unit = self.group.direction / np.linalg.norm(self.group.direction)
        proj = m - np.outer(m @ unit, unit)
        _, first = np.unique(np.round(proj, 12), axis=0, return_index=True)
        return proj[np.sort(first)]

    def partition_sum(self, m):
        # chi restricted to a line is w / (line integral of w), constant normaliser
        out = []
        for row in np.atleast_2d(np.asarray(m, dtype=float)):
            norm = self.line_integral(row)
            span = self.window.line_support(row, self.group.direction)
            if span is None or norm == 0.0:
                out.append(0.0)
                continue
            value, _ = quad(
                lambda a: float(self.window(row + a * self.group.direction)) / norm,
                span[0],
                span[1],
                epsabs=1e-14,
                epsrel=1e-13,
                limit=200,
            )
            out.append(value)
        return np.array(out)


def build_cutoff(
    window: Optional[BumpWindow],
    model: GroupModel,
    chart: CoverChart,
    search_radius: int = 3,
    samples: int = 1000,
) -> CutoffFunction:
    """Build chi by pointwise normalisation of the bump over the group orbit.

    Raises CoverageFailure when translates of the window fail to cover a sampled point
    of the chart's sample box.
    """
    if isinstance(model, TrivialGroup):
        if window is not None:
            log.debug("Trivial group: window ignored, chi is the constant 1")
        return ConstantCutoff(1.0)

    if isinstance(model, FiniteGroup) and window is None:
        return ConstantCutoff(1.0 / model.size, model.size)

    if window is None:
        raise ValidationError(
            "group.window", f"a {model.kind} group needs a cutoff window"
        )

    grid = chart.sample_grid(samples)

    if isinstance(model, TranslationLine):
        cutoff = LineCutoff(window, model)
        grid = cutoff.transverse_representatives(grid)
        coverage = np.array([cutoff.line_integral(m) for m in grid])
    elif isinstance(model, FiniteGroup):
        cutoff = QuotientCutoff(window, model, model.ball())
        coverage = cutoff.denominator(grid)
    elif isinstance(model, FreeAbelianGroup):
        if not window.compact:
            raise ValidationError(
                "window.floor", "free-abelian cutoffs need a compactly supported window"
            )
        cutoff = QuotientCutoff(window, model, model.ball(search_radius))
        coverage = cutoff.denominator(grid)
        _check_properness(cutoff, model, window, search_radius)
    else:
        raise ValidationError("group.kind", f"unsupported group kind {model.kind}")

    worst = int(np.argmin(coverage))
    if coverage[worst] < COVERAGE_FLOOR:
        raise CoverageFailure(
            f"Window translates do not cover the chart: coverage {coverage[worst]:.3e}"
            f" at m = {grid[worst].tolist()}"
        )
    residual = cutoff.partition_residual(grid)
    log.debug(f"Cutoff built for {model.kind} group, partition residual {residual:.3e}")
    return cutoff


def _check_properness(
    cutoff: QuotientCutoff, model: FreeAbelianGroup, window: BumpWindow, radius: int
):
    """Every x with x supp(w) meeting supp(w) must lie inside the candidate ball."""
    center = np.asarray(window.center)
    dim = center.size
    offsets = np.linspace(-1, 1, 5)
    candidates = [center]
    for axis in range(dim):
        for off in offsets:
            p = center.copy()
            p[axis] += 0.999 * window.radius * off
            candidates.append(p)
    wider = model.ball(radius + 1)
    hits = set()
    for p in candidates:
        for x in wider:
            if window(model.act(x, p)) > 0:
                hits.add(x)
    outside = [x for x in hits if model.word_length(x) > radius]
    log.debug(f"Properness: {len(hits)} translates meet the window support")
    if outside:
        raise CoverageFailure(
            f"search_radius {radius} is too small:"
            f" {str(sorted(outside)[0])} reaches the window"
        )

