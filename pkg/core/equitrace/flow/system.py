import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from equitrace.exceptions import HypothesisViolation, ValidationError
from equitrace.flow.bundle import BundleCocycle
from equitrace.flow.field import FlowField
from equitrace.geometry.chart import CoverChart
from equitrace.geometry.cutoff import BumpWindow, CutoffFunction, build_cutoff
from equitrace.geometry.group import (
    FiniteGroup,
    FreeAbelianGroup,
    GroupElt,
    GroupModel,
    TranslationLine,
    TrivialGroup,
)
from equitrace.geometry.maps import ChartMap

log = logging.getLogger(__name__)

HYPOTHESIS_TOLERANCE = 1e-7
MIN_SPEED = 1e-6


@dataclass
class CoverSystem:
    """Flow, acting group and bundle cocycle on the chart of a cover M."""

    name: str
    chart: CoverChart
    group: GroupModel
    field: FlowField
    bundle: BundleCocycle
    window: Optional[BumpWindow] = None
    search_radius: int = 3
    cutoff: Optional[CutoffFunction] = None

    def __post_init__(self):
        for label, dim in (("group", self.group.dim), ("flow", self.field.dim)):
            if dim != self.chart.dim:
                raise ValidationError(
                    label, f"dimension {dim} differs from the chart ({self.chart.dim})"
                )
        if self.chart.quotient is not None and not isinstance(self.group, TrivialGroup):
            raise ValidationError(
                "chart.quotient", "quotient runs need the trivial group on the quotient"
            )
        if self.cutoff is None:
            self.cutoff = build_cutoff(
                self.window, self.group, self.chart, search_radius=self.search_radius
            )

    @property
    def is_quotient_run(self) -> bool:
        return self.chart.quotient is not None

    def with_window(self, window: Optional[BumpWindow]) -> "CoverSystem":
        return replace(self, window=window, cutoff=None)

    def scalar_variant(self) -> "CoverSystem":
        """Same flow and group with the trivial line bundle and A = 1."""
        bundle = BundleCocycle.from_strings(self.field, self.group)
        return replace(self, bundle=bundle, cutoff=self.cutoff)

    def describe(self) -> str:
        where = self.chart.quotient.describe() if self.is_quotient_run else "cover"
        return (
            f"{self.name}: dim={self.chart.dim} group={self.group.kind} on {where},"
            f" {self.field.describe()}, bundle rank {self.bundle.rank}"
        )


Symmetry = Tuple[str, ChartMap, Optional[Callable]]


def _symmetries(system: CoverSystem, rng: np.random.Generator) -> List[Symmetry]:
    """Group elements (or deck generators) the hypotheses are tested against."""
    group = system.group
    if system.is_quotient_run:
        quotient = system.chart.quotient
        return [
            (f"deck {payload}", quotient.deck_map(payload), None)
            for payload in quotient.generators()
        ]
    if isinstance(group, FreeAbelianGroup):
        elements = []
        for i in range(group.rank):
            for sign in (1, -1):
                payload = tuple(sign if j == i else 0 for j in range(group.rank))
                elements.append(GroupElt(payload))
    elif isinstance(group, FiniteGroup):
        elements = [g for g in group.ball() if g != group.identity()]
    elif isinstance(group, TranslationLine):
        elements = [GroupElt((float(a),)) for a in rng.uniform(-2.0, 2.0, size=3)]
    else:
        elements = []
    return [
        (str(g), group.action_map(g), lambda m, g=g: system.bundle.fiber_action(g, m))
        for g in elements
    ]


def _stack_rho(rho: Optional[Callable], points: np.ndarray, rank: int) -> np.ndarray:
    if rho is None:
        return np.broadcast_to(np.eye(rank), (points.shape[0], rank, rank))
    return np.stack([rho(m) for m in points])


def check_hypotheses(
    system: CoverSystem, samples: int = 64, rng: Optional[np.random.Generator] = None
) -> Dict:
    """Equivariance of the flow and the bundle, and commutation of A, on random samples.

    Raises HypothesisViolation with the worst offender when any measured violation exceeds
    1e-7, or when u gets slower than 1e-6 on the sample grid.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    field, bundle, chart = system.field, system.bundle, system.chart
    r = bundle.rank

    speeds = np.linalg.norm(field.velocity(chart.sample_grid(1000)), axis=-1)
    min_speed = float(np.min(speeds))

    points = chart.random_points(rng, samples)
    base_times = rng.uniform(0.25, 1.5, size=4)
    times = np.clip(np.resize(base_times, samples), -field.t_max, field.t_max)
    end, Phi = bundle.transport_batch(points, times)
    A_start = bundle.endomorphism(points)
    A_end = bundle.endomorphism(end)

    worst = {"check": None, "value": 0.0}
    report = {
        "samples": samples,
        "min_speed": min_speed,
        "flow_equivariance": 0.0,
        "bundle_equivariance": 0.0,
        "commutation": 0.0,
    }

    def record(check: str, errors: np.ndarray, label: str):
        i = int(np.argmax(errors))
        value = float(errors[i])
        report[check] = max(report[check], value)
        if value > worst["value"]:
            worst.update(
                check=check,
                value=value,
                element=label,
                m=points[i].tolist(),
                t=float(times[i]),
            )

    flow_comm = np.abs(A_end @ Phi - Phi @ A_start).reshape(samples, -1).max(axis=1)
    record("commutation", flow_comm, "flow")

    for label, f, rho in _symmetries(system, rng):
        moved = f(points)
        moved_end, moved_Phi = bundle.transport_batch(moved, times)
        flow_err = np.linalg.norm(moved_end - f(end), axis=-1)
        record("flow_equivariance", flow_err, label)

        rho_start = _stack_rho(rho, points, r)
        rho_end = _stack_rho(rho, end, r)
        lift_err = np.abs(rho_end @ Phi - moved_Phi @ rho_start).reshape(samples, -1)
        record("bundle_equivariance", lift_err.max(axis=1), label)

        comm = np.abs(bundle.endomorphism(moved) @ rho_start - rho_start @ A_start)
        record("commutation", comm.reshape(samples, -1).max(axis=1), label)

    log.debug(f"Hypothesis check for {system.name}: {report}")

    if min_speed < MIN_SPEED:
        raise HypothesisViolation(
            f"u nearly vanishes on the sample grid: min |u| = {min_speed:.3e}",
            worst={"check": "min_speed", "value": min_speed},
        )
    if worst["value"] > HYPOTHESIS_TOLERANCE:
        raise HypothesisViolation(
            f"{worst['check']} violated by {worst['value']:.3e} for {worst['element']}",
            worst=worst,
        )
    report["accepted"] = True
    return report
