"""Flat g-trace pairings from a gaussian-mollified delta on the graph of the flow.

For each width eps the integral

    sum over h Z of
        int int chi(m) psi(t) tr(A(m) rho(x, p) Phi_t(p)^-1) g_eps(phi_t(p) - m) dt dm,

with x = h g h^-1 and p = x^-1 m, is evaluated by midpoint quadrature on cells of side at
most eps / 4. Cells are refined from a coarse grid and pruned once a Lipschitz bound puts
|phi_t(p) - m| beyond kappa * eps everywhere in the cell. The ladder of widths is then
Richardson-extrapolated to eps = 0.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from equitrace.exceptions import (
    NonConvergentLadder,
    QuadratureBudgetExceeded,
    ValidationError,
)
from equitrace.flow.system import CoverSystem
from equitrace.geometry.group import GroupElt
from equitrace.geometry.maps import AffineMap, ChartMap
from equitrace.trace.testfn import TestFunction
from equitrace.util.parallel import ordered_map

log = logging.getLogger(__name__)

DEFAULT_VALUES = {
    "epsilons": (0.08, 0.04, 0.02),
    "kappa": 4.5,
    "max_nodes": 20_000_000,
    "coarse_cells": 8,
    "leaf_fraction": 0.25,
    "leaf_chunk": 50_000,
}


@dataclass(frozen=True)
class MollifierSpec:
    epsilons: Tuple[float, ...] = DEFAULT_VALUES["epsilons"]
    kappa: float = DEFAULT_VALUES["kappa"]
    max_nodes: int = DEFAULT_VALUES["max_nodes"]

    def __post_init__(self):
        if not self.epsilons:
            raise ValidationError("oracle.epsilons", "at least one width is needed")
        if any(e <= 0 for e in self.epsilons):
            raise ValidationError("oracle.epsilons", "widths must be positive")
        if any(a <= b for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ValidationError("oracle.epsilons", "widths must be strictly decreasing")
        if self.kappa <= 0:
            raise ValidationError("oracle.kappa", "kappa must be positive")


@dataclass
class MollifiedResult:
    epsilons: List[float]
    values: List[float]
    extrapolate: float
    order: Optional[float] = None
    nodes: List[int] = field(default_factory=list)

    def to_dict(self):
        return {
            "epsilons": self.epsilons,
            "values": self.values,
            "extrapolate": self.extrapolate,
            "order": self.order,
            "nodes": self.nodes,
        }


def gaussian_kernel(F: np.ndarray, eps: float) -> np.ndarray:
    """Normalised isotropic gaussian of width eps evaluated at the rows of F."""
    n = F.shape[-1]
    norm = (2 * math.pi * eps**2) ** (-n / 2)
    return norm * np.exp(-np.sum(F**2, axis=-1) / (2 * eps**2))


class _Integrand:
    """Pieces of the mollified integrand for one conjugate x = h g h^-1."""

    def __init__(self, system: CoverSystem, x: GroupElt, psi: TestFunction):
        self.system = system
        self.x = x
        self.psi = psi
        self.n = system.chart.dim
        if system.is_quotient_run:
            self.x_inv: ChartMap = AffineMap.identity(self.n)
        else:
            self.x_inv = system.group.action_map(x).inverse()

    def displacement(self, cells: np.ndarray) -> np.ndarray:
        m, t = cells[:, : self.n], cells[:, self.n]
        ends = self.system.field.flow_batch(self.x_inv(m), t)
        if self.system.is_quotient_run:
            return self.system.chart.quotient.displacement(ends, m)
        return ends - m

    def __call__(self, cells: np.ndarray, eps: float) -> np.ndarray:
        system = self.system
        bundle = system.bundle
        m, t = cells[:, : self.n], cells[:, self.n]
        p = self.x_inv(m)
        if bundle.is_scalar_trivial:
            ends = system.field.flow_batch(p, t)
            traces = np.ones(m.shape[0])
        else:
            ends, Phi = bundle.transport_batch(p, t)
            if system.is_quotient_run:
                rho = np.broadcast_to(np.eye(bundle.rank), Phi.shape)
            else:
                rho = np.stack([bundle.fiber_action(self.x, q) for q in p])
            A = np.broadcast_to(bundle.endomorphism(m), Phi.shape)
            traces = np.einsum("nii->n", A @ rho @ np.linalg.inv(Phi))
        if system.is_quotient_run:
            F = system.chart.quotient.displacement(ends, m)
        else:
            F = ends - m
        chi = np.asarray(system.cutoff(m), dtype=float)
        return chi * self.psi(t) * traces * gaussian_kernel(F, eps)


def _integration_box(system: CoverSystem, psi: TestFunction) -> np.ndarray:
    window = system.cutoff.window
    if system.is_quotient_run or window is None or not window.compact:
        box = [list(b) for b in system.chart.sample_box]
    else:
        center = np.asarray(window.center, dtype=float)
        box = [[c - window.radius, c + window.radius] for c in center]
    box.append(list(psi.support))
    return np.array(box, dtype=float)


def _outside_window(
    system: CoverSystem, cells: np.ndarray, half: np.ndarray
) -> np.ndarray:
    """Cells whose chart part misses the support of chi."""
    window = system.cutoff.window
    n = system.chart.dim
    if system.is_quotient_run or window is None or not window.compact:
        return np.zeros(cells.shape[0], dtype=bool)
    gap = np.maximum(np.abs(cells[:, :n] - np.asarray(window.center)) - half[:n], 0.0)
    return np.linalg.norm(gap, axis=-1) >= window.radius


def _lipschitz(F: np.ndarray, shape: Sequence[int], spacing: np.ndarray) -> np.ndarray:
    """Per-axis bound on |dF| from neighbouring coarse centres, doubled."""
    grid = F.reshape(tuple(shape) + (F.shape[-1],))
    bounds = np.empty(len(shape))
    for d in range(len(shape)):
        diffs = np.linalg.norm(np.diff(grid, axis=d), axis=-1)
        bounds[d] = 2.0 * float(np.max(diffs)) / spacing[d]
    return bounds


def _children(cells: np.ndarray, half: np.ndarray) -> np.ndarray:
    dims = cells.shape[1]
    grid = np.meshgrid(*[[-1.0, 1.0]] * dims, indexing="ij")
    signs = np.array(grid).reshape(dims, -1).T
    return (cells[:, np.newaxis, :] + signs * (half / 2)).reshape(-1, dims)


def _refine(
    integrand: _Integrand, cells: np.ndarray, half: np.ndarray, reach: float
) -> np.ndarray:
    """Children of `cells` whose displacement can come within `reach`.

    Parents are split a chunk at a time so only surviving children are held at once.
    """
    system = integrand.system
    step = max(1, DEFAULT_VALUES["leaf_chunk"] >> cells.shape[1])
    kept = [cells[:0]]
    for i in range(0, cells.shape[0], step):
        kids = _children(cells[i : i + step], half)
        near = np.linalg.norm(integrand.displacement(kids), axis=-1) <= reach
        kept.append(kids[near & ~_outside_window(system, kids, half / 2)])
    return np.concatenate(kept)


def _integrate_single(
    integrand: _Integrand, box: np.ndarray, eps: float, spec: MollifierSpec, n_jobs: int
) -> Tuple[float, int]:
    system = integrand.system
    lengths = box[:, 1] - box[:, 0]
    leaves = np.ceil(lengths / (DEFAULT_VALUES["leaf_fraction"] * eps))
    levels = max(0, math.ceil(math.log2(max(leaves) / DEFAULT_VALUES["coarse_cells"])))
    coarse = np.maximum(2, np.ceil(leaves / 2**levels)).astype(int)
    spacing = lengths / coarse
    axes = [
        lo + spacing[d] * (np.arange(coarse[d]) + 0.5) for d, (lo, _) in enumerate(box)
    ]
    cells = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T
    half = spacing / 2

    F = integrand.displacement(cells)
    lipschitz = _lipschitz(F, coarse, spacing)
    evaluated = cells.shape[0]
    log.debug(
        f"eps={eps}: coarse grid {coarse.tolist()}, {levels} levels,"
        f" Lipschitz bounds {np.round(lipschitz, 3).tolist()}"
    )
    reach = 2.0 * float(lipschitz @ half) + spec.kappa * eps
    near = np.linalg.norm(F, axis=-1) <= reach
    cells = cells[near & ~_outside_window(system, cells, half)]
    log.debug(f"eps={eps}: level 0 keeps {cells.shape[0]} cells")

    for level in range(1, levels + 1):
        if cells.shape[0] == 0:
            break
        evaluated += cells.shape[0] * 2 ** cells.shape[1]
        if evaluated > spec.max_nodes:
            raise QuadratureBudgetExceeded(
                f"Mollified quadrature at eps={eps} needs more than"
                f" {spec.max_nodes} nodes"
            )
        reach = 2.0 * float(lipschitz @ (half / 2)) + spec.kappa * eps
        cells = _refine(integrand, cells, half, reach)
        half = half / 2
        log.debug(f"eps={eps}: level {level} keeps {cells.shape[0]} cells")

    if cells.shape[0] == 0:
        return 0.0, evaluated
    evaluated += cells.shape[0]
    if evaluated > spec.max_nodes:
        raise QuadratureBudgetExceeded(
            f"Mollified quadrature at eps={eps} needs more than {spec.max_nodes} nodes"
        )
    volume = float(np.prod(2 * half))
    chunk = DEFAULT_VALUES["leaf_chunk"]
    order = np.lexsort(cells.T[::-1])
    cells = cells[order]
    parts = [cells[i : i + chunk] for i in range(0, cells.shape[0], chunk)]
    sums = ordered_map(lambda part: math.fsum(integrand(part, eps)), parts, n_jobs)
    return math.fsum(sums) * volume, evaluated


def richardson(
    epsilons: Sequence[float], values: Sequence[float]
) -> Tuple[float, Optional[float]]:
    """Extrapolate the ladder to eps = 0 with an empirically estimated order."""
    if len(values) == 1:
        return values[0], None
    ratio = epsilons[-2] / epsilons[-1]
    if len(values) == 2:
        order = 2.0
    else:
        d1 = abs(values[-3] - values[-2])
        d2 = abs(values[-2] - values[-1])
        scale = max(1.0, abs(values[-1]))
        if d2 <= 1e-12 * scale:
            return values[-1], None
        if d2 >= d1:
            raise NonConvergentLadder(
                f"Mollified values are not settling: {['%.10g' % v for v in values]}"
            )
        order = float(np.clip(math.log(d1 / d2) / math.log(ratio), 1.0, 4.0))
    extrapolate = values[-1] + (values[-1] - values[-2]) / (ratio**order - 1)
    return extrapolate, order


def mollified_trace(
    system: CoverSystem,
    g: GroupElt,
    psi: TestFunction,
    spec: MollifierSpec = MollifierSpec(),
    radius: int = 0,
    n_jobs: int = 1,
) -> MollifiedResult:
    box = _integration_box(system, psi)
    reps = system.group.coset_representatives(g, radius)
    integrands = [_Integrand(system, system.group.conjugate(h, g), psi) for h in reps]
    values, nodes = [], []
    for eps in spec.epsilons:
        total, count = [], 0
        for integrand in integrands:
            value, used = _integrate_single(integrand, box, eps, spec, n_jobs)
            total.append(value)
            count += used
        values.append(math.fsum(total))
        nodes.append(count)
        log.info(f"Mollified value at eps={eps}: {values[-1]:.12g} ({count} nodes)")
    trend = np.diff(values)
    if trend.size > 1 and not (np.all(trend >= 0) or np.all(trend <= 0)):
        log.warning(f"Mollified ladder is not monotone: {values}")
    extrapolate, order = richardson(spec.epsilons, values)
    return MollifiedResult(list(spec.epsilons), values, extrapolate, order, nodes)
