"""The flat g-trace of A Phi* as a Dirac comb on R \\ {0}, and its pairing with psi."""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from equitrace.exceptions import (
    DegenerateOrbit,
    TIndependenceViolation,
    TruncationWarning,
)
from equitrace.flow.system import CoverSystem
from equitrace.geometry.cutoff import CutoffFunction
from equitrace.geometry.group import FiniteGroup, GroupElt, TrivialGroup
from equitrace.orbits.orbit import DelocalizedOrbit, PeriodWindow, action_of
from equitrace.orbits.poincare import DEFAULT_VALUES as POINCARE_DEFAULTS
from equitrace.orbits.poincare import annotate
from equitrace.orbits.search import SeedSpec, conjugate_orbits, find_orbits
from equitrace.trace.testfn import TestFunction
from equitrace.util.parallel import ordered_map

log = logging.getLogger(__name__)

MERGE_TOL = 1e-7
T_INDEPENDENCE_TOL = 1e-7
SHELL_TOL = 1e-10


@dataclass
class Contribution:
    h: GroupElt
    orbit: DelocalizedOrbit
    fiber_trace: float
    weight: float
    shell: int

    @property
    def key(self) -> str:
        return f"{self.h}|{self.orbit.ident}"


@dataclass
class Atom:
    l: float
    weight: float
    contributors: List[str] = field(default_factory=list)
    classical_weight: Optional[float] = None

    def to_dict(self) -> Dict:
        out = {"l": self.l, "weight": self.weight, "contributors": self.contributors}
        if self.classical_weight is not None:
            out["classical_weight"] = self.classical_weight
        return out


@dataclass
class DeltaComb:
    """Finitely many weighted Dirac atoms, sorted by l, with their provenance."""

    g: GroupElt
    radius: int
    window: PeriodWindow
    atoms: List[Atom] = field(default_factory=list)
    contributions: List[Contribution] = field(default_factory=list)
    shells: Dict[int, float] = field(default_factory=dict)
    diagnostics: Dict = field(default_factory=dict)

    @property
    def total_variation(self) -> float:
        return math.fsum(abs(a.weight) for a in self.atoms)

    def weight_at(self, l: float, tol: float = MERGE_TOL) -> float:
        return math.fsum(a.weight for a in self.atoms if abs(a.l - l) <= tol)

    @property
    def orbits(self) -> List[DelocalizedOrbit]:
        return [c.orbit for c in self.contributions]

    def to_dict(self) -> Dict:
        return {
            "g": str(self.g),
            "radius": self.radius,
            "window": self.window.to_list(),
            "atoms": [a.to_dict() for a in self.atoms],
            "shells": {str(k): v for k, v in sorted(self.shells.items())},
            "diagnostics": self.diagnostics,
        }


def _trace_at(system: CoverSystem, orbit: DelocalizedOrbit, m: np.ndarray) -> float:
    bundle = system.bundle
    X_inv = action_of(system, orbit).inverse()
    start = X_inv(m)
    transport = np.linalg.inv(bundle.fiber_transport(start, orbit.l))
    if orbit.deck is None:
        rho = bundle.fiber_action(orbit.x, start)
    else:
        rho = np.eye(bundle.rank)
    return float(np.trace(bundle.endomorphism(m) @ rho @ transport))


def fiber_trace(
    system: CoverSystem,
    orbit: DelocalizedOrbit,
    rng: Optional[np.random.Generator] = None,
    checks: int = 3,
) -> float:
    """tr(A rho(x, .) Phi_{-l}) at gamma(0), re-evaluated at gamma(t) for random t.

    Phi_{-l}(m0) is taken as the inverse of Phi_l at x^-1 m0, which carries the fiber over
    m0 back along the curve.
    """
    if system.bundle.is_scalar_trivial:
        return 1.0
    rng = np.random.default_rng(0) if rng is None else rng
    value = _trace_at(system, orbit, orbit.m0)
    for t in rng.uniform(0.0, abs(orbit.l), size=checks):
        shifted = _trace_at(system, orbit, system.field.flow(orbit.m0, t))
        if abs(shifted - value) > T_INDEPENDENCE_TOL * max(1.0, abs(value)):
            raise TIndependenceViolation(
                f"Fiber trace on orbit {orbit.ident} moves from {value:.12g} to"
                f" {shifted:.12g} at t = {t:.6g}"
            )
    return value


def _merge(contributions: List[Contribution], classical: bool) -> List[Atom]:
    atoms: List[Atom] = []
    group: List[Contribution] = []

    def flush():
        if not group:
            return
        atom = Atom(
            l=math.fsum(c.orbit.l for c in group) / len(group),
            weight=math.fsum(c.weight for c in group),
            contributors=[c.key for c in group],
        )
        if classical:
            atom.classical_weight = math.fsum(
                c.orbit.t_sharp / abs(c.orbit.poincare.det_one_minus_p) for c in group
            )
        atoms.append(atom)

    for c in sorted(contributions, key=lambda c: (c.orbit.l, c.key)):
        if group and c.orbit.l - group[0].orbit.l > MERGE_TOL:
            flush()
            group = []
        group.append(c)
    flush()
    return atoms


def assemble(
    system: CoverSystem,
    g: GroupElt,
    window: PeriodWindow,
    radius: int = 0,
    seeds: SeedSpec = SeedSpec(),
    n_jobs: int = 1,
    threshold: float = POINCARE_DEFAULTS["det_threshold"],
    cutoff: Optional[CutoffFunction] = None,
    rng: Optional[np.random.Generator] = None,
) -> DeltaComb:
    """Sum of tr(A rho Phi_{-l}) T_gamma / |det(I - P)| delta_l over hZ and orbit classes.

    Orbits for g are found once and carried to every h g h^-1 by conjugation.
    """
    group = system.group
    rng = np.random.default_rng(0) if rng is None else rng
    reps = group.coset_representatives(g, radius)
    base = find_orbits(system, g, window, seeds, n_jobs)

    streams = dict(zip(reps, rng.integers(2**32, size=len(reps))))

    def contributions_for(h: GroupElt) -> List[Contribution]:
        local = np.random.default_rng(streams[h])
        orbits = annotate(system, conjugate_orbits(system, h, base), threshold, cutoff)
        out = []
        for orbit in orbits:
            if not orbit.poincare.nondegenerate:
                raise DegenerateOrbit(
                    f"Orbit {orbit.ident} at l = {orbit.l:.12g} has det(I - P) ="
                    f" {orbit.poincare.det_one_minus_p:.3e}"
                )
            tr = fiber_trace(system, orbit, local)
            weight = tr * orbit.t_gamma / abs(orbit.poincare.det_one_minus_p)
            out.append(Contribution(h, orbit, tr, weight, group.word_length(h)))
        return out

    per_h = ordered_map(contributions_for, reps, n_jobs)
    contributions = [c for batch in per_h for c in batch]
    classical = isinstance(group, TrivialGroup)
    comb = DeltaComb(
        g=g,
        radius=radius,
        window=window,
        atoms=_merge(contributions, classical),
        contributions=contributions,
    )
    for shell in sorted({c.shell for c in contributions}):
        comb.shells[shell] = math.fsum(
            c.weight for c in contributions if c.shell == shell
        )
    log.debug(f"Shell partial sums: {comb.shells}")

    total = math.fsum(a.weight for a in comb.atoms)
    truncated = False
    if comb.shells and not group.is_abelian and not isinstance(group, FiniteGroup):
        last = comb.shells[max(comb.shells)]
        if abs(last) > SHELL_TOL * max(abs(total), SHELL_TOL):
            truncated = True
            warnings.warn(
                f"Last shell (radius {radius}) still contributes {last:.3e}"
                f" of {total:.3e}",
                TruncationWarning,
            )
    comb.diagnostics.update(
        coset_representatives=[str(h) for h in reps],
        orbit_classes=len(base),
        total_weight=total,
        total_variation=comb.total_variation,
        truncated=truncated,
    )
    log.info(
        f"Assembled {len(comb.atoms)} atoms for g={g} from {len(contributions)} orbits"
    )
    return comb


def pair(comb: DeltaComb, psi: TestFunction) -> float:
    """Sum of weight * psi(l) over the atoms, in sorted order."""
    lo, hi = psi.support
    if not comb.window.covers(lo, hi):
        warnings.warn(
            f"supp psi = [{lo:g}, {hi:g}] leaves the window {comb.window.to_list()}",
            TruncationWarning,
        )
    return math.fsum(a.weight * float(psi(a.l)) for a in comb.atoms)


def scalar_factorization(system: CoverSystem, comb: DeltaComb, **kwargs) -> float:
    """Largest |bundle weight - scalar weight x fiber trace| over matched contributions.

    The scalar run uses the trivial line bundle with A = 1 on the same flow and group.
    """
    scalar = assemble(system.scalar_variant(), comb.g, comb.window, comb.radius, **kwargs)
    scalar_weights = {c.key: c.weight for c in scalar.contributions}
    if set(scalar_weights) != {c.key for c in comb.contributions}:
        log.warning("Scalar and bundle runs found different orbit classes")
        return float("inf")
    errors = [
        abs(c.weight - scalar_weights[c.key] * c.fiber_trace) for c in comb.contributions
    ]
    worst = max(errors, default=0.0)
    log.debug(f"Scalar factorization error {worst:.3e} over {len(errors)} contributions")
    return worst
