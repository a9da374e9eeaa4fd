"""Detection of (x, l)-periodic flow curves.

Seeds (m, l) come from a grid over the chart's sample box and a grid of periods; seeds
whose defining residual |phi_l(m) - x m| is a local minimum in l and small enough are
refined by a damped Newton method on the (n+1) unknowns (m, l) with a phase condition
pinning the time shift. Converged curves are classified, deduplicated modulo time shift
and identification, and returned sorted by (l, m0).
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from equitrace.exceptions import (
    NoConvergence,
    SingularJacobian,
    StepFailure,
    ValidationError,
)
from equitrace.flow.system import CoverSystem
from equitrace.geometry.group import GroupElt, TranslationLine
from equitrace.orbits.orbit import (
    PERIODIC,
    PROPER_LINE,
    DelocalizedOrbit,
    Identification,
    PeriodWindow,
    action_of,
)
from equitrace.util.parallel import ordered_map

log = logging.getLogger(__name__)

DEFAULT_VALUES = {
    "residual_tol": 1e-9,
    "max_iter": 50,
    "period_tol": 1e-7,
    "point_tol": 1e-6,
    "closure_tol": 1e-9,
    "max_divisor": 12,
    "condition_limit": 1e12,
    "curve_samples": 64,
}


@dataclass(frozen=True)
class SeedSpec:
    points: int = 64
    periods: int = 24
    tolerance: float = 0.5

    def doubled(self) -> "SeedSpec":
        return replace(self, points=2 * self.points, periods=2 * self.periods)


def _orbit_residual(system, X, m, l) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    end, jac = system.field.flow_with_jacobian(m, l)
    return end - X(m), end, jac


def refine(
    system: CoverSystem,
    seed: Tuple[Sequence[float], float],
    x: GroupElt,
    deck: Optional[Tuple[int, ...]] = None,
    residual_tol: float = DEFAULT_VALUES["residual_tol"],
    max_iter: int = DEFAULT_VALUES["max_iter"],
) -> DelocalizedOrbit:
    """Damped Newton for phi_l(m) = x m together with <u(m_seed), m - m_seed> = 0.

    In quotient runs the deck transformation nearest phi_l(m_seed) stands in for x.
    """
    field = system.field
    n = field.dim
    m_seed = system.chart.point(seed[0])
    l = float(seed[1])
    if system.is_quotient_run and deck is None:
        _, deck = system.chart.quotient.reduce(field.flow(m_seed, l), m_seed)
    orbit = DelocalizedOrbit(x=x, l=l, m0=m_seed, residual=np.inf, deck=deck)
    X = action_of(system, orbit)
    u_seed = field.velocity(m_seed)

    m = m_seed.copy()
    F, end, jac = _orbit_residual(system, X, m, l)
    history = [float(np.linalg.norm(F))]
    while history[-1] > residual_tol:
        if len(history) > max_iter:
            raise NoConvergence(
                f"Newton did not converge from seed l={seed[1]}:"
                f" residual {history[-1]:.3e}"
            )
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = jac - X.jacobian(m)
        J[:n, n] = field.velocity(end)
        J[n, :n] = u_seed
        if np.linalg.cond(J) > DEFAULT_VALUES["condition_limit"]:
            raise SingularJacobian(
                f"Newton system is singular near m={m.tolist()}, l={l}"
                f" (residual {history[-1]:.3e})"
            )
        R = np.append(F, u_seed @ (m - m_seed))
        step = np.linalg.solve(J, -R)
        if not np.all(np.isfinite(step)):
            raise NoConvergence(f"Newton step is not finite near l={l}")
        alpha = 1.0
        while True:
            m_new, l_new = m + alpha * step[:n], l + alpha * step[n]
            if abs(l_new) > field.t_max:
                raise NoConvergence(f"Newton left the time horizon: l = {l_new}")
            F_new, end_new, jac_new = _orbit_residual(system, X, m_new, l_new)
            norm_new = float(
                np.linalg.norm(np.append(F_new, u_seed @ (m_new - m_seed)))
            )
            if norm_new < history[-1] or alpha < 1 / 256:
                break
            alpha /= 2
        m, l, F, end, jac = m_new, l_new, F_new, end_new, jac_new
        history.append(norm_new)

    log.debug(f"Newton residuals: {['%.2e' % h for h in history]}")
    return replace(orbit, l=l, m0=m, residual=float(np.linalg.norm(F)))


def _least_squares_orbit(
    system: CoverSystem,
    seed,
    x: GroupElt,
    deck,
    max_iter: int = DEFAULT_VALUES["max_iter"],
) -> Optional[DelocalizedOrbit]:
    """Gauss-Newton with minimum-norm steps, used where the Newton system is singular.

    Convergence here means an (x, l)-curve exists along which the flow is degenerate.
    """
    field = system.field
    n = field.dim
    m_seed = system.chart.point(seed[0])
    l = float(seed[1])
    orbit = DelocalizedOrbit(x=x, l=l, m0=m_seed, residual=np.inf, deck=deck)
    X = action_of(system, orbit)
    u_seed = field.velocity(m_seed)
    m = m_seed.copy()
    for _ in range(max_iter):
        F, end, jac = _orbit_residual(system, X, m, l)
        R = np.append(F, u_seed @ (m - m_seed))
        if np.linalg.norm(R) <= DEFAULT_VALUES["residual_tol"]:
            return replace(orbit, l=l, m0=m, residual=float(np.linalg.norm(F)))
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = jac - X.jacobian(m)
        J[:n, n] = field.velocity(end)
        J[n, :n] = u_seed
        step, *_ = np.linalg.lstsq(J, -R, rcond=1e-10)
        m, l = m + step[:n], l + step[n]
        if abs(l) > field.t_max:
            return None
    return None


def _neighbour_stats(
    res: np.ndarray, axes: Sequence[int]
) -> Tuple[np.ndarray, np.ndarray]:
    """Per cell: whether it is a local minimum along `axes`, and its largest finite
    neighbour along them."""
    local_min = np.ones(res.shape, dtype=bool)
    largest = np.zeros(res.shape)
    for axis in axes:
        width = [(0, 0)] * res.ndim
        width[axis] = (1, 1)
        padded = np.pad(res, width, constant_values=np.inf)
        for shift in (0, 2):
            nb = np.take(padded, np.arange(shift, shift + res.shape[axis]), axis=axis)
            local_min &= res <= nb
            largest = np.maximum(largest, np.where(np.isfinite(nb), nb, 0.0))
    return local_min, largest


def _select_seeds(
    system: CoverSystem, x: GroupElt, window: PeriodWindow, seeds: SeedSpec
) -> List[Tuple[np.ndarray, float]]:
    """Grid seeds at local minima of the residual over the (l, m) grid.

    A seed is kept when its residual is a minimum along l and below the tolerance, or
    when it is a minimum along every grid axis with 2 res <= tolerance + its largest
    neighbour. Near a transversal root the far neighbour always exceeds twice the
    residual, however steeply x expands.
    """
    points = system.chart.sample_grid(seeds.points)
    shape = system.chart.grid_shape(seeds.points)
    X = None if system.is_quotient_run else system.group.action_map(x)
    selected = []
    for lo, hi in window.intervals:
        periods = np.linspace(lo, hi, seeds.periods)
        res = np.empty((periods.size, points.shape[0]))
        for i, l in enumerate(periods):
            ends = system.field.flow_batch(points, np.full(points.shape[0], l))
            if X is None:
                gap = system.chart.quotient.displacement(ends, points)
            else:
                gap = ends - X(points)
            res[i] = np.linalg.norm(gap, axis=-1)
        grid = res.reshape((periods.size,) + shape)
        along_l, _ = _neighbour_stats(grid, [0])
        everywhere, largest = _neighbour_stats(grid, range(grid.ndim))
        keep = (along_l & (grid <= seeds.tolerance)) | (
            everywhere & (2 * grid <= seeds.tolerance + largest)
        )
        for i, j in zip(*np.nonzero(keep.reshape(res.shape))):
            selected.append((points[j], float(periods[i])))
    log.debug(f"{len(selected)} seeds selected for x={x}")
    return selected


def _try_refine(system: CoverSystem, seed, x: GroupElt) -> Optional[DelocalizedOrbit]:
    try:
        return refine(system, seed, x)
    except NoConvergence as exc:
        log.debug(f"Seed discarded: {exc.message}")
    except StepFailure as exc:
        log.debug(f"Seed discarded after integration failure: {exc.message}")
    except SingularJacobian as exc:
        log.info(f"Singular Newton system: {exc.message}")
        deck = None
        if system.is_quotient_run:
            m = system.chart.point(seed[0])
            _, deck = system.chart.quotient.reduce(system.field.flow(m, seed[1]), m)
        try:
            return _least_squares_orbit(system, seed, x, deck)
        except (NoConvergence, StepFailure) as inner:
            log.debug(f"Least-squares fallback discarded: {inner.message}")
    return None


def classify(system: CoverSystem, orbit: DelocalizedOrbit) -> DelocalizedOrbit:
    """Shortest identified return time tau, kind and primitive period T#.

    Candidate return times are |l| / j for j = 12, ..., 1; the smallest one closing up to
    an identified point wins.
    """
    field = system.field
    ident = Identification(system, orbit.x)
    group = system.group
    if ident.kind == "line" and orbit.x != group.identity():
        return replace(orbit, kind=PROPER_LINE, tau=None, t_sharp=None)

    tol = max(DEFAULT_VALUES["closure_tol"], 10 * orbit.residual)
    tau, z = abs(orbit.l), None
    for j in range(DEFAULT_VALUES["max_divisor"], 0, -1):
        candidate = abs(orbit.l) / j
        p = field.flow(orbit.m0, candidate)
        if ident.kind == "line":
            z, dist = group.identity(), float(np.linalg.norm(p - orbit.m0))
        else:
            z, _, dist = ident.nearest(p, orbit.m0)
        if dist <= tol:
            tau = candidate
            break
    else:
        log.warning(f"No return time found for orbit at l={orbit.l}; using |l|")

    if system.is_quotient_run or z is None:
        return replace(orbit, kind=PERIODIC, tau=tau, t_sharp=tau)
    order = group.order(z)
    if order is None:
        return replace(orbit, kind=PROPER_LINE, tau=tau, t_sharp=None)
    return replace(orbit, kind=PERIODIC, tau=tau, t_sharp=order * tau)


def _curve_samples(
    system: CoverSystem, orbit: DelocalizedOrbit
) -> Tuple[object, np.ndarray]:
    span = orbit.tau if orbit.tau is not None else abs(orbit.l)
    sol = system.field.trajectory(orbit.m0, span)
    s = np.linspace(0.0, span, DEFAULT_VALUES["curve_samples"] + 1)
    return sol, s


def same_class(
    system: CoverSystem, a: DelocalizedOrbit, b: DelocalizedOrbit, sol=None, s=None
) -> bool:
    """Whether b lies on an identified image of a, after an optimal time shift."""
    if abs(a.l - b.l) > DEFAULT_VALUES["period_tol"]:
        return False
    if sol is None:
        sol, s = _curve_samples(system, a)
    ident = Identification(system, a.x)
    curve = sol(s).T
    gaps = ident.gaps(b.m0, curve)
    i = int(np.argmin(gaps))
    speed = float(np.max(np.linalg.norm(system.field.velocity(curve), axis=-1)))
    if gaps[i] > speed * (s[1] - s[0]) + DEFAULT_VALUES["point_tol"]:
        return False
    t = s[i]
    for _ in range(4):
        c = sol(t)
        _, zmap, _ = ident.nearest(b.m0, c)
        w = zmap.jacobian(c) @ system.field.velocity(c)
        t = float(np.clip(t + (b.m0 - zmap(c)) @ w / (w @ w), s[0], s[-1]))
    _, _, dist = ident.nearest(b.m0, sol(t))
    return dist <= DEFAULT_VALUES["point_tol"]


def dedup(system: CoverSystem, orbits: List[DelocalizedOrbit]) -> List[DelocalizedOrbit]:
    reps: List[DelocalizedOrbit] = []
    curves = []
    for orbit in sorted(orbits, key=lambda o: o.sort_key):
        duplicate = False
        for rep, (sol, s) in zip(reps, curves):
            if same_class(system, rep, orbit, sol, s):
                duplicate = True
                break
        if not duplicate:
            reps.append(orbit)
            curves.append(_curve_samples(system, orbit))
    log.debug(f"Dedup kept {len(reps)} of {len(orbits)} converged seeds")
    return reps


def find_orbits(
    system: CoverSystem,
    x: GroupElt,
    window: PeriodWindow,
    seeds: SeedSpec = SeedSpec(),
    n_jobs: int = 1,
) -> List[DelocalizedOrbit]:
    """One representative per time-shift class of (x, l)-curves with l in the window."""
    if max(abs(window.l_min), abs(window.l_max)) > system.field.t_max:
        raise ValidationError("orbits.l_window", "window exceeds the time horizon t_max")
    if isinstance(system.group, TranslationLine) and system.is_quotient_run:
        raise ValidationError("group.kind", "translation lines do not act on quotients")

    selected = _select_seeds(system, x, window, seeds)
    refined = ordered_map(lambda seed: _try_refine(system, seed, x), selected, n_jobs)
    converged = [
        o
        for o in refined
        if o is not None and window.contains(o.l, tol=DEFAULT_VALUES["period_tol"])
    ]
    classified = ordered_map(lambda o: classify(system, o), converged, n_jobs)
    orbits = dedup(system, classified)
    for i, orbit in enumerate(orbits):
        orbit.ident = f"{orbit.label}#{i}"
    log.info(f"Found {len(orbits)} orbit classes for x={x} in {window.to_list()}")
    return orbits


def refinement_stable(
    system: CoverSystem,
    x: GroupElt,
    window: PeriodWindow,
    seeds: SeedSpec,
    orbits: List[DelocalizedOrbit],
    n_jobs: int = 1,
) -> bool:
    """Whether a doubled seed grid finds the same period multiset."""
    finer = find_orbits(system, x, window, seeds.doubled(), n_jobs)
    if len(finer) != len(orbits):
        return False
    return all(
        abs(a.l - b.l) <= DEFAULT_VALUES["period_tol"] for a, b in zip(finer, orbits)
    )


def conjugate_orbits(
    system: CoverSystem, h: GroupElt, orbits: List[DelocalizedOrbit]
) -> List[DelocalizedOrbit]:
    """Carry (g, l)-curves through m0 to (h g h^-1, l)-curves through h m0."""
    group = system.group
    if h == group.identity():
        return list(orbits)
    h_map = group.action_map(h)
    out = []
    for orbit in orbits:
        xc = group.conjugate(h, orbit.x)
        m0 = h_map(orbit.m0)
        end = system.field.flow(m0, orbit.l)
        residual = float(np.linalg.norm(end - group.act(xc, m0)))
        out.append(
            replace(
                orbit,
                x=xc,
                m0=m0,
                residual=residual,
                ident=f"{orbit.ident}^{h}",
                poincare=None,
                t_gamma=None,
            )
        )
    return out
