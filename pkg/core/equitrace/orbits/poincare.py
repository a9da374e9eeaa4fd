"""Linearised delocalised Poincare maps and chi-primitive periods of orbit classes."""

import logging
from dataclasses import replace
from typing import Callable, List, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import null_space

from equitrace.exceptions import SupportEscape
from equitrace.flow.system import CoverSystem
from equitrace.geometry.cutoff import CutoffFunction
from equitrace.geometry.group import FreeAbelianGroup, TranslationLine
from equitrace.geometry.maps import AffineMap, ChartMap
from equitrace.orbits.orbit import (
    PROPER_LINE,
    DelocalizedOrbit,
    Identification,
    PoincareData,
    action_of,
)

log = logging.getLogger(__name__)

DEFAULT_VALUES = {
    "det_threshold": 1e-8,
    "gauss_nodes": 16,
    "min_panels": 8,
    "max_panels": 4096,
    "quadrature_tol": 1e-12,
    "tail_fraction": 0.1,
    "tail_samples": 64,
}


def poincare(
    system: CoverSystem,
    orbit: DelocalizedOrbit,
    threshold: float = DEFAULT_VALUES["det_threshold"],
) -> PoincareData:
    """P on the Euclidean complement of u(m0) and det(I - P).

    A_full = D(phi_l)(x^-1 m0) . D(x^-1)(m0) fixes u(m0); in the basis (u0, e_2, .., e_n)
    with e_i orthonormal in u0-perp it is block triangular and P is the lower block.
    """
    X = action_of(system, orbit)
    X_inv = X.inverse()
    field = system.field
    m0 = orbit.m0
    _, jac = field.flow_with_jacobian(X_inv(m0), orbit.l)
    A_full = jac @ X_inv.jacobian(m0)

    u0 = field.velocity(m0)
    basis = np.column_stack([u0, null_space(u0[np.newaxis, :])])
    C = np.linalg.solve(basis, A_full @ basis)
    P = C[1:, 1:]
    det = float(np.linalg.det(np.eye(P.shape[0]) - P))
    eigen_residual = float(np.linalg.norm(A_full @ u0 - u0))
    if eigen_residual > threshold:
        log.warning(
            f"A_full u(m0) differs from u(m0) by {eigen_residual:.3e}"
            f" on orbit {orbit.ident}"
        )
    return PoincareData(
        P=P,
        det_one_minus_p=det,
        nondegenerate=abs(det) >= threshold,
        eigen_residual=eigen_residual,
    )


def _gauss_legendre(f: Callable, a: float, b: float, panels: int) -> float:
    nodes, weights = leggauss(DEFAULT_VALUES["gauss_nodes"])
    edges = np.linspace(a, b, panels + 1)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    s = (mid[:, np.newaxis] + half[:, np.newaxis] * nodes).ravel()
    w = (half[:, np.newaxis] * weights).ravel()
    return float(np.sum(f(s) * w))


def integrate_adaptive(f: Callable, a: float, b: float) -> float:
    """Composite Gauss-Legendre, doubling the panel count until the value settles."""
    panels = DEFAULT_VALUES["min_panels"]
    previous = _gauss_legendre(f, a, b, panels)
    while panels < DEFAULT_VALUES["max_panels"]:
        panels *= 2
        current = _gauss_legendre(f, a, b, panels)
        tol = DEFAULT_VALUES["quadrature_tol"] * max(1.0, abs(current))
        if abs(current - previous) <= tol:
            return current
        previous = current
    log.warning(f"Quadrature on [{a}, {b}] not settled at {panels} panels")
    return previous


def _summand_maps(
    system: CoverSystem,
    orbit: DelocalizedOrbit,
    cutoff: CutoffFunction,
    curve: np.ndarray,
) -> List[ChartMap]:
    """Identifications z whose translates z.gamma can meet the support of chi."""
    group = system.group
    if system.is_quotient_run or isinstance(group, TranslationLine):
        return [AffineMap.identity(system.chart.dim)]
    if isinstance(group, FreeAbelianGroup):
        window = cutoff.window
        center = np.asarray(window.center)
        step = float(np.max(np.linalg.norm(np.diff(curve, axis=0), axis=-1), initial=0.0))
        maps = []
        for z in group.ball(system.search_radius + 2):
            f = group.action_map(z)
            if np.min(np.linalg.norm(f(curve) - center, axis=-1)) <= window.radius + step:
                maps.append(f)
        return maps
    return Identification(system, orbit.x).maps


def primitive_period(
    system: CoverSystem, orbit: DelocalizedOrbit, cutoff: Optional[CutoffFunction] = None
) -> float:
    """T_gamma: the integral of chi along one injective sweep of the orbit class.

    Periodic and discrete proper-line orbits integrate sum_z chi(z gamma(s)) over one
    identified return time tau. Proper lines of the translation line integrate chi along
    the whole curve, growing the span until chi vanishes near both ends.
    """
    cutoff = system.cutoff if cutoff is None else cutoff
    field = system.field

    if orbit.kind == PROPER_LINE and orbit.tau is None:
        span = max(1.0, abs(orbit.l))
        while True:
            if span > field.t_max:
                raise SupportEscape(
                    f"chi does not vanish along orbit {orbit.ident}"
                    f" within t_max = {field.t_max}"
                )
            forward = field.trajectory(orbit.m0, span)
            backward = field.trajectory(orbit.m0, -span)
            tail = np.linspace(
                (1 - DEFAULT_VALUES["tail_fraction"]) * span,
                span,
                DEFAULT_VALUES["tail_samples"],
            )
            ends = np.concatenate([forward(tail).T, backward(-tail).T])
            if np.all(np.asarray(cutoff(ends)) == 0):
                break
            span *= 2

        def integrand(s):
            points = np.where(
                (s >= 0)[:, np.newaxis], forward(np.abs(s)).T, backward(-np.abs(s)).T
            )
            return np.asarray(cutoff(points), dtype=float)

        value = integrate_adaptive(integrand, -span, 0.0) + integrate_adaptive(
            integrand, 0.0, span
        )
        log.debug(f"T_gamma for {orbit.ident} over [-{span}, {span}]: {value:.15g}")
        return value

    tau = orbit.tau
    sol = field.trajectory(orbit.m0, tau)
    curve = sol(np.linspace(0.0, tau, 65)).T
    maps = _summand_maps(system, orbit, cutoff, curve)

    def integrand(s):
        points = sol(s).T
        total = np.zeros(s.size)
        for f in maps:
            total = total + np.asarray(cutoff(f(points)), dtype=float)
        return total

    value = integrate_adaptive(integrand, 0.0, tau)
    log.debug(f"T_gamma for {orbit.ident} over {len(maps)} translates: {value:.15g}")
    return value


def annotate(
    system: CoverSystem,
    orbits: List[DelocalizedOrbit],
    threshold: float = DEFAULT_VALUES["det_threshold"],
    cutoff: Optional[CutoffFunction] = None,
) -> List[DelocalizedOrbit]:
    """Attach Poincare data and T_gamma to every orbit."""
    return [
        replace(
            o,
            poincare=poincare(system, o, threshold),
            t_gamma=primitive_period(system, o, cutoff),
        )
        for o in orbits
    ]
