import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from equitrace.exceptions import ValidationError
from equitrace.flow.expressions import CompiledMatrix, identity_strings, zero_strings
from equitrace.flow.field import DEFAULT_VALUES, FlowField
from equitrace.geometry.group import (
    FiniteGroup,
    FreeAbelianGroup,
    GroupElt,
    GroupModel,
    TranslationLine,
)

log = logging.getLogger(__name__)

LINE_PARAMETER = "a"


class FiberAction:
    """rho(g, m): E_m -> E_{g m}, extended from generators by the cocycle rule
    rho(g h, m) = rho(g, h m) rho(h, m).

    For the translation line, one matrix expression in the coordinates and the
    translation parameter `a` gives rho directly.
    """

    def __init__(
        self,
        group: GroupModel,
        rank: int,
        generators: Optional[List[CompiledMatrix]] = None,
        line: Optional[CompiledMatrix] = None,
    ):
        self.group = group
        self.rank = rank
        self.generators = generators or []
        self.line = line
        if self.generators and not isinstance(group, (FreeAbelianGroup, FiniteGroup)):
            raise ValidationError(
                "bundle.fiber_action", f"generator fiber actions need a discrete group"
            )
        if self.generators and len(self.generators) != len(group.generators):
            raise ValidationError(
                "bundle.fiber_action",
                f"expected {len(group.generators)} matrices, got {len(self.generators)}",
            )
        if line is not None and not isinstance(group, TranslationLine):
            raise ValidationError(
                "bundle.fiber_action", "line actions need a translation line"
            )

    @property
    def is_trivial(self) -> bool:
        return not self.generators and self.line is None

    def word(self, g: GroupElt) -> List[Tuple[int, int]]:
        """Generator steps (index, +-1) in the order they are applied to a point."""
        if isinstance(self.group, FreeAbelianGroup):
            steps = []
            for i in reversed(range(self.group.rank)):
                k = g.payload[i]
                steps.extend([(i, 1 if k > 0 else -1)] * abs(k))
            return steps
        if isinstance(self.group, FiniteGroup):
            return [(i, 1) for i in reversed(self.group.words[g.payload[0]])]
        return []

    def matrix(self, g: GroupElt, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if self.is_trivial:
            return np.eye(self.rank)
        if self.line is not None:
            return self.line(m, g.payload[0])
        rho = np.eye(self.rank)
        p = m
        for i, sign in self.word(g):
            gen = self.group.generators[i]
            if sign > 0:
                step = self.generators[i](p)
                p = gen(p)
            else:
                q = gen.inverse()(p)
                step = np.linalg.inv(self.generators[i](q))
                p = q
            rho = step @ rho
        return rho


class BundleCocycle:
    """Fiber-linear lift Phi of the flow on E = M x R^r with endomorphism A.

    Phi_t(m) solves dF/dt = B(phi_t(m)) F with F(0) = I.
    """

    def __init__(
        self,
        field: FlowField,
        generator: CompiledMatrix,
        endomorphism: CompiledMatrix,
        action: FiberAction,
    ):
        self.field = field
        self.rank = generator.shape[0]
        square = generator.shape == (self.rank, self.rank)
        if not square or endomorphism.shape != generator.shape:
            raise ValidationError(
                "bundle", "B and A must be square matrices of equal rank"
            )
        self.generator = generator
        self.endomorphism_expr = endomorphism
        self.action = action

    @classmethod
    def from_strings(
        cls,
        field: FlowField,
        group: GroupModel,
        rank: int = 1,
        generator: Optional[Sequence] = None,
        endomorphism: Optional[Sequence] = None,
        fiber_action: Optional[Sequence] = None,
        line_action: Optional[Sequence] = None,
    ) -> "BundleCocycle":
        coords = field.coordinates
        b = CompiledMatrix.from_strings(generator or zero_strings(rank), coords)
        a = CompiledMatrix.from_strings(endomorphism or identity_strings(rank), coords)
        gens = (
            [CompiledMatrix.from_strings(mat, coords) for mat in fiber_action]
            if fiber_action
            else None
        )
        line = (
            CompiledMatrix.from_strings(line_action, coords, extra=[LINE_PARAMETER])
            if line_action
            else None
        )
        return cls(field, b, a, FiberAction(group, rank, gens, line))

    @property
    def is_scalar_trivial(self) -> bool:
        return (
            self.rank == 1
            and self.generator.constant
            and float(self.generator(np.zeros(self.field.dim))[0, 0]) == 0.0
            and self.endomorphism_expr.constant
            and float(self.endomorphism_expr(np.zeros(self.field.dim))[0, 0]) == 1.0
            and self.action.is_trivial
        )

    def endomorphism(self, m: np.ndarray) -> np.ndarray:
        return self.endomorphism_expr(m)

    def fiber_action(self, g: GroupElt, m: np.ndarray) -> np.ndarray:
        return self.action.matrix(g, m)

    def _rhs(self, _t, y):
        n, r = self.field.dim, self.rank
        x = y[:n]
        F = y[n:].reshape(r, r)
        return np.concatenate([self.field.u(x), (self.generator(x) @ F).ravel()])

    def fiber_transport(self, m: np.ndarray, t: float) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        r = self.rank
        if t == 0:
            return np.eye(r)
        y0 = np.concatenate([m, np.eye(r).ravel()])
        end = self.field.solve(self._rhs, y0, t).y[:, -1]
        F = end[self.field.dim :].reshape(r, r)
        log.debug(f"Fiber transport over t={t}: det = {np.linalg.det(F):.6e}")
        return F

    def _rhs_stacked(self, _t, y):
        n, r = self.field.dim, self.rank
        Y = y.reshape(-1, n + r * r)
        x = Y[:, :n]
        F = Y[:, n:].reshape(-1, r, r)
        dF = self.generator(x) @ F
        return np.concatenate([self.field.u(x), dF.reshape(-1, r * r)], axis=1).ravel()

    def transport_batch(self, points: np.ndarray, times: np.ndarray):
        """(phi_{t_i}(m_i), Phi_{t_i}(m_i)) for every row."""
        points = np.asarray(points, dtype=float)
        times = np.asarray(times, dtype=float)
        n, r = self.field.dim, self.rank
        ends = points.copy()
        mats = np.broadcast_to(np.eye(r), (points.shape[0], r, r)).copy()
        chunk = DEFAULT_VALUES["batch_chunk"]
        for t in np.unique(times):
            if t == 0:
                continue
            idx = np.flatnonzero(times == t)
            for start in range(0, idx.size, chunk):
                sel = idx[start : start + chunk]
                y0 = np.concatenate(
                    [points[sel], np.broadcast_to(np.eye(r).ravel(), (sel.size, r * r))],
                    axis=1,
                ).ravel()
                end = self.field.solve(self._rhs_stacked, y0, float(t)).y[:, -1]
                end = end.reshape(-1, n + r * r)
                ends[sel] = end[:, :n]
                mats[sel] = end[:, n:].reshape(-1, r, r)
        return ends, mats
