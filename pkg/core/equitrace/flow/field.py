import logging
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import OdeSolution, solve_ivp

from equitrace.exceptions import StepFailure, ValidationError
from equitrace.flow.expressions import CompiledMatrix

log = logging.getLogger(__name__)

DEFAULT_VALUES = {
    "method": "DOP853",
    "rtol": 1e-10,
    "atol": 1e-12,
    "t_max": 64.0,
    "batch_chunk": 20000,
}


class FlowField:
    """Flow of a vector field u given by closed-form coordinate expressions.

    Integration uses an explicit embedded Runge-Kutta pair of order 8(5,3) with dense
    output; derivatives of u come from symbolic differentiation.
    """

    def __init__(
        self,
        components: Sequence[str],
        coordinates: Sequence[str],
        rtol: float = DEFAULT_VALUES["rtol"],
        atol: float = DEFAULT_VALUES["atol"],
        t_max: float = DEFAULT_VALUES["t_max"],
    ):
        if len(components) != len(coordinates):
            raise ValidationError(
                "flow.u", f"expected {len(coordinates)} components, got {len(components)}"
            )
        self.components = list(components)
        self.coordinates = list(coordinates)
        self.dim = len(coordinates)
        self.rtol = rtol
        self.atol = atol
        self.t_max = t_max
        self.u = CompiledMatrix.from_strings(components, coordinates, vector=True)
        self.du = self.u.jacobian()

    def velocity(self, m: np.ndarray) -> np.ndarray:
        return self.u(m)

    def velocity_jacobian(self, m: np.ndarray) -> np.ndarray:
        return self.du(m)

    def check_time(self, t: float):
        if abs(t) > self.t_max:
            raise ValidationError(
                "t", f"|t| = {abs(t)} exceeds the horizon t_max = {self.t_max}"
            )

    def solve(self, rhs: Callable, y0: np.ndarray, t: float, dense: bool = False):
        self.check_time(t)
        sol = solve_ivp(
            rhs,
            (0.0, t),
            y0,
            method=DEFAULT_VALUES["method"],
            rtol=self.rtol,
            atol=self.atol,
            dense_output=dense,
        )
        if sol.status != 0:
            raise StepFailure(
                f"Integration failed: {sol.message}", state=sol.y[:, -1].tolist()
            )
        return sol

    def _rhs(self, _t, y):
        return self.u(y)

    def _rhs_variational(self, _t, y):
        n = self.dim
        x = y[:n]
        jac = y[n:].reshape(n, n)
        return np.concatenate([self.u(x), (self.du(x) @ jac).ravel()])

    def flow(self, m: np.ndarray, t: float) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if t == 0:
            return m.copy()
        return self.solve(self._rhs, m, t).y[:, -1]

    def flow_with_jacobian(self, m: np.ndarray, t: float):
        m = np.asarray(m, dtype=float)
        n = self.dim
        if t == 0:
            return m.copy(), np.eye(n)
        y0 = np.concatenate([m, np.eye(n).ravel()])
        end = self.solve(self._rhs_variational, y0, t).y[:, -1]
        return end[:n], end[n:].reshape(n, n)

    def trajectory(self, m: np.ndarray, t_end: float) -> OdeSolution:
        """Dense-output curve s -> phi_s(m) for s between 0 and t_end."""
        return self.solve(self._rhs, np.asarray(m, dtype=float), t_end, dense=True).sol

    def _rhs_stacked(self, _t, y):
        return self.u(y.reshape(-1, self.dim)).ravel()

    def flow_batch(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        """phi_{t_i}(m_i) for every row, integrating all rows sharing a time together."""
        points = np.asarray(points, dtype=float)
        times = np.asarray(times, dtype=float)
        out = points.copy()
        chunk = DEFAULT_VALUES["batch_chunk"]
        for t in np.unique(times):
            if t == 0:
                continue
            idx = np.flatnonzero(times == t)
            for start in range(0, idx.size, chunk):
                sel = idx[start : start + chunk]
                sol = self.solve(self._rhs_stacked, points[sel].ravel(), float(t))
                end = sol.y[:, -1]
                out[sel] = end.reshape(-1, self.dim)
        return out

    def describe(self) -> str:
        return f"u = ({', '.join(self.components)})"
