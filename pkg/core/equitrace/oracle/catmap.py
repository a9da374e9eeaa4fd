"""Periodic points of hyperbolic toral automorphisms by integer linear algebra.

Fixed points of A^n on R^2 / Z^2 are the classes v with (A^n - I) v in Z^2, that is
M^-1 Z^2 / Z^2 for M = A^n - I. They are enumerated exactly as integer vectors w with
v = w / |det M|.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

from equitrace.exceptions import ValidationError

log = logging.getLogger(__name__)

CAT_MATRIX = ((2, 1), (1, 1))
MAX_PERIOD = 12

Matrix2 = Tuple[Tuple[int, int], Tuple[int, int]]


def _mul(a: Matrix2, b: Matrix2) -> Matrix2:
    return (
        (a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]),
        (a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]),
    )


def matrix_power(a: Matrix2, n: int) -> Matrix2:
    out: Matrix2 = ((1, 0), (0, 1))
    for _ in range(n):
        out = _mul(out, a)
    return out


def det_one_minus_power(a: Matrix2, n: int) -> int:
    p = matrix_power(a, n)
    return (1 - p[0][0]) * (1 - p[1][1]) - p[0][1] * p[1][0]


def _extended_gcd(a: int, b: int) -> Tuple[int, int, int]:
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, s, t = _extended_gcd(b, a % b)
    return g, t, s - (a // b) * t


@dataclass
class PeriodicOrbit:
    period: int
    points: List[Tuple[float, float]]
    det_abs: int


@dataclass
class FixedPointCensus:
    n: int
    count: int
    det_abs: int
    orbits: List[PeriodicOrbit] = field(default_factory=list)

    @property
    def predicted_weight(self) -> float:
        """Atom weight at l = n of the suspension flow: sum of T# / |det(I - A^n)|."""
        return math.fsum(o.period / self.det_abs for o in self.orbits)

    def to_dict(self):
        return {
            "n": self.n,
            "count": self.count,
            "det_abs": self.det_abs,
            "orbits": [
                {"period": o.period, "det_abs": o.det_abs, "size": len(o.points)}
                for o in self.orbits
            ],
            "predicted_weight": self.predicted_weight,
        }


def catmap_fixed_points(
    n: int, matrix: Sequence[Sequence[int]] = CAT_MATRIX
) -> FixedPointCensus:
    """Fixed points of A^n on the torus, grouped into A-orbits of period d dividing n."""
    if not 1 <= n <= MAX_PERIOD:
        raise ValidationError("n", f"period must lie in [1, {MAX_PERIOD}]")
    a: Matrix2 = tuple(tuple(int(v) for v in row) for row in matrix)
    p = matrix_power(a, n)
    m11, m12, m21, m22 = p[0][0] - 1, p[0][1], p[1][0], p[1][1] - 1
    det = m11 * m22 - m12 * m21
    if det == 0:
        raise ValidationError("oracle.matrix", f"A^{n} has eigenvalue 1")
    D = abs(det)

    # column Hermite form of M: M U = [[g, 0], [b, det / g]]
    g, _, _ = _extended_gcd(m11, m12)
    rows, cols = abs(g), abs(det // g)
    sign = 1 if det > 0 else -1
    adj = ((m22, -m12), (-m21, m11))
    points = set()
    for i in range(rows):
        for j in range(cols):
            w0 = (sign * (adj[0][0] * i + adj[0][1] * j)) % D
            w1 = (sign * (adj[1][0] * i + adj[1][1] * j)) % D
            points.add((w0, w1))
    if len(points) != D:
        raise ValidationError(
            "oracle.matrix", f"expected {D} fixed points, found {len(points)}"
        )

    orbits = []
    remaining = set(points)
    for start in sorted(points):
        if start not in remaining:
            continue
        cycle = [start]
        cur = start
        while True:
            cur = (
                (a[0][0] * cur[0] + a[0][1] * cur[1]) % D,
                (a[1][0] * cur[0] + a[1][1] * cur[1]) % D,
            )
            if cur == start:
                break
            cycle.append(cur)
        remaining.difference_update(cycle)
        d = len(cycle)
        orbits.append(
            PeriodicOrbit(
                period=d,
                points=[(w0 / D, w1 / D) for w0, w1 in cycle],
                det_abs=abs(det_one_minus_power(a, d)),
            )
        )
    census = FixedPointCensus(n=n, count=D, det_abs=D, orbits=orbits)
    log.debug(
        f"A^{n}: {D} fixed points in {len(orbits)} orbits,"
        f" periods {sorted(o.period for o in orbits)}"
    )
    return census


def periodic_point_counts(census: FixedPointCensus) -> dict:
    """Number of primitive orbits per period d."""
    counts: dict = {}
    for orbit in census.orbits:
        counts[orbit.period] = counts.get(orbit.period, 0) + 1
    return dict(sorted(counts.items()))

