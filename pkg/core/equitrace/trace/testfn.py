"""Test functions psi on R \\ {0}.

Specs read `family:key=value,...`, for example `gaussian:center=0.7,width=0.05`.
"""

import logging
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from numpy.polynomial import polynomial

from equitrace.exceptions import ValidationError

log = logging.getLogger(__name__)

GAUSSIAN_WIDTHS = 6.0


def _num(value: float) -> str:
    """Shortest text that parses back to the same float."""
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


class TestFunction(metaclass=ABCMeta):
    __test__ = False

    @abstractmethod
    def __call__(self, t: np.ndarray) -> np.ndarray:
        pass

    @property
    @abstractmethod
    def support(self) -> Tuple[float, float]:
        """Interval outside which psi vanishes (numerically, for gaussians)."""

    @property
    @abstractmethod
    def spec(self) -> str:
        pass

    def _check_support(self):
        lo, hi = self.support
        if lo <= 0.0 <= hi:
            raise ValidationError("psi", f"{self.spec} must vanish near t = 0")


@dataclass(frozen=True)
class Gaussian(TestFunction):
    center: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValidationError("psi", "gaussian width must be positive")
        if abs(self.center) < GAUSSIAN_WIDTHS * self.width:
            raise ValidationError(
                "psi", f"gaussian needs |center| >= {GAUSSIAN_WIDTHS:g} x width"
            )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-((t - self.center) ** 2) / (2 * self.width**2))

    @property
    def support(self):
        half = GAUSSIAN_WIDTHS * self.width
        return (self.center - half, self.center + half)

    @property
    def spec(self):
        return f"gaussian:center={_num(self.center)},width={_num(self.width)}"


def _bump(s: np.ndarray) -> np.ndarray:
    inside = np.abs(s) < 1.0
    safe = np.where(inside, s, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe**2)), 0.0)


@dataclass(frozen=True)
class Bump(TestFunction):
    """exp(1 - 1 / (1 - ((t - c) / r)^2)) on |t - c| < r, peak value 1 at t = c."""

    center: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("psi", "bump radius must be positive")
        self._check_support()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return _bump((t - self.center) / self.radius)

    @property
    def support(self):
        return (self.center - self.radius, self.center + self.radius)

    @property
    def spec(self):
        return f"bump:center={_num(self.center)},radius={_num(self.radius)}"


@dataclass(frozen=True)
class PolyBump(TestFunction):
    """Bump times the polynomial sum_k coeffs[k] ((t - c) / r)^k."""

    center: float
    radius: float
    coeffs: Tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("psi", "polybump radius must be positive")
        if not self.coeffs:
            raise ValidationError("psi", "polybump needs at least one coefficient")
        self._check_support()

    def __call__(self, t):
        s = (np.asarray(t, dtype=float) - self.center) / self.radius
        return polynomial.polyval(s, self.coeffs) * _bump(s)

    @property
    def support(self):
        return (self.center - self.radius, self.center + self.radius)

    @property
    def spec(self):
        coeffs = ";".join(_num(c) for c in self.coeffs)
        return (
            f"polybump:center={_num(self.center)},radius={_num(self.radius)},"
            f"coeffs={coeffs}"
        )


@dataclass(frozen=True)
class Combination(TestFunction):
    """sum_i a_i psi_i."""

    terms: Tuple[Tuple[float, TestFunction], ...]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape)
        for coef, psi in self.terms:
            total = total + coef * psi(t)
        return total

    @property
    def support(self):
        spans = [psi.support for _, psi in self.terms]
        return (min(s[0] for s in spans), max(s[1] for s in spans))

    @property
    def spec(self):
        return " + ".join(f"{_num(coef)}*({psi.spec})" for coef, psi in self.terms)


FAMILIES = {
    "gaussian": (Gaussian, ("center", "width")),
    "bump": (Bump, ("center", "radius")),
    "polybump": (PolyBump, ("center", "radius", "coeffs")),
}


def _parse_fields(text: str, spec: str) -> Dict[str, str]:
    fields = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError("psi", f"expected key=value in {spec!r}, got {item!r}")
        fields[key.strip()] = value.strip()
    return fields


def parse_test_function(spec: str) -> TestFunction:
    family, sep, rest = spec.strip().partition(":")
    if not sep or family not in FAMILIES:
        raise ValidationError(
            "psi", f"unknown test function {spec!r}; families are {sorted(FAMILIES)}"
        )
    cls, keys = FAMILIES[family]
    fields = _parse_fields(rest, spec)
    unknown = sorted(set(fields) - set(keys))
    if unknown:
        raise ValidationError("psi", f"unknown {family} parameter(s) {unknown}")
    kwargs = {}
    try:
        for key, value in fields.items():
            if key == "coeffs":
                kwargs[key] = tuple(float(v) for v in value.split(";"))
            else:
                kwargs[key] = float(value)
    except ValueError:
        raise ValidationError("psi", f"non-numeric parameter in {spec!r}")
    missing = [k for k in keys if k not in kwargs and k != "coeffs"]
    if missing:
        raise ValidationError("psi", f"{family} needs {missing}")
    psi = cls(**kwargs)
    log.debug(f"Parsed test function {psi.spec}")
    return psi
