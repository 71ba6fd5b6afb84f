"""
Declarative spatial heterogeneities f1, f2 and the named experiment set-ups.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import Akima1DInterpolator

from .errors import HeterogeneityError

logger = logging.getLogger(__name__)

EXAMPLE_IDS = ("fig1", "ex0", "ex1", "ex2", "ex3")

# Gaussian terms below this magnitude are treated as vanished
NEGLIGIBLE = 1e-17


class HeterogeneityKind(Enum):
    """Supported shapes of a heterogeneity."""
    ZERO = "zero"
    CONSTANT = "constant"
    GAUSSIAN_SUM = "gaussian-sum"
    PIECEWISE_CUBIC = "compact-piecewise-cubic"
    NAMED = "named-example"


@dataclass(frozen=True)
class GaussianTerm:
    """amplitude * exp(-rate * (x - center)^2)"""
    amplitude: float
    center: float
    rate: float

    def reach(self, tol: float = NEGLIGIBLE) -> float:
        """Distance from the center beyond which the term is below tol."""
        if self.amplitude == 0:
            return 0.0
        ratio = abs(self.amplitude) / tol
        return math.sqrt(math.log(ratio) / self.rate) if ratio > 1 else 0.0


def _fig1_f2(x):
    x = np.asarray(x, dtype=float)
    bumps = (np.exp(-(x - 50.0) ** 2)
             - np.exp(-(0.1 * (x - 80.0)) ** 2)
             + np.exp(-(0.05 * (x - 120.0)) ** 2)
             - np.exp(-(0.05 * (x - 200.0)) ** 2)
             + 2.0 * np.exp(-(0.05 * (x - 240.0)) ** 2) * np.cos(1.5 * x)
             + 0.5 * np.cos((0.04 * x) ** 2))
    return 3.0 + 0.8 * bumps


# Named formulas without a finite support or asymptotic constant
NAMED_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "fig1_f2": _fig1_f2,
}
NAMED_BOUNDS: Dict[str, float] = {
    "fig1_f2": 3.0 + 0.8 * 6.5,
}


@dataclass(frozen=True)
class HeterogeneitySpec:
    """
    A coefficient perturbation f(x) entering as 1 + f(x).

    Gaussian sums evaluate constant + sum(terms); compactly supported
    piecewise cubics interpolate (knots, knot_values) with a modified Akima
    scheme and return `constant` outside the knot range.
    """
    kind: HeterogeneityKind = HeterogeneityKind.ZERO
    constant: float = 0.0
    terms: Tuple[GaussianTerm, ...] = ()
    knots: Tuple[float, ...] = ()
    knot_values: Tuple[float, ...] = ()
    support: Optional[Tuple[float, float]] = None
    name: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.kind, HeterogeneityKind):
            object.__setattr__(self, "kind", HeterogeneityKind(self.kind))
        object.__setattr__(self, "terms", tuple(
            t if isinstance(t, GaussianTerm) else GaussianTerm(*t) for t in self.terms))
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        object.__setattr__(self, "knot_values", tuple(float(v) for v in self.knot_values))
        if self.support is not None:
            lo, hi = (float(v) for v in self.support)
            if not lo < hi:
                raise HeterogeneityError(f"support must be an increasing interval, got {self.support}")
            object.__setattr__(self, "support", (lo, hi))

        if self.kind is HeterogeneityKind.GAUSSIAN_SUM:
            for term in self.terms:
                if term.rate <= 0:
                    raise HeterogeneityError(f"Gaussian rate must be positive: {term}")
        elif self.kind is HeterogeneityKind.PIECEWISE_CUBIC:
            if len(self.knots) < 3 or len(self.knots) != len(self.knot_values):
                raise HeterogeneityError("piecewise cubic needs at least 3 knots with matching values")
            if np.any(np.diff(self.knots) <= 0):
                raise HeterogeneityError(f"knots must be strictly increasing: {self.knots}")
            if self.support is None:
                object.__setattr__(self, "support", (self.knots[0], self.knots[-1]))
        elif self.kind is HeterogeneityKind.NAMED:
            if self.name not in NAMED_FUNCTIONS:
                raise HeterogeneityError(f"unknown named heterogeneity: {self.name}")

    @cached_property
    def _interpolant(self) -> Akima1DInterpolator:
        return Akima1DInterpolator(np.array(self.knots), np.array(self.knot_values), method="makima")

    def __call__(self, x):
        return eval_heterogeneity(self, x)

    @property
    def is_zero(self) -> bool:
        return self.kind is HeterogeneityKind.ZERO or (
            self.kind is HeterogeneityKind.CONSTANT and self.constant == 0.0)

    @property
    def asymptotic(self) -> Optional[Tuple[float, float]]:
        """Limits of f at -inf and +inf, or None when f does not settle."""
        if self.kind is HeterogeneityKind.NAMED:
            return None
        if self.kind is HeterogeneityKind.ZERO:
            return (0.0, 0.0)
        return (self.constant, self.constant)

    def effective_support(self, tol: float = NEGLIGIBLE) -> Optional[Tuple[float, float]]:
        """Interval outside which f equals its asymptotic constant (up to tol)."""
        if self.kind in (HeterogeneityKind.ZERO, HeterogeneityKind.CONSTANT):
            return None
        if self.kind is HeterogeneityKind.PIECEWISE_CUBIC or self.kind is HeterogeneityKind.NAMED:
            return self.support
        live = [t for t in self.terms if t.amplitude != 0]
        if not live:
            return None
        lo = min(t.center - t.reach(tol) for t in live)
        hi = max(t.center + t.reach(tol) for t in live)
        if self.support is not None:
            lo, hi = max(lo, self.support[0]), min(hi, self.support[1])
        return (lo, hi) if lo < hi else None

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Points where f is only C1 (knot boundaries)."""
        if self.kind is HeterogeneityKind.PIECEWISE_CUBIC:
            return self.knots
        if self.support is not None and self.kind is HeterogeneityKind.GAUSSIAN_SUM:
            return self.support
        return ()

    def bound(self) -> float:
        """An upper bound for sup |f|."""
        if self.kind is HeterogeneityKind.ZERO:
            return 0.0
        if self.kind is HeterogeneityKind.CONSTANT:
            return abs(self.constant)
        if self.kind is HeterogeneityKind.GAUSSIAN_SUM:
            return abs(self.constant) + sum(abs(t.amplitude) for t in self.terms)
        if self.kind is HeterogeneityKind.PIECEWISE_CUBIC:
            x = np.linspace(self.knots[0], self.knots[-1], 4001)
            return max(abs(self.constant), float(np.max(np.abs(self._interpolant(x)))))
        return NAMED_BOUNDS[self.name]

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind is HeterogeneityKind.CONSTANT or self.constant:
            data["constant"] = self.constant
        if self.terms:
            data["terms"] = [[t.amplitude, t.center, t.rate] for t in self.terms]
        if self.knots:
            data["knots"] = list(self.knots)
            data["knot_values"] = list(self.knot_values)
        if self.support is not None:
            data["support"] = list(self.support)
        if self.name is not None:
            data["name"] = self.name
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HeterogeneitySpec":
        if "example" in data:
            f1, f2 = build_example_heterogeneity(data["example"])
            return f1 if data.get("component") == "f1" else f2
        try:
            kind = HeterogeneityKind(data.get("kind", "zero"))
        except ValueError as exc:
            raise HeterogeneityError(f"unknown heterogeneity kind: {data.get('kind')}") from exc
        support = data.get("support")
        return cls(
            kind=kind,
            constant=float(data.get("constant", 0.0)),
            terms=tuple(GaussianTerm(*t) for t in data.get("terms", ())),
            knots=tuple(data.get("knots", ())),
            knot_values=tuple(data.get("knot_values", ())),
            support=tuple(support) if support is not None else None,
            name=data.get("name"),
        )


ZERO = HeterogeneitySpec()


def constant_heterogeneity(value: float) -> HeterogeneitySpec:
    return HeterogeneitySpec(kind=HeterogeneityKind.CONSTANT, constant=value)


def gaussian_sum(terms, constant: float = 0.0, support=None) -> HeterogeneitySpec:
    """Shortcut for constant + sum of amplitude * exp(-rate (x - center)^2)."""
    return HeterogeneitySpec(kind=HeterogeneityKind.GAUSSIAN_SUM, constant=constant,
                             terms=tuple(GaussianTerm(*t) for t in terms), support=support)


def eval_heterogeneity(spec: HeterogeneitySpec, x):
    """
    Evaluate f at x (scalar or array).

    Outside a declared support the result is exactly the asymptotic constant.
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)

    if spec.kind is HeterogeneityKind.ZERO:
        out = np.zeros_like(x)
    elif spec.kind is HeterogeneityKind.CONSTANT:
        out = np.full_like(x, spec.constant)
    elif spec.kind is HeterogeneityKind.NAMED:
        out = NAMED_FUNCTIONS[spec.name](x)
    else:
        if spec.kind is HeterogeneityKind.GAUSSIAN_SUM:
            inner = np.zeros_like(x)
            for term in spec.terms:
                inner = inner + term.amplitude * np.exp(-term.rate * (x - term.center) ** 2)
        else:
            lo, hi = spec.knots[0], spec.knots[-1]
            inner = spec._interpolant(np.clip(x, lo, hi))
        out = spec.constant + inner
        if spec.support is not None:
            lo, hi = spec.support
            out = np.where((x < lo) | (x > hi), spec.constant, out)

    return float(out) if scalar else out


def positivity_check(spec: HeterogeneitySpec, window: Optional[Tuple[float, float]] = None,
                     samples: int = 20001, label: str = "f") -> Tuple[bool, float]:
    """
    Report whether inf (1 + f) > 0 over the window (default: effective support
    padded by 5 units). Never raises; a violation is logged as a warning.
    """
    if window is None:
        support = spec.effective_support()
        window = (support[0] - 5.0, support[1] + 5.0) if support else (-5.0, 5.0)
    x = np.linspace(window[0], window[1], samples)
    infimum = float(np.min(1.0 + eval_heterogeneity(spec, x)))
    if spec.asymptotic is not None:
        infimum = min(infimum, 1.0 + min(spec.asymptotic))
    ok = infimum > 0
    if not ok:
        logger.warning("inf(1 + %s) = %.4g <= 0: positivity assumption violated", label, infimum)
    return ok, infimum


def _ex0_profile(y: np.ndarray) -> np.ndarray:
    d = y - 3.0
    return d * np.sin(1.0 + 14.0 * d ** 3) * np.exp(-1.2 * np.abs(d))


def build_example_heterogeneity(example_id: str) -> Tuple[HeterogeneitySpec, HeterogeneitySpec]:
    """Return (f1, f2) for one of the named experiments."""
    if example_id == "fig1":
        f1 = gaussian_sum([(1.0, 150.0, 1.0)], constant=4.0)
        f2 = HeterogeneitySpec(kind=HeterogeneityKind.NAMED, name="fig1_f2")
        return f1, f2
    if example_id == "ex0":
        y = np.arange(3.0, 10.0)
        knots = tuple(y) + (10.0,)
        values = tuple(_ex0_profile(y)) + (0.0,)
        f2 = HeterogeneitySpec(kind=HeterogeneityKind.PIECEWISE_CUBIC, knots=knots, knot_values=values)
        return ZERO, f2
    if example_id == "ex1":
        f2 = gaussian_sum([
            (0.3, -0.1, 0.5),
            (0.33, -1.5, 2.0),
            (-0.53, -0.75, 2.0),
            (0.25, 0.1, 4.0),
            (-0.4, 1.0, 3.0),
        ])
        return ZERO, f2
    if example_id == "ex2":
        return ZERO, ZERO
    if example_id == "ex3":
        rho = 12.0
        return ZERO, gaussian_sum([(-rho, -11.0, 40.0), (-rho, 11.0, 40.0)])
    raise HeterogeneityError(f"unknown example id: {example_id!r} (expected one of {EXAMPLE_IDS})")
