"""
Closed-form tools for the homogeneous model (f1 = f2 = 0): the interface
value v*, wave-speed roots, the fold point and the outer constant states.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError
from .model import ModelParams

SQRT2_3 = math.sqrt(2.0) / 3.0
MERGE_TOL = 1e-7


class SpeedRegime(Enum):
    SINGLE = "single"
    TRIPLE = "triple"
    CRITICAL = "critical"


@dataclass(frozen=True)
class SpeedRoots:
    roots: Tuple[float, ...]
    regime: SpeedRegime

    @property
    def c_m(self) -> float:
        return self.roots[0]

    @property
    def c_0(self) -> float:
        if self.regime is not SpeedRegime.TRIPLE:
            raise ConfigError("middle speed only exists in the triple regime")
        return self.roots[1]

    @property
    def c_p(self) -> float:
        return self.roots[-1]

    def pick(self, which: str) -> float:
        """Root by label: 'm', '0' or 'p'."""
        if which == "m":
            return self.c_m
        if which == "0":
            return self.c_0 if self.regime is SpeedRegime.TRIPLE else self.roots[0]
        if which == "p":
            return self.c_p
        raise ConfigError(f"root label must be one of m, 0, p; got {which!r}")

    def to_dict(self):
        return {"roots": list(self.roots), "regime": self.regime.value}


@dataclass(frozen=True)
class BifurcationPoint:
    c_bp: float
    alpha_bp: float

    def to_dict(self):
        return {"c_bp": self.c_bp, "alpha_bp": self.alpha_bp}


def vstar(c, tauhat: float = 1.0):
    """Interface value c*tauhat / sqrt(c^2 tauhat^2 + 4) of a constant-speed front."""
    if tauhat <= 0:
        raise ConfigError(f"tauhat must be positive, got {tauhat}")
    c = np.asarray(c, dtype=float)
    out = c * tauhat / np.sqrt(c ** 2 * tauhat ** 2 + 4.0)
    return float(out) if out.ndim == 0 else out


def vstar_prime(c, tauhat: float = 1.0):
    c = np.asarray(c, dtype=float)
    out = 4.0 * tauhat / (c ** 2 * tauhat ** 2 + 4.0) ** 1.5
    return float(out) if out.ndim == 0 else out


def existence_condition(c, p: ModelParams):
    """F(c) = gamma + alpha v*(c) - (sqrt(2)/3) c; zeros are front speeds."""
    return p.gamma + p.alpha * vstar(c, p.tauhat) - SQRT2_3 * np.asarray(c, dtype=float)


def existence_condition_prime(c, p: ModelParams):
    return p.alpha * vstar_prime(c, p.tauhat) - SQRT2_3


def _critical_speeds(p: ModelParams) -> Tuple[float, ...]:
    """Zeros of F'(c): alpha * 4 tauhat / (c^2 tauhat^2 + 4)^1.5 = sqrt(2)/3."""
    if p.alpha <= 0:
        return ()
    c_sq = ((4.0 * p.tauhat * p.alpha / SQRT2_3) ** (2.0 / 3.0) - 4.0) / p.tauhat ** 2
    if c_sq <= 0:
        return ()
    c = math.sqrt(c_sq)
    return (-c, c)


def speed_roots(p: ModelParams) -> SpeedRoots:
    """
    All real roots of F(c) = 0.

    F decreases to -inf as c -> +inf and increases to +inf as c -> -inf; its
    derivative vanishes at most twice, so bisection on each monotone piece
    finds every root.
    """
    def F(c):
        return float(existence_condition(c, p))

    bound = 3.0 * (abs(p.gamma) + abs(p.alpha)) / math.sqrt(2.0) + 1.0
    edges = [-bound, *_critical_speeds(p), bound]
    roots = []
    touching = False
    for lo, hi in zip(edges[:-1], edges[1:]):
        f_lo, f_hi = F(lo), F(hi)
        if f_lo == 0.0:
            roots.append(lo)
        elif f_lo * f_hi < 0:
            roots.append(brentq(F, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200))
    for c in edges[1:-1]:
        if abs(F(c)) < 1e-12:
            touching = True
            if not any(abs(c - r) < MERGE_TOL for r in roots):
                roots.append(c)
    roots = sorted(roots)

    merged = []
    for r in roots:
        if merged and abs(r - merged[-1]) < MERGE_TOL:
            touching = True
            continue
        merged.append(r)

    if touching:
        regime = SpeedRegime.CRITICAL
    elif len(merged) == 3:
        regime = SpeedRegime.TRIPLE
    else:
        regime = SpeedRegime.SINGLE
    return SpeedRoots(tuple(merged), regime)


def bifurcation_point(gamma: float, tauhat: float = 1.0) -> BifurcationPoint:
    """Fold of the speed curve: c_bp = -(12 gamma / (sqrt(2) tauhat^2))^(1/3)."""
    if gamma == 0:
        raise ConfigError("bifurcation point is degenerate for gamma = 0")
    if tauhat <= 0:
        raise ConfigError(f"tauhat must be positive, got {tauhat}")
    c_bp = -float(np.cbrt(12.0 * gamma / (math.sqrt(2.0) * tauhat ** 2)))
    alpha_bp = (SQRT2_3 * c_bp - gamma) * math.sqrt(4.0 + c_bp ** 2 * tauhat ** 2) / (c_bp * tauhat)
    return BifurcationPoint(c_bp, alpha_bp)


def slow_eigenvalues(c: float, tauhat: float = 1.0, k: float = 1.0) -> Tuple[float, float]:
    """
    (mu_u, mu_s) = (-tauhat c +- sqrt(tauhat^2 c^2 + 4k)) / 2: decay rates of
    the co-moving V-equation behind and ahead of the interface.
    """
    root = math.sqrt(tauhat ** 2 * c ** 2 + 4.0 * k)
    return 0.5 * (-tauhat * c + root), 0.5 * (-tauhat * c - root)


def interface_value(speed: float, p: ModelParams) -> float:
    """V(z) demanded by the jump condition alpha V + gamma = (sqrt(2)/3) z'."""
    if p.alpha == 0:
        raise ConfigError("interface value is undefined for alpha = 0")
    return (SQRT2_3 * speed - p.gamma) / p.alpha


def three_lines_point(a: float, b: float, c: float, d: float, v_star: float,
                      tol: float = 1e-12) -> Optional[Tuple[float, float]]:
    """
    Common point of (a+c, b+d) + R(1,1), (c-a, d-b) + R(1,-1) and v = v_star.

    The three lines meet iff c = v_star + b; otherwise None.
    """
    if abs(c - (v_star + b)) > tol * max(1.0, abs(c), abs(v_star), abs(b)):
        return None
    t = v_star - a - c
    return v_star, b + d + t


@dataclass(frozen=True)
class ConstantStates:
    """Outer states (u = v) of the homogeneous model and their first-order values."""
    u_minus: float
    u_plus: float
    u_minus_first_order: float
    u_plus_first_order: float
    nagumo_speed: float


def outer_state(branch: int, p: ModelParams, v=None):
    """
    Root near u = branch of u - u^3 = eps (alpha v + gamma). With v None the
    fixed point u = v is returned.
    """
    eps = p.epsilon
    u = np.full(np.shape(v) if v is not None else (), float(branch))
    for _ in range(50):
        if v is None:
            g = u - u ** 3 - eps * (p.alpha * u + p.gamma)
            dg = 1.0 - 3.0 * u ** 2 - eps * p.alpha
        else:
            g = u - u ** 3 - eps * (p.alpha * v + p.gamma)
            dg = 1.0 - 3.0 * u ** 2
        step = g / dg
        u = u - step
        if np.all(np.abs(step) < 1e-15):
            break
    return float(u) if np.ndim(u) == 0 else u


def constant_states(p: ModelParams) -> ConstantStates:
    eps = p.epsilon
    return ConstantStates(
        u_minus=outer_state(-1, p),
        u_plus=outer_state(+1, p),
        u_minus_first_order=-1.0 - 0.5 * eps * (p.gamma - p.alpha),
        u_plus_first_order=1.0 - 0.5 * eps * (p.gamma + p.alpha),
        nagumo_speed=3.0 * p.gamma / math.sqrt(2.0),
    )
