"""
Heterogeneous background states, Riccati dichotomy slopes and the
leading-order stationary-front positions.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import bisect
from scipy.sparse.linalg import spsolve

from .errors import ConfigError, HeterogeneityError, RiccatiError, RootFindingError
from .green import Source, green_transform
from .heterogeneity import HeterogeneitySpec, ZERO, eval_heterogeneity, positivity_check
from .model import GridProfile, ModelParams

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-8
DEGENERATE_TOL = 1e-10


class Sign(Enum):
    """Which background state: u = +1 (right of a front) or u = -1 (left)."""
    PLUS = 1
    MINUS = -1


class FrontStability(Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class BackgroundState:
    """v_b and q_b = dv_b/dx for one sign, with C1 interpolation between nodes."""
    sign: Sign
    v: GridProfile
    q: GridProfile
    f1: HeterogeneitySpec = ZERO
    f2: HeterogeneitySpec = ZERO
    method: str = "green"

    @cached_property
    def _v_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.v.x, self.v.values, self.q.values)

    @cached_property
    def _q_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.q.x, self.q.values, self._dq_nodes)

    @property
    def _dq_nodes(self) -> np.ndarray:
        # q' = (1 + f1) v - sign (1 + f2) exactly
        x = self.v.x
        return ((1.0 + eval_heterogeneity(self.f1, x)) * self.v.values
                - self.sign.value * (1.0 + eval_heterogeneity(self.f2, x)))

    def v_at(self, x):
        return self._v_spline(np.clip(x, self.v.x_min, self.v.x_max))

    def q_at(self, x):
        return self._q_spline(np.clip(x, self.q.x_min, self.q.x_max))

    def dq_at(self, x):
        return self._q_spline(np.clip(x, self.q.x_min, self.q.x_max), 1)

    def negated(self) -> "BackgroundState":
        """The opposite-sign state (the equation is linear in the sign)."""
        other = Sign.MINUS if self.sign is Sign.PLUS else Sign.PLUS
        return BackgroundState(other, self.v.with_values(-self.v.values),
                               self.q.with_values(-self.q.values), self.f1, self.f2, self.method)

    def as_sign(self, sign: Sign) -> "BackgroundState":
        return self if self.sign is sign else self.negated()


@dataclass(frozen=True)
class RiccatiSlopes:
    """Bounded solutions a_u > 0 > a_s of a' = 1 + f1 - a^2."""
    a_u: GridProfile
    a_s: GridProfile

    def at(self, x) -> Tuple[np.ndarray, np.ndarray]:
        return self.a_u.at(x), self.a_s.at(x)


@dataclass(frozen=True)
class StationaryFront:
    position: float
    classification: FrontStability = FrontStability.UNCLASSIFIED

    def to_dict(self):
        return {"x0": self.position, "classification": self.classification.value}


@dataclass(frozen=True)
class StationaryFrontSet:
    positions: Tuple[StationaryFront, ...] = ()
    degenerate: bool = False

    def __len__(self):
        return len(self.positions)

    @property
    def locations(self) -> Tuple[float, ...]:
        return tuple(front.position for front in self.positions)

    def to_dict(self):
        return {"degenerate": self.degenerate, "fronts": [f.to_dict() for f in self.positions]}


def _as_grid(grid) -> np.ndarray:
    if isinstance(grid, GridProfile):
        return grid.x
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ConfigError("a grid needs at least three nodes")
    return grid


def riccati_slopes(f1: HeterogeneitySpec, grid) -> RiccatiSlopes:
    """
    Integrate a' = 1 + f1 - a^2 forward from sqrt(1 + f1(x_min)) for a_u and
    backward from -sqrt(1 + f1(x_max)) for a_s.
    """
    x = _as_grid(grid)
    if f1.is_zero:
        return RiccatiSlopes(GridProfile.from_samples(x, np.ones_like(x)),
                             GridProfile.from_samples(x, -np.ones_like(x)))

    def rhs(t, a):
        return 1.0 + eval_heterogeneity(f1, t) - a ** 2

    def crosses_zero(t, a):
        return a[0]
    crosses_zero.terminal = True

    def integrate(start, stop, a0, label):
        if a0 == 0:
            raise RiccatiError(f"1 + f1 is not positive at x = {start}")
        sol = solve_ivp(rhs, (start, stop), [a0], method="DOP853", rtol=1e-10, atol=1e-12,
                        dense_output=True, events=crosses_zero, max_step=0.25)
        if sol.status == 1:
            raise RiccatiError(f"{label} crossed zero near x = {sol.t_events[0][0]:.4g}: "
                               "positivity of 1 + f1 violated")
        if sol.status != 0:
            raise RiccatiError(f"{label} integration failed: {sol.message}")
        return sol.sol(x)[0]

    left = 1.0 + eval_heterogeneity(f1, x[0])
    right = 1.0 + eval_heterogeneity(f1, x[-1])
    a_u = integrate(x[0], x[-1], np.sqrt(max(left, 0.0)), "a_u")
    a_s = integrate(x[-1], x[0], -np.sqrt(max(right, 0.0)), "a_s")
    return RiccatiSlopes(GridProfile.from_samples(x, a_u), GridProfile.from_samples(x, a_s))


def _boundary_limits(spec: HeterogeneitySpec, x: np.ndarray, frozen: bool, label: str):
    asym = spec.asymptotic
    if asym is not None:
        return asym
    if not frozen:
        raise HeterogeneityError(f"{label} is not asymptotically constant; "
                                 "boundary conditions need frozen boundary values")
    logger.warning("%s has no asymptotic constant; freezing its boundary values", label)
    ends = eval_heterogeneity(spec, np.array([x[0], x[-1]]))
    return float(ends[0]), float(ends[1])


def _solve_robin_bvp(f1, rhs_values, x, slopes, v_left, v_right):
    """v'' - (1 + f1) v = -rhs with v' = a_u (v - v_left) at x_min, v' = a_s (v - v_right) at x_max."""
    n = x.size
    dx = x[1] - x[0]
    k = 1.0 + eval_heterogeneity(f1, x)
    main = -2.0 / dx ** 2 - k
    upper = np.full(n - 1, 1.0 / dx ** 2)
    lower = np.full(n - 1, 1.0 / dx ** 2)
    b = -np.asarray(rhs_values, dtype=float).copy()

    a_u0 = slopes.a_u.values[0]
    a_sn = slopes.a_s.values[-1]
    main[0] = (-2.0 - 2.0 * dx * a_u0) / dx ** 2 - k[0]
    upper[0] = 2.0 / dx ** 2
    b[0] -= 2.0 * a_u0 * v_left / dx
    main[-1] = (-2.0 + 2.0 * dx * a_sn) / dx ** 2 - k[-1]
    lower[-1] = 2.0 / dx ** 2
    b[-1] += 2.0 * a_sn * v_right / dx

    A = sparse.diags([lower, main, upper], offsets=[-1, 0, 1], format="csc")
    v = spsolve(A, b)
    q = np.gradient(v, dx, edge_order=2)
    return v, q


def response_profile(f1: HeterogeneitySpec, f2: HeterogeneitySpec, u_func: Callable,
                     u_limits: Tuple[float, float], grid, u_support: Optional[Tuple[float, float]] = None,
                     u_breakpoints: Tuple[float, ...] = (), slopes: Optional[RiccatiSlopes] = None,
                     frozen_boundary: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bounded solution of v'' - (1 + f1) v = -(1 + f2) U for a given U-profile.

    Returns:
        (v, dv/dx) on the grid
    """
    x = _as_grid(grid)

    def phi(t):
        return (1.0 + eval_heterogeneity(f2, t)) * u_func(t)

    if f1.is_zero:
        asym = f2.asymptotic
        support = f2.effective_support()
        if u_support is not None:
            support = u_support if support is None else (min(support[0], u_support[0]),
                                                         max(support[1], u_support[1]))
        breakpoints = tuple(f2.breakpoints) + tuple(u_breakpoints)
        if asym is None:
            source = Source(phi, breakpoints=breakpoints)
        else:
            source = Source(phi, (1.0 + asym[0]) * u_limits[0], (1.0 + asym[1]) * u_limits[1],
                            support, breakpoints)
        v, q = green_transform(source, x)
        return v, q

    f1_left, f1_right = _boundary_limits(f1, x, frozen_boundary, "f1")
    f2_left, f2_right = _boundary_limits(f2, x, frozen_boundary, "f2")
    if slopes is None:
        slopes = riccati_slopes(f1, x)
    v_left = u_limits[0] * (1.0 + f2_left) / (1.0 + f1_left)
    v_right = u_limits[1] * (1.0 + f2_right) / (1.0 + f1_right)
    return _solve_robin_bvp(f1, phi(x), x, slopes, v_left, v_right)


def background_state(f1: HeterogeneitySpec, f2: HeterogeneitySpec, sign: Sign, grid,
                     frozen_boundary: bool = False) -> BackgroundState:
    """
    The bounded stationary v-profile for u = sign * 1.

    With f1 = 0 this is sign * G(1 + f2) by quadrature; otherwise the Robin
    boundary-value problem built on the Riccati slopes is solved.
    """
    x = _as_grid(grid)
    positivity_check(f2, (x[0], x[-1]), label="f2")
    if not f1.is_zero:
        positivity_check(f1, (x[0], x[-1]), label="f1")
    s = float(sign.value)

    def unit(t):
        return np.full_like(np.asarray(t, dtype=float), s)

    v, q = response_profile(f1, f2, unit, (s, s), x, frozen_boundary=frozen_boundary)
    method = "green" if f1.is_zero else "bvp"
    return BackgroundState(sign, GridProfile.from_samples(x, v), GridProfile.from_samples(x, q),
                           f1, f2, method)


# sixth-order central stencil for the second derivative
_D2_STENCIL = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])


def background_residual(bg: BackgroundState) -> float:
    """
    Max interior residual of v'' - (1 + f1) v + sign (1 + f2).

    Quadrature states are checked with a sixth-order stencil, BVP states with
    the second-order stencil they were solved with.
    """
    x, v, dx = bg.v.x, bg.v.values, bg.v.dx
    if bg.method == "green":
        d2 = np.convolve(v, _D2_STENCIL[::-1], mode="valid") / dx ** 2
        inner = slice(3, x.size - 3)
    else:
        d2 = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / dx ** 2
        inner = slice(1, x.size - 1)
    xi = x[inner]
    res = (d2 - (1.0 + eval_heterogeneity(bg.f1, xi)) * v[inner]
           + bg.sign.value * (1.0 + eval_heterogeneity(bg.f2, xi)))
    return float(np.max(np.abs(res)))


def v_SF(x0, bg: BackgroundState, slopes: RiccatiSlopes):
    """
    [2 q_b^-(x0) - v_b^-(x0) (a_s(x0) + a_u(x0))] / (a_s(x0) - a_u(x0)).

    Reduces to -q_b^-(x0) when f1 = 0.
    """
    minus = bg.as_sign(Sign.MINUS)
    a_u, a_s = slopes.at(x0)
    denom = a_s - a_u
    if np.any(np.abs(denom) < 1e-14):
        raise RiccatiError("a_s and a_u coincide; v_SF is undefined")
    value = (2.0 * minus.q_at(x0) - minus.v_at(x0) * (a_s + a_u)) / denom
    return float(value) if np.ndim(x0) == 0 else value


def stationary_front_positions(p: ModelParams, bg: BackgroundState, slopes: RiccatiSlopes,
                               xtol: float = ROOT_XTOL) -> StationaryFrontSet:
    """
    Roots of alpha * v_SF(x) + gamma on the grid (q_b^-(x) = gamma/alpha for f1 = 0),
    refined by bisection. Classified only for alpha < 0: (q_b^-)' > 0 is unstable.
    """
    if p.alpha == 0:
        raise ConfigError("stationary fronts need alpha != 0")
    minus = bg.as_sign(Sign.MINUS)
    x = minus.q.x

    def condition(t):
        return p.alpha * v_SF(t, minus, slopes) + p.gamma

    g = condition(x)
    if np.max(np.abs(g)) <= DEGENERATE_TOL:
        logger.info("stationary-front condition vanishes identically (translation invariance)")
        return StationaryFrontSet((), degenerate=True)

    fronts = []
    for i in np.flatnonzero((g[:-1] * g[1:] < 0) | (g[:-1] == 0)):
        if g[i] == 0:
            root = float(x[i])
        else:
            try:
                root = bisect(condition, x[i], x[i + 1], xtol=xtol, maxiter=200)
            except RuntimeError as exc:
                raise RootFindingError(f"bisection failed in [{x[i]}, {x[i + 1]}]") from exc
        if p.alpha < 0:
            slope = float(minus.dq_at(root))
            label = FrontStability.UNSTABLE if slope > 0 else FrontStability.STABLE
        else:
            label = FrontStability.UNCLASSIFIED
        fronts.append(StationaryFront(root, label))
    if g[-1] == 0:
        fronts.append(StationaryFront(float(x[-1])))
    logger.debug("found %d stationary fronts", len(fronts))
    return StationaryFrontSet(tuple(fronts))
