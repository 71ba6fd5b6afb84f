"""
Travelling waves of the constant-coefficient model in the co-moving fast
frame xi = (x - c s)/eps:

    u' = p
    p' = -u + u^3 + eps (alpha v + gamma) - eps c p
    v' = eps q
    q' = eps (v - u - tauhat c q)

Speeds are located by shooting from the section u = 0 toward both slow
manifolds and bisecting the p-gap in c.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .constant_coeff import outer_state, slow_eigenvalues, speed_roots
from .errors import ConfigError, ShootingError
from .model import ModelParams
from .pde import PdeState

logger = logging.getLogger(__name__)


class WaveState(NamedTuple):
    u: float
    p: float
    v: float
    q: float


@dataclass(frozen=True)
class ShootingNumerics:
    half_width: float = 8.0  # fast-frame distance from the section to each slow manifold
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "LSODA"
    p_bracket: Tuple[float, float] = (0.02, 1.4)
    box: Tuple[float, float, float, float] = (1.5, 1.5, 3.0, 3.0)
    trace_offset: float = 1e-6
    trace_overshoot: float = 0.3
    matching_tol: float = 1e-9
    max_matching_iter: int = 30
    pad_tol: float = 1e-4


class FastLeg(NamedTuple):
    p0: float
    end: np.ndarray
    sol: object


@dataclass(frozen=True)
class SlowTrace:
    """q as a function of v along a slow invariant curve through a fixed point."""
    v: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        if self.v.size < 4 or np.any(np.diff(self.v) <= 0):
            raise ShootingError("slow trace is not a graph over v")
        object.__setattr__(self, "_spline", CubicSpline(self.v, self.q))

    @property
    def v_range(self) -> Tuple[float, float]:
        return float(self.v[0]), float(self.v[-1])

    def __call__(self, v):
        return self._spline(v)


@dataclass(frozen=True)
class ShootingResult:
    c: float
    mismatch: float
    p_forward: float
    p_backward: float
    v0: float
    q0: float
    left: FastLeg
    right: FastLeg
    iterations: int


def comoving_rhs(w: WaveState, c: float, p: ModelParams) -> WaveState:
    u, pu, v, q = w
    eps = p.epsilon
    return WaveState(
        pu,
        -u + u ** 3 + eps * (p.alpha * v + p.gamma) - eps * c * pu,
        eps * q,
        eps * (v - u - p.tauhat * c * q),
    )


def _rhs(xi, y, c, params):
    return np.asarray(comoving_rhs(WaveState(*y), c, params))


def _fixed_point(branch: int, params: ModelParams) -> float:
    return outer_state(branch, params)


def _slow_rate(branch: int, params: ModelParams, v: float) -> float:
    """1 - du/dv on the slow manifold u = u_branch(v)."""
    u = outer_state(branch, params, v)
    return 1.0 - params.epsilon * params.alpha / (1.0 - 3.0 * u ** 2)


def slow_trace(branch: int, c: float, params: ModelParams, numerics: ShootingNumerics) -> SlowTrace:
    """
    The one-dimensional slow manifold of the fixed point on u = u_branch(v)
    that a front can use: unstable for branch -1 (left of the front), stable
    for branch +1 (right of it).
    """
    tauhat = params.tauhat
    v_bar = _fixed_point(branch, params)
    mu_u, mu_s = slow_eigenvalues(c, tauhat, _slow_rate(branch, params, v_bar))
    delta = numerics.trace_offset
    if branch < 0:
        y0 = [v_bar + delta, delta * mu_u]
        stop = _fixed_point(+1, params) + numerics.trace_overshoot
        span = (0.0, 80.0)
    else:
        y0 = [v_bar - delta, -delta * mu_s]
        stop = _fixed_point(-1, params) - numerics.trace_overshoot
        span = (0.0, -80.0)

    def rhs(zeta, y):
        v, q = y
        return [q, v - outer_state(branch, params, v) - tauhat * c * q]

    def reached(zeta, y):
        return y[0] - stop

    reached.terminal = True
    sol = solve_ivp(rhs, span, y0, method=numerics.method, rtol=numerics.rtol, atol=numerics.atol,
                    events=reached, dense_output=True)
    if sol.status < 0 or (sol.status == 0 and not sol.t_events[0].size):
        raise ShootingError(f"slow trace on branch {branch:+d} did not cross the interface region (c = {c})")
    zeta = np.linspace(span[0], sol.t[-1], 4000)
    v, q = sol.sol(zeta)
    order = np.argsort(v)
    return SlowTrace(v[order], q[order])


def _fast_coordinates(y: np.ndarray, branch: int, c: float, params: ModelParams) -> Tuple[float, float]:
    """Unstable and stable fast coordinates of y relative to the slow manifold point at (v, q)."""
    eps = params.epsilon
    u, pu, v, q = y
    u_m = outer_state(branch, params, v)
    p_m = eps ** 2 * params.alpha * q / (1.0 - 3.0 * u_m ** 2)
    root = math.sqrt(eps ** 2 * c ** 2 + 4.0 * (3.0 * u_m ** 2 - 1.0))
    lam_u, lam_s = 0.5 * (-eps * c + root), 0.5 * (-eps * c - root)
    du, dp = u - u_m, pu - p_m
    return (dp - lam_s * du) / (lam_u - lam_s), (lam_u * du - dp) / (lam_u - lam_s)


def _fast_leg(p0: float, v0: float, q0: float, side: int, c: float, params: ModelParams,
              numerics: ShootingNumerics, dense: bool = False):
    """
    Integrate from (0, p0, v0, q0) toward the slow manifold on `side`.

    Returns the signed miss (overshoot positive on the right, negative on the
    left) and the solution object.
    """
    box_u, box_p, box_v, box_q = numerics.box

    def escape(xi, y):
        return min(box_u - abs(y[0]), box_p - abs(y[1]), box_v - abs(y[2]), box_q - abs(y[3]))

    def fallback(xi, y):
        return y[0]

    escape.terminal = True
    fallback.terminal = True
    # u returns through the section from the side it left
    fallback.direction = 1.0 if side < 0 else -1.0

    sol = solve_ivp(_rhs, (0.0, side * numerics.half_width), [0.0, p0, v0, q0], method=numerics.method,
                    args=(c, params), rtol=numerics.rtol, atol=numerics.atol,
                    events=(escape, fallback), dense_output=dense)
    if sol.status < 0:
        raise ShootingError(f"fast orbit integration failed: {sol.message}")
    if sol.t_events[0].size:
        miss = float(side)
    elif sol.t_events[1].size:
        miss = -float(side)
    else:
        unstable, stable = _fast_coordinates(sol.y[:, -1], side, c, params)
        miss = stable if side < 0 else unstable
    return miss, sol


def _solve_fast_leg(v0: float, q0: float, side: int, c: float, params: ModelParams,
                    numerics: ShootingNumerics) -> FastLeg:
    def miss(p0):
        return _fast_leg(p0, v0, q0, side, c, params, numerics)[0]

    lo, hi = numerics.p_bracket
    m_lo, m_hi = miss(lo), miss(hi)
    if m_lo * m_hi > 0:
        raise ShootingError(f"no p bracket on side {side:+d} for c = {c:.6g} "
                            f"(misses {m_lo:.3g}, {m_hi:.3g})")
    p0 = brentq(miss, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    _, sol = _fast_leg(p0, v0, q0, side, c, params, numerics, dense=True)
    if sol.t_events[0].size or sol.t_events[1].size:
        raise ShootingError(f"fast orbit on side {side:+d} left the trapping box at the converged p")
    return FastLeg(p0, sol.y[:, -1], sol)


def _match_slow(left: SlowTrace, right: SlowTrace, drift_left, drift_right) -> Tuple[float, float]:
    """(v0, q0) whose drifted images lie on the left and right slow traces."""
    dlv, dlq = drift_left
    drv, drq = drift_right
    lo = max(left.v_range[0] + dlv, right.v_range[0] - drv)
    hi = min(left.v_range[1] + dlv, right.v_range[1] - drv)

    def gap(v):
        return float(left(v - dlv) + dlq - right(v + drv) + drq)

    if not lo < hi or gap(lo) * gap(hi) > 0:
        raise ShootingError("slow traces do not intersect")
    v0 = brentq(gap, lo, hi, xtol=1e-14)
    return v0, float(right(v0 + drv) - drq)


def shoot(c: float, p: ModelParams, numerics: Optional[ShootingNumerics] = None) -> ShootingResult:
    """
    Heteroclinic defect for speed c: p_forward - p_backward at u = 0, where
    the forward orbit leaves the minus slow manifold along its unstable fibre
    and the backward orbit reaches the plus slow manifold along its stable
    fibre. The slow coordinates at the section are iterated so both orbits
    end on the matching slow traces.
    """
    if p.epsilon <= 0:
        raise ConfigError("shooting needs epsilon > 0")
    numerics = numerics or ShootingNumerics()
    left_trace = slow_trace(-1, c, p, numerics)
    right_trace = slow_trace(+1, c, p, numerics)

    v0, q0 = _match_slow(left_trace, right_trace, (0.0, 0.0), (0.0, 0.0))
    for iteration in range(1, numerics.max_matching_iter + 1):
        left = _solve_fast_leg(v0, q0, -1, c, p, numerics)
        right = _solve_fast_leg(v0, q0, +1, c, p, numerics)
        drift_left = (v0 - left.end[2], q0 - left.end[3])
        drift_right = (right.end[2] - v0, right.end[3] - q0)
        v_new, q_new = _match_slow(left_trace, right_trace, drift_left, drift_right)
        change = max(abs(v_new - v0), abs(q_new - q0))
        v0, q0 = v_new, q_new
        if change < numerics.matching_tol:
            break
    else:
        raise ShootingError(f"slow matching did not converge for c = {c:.6g}")

    left = _solve_fast_leg(v0, q0, -1, c, p, numerics)
    right = _solve_fast_leg(v0, q0, +1, c, p, numerics)
    mismatch = left.p0 - right.p0
    logger.debug("shoot c=%.8f: v0=%.6f q0=%.6f mismatch=%.3e (%d iterations)", c, v0, q0, mismatch, iteration)
    return ShootingResult(c, mismatch, left.p0, right.p0, v0, q0, left, right, iteration)


def shoot_mismatch(c: float, p: ModelParams, numerics: Optional[ShootingNumerics] = None) -> float:
    return shoot(c, p, numerics).mismatch


def find_speed(eps: float, p: ModelParams, root_index: str = "0",
               bracket: Optional[Tuple[float, float]] = None, width: float = 5e-4,
               numerics: Optional[ShootingNumerics] = None, max_iter: int = 60) -> Tuple[float, float]:
    """
    Bisect the shooting mismatch in c. The default bracket is centred on the
    matching root of the singular-limit speed equation.
    """
    params = p.with_epsilon(eps)
    if bracket is None:
        centre = speed_roots(p.with_epsilon(0.0)).pick(root_index)
        bracket = (centre - 0.1 - eps, centre + 0.1 + eps)
    lo, hi = bracket
    if not lo < hi:
        raise ConfigError(f"invalid speed bracket {bracket}")
    m_lo = shoot_mismatch(lo, params, numerics)
    m_hi = shoot_mismatch(hi, params, numerics)
    if m_lo * m_hi > 0:
        raise ShootingError(f"mismatch has no sign change on [{lo}, {hi}] ({m_lo:.3g}, {m_hi:.3g})")
    for _ in range(max_iter):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        m_mid = shoot_mismatch(mid, params, numerics)
        logger.info("speed bisection eps=%g: c=%.8f mismatch=%.3e", eps, mid, m_mid)
        if m_mid == 0.0:
            return mid, mid
        if m_mid * m_lo < 0:
            hi, m_hi = mid, m_mid
        else:
            lo, m_lo = mid, m_mid
    return lo, hi


def _slow_tail(branch: int, start: np.ndarray, zeta_start: float, zeta_end: float, c: float,
               params: ModelParams, numerics: ShootingNumerics):
    """Slow orbit on u = u_branch(v) from the end of a fast leg toward the fixed point."""
    v_bar = _fixed_point(branch, params)
    tauhat = params.tauhat

    def rhs(zeta, y):
        v, q = y
        return [q, v - outer_state(branch, params, v) - tauhat * c * q]

    def settled(zeta, y):
        return abs(y[0] - v_bar) - numerics.pad_tol

    settled.terminal = True
    sol = solve_ivp(rhs, (zeta_start, zeta_end), start, method=numerics.method, rtol=numerics.rtol,
                    atol=numerics.atol, events=settled, dense_output=True)
    if sol.status < 0:
        raise ShootingError(f"slow tail integration failed: {sol.message}")
    return sol, v_bar


def build_concatenated_ic(c: float, eps: float, p: ModelParams, grid, z0: Optional[float] = None,
                          numerics: Optional[ShootingNumerics] = None) -> PdeState:
    """
    Front-shaped PDE state assembled from the shooting orbits at speed c:
    slow tails on the minus and plus manifolds, the two fast legs joined at
    the section u = 0 (placed at z0), and fixed-point values beyond.
    """
    numerics = numerics or ShootingNumerics()
    params = p.with_epsilon(eps)
    x = np.asarray(grid, dtype=float)
    if z0 is None:
        z0 = 0.5 * (x[0] + x[-1])
    shot = shoot(c, params, numerics)
    L = numerics.half_width
    xi = (x - z0) / eps
    U = np.empty_like(x)
    V = np.empty_like(x)

    for side, leg in ((-1, shot.left), (+1, shot.right)):
        fast = (xi >= -L) & (xi <= 0) if side < 0 else (xi > 0) & (xi <= L)
        if fast.any():
            y = leg.sol.sol(xi[fast])
            U[fast], V[fast] = y[0], y[2]

        slow = xi < -L if side < 0 else xi > L
        if not slow.any():
            continue
        zeta = x[slow] - z0
        edge = side * eps * L
        far = zeta.min() if side < 0 else zeta.max()
        sol, fixed = _slow_tail(side, leg.end[2:], edge, far, c, params, numerics)
        v = np.full(zeta.size, fixed)
        covered = (zeta >= sol.t[-1]) if side < 0 else (zeta <= sol.t[-1])
        if covered.any():
            v[covered] = sol.sol(zeta[covered])[0]
        V[slow] = v
        U[slow] = outer_state(side, params, v)

    logger.info("concatenated front at z0 = %.4f for c = %.6f (mismatch %.2e)", z0, c, shot.mismatch)
    return PdeState.from_arrays(x, U, V)
