"""
Method-of-lines simulation of the fast-reaction front PDE

    eps^2 U_s = eps^2 U_xx + U - U^3 - eps (alpha V + gamma)
    tauhat V_s = V_xx - (1 + f1) V + (1 + f2) U

with front tracking, initial-condition generators and stationary-front
bracketing.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import BDF, Radau
from scipy.interpolate import CubicSpline

from .background import Sign, background_state, response_profile
from .errors import (ConfigError, DomainExhaustedError, FrontNotFoundError,
                     RootBracketError, SolverError)
from .heterogeneity import HeterogeneitySpec, ZERO, eval_heterogeneity
from .model import GridProfile, ModelParams, Trajectory, make_grid

logger = logging.getLogger(__name__)

DEFAULT_T_SEQ = (1.0, 1.0, 1.0, 0.5, 0.5, 0.3, 0.2)
BOUNDARY_POLICIES = ("singular", "initial")
SOLVERS = {"BDF": BDF, "Radau": Radau}


@dataclass(frozen=True)
class PdeState:
    """U and V on a shared grid at time s."""
    U: GridProfile
    V: GridProfile
    s: float = 0.0

    def __post_init__(self):
        if not self.U.same_grid(self.V):
            raise ConfigError("U and V must share the grid")
        if not (np.all(np.isfinite(self.U.values)) and np.all(np.isfinite(self.V.values))):
            raise ConfigError("PDE state has non-finite values")

    @property
    def x(self) -> np.ndarray:
        return self.U.x

    @classmethod
    def from_arrays(cls, x: np.ndarray, U: np.ndarray, V: np.ndarray, s: float = 0.0) -> "PdeState":
        return cls(GridProfile.from_samples(x, U), GridProfile.from_samples(x, V), s)


@dataclass(frozen=True)
class PdeConfig:
    """Everything a single PDE run needs besides its initial condition."""
    params: ModelParams
    f1: HeterogeneitySpec = ZERO
    f2: HeterogeneitySpec = ZERO
    domain: Tuple[float, float] = (-20.0, 20.0)
    dx: Optional[float] = None  # defaults to eps / 8
    time: Tuple[float, float] = (0.0, 10.0)
    rtol: float = 1e-6
    atol: float = 1e-8
    method: str = "BDF"
    boundary: str = "singular"
    snapshot_every: Optional[float] = None
    record_every: int = 1
    boundary_margin: float = 5.0  # in units of eps
    frozen_boundary: bool = False

    def __post_init__(self):
        eps = self.params.epsilon
        if eps <= 0:
            raise ConfigError("PDE runs need epsilon > 0")
        if self.dx is None:
            object.__setattr__(self, "dx", eps / 8.0)
        if self.dx > eps / 8.0 * (1.0 + 1e-9):
            raise ConfigError(f"dx = {self.dx} violates the interface resolution rule dx <= eps/8")
        if self.domain[1] <= self.domain[0]:
            raise ConfigError(f"empty domain {self.domain}")
        if self.time[1] < self.time[0]:
            raise ConfigError(f"time interval {self.time} runs backwards")
        if self.boundary not in BOUNDARY_POLICIES:
            raise ConfigError(f"boundary must be one of {BOUNDARY_POLICIES}, got {self.boundary!r}")
        if self.method not in SOLVERS:
            raise ConfigError(f"method must be one of {tuple(SOLVERS)}, got {self.method!r}")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")

    @property
    def grid(self) -> np.ndarray:
        return make_grid(self.domain[0], self.domain[1], self.dx)

    def with_time(self, s0: float, s_end: float) -> "PdeConfig":
        return replace(self, time=(s0, s_end))

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "f1": self.f1.to_dict(),
            "f2": self.f2.to_dict(),
            "domain": list(self.domain),
            "dx": self.dx,
            "time": list(self.time),
            "rtol": self.rtol,
            "atol": self.atol,
            "method": self.method,
            "boundary": self.boundary,
            "snapshot_every": self.snapshot_every,
            "record_every": self.record_every,
        }


class PdeRun(NamedTuple):
    trajectory: Trajectory
    final: PdeState
    snapshots: List[PdeState]


@dataclass(frozen=True)
class FrontDiagnostics:
    """Front-definition checks evaluated on one PDE state."""
    single_crossing: bool
    monotone_interface: bool
    within_backgrounds: bool
    interface_width: float
    tail_residual: float
    position: Optional[float] = None
    notes: Tuple[str, ...] = field(default=())

    @property
    def is_front(self) -> bool:
        return self.single_crossing and self.monotone_interface


@lru_cache(maxsize=32)
def _background_pair(f1: HeterogeneitySpec, f2: HeterogeneitySpec, x_min: float, x_max: float,
                     dx: float, frozen: bool):
    x = make_grid(x_min, x_max, dx)
    plus = background_state(f1, f2, Sign.PLUS, x, frozen_boundary=frozen)
    return plus.negated(), plus


def backgrounds(cfg: PdeConfig):
    """(v_b^-, v_b^+) states on the configuration's grid."""
    return _background_pair(cfg.f1, cfg.f2, cfg.domain[0], cfg.domain[1], cfg.dx, cfg.frozen_boundary)


def _zero_crossing(x: np.ndarray, u: np.ndarray) -> float:
    negative = u < 0
    flips = np.flatnonzero(negative[:-1] != negative[1:])
    if flips.size != 1:
        raise FrontNotFoundError(f"no well-defined front: {flips.size} sign changes in U")
    i = flips[0]
    if not negative[i]:
        raise FrontNotFoundError("no well-defined front: U changes sign from + to -")
    return float(x[i] + (x[i + 1] - x[i]) * (-u[i]) / (u[i + 1] - u[i]))


def _interface_slice(U: np.ndarray, x: np.ndarray, z: float, level: float) -> slice:
    """Nodes of {|U| < level} connected to the zero at z, padded by one node on each side."""
    i0 = int(np.searchsorted(x, z))
    lo = i0
    while lo > 0 and U[lo - 1] > -level:
        lo -= 1
    hi = i0
    while hi < U.size - 1 and U[hi] < level:
        hi += 1
    return slice(max(lo - 1, 0), hi + 1)


def _checked_front(x: np.ndarray, U: np.ndarray, level: float = 0.9) -> float:
    """Front position after checking that U increases across the interface."""
    z = _zero_crossing(x, U)
    if not np.all(np.diff(U[_interface_slice(U, x, z, level)]) > 0):
        raise FrontNotFoundError(f"no well-defined front: U is not increasing across the interface at z = {z:.4f}")
    return z


def extract_front_position(U: GridProfile) -> float:
    """Linearly interpolated zero of U between the bracketing nodes."""
    return _zero_crossing(U.x, U.values)


def estimate_velocity(traj: Trajectory, window: int = 5) -> Trajectory:
    """
    dz/ds by second-order finite differences followed by a centered moving
    average; the window shrinks symmetrically near the ends.
    """
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"smoothing window must be a positive odd integer, got {window}")
    n = len(traj)
    if n < 3:
        raise ConfigError("velocity estimation needs at least 3 samples")
    raw = np.gradient(traj.z, traj.s, edge_order=2)
    idx = np.arange(n)
    half = np.minimum(window // 2, np.minimum(idx, n - 1 - idx))
    csum = np.concatenate([[0.0], np.cumsum(raw)])
    smooth = (csum[idx + half + 1] - csum[idx - half]) / (2 * half + 1)
    return traj.with_velocity(smooth)


class _Semidiscretisation:
    """Right-hand side and sparse Jacobian on the interior nodes."""

    def __init__(self, cfg: PdeConfig, x: np.ndarray, boundary_values: Tuple[float, float, float, float]):
        p = cfg.params
        self.eps, self.alpha, self.gamma, self.tauhat = p.epsilon, p.alpha, p.gamma, p.tauhat
        self.dx = x[1] - x[0]
        self.m = x.size - 2
        inner = x[1:-1]
        self.k = 1.0 + eval_heterogeneity(cfg.f1, inner)
        self.g = 1.0 + eval_heterogeneity(cfg.f2, inner)
        self.u_left, self.u_right, self.v_left, self.v_right = boundary_values

        m, dx2 = self.m, self.dx ** 2
        self.lap = sparse.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / dx2
        self.coupling_uv = sparse.identity(m) * (-self.alpha / self.eps)
        self.coupling_vu = sparse.diags(self.g / self.tauhat)
        self.vv = (self.lap - sparse.diags(self.k)) / self.tauhat

    def split(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return y[:self.m], y[self.m:]

    def full(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u, v = self.split(y)
        U = np.concatenate([[self.u_left], u, [self.u_right]])
        V = np.concatenate([[self.v_left], v, [self.v_right]])
        return U, V

    def rhs(self, s: float, y: np.ndarray) -> np.ndarray:
        U, V = self.full(y)
        u, v = U[1:-1], V[1:-1]
        dx2 = self.dx ** 2
        lap_u = (U[:-2] - 2.0 * u + U[2:]) / dx2
        lap_v = (V[:-2] - 2.0 * v + V[2:]) / dx2
        du = lap_u + (u - u ** 3 - self.eps * (self.alpha * v + self.gamma)) / self.eps ** 2
        dv = (lap_v - self.k * v + self.g * u) / self.tauhat
        return np.concatenate([du, dv])

    def jac(self, s: float, y: np.ndarray):
        u, _ = self.split(y)
        uu = self.lap + sparse.diags((1.0 - 3.0 * u ** 2) / self.eps ** 2)
        return sparse.bmat([[uu, self.coupling_uv], [self.coupling_vu, self.vv]], format="csc")


def _boundary_values(cfg: PdeConfig, ic: PdeState) -> Tuple[float, float, float, float]:
    if cfg.boundary == "initial":
        U, V = ic.U.values, ic.V.values
        return float(U[0]), float(U[-1]), float(V[0]), float(V[-1])
    minus, plus = backgrounds(cfg)
    return -1.0, 1.0, float(minus.v.values[0]), float(plus.v.values[-1])


def run_pde(cfg: PdeConfig, ic: PdeState) -> PdeRun:
    """
    Integrate from cfg.time[0] to cfg.time[1], recording the front position
    after every accepted step.

    Raises:
        DomainExhaustedError: the front came within boundary_margin * eps of an end
        FrontNotFoundError: a recorded state has several zeros of U or a non-increasing interface
        SolverError: the time integrator failed
    """
    x = cfg.grid
    if ic.U.n != x.size or not math.isclose(ic.U.x_min, x[0], abs_tol=1e-9):
        raise ConfigError("initial condition is not on the configuration grid")
    started = time.perf_counter()
    s0, s_end = cfg.time
    bvals = _boundary_values(cfg, ic)
    system = _Semidiscretisation(cfg, x, bvals)
    y0 = np.concatenate([ic.U.values[1:-1], ic.V.values[1:-1]])
    margin = cfg.boundary_margin * cfg.params.epsilon

    s_rec: List[float] = [s0]
    z_rec: List[float] = [extract_front_position(ic.U)]
    snapshots: List[PdeState] = []
    next_snapshot = s0 if cfg.snapshot_every else None

    def to_state(s, y):
        U, V = system.full(y)
        return PdeState.from_arrays(x, U, V, s)

    def finish(meta_extra=None) -> Trajectory:
        meta = {
            "solver": cfg.method,
            "grid": {"x_min": float(x[0]), "x_max": float(x[-1]), "dx": cfg.dx},
            "params": cfg.params.to_dict(),
            "rtol": cfg.rtol,
            "atol": cfg.atol,
            "boundary": cfg.boundary,
            "steps": steps,
            "wall_time": time.perf_counter() - started,
        }
        meta.update(meta_extra or {})
        traj = Trajectory(np.array(s_rec), np.array(z_rec), np.zeros(len(s_rec)), meta)
        return estimate_velocity(traj) if len(traj) >= 3 else traj

    if next_snapshot is not None:
        snapshots.append(ic)
        next_snapshot += cfg.snapshot_every

    steps = 0
    if s_end == s0:
        return PdeRun(finish(), ic, snapshots)

    solver = SOLVERS[cfg.method](system.rhs, s0, y0, s_end, rtol=cfg.rtol, atol=cfg.atol, jac=system.jac)
    logger.info("PDE run: eps=%g, %d nodes, s in [%g, %g]", cfg.params.epsilon, x.size, s0, s_end)
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise SolverError(f"PDE integration failed at s = {solver.t:.6g}: {message}")
        steps += 1
        if next_snapshot is not None and solver.t >= next_snapshot:
            dense = solver.dense_output()
            while next_snapshot <= solver.t:
                snapshots.append(to_state(next_snapshot, dense(next_snapshot)))
                next_snapshot += cfg.snapshot_every
        if steps % cfg.record_every and solver.status == "running":
            continue
        U, _ = system.full(solver.y)
        try:
            z = _checked_front(x, U)
        except FrontNotFoundError as exc:
            partial = finish({"failed": True, "error": str(exc)})
            raise FrontNotFoundError(f"{exc} (s = {solver.t:.4f})", partial=partial) from exc
        s_rec.append(float(solver.t))
        z_rec.append(z)
        if z - x[0] < margin or x[-1] - z < margin:
            partial = finish({"failed": True, "error": "domain exhausted"})
            raise DomainExhaustedError(f"front at z = {z:.4f} reached the boundary layer "
                                       f"(s = {solver.t:.4f})", partial=partial)

    final = to_state(float(solver.t), solver.y)
    traj = finish({"nfev": solver.nfev, "njev": solver.njev, "nlu": solver.nlu})
    logger.info("PDE run finished: %d steps, z(%g) = %.5f", steps, final.s, z_rec[-1])
    return PdeRun(traj, final, snapshots)


def _shift_state(state: PdeState, shift: float, minus_v: np.ndarray, plus_v: np.ndarray) -> PdeState:
    """state(x + shift) by cubic interpolation; background values where x + shift leaves the grid."""
    x = state.x
    src = x + shift
    U = CubicSpline(x, state.U.values, extrapolate=False)(src)
    V = CubicSpline(x, state.V.values, extrapolate=False)(src)
    left, right = src < x[0], src > x[-1]
    U[left], U[right] = -1.0, 1.0
    V[left], V[right] = minus_v[left], plus_v[right]
    return PdeState.from_arrays(x, U, V, state.s)


def tanh_seed(cfg: PdeConfig, z0: float) -> PdeState:
    """Leading-order front U = tanh((x - z0)/(sqrt(2) eps)) with its stationary V response."""
    x = cfg.grid
    width = math.sqrt(2.0) * cfg.params.epsilon

    def profile(t):
        return np.tanh((np.asarray(t, dtype=float) - z0) / width)

    v, _ = response_profile(cfg.f1, cfg.f2, profile, (-1.0, 1.0), x,
                            u_support=(z0 - 40.0 * width, z0 + 40.0 * width),
                            frozen_boundary=cfg.frozen_boundary)
    return PdeState.from_arrays(x, profile(x), v, cfg.time[0])


def make_ic_relax_shift(cfg: PdeConfig, target_z0: float,
                        T_seq: Sequence[float] = DEFAULT_T_SEQ) -> PdeState:
    """
    Relax a tanh seed by short runs, shifting the state after each run so the
    front returns to target_z0.
    """
    if not T_seq:
        raise ConfigError("T_seq must be nonempty")
    minus, plus = backgrounds(cfg)
    state = tanh_seed(cfg, target_z0)
    s0 = cfg.time[0]
    for i, duration in enumerate(T_seq, start=1):
        run = run_pde(cfg.with_time(s0, s0 + duration), state)
        z_end = extract_front_position(run.final.U)
        relaxed = PdeState(run.final.U, run.final.V, s0)
        state = _shift_state(relaxed, z_end - target_z0, minus.v.values, plus.v.values)
        logger.info("relax-shift %d/%d: drift %.3e over T = %g", i, len(T_seq), z_end - target_z0, duration)
    return state


def travel_direction(cfg: PdeConfig, z0: float, run_time: float,
                     T_seq: Sequence[float] = DEFAULT_T_SEQ) -> int:
    """Sign of z(end) - z(start) for a relaxed front started at z0."""
    ic = make_ic_relax_shift(cfg, z0, T_seq)
    s0 = cfg.time[0]
    run = run_pde(cfg.with_time(s0, s0 + run_time), ic)
    drift = run.trajectory.z[-1] - run.trajectory.z[0]
    logger.info("trial start z0 = %.6f: drift %.3e", z0, drift)
    return int(np.sign(drift))


def bracket_stationary_front(cfg: PdeConfig, interval: Tuple[float, float], run_time: float = 5.0,
                             T_seq: Sequence[float] = DEFAULT_T_SEQ, width: float = 1e-3,
                             max_iter: int = 40) -> Tuple[float, float]:
    """Bisect the initial position on the direction of travel."""
    lo, hi = interval
    d_lo = travel_direction(cfg, lo, run_time, T_seq)
    d_hi = travel_direction(cfg, hi, run_time, T_seq)
    if d_lo == d_hi or d_lo == 0 or d_hi == 0:
        raise RootBracketError(f"fronts at {lo} and {hi} travel in the same direction ({d_lo}, {d_hi})")
    for _ in range(max_iter):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        d_mid = travel_direction(cfg, mid, run_time, T_seq)
        if d_mid == 0:
            return mid, mid
        if d_mid == d_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def front_diagnostics(state: PdeState, minus, plus, level: float = 0.9,
                      tol: float = 1e-6) -> FrontDiagnostics:
    """
    Front-definition checks: one zero of U, U increasing across the interface
    {|U| < level}, and U, V between the background states.
    """
    x, U, V = state.x, state.U.values, state.V.values
    notes = []
    try:
        z = _zero_crossing(x, U)
        single = True
    except FrontNotFoundError as exc:
        z, single = None, False
        notes.append(str(exc))

    monotone, width = False, float("nan")
    if single:
        part = _interface_slice(U, x, z, level)
        window = U[part]
        monotone = bool(np.all(np.diff(window) > 0))
        if monotone and window.size > 1:
            xs = x[part]
            width = float(np.interp(level, window, xs) - np.interp(-level, window, xs))

    vb_minus, vb_plus = minus.v.values, plus.v.values
    lower_v, upper_v = np.minimum(vb_minus, vb_plus), np.maximum(vb_minus, vb_plus)
    within = bool(np.all(np.abs(U) <= 1.0 + tol) and np.all(V >= lower_v - tol) and np.all(V <= upper_v + tol))
    tails = float(max(abs(U[0] + 1.0), abs(U[-1] - 1.0),
                      abs(V[0] - vb_minus[0]), abs(V[-1] - vb_plus[-1])))
    return FrontDiagnostics(single, monotone, within, width, tails, z, tuple(notes))
