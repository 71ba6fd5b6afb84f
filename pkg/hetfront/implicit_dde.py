"""
Co-simulation of the implicit form: the front path is advanced together with
the slow field

    tauhat V_s = V_xx - V + (1 + f2(x)) sign(x - z(s))

and each step solves alpha V(z(s)) + gamma = (sqrt(2)/3) z'(s) for the slope
increment.
"""

import logging
import math
import time
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

from .background import BackgroundState, Sign, response_profile
from .constant_coeff import SQRT2_3
from .dde import DdeConfig, VField, history_trajectory, solve_for_increment
from .errors import ConfigError, DomainExhaustedError, HetfrontError
from .green import Source, green_transform
from .heterogeneity import ZERO, eval_heterogeneity
from .history import FrontHistory
from .model import GridProfile, Trajectory, make_grid

logger = logging.getLogger(__name__)

TRBDF2_GAMMA = 2.0 - math.sqrt(2.0)
FRONT_CLEARANCE = 5.0


class FieldStepReport(NamedTuple):
    history: FrontHistory
    field: VField
    a_star: float
    iterations: int


def cell_sign(x: np.ndarray, z: float, dx: float) -> np.ndarray:
    """sign(x - z) averaged over the cell around each node."""
    return np.clip((x - z) / (0.5 * dx), -1.0, 1.0)


class SlowFieldStepper:
    """
    TR-BDF2 for the linear V-equation on a fixed grid. Boundary nodes are
    pinned; both implicit stages share one prefactorised matrix.
    """

    def __init__(self, cfg: DdeConfig, bg: BackgroundState, x: Optional[np.ndarray] = None):
        self.cfg = cfg
        self.tauhat = cfg.params.tauhat
        self.x = make_grid(*cfg.algo2_domain, cfg.algo2_dx) if x is None else np.asarray(x, dtype=float)
        self.dx = float(self.x[1] - self.x[0])
        self.k = cfg.h / cfg.algo2_substeps
        plus = bg.as_sign(Sign.PLUS)
        self.v_left = -float(plus.v_at(self.x[0]))
        self.v_right = float(plus.v_at(self.x[-1]))
        self.weight = 1.0 + eval_heterogeneity(cfg.f2, self.x[1:-1])

        m = self.x.size - 2
        dx2 = self.dx ** 2
        lap = sparse.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / dx2
        self.L = ((lap - sparse.identity(m)) / self.tauhat).tocsc()
        self.boundary = np.zeros(m)
        self.boundary[0] = self.v_left / dx2 / self.tauhat
        self.boundary[-1] = self.v_right / dx2 / self.tauhat
        self.c = 0.5 * TRBDF2_GAMMA * self.k
        self.solve = factorized((sparse.identity(m, format="csc") - self.c * self.L).tocsc())

    def forcing(self, z: float) -> np.ndarray:
        return self.weight * cell_sign(self.x[1:-1], z, self.dx) / self.tauhat + self.boundary

    def with_boundary(self, interior: np.ndarray) -> np.ndarray:
        return np.concatenate([[self.v_left], interior, [self.v_right]])

    def advance(self, V: np.ndarray, path, s0: float, s1: float) -> np.ndarray:
        """Integrate from s0 to s1 while the front follows path(s)."""
        g = TRBDF2_GAMMA
        n = max(1, int(round((s1 - s0) / self.k)))
        k = (s1 - s0) / n
        if not math.isclose(k, self.k, rel_tol=1e-9):
            raise ConfigError("step length does not match the prefactorised substep")
        a1 = 1.0 / (g * (2.0 - g))
        a0 = (1.0 - g) ** 2 / (g * (2.0 - g))
        u = np.asarray(V, dtype=float)[1:-1]
        f_n = self.forcing(path(s0))
        for i in range(n):
            s = s0 + i * k
            f_mid = self.forcing(path(s + g * k))
            f_next = self.forcing(path(s + k))
            u_mid = self.solve(u + self.c * (self.L @ u) + self.c * (f_n + f_mid))
            u = self.solve(a1 * u_mid - a0 * u + self.c * f_next)
            f_n = f_next
        return self.with_boundary(u)


def _linear_path(z0: float, s0: float, slope: float):
    return lambda s: z0 + slope * (s - s0)


def field_error(h: FrontHistory, a: float, field: VField, stepper: SlowFieldStepper, cfg: DdeConfig):
    """Jump-condition residual after advancing the field along the trial segment; returns (e, V)."""
    p = cfg.params
    s_new = field.s + cfg.h
    slope = h.last_slope + a
    path = _linear_path(h.z_last, h.s_last, slope)
    V = stepper.advance(field.V.values, path, field.s, s_new)
    v_front = float(np.interp(path(s_new), stepper.x, V))
    return SQRT2_3 * slope - p.alpha * v_front - p.gamma, V


def dde_step_algo2(h: FrontHistory, field: VField, cfg: DdeConfig, stepper: SlowFieldStepper) -> FieldStepReport:
    if not math.isclose(field.s, h.s_last, abs_tol=1e-9):
        raise ConfigError(f"field time {field.s} does not match the history end {h.s_last}")
    cache = {}

    def error(a):
        e, V = field_error(h, a, field, stepper, cfg)
        cache[a] = V
        return e

    a_star, iterations = solve_for_increment(error, cfg.a_max)
    V = cache[a_star] if a_star in cache else field_error(h, a_star, field, stepper, cfg)[1]
    history = h.extended(a_star, h.s_last + cfg.h)
    z = history.z_last
    if not stepper.x[0] + FRONT_CLEARANCE <= z <= stepper.x[-1] - FRONT_CLEARANCE:
        raise DomainExhaustedError(f"front at z = {z:.4f} left the co-simulation grid interior")
    return FieldStepReport(history, VField(field.V.with_values(V), history.s_last), a_star, iterations)


def initial_vfield(h0: FrontHistory, cfg: DdeConfig, bg: BackgroundState,
                   warmup: Optional[float] = None, stepper: Optional[SlowFieldStepper] = None) -> VField:
    """
    V at the end of h0: the stationary step profile at z(s0 - warmup) carried
    along the history for `warmup` time units. The warm-up is shortened when
    the history leaves the grid interior.
    """
    stepper = stepper or SlowFieldStepper(cfg, bg)
    x = stepper.x
    s0 = h0.s_last
    warmup = cfg.warmup_time if warmup is None else warmup
    n = int(round(warmup / cfg.h))
    lo, hi = x[0] + FRONT_CLEARANCE, x[-1] - FRONT_CLEARANCE
    while n > 0:
        z_path, _ = h0.evaluate(np.linspace(s0 - n * cfg.h, s0, 4 * n + 1))
        if np.all((z_path >= lo) & (z_path <= hi)):
            break
        n //= 2
    if n * cfg.h < warmup:
        logger.warning("warm-up clipped from %g to %g to keep the front inside the grid", warmup, n * cfg.h)
    z_start, _ = h0.evaluate(s0 - n * cfg.h)
    if not lo <= z_start <= hi:
        raise DomainExhaustedError(f"initial front position {z_start:.4f} is outside the co-simulation grid")

    v, _ = response_profile(ZERO, cfg.f2, lambda t: np.sign(np.asarray(t, dtype=float) - z_start), (-1.0, 1.0),
                            x, u_breakpoints=(z_start,))
    V = stepper.with_boundary(v[1:-1])

    def path(s):
        return float(h0.evaluate(s)[0])

    for i in range(n, 0, -1):
        V = stepper.advance(V, path, s0 - i * cfg.h, s0 - (i - 1) * cfg.h)
    return VField(GridProfile.from_samples(x, V), s0)


def dde_run_algo2(h0: FrontHistory, V0: VField, T: float, cfg: DdeConfig,
                  bg: BackgroundState) -> Tuple[Trajectory, VField]:
    """Co-simulate ceil(T / h) steps; a failing step ends the run with meta["failed"] set."""
    started = time.perf_counter()
    x = V0.V.x
    stepper = SlowFieldStepper(cfg, bg, x)
    n_steps = int(math.ceil(T / cfg.h - 1e-9))
    first = h0.s.size - 1
    h, field = h0, V0
    diagnostics: List[Tuple[float, float, float, float, int]] = []
    meta = {
        "algo": 2,
        "h": cfg.h,
        "grid": {"x_min": float(x[0]), "x_max": float(x[-1]), "dx": stepper.dx},
        "substeps": cfg.algo2_substeps,
        "w_column": "V(z)",
        "params": cfg.params.to_dict(),
        "formally_derived": cfg.params.formally_derived,
        "steps": n_steps,
    }
    logger.info("DDE algorithm 2: %d steps of h = %g on %d nodes", n_steps, cfg.h, x.size)
    for i in range(1, n_steps + 1):
        try:
            report = dde_step_algo2(h, field, cfg, stepper)
        except HetfrontError as exc:
            logger.error("co-simulation step %d failed at s = %.4f: %s", i, h.s_last, exc)
            meta.update(failed=True, error=str(exc), steps=i - 1)
            break
        h, field = report.history, report.field
        v_front = float(field.V.at(h.z_last))
        diagnostics.append((h.s_last, v_front, 0.0, report.a_star, report.iterations))
        if i % cfg.log_every == 0:
            logger.info("step %d/%d: s = %.3f, z = %.5f, z' = %.5f", i, n_steps, h.s_last, h.z_last, h.last_slope)
    meta["wall_time"] = time.perf_counter() - started
    return history_trajectory(h, first, meta, diagnostics), field


def implicit_consistency(prev: VField, nxt: VField, z: float, bg: BackgroundState, tauhat: float) -> float:
    """
    tauhat G(V_s)(z) + V(z) + q_b^-(z) from two consecutive fields; vanishes
    for the exact field, tying the co-simulated V to the delay functional.
    """
    if not prev.V.same_grid(nxt.V):
        raise ConfigError("fields are on different grids")
    ds = nxt.s - prev.s
    if ds <= 0:
        raise ConfigError("fields must be in time order")
    rate = nxt.V.with_values((nxt.V.values - prev.V.values) / ds)
    g, _ = green_transform(Source.from_profile(rate), np.array([z]))
    v_mid = 0.5 * (prev.V.at(z) + nxt.V.at(z))
    q_minus = float(bg.as_sign(Sign.MINUS).q_at(z))
    return float(tauhat * g[0] + v_mid + q_minus)
