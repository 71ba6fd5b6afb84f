"""
The singular-limit delay equation for the front position

    (sqrt(2)/3) z'(s) = alpha (tauhat W[z](s) - q_b^-(z(s))) + gamma

with the memory term W evaluated by Monte Carlo or by deterministic
quadrature, and the explicit fixed-step scheme that commits one linear
segment per step.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import erfc, erfcx

from .background import BackgroundState, Sign
from .constant_coeff import SQRT2_3
from .errors import ConfigError, HetfrontError, QuadratureError, RootBracketError, SolverError
from .heterogeneity import HeterogeneitySpec, ZERO, eval_heterogeneity
from .history import FrontHistory, history_eval
from .model import GridProfile, ModelParams, Trajectory

logger = logging.getLogger(__name__)

METHODS = ("mc", "quadrature")
BRACKET_EXPANSION = 4.0
MAX_QUAD_REFINEMENTS = 14

_NODES_HI, _WEIGHTS_HI = leggauss(12)
_NODES_LO, _WEIGHTS_LO = leggauss(6)


@dataclass(frozen=True)
class DelayFunctionalEstimate:
    value: float
    stderr: float
    method: str
    samples: int
    truncation: float = 0.0
    dropped: int = 0


@dataclass(frozen=True)
class DdeConfig:
    params: ModelParams
    f2: HeterogeneitySpec = ZERO
    h: float = 0.025
    M: int = 100_000
    seed: int = 0
    a_max: float = 5.0
    algo: int = 1
    method: str = "mc"
    r_max: Optional[float] = None  # defaults to 40 tauhat
    quad_tol: float = 1e-10
    algo2_domain: Tuple[float, float] = (-30.0, 30.0)
    algo2_dx: float = 0.02
    algo2_substeps: int = 4
    warmup: Optional[float] = None  # defaults to 20 tauhat
    log_every: int = 200

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError(f"step h must be positive, got {self.h}")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}")
        if self.algo not in (1, 2):
            raise ConfigError(f"algo must be 1 or 2, got {self.algo}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.a_max > 0:
            raise ConfigError("a_max must be positive")
        if self.algo2_substeps < 1:
            raise ConfigError("algo2_substeps must be >= 1")

    @property
    def truncation_time(self) -> float:
        return self.r_max if self.r_max is not None else 40.0 * self.params.tauhat

    @property
    def warmup_time(self) -> float:
        return self.warmup if self.warmup is not None else 20.0 * self.params.tauhat

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "f2": self.f2.to_dict(),
            "h": self.h,
            "M": self.M,
            "seed": self.seed,
            "a_max": self.a_max,
            "algo": self.algo,
            "method": self.method,
            "r_max": self.truncation_time,
            "algo2_domain": list(self.algo2_domain),
            "algo2_dx": self.algo2_dx,
            "algo2_substeps": self.algo2_substeps,
            "warmup": self.warmup_time,
        }


@dataclass(frozen=True)
class VField:
    """The co-simulated slow field of the implicit form at time s."""
    V: GridProfile
    s: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.V.values)):
            raise ConfigError("VField has non-finite values")


class McSamples(NamedTuple):
    X: np.ndarray
    R: np.ndarray


class StepReport(NamedTuple):
    history: FrontHistory
    W: float
    stderr: float
    a_star: float
    iterations: int


def sample_levy(c: float, rng: np.random.Generator, size=None):
    """Levy(0, c) draws as c / Z^2 with Z standard normal."""
    if c < 0:
        raise ConfigError(f"Levy scale must be non-negative, got {c}")
    z = rng.standard_normal(size)
    if c == 0:
        return np.zeros_like(z) if size is not None else 0.0
    return c / z ** 2


def mc_samples(cfg: DdeConfig, stream: Optional[int] = None) -> McSamples:
    """(X, R) pairs with X ~ Exp(1) and R | X ~ Levy(0, tauhat X^2 / 2)."""
    key = [cfg.seed] if stream is None else [cfg.seed, stream]
    rng = np.random.default_rng(key)
    X = rng.standard_exponential(cfg.M)
    R = sample_levy(1.0, rng, cfg.M) * (0.5 * cfg.params.tauhat * X ** 2)
    return McSamples(X, R)


def delay_functional_mc(h: FrontHistory, s: float, cfg: DdeConfig, stream: Optional[int] = None,
                        samples: Optional[McSamples] = None) -> DelayFunctionalEstimate:
    """Monte-Carlo estimate of W[z](s); identical seeds and streams give identical results."""
    tauhat = cfg.params.tauhat
    X, R = samples if samples is not None else mc_samples(cfg, stream)
    # R = 0 (X = 0) and R = inf (Z = 0): the integrand vanishes in both limits
    ok = (R > 0) & np.isfinite(R)
    dropped = int(ok.size - np.count_nonzero(ok))
    X, R = X[ok], R[ok]
    z_s, _ = history_eval(h, s)
    z_past, slope_past = history_eval(h, s - R)
    delta = z_s - z_past
    weight = slope_past * (1.0 + eval_heterogeneity(cfg.f2, z_past))
    terms = np.zeros(ok.size)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        decay = R / tauhat + tauhat * delta ** 2 / (4.0 * R)
        y = tauhat * delta * X / (2.0 * R)
        terms[ok] = weight * R * (np.exp(y - decay) + np.exp(-y - decay)) / (tauhat * X)
    if not np.all(np.isfinite(terms)):
        raise SolverError(f"non-finite delay integrand at s = {s:.4f} "
                          f"({np.count_nonzero(~np.isfinite(terms))} samples)")
    if dropped:
        logger.debug("delay functional at s = %.4f: %d degenerate samples set to 0", s, dropped)
    M = terms.size
    stderr = float(np.std(terms, ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    return DelayFunctionalEstimate(float(np.mean(terms)), stderr, "mc", M, dropped=dropped)


def _inner_kernel(delta: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """integral over X > 0 of exp(-X - beta (X + delta)^2)."""
    root = np.sqrt(beta)
    w = root * (delta + 0.5 / beta)
    scale = 0.5 * math.sqrt(math.pi) / root
    out = np.empty_like(w)
    pos = w >= 0
    out[pos] = scale[pos] * np.exp(-beta[pos] * delta[pos] ** 2) * erfcx(w[pos])
    neg = ~pos
    out[neg] = scale[neg] * np.exp(delta[neg] + 0.25 / beta[neg]) * erfc(w[neg])
    return out


def delay_functional_quadrature(h: FrontHistory, s: float, tauhat: float, f2: HeterogeneitySpec = ZERO,
                                R_max: Optional[float] = None, tol: float = 1e-10,
                                max_piece: float = 0.25) -> DelayFunctionalEstimate:
    """
    Deterministic W[z](s). The inner integral over x is done in closed form;
    the outer one, in t = sqrt(R), by composite Gauss-Legendre on pieces
    aligned with the history breakpoints, bisected until the embedded error
    estimate meets tol.

    Raises:
        QuadratureError: tolerance not reached (carries the achieved estimate)
    """
    if R_max is None:
        R_max = 40.0 * tauhat
    z_s, _ = history_eval(h, s)
    t_max = math.sqrt(R_max)
    lags = s - h.s[h.s < s]
    kinks = np.sqrt(lags[lags < R_max])
    anchors = np.unique(np.concatenate([[0.0, t_max], kinks]))
    pieces = np.maximum(1, np.ceil(np.diff(anchors) / max_piece).astype(int))
    edges = np.concatenate([np.linspace(anchors[i], anchors[i + 1], pieces[i], endpoint=False)
                            for i in range(len(pieces))] + [anchors[-1:]])

    def integrand(t):
        R = t ** 2
        z_past, slope_past = history_eval(h, s - R)
        delta = z_s - z_past
        beta = tauhat / (4.0 * np.maximum(R, 1e-300))
        kernel = _inner_kernel(delta, beta) + _inner_kernel(-delta, beta)
        out = np.exp(-R / tauhat) * slope_past * (1.0 + eval_heterogeneity(f2, z_past)) * kernel
        return np.where(R > 0, out, 0.0)

    def rule(a, b, nodes, weights):
        half = 0.5 * (b - a)
        t = a[:, None] + half[:, None] * (nodes[None, :] + 1.0)
        values = integrand(t.ravel()).reshape(t.shape)
        return half * np.sum(weights * values, axis=1)

    scale = 1.0 / math.sqrt(math.pi * tauhat)
    for _ in range(MAX_QUAD_REFINEMENTS):
        a, b = edges[:-1], edges[1:]
        fine = rule(a, b, _NODES_HI, _WEIGHTS_HI)
        err = np.abs(fine - rule(a, b, _NODES_LO, _WEIGHTS_LO)) * scale
        budget = tol * (b - a) / t_max
        bad = err > budget
        if not bad.any():
            break
        edges = np.sort(np.concatenate([edges, 0.5 * (a[bad] + b[bad])]))
    else:
        estimate = float(scale * fine.sum())
        raise QuadratureError(f"delay quadrature did not reach tol={tol:g}", estimate=estimate,
                              error=float(err.sum()))

    sup_slope = float(np.max(np.abs(h.slopes)))
    sup_weight = 1.0 + f2.bound()
    truncation = sup_slope * sup_weight * tauhat * math.exp(-R_max / tauhat) / math.sqrt(math.pi * tauhat * R_max)
    return DelayFunctionalEstimate(float(scale * fine.sum()), 0.0, "quadrature", int(edges.size - 1) * _NODES_HI.size,
                                   truncation)


def estimate_delay_functional(h: FrontHistory, s: float, cfg: DdeConfig, stream: Optional[int] = None,
                              samples: Optional[McSamples] = None) -> DelayFunctionalEstimate:
    if cfg.method == "mc":
        return delay_functional_mc(h, s, cfg, stream, samples)
    return delay_functional_quadrature(h, s, cfg.params.tauhat, cfg.f2, cfg.truncation_time, cfg.quad_tol)


def _error_term(h: FrontHistory, a: float, s: float, bg: BackgroundState, cfg: DdeConfig,
                stream: Optional[int] = None, samples: Optional[McSamples] = None):
    p = cfg.params
    trial = h.extended(a, s)
    est = estimate_delay_functional(trial, s, cfg, stream, samples)
    q_minus = float(bg.as_sign(Sign.MINUS).q_at(trial.z_last))
    e = SQRT2_3 * (h.last_slope + a) - p.alpha * (p.tauhat * est.value - q_minus) - p.gamma
    return e, est


def dde_error(h: FrontHistory, a: float, s: float, bg: BackgroundState, cfg: DdeConfig,
              stream: Optional[int] = None) -> float:
    """Residual of the jump condition for the trial extension of slope last_slope + a up to s."""
    return _error_term(h, a, s, bg, cfg, stream)[0]


def solve_for_increment(error, a_max: float) -> Tuple[float, int]:
    """Root of an increasing error(a) in [-a_max, a_max], widened once before giving up."""
    for bound in (a_max, BRACKET_EXPANSION * a_max):
        lo, hi = error(-bound), error(bound)
        if lo == 0.0:
            return -bound, 0
        if hi == 0.0:
            return bound, 0
        if lo * hi < 0:
            a_star, info = brentq(error, -bound, bound, xtol=1e-12, full_output=True)
            return a_star, info.iterations
        logger.debug("no sign change of e on [-%g, %g] (%.3g, %.3g)", bound, bound, lo, hi)
    raise RootBracketError(f"root bracket exhausted: e has no sign change on [-{BRACKET_EXPANSION * a_max:g}, "
                           f"{BRACKET_EXPANSION * a_max:g}]")


def solve_step_algo1(h: FrontHistory, cfg: DdeConfig, bg: BackgroundState) -> StepReport:
    """One step: the increment a* with e(s_N + h, a*) = 0, committed as a new segment."""
    stream = h.s.size
    s_new = h.s_last + cfg.h
    samples = mc_samples(cfg, stream) if cfg.method == "mc" else None
    cache = {}

    def error(a):
        e, est = _error_term(h, a, s_new, bg, cfg, stream, samples)
        cache[a] = est
        return e

    a_star, iterations = solve_for_increment(error, cfg.a_max)
    est = cache.get(a_star) or _error_term(h, a_star, s_new, bg, cfg, stream, samples)[1]
    return StepReport(h.extended(a_star, s_new), est.value, est.stderr, a_star, iterations)


def dde_step_algo1(h: FrontHistory, cfg: DdeConfig, bg: BackgroundState) -> FrontHistory:
    return solve_step_algo1(h, cfg, bg).history


def history_trajectory(h: FrontHistory, first: int, meta, diagnostics) -> Trajectory:
    """Committed breakpoints from index `first` on as a trajectory (s, z, slope)."""
    return Trajectory(h.s[first:], h.z[first:], h.slopes[first:], meta, tuple(diagnostics))


def dde_run_algo1(h0: FrontHistory, T: float, cfg: DdeConfig, bg: BackgroundState) -> Trajectory:
    """
    Iterate the explicit scheme for ceil(T / h) steps. A failing step ends the
    run; the trajectory up to it is returned with meta["failed"] set.
    """
    started = time.perf_counter()
    n_steps = int(math.ceil(T / cfg.h - 1e-9))
    first = h0.s.size - 1
    h = h0
    diagnostics: List[Tuple[float, float, float, float, int]] = []
    meta = {
        "algo": 1,
        "method": cfg.method,
        "seed": cfg.seed,
        "M": cfg.M,
        "h": cfg.h,
        "params": cfg.params.to_dict(),
        "formally_derived": cfg.params.formally_derived,
        "steps": n_steps,
    }
    logger.info("DDE algorithm 1: %d steps of h = %g (%s, M = %d, seed = %d)",
                n_steps, cfg.h, cfg.method, cfg.M, cfg.seed)
    for i in range(1, n_steps + 1):
        try:
            report = solve_step_algo1(h, cfg, bg)
        except HetfrontError as exc:
            logger.error("DDE step %d failed at s = %.4f: %s", i, h.s_last, exc)
            meta.update(failed=True, error=str(exc), steps=i - 1)
            break
        h = report.history
        diagnostics.append((h.s_last, report.W, report.stderr, report.a_star, report.iterations))
        if i % cfg.log_every == 0:
            logger.info("step %d/%d: s = %.3f, z = %.5f, z' = %.5f", i, n_steps, h.s_last, h.z_last, h.last_slope)
    meta["wall_time"] = time.perf_counter() - started
    return history_trajectory(h, first, meta, diagnostics)
