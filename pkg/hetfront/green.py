"""
The solution operator G(phi)(x) = integral of 1/2 exp(-|x - xi|) phi(xi) dxi,
i.e. the bounded solution of v'' - v = -phi.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import QuadratureError
from .heterogeneity import HeterogeneitySpec, eval_heterogeneity
from .model import GridProfile

logger = logging.getLogger(__name__)

MAX_CELL = 0.05
MAX_REFINEMENTS = 12
# padding used when the source has no declared asymptotic constants
TAIL_PAD = 30.0

_NODES_HI, _WEIGHTS_HI = leggauss(12)
_NODES_LO, _WEIGHTS_LO = leggauss(6)


@dataclass(frozen=True)
class Source:
    """
    A bounded right-hand side phi. Outside `support` phi equals `left`
    (for x below) and `right` (for x above). Without declared constants the
    quadrature window is padded and the truncation error is estimated.
    """
    func: Callable[[np.ndarray], np.ndarray]
    left: Optional[float] = None
    right: Optional[float] = None
    support: Optional[Tuple[float, float]] = None
    breakpoints: Tuple[float, ...] = ()

    @property
    def has_asymptotics(self) -> bool:
        return self.left is not None and self.right is not None

    @classmethod
    def from_heterogeneity(cls, spec: HeterogeneitySpec, scale: float = 1.0) -> "Source":
        """phi = scale * (1 + f)."""
        asym = spec.asymptotic

        def func(x):
            return scale * (1.0 + eval_heterogeneity(spec, x))

        if asym is None:
            return cls(func, breakpoints=spec.breakpoints)
        return cls(func, scale * (1.0 + asym[0]), scale * (1.0 + asym[1]),
                   spec.effective_support(), spec.breakpoints)

    @classmethod
    def from_profile(cls, profile: GridProfile) -> "Source":
        """Piecewise-linear source through the samples, flat beyond the grid."""
        x, values = profile.x, profile.values

        def func(t):
            return np.interp(t, x, values)

        return cls(func, float(values[0]), float(values[-1]), (profile.x_min, profile.x_max), tuple(x))

    @classmethod
    def constant(cls, value: float) -> "Source":
        return cls(lambda t: np.full_like(np.asarray(t, dtype=float), value), value, value)


PhiLike = Union[Source, GridProfile, HeterogeneitySpec, Callable[[np.ndarray], np.ndarray]]


def as_source(phi: PhiLike) -> Source:
    if isinstance(phi, Source):
        return phi
    if isinstance(phi, GridProfile):
        return Source.from_profile(phi)
    if isinstance(phi, HeterogeneitySpec):
        return Source.from_heterogeneity(phi)
    if callable(phi):
        return Source(phi)
    raise TypeError(f"cannot use {type(phi).__name__} as a source")


def _cell_integrals(func, edges):
    """Exponentially weighted integrals over each cell, with an error estimate."""
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)

    def weighted(nodes, weights):
        t = a[:, None] + half[:, None] * (nodes[None, :] + 1.0)
        phi = np.asarray(func(t.ravel()), dtype=float).reshape(t.shape)
        left = half * np.sum(weights * np.exp(t - b[:, None]) * phi, axis=1)
        right = half * np.sum(weights * np.exp(a[:, None] - t) * phi, axis=1)
        return left, right, phi

    left, right, phi = weighted(_NODES_HI, _WEIGHTS_HI)
    left_lo, right_lo, _ = weighted(_NODES_LO, _WEIGHTS_LO)
    err = np.maximum(np.abs(left - left_lo), np.abs(right - right_lo))
    return left, right, err, float(np.max(np.abs(phi))) if phi.size else 0.0


def green_transform(phi: PhiLike, x, tol: float = 1e-10, max_cell: float = MAX_CELL):
    """
    G(phi) and its derivative at the points x (any order).

    The two exponential integrals are accumulated cell by cell from both ends
    of the window; contributions beyond the window come from the asymptotic
    constants in closed form.

    Returns:
        (G, dG) arrays shaped like x
    """
    source = as_source(phi)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.argsort(x)
    xs = x[order]

    lo, hi = float(xs[0]), float(xs[-1])
    if source.support is not None:
        lo, hi = min(lo, source.support[0]), max(hi, source.support[1])
    if not source.has_asymptotics:
        lo, hi = lo - TAIL_PAD, hi + TAIL_PAD

    interior = [b for b in source.breakpoints if lo < b < hi]
    anchors = np.unique(np.concatenate([xs, interior, [lo, hi]]))
    pieces = np.maximum(1, np.ceil(np.diff(anchors) / max_cell).astype(int))
    edges = np.concatenate([np.linspace(anchors[i], anchors[i + 1], pieces[i], endpoint=False)
                            for i in range(len(pieces))] + [anchors[-1:]])

    cell_tol = tol * max_cell / max(hi - lo, max_cell)
    for _ in range(MAX_REFINEMENTS):
        left_int, right_int, err, sup_phi = _cell_integrals(source.func, edges)
        bad = err > cell_tol * np.maximum(1.0, np.diff(edges) / max_cell)
        if not bad.any():
            break
        mids = 0.5 * (edges[:-1][bad] + edges[1:][bad])
        edges = np.sort(np.concatenate([edges, mids]))
    else:
        raise QuadratureError(f"G quadrature did not reach tol={tol:g}", error=float(err.sum()))

    if source.has_asymptotics:
        left_const, right_const = source.left, source.right
    else:
        ends = np.asarray(source.func(np.array([lo, hi])), dtype=float)
        left_const, right_const = float(ends[0]), float(ends[1])
        margin = min(xs[0] - lo, hi - xs[-1])
        truncation = max(sup_phi, abs(left_const), abs(right_const)) * math.exp(-margin)
        if truncation > tol:
            raise QuadratureError(
                f"source has no asymptotic constants and the window is too small "
                f"(truncation estimate {truncation:.2e} > {tol:g})", error=truncation)

    decay = np.exp(-np.diff(edges))
    n = edges.size
    from_left = np.empty(n)
    from_right = np.empty(n)
    from_left[0] = left_const
    for k in range(n - 1):
        from_left[k + 1] = decay[k] * from_left[k] + left_int[k]
    from_right[-1] = right_const
    for k in range(n - 2, -1, -1):
        from_right[k] = decay[k] * from_right[k + 1] + right_int[k]

    idx = np.searchsorted(edges, xs)
    g_sorted = 0.5 * (from_left[idx] + from_right[idx])
    dg_sorted = 0.5 * (from_right[idx] - from_left[idx])

    g = np.empty_like(g_sorted)
    dg = np.empty_like(dg_sorted)
    g[order] = g_sorted
    dg[order] = dg_sorted
    return g, dg


def green_apply(phi: PhiLike, x_grid, tol: float = 1e-10) -> GridProfile:
    """G(phi) sampled on a uniform grid."""
    x_grid = np.asarray(x_grid, dtype=float)
    g, _ = green_transform(phi, x_grid, tol=tol)
    return GridProfile.from_samples(x_grid, g)
