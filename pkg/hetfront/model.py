"""
Shared domain types: model parameters, grid profiles and trajectories.
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the two-component front model."""
    alpha: float
    gamma: float
    tauhat: float = 1.0
    epsilon: float = 0.0  # 0 is the singular limit

    def __post_init__(self):
        for name in ("alpha", "gamma", "tauhat", "epsilon"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value}")
        if self.tauhat <= 0:
            raise ConfigError(f"tauhat must be positive, got {self.tauhat}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")

    @property
    def formally_derived(self) -> bool:
        """The front-position delay equation is only formally derived for alpha > 0."""
        return self.alpha > 0

    def with_epsilon(self, epsilon: float) -> "ModelParams":
        return ModelParams(self.alpha, self.gamma, self.tauhat, epsilon)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelParams":
        try:
            return cls(
                alpha=float(data["alpha"]),
                gamma=float(data["gamma"]),
                tauhat=float(data.get("tauhat", 1.0)),
                epsilon=float(data.get("epsilon", 0.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"model block is missing {exc}") from exc


def make_grid(x_min: float, x_max: float, dx: float) -> np.ndarray:
    """Uniform grid from x_min to (approximately) x_max with spacing dx."""
    if dx <= 0:
        raise ConfigError(f"dx must be positive, got {dx}")
    if x_max <= x_min:
        raise ConfigError(f"empty domain [{x_min}, {x_max}]")
    n = int(round((x_max - x_min) / dx)) + 1
    return x_min + dx * np.arange(n)


@dataclass(frozen=True)
class GridProfile:
    """Samples of a scalar function on a uniform grid x_min + i*dx."""
    x_min: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ConfigError("GridProfile needs a nonempty 1-D array of values")
        if self.dx <= 0:
            raise ConfigError(f"dx must be positive, got {self.dx}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_samples(cls, x: np.ndarray, values: np.ndarray) -> "GridProfile":
        """Build from an explicit uniform grid."""
        x = np.asarray(x, dtype=float)
        if x.size < 2:
            return cls(float(x[0]), 1.0, values)
        dx = float(x[1] - x[0])
        if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=1e-12):
            raise ConfigError("grid is not uniform")
        return cls(float(x[0]), dx, values)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.n - 1)

    def at(self, x):
        """Linear interpolation; constant extension beyond the grid ends."""
        return np.interp(x, self.x, self.values)

    def with_values(self, values: np.ndarray) -> "GridProfile":
        return GridProfile(self.x_min, self.dx, values)

    def same_grid(self, other: "GridProfile") -> bool:
        return (self.n == other.n and math.isclose(self.x_min, other.x_min, abs_tol=1e-12)
                and math.isclose(self.dx, other.dx, rel_tol=1e-12))


@dataclass(frozen=True)
class Trajectory:
    """Time series of front positions and speeds with provenance metadata."""
    s: np.ndarray
    z: np.ndarray
    dz_ds: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)
    diagnostics: Tuple[Any, ...] = ()

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        z = np.array(self.z, dtype=float)
        dz = np.array(self.dz_ds, dtype=float)
        if not (s.shape == z.shape == dz.shape) or s.ndim != 1:
            raise ConfigError("trajectory columns must be 1-D arrays of equal length")
        if s.size > 1 and np.any(np.diff(s) <= 0):
            raise ConfigError("trajectory times must be strictly increasing")
        for arr in (s, z, dz):
            arr.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "dz_ds", dz)

    def __len__(self) -> int:
        return self.s.size

    @property
    def samples(self) -> Iterator[Tuple[float, float, float]]:
        return zip(self.s.tolist(), self.z.tolist(), self.dz_ds.tolist())

    @property
    def failed(self) -> bool:
        return bool(self.meta.get("failed", False))

    def with_velocity(self, dz_ds: np.ndarray) -> "Trajectory":
        return Trajectory(self.s, self.z, dz_ds, dict(self.meta), self.diagnostics)

    def shifted(self, ds: float) -> "Trajectory":
        """Same path translated in time by ds; diagnostic rows move with it."""
        diagnostics = tuple((row[0] + ds, *row[1:]) for row in self.diagnostics)
        return Trajectory(self.s + ds, self.z, self.dz_ds, dict(self.meta), diagnostics)

    def window(self, s_lo: Optional[float] = None, s_hi: Optional[float] = None) -> "Trajectory":
        """Samples and diagnostic rows (keyed by their leading s) with s_lo <= s <= s_hi."""
        lo = -np.inf if s_lo is None else s_lo
        hi = np.inf if s_hi is None else s_hi
        mask = (self.s >= lo) & (self.s <= hi)
        diagnostics = tuple(row for row in self.diagnostics if lo <= row[0] <= hi)
        return Trajectory(self.s[mask], self.z[mask], self.dz_ds[mask], dict(self.meta), diagnostics)
