"""
Piecewise-linear front-position histories z(s) on (-inf, s_N].
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import HistoryError

CONTINUITY_RTOL = 1e-12


@dataclass(frozen=True)
class FrontHistory:
    """
    A front path made of a constant-speed tail for s <= tail_time followed by
    committed segments. Segment i covers (s[i-1], s[i]] with slope slopes[i];
    slopes[0] is the tail speed.
    """
    s: np.ndarray
    z: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        z = np.array(self.z, dtype=float)
        slopes = np.array(self.slopes, dtype=float)
        if s.ndim != 1 or s.size == 0 or not (s.shape == z.shape == slopes.shape):
            raise HistoryError("history arrays must be 1-D, nonempty and of equal length")
        if s.size > 1:
            ds = np.diff(s)
            if np.any(ds <= 0):
                raise HistoryError("breakpoint times must be strictly increasing")
            predicted = z[:-1] + slopes[1:] * ds
            scale = np.maximum(1.0, np.maximum(np.abs(z[1:]), np.abs(predicted)))
            if np.any(np.abs(predicted - z[1:]) > CONTINUITY_RTOL * scale):
                raise HistoryError("breakpoint positions are inconsistent with the segment slopes")
        for arr in (s, z, slopes):
            arr.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "slopes", slopes)

    @classmethod
    def constant_speed(cls, z0: float, speed: float, s0: float = 0.0) -> "FrontHistory":
        """Pure tail: z(s) = z0 + speed * (s - s0) for s <= s0."""
        return cls(np.array([s0]), np.array([z0]), np.array([speed]))

    @property
    def tail_time(self) -> float:
        return float(self.s[0])

    @property
    def tail_position(self) -> float:
        return float(self.z[0])

    @property
    def tail_speed(self) -> float:
        return float(self.slopes[0])

    @property
    def breakpoints(self) -> Tuple[Tuple[float, float, float], ...]:
        return tuple(zip(self.s.tolist(), self.z.tolist(), self.slopes.tolist()))

    @property
    def s_last(self) -> float:
        return float(self.s[-1])

    @property
    def z_last(self) -> float:
        return float(self.z[-1])

    @property
    def last_slope(self) -> float:
        return float(self.slopes[-1])

    def evaluate(self, s):
        """Vectorised history_eval."""
        return history_eval(self, s)

    def append(self, s_new: float, slope: float) -> "FrontHistory":
        """Commit a new segment (s_N, s_new] with the given slope."""
        if s_new <= self.s_last:
            raise HistoryError(f"new breakpoint {s_new} must follow {self.s_last}")
        z_new = self.z_last + slope * (s_new - self.s_last)
        return FrontHistory(np.append(self.s, s_new), np.append(self.z, z_new), np.append(self.slopes, slope))

    def extended(self, a: float, s: float) -> "FrontHistory":
        """History with the trial segment of slope last_slope + a up to s."""
        if s < self.s_last:
            raise HistoryError(f"extension time {s} precedes last breakpoint {self.s_last}")
        if s == self.s_last:
            return self
        return self.append(s, self.last_slope + a)


def history_eval(h: FrontHistory, s):
    """
    Position and slope of the history at time(s) s.

    Slopes use the left-limit convention: at s = s_i the slope of segment
    (s_{i-1}, s_i] is returned.
    """
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    if np.any(s > h.s[-1]):
        raise HistoryError(f"history is only defined up to s = {h.s_last}")
    idx = np.searchsorted(h.s, s, side="left")
    anchor = np.maximum(idx - 1, 0)
    slope = h.slopes[idx]
    # tail (idx == 0) is anchored at s[0]; segment idx is anchored at s[idx - 1]
    z = h.z[anchor] + slope * (s - h.s[anchor])
    if scalar:
        return float(z), float(slope)
    return z, slope


def history_extend(h: FrontHistory, a: float, s: float) -> Tuple[float, float]:
    """Evaluate the linear extension with slope (last slope + a) at s >= s_N."""
    if s < h.s_last:
        raise HistoryError(f"extension time {s} precedes last breakpoint {h.s_last}")
    slope = h.last_slope + a
    return h.z_last + slope * (s - h.s_last), slope
