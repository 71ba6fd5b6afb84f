"""
CSV and JSON artifacts: trajectories, profiles, field histories, DDE
diagnostics and run metadata.
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .model import Trajectory

logger = logging.getLogger(__name__)

FMT = "%.15g"
TRAJECTORY_HEADER = "s,z,dz_ds"
PROFILE_HEADER = "x,U,V"
FIELD_HEADER = "s,x,V"
DIAGNOSTICS_HEADER = "s,W,stderr,a_star,iterations"
VELOCITY_HEADER = "z,dz_ds"
BACKGROUND_HEADER = "x,f2,vbm_plus_1,qbm"


def _json_default(obj: Any):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, Enum):
        return obj.value
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def ensure_dir(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
    return path


def read_json(path: Path) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)


def _write_columns(path: Path, header: str, columns: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt=FMT, delimiter=",", header=header, comments="")
    return path


def write_trajectory(path: Path, traj: Trajectory, meta: Optional[Dict[str, Any]] = None) -> Path:
    """s,z,dz_ds CSV plus a JSON sidecar with the trajectory metadata."""
    path = _write_columns(path, TRAJECTORY_HEADER, [traj.s, traj.z, traj.dz_ds])
    sidecar = dict(traj.meta)
    sidecar.update(meta or {})
    write_json(path.with_suffix(".json"), sidecar)
    logger.debug("wrote %d samples to %s", len(traj), path)
    return path


def read_trajectory(path: Path) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"trajectory file not found: {path}")
    with open(path, "r") as f:
        header = f.readline().strip()
    if header != TRAJECTORY_HEADER:
        raise ConfigError(f"{path} is not a trajectory file (header {header!r})")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    sidecar = path.with_suffix(".json")
    meta = read_json(sidecar) if sidecar.exists() else {}
    return Trajectory(data[:, 0], data[:, 1], data[:, 2], meta)


def write_profile(path: Path, state) -> Path:
    """x,U,V CSV of one PDE state."""
    return _write_columns(path, PROFILE_HEADER, [state.x, state.U.values, state.V.values])


def write_field(path: Path, snapshots: Iterable) -> Path:
    """Long-format s,x,V CSV from a sequence of PDE states or fields."""
    rows_s, rows_x, rows_v = [], [], []
    for snap in snapshots:
        x = snap.V.x
        rows_s.append(np.full(x.size, snap.s))
        rows_x.append(x)
        rows_v.append(snap.V.values)
    if not rows_s:
        return _write_columns(path, FIELD_HEADER, [np.empty(0)] * 3)
    return _write_columns(path, FIELD_HEADER, [np.concatenate(rows_s), np.concatenate(rows_x),
                                               np.concatenate(rows_v)])


def write_diagnostics(path: Path, diagnostics: Sequence[Sequence[float]]) -> Path:
    """s,W,stderr,a_star,iterations CSV of the per-step DDE records."""
    arr = np.asarray(diagnostics, dtype=float).reshape(-1, 5)
    return _write_columns(path, DIAGNOSTICS_HEADER, [arr[:, i] for i in range(5)])


def write_velocity_curve(path: Path, z: np.ndarray, dz_ds: np.ndarray) -> Path:
    return _write_columns(path, VELOCITY_HEADER, [z, dz_ds])


def write_background(path: Path, x: np.ndarray, f2: np.ndarray, v_minus: np.ndarray, q_minus: np.ndarray) -> Path:
    """x,f2,vbm_plus_1,qbm CSV; v_b^- is shifted by +1 so it rests at 0 away from the heterogeneity."""
    return _write_columns(path, BACKGROUND_HEADER, [x, f2, np.asarray(v_minus) + 1.0, q_minus])
