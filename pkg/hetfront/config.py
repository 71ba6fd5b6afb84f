"""
Configuration management for hetfront.
Defines model parameters, numerical settings and acceptance thresholds for
the named experiments.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .dde import DdeConfig
from .errors import ConfigError
from .heterogeneity import EXAMPLE_IDS, HeterogeneitySpec, ZERO, build_example_heterogeneity
from .model import ModelParams
from .pde import DEFAULT_T_SEQ, PdeConfig

ENV_OUTPUT_DIR = "HETFRONT_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(ENV_OUTPUT_DIR, "runs"))


# Model parameters of the named experiments
EXAMPLE_MODELS = {
    "fig1": ModelParams(alpha=0.94, gamma=0.0, tauhat=1.0),
    "ex0": ModelParams(alpha=0.5, gamma=0.2, tauhat=1.0),
    "ex1": ModelParams(alpha=-2.0, gamma=-0.2, tauhat=1.0),
    "ex2": ModelParams(alpha=2.5, gamma=0.2, tauhat=1.0),
    "ex3": ModelParams(alpha=2.5, gamma=0.2, tauhat=1.0),
}


@dataclass
class PdeSettings:
    """Grid, tolerance and output settings for PDE runs."""
    domain: Tuple[float, float] = (-20.0, 20.0)
    dx: Optional[float] = None  # eps / 8 when unset
    T: float = 10.0
    rtol: float = 1e-6
    atol: float = 1e-8
    method: str = "BDF"
    boundary: str = "singular"
    snapshot_every: Optional[float] = None
    record_every: int = 1
    frozen_boundary: bool = False
    relax_seq: Tuple[float, ...] = DEFAULT_T_SEQ
    bracket_eps: Tuple[float, ...] = ()  # eps values for the stationary-front bisection
    bracket_halfwidth: float = 0.1
    bracket_width: float = 0.005


@dataclass
class DdeSettings:
    """Step, sampling and co-simulation settings for the delay equation."""
    steps_per_unit: int = 40
    M: int = 100_000
    a_max: float = 5.0
    method: str = "mc"
    r_max: Optional[float] = None
    T: float = 20.0
    repeats: int = 1  # independent seeds per start
    algo2_domain: Tuple[float, float] = (-30.0, 30.0)
    algo2_dx: float = 0.02
    algo2_substeps: int = 4
    warmup: Optional[float] = None
    background_domain: Tuple[float, float] = (-40.0, 40.0)
    background_dx: float = 0.01

    @property
    def h(self) -> float:
        return 1.0 / self.steps_per_unit


@dataclass
class AcceptanceThresholds:
    """Thresholds behind the report pass flags."""
    dde_pde_sup: float = 0.3
    algo_agreement: float = 0.05
    stable_front_tol: float = 0.05
    speed_tol: float = 0.02
    dde_speed_tol: float = 0.1
    trap_bound: float = 11.0
    reversal_position: float = 10.0
    reversal_tol: float = 0.5
    min_reversals: int = 2
    reversal_speed: float = 0.05  # |z'| needed to count as travelling


def _tuple(value):
    return tuple(value) if value is not None else None


@dataclass
class Config:
    """Main configuration for hetfront."""
    model: ModelParams = field(default_factory=lambda: EXAMPLE_MODELS["ex0"])
    f1: HeterogeneitySpec = ZERO
    f2: HeterogeneitySpec = ZERO
    example: Optional[str] = None
    eps_list: Tuple[float, ...] = (0.1,)
    pde: PdeSettings = field(default_factory=PdeSettings)
    dde: DdeSettings = field(default_factory=DdeSettings)
    thresholds: AcceptanceThresholds = field(default_factory=AcceptanceThresholds)
    seed: int = 0
    workers: int = 1
    output_dir: Path = field(default_factory=default_output_dir)

    def __post_init__(self):
        if self.example is not None and self.example not in EXAMPLE_IDS:
            raise ConfigError(f"unknown example id {self.example!r}")
        if any(eps <= 0 for eps in (*self.eps_list, *self.pde.bracket_eps)):
            raise ConfigError("eps_list and bracket_eps entries must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.output_dir = Path(self.output_dir)

    def pde_config(self, eps: float, T: Optional[float] = None, **overrides) -> PdeConfig:
        s = self.pde
        cfg = PdeConfig(
            params=self.model.with_epsilon(eps),
            f1=self.f1,
            f2=self.f2,
            domain=s.domain,
            dx=s.dx if s.dx is not None else eps / 8.0,
            time=(0.0, s.T if T is None else T),
            rtol=s.rtol,
            atol=s.atol,
            method=s.method,
            boundary=s.boundary,
            snapshot_every=s.snapshot_every,
            record_every=s.record_every,
            frozen_boundary=s.frozen_boundary,
        )
        return replace(cfg, **overrides) if overrides else cfg

    def dde_config(self, algo: int = 1, seed: Optional[int] = None) -> DdeConfig:
        d = self.dde
        return DdeConfig(
            params=self.model.with_epsilon(0.0),
            f2=self.f2,
            h=d.h,
            M=d.M,
            seed=self.seed if seed is None else seed,
            a_max=d.a_max,
            algo=algo,
            method=d.method,
            r_max=d.r_max,
            algo2_domain=d.algo2_domain,
            algo2_dx=d.algo2_dx,
            algo2_substeps=d.algo2_substeps,
            warmup=d.warmup,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "f1": self.f1.to_dict(),
            "f2": self.f2.to_dict(),
            "example": self.example,
            "eps_list": list(self.eps_list),
            "pde": asdict(self.pde),
            "dde": asdict(self.dde),
            "thresholds": asdict(self.thresholds),
            "seed": self.seed,
            "workers": self.workers,
            "output_dir": str(self.output_dir),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        pde = dict(data.get("pde", {}))
        for key in ("domain", "relax_seq", "bracket_eps"):
            if key in pde:
                pde[key] = _tuple(pde[key])
        dde = dict(data.get("dde", {}))
        for key in ("algo2_domain", "background_domain"):
            if key in dde:
                dde[key] = _tuple(dde[key])
        try:
            return cls(
                model=ModelParams.from_dict(data["model"]) if "model" in data else EXAMPLE_MODELS["ex0"],
                f1=HeterogeneitySpec.from_dict(data.get("f1", {})),
                f2=HeterogeneitySpec.from_dict(data.get("f2", {})),
                example=data.get("example"),
                eps_list=tuple(float(e) for e in data.get("eps_list", (0.1,))),
                pde=PdeSettings(**pde),
                dde=DdeSettings(**dde),
                thresholds=AcceptanceThresholds(**data.get("thresholds", {})),
                seed=int(data.get("seed", 0)),
                workers=int(data.get("workers", 1)),
                output_dir=Path(data.get("output_dir", default_output_dir())),
            )
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def save(self, path: Path):
        """Save configuration to JSON file."""
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path: Path) -> "Config":
        """Load configuration from JSON file."""
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def default(cls) -> "Config":
        """Example 0 settings."""
        return cls.for_example("ex0")

    @classmethod
    def for_example(cls, example_id: str) -> "Config":
        """Parameters, heterogeneities and run lengths of a named experiment."""
        f1, f2 = build_example_heterogeneity(example_id)
        model = EXAMPLE_MODELS[example_id]
        if example_id == "fig1":
            return cls(model=model, f1=f1, f2=f2, example=example_id, eps_list=(0.15,),
                       pde=PdeSettings(domain=(0.0, 300.0), T=60.0, snapshot_every=1.0, frozen_boundary=True))
        if example_id == "ex0":
            return cls(model=model, f1=f1, f2=f2, example=example_id, eps_list=(0.1, 0.05),
                       pde=PdeSettings(domain=(-20.0, 35.0), T=20.0),
                       dde=DdeSettings(T=20.0, algo2_domain=(-25.0, 35.0)))
        if example_id == "ex1":
            return cls(model=model, f1=f1, f2=f2, example=example_id, eps_list=(0.1,),
                       pde=PdeSettings(domain=(-20.0, 20.0), T=40.0, bracket_eps=(0.1, 0.05)),
                       dde=DdeSettings(T=40.0, algo2_domain=(-20.0, 20.0)))
        if example_id == "ex2":
            return cls(model=model, f1=f1, f2=f2, example=example_id, eps_list=(0.1,),
                       pde=PdeSettings(domain=(-60.0, 60.0), T=12.0, boundary="initial"),
                       dde=DdeSettings(T=20.0, repeats=4))
        return cls(model=model, f1=f1, f2=f2, example=example_id, eps_list=(0.1,),
                   pde=PdeSettings(domain=(-30.0, 30.0), T=80.0),
                   dde=DdeSettings(T=80.0, M=150_000, algo2_domain=(-30.0, 30.0)))
