"""Shared fixtures for hetfront tests."""

import numpy as np
import pytest

from hetfront.background import FrontStability, Sign, background_state, riccati_slopes, stationary_front_positions
from hetfront.heterogeneity import ZERO, build_example_heterogeneity
from hetfront.model import ModelParams, Trajectory, make_grid


@pytest.fixture
def ex0_params():
    return ModelParams(alpha=0.5, gamma=0.2, tauhat=1.0)


@pytest.fixture
def ex2_params():
    return ModelParams(alpha=2.5, gamma=0.2, tauhat=1.0)


@pytest.fixture
def ex0_f2():
    return build_example_heterogeneity("ex0")[1]


@pytest.fixture
def ex1_f2():
    return build_example_heterogeneity("ex1")[1]


@pytest.fixture
def flat_background():
    """v_b^+ for f1 = f2 = 0, identically 1 with q_b^+ = 0."""
    return background_state(ZERO, ZERO, Sign.PLUS, make_grid(-20.0, 20.0, 0.05))


@pytest.fixture
def ramp():
    """Monotone trajectory z = s on [0, 10]."""
    s = np.linspace(0.0, 10.0, 101)
    return Trajectory(s, s.copy(), np.ones_like(s))


@pytest.fixture
def tmp_out(tmp_path, monkeypatch):
    monkeypatch.setenv("HETFRONT_OUTPUT_DIR", str(tmp_path / "runs"))
    return tmp_path


@pytest.fixture(scope="session")
def ex1_stationary():
    """Example 1 parameters, its background and the (unstable, stable) stationary fronts."""
    f2 = build_example_heterogeneity("ex1")[1]
    p = ModelParams(alpha=-2.0, gamma=-0.2, tauhat=1.0)
    bg = background_state(ZERO, f2, Sign.PLUS, make_grid(-20.0, 20.0, 0.02))
    fronts = stationary_front_positions(p, bg, riccati_slopes(ZERO, bg.v.x))
    unstable = min((f.position for f in fronts.positions if f.classification is FrontStability.UNSTABLE),
                   key=lambda z: abs(z - 0.38))
    stable = min((f.position for f in fronts.positions if f.classification is FrontStability.STABLE),
                 key=lambda z: abs(z - 0.90))
    return p, f2, bg, unstable, stable
