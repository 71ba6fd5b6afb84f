"""Tests for the method-of-lines PDE solver and its helpers."""

import math

import numpy as np
import pytest

from hetfront.errors import ConfigError, DomainExhaustedError, FrontNotFoundError
from hetfront.heterogeneity import build_example_heterogeneity
from hetfront.model import GridProfile, ModelParams, Trajectory, make_grid
from hetfront.pde import (
    PdeConfig,
    PdeState,
    backgrounds,
    bracket_stationary_front,
    estimate_velocity,
    extract_front_position,
    front_diagnostics,
    make_ic_relax_shift,
    run_pde,
    tanh_seed,
)


@pytest.fixture
def nagumo_cfg():
    """alpha = 0 decouples U from V; the front moves at about 3 gamma / sqrt(2)."""
    return PdeConfig(ModelParams(alpha=0.0, gamma=0.2, epsilon=0.2), domain=(-6.0, 6.0), time=(0.0, 2.0))


class TestPdeConfig:
    def test_default_dx(self):
        cfg = PdeConfig(ModelParams(alpha=0.5, gamma=0.2, epsilon=0.1))
        assert cfg.dx == pytest.approx(0.0125)
        assert cfg.grid[1] - cfg.grid[0] == pytest.approx(0.0125)

    @pytest.mark.parametrize("kwargs", [
        {"dx": 0.05},
        {"boundary": "periodic"},
        {"method": "RK45"},
        {"domain": (1.0, -1.0)},
        {"record_every": 0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            PdeConfig(ModelParams(alpha=0.5, gamma=0.2, epsilon=0.1), **kwargs)

    def test_needs_positive_eps(self):
        with pytest.raises(ConfigError):
            PdeConfig(ModelParams(alpha=0.5, gamma=0.2))


def test_extract_front_position():
    x = make_grid(-1.0, 1.0, 0.1)
    assert extract_front_position(GridProfile.from_samples(x, x - 0.33)) == pytest.approx(0.33)


@pytest.mark.parametrize("values", [
    lambda x: np.cos(4 * x),
    lambda x: -x,
    lambda x: np.ones_like(x),
])
def test_no_well_defined_front(values):
    x = make_grid(-2.0, 2.0, 0.1)
    with pytest.raises(FrontNotFoundError):
        extract_front_position(GridProfile.from_samples(x, values(x)))


def test_estimate_velocity_exact_for_quadratic():
    s = np.linspace(0.0, 2.0, 41)
    traj = estimate_velocity(Trajectory(s, s ** 2, np.zeros_like(s)), window=1)
    np.testing.assert_allclose(traj.dz_ds, 2 * s, atol=1e-10)


def test_estimate_velocity_smooths_linear():
    s = np.linspace(0.0, 1.0, 11)
    traj = estimate_velocity(Trajectory(s, 3 * s + 1, np.zeros_like(s)))
    np.testing.assert_allclose(traj.dz_ds, 3.0, atol=1e-12)
    with pytest.raises(ConfigError):
        estimate_velocity(traj, window=4)


def test_tanh_seed_diagnostics():
    cfg = PdeConfig(ModelParams(alpha=0.5, gamma=0.2, epsilon=0.5), domain=(-10.0, 10.0))
    state = tanh_seed(cfg, 1.0)
    minus, plus = backgrounds(cfg)
    diag = front_diagnostics(state, minus, plus)
    assert diag.is_front
    assert diag.within_backgrounds
    assert diag.position == pytest.approx(1.0, abs=1e-3)
    expected_width = 2.0 * math.sqrt(2.0) * 0.5 * math.atanh(0.9)
    assert diag.interface_width == pytest.approx(expected_width, abs=1e-2)
    assert diag.tail_residual < 1e-4


def test_diagnostics_flag_double_crossing():
    cfg = PdeConfig(ModelParams(alpha=0.5, gamma=0.2, epsilon=0.5), domain=(-10.0, 10.0))
    x = cfg.grid
    state = PdeState.from_arrays(x, np.cos(x), np.zeros_like(x))
    minus, plus = backgrounds(cfg)
    diag = front_diagnostics(state, minus, plus)
    assert not diag.is_front
    assert diag.notes


def test_nagumo_speed(nagumo_cfg):
    run = run_pde(nagumo_cfg, tanh_seed(nagumo_cfg, -2.0))
    traj = run.trajectory
    assert traj.meta["solver"] == "BDF"
    assert traj.meta["steps"] > 0
    late = traj.window(1.0, 2.0)
    speed = (late.z[-1] - late.z[0]) / (late.s[-1] - late.s[0])
    assert speed == pytest.approx(3 * 0.2 / math.sqrt(2.0), rel=0.1)
    assert run.final.s == pytest.approx(2.0)


def test_symmetric_front_stays(nagumo_cfg):
    cfg = PdeConfig(ModelParams(alpha=0.0, gamma=0.0, epsilon=0.2), domain=(-6.0, 6.0), time=(0.0, 1.0))
    run = run_pde(cfg, tanh_seed(cfg, 0.0))
    assert np.max(np.abs(run.trajectory.z)) < 1e-3


def test_domain_exhausted(nagumo_cfg):
    cfg = PdeConfig(nagumo_cfg.params, domain=(-3.0, 3.0), time=(0.0, 10.0))
    with pytest.raises(DomainExhaustedError) as info:
        run_pde(cfg, tanh_seed(cfg, 1.0))
    partial = info.value.partial
    assert partial.failed
    assert partial.z[-1] > 1.5


def test_second_front_nucleates(nagumo_cfg):
    # U slightly above zero on 2 < x < 4 is pushed negative by the -eps*gamma term
    ic = tanh_seed(nagumo_cfg, -2.0)
    x = nagumo_cfg.grid
    U = np.where((x > 2.0) & (x < 4.0), 0.02, ic.U.values)
    with pytest.raises(FrontNotFoundError) as info:
        run_pde(nagumo_cfg, PdeState.from_arrays(x, U, ic.V.values))
    partial = info.value.partial
    assert partial.failed
    assert len(partial) >= 1
    assert partial.s[-1] < 2.0
    assert "sign changes" in partial.meta["error"]


def test_non_increasing_interface(nagumo_cfg):
    x = nagumo_cfg.grid
    U = np.interp(x, [-6.0, -2.0, -1.5, -1.2, -0.5, 6.0], [-1.0, 0.0, 0.5, 0.3, 1.0, 1.0])
    ic = tanh_seed(nagumo_cfg, -2.0)
    with pytest.raises(FrontNotFoundError, match="not increasing") as info:
        run_pde(nagumo_cfg, PdeState.from_arrays(x, U, ic.V.values))
    assert info.value.partial.s[0] == 0.0


def test_snapshots_and_record_thinning(nagumo_cfg):
    from dataclasses import replace
    cfg = replace(nagumo_cfg, time=(0.0, 1.0), snapshot_every=0.25, record_every=3)
    run = run_pde(cfg, tanh_seed(cfg, -2.0))
    assert [round(s.s, 10) for s in run.snapshots] == [0.0, 0.25, 0.5, 0.75, 1.0]
    dense = run_pde(replace(cfg, record_every=1), tanh_seed(cfg, -2.0))
    assert len(run.trajectory) < len(dense.trajectory)


def test_ic_off_grid(nagumo_cfg):
    x = make_grid(-5.0, 5.0, 0.025)
    with pytest.raises(ConfigError):
        run_pde(nagumo_cfg, PdeState.from_arrays(x, np.tanh(x), np.zeros_like(x)))


def test_initial_boundary_policy(nagumo_cfg):
    from dataclasses import replace
    cfg = replace(nagumo_cfg, boundary="initial", time=(0.0, 0.5))
    ic = tanh_seed(cfg, 0.0)
    run = run_pde(cfg, ic)
    assert run.final.U.values[0] == ic.U.values[0]
    assert run.final.V.values[-1] == ic.V.values[-1]


@pytest.mark.slow
def test_relax_shift_places_front():
    cfg = PdeConfig(ModelParams(alpha=0.5, gamma=0.2, epsilon=0.1), domain=(-10.0, 10.0), time=(0.0, 1.0))
    ic = make_ic_relax_shift(cfg, -2.5)
    assert extract_front_position(ic.U) == pytest.approx(-2.5, abs=1e-6)


@pytest.mark.slow
def test_example1_stationary_bracket():
    _, f2 = build_example_heterogeneity("ex1")
    cfg = PdeConfig(ModelParams(alpha=-2.0, gamma=-0.2, epsilon=0.1), f2=f2, domain=(-10.0, 10.0))
    lo, hi = bracket_stationary_front(cfg, (0.2, 0.6), width=0.01)
    assert hi - lo <= 0.01
    assert lo <= 0.38452 and hi >= 0.37714
