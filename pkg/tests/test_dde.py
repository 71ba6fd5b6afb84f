"""Tests for the delay functional estimators and the explicit DDE scheme."""

import numpy as np
import pytest
from scipy import stats
from scipy.special import erfc

from hetfront.constant_coeff import SQRT2_3, speed_roots, vstar
from hetfront.dde import (
    DdeConfig,
    McSamples,
    dde_error,
    dde_run_algo1,
    dde_step_algo1,
    delay_functional_mc,
    delay_functional_quadrature,
    mc_samples,
    sample_levy,
    solve_for_increment,
)
from hetfront.errors import ConfigError, RootBracketError, SolverError
from hetfront.heterogeneity import constant_heterogeneity
from hetfront.history import FrontHistory
from hetfront.model import ModelParams


def linear_history(c):
    return FrontHistory.constant_speed(0.0, c)


class TestLevy:
    def test_zero_scale(self):
        rng = np.random.default_rng(1)
        assert sample_levy(0.0, rng) == 0.0
        np.testing.assert_array_equal(sample_levy(0.0, rng, 4), np.zeros(4))

    def test_scale_family(self):
        a = sample_levy(2.5, np.random.default_rng(7), 1000)
        b = sample_levy(1.0, np.random.default_rng(7), 1000)
        np.testing.assert_allclose(a, 2.5 * b, rtol=1e-14)

    def test_distribution(self):
        c = 0.7
        r = sample_levy(c, np.random.default_rng(3), 100_000)
        result = stats.kstest(r, lambda t: erfc(np.sqrt(c / (2.0 * t))))
        assert result.pvalue > 0.01

    def test_negative_scale(self):
        with pytest.raises(ConfigError):
            sample_levy(-1.0, np.random.default_rng(0))


def test_mc_samples_are_seeded():
    cfg = DdeConfig(ModelParams(alpha=0.5, gamma=0.2), M=100, seed=5)
    a, b = mc_samples(cfg, 3), mc_samples(cfg, 3)
    np.testing.assert_array_equal(a.R, b.R)
    assert not np.array_equal(a.R, mc_samples(cfg, 4).R)
    assert np.all(a.X > 0) and np.all(a.R >= 0)


@pytest.mark.parametrize("c", [*np.linspace(-1.0, 1.0, 9), -0.3, 0.83])
def test_quadrature_steady_state(c):
    est = delay_functional_quadrature(linear_history(c), 0.0, 1.0)
    assert est.value == pytest.approx(vstar(c), abs=1e-6)
    assert est.truncation < 1e-12
    assert est.method == "quadrature"


@pytest.mark.parametrize("tauhat", [0.5, 2.0])
def test_quadrature_steady_state_tauhat(tauhat):
    c = 0.6
    est = delay_functional_quadrature(linear_history(c), 0.0, tauhat)
    assert tauhat * est.value == pytest.approx(vstar(c, tauhat), abs=1e-6)


@pytest.mark.parametrize("c", [-0.3, 0.5, 0.83])
def test_mc_matches_quadrature(c):
    cfg = DdeConfig(ModelParams(alpha=0.5, gamma=0.2), M=100_000, seed=11)
    mc = delay_functional_mc(linear_history(c), 0.0, cfg)
    assert mc.stderr < 2e-3
    assert abs(mc.value - vstar(c)) <= 3 * mc.stderr


def test_mc_two_segment_history(ex1_f2):
    h = FrontHistory.constant_speed(-1.0, 0.4).append(0.5, -0.2).append(1.0, 0.3)
    cfg = DdeConfig(ModelParams(alpha=-2.0, gamma=-0.2), f2=ex1_f2, M=100_000, seed=2)
    mc = delay_functional_mc(h, 1.0, cfg)
    quad = delay_functional_quadrature(h, 1.0, 1.0, ex1_f2)
    assert abs(mc.value - quad.value) <= 3 * mc.stderr


def test_static_history_gives_zero():
    h = linear_history(0.0)
    cfg = DdeConfig(ModelParams(alpha=0.5, gamma=0.2), M=1000)
    assert delay_functional_mc(h, 0.0, cfg).value == 0.0
    assert delay_functional_quadrature(h, 0.0, 1.0).value == 0.0


def test_vanishing_weight_gives_zero():
    cfg = DdeConfig(ModelParams(alpha=0.5, gamma=0.2), f2=constant_heterogeneity(-1.0), M=1000)
    assert delay_functional_mc(linear_history(0.5), 0.0, cfg).value == 0.0


@pytest.mark.slow
def test_mc_is_unbiased_across_seeds(ex1_f2):
    h = FrontHistory.constant_speed(-1.0, 0.4).append(0.5, -0.2).append(1.0, 0.3)
    quad = delay_functional_quadrature(h, 1.0, 1.0, ex1_f2).value
    hits = 0
    for seed in range(100):
        cfg = DdeConfig(ModelParams(alpha=-2.0, gamma=-0.2), f2=ex1_f2, M=20_000, seed=seed)
        mc = delay_functional_mc(h, 1.0, cfg)
        hits += abs(mc.value - quad) <= 3 * mc.stderr
    assert hits >= 95


def test_degenerate_samples_contribute_zero():
    cfg = DdeConfig(ModelParams(alpha=0.5, gamma=0.2), M=4)
    samples = McSamples(np.array([0.0, 1.0, 0.5, 2.0]), np.array([0.0, np.inf, 0.3, 1.2]))
    est = delay_functional_mc(linear_history(0.5), 0.0, cfg, samples=samples)
    kept = delay_functional_mc(linear_history(0.5), 0.0, cfg, samples=McSamples(samples.X[2:], samples.R[2:]))
    assert est.dropped == 2
    assert est.samples == 4
    assert est.value == pytest.approx(kept.value / 2)
    assert kept.dropped == 0


def test_overflowing_integrand_raises():
    cfg = DdeConfig(ModelParams(alpha=0.5, gamma=0.2), f2=constant_heterogeneity(1e300), M=2)
    samples = McSamples(np.array([1e-10, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(SolverError, match="non-finite"):
        delay_functional_mc(linear_history(0.5), 0.0, cfg, samples=samples)


class TestIncrementSolver:
    def test_root(self):
        a, iterations = solve_for_increment(lambda a: a - 1.0, 5.0)
        assert a == pytest.approx(1.0)
        assert iterations >= 0

    def test_widened_bracket(self):
        a, _ = solve_for_increment(lambda a: a - 12.0, 5.0)
        assert a == pytest.approx(12.0)

    def test_exhausted(self):
        with pytest.raises(RootBracketError, match="root bracket exhausted"):
            solve_for_increment(lambda a: a + 100.0, 5.0)


def test_constant_speed_is_fixed_point(ex0_params, flat_background):
    c = speed_roots(ex0_params).c_p
    cfg = DdeConfig(ex0_params, method="quadrature")
    e = dde_error(linear_history(c), 0.0, cfg.h, flat_background, cfg)
    assert abs(e) < 1e-6


def test_config_validation(ex0_params):
    for kwargs in ({"h": 0.0}, {"M": 0}, {"algo": 3}, {"method": "simpson"}, {"a_max": 0.0}):
        with pytest.raises(ConfigError):
            DdeConfig(ex0_params, **kwargs)


def test_run_keeps_constant_speed(ex0_params, flat_background):
    c = speed_roots(ex0_params).c_p
    cfg = DdeConfig(ex0_params, method="quadrature")
    traj = dde_run_algo1(linear_history(c), 0.25, cfg, flat_background)
    assert len(traj) == 11
    assert not traj.failed
    np.testing.assert_allclose(traj.dz_ds[1:], c, atol=1e-5)
    assert len(traj.diagnostics) == 10
    assert traj.meta["algo"] == 1


def test_run_is_deterministic(ex0_params, flat_background):
    c = speed_roots(ex0_params).c_p
    cfg = DdeConfig(ex0_params, M=2000, seed=9)
    a = dde_run_algo1(linear_history(c), 0.1, cfg, flat_background)
    b = dde_run_algo1(linear_history(c), 0.1, cfg, flat_background)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.dz_ds, b.dz_ds)


def test_failed_step_keeps_partial(ex0_params, flat_background):
    cfg = DdeConfig(ex0_params, method="quadrature", a_max=0.01)
    traj = dde_run_algo1(linear_history(100.0), 0.1, cfg, flat_background)
    assert traj.failed
    assert "root bracket exhausted" in traj.meta["error"]
    assert len(traj) == 1


@pytest.mark.parametrize("method", ["mc", "quadrature"])
@pytest.mark.parametrize("step", [0.05, 0.0125])
@pytest.mark.parametrize("history", [
    FrontHistory.constant_speed(0.0, 0.83),
    FrontHistory.constant_speed(-1.0, 0.4).append(0.5, -0.2).append(1.0, 0.3),
])
def test_error_increases_with_increment(method, step, history, ex0_params, ex1_f2, flat_background):
    cfg = DdeConfig(ex0_params, f2=ex1_f2, h=step, M=20_000, seed=4, method=method)
    a = np.linspace(-2.0, 2.0, 21)
    e = np.array([dde_error(history, ai, history.s_last + step, flat_background, cfg, stream=1) for ai in a])
    slopes = np.diff(e) / np.diff(a)
    assert np.all(slopes > 0)
    assert slopes.min() >= SQRT2_3 - 10 * abs(ex0_params.alpha) * step


class TestStationaryFront:
    """Zero-velocity history at a root of q_b^-(x0) = gamma / alpha (Example 1)."""

    def test_error_vanishes(self, ex1_stationary):
        p, f2, bg, _, stable = ex1_stationary
        cfg = DdeConfig(p, f2=f2, M=100_000, seed=3)
        h = FrontHistory.constant_speed(stable, 0.0)
        e = dde_error(h, 0.0, cfg.h, bg, cfg)
        assert delay_functional_mc(h, 0.0, cfg).value == 0.0
        assert abs(e) <= 1e-6

    @pytest.mark.parametrize("which", ["unstable", "stable"])
    def test_step_keeps_zero_slope(self, ex1_stationary, which):
        p, f2, bg, unstable, stable = ex1_stationary
        x0 = unstable if which == "unstable" else stable
        cfg = DdeConfig(p, f2=f2, M=100_000, seed=3)
        h = dde_step_algo1(FrontHistory.constant_speed(x0, 0.0), cfg, bg)
        assert abs(h.last_slope) < 1e-6
        assert h.z_last == pytest.approx(x0, abs=1e-7)

    @pytest.mark.slow
    def test_run_stays_put(self, ex1_stationary):
        p, f2, bg, _, stable = ex1_stationary
        cfg = DdeConfig(p, f2=f2, M=100_000, seed=3)
        traj = dde_run_algo1(FrontHistory.constant_speed(stable, 0.0), 10.0, cfg, bg)
        assert not traj.failed
        assert abs(traj.z[-1] - stable) <= 1e-2
