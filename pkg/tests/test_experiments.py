"""Tests for trajectory alignment, comparison metrics and experiment reports."""

import numpy as np
import pytest

from hetfront import experiments
from hetfront.config import Config
from hetfront.constant_coeff import speed_roots
from hetfront.dde import DdeConfig
from hetfront.errors import AlignmentError, ConfigError, RootBracketError
from hetfront.experiments import (
    DdeJob,
    ExperimentReport,
    RunRecord,
    compare_trajectories,
    crossing_time,
    early_speed,
    execute_dde_job,
    run_example,
    run_jobs,
    stationary_brackets,
    terminal_speed,
    time_align,
    traversal_window,
    velocity_reversals,
    velocity_vs_position,
)
from hetfront.history import FrontHistory
from hetfront.model import Trajectory
from hetfront.output import read_json


def oscillation():
    s = np.linspace(0.0, 4.0 * np.pi, 801)
    return Trajectory(s, 10.0 * np.sin(s), 10.0 * np.cos(s))


class TestAlignment:
    def test_crossing_time(self, ramp):
        assert crossing_time(ramp, 2.55) == pytest.approx(2.55)
        assert crossing_time(ramp, 0.0) == 0.0

    def test_never_reached(self, ramp):
        with pytest.raises(AlignmentError):
            crossing_time(ramp, 20.0)

    def test_anchor(self, ramp):
        aligned = time_align(ramp, ramp, (5.0, 0.0))
        assert crossing_time(aligned, 5.0) == pytest.approx(0.0)
        np.testing.assert_allclose(aligned.s, ramp.s - 5.0)

    def test_self_alignment_is_identity(self, ramp):
        assert time_align(ramp, ramp) is ramp

    def test_midrange_alignment(self, ramp):
        late = ramp.shifted(3.0)
        aligned = time_align(ramp, late)
        np.testing.assert_allclose(aligned.s, ramp.s, atol=1e-12)

    def test_disjoint_ranges(self, ramp):
        far = Trajectory(ramp.s, ramp.z + 50.0, ramp.dz_ds)
        with pytest.raises(AlignmentError):
            time_align(ramp, far)


class TestComparison:
    def test_identical(self, ramp):
        metrics = compare_trajectories(ramp, ramp)
        assert metrics["sup_z"] == 0.0 and metrics["l2_v"] == 0.0
        assert metrics["sup_v_by_z"] == 0.0

    def test_offset(self, ramp):
        other = Trajectory(ramp.s, ramp.z + 0.1, ramp.dz_ds)
        metrics = compare_trajectories(ramp, other)
        assert metrics["sup_z"] == pytest.approx(0.1)
        assert metrics["l2_z"] == pytest.approx(0.1 * np.sqrt(10.0))

    def test_window(self, ramp):
        other = Trajectory(ramp.s, np.where(ramp.s > 5.0, ramp.z + 1.0, ramp.z), ramp.dz_ds)
        assert compare_trajectories(ramp, other, (0.0, 4.0))["sup_z"] == 0.0

    def test_no_common_window(self, ramp):
        with pytest.raises(AlignmentError):
            compare_trajectories(ramp, ramp.shifted(20.0))

    def test_non_monotone_skips_position_metric(self, ramp):
        osc = oscillation()
        assert "sup_v_by_z" not in compare_trajectories(ramp, osc)


def test_velocity_vs_position(ramp):
    z, v = velocity_vs_position(ramp, n=11)
    np.testing.assert_allclose(z, np.linspace(0.0, 10.0, 11))
    np.testing.assert_allclose(v, 1.0)
    osc = oscillation()
    z, _ = velocity_vs_position(osc)
    assert z.size == len(osc)


def test_velocity_reversals():
    turns = velocity_reversals(oscillation(), 0.5)
    assert len(turns) == 4
    np.testing.assert_allclose(np.abs(turns), 10.0, atol=1e-3)
    assert turns[0] > 0 > turns[1]


def test_traversal_window(ramp):
    assert traversal_window(ramp, 2.0, 8.0) == pytest.approx((2.0, 8.0))
    assert traversal_window(ramp, -1.0, 20.0) == pytest.approx((0.0, 10.0))


def test_speed_summaries(ramp):
    assert terminal_speed(ramp) == 1.0
    assert early_speed(ramp) == 1.0


def test_report(ramp, tmp_path):
    report = ExperimentReport("ex0")
    report.runs.append(RunRecord("dde_algo1", ramp, tmp_path / "dde_algo1.csv"))
    report.metrics["sup_z"] = np.float64(0.1)
    report.pass_flags.update(a=True, b=np.bool_(True))
    assert report.passed
    assert report.run("dde_algo1") is ramp
    with pytest.raises(KeyError):
        report.run("missing")
    data = report.to_dict()
    assert data["runs"][0]["samples"] == len(ramp)
    assert data["metrics"] == {"sup_z": 0.1}
    report.pass_flags["c"] = False
    assert not report.passed


def test_dde_jobs_keep_order(ex0_params, flat_background):
    c = speed_roots(ex0_params).c_p
    cfg = DdeConfig(ex0_params, method="quadrature")
    jobs = [DdeJob(f"job_{i}", cfg, FrontHistory.constant_speed(float(i), c), 0.05, flat_background)
            for i in range(2)]
    results = run_jobs(execute_dde_job, jobs)
    assert [r.label for r in results] == ["job_0", "job_1"]
    assert all(r.error is None for r in results)
    assert results[1].trajectory.z[0] == 1.0


def test_failed_job_reports_error(ex0_params, flat_background):
    cfg = DdeConfig(ex0_params, method="quadrature", a_max=0.01)
    result = execute_dde_job(DdeJob("bad", cfg, FrontHistory.constant_speed(0.0, 100.0), 0.05, flat_background))
    assert "root bracket exhausted" in result.error
    assert result.trajectory is not None


class TestStationaryBrackets:
    @pytest.fixture
    def config(self):
        return Config.for_example("ex1")

    def test_brackets_are_scored(self, config, monkeypatch):
        found = {0.1: (0.378, 0.382), 0.05: (0.3830, 0.3835)}
        calls = []

        def fake(cfg, interval, T_seq, width):
            calls.append((cfg.params.epsilon, interval, width))
            return found[cfg.params.epsilon]

        monkeypatch.setattr(experiments, "bracket_stationary_front", fake)
        report = ExperimentReport("ex1")
        stationary_brackets(config, 0.38, report)
        assert [eps for eps, _, _ in calls] == [0.1, 0.05]
        assert calls[0][1] == pytest.approx((0.28, 0.48))
        assert calls[0][2] == config.pde.bracket_width
        assert report.metrics["stationary_bracket_lo_eps_0.1"] == 0.378
        assert report.metrics["stationary_bracket_hi_eps_0.05"] == 0.3835
        assert report.pass_flags["stationary_bracket_eps_0.1"]
        # 0.0069 away from the eps = 0.05 reference
        assert not report.pass_flags["stationary_bracket_eps_0.05"]

    def test_failed_bisection_is_recorded(self, config, monkeypatch):
        def fake(cfg, interval, T_seq, width):
            raise RootBracketError("fronts travel in the same direction")

        monkeypatch.setattr(experiments, "bracket_stationary_front", fake)
        report = ExperimentReport("ex1")
        stationary_brackets(config, 0.38, report)
        assert "same direction" in report.failures["bracket_eps_0.1"]
        assert report.pass_flags == {"stationary_bracket_eps_0.1": False, "stationary_bracket_eps_0.05": False}
        assert not any(key.startswith("stationary_bracket") for key in report.metrics)


def test_unknown_example(tmp_path):
    with pytest.raises(ConfigError):
        run_example("ex9", out_dir=tmp_path)


@pytest.mark.slow
def test_ex0_reproduction(tmp_path):
    report = run_example("ex0", eps_list=[0.1, 0.05], out_dir=tmp_path, workers=2)
    assert report.pass_flags["speed_recovers"]
    assert report.pass_flags["dde_pde_agreement"]
    assert report.pass_flags["algorithms_agree"]
    saved = read_json(tmp_path / "ex0" / "report.json")
    assert saved["pass_flags"] == report.to_dict()["pass_flags"]
    assert (tmp_path / "ex0" / "config.json").exists()


@pytest.mark.slow
def test_ex1_reproduction(tmp_path):
    report = run_example("ex1", out_dir=tmp_path)
    assert report.metrics["stationary_unstable"] == pytest.approx(0.38, abs=1e-2)
    assert report.pass_flags["converges_to_stable_dde_right"]
    assert report.pass_flags["travels_left_dde_left"]
    assert report.pass_flags["stationary_bracket_eps_0.1"]
    assert report.pass_flags["stationary_bracket_eps_0.05"]


@pytest.mark.slow
def test_ex3_reproduction(tmp_path):
    report = run_example("ex3", out_dir=tmp_path)
    assert report.pass_flags["trapped_dde_algo1"]
    assert report.pass_flags["reverses_dde_algo1"]
