"""Tests for the command-line interface."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from cli import cli
from hetfront.model import Trajectory
from hetfront.output import write_trajectory


@pytest.fixture
def runner():
    return CliRunner()


def test_speeds(runner):
    result = runner.invoke(cli, ["speeds", "--alpha", "0.5", "--gamma", "0.2"])
    assert result.exit_code == 0
    assert '"roots"' in result.output
    assert "single" in result.output


def test_invalid_model(runner):
    result = runner.invoke(cli, ["speeds", "--tauhat", "-1"])
    assert result.exit_code == 1
    assert "tauhat must be positive" in result.output


def test_bifurcation(runner):
    result = runner.invoke(cli, ["bifurcation", "--gamma", "0.2"])
    assert result.exit_code == 0
    assert "alpha_bp" in result.output


def test_config_file_round_trip(runner, tmp_path):
    path = tmp_path / "ex2.json"
    result = runner.invoke(cli, ["config-init", str(path), "--example", "ex2"])
    assert result.exit_code == 0
    assert json.loads(path.read_text())["example"] == "ex2"
    result = runner.invoke(cli, ["--config", str(path), "speeds", "--alpha", "0.1"])
    assert result.exit_code == 0


def test_bad_config_file(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"colour": "red"}))
    result = runner.invoke(cli, ["--config", str(path), "speeds"])
    assert result.exit_code == 1
    assert "unknown config keys" in result.output


def test_compare(runner, tmp_path):
    s = np.linspace(0.0, 5.0, 51)
    first = write_trajectory(tmp_path / "a.csv", Trajectory(s, s, np.ones_like(s)))
    second = write_trajectory(tmp_path / "b.csv", Trajectory(s + 1.0, s, np.ones_like(s)))
    result = runner.invoke(cli, ["compare", str(first), str(second), "--anchor", "2,0"])
    assert result.exit_code == 0
    assert "sup_z" in result.output


def test_compare_disjoint(runner, tmp_path):
    s = np.linspace(0.0, 5.0, 51)
    first = write_trajectory(tmp_path / "a.csv", Trajectory(s, s, np.ones_like(s)))
    second = write_trajectory(tmp_path / "b.csv", Trajectory(s, s + 50.0, np.ones_like(s)))
    result = runner.invoke(cli, ["compare", str(first), str(second)])
    assert result.exit_code == 1


def test_background(runner, tmp_path):
    out = tmp_path / "bg.csv"
    result = runner.invoke(cli, ["background", "--example", "ex0", "--out", str(out)])
    assert result.exit_code == 0
    assert out.read_text().splitlines()[0] == "x,f2,vbm_plus_1,qbm"


def test_unknown_example(runner):
    result = runner.invoke(cli, ["example", "ex9"])
    assert result.exit_code == 2
