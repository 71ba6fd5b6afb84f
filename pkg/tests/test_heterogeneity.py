"""Tests for heterogeneity specs and the named set-ups."""

import numpy as np
import pytest

from hetfront.errors import HeterogeneityError
from hetfront.heterogeneity import (
    EXAMPLE_IDS,
    ZERO,
    HeterogeneityKind,
    HeterogeneitySpec,
    build_example_heterogeneity,
    constant_heterogeneity,
    eval_heterogeneity,
    gaussian_sum,
    positivity_check,
)


def test_zero_and_constant():
    x = np.linspace(-3, 3, 7)
    np.testing.assert_array_equal(eval_heterogeneity(ZERO, x), np.zeros(7))
    assert eval_heterogeneity(constant_heterogeneity(0.5), 2.0) == 0.5
    assert ZERO.is_zero
    assert constant_heterogeneity(0.0).is_zero


def test_gaussian_sum_value():
    f = gaussian_sum([(2.0, 1.0, 3.0)], constant=0.1)
    assert f(1.0) == pytest.approx(2.1)
    assert f(2.0) == pytest.approx(0.1 + 2.0 * np.exp(-3.0))
    assert f.bound() == pytest.approx(2.1)


def test_support_clips_to_constant():
    f = gaussian_sum([(1.0, 0.0, 0.01)], constant=0.2, support=(-1.0, 1.0))
    assert f(2.0) == 0.2
    assert f(0.0) == pytest.approx(1.2)
    assert f.breakpoints == (-1.0, 1.0)


def test_effective_support_of_gaussians():
    f = gaussian_sum([(1.0, 0.0, 1.0)])
    lo, hi = f.effective_support()
    assert lo == pytest.approx(-hi)
    assert abs(f(hi)) <= 1e-17 * 1.0001


def test_ex0_piecewise_cubic():
    f1, f2 = build_example_heterogeneity("ex0")
    assert f1 is ZERO
    assert f2.kind is HeterogeneityKind.PIECEWISE_CUBIC
    assert f2.support == (3.0, 10.0)
    assert f2(2.0) == 0.0
    assert f2(11.0) == 0.0
    y = np.arange(3.0, 10.0)
    d = y - 3.0
    expected = d * np.sin(1.0 + 14.0 * d ** 3) * np.exp(-1.2 * np.abs(d))
    np.testing.assert_allclose(f2(y), expected, atol=1e-12)


def test_ex3_dips():
    _, f2 = build_example_heterogeneity("ex3")
    assert f2(11.0) == pytest.approx(-12.0)
    assert f2(-11.0) == pytest.approx(-12.0)
    assert abs(f2(0.0)) < 1e-12


def test_fig1_named():
    f1, f2 = build_example_heterogeneity("fig1")
    assert f2.kind is HeterogeneityKind.NAMED
    assert f2.asymptotic is None
    assert f1(150.0) == pytest.approx(5.0)
    x = np.linspace(0, 300, 3001)
    assert np.max(np.abs(f2(x))) <= f2.bound()


@pytest.mark.parametrize("example_id", EXAMPLE_IDS)
def test_dict_round_trip(example_id):
    for spec in build_example_heterogeneity(example_id):
        again = HeterogeneitySpec.from_dict(spec.to_dict())
        x = np.linspace(-20, 20, 81)
        np.testing.assert_allclose(again(x), spec(x))


def test_from_dict_example_reference():
    spec = HeterogeneitySpec.from_dict({"example": "ex3"})
    assert spec(11.0) == pytest.approx(-12.0)


@pytest.mark.parametrize("data", [
    {"kind": "bogus"},
    {"kind": "gaussian-sum", "terms": [[1.0, 0.0, -1.0]]},
    {"kind": "compact-piecewise-cubic", "knots": [0.0, 1.0], "knot_values": [0.0, 1.0]},
    {"kind": "compact-piecewise-cubic", "knots": [0.0, 2.0, 1.0], "knot_values": [0.0, 1.0, 0.0]},
    {"kind": "named-example", "name": "nope"},
])
def test_malformed_specs(data):
    with pytest.raises(HeterogeneityError):
        HeterogeneitySpec.from_dict(data)


def test_unknown_example():
    with pytest.raises(HeterogeneityError):
        build_example_heterogeneity("ex9")


def test_positivity_check(caplog):
    ok, inf = positivity_check(build_example_heterogeneity("ex1")[1])
    assert ok and inf > 0
    ok, inf = positivity_check(build_example_heterogeneity("ex3")[1], label="f2")
    assert not ok
    assert inf == pytest.approx(-11.0, abs=1e-3)
    assert "positivity" in caplog.text
