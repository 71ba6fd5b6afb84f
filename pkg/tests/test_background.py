"""Tests for background states, Riccati slopes and stationary fronts."""

import numpy as np
import pytest

from hetfront.background import (
    FrontStability,
    Sign,
    background_residual,
    background_state,
    riccati_slopes,
    stationary_front_positions,
    v_SF,
)
from hetfront.errors import ConfigError, HeterogeneityError, RiccatiError
from hetfront.heterogeneity import ZERO, build_example_heterogeneity, constant_heterogeneity, gaussian_sum
from hetfront.model import ModelParams, make_grid


def test_flat_background_is_one(flat_background):
    np.testing.assert_allclose(flat_background.v.values, 1.0, atol=1e-10)
    np.testing.assert_allclose(flat_background.q.values, 0.0, atol=1e-10)


def test_negated_state(flat_background):
    minus = flat_background.as_sign(Sign.MINUS)
    assert minus.sign is Sign.MINUS
    np.testing.assert_allclose(minus.v_at(np.array([0.0, 3.3])), -1.0, atol=1e-10)
    assert minus.as_sign(Sign.MINUS) is minus


def test_constant_f1_uses_bvp():
    x = make_grid(-10.0, 10.0, 0.05)
    f1 = constant_heterogeneity(0.44)
    slopes = riccati_slopes(f1, x)
    np.testing.assert_allclose(slopes.a_u.values, 1.2, atol=1e-8)
    np.testing.assert_allclose(slopes.a_s.values, -1.2, atol=1e-8)
    bg = background_state(f1, ZERO, Sign.PLUS, x)
    assert bg.method == "bvp"
    np.testing.assert_allclose(bg.v.values, 1.0 / 1.44, atol=1e-10)


def test_riccati_flat_slopes():
    slopes = riccati_slopes(ZERO, make_grid(0.0, 1.0, 0.1))
    a_u, a_s = slopes.at(0.5)
    assert a_u == 1.0 and a_s == -1.0


def test_riccati_positivity_violation():
    f1 = gaussian_sum([(-3.0, 0.0, 1.0)])
    with pytest.raises(RiccatiError):
        riccati_slopes(f1, make_grid(-10.0, 10.0, 0.1))


def test_named_f2_with_f1_needs_frozen_boundary():
    f1, f2 = build_example_heterogeneity("fig1")
    x = make_grid(0.0, 20.0, 0.05)
    with pytest.raises(HeterogeneityError):
        background_state(f1, f2, Sign.PLUS, x)


def test_ex1_background_residual(ex1_f2):
    bg = background_state(ZERO, ex1_f2, Sign.PLUS, make_grid(-15.0, 15.0, 0.05))
    assert background_residual(bg) < 1e-6
    # far from the heterogeneity v_b^+ relaxes to 1
    assert bg.v_at(-14.0) == pytest.approx(1.0, abs=1e-5)


def test_v_sf_reduces_to_minus_q(ex1_f2):
    x = make_grid(-15.0, 15.0, 0.05)
    bg = background_state(ZERO, ex1_f2, Sign.PLUS, x)
    slopes = riccati_slopes(ZERO, x)
    pts = np.array([-1.0, 0.38, 0.9])
    np.testing.assert_allclose(v_SF(pts, bg, slopes), -bg.as_sign(Sign.MINUS).q_at(pts), atol=1e-12)


def test_ex1_stationary_fronts(ex1_f2):
    x = make_grid(-15.0, 15.0, 0.05)
    bg = background_state(ZERO, ex1_f2, Sign.PLUS, x)
    p = ModelParams(alpha=-2.0, gamma=-0.2)
    fronts = stationary_front_positions(p, bg, riccati_slopes(ZERO, x))
    by_kind = {}
    for front in fronts.positions:
        by_kind.setdefault(front.classification, []).append(front.position)
    unstable = min(by_kind[FrontStability.UNSTABLE], key=lambda z: abs(z - 0.38))
    stable = min(by_kind[FrontStability.STABLE], key=lambda z: abs(z - 0.90))
    assert unstable == pytest.approx(0.38, abs=1e-2)
    assert stable == pytest.approx(0.90, abs=1e-2)
    # the root condition q_b^-(x0) = gamma / alpha
    minus = bg.as_sign(Sign.MINUS)
    assert float(minus.q_at(unstable)) == pytest.approx(0.1, abs=1e-6)


def test_translation_invariant_case(flat_background):
    slopes = riccati_slopes(ZERO, flat_background.v.x)
    fronts = stationary_front_positions(ModelParams(alpha=1.0, gamma=0.0), flat_background, slopes)
    assert fronts.degenerate
    assert len(fronts) == 0
    fronts = stationary_front_positions(ModelParams(alpha=1.0, gamma=0.3), flat_background, slopes)
    assert not fronts.degenerate and len(fronts) == 0


def test_positive_alpha_unclassified(ex1_f2):
    x = make_grid(-15.0, 15.0, 0.05)
    bg = background_state(ZERO, ex1_f2, Sign.PLUS, x)
    fronts = stationary_front_positions(ModelParams(alpha=2.0, gamma=0.2), bg, riccati_slopes(ZERO, x))
    assert all(f.classification is FrontStability.UNCLASSIFIED for f in fronts.positions)


def test_alpha_zero_rejected(flat_background):
    with pytest.raises(ConfigError):
        stationary_front_positions(ModelParams(alpha=0.0, gamma=0.1), flat_background,
                                   riccati_slopes(ZERO, flat_background.v.x))


def test_grid_too_small():
    with pytest.raises(ConfigError):
        riccati_slopes(ZERO, np.array([0.0, 1.0]))
