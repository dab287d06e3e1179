import math

import numpy as np
import pytest

from dbmlab import ghquad
from dbmlab.ghquad import LOG_COSH, TANH_SQ, Kernel
from dbmlab.machine import FieldSpec

from oracles import mc_gauss_expect, trapezoid_gauss_expect


# ---------------------------------------------------------------------------
# quadrature rule
# ---------------------------------------------------------------------------


def test_rule_weights_normalized():
    for order in (1, 7, 61, 122):
        rule = ghquad.gauss_hermite_rule(order)
        assert rule.nodes.size == order
        assert abs(rule.weights.sum() - 1.0) < 1e-13
        np.testing.assert_allclose(rule.nodes, -rule.nodes[::-1], atol=1e-12)
    for order in (61, 361, 722):
        rule = ghquad.normal_trapezoid_rule(order)
        assert rule.nodes.size == order
        assert abs(rule.weights.sum() - 1.0) < 1e-13
        np.testing.assert_allclose(rule.nodes, -rule.nodes[::-1], atol=1e-12)
        assert np.all(rule.weights > 0.0)


def test_rules_match_gaussian_moments():
    for rule in (ghquad.gauss_hermite_rule(61), ghquad.default_rule()):
        assert np.sum(rule.weights * rule.nodes) == pytest.approx(0.0, abs=1e-13)
        assert np.sum(rule.weights * rule.nodes**2) == pytest.approx(1.0, abs=1e-12)
        assert np.sum(rule.weights * rule.nodes**4) == pytest.approx(3.0, abs=1e-11)


def test_rule_rejects_bad_order():
    with pytest.raises(ValueError):
        ghquad.gauss_hermite_rule(0)
    with pytest.raises(ValueError):
        ghquad.normal_trapezoid_rule(0)


# ---------------------------------------------------------------------------
# stable log cosh
# ---------------------------------------------------------------------------


def test_logcosh_at_zero():
    assert ghquad.logcosh(0.0) == 0.0


def test_logcosh_matches_naive_form_in_safe_range():
    y = np.linspace(-20.0, 20.0, 1001)
    np.testing.assert_allclose(ghquad.logcosh(y), np.log(np.cosh(y)), atol=1e-12)


def test_logcosh_stable_for_large_arguments():
    for y in (50.0, -50.0, 800.0, -800.0):
        assert ghquad.logcosh(y) == pytest.approx(abs(y) - math.log(2.0), rel=1e-15)


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------


def test_expect_zero_variance_point_mass():
    for h0 in (0.0, 0.7, -1.3):
        val = ghquad.expect(TANH_SQ, 0.0, FieldSpec.point_mass(h0))
        assert val == pytest.approx(math.tanh(h0) ** 2, abs=1e-15)


def test_expect_logcosh_degenerate_zero():
    assert ghquad.expect(LOG_COSH, 0.0, FieldSpec.zero()) == pytest.approx(0.0, abs=1e-15)


def test_expect_tanh_sq_standard_gaussian_against_oracles():
    val = ghquad.expect(TANH_SQ, 1.0, FieldSpec.zero())
    mc, se = mc_gauss_expect(lambda y: np.tanh(y) ** 2, 1.0, n=10_000_000, seed=101)
    assert abs(val - mc) < 3.0 * se
    trap = trapezoid_gauss_expect(lambda y: np.tanh(y) ** 2, 1.0)
    assert val == pytest.approx(trap, abs=1e-6)


def test_expect_log_cosh_against_trapezoid():
    for s, h in [(0.5, 0.0), (2.0, 0.4), (4.0, -1.0)]:
        val = ghquad.expect(LOG_COSH, s, FieldSpec.point_mass(h))
        trap = trapezoid_gauss_expect(
            lambda y: np.abs(y) + np.log1p(np.exp(-2.0 * np.abs(y))) - math.log(2.0),
            math.sqrt(s),
            h,
        )
        assert val == pytest.approx(trap, abs=1e-6)


def test_expect_gaussian_field_folds_variance():
    a = ghquad.expect(TANH_SQ, 0.5, FieldSpec.gaussian(0.3))
    b = ghquad.expect(TANH_SQ, 0.8, FieldSpec.zero())
    assert a == pytest.approx(b, abs=1e-12)
    trap = trapezoid_gauss_expect(lambda y: np.tanh(y) ** 2, math.sqrt(0.8))
    assert a == pytest.approx(trap, abs=1e-6)


def test_expect_discrete_field_mixture():
    field = FieldSpec.discrete((-1.0, 0.5), (0.3, 0.7))
    val = ghquad.expect(TANH_SQ, 0.4, field)
    ref = 0.3 * trapezoid_gauss_expect(
        lambda y: np.tanh(y) ** 2, math.sqrt(0.4), -1.0
    ) + 0.7 * trapezoid_gauss_expect(lambda y: np.tanh(y) ** 2, math.sqrt(0.4), 0.5)
    assert val == pytest.approx(ref, abs=1e-6)


def test_expect_point_mass_equals_single_atom_discrete():
    a = ghquad.expect(TANH_SQ, 0.9, FieldSpec.point_mass(0.3))
    b = ghquad.expect(TANH_SQ, 0.9, FieldSpec.discrete((0.3,), (1.0,)))
    assert a == b


def test_expect_accepts_plain_callables():
    val = ghquad.expect(lambda y: y**2, 2.0, FieldSpec.point_mass(0.5))
    assert val == pytest.approx(2.0 + 0.25, rel=1e-12)


def test_expect_rejects_negative_variance():
    with pytest.raises(ValueError):
        ghquad.expect(TANH_SQ, -0.1, FieldSpec.zero())


# ---------------------------------------------------------------------------
# derivative under the integral sign
# ---------------------------------------------------------------------------


def test_expect_derivative_matches_finite_differences():
    eps = 1e-5
    for field in (FieldSpec.zero(), FieldSpec.point_mass(0.4), FieldSpec.gaussian(0.6)):
        for s in (0.3, 1.0, 4.0):
            der = ghquad.expect_derivative_in_s(TANH_SQ, s, field)
            fd = (
                ghquad.expect(TANH_SQ, s + eps, field)
                - ghquad.expect(TANH_SQ, s - eps, field)
            ) / (2.0 * eps)
            assert der == pytest.approx(fd, abs=1e-6)


def test_expect_derivative_of_square_is_one():
    square = Kernel(value=lambda y: y**2, deriv=lambda y: 2.0 * y)
    for s in (0.2, 1.0, 9.0):
        der = ghquad.expect_derivative_in_s(square, s, FieldSpec.zero())
        assert der == pytest.approx(1.0, rel=1e-12)
        der = ghquad.expect_derivative_in_s(square, s, FieldSpec.point_mass(0.7))
        assert der == pytest.approx(1.0, rel=1e-12)


def test_expect_derivative_at_zero_variance():
    with pytest.raises(ValueError):
        ghquad.expect_derivative_in_s(TANH_SQ, 0.0, FieldSpec.zero())
    # a Gaussian field keeps the total variance positive, so s = 0 is fine
    der = ghquad.expect_derivative_in_s(TANH_SQ, 0.0, FieldSpec.gaussian(0.5))
    eps = 1e-5
    fd = (
        ghquad.expect(TANH_SQ, eps, FieldSpec.gaussian(0.5))
        - ghquad.expect(TANH_SQ, 0.0, FieldSpec.gaussian(0.5))
    ) / eps
    assert der == pytest.approx(fd, abs=1e-4)


def test_expect_derivative_requires_derivative_kernel():
    with pytest.raises(TypeError):
        ghquad.expect_derivative_in_s(lambda y: y**2, 1.0, FieldSpec.zero())


# ---------------------------------------------------------------------------
# stability and structure
# ---------------------------------------------------------------------------


def test_doubling_the_order_is_converged():
    base = ghquad.default_rule()
    doubled = ghquad.normal_trapezoid_rule(2 * base.order)
    for s in (0.1, 1.0, 9.0, 25.0):
        for kernel in (TANH_SQ, LOG_COSH, ghquad.INV_COSH4):
            a = ghquad.expect(kernel, s, FieldSpec.zero(), rule=base)
            b = ghquad.expect(kernel, s, FieldSpec.zero(), rule=doubled)
            assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def test_default_rule_accurate_at_large_variance():
    # the default rule must hold ~1e-12 accuracy through s = 25, where naive
    # 61-node Gauss-Hermite is off by ~3e-2
    val = ghquad.expect(TANH_SQ, 25.0, FieldSpec.zero())
    ref = trapezoid_gauss_expect(lambda y: np.tanh(y) ** 2, 5.0)
    assert val == pytest.approx(ref, abs=1e-12)


def test_tanh_sq_expectation_bounded_and_monotone():
    vals = [ghquad.expect(TANH_SQ, s, FieldSpec.zero()) for s in (0.1, 0.5, 1.0, 4.0, 16.0)]
    assert all(0.0 <= v < 1.0 for v in vals)
    assert np.all(np.diff(vals) > 0.0)
