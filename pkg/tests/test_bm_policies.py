from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from budgeted_sampling import bm_series
from budgeted_sampling.bm_policies import (
    OptimizerConfig,
    OptimizerError,
    delta_expected_samples,
    delta_policy_coefficient,
    delta_recursion,
    deterministic_policy,
    optimal_envelope_recursion,
    snell_constant,
)


@pytest.mark.parametrize("N", [1, 2, 5])
def test_deterministic(N):
    res = deterministic_policy(2.0, N)
    assert res.analytic_distortion == pytest.approx(1.0 / (N + 1))
    assert res.policy.times == pytest.approx([2.0 * i / (N + 1) for i in range(1, N + 1)])
    assert res.absolute_distortion(2.0) == pytest.approx(2.0 / (N + 1))
    with pytest.raises(ValueError):
        deterministic_policy(1.0, 0)


def test_published_recursion_table():
    res = delta_recursion(5)
    assert res.policy.c == pytest.approx([0.3953, 0.3471, 0.3219, 0.3078, 0.2995], abs=5e-4)
    assert res.policy.rho == pytest.approx([0.9391, 0.8743, 0.8401, 0.8208, 0.8094], abs=1e-3)
    assert all(b < a for a, b in zip(res.policy.c, res.policy.c[1:]))


def test_consistent_recursion_is_self_consistent():
    res = delta_recursion(6, convention="consistent")
    # the claimed coefficients are exactly the cost of the policy they define
    assert delta_policy_coefficient(res.policy.rho) == pytest.approx(res.policy.c, abs=1e-12)
    assert res.policy.c[0] == pytest.approx(delta_recursion(1).policy.c[0], abs=1e-12)
    assert all(c < 1.0 / (n + 1) for n, c in enumerate(res.policy.c, start=1) if n >= 2)


def test_published_coefficients_overstate_their_policy():
    res = delta_recursion(5)
    true = delta_policy_coefficient(res.policy.rho)
    assert true[0] == pytest.approx(res.policy.c[0], abs=1e-12)
    assert all(t < c for t, c in zip(true[1:], res.policy.c[1:]))


def test_delta_policy_coefficient_validation():
    with pytest.raises(ValueError):
        delta_policy_coefficient([0.9, 0.0])


def test_expected_samples():
    res = delta_recursion(3)
    lam = res.policy.lambda_star
    e = delta_expected_samples(3, lam)
    assert e[0] == pytest.approx(bm_series.firing_probability(lam[0]))
    assert e[1] == pytest.approx((1 + e[0]) * bm_series.firing_probability(lam[1]))
    assert res.expected_samples == pytest.approx(e[-1])
    with pytest.raises(ValueError):
        delta_expected_samples(3, lam[:2])


def test_unknown_convention():
    with pytest.raises(ValueError):
        delta_recursion(2, convention="other")


def test_optimizer_reports_edge_minimum():
    with pytest.raises(OptimizerError):
        delta_recursion(1, opt=OptimizerConfig(lam_min=2.0, lam_max=50.0, n_grid=50))


def test_envelope_recursion():
    res = optimal_envelope_recursion(3)
    th, ga = res.policy.theta, res.policy.gamma
    assert th[1] == pytest.approx((math.sqrt(3) - 1) / 2, abs=1e-12)
    assert ga[0] == pytest.approx(math.sqrt(3), abs=1e-12)
    assert th[2] == pytest.approx(0.2058868, abs=1e-7)
    assert ga[1] == pytest.approx(0.7777991, abs=1e-7)
    assert res.analytic_distortion == th[-1]
    assert res.expected_samples == 3.0


def test_envelope_beats_other_families():
    env = optimal_envelope_recursion(5).policy.theta
    delta = delta_recursion(5, convention="consistent").policy.c
    for n in range(1, 6):
        assert env[n] < min(1.0 / (n + 1), delta[n - 1])


@given(st.floats(1e-6, 1.0))
def test_snell_constant_root(beta):
    A = snell_constant(beta)
    assert 0 < A < 1
    assert 2 * A * A - (5 + beta) * A + 3 == pytest.approx(0.0, abs=1e-12)


def test_snell_constant_domain():
    for beta in (0.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            snell_constant(beta)
