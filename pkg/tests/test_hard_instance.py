"""Hard instance geometry: theta construction, risk identity, reduction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from labelldp import (
    LabelDistribution,
    ParameterError,
    RandomnessStream,
    closed_form_excess_risk,
    excess_risk_montecarlo,
    hard_gamma,
    linear_loss,
    make_hard_instance,
    make_hard_theta,
    reduce_to_theta_hat,
)


def gamma_forcing_c(target, n, eps):
    """c_gamma that lands hard_gamma exactly on target (below the cap)."""
    e = math.exp(eps)
    return target / math.sqrt(e / ((e - 1) ** 2 * n))


def test_theta_worked_example():
    # K=2 with gamma forced to 0.1 and pattern (1, 0) gives (0.6, 0.4)
    c = gamma_forcing_c(0.1, 100, math.log(3))
    theta = make_hard_theta(2, 100, math.log(3), sign_pattern=[1, 0], c_gamma=c)
    assert theta.probabilities == pytest.approx([0.6, 0.4], abs=1e-12)
    assert theta.gamma == pytest.approx(0.1, abs=1e-15)


def test_gamma_cap_and_formula():
    # small n: the 1/(2K) cap binds
    assert hard_gamma(4, 1, 1.0, c_gamma=100.0) == pytest.approx(1 / 8)
    # large n: the scaling branch binds
    e = math.e
    expected = 0.25 * math.sqrt(e / ((e - 1) ** 2 * 1e6))
    assert hard_gamma(4, 1_000_000, 1.0) == pytest.approx(expected, rel=1e-12)


def test_default_pattern_is_alternating_and_balanced():
    theta = make_hard_theta(6, 10_000, 1.0)
    probs = theta.probabilities
    signs = np.sign(probs - 1 / 6)
    assert list(signs) == [1, -1, 1, -1, 1, -1]
    assert probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_theta_entries_are_balanced_perturbations():
    theta = make_hard_theta(8, 5_000, 0.7)
    probs = theta.probabilities
    up = np.isclose(probs, 1 / 8 + theta.gamma, atol=1e-15)
    down = np.isclose(probs, 1 / 8 - theta.gamma, atol=1e-15)
    assert np.all(up | down)
    assert up.sum() == down.sum() == 4


def test_make_hard_theta_validation():
    with pytest.raises(ParameterError):
        make_hard_theta(5, 100, 1.0)  # odd K
    with pytest.raises(ParameterError):
        make_hard_theta(4, 100, 1.0, sign_pattern=[1, 1, 1, 0])  # unbalanced
    with pytest.raises(ParameterError):
        make_hard_theta(4, 100, 1.0, sign_pattern=[1, 2, 0, 0])  # not 0/1


def test_degenerate_gamma_is_rejected():
    with pytest.raises(ParameterError):
        make_hard_instance(4, 1000, 1.0, c_gamma=0.0)


def test_direction_is_unit_and_matches_theta():
    inst = make_hard_instance(6, 2_000, 1.0)
    assert np.linalg.norm(inst.direction) == pytest.approx(1.0, abs=1e-10)
    rebuilt = 1 / 6 + inst.alpha * inst.direction
    assert rebuilt == pytest.approx(inst.distribution.probabilities, abs=1e-15)
    assert inst.alpha == pytest.approx(inst.distribution.gamma * math.sqrt(6), rel=1e-14)


def test_label_distribution_validation():
    with pytest.raises(ParameterError):
        LabelDistribution(probabilities=np.array([0.7, 0.2]), gamma=0.1)
    with pytest.raises(ParameterError):
        LabelDistribution(probabilities=np.array([-0.1, 1.1]), gamma=0.1)


def test_sampler_matches_theta_frequencies():
    inst = make_hard_instance(4, 1000, 1.0, c_gamma=gamma_forcing_c(0.05, 1000, 1.0))
    gen = RandomnessStream(42).generator
    _, labels = inst.sampler(gen, 200_000)
    freq = np.bincount(labels, minlength=5)[1:] / labels.size
    probs = inst.distribution.probabilities
    se = np.sqrt(probs * (1 - probs) / labels.size)
    assert np.all(np.abs(freq - probs) < 4 * se)


# ------------------------------------------------------------- risk identity


def test_closed_form_matches_montecarlo():
    inst = make_hard_instance(4, 5_000, 1.0, c_gamma=gamma_forcing_c(0.1, 5_000, 1.0))
    loss = linear_loss(4)
    gen = np.random.default_rng(7)
    w = gen.standard_normal(4)
    w /= np.linalg.norm(w) * 1.5
    est = excess_risk_montecarlo(
        w, inst.sampler, loss, 1_000_000, reference_w=inst.direction, stream=RandomnessStream(3)
    )
    exact = closed_form_excess_risk(w, inst)
    assert abs(est.value - exact) < 4 * est.stderr


def test_closed_form_risk_at_reference_points():
    inst = make_hard_instance(4, 2_000, 1.0)
    assert closed_form_excess_risk(inst.direction, inst) == pytest.approx(0.0, abs=1e-15)
    assert closed_form_excess_risk(np.zeros(4), inst) == pytest.approx(inst.alpha / 2, rel=1e-14)
    worst = closed_form_excess_risk(-inst.direction, inst)
    assert worst == pytest.approx(inst.alpha, rel=1e-14)


def test_closed_form_requires_feasible_w():
    inst = make_hard_instance(4, 2_000, 1.0)
    with pytest.raises(ParameterError):
        closed_form_excess_risk(2.0 * inst.direction, inst)


def test_quadratic_minorant_holds_on_unit_ball():
    # (alpha/4)||w - b||^2 <= excess risk for every feasible w
    inst = make_hard_instance(6, 3_000, 1.0)
    gen = np.random.default_rng(12)
    for _ in range(1000):
        w = gen.standard_normal(6)
        w *= gen.uniform(0, 1) / np.linalg.norm(w)
        minorant = 0.25 * inst.alpha * float(np.sum((w - inst.direction) ** 2))
        assert minorant <= closed_form_excess_risk(w, inst) + 1e-15


# ---------------------------------------------------------------- reduction


def test_reduction_identity_is_exact():
    inst = make_hard_instance(4, 2_000, 1.0)
    gen = np.random.default_rng(9)
    theta = inst.distribution.probabilities
    for _ in range(100):
        w_hat = gen.standard_normal(4)
        w_hat /= max(1.0, np.linalg.norm(w_hat))
        theta_hat = reduce_to_theta_hat(w_hat, 4, inst.distribution.gamma)
        lhs = np.linalg.norm(theta_hat - theta)
        rhs = inst.alpha * np.linalg.norm(w_hat - inst.direction)
        assert abs(lhs - rhs) < 1e-12


def test_reduction_endpoints():
    inst = make_hard_instance(6, 4_000, 1.0)
    theta = inst.distribution.probabilities
    perfect = reduce_to_theta_hat(inst.direction, 6, inst.distribution.gamma)
    assert np.linalg.norm(perfect - theta) == pytest.approx(0.0, abs=1e-15)
    null = reduce_to_theta_hat(np.zeros(6), 6, inst.distribution.gamma)
    assert np.linalg.norm(null - theta) == pytest.approx(inst.alpha, rel=1e-12)


def test_reduction_validation():
    with pytest.raises(ParameterError):
        reduce_to_theta_hat(np.zeros(3), 4, 0.1)
    with pytest.raises(ParameterError):
        reduce_to_theta_hat(np.zeros(4), 4, 0.0)


@settings(deadline=None, max_examples=30)
@given(
    st.integers(min_value=1, max_value=5).map(lambda h: 2 * h),
    st.floats(min_value=0.2, max_value=3.0),
    st.integers(min_value=10, max_value=10_000),
)
def test_instance_invariants_hold_generally(k, eps, n):
    inst = make_hard_instance(k, n, eps)
    probs = inst.distribution.probabilities
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(probs >= 0)
    assert np.linalg.norm(inst.direction) == pytest.approx(1.0, abs=1e-10)
    assert 0 < inst.distribution.gamma <= 1 / (2 * k) + 1e-15
