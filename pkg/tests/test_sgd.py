"""Training protocol: step size, projection, label discipline, determinism."""

import math

import numpy as np
import pytest

from labelldp import (
    BERNOULLI_SUBSET,
    D_SUBSET,
    DJW,
    KRR,
    NON_PRIVATE,
    Dataset,
    LossSpec,
    MechanismParams,
    ParameterDomain,
    ParameterError,
    RandomnessStream,
    excess_risk_bound,
    excess_risk_montecarlo,
    learning_rate,
    linear_loss,
    load_datapoints,
    make_hard_instance,
    project_ball,
    train,
)

LN3 = math.log(3.0)
ALL_MECHANISMS = (BERNOULLI_SUBSET, D_SUBSET, KRR, DJW, NON_PRIVATE)


def params_for(mechanism, eps, k):
    if mechanism == D_SUBSET:
        return MechanismParams(epsilon=eps, num_labels=k, subset_size=1)
    return MechanismParams(epsilon=eps, num_labels=k)


def hard_setup(k=4, n=400, eps=1.0, seed=123, c_gamma=0.25):
    instance = make_hard_instance(k, n, eps, c_gamma=c_gamma)
    loss = linear_loss(k)
    gen = RandomnessStream(seed).derive(0).generator
    _, labels = instance.sampler(gen, n)
    return instance, loss, Dataset(labels=labels, shared_feature=0)


# --------------------------------------------------------------- step size


def test_learning_rate_worked_example():
    # R = L = 1, n = 100, K = 4, eps = ln 3 gives sqrt(1/1050)
    assert learning_rate(1.0, 1.0, 100, 4, LN3) == pytest.approx(math.sqrt(1 / 1050), rel=1e-14)


def test_learning_rate_scales_with_radius_and_lipschitz():
    base = learning_rate(1.0, 1.0, 500, 6, 1.0)
    assert learning_rate(3.0, 1.0, 500, 6, 1.0) == pytest.approx(3 * base, rel=1e-12)
    assert learning_rate(1.0, 2.0, 500, 6, 1.0) == pytest.approx(base / 2, rel=1e-12)


def test_learning_rate_validation():
    with pytest.raises(ParameterError):
        learning_rate(0.0, 1.0, 10, 4, 1.0)
    with pytest.raises(ParameterError):
        learning_rate(1.0, 1.0, 0, 4, 1.0)
    with pytest.raises(ParameterError):
        learning_rate(1.0, 1.0, 10, 4, 0.0)


def test_excess_risk_bound_values():
    # max{K e/(e-1)^2, 1} regime switch
    assert excess_risk_bound(4, 1.0, 10_000) == pytest.approx(
        math.sqrt(4 * math.e / (math.e - 1) ** 2) / 100, rel=1e-12
    )
    # at huge eps the factor clamps to 1
    assert excess_risk_bound(4, 30.0, 10_000) == pytest.approx(0.01, rel=1e-12)


# --------------------------------------------------------------- projection


def test_projection_scales_to_sphere():
    domain = ParameterDomain(dimension=2, radius=1.0)
    assert project_ball(np.array([3.0, 4.0]), domain) == pytest.approx([0.6, 0.8])


def test_projection_fixes_interior_points():
    domain = ParameterDomain(dimension=3, radius=2.0)
    w = np.array([0.5, -0.5, 1.0])
    assert project_ball(w, domain) == pytest.approx(w)


def test_projection_rejects_nonfinite():
    domain = ParameterDomain(dimension=2, radius=1.0)
    with pytest.raises(ParameterError):
        project_ball(np.array([np.nan, 0.0]), domain)


# ------------------------------------------------------------ label discipline


class CountingPoint:
    """Feature/label record that counts label reads."""

    reads = 0

    def __init__(self, label):
        self._label = label
        self.feature = 0

    @property
    def label(self):
        CountingPoint.reads += 1
        return self._label


@pytest.mark.parametrize("mechanism", ALL_MECHANISMS)
def test_each_label_is_read_exactly_once(mechanism):
    n, k = 150, 4
    gen = np.random.default_rng(0)
    CountingPoint.reads = 0
    data = [CountingPoint(int(gen.integers(1, k + 1))) for _ in range(n)]
    loss = linear_loss(k)
    train(data, loss, ParameterDomain(k, 1.0), params_for(mechanism, 1.0, k), mechanism, seed=5)
    assert CountingPoint.reads == n


# ------------------------------------------------------------- the recursion


@pytest.mark.parametrize("mechanism", ALL_MECHANISMS)
def test_iterates_are_feasible_and_average_matches(mechanism):
    instance, loss, data = hard_setup()
    result = train(
        data,
        loss,
        ParameterDomain(4, 1.0),
        params_for(mechanism, 1.0, 4),
        mechanism,
        seed=31,
        record_iterates=True,
    )
    iterates = result.metadata["iterates"]
    norms = np.linalg.norm(iterates, axis=1)
    assert norms.max() <= 1.0 + 1e-12
    assert result.metadata["max_iterate_norm"] == pytest.approx(norms.max(), abs=1e-12)
    assert result.averaged_iterate == pytest.approx(iterates.mean(axis=0), abs=1e-12)
    assert np.linalg.norm(result.averaged_iterate) <= 1.0 + 1e-12


@pytest.mark.parametrize("mechanism", ALL_MECHANISMS)
def test_training_is_deterministic(mechanism):
    instance, loss, data = hard_setup(seed=77)
    kwargs = dict(
        loss=loss,
        domain=ParameterDomain(4, 1.0),
        params=params_for(mechanism, 1.0, 4),
        mechanism=mechanism,
        seed=99,
    )
    a = train(data, **kwargs)
    b = train(data, **kwargs)
    assert np.array_equal(a.averaged_iterate, b.averaged_iterate)
    assert a.trajectory_summary == b.trajectory_summary


def test_projection_binds_under_a_huge_radius_free_walk():
    # force boundary hits: tiny domain radius keeps every iterate clamped
    instance, loss, data = hard_setup(n=200)
    domain = ParameterDomain(4, 1e-4)
    result = train(data, loss, domain, params_for(KRR, 1.0, 4), KRR, seed=1, record_iterates=True)
    norms = np.linalg.norm(result.metadata["iterates"], axis=1)
    assert norms.max() <= 1e-4 + 1e-18
    assert result.metadata["max_iterate_norm"] <= 1e-4 + 1e-18


@pytest.mark.parametrize("mechanism", (BERNOULLI_SUBSET, D_SUBSET, KRR, NON_PRIVATE))
def test_general_path_agrees_with_constant_gradient_path(mechanism):
    # same messages, same estimator algebra, different execution strategy
    instance, loss, data = hard_setup(n=250)
    slow = LossSpec(
        num_labels=loss.num_labels,
        dimension=loss.dimension,
        gradient_oracle=loss.gradient_oracle,
        value_oracle=loss.value_oracle,
        lipschitz_bound=loss.lipschitz_bound,
        gradient_matrix=loss.gradient_matrix,
        batch_values=loss.batch_values,
        constant_gradients=False,
    )
    common = dict(
        domain=ParameterDomain(4, 1.0),
        params=params_for(mechanism, 1.0, 4),
        mechanism=mechanism,
        seed=8,
    )
    fast = train(data, loss, **common)
    general = train(data, slow, **common)
    assert general.averaged_iterate == pytest.approx(fast.averaged_iterate, abs=1e-10)
    assert general.trajectory_summary.mean == pytest.approx(fast.trajectory_summary.mean, rel=1e-9)


def test_shuffle_changes_order_but_stays_deterministic():
    instance, loss, data = hard_setup(n=300)
    common = dict(
        loss=loss,
        domain=ParameterDomain(4, 1.0),
        params=params_for(BERNOULLI_SUBSET, 1.0, 4),
        mechanism=BERNOULLI_SUBSET,
        seed=17,
    )
    plain = train(data, **common)
    shuffled_a = train(data, shuffle=True, **common)
    shuffled_b = train(data, shuffle=True, **common)
    assert np.array_equal(shuffled_a.averaged_iterate, shuffled_b.averaged_iterate)
    assert not np.array_equal(plain.averaged_iterate, shuffled_a.averaged_iterate)


def test_trajectory_summary_fields():
    instance, loss, data = hard_setup(n=120)
    result = train(
        data, loss, ParameterDomain(4, 1.0), params_for(KRR, 1.0, 4), KRR, seed=3
    )
    s = result.trajectory_summary
    assert s.count == 120
    # krr norms are all equal on this loss; allow mean == max up to rounding
    assert s.max >= s.mean * (1 - 1e-12) and s.mean > 0
    assert s.final > 0
    assert result.metadata["eta"] == pytest.approx(learning_rate(1.0, 1.0, 120, 4, 1.0))
    assert result.metadata["non_interactive"] is True


def test_djw_metadata_reports_span_and_scale():
    instance, loss, data = hard_setup(k=4, n=100)
    result = train(
        data, loss, ParameterDomain(4, 1.0), params_for(DJW, 1.0, 4), DJW, seed=3
    )
    md = result.metadata
    # linear-loss gradients sum to zero, so their span has rank K-1
    assert md["basis_rank"] == 3
    assert md["l1_bound"] == pytest.approx(math.sqrt(3) * 0.5 * math.sqrt(3 / 4), rel=1e-12)
    assert md["debias_scale"] > 0
    assert md["second_moment_constant"] > 0
    assert md["non_interactive"] is False


# ------------------------------------------------------------- the baseline


def test_non_private_training_converges_on_easy_instance():
    # large c_gamma makes the drift strong enough to reach the optimum
    instance, loss, data = hard_setup(k=2, n=4000, c_gamma=50.0, seed=5)
    result = train(
        data, loss, ParameterDomain(2, 1.0), params_for(NON_PRIVATE, 1.0, 2), NON_PRIVATE, seed=6
    )
    alignment = float(result.averaged_iterate @ instance.direction)
    assert alignment > 0.5


# ---------------------------------------------------------------- validation


def test_train_validates_inputs():
    instance, loss, data = hard_setup()
    domain = ParameterDomain(4, 1.0)
    good = params_for(BERNOULLI_SUBSET, 1.0, 4)
    with pytest.raises(ParameterError):
        train(data, loss, domain, good, "unknown", seed=1)
    with pytest.raises(ParameterError):
        train(data, loss, ParameterDomain(3, 1.0), good, BERNOULLI_SUBSET, seed=1)
    with pytest.raises(ParameterError):
        train(data, loss, domain, MechanismParams(epsilon=1.0, num_labels=6), BERNOULLI_SUBSET, seed=1)
    with pytest.raises(ParameterError):
        train(data, loss, domain, params_for(D_SUBSET, 1.0, 4), BERNOULLI_SUBSET, seed=1)
    with pytest.raises(ParameterError):
        train(data, loss, domain, good, BERNOULLI_SUBSET, seed=1, initial=np.array([2.0, 0, 0, 0]))
    with pytest.raises(ParameterError):
        train([], loss, domain, good, BERNOULLI_SUBSET, seed=1)


def test_train_rejects_out_of_range_labels():
    loss = linear_loss(4)
    data = Dataset(labels=np.array([1, 2, 9]), shared_feature=0)
    with pytest.raises(ParameterError):
        train(data, loss, ParameterDomain(4, 1.0), params_for(KRR, 1.0, 4), KRR, seed=1)


def test_train_accepts_bare_label_sequences():
    labels = np.random.default_rng(3).integers(1, 5, size=200)
    loss = linear_loss(4)
    domain = ParameterDomain(4, 1.0)
    params = params_for(KRR, 1.0, 4)
    from_list = train(labels.tolist(), loss, domain, params, KRR, seed=2)
    from_array = train(labels, loss, domain, params, KRR, seed=2)
    from_dataset = train(Dataset(labels=labels), loss, domain, params, KRR, seed=2)
    assert np.array_equal(from_list.averaged_iterate, from_array.averaged_iterate)
    assert np.array_equal(from_list.averaged_iterate, from_dataset.averaged_iterate)


def test_loss_spec_validation():
    with pytest.raises(ParameterError):
        LossSpec(
            num_labels=1,
            dimension=2,
            gradient_oracle=lambda w, x, k: np.zeros(2),
            value_oracle=lambda w, x, k: 0.0,
            lipschitz_bound=1.0,
        )
    with pytest.raises(ParameterError):
        LossSpec(
            num_labels=3,
            dimension=2,
            gradient_oracle=lambda w, x, k: np.zeros(2),
            value_oracle=lambda w, x, k: 0.0,
            lipschitz_bound=1.0,
            convex=False,
        )


# ------------------------------------------------------------------ file I/O


def test_load_datapoints_roundtrip(tmp_path):
    path = tmp_path / "labels.txt"
    path.write_text("# header comment\n0,3\n0,1\n\n0,2\n")
    points = load_datapoints(path, {0: "x0"})
    assert [p.label for p in points] == [3, 1, 2]
    assert all(p.feature == "x0" for p in points)


def test_load_datapoints_rejects_malformed_lines(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0,1,2\n")
    with pytest.raises(ParameterError):
        load_datapoints(path, {0: "x0"})
    path.write_text("7,1\n")
    with pytest.raises(ParameterError):
        load_datapoints(path, {0: "x0"})


# ------------------------------------------------------------- risk estimate


def test_montecarlo_risk_matches_closed_form():
    instance, loss, data = hard_setup(k=4, n=500, seed=9)
    w = np.zeros(4)
    est = excess_risk_montecarlo(
        w,
        instance.sampler,
        loss,
        200_000,
        reference_w=instance.direction,
        stream=RandomnessStream(13),
    )
    exact = 0.5 * instance.alpha  # closed form at w = 0
    assert abs(est.value - exact) < 4 * est.stderr
    assert est.stderr > 0


def test_montecarlo_risk_requires_two_samples():
    instance, loss, _ = hard_setup()
    with pytest.raises(ParameterError):
        excess_risk_montecarlo(
            np.zeros(4), instance.sampler, loss, 1, instance.direction, RandomnessStream(1)
        )
