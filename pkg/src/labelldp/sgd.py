"""Projected SGD over sanitized labels: the two-stage learning protocol.

Stage 1 (local randomization): every user's label is randomized exactly once
by the chosen mechanism. Stage 2 (learning): projected SGD runs over the
(feature, sanitized message) pairs only; raw labels are structurally out of
reach of the update loop, which receives just the stage-1 output.

For the ``djw`` vector mechanism the per-user message is the randomized
gradient itself, built in the span of the per-label gradients at the current
iterate; labels are still consumed exactly once, in stage 1, where each
user's label is captured by its local randomizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import ParameterError
from .mechanisms import (
    BERNOULLI_SUBSET,
    D_SUBSET,
    DJW,
    KRR,
    MechanismParams,
    d_subset_gamma,
    d_subset_zeta,
)
from .estimators import krr_inversion_coefficients
from .rng import (
    PURPOSE_RANDOMIZE,
    PURPOSE_SHUFFLE,
    RandomnessStream,
)
from .vector_mechanism import (
    _sample_signs,
    debias_scale,
    randomize_coordinates,
    second_moment_constant,
)

#: Identity "mechanism": ordinary non-private SGD, used as a baseline.
NON_PRIVATE = "none"

TRAIN_MECHANISMS = (BERNOULLI_SUBSET, D_SUBSET, KRR, DJW, NON_PRIVATE)


@dataclass(frozen=True)
class ParameterDomain:
    """Closed Euclidean ball of the given radius, centered at the origin."""

    dimension: int
    radius: float

    def __post_init__(self):
        if self.dimension < 1:
            raise ParameterError("dimension must be >= 1")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ParameterError("radius must be positive and finite")


@dataclass(frozen=True)
class DataPoint:
    feature: Any
    label: int


@dataclass(frozen=True)
class Dataset:
    """Columnar dataset: a label array plus one feature per user.

    ``features`` may be None when every user shares ``shared_feature`` (the
    hard instance has a single fixed feature).
    """

    labels: np.ndarray
    features: Sequence[Any] | None = None
    shared_feature: Any = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ParameterError("labels must be a 1-d array")
        object.__setattr__(self, "labels", labels)
        if self.features is not None and len(self.features) != labels.size:
            raise ParameterError("features and labels disagree in length")


def load_datapoints(path, feature_table: Mapping[int, Any]) -> list[DataPoint]:
    """Read a line-oriented dataset of ``feature_id,label`` records.

    ``feature_table`` maps feature ids to feature values; the hard instance
    only needs the single entry {0: <fixed feature>}.
    """
    points = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParameterError(f"{path}:{lineno}: expected 'feature_id,label'")
            fid, label = int(parts[0]), int(parts[1])
            if fid not in feature_table:
                raise ParameterError(f"{path}:{lineno}: unknown feature id {fid}")
            points.append(DataPoint(feature=feature_table[fid], label=label))
    return points


@dataclass
class LossSpec:
    """A per-sample loss presented through oracles.

    ``gradient_oracle(w, x, k)`` returns the gradient of the loss at label k;
    ``value_oracle(w, x, k)`` its value. ``gradient_matrix(w, x)`` optionally
    returns all K gradients stacked as a (K, p) array (derived from the
    oracle when absent). ``constant_gradients`` declares that the gradient
    matrix depends on neither w nor x, unlocking a vectorized training path.
    ``batch_values(w, features, labels)`` optionally vectorizes evaluation.
    """

    num_labels: int
    dimension: int
    gradient_oracle: Callable[[np.ndarray, Any, int], np.ndarray]
    value_oracle: Callable[[np.ndarray, Any, int], float]
    lipschitz_bound: float
    convex: bool = True
    gradient_matrix: Callable[[np.ndarray, Any], np.ndarray] | None = None
    batch_values: Callable[[np.ndarray, Any, np.ndarray], np.ndarray] | None = None
    constant_gradients: bool = False

    def __post_init__(self):
        if self.num_labels < 2:
            raise ParameterError("num_labels must be >= 2")
        if self.dimension < 1:
            raise ParameterError("dimension must be >= 1")
        if not (self.lipschitz_bound > 0 and math.isfinite(self.lipschitz_bound)):
            raise ParameterError("lipschitz_bound must be positive and finite")
        if not self.convex:
            raise ParameterError("the engine's guarantees require a convex loss")

    def gradients_at(self, w: np.ndarray, x: Any) -> np.ndarray:
        if self.gradient_matrix is not None:
            return np.asarray(self.gradient_matrix(w, x), dtype=float)
        return np.stack(
            [np.asarray(self.gradient_oracle(w, x, k), dtype=float) for k in range(1, self.num_labels + 1)]
        )


@dataclass
class SgdState:
    """Mutable per-step state of the projected SGD recursion."""

    iterate: np.ndarray
    step_index: int
    learning_rate: float
    running_sum: np.ndarray


@dataclass(frozen=True)
class GradientNormSummary:
    """Summary statistics of the estimator norms ||ghat_t|| along one run."""

    count: int
    mean: float
    max: float
    final: float


@dataclass(frozen=True)
class TrainResult:
    averaged_iterate: np.ndarray
    trajectory_summary: GradientNormSummary
    mechanism_tag: str
    seed: int
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    stderr: float


def learning_rate(radius: float, lipschitz_bound: float, n: int, num_labels: int, epsilon: float) -> float:
    """Step size eta = (R/L) sqrt((e^eps - 1)^2 / (2 n (K + e^eps) e^eps))."""
    if radius <= 0 or lipschitz_bound <= 0:
        raise ParameterError("radius and lipschitz_bound must be positive")
    if n < 1 or num_labels < 2:
        raise ParameterError("need n >= 1 and num_labels >= 2")
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    e_eps = math.exp(epsilon)
    return (radius / lipschitz_bound) * math.sqrt(
        (e_eps - 1.0) ** 2 / (2.0 * n * (num_labels + e_eps) * e_eps)
    )


def excess_risk_bound(
    num_labels: int, epsilon: float, n: int, radius: float = 1.0, lipschitz_bound: float = 1.0
) -> float:
    """Theoretical excess-risk rate sqrt(max{K e^eps/(e^eps-1)^2, 1}) RL/sqrt(n)."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    e_eps = math.exp(epsilon)
    factor = max(num_labels * e_eps / (e_eps - 1.0) ** 2, 1.0)
    return math.sqrt(factor) * radius * lipschitz_bound / math.sqrt(n)


def project_ball(w: np.ndarray, domain: ParameterDomain) -> np.ndarray:
    """Euclidean projection onto the domain ball."""
    w = np.asarray(w, dtype=float)
    if w.shape != (domain.dimension,):
        raise ParameterError(f"iterate shape {w.shape} does not match domain dimension")
    if not np.all(np.isfinite(w)):
        raise ParameterError("cannot project a non-finite iterate")
    norm = float(np.linalg.norm(w))
    if norm <= domain.radius:
        return w
    return w * (domain.radius / norm)


# ---------------------------------------------------------------------------
# Stage 1: local randomization (bulk, one derived substream per trial)
# ---------------------------------------------------------------------------


def _extract_labels_and_features(data) -> tuple[np.ndarray, Sequence[Any] | None, Any]:
    """Read each user's label exactly once; no other code touches labels."""
    if isinstance(data, Dataset):
        return data.labels.copy(), data.features, data.shared_feature
    points = list(data)
    if not points:
        raise ParameterError("empty dataset")
    if isinstance(points[0], (int, np.integer)):
        return np.asarray(points, dtype=np.int64), None, None
    labels = np.fromiter((dp.label for dp in points), dtype=np.int64, count=len(points))
    return labels, [dp.feature for dp in points], None


def _bulk_bernoulli_memberships(
    labels0: np.ndarray, params: MechanismParams, gen: np.random.Generator
) -> np.ndarray:
    n, k = labels0.size, params.num_labels
    q = 1.0 / (math.exp(params.epsilon) + 1.0)
    members = np.empty((n, k), dtype=bool)
    chunk = max(1, (1 << 22) // k)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        probs = np.full((sl.stop - sl.start, k), q)
        probs[np.arange(sl.stop - sl.start), labels0[sl]] = 0.5
        members[sl] = gen.random((sl.stop - sl.start, k)) < probs
    return members


def _bulk_d_subset_memberships(
    labels0: np.ndarray, params: MechanismParams, gen: np.random.Generator
) -> np.ndarray:
    """Vectorized d-subset sampling: include y with prob gamma_d, fill the
    rest uniformly without replacement (order statistics of iid uniforms)."""
    n, k = labels0.size, params.num_labels
    d = params.require_subset_size()
    gamma = d_subset_gamma(params)
    include_y = gen.random(n) < gamma
    ranks = gen.random((n, k))
    ranks[np.arange(n), labels0] = np.inf  # the true label never competes
    order = np.argsort(ranks, axis=1)
    members = np.zeros((n, k), dtype=bool)
    rows = np.arange(n)
    # smallest d-1 (resp. d) uniforms form a uniform subset of the others
    for j in range(d - 1):
        members[rows, order[:, j]] = True
    last = order[:, d - 1]
    members[rows[~include_y], last[~include_y]] = True
    members[rows[include_y], labels0[include_y]] = True
    return members


def _bulk_krr_outputs(
    labels0: np.ndarray, params: MechanismParams, gen: np.random.Generator
) -> np.ndarray:
    n, k = labels0.size, params.num_labels
    e_eps = math.exp(params.epsilon)
    keep = gen.random(n) < e_eps / (e_eps + k - 1.0)
    alt = gen.integers(0, k - 1, size=n)
    alt = np.where(alt >= labels0, alt + 1, alt)
    return np.where(keep, labels0, alt)


# ---------------------------------------------------------------------------
# Stage 2: learning over sanitized messages
# ---------------------------------------------------------------------------


def _estimator_weights(mechanism: str, params: MechanismParams) -> tuple[float, float]:
    """(member coefficient, offset) such that ghat = coeff * (m - offset) @ G."""
    e_eps = math.exp(params.epsilon)
    if mechanism == BERNOULLI_SUBSET:
        return 2.0 * (e_eps + 1.0) / (e_eps - 1.0), 1.0 / (e_eps + 1.0)
    if mechanism == D_SUBSET:
        gamma, zeta = d_subset_gamma(params), d_subset_zeta(params)
        return 1.0 / (gamma - zeta), zeta
    raise ParameterError(mechanism)


def _orthonormal_span(g: np.ndarray) -> np.ndarray:
    """Orthonormal basis (p, m) of the row span of the (K, p) gradient matrix."""
    u, s, _ = np.linalg.svd(g.T, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ParameterError("cannot randomize a gradient in an all-zero span")
    rank = int(np.sum(s > s[0] * 1e-10))
    return u[:, :rank]


def _run_recursion(
    estimates: np.ndarray,
    eta: float,
    w0: np.ndarray,
    domain: ParameterDomain,
    want_iterates: bool,
) -> tuple[np.ndarray, float, np.ndarray | None]:
    """The projected SGD recursion given precomputed estimates (n, p).

    When the unconstrained trajectory never leaves the ball the projection
    is the identity, so the whole recursion collapses to a cumulative sum;
    otherwise fall back to the stepwise loop.
    """
    radius2 = domain.radius * domain.radius
    walk = w0 - eta * np.cumsum(estimates, axis=0)
    norms2 = np.einsum("ij,ij->i", walk, walk)
    max_norm2 = float(norms2.max())
    if max_norm2 <= radius2:
        return walk.mean(axis=0), math.sqrt(max_norm2), walk if want_iterates else None
    del walk, norms2
    w = w0.copy()
    running = np.zeros_like(w)
    max_norm2 = 0.0
    iterates = np.empty_like(estimates) if want_iterates else None
    for t, row in enumerate(estimates):
        w -= eta * row
        nrm2 = float(w @ w)
        if nrm2 > radius2:
            w *= domain.radius / math.sqrt(nrm2)
            nrm2 = radius2
        if nrm2 > max_norm2:
            max_norm2 = nrm2
        running += w
        if want_iterates:
            iterates[t] = w
    return running / estimates.shape[0], math.sqrt(max_norm2), iterates


def train(
    data,
    loss: LossSpec,
    domain: ParameterDomain,
    params: MechanismParams,
    mechanism: str,
    seed: int,
    initial: np.ndarray | None = None,
    shuffle: bool = False,
    record_iterates: bool = False,
) -> TrainResult:
    """Two-stage private training; returns the averaged iterate.

    Runs n steps of w_t = Proj(w_{t-1} - eta ghat_t) over the sanitized
    messages, one step per user in dataset order (optionally shuffled), with
    eta from :func:`learning_rate`, and returns wbar = (1/n) sum_t w_t.
    """
    if mechanism not in TRAIN_MECHANISMS:
        raise ParameterError(f"unknown mechanism {mechanism!r}")
    if loss.num_labels != params.num_labels:
        raise ParameterError("loss and params disagree on the number of labels")
    if loss.dimension != domain.dimension:
        raise ParameterError("loss and domain disagree on the dimension")
    if mechanism == D_SUBSET:
        params.require_subset_size()
    else:
        params.forbid_subset_size()

    labels, features, shared_feature = _extract_labels_and_features(data)
    n = labels.size
    if n == 0:
        raise ParameterError("empty dataset")
    k = params.num_labels
    if labels.min() < 1 or labels.max() > k:
        raise ParameterError(f"labels must lie in [1, {k}]")

    stream = RandomnessStream(seed)
    if shuffle:
        perm = stream.derive(PURPOSE_SHUFFLE).generator.permutation(n)
        labels = labels[perm]
        if features is not None:
            features = [features[i] for i in perm]

    if initial is None:
        w0 = np.zeros(domain.dimension)
    else:
        w0 = np.asarray(initial, dtype=float).copy()
        if w0.shape != (domain.dimension,):
            raise ParameterError("initial iterate has the wrong dimension")
        if float(np.linalg.norm(w0)) > domain.radius * (1.0 + 1e-12):
            raise ParameterError("initial iterate lies outside the domain")

    eta = learning_rate(domain.radius, loss.lipschitz_bound, n, k, params.epsilon)
    labels0 = labels - 1  # 0-based for indexing; stays inside this function
    gen = stream.derive(PURPOSE_RANDOMIZE).generator

    # Stage 1: one pass of local randomization. After this block the labels
    # array is never consulted again except by the djw/non-private paths,
    # whose stage-1 message *is* the captured label (read here, once).
    if mechanism == BERNOULLI_SUBSET:
        messages: Any = _bulk_bernoulli_memberships(labels0, params, gen)
    elif mechanism == D_SUBSET:
        messages = _bulk_d_subset_memberships(labels0, params, gen)
    elif mechanism == KRR:
        messages = _bulk_krr_outputs(labels0, params, gen)
    else:  # djw and the non-private baseline carry the label itself
        messages = labels0
    del labels, labels0

    metadata: dict = {
        "eta": eta,
        "n": n,
        "non_interactive": mechanism != DJW,
    }

    if loss.constant_gradients:
        feature0 = shared_feature if features is None else features[0]
        g = loss.gradients_at(w0, feature0)
        estimates = _precompute_estimates(mechanism, messages, g, params, gen, metadata)
        norms = np.linalg.norm(estimates, axis=1)
        wbar, max_norm, iterates = _run_recursion(estimates, eta, w0, domain, record_iterates)
        if record_iterates:
            metadata["iterates"] = iterates
    else:
        wbar, norms, max_norm, iterates = _general_loop(
            mechanism, messages, features, shared_feature, loss, domain, params,
            eta, w0, gen, metadata, record_iterates,
        )
        if record_iterates:
            metadata["iterates"] = iterates

    metadata["max_iterate_norm"] = max_norm
    summary = GradientNormSummary(
        count=n,
        mean=float(np.mean(norms)),
        max=float(np.max(norms)),
        final=float(norms[-1]),
    )
    return TrainResult(
        averaged_iterate=wbar,
        trajectory_summary=summary,
        mechanism_tag=mechanism,
        seed=int(seed),
        metadata=metadata,
    )


def _precompute_estimates(
    mechanism: str,
    messages,
    g: np.ndarray,
    params: MechanismParams,
    gen: np.random.Generator,
    metadata: dict,
) -> np.ndarray:
    """All n gradient estimates at once (constant-gradient losses only)."""
    colsum = g.sum(axis=0)
    if mechanism in (BERNOULLI_SUBSET, D_SUBSET):
        coeff, offset = _estimator_weights(mechanism, params)
        return coeff * (messages.astype(float) @ g - offset * colsum)
    if mechanism == KRR:
        a, b = krr_inversion_coefficients(params)
        return (a - b) * g[messages] + b * colsum
    if mechanism == NON_PRIVATE:
        return g[messages]
    # djw: shared basis (gradients are constant), per-user randomized coords
    basis = _orthonormal_span(g)
    rank = basis.shape[1]
    l1 = math.sqrt(rank) * float(np.linalg.norm(g, axis=1).max())
    coords = g[messages] @ basis
    vertex_prob = 0.5 + coords / (2.0 * l1)
    signs = np.where(gen.random(coords.shape) < vertex_prob, 1.0, -1.0)
    z = _sample_signs(signs, params.epsilon, gen)
    scale = debias_scale(rank, params.epsilon, l1)
    metadata.update(
        {
            "l1_bound": l1,
            "basis_rank": rank,
            "debias_scale": scale,
            "second_moment_constant": second_moment_constant(rank, params.epsilon),
        }
    )
    return (scale * z) @ basis.T


def _general_loop(
    mechanism: str,
    messages,
    features,
    shared_feature,
    loss: LossSpec,
    domain: ParameterDomain,
    params: MechanismParams,
    eta: float,
    w0: np.ndarray,
    gen: np.random.Generator,
    metadata: dict,
    record_iterates: bool,
):
    """Per-step path for losses whose gradients depend on w or x."""
    n = len(messages)
    state = SgdState(iterate=w0.copy(), step_index=0, learning_rate=eta,
                     running_sum=np.zeros_like(w0))
    norms = np.empty(n)
    max_norm = 0.0
    iterates = np.empty((n, w0.size)) if record_iterates else None
    coeff_offset = (
        _estimator_weights(mechanism, params)
        if mechanism in (BERNOULLI_SUBSET, D_SUBSET)
        else None
    )
    djw_meta_done = False
    for t in range(n):
        x = shared_feature if features is None else features[t]
        g = loss.gradients_at(state.iterate, x)
        if coeff_offset is not None:
            coeff, offset = coeff_offset
            ghat = coeff * (messages[t].astype(float) @ g - offset * g.sum(axis=0))
        elif mechanism == KRR:
            a, b = krr_inversion_coefficients(params)
            ghat = (a - b) * g[messages[t]] + b * g.sum(axis=0)
        elif mechanism == NON_PRIVATE:
            ghat = g[messages[t]]
        else:  # djw: randomize this step's gradient in the current span
            basis = _orthonormal_span(g)
            rank = basis.shape[1]
            l1 = math.sqrt(rank) * float(np.linalg.norm(g, axis=1).max())
            coords = basis.T @ g[messages[t]]
            stream_like = _GeneratorStream(gen)
            chat = randomize_coordinates(coords, l1, params.epsilon, stream_like)
            ghat = chat @ basis.T
            if not djw_meta_done:
                metadata.update(
                    {
                        "l1_bound": l1,
                        "basis_rank": rank,
                        "debias_scale": debias_scale(rank, params.epsilon, l1),
                        "second_moment_constant": second_moment_constant(rank, params.epsilon),
                    }
                )
                djw_meta_done = True
        norms[t] = float(np.linalg.norm(ghat))
        state.iterate = project_ball(state.iterate - eta * ghat, domain)
        state.step_index = t + 1
        state.running_sum += state.iterate
        nrm = float(np.linalg.norm(state.iterate))
        if nrm > max_norm:
            max_norm = nrm
        if record_iterates:
            iterates[t] = state.iterate
    wbar = state.running_sum / n
    return wbar, norms, max_norm, iterates


class _GeneratorStream:
    """Adapter presenting an existing numpy Generator as a RandomnessStream."""

    def __init__(self, gen: np.random.Generator):
        self.generator = gen


# ---------------------------------------------------------------------------
# Risk evaluation
# ---------------------------------------------------------------------------


def excess_risk_montecarlo(
    w: np.ndarray,
    sampler: Callable[[np.random.Generator, int], tuple[Sequence[Any] | None, np.ndarray]],
    loss: LossSpec,
    num_samples: int,
    reference_w: np.ndarray,
    stream: RandomnessStream,
) -> RiskEstimate:
    """Empirical mean of loss(w, z) - loss(reference_w, z) over fresh draws.

    ``sampler(generator, size)`` returns (features, labels); features may be
    None when the loss ignores them. Returns the estimate with its standard
    error.
    """
    if num_samples < 2:
        raise ParameterError("need at least 2 samples for a standard error")
    gen = stream.generator
    features, labels = sampler(gen, num_samples)
    w = np.asarray(w, dtype=float)
    reference_w = np.asarray(reference_w, dtype=float)
    if loss.batch_values is not None:
        diffs = np.asarray(loss.batch_values(w, features, labels), dtype=float) - np.asarray(
            loss.batch_values(reference_w, features, labels), dtype=float
        )
    else:
        diffs = np.empty(num_samples)
        for i in range(num_samples):
            x = None if features is None else features[i]
            k = int(labels[i])
            diffs[i] = loss.value_oracle(w, x, k) - loss.value_oracle(reference_w, x, k)
    value = float(diffs.mean())
    stderr = float(diffs.std(ddof=1) / math.sqrt(num_samples))
    return RiskEstimate(value=value, stderr=stderr)
