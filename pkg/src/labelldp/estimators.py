"""Unbiased gradient estimators built from sanitized label subsets.

Each mechanism admits a linear debiasing: the estimate is a fixed linear
combination of the per-label gradients whose coefficients depend only on
subset membership, chosen so the expectation over the mechanism's law equals
the gradient at the true label. ``estimator_moments_bruteforce`` verifies
this by exact enumeration of the output space and also reports the exact
second moment against the analytic bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import EnumerationGuardError, ParameterError
from .mechanisms import (
    BERNOULLI_SUBSET,
    D_SUBSET,
    KRR,
    MechanismParams,
    SanitizedSubset,
    _counter_chunks,
    bernoulli_inclusion_probabilities,
    d_subset_gamma,
    d_subset_likelihood,
    d_subset_zeta,
    krr_likelihood,
    validate_label,
)

#: Enumeration guard: at most this many outputs are enumerated exactly.
ENUMERATION_MAX_OUTPUTS = 1 << 20

# Use compensated chunk merging above this K (float error grows with 2^K terms).
_COMPENSATED_THRESHOLD = 12


@dataclass(frozen=True)
class PerLabelGradients:
    """Gradients of one sample's loss at every candidate label.

    Row k-1 holds the gradient for label k. Row norms must respect the
    declared Lipschitz bound.
    """

    matrix: np.ndarray
    lipschitz_bound: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] < 2:
            raise ParameterError("gradient matrix must be (K, p) with K >= 2")
        if not np.all(np.isfinite(m)):
            raise ParameterError("gradients must be finite")
        if self.lipschitz_bound <= 0:
            raise ParameterError("lipschitz_bound must be positive")
        norms = np.linalg.norm(m, axis=1)
        if np.any(norms > self.lipschitz_bound * (1.0 + 1e-9)):
            raise ParameterError(
                f"gradient norm {norms.max()} exceeds the Lipschitz bound {self.lipschitz_bound}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def num_labels(self) -> int:
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]


def _check_grads(grads: PerLabelGradients, params: MechanismParams) -> None:
    if grads.num_labels != params.num_labels:
        raise ParameterError(
            f"gradient matrix has {grads.num_labels} rows, params have K={params.num_labels}"
        )


def _membership_vector(s: SanitizedSubset) -> np.ndarray:
    mask = np.zeros(s.num_labels)
    if s.members:
        mask[np.fromiter(s.members, dtype=np.int64) - 1] = 1.0
    return mask


def subset_gradient_estimate(
    s: SanitizedSubset, grads: PerLabelGradients, params: MechanismParams
) -> np.ndarray:
    """Debiased gradient estimate from a Bernoulli-subset response.

    ghat = (2(e^eps+1)/(e^eps-1)) * sum_k (1{k in s} - 1/(e^eps+1)) grad_k.
    """
    params.forbid_subset_size()
    _check_grads(grads, params)
    if s.mechanism_tag != BERNOULLI_SUBSET or s.num_labels != params.num_labels:
        raise ParameterError("subset does not match the bernoulli-subset mechanism/params")
    e_eps = math.exp(params.epsilon)
    coeff = 2.0 * (e_eps + 1.0) / (e_eps - 1.0)
    weights = coeff * (_membership_vector(s) - 1.0 / (e_eps + 1.0))
    return weights @ grads.matrix


def d_subset_gradient_estimate(
    s: SanitizedSubset, grads: PerLabelGradients, params: MechanismParams
) -> np.ndarray:
    """Debiased gradient estimate from a d-subset response.

    ghat = (1/(gamma_d - zeta_d)) * sum_k (1{k in s} - zeta_d) grad_k.
    """
    d = params.require_subset_size()
    _check_grads(grads, params)
    if s.mechanism_tag != D_SUBSET or s.num_labels != params.num_labels:
        raise ParameterError("subset does not match the d-subset mechanism/params")
    if len(s.members) != d:
        raise ParameterError(f"d-subset response must have exactly {d} members")
    gamma = d_subset_gamma(params)
    zeta = d_subset_zeta(params)
    weights = (_membership_vector(s) - zeta) / (gamma - zeta)
    return weights @ grads.matrix


def krr_inversion_coefficients(params: MechanismParams) -> tuple[float, float]:
    """Coefficients (a, b) of the unbiased randomized-response inversion.

    The reported label's gradient gets weight a and every other gradient gets
    weight b; unbiasedness under the krr law forces
    a = (e^eps + K - 2)/(e^eps - 1) and b = -1/(e^eps - 1), the standard
    (indicator - q)/(p - q) debiasing.
    """
    e_eps = math.exp(params.epsilon)
    k = params.num_labels
    return (e_eps + k - 2.0) / (e_eps - 1.0), -1.0 / (e_eps - 1.0)


def krr_gradient_estimate(
    s: SanitizedSubset, grads: PerLabelGradients, params: MechanismParams
) -> np.ndarray:
    """Debiased gradient estimate from a randomized-response singleton."""
    params.forbid_subset_size()
    _check_grads(grads, params)
    if s.mechanism_tag != KRR or s.num_labels != params.num_labels:
        raise ParameterError("subset does not match the krr mechanism/params")
    if len(s.members) != 1:
        raise ParameterError("krr responses are singletons")
    (j,) = s.members
    a, b = krr_inversion_coefficients(params)
    return (a - b) * grads.matrix[j - 1] + b * grads.matrix.sum(axis=0)


def second_moment_bound(mechanism: str, params: MechanismParams, lipschitz_bound: float) -> float:
    """Analytic upper bound on E||ghat||^2 for Lipschitz gradient sets.

    bernoulli-subset: L^2 (1 + 4 e^eps (K + e^eps)/(e^eps - 1)^2), the exact
    worst case of the independent-inclusion law.
    d-subset: 16 ((e^eps + K/d)/(e^eps - 1))^2 d L^2 (dominates the exact
    moment with room; constant fixed at 16).
    krr: L^2 ((e^eps + 2K - 3)/(e^eps - 1))^2, attained when the reported
    label's gradient opposes all others.
    """
    if lipschitz_bound <= 0:
        raise ParameterError("lipschitz_bound must be positive")
    e_eps = math.exp(params.epsilon)
    k = params.num_labels
    l2 = lipschitz_bound * lipschitz_bound
    if mechanism == BERNOULLI_SUBSET:
        return l2 * (1.0 + 4.0 * e_eps * (k + e_eps) / (e_eps - 1.0) ** 2)
    if mechanism == D_SUBSET:
        d = params.require_subset_size()
        return 16.0 * ((e_eps + k / d) / (e_eps - 1.0)) ** 2 * d * l2
    if mechanism == KRR:
        return l2 * ((e_eps + 2.0 * k - 3.0) / (e_eps - 1.0)) ** 2
    raise ParameterError(f"no second-moment bound for mechanism {mechanism!r}")


@dataclass(frozen=True)
class MomentReport:
    """Exact estimator moments from output-space enumeration."""

    mechanism: str
    num_labels: int
    subset_size: int | None
    epsilon: float
    mean: np.ndarray
    mean_error: float  # max abs deviation of mean from the true gradient
    second_moment: float
    bound: float
    pairwise_cov: float | None  # d-subset only: theta for a pair k, k' != y

    def to_record(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "K": self.num_labels,
            "d": self.subset_size if self.subset_size is not None else "",
            "epsilon": self.epsilon,
            "second_moment": self.second_moment,
            "bound": self.bound,
            "mean_error": self.mean_error,
        }


def _merge_partials(partials: list[float], num_labels: int) -> float:
    if num_labels > _COMPENSATED_THRESHOLD:
        return math.fsum(partials)
    return float(sum(partials))


def estimator_moments_bruteforce(
    mechanism: str,
    y: int,
    grads: PerLabelGradients,
    params: MechanismParams,
    chunk_size: int = 1 << 16,
) -> MomentReport:
    """Mean and second moment of a gradient estimator by exact enumeration.

    Walks the mechanism's entire output space (binary-counter order for
    bernoulli-subset, lexicographic for d-subset, label order for krr),
    weighting each estimate by its exact likelihood. Partial sums are
    accumulated per chunk and merged in deterministic order with compensated
    summation, so the result does not depend on the partitioning.
    """
    y = validate_label(y, params)
    _check_grads(grads, params)
    k = params.num_labels
    e_eps = math.exp(params.epsilon)
    g = grads.matrix

    mean_partials: list[np.ndarray] = []
    sm_partials: list[float] = []
    norm_partials: list[float] = []

    def consume(weights: np.ndarray, est: np.ndarray) -> None:
        mean_partials.append(weights @ est)
        sm_partials.append(float(weights @ np.einsum("ij,ij->i", est, est)))
        norm_partials.append(float(weights.sum()))

    pairwise_cov = None

    if mechanism == BERNOULLI_SUBSET:
        params.forbid_subset_size()
        if (1 << k) > ENUMERATION_MAX_OUTPUTS:
            raise EnumerationGuardError(f"2^{k} outputs exceed the enumeration guard")
        probs = bernoulli_inclusion_probabilities(y, params)
        coeff = 2.0 * (e_eps + 1.0) / (e_eps - 1.0)
        base = 1.0 / (e_eps + 1.0)
        logp, log1mp = np.log(probs), np.log1p(-probs)
        for member_chunk in _counter_chunks(k, chunk_size):
            m = member_chunk.astype(float)
            weights = np.exp(m @ logp + (1.0 - m) @ log1mp)
            est = coeff * ((m - base) @ g)
            consume(weights, est)
    elif mechanism == D_SUBSET:
        d = params.require_subset_size()
        total = math.comb(k, d)
        if total > ENUMERATION_MAX_OUTPUTS:
            raise EnumerationGuardError(f"C({k},{d}) outputs exceed the enumeration guard")
        gamma, zeta = d_subset_gamma(params), d_subset_zeta(params)
        combos = np.array(list(combinations(range(k), d)), dtype=np.int64)
        m = np.zeros((total, k))
        np.put_along_axis(m, combos, 1.0, axis=1)
        denom = e_eps * math.comb(k - 1, d - 1) + math.comb(k - 1, d)
        weights = np.where(m[:, y - 1] > 0, e_eps, 1.0) / denom
        est = (m - zeta) @ g / (gamma - zeta)
        for start in range(0, total, chunk_size):
            sl = slice(start, min(start + chunk_size, total))
            consume(weights[sl], est[sl])
        others = [i for i in range(k) if i != y - 1]
        if len(others) >= 2:
            k1, k2 = others[0], others[1]
            both = float(weights[(m[:, k1] > 0) & (m[:, k2] > 0)].sum())
            pairwise_cov = both - zeta * zeta
    elif mechanism == KRR:
        params.forbid_subset_size()
        a, b = krr_inversion_coefficients(params)
        m = np.eye(k)
        weights = np.where(np.arange(1, k + 1) == y, e_eps, 1.0) / (e_eps + k - 1.0)
        est = (a - b) * g + b * g.sum(axis=0)
        consume(weights, est)
    else:
        raise ParameterError(f"no brute-force enumeration for mechanism {mechanism!r}")

    total_weight = _merge_partials(norm_partials, k)
    if abs(total_weight - 1.0) > 1e-9:
        raise ParameterError(f"mechanism law does not normalize: sum = {total_weight}")
    if k > _COMPENSATED_THRESHOLD:
        mean = np.array(
            [math.fsum(p[j] for p in mean_partials) for j in range(grads.dimension)]
        )
    else:
        mean = np.sum(mean_partials, axis=0)
    second_moment = _merge_partials(sm_partials, k)
    return MomentReport(
        mechanism=mechanism,
        num_labels=k,
        subset_size=params.subset_size,
        epsilon=params.epsilon,
        mean=mean,
        mean_error=float(np.max(np.abs(mean - g[y - 1]))),
        second_moment=second_moment,
        bound=second_moment_bound(mechanism, params, grads.lipschitz_bound),
        pairwise_cov=pairwise_cov,
    )
