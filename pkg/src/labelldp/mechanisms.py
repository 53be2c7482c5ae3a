"""Label randomizers satisfying local label differential privacy.

A randomizer R maps a label y in [K] to a random subset S of [K] such that
for every pair of labels y, y' and every output subset s,

    P[R(y) = s] <= exp(epsilon) * P[R(y') = s].

Three discrete mechanisms live here:

* ``bernoulli-subset``: every label k joins the output independently, with
  probability 1/2 for the true label and 1/(e^eps + 1) otherwise.
* ``d-subset``: the output has size exactly d; subsets containing the true
  label are e^eps times as likely as those that do not.
* ``krr``: K-ary randomized response, a singleton output kept truthful with
  probability e^eps / (e^eps + K - 1).

Each mechanism has an exact likelihood function, and ``verify_ldp_ratio``
checks the privacy ratio by enumerating the whole output space against those
likelihoods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterator

import numpy as np

from .errors import EnumerationGuardError, ParameterError
from .rng import RandomnessStream

MIN_EPSILON = 1e-6

BERNOULLI_SUBSET = "bernoulli-subset"
D_SUBSET = "d-subset"
KRR = "krr"
DJW = "djw"

#: Mechanisms whose output space is a finite family of label subsets.
SUBSET_MECHANISMS = (BERNOULLI_SUBSET, D_SUBSET, KRR)

#: Largest K for which exact output-space enumeration is permitted.
ENUMERATION_MAX_LABELS = 20

# Switch likelihood products to log-space accumulation above this K.
_LOG_SPACE_THRESHOLD = 16


@dataclass(frozen=True)
class MechanismParams:
    """Shared parameters of the label randomizers.

    ``subset_size`` (d) is required by the d-subset mechanism and must be
    absent for the others. The d-subset analysis requires d <= 2K/3.
    """

    epsilon: float
    num_labels: int
    subset_size: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.epsilon) or self.epsilon < MIN_EPSILON:
            raise ParameterError(
                f"epsilon must be finite and >= {MIN_EPSILON}, got {self.epsilon}"
            )
        if not isinstance(self.num_labels, int) or self.num_labels < 2:
            raise ParameterError(f"num_labels must be an integer >= 2, got {self.num_labels}")
        if self.subset_size is not None:
            d, k = self.subset_size, self.num_labels
            if not isinstance(d, int) or not 1 <= d <= k - 1:
                raise ParameterError(f"subset_size must be an integer in [1, {k - 1}], got {d}")
            if 3 * d > 2 * k:
                raise ParameterError(
                    f"subset_size {d} violates the d <= 2K/3 requirement for K={k}"
                )

    def require_subset_size(self) -> int:
        if self.subset_size is None:
            raise ParameterError("subset_size is required for the d-subset mechanism")
        return self.subset_size

    def forbid_subset_size(self) -> None:
        if self.subset_size is not None:
            raise ParameterError("subset_size is only meaningful for the d-subset mechanism")


@dataclass(frozen=True)
class SanitizedSubset:
    """Output of a label randomizer: a subset of [K] plus provenance.

    ``members`` is serialized in ascending order wherever an ordering is
    needed. The subset remembers K so downstream consumers can detect
    parameter mismatches.
    """

    members: frozenset[int] = field()
    mechanism_tag: str = field()
    num_labels: int = field()

    def __post_init__(self):
        if self.mechanism_tag not in SUBSET_MECHANISMS:
            raise ParameterError(f"unknown mechanism tag {self.mechanism_tag!r}")
        object.__setattr__(self, "members", frozenset(int(m) for m in self.members))
        if any(not 1 <= m <= self.num_labels for m in self.members):
            raise ParameterError(
                f"subset members must lie in [1, {self.num_labels}], got {sorted(self.members)}"
            )

    def sorted_members(self) -> tuple[int, ...]:
        return tuple(sorted(self.members))


def validate_label(y: int, params: MechanismParams) -> int:
    y = int(y)
    if not 1 <= y <= params.num_labels:
        raise ParameterError(f"label {y} out of range [1, {params.num_labels}]")
    return y


def _check_subset(s: SanitizedSubset, params: MechanismParams, expected_tag: str) -> None:
    if s.mechanism_tag != expected_tag:
        raise ParameterError(f"expected a {expected_tag!r} subset, got {s.mechanism_tag!r}")
    if s.num_labels != params.num_labels:
        raise ParameterError(
            f"subset was produced for K={s.num_labels}, params have K={params.num_labels}"
        )


# ---------------------------------------------------------------------------
# Bernoulli subset mechanism
# ---------------------------------------------------------------------------


def bernoulli_inclusion_probabilities(y: int, params: MechanismParams) -> np.ndarray:
    """Per-label inclusion probabilities given true label y.

    P[k in S] = 1/2 for k = y and 1/(e^eps + 1) otherwise.
    """
    y = validate_label(y, params)
    q = 1.0 / (math.exp(params.epsilon) + 1.0)
    probs = np.full(params.num_labels, q)
    probs[y - 1] = 0.5
    return probs


def bernoulli_subset_randomize(
    y: int, params: MechanismParams, rng: RandomnessStream
) -> SanitizedSubset:
    """Draw one Bernoulli-subset response for label y."""
    params.forbid_subset_size()
    probs = bernoulli_inclusion_probabilities(y, params)
    draws = rng.generator.random(params.num_labels) < probs
    members = frozenset(int(i) + 1 for i in np.nonzero(draws)[0])
    return SanitizedSubset(members, BERNOULLI_SUBSET, params.num_labels)


def bernoulli_subset_likelihood(s: SanitizedSubset, y: int, params: MechanismParams) -> float:
    """Exact probability P[R(y) = s] under the Bernoulli-subset law."""
    params.forbid_subset_size()
    _check_subset(s, params, BERNOULLI_SUBSET)
    probs = bernoulli_inclusion_probabilities(y, params)
    member_mask = np.zeros(params.num_labels, dtype=bool)
    if s.members:
        member_mask[np.fromiter(s.members, dtype=np.int64) - 1] = True
    factors = np.where(member_mask, probs, 1.0 - probs)
    if params.num_labels > _LOG_SPACE_THRESHOLD:
        return float(math.exp(np.sum(np.log(factors))))
    return float(np.prod(factors))


# ---------------------------------------------------------------------------
# d-subset mechanism
# ---------------------------------------------------------------------------


def default_subset_size(num_labels: int, epsilon: float) -> int:
    """Recommended output size d = ceil(K / (2 e^eps)), at least 1."""
    return max(1, math.ceil(num_labels / (2.0 * math.exp(epsilon))))


def d_subset_gamma(params: MechanismParams) -> float:
    """gamma_d = P[y in S]: inclusion probability of the true label."""
    d = params.require_subset_size()
    k = params.num_labels
    return 1.0 / (1.0 + math.exp(-params.epsilon) * (k - d) / d)


def d_subset_zeta(params: MechanismParams) -> float:
    """zeta_d = P[k in S] for k != y; equals (d - gamma_d) / (K - 1)."""
    d = params.require_subset_size()
    return (d - d_subset_gamma(params)) / (params.num_labels - 1)


def d_subset_randomize(y: int, params: MechanismParams, rng: RandomnessStream) -> SanitizedSubset:
    """Draw one d-subset response for label y.

    Includes y with probability gamma_d, then fills the remaining slots
    uniformly without replacement from the other labels. This two-stage
    sampler induces exactly the target law: subsets containing y each have
    probability e^eps / D and the rest probability 1 / D.
    """
    y = validate_label(y, params)
    d = params.require_subset_size()
    gen = rng.generator
    others = np.array([k for k in range(1, params.num_labels + 1) if k != y])
    if gen.random() < d_subset_gamma(params):
        chosen = gen.choice(others, size=d - 1, replace=False)
        members = frozenset(int(c) for c in chosen) | {y}
    else:
        chosen = gen.choice(others, size=d, replace=False)
        members = frozenset(int(c) for c in chosen)
    return SanitizedSubset(members, D_SUBSET, params.num_labels)


def d_subset_likelihood(s: SanitizedSubset, y: int, params: MechanismParams) -> float:
    """Exact probability P[R(y) = s] under the d-subset law.

    Zero for subsets of the wrong size; otherwise e^eps / D if y in s and
    1 / D if not, with D = e^eps * C(K-1, d-1) + C(K-1, d).
    """
    y = validate_label(y, params)
    d = params.require_subset_size()
    _check_subset(s, params, D_SUBSET)
    if len(s.members) != d:
        return 0.0
    k = params.num_labels
    e_eps = math.exp(params.epsilon)
    denom = e_eps * math.comb(k - 1, d - 1) + math.comb(k - 1, d)
    return (e_eps if y in s.members else 1.0) / denom


# ---------------------------------------------------------------------------
# K-ary randomized response
# ---------------------------------------------------------------------------


def krr_randomize(y: int, params: MechanismParams, rng: RandomnessStream) -> SanitizedSubset:
    """K-ary randomized response: keep y with probability e^eps/(e^eps+K-1),
    otherwise report a uniformly random other label. Output is a singleton."""
    y = validate_label(y, params)
    params.forbid_subset_size()
    k = params.num_labels
    e_eps = math.exp(params.epsilon)
    gen = rng.generator
    if gen.random() < e_eps / (e_eps + k - 1):
        out = y
    else:
        out = int(gen.integers(1, k))  # uniform over [1, K-1]
        if out >= y:
            out += 1
    return SanitizedSubset(frozenset((out,)), KRR, k)


def krr_likelihood(s: SanitizedSubset, y: int, params: MechanismParams) -> float:
    """Exact probability P[R(y) = s] under randomized response."""
    y = validate_label(y, params)
    params.forbid_subset_size()
    _check_subset(s, params, KRR)
    if len(s.members) != 1:
        return 0.0
    e_eps = math.exp(params.epsilon)
    denom = e_eps + params.num_labels - 1
    return (e_eps if y in s.members else 1.0) / denom


# ---------------------------------------------------------------------------
# Privacy verification by exhaustive enumeration
# ---------------------------------------------------------------------------

LikelihoodFn = Callable[[tuple[int, ...], int, MechanismParams], float]


def _counter_chunks(num_labels: int, chunk_size: int = 1 << 16) -> Iterator[np.ndarray]:
    """Membership matrices for all 2^K subsets in binary-counter order.

    Bit i of the counter governs label i+1, so row r of the full matrix is the
    subset {i+1 : bit i of r set}.
    """
    total = 1 << num_labels
    bit_cols = np.arange(num_labels, dtype=np.uint32)
    for start in range(0, total, chunk_size):
        rows = np.arange(start, min(start + chunk_size, total), dtype=np.uint32)
        yield ((rows[:, None] >> bit_cols) & 1).astype(bool)


def _ratio_from_likelihood_rows(lik: np.ndarray) -> float:
    """Max likelihood ratio over label pairs, rows = outputs, cols = labels.

    Outputs impossible under every label are skipped; an output possible under
    one label but not another makes the ratio infinite.
    """
    lik = np.asarray(lik, dtype=float)
    if np.any(lik < 0):
        raise ParameterError("likelihoods must be non-negative")
    row_max = lik.max(axis=1)
    live = row_max > 0.0
    if not np.any(live):
        return 0.0
    row_min = lik[live].min(axis=1)
    if np.any(row_min == 0.0):
        return math.inf
    return float(np.max(row_max[live] / row_min))


def _enumerate_with_fn(
    supports: list[tuple[int, ...]],
    params: MechanismParams,
    likelihood_fn: LikelihoodFn,
) -> float:
    k = params.num_labels
    lik = np.empty((len(supports), k))
    for r, members in enumerate(supports):
        for y in range(1, k + 1):
            lik[r, y - 1] = likelihood_fn(members, y, params)
    return _ratio_from_likelihood_rows(lik)


def verify_ldp_ratio(
    mechanism: str,
    params: MechanismParams,
    likelihood_fn: LikelihoodFn | None = None,
) -> float:
    """Worst-case likelihood ratio of a mechanism over its whole output space.

    Enumerates every output subset and every label pair and returns
    max P[R(y)=s] / P[R(y')=s]. A correct mechanism yields exactly e^eps.
    ``likelihood_fn`` overrides the mechanism's own likelihood (test hook for
    corrupted laws); it receives (sorted member tuple, label, params).

    Subset mechanisms are guarded at K <= 20 to keep enumeration exact and
    bounded; exceeding the guard raises EnumerationGuardError.
    """
    k = params.num_labels
    if mechanism == BERNOULLI_SUBSET:
        params.forbid_subset_size()
        if k > ENUMERATION_MAX_LABELS:
            raise EnumerationGuardError(
                f"bernoulli-subset enumeration requires K <= {ENUMERATION_MAX_LABELS}, got {k}"
            )
        if likelihood_fn is not None:
            supports = [
                tuple(i + 1 for i in range(k) if (r >> i) & 1) for r in range(1 << k)
            ]
            return _enumerate_with_fn(supports, params, likelihood_fn)
        log_p = np.empty((k, k))  # row y-1: per-label log inclusion probabilities
        log_1mp = np.empty((k, k))
        for y in range(1, k + 1):
            probs = bernoulli_inclusion_probabilities(y, params)
            log_p[y - 1] = np.log(probs)
            log_1mp[y - 1] = np.log1p(-probs)
        worst = 0.0
        for member_chunk in _counter_chunks(k):
            m = member_chunk.astype(float)
            loglik = m @ log_p.T + (1.0 - m) @ log_1mp.T
            spread = loglik.max(axis=1) - loglik.min(axis=1)
            worst = max(worst, float(np.exp(spread.max())))
        return worst

    if mechanism == D_SUBSET:
        d = params.require_subset_size()
        if k > ENUMERATION_MAX_LABELS:
            raise EnumerationGuardError(
                f"d-subset enumeration requires K <= {ENUMERATION_MAX_LABELS}, got {k}"
            )
        supports = list(combinations(range(1, k + 1), d))
        if likelihood_fn is not None:
            return _enumerate_with_fn(supports, params, likelihood_fn)
        lik = np.empty((len(supports), k))
        for r, members in enumerate(supports):
            subset = SanitizedSubset(frozenset(members), D_SUBSET, k)
            for y in range(1, k + 1):
                lik[r, y - 1] = d_subset_likelihood(subset, y, params)
        return _ratio_from_likelihood_rows(lik)

    if mechanism == KRR:
        params.forbid_subset_size()
        supports = [(j,) for j in range(1, k + 1)]
        if likelihood_fn is not None:
            return _enumerate_with_fn(supports, params, likelihood_fn)
        lik = np.empty((k, k))
        for r, members in enumerate(supports):
            subset = SanitizedSubset(frozenset(members), KRR, k)
            for y in range(1, k + 1):
                lik[r, y - 1] = krr_likelihood(subset, y, params)
        return _ratio_from_likelihood_rows(lik)

    raise ParameterError(
        f"verify_ldp_ratio supports {SUBSET_MECHANISMS}, got {mechanism!r}"
    )
