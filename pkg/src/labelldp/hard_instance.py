"""Lower-bound construction: a linear loss over a near-uniform label law.

The label distribution perturbs the uniform vector by +/- gamma in a
balanced pattern; the loss is linear in w, ignores features, and has its
minimizer at the unit direction b of the perturbation. Excess risk then has
the exact closed form (alpha/2)(1 - <w, b>) with alpha = gamma * sqrt(K),
which the benchmark uses instead of Monte Carlo wherever possible, and
estimating the distribution reduces isometrically to estimating b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParameterError
from .sgd import LossSpec

_SUM_TOL = 1e-12
_DIRECTION_TOL = 1e-10


@dataclass(frozen=True)
class LabelDistribution:
    """A probability vector over K labels, tagged with its perturbation size."""

    probabilities: np.ndarray
    gamma: float

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.ndim != 1 or probs.size < 2:
            raise ParameterError("probabilities must be a vector of length >= 2")
        if np.any(probs < 0):
            raise ParameterError("probabilities must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > _SUM_TOL:
            raise ParameterError("probabilities must sum to 1")
        if not (0.0 <= self.gamma <= 0.5):
            raise ParameterError("gamma out of range")
        object.__setattr__(self, "probabilities", probs)

    @property
    def num_labels(self) -> int:
        return self.probabilities.size


def hard_gamma(num_labels: int, n: int, epsilon: float, c_gamma: float = 0.25) -> float:
    """Perturbation size min{1/(2K), c_gamma * sqrt(e^eps / ((e^eps-1)^2 n))}."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    if c_gamma < 0:
        raise ParameterError("c_gamma must be nonnegative")
    e_eps = math.exp(epsilon)
    return min(
        1.0 / (2.0 * num_labels),
        c_gamma * math.sqrt(e_eps / ((e_eps - 1.0) ** 2 * n)),
    )


def _default_pattern(num_labels: int) -> np.ndarray:
    pattern = np.zeros(num_labels, dtype=np.int64)
    pattern[0::2] = 1
    return pattern


def make_hard_theta(
    num_labels: int,
    n: int,
    epsilon: float,
    sign_pattern=None,
    c_gamma: float = 0.25,
) -> LabelDistribution:
    """Balanced +/-gamma perturbation of the uniform distribution.

    ``sign_pattern`` is a 0/1 vector with exactly K/2 ones (alternating by
    default); entry i of the output is 1/K + gamma where the pattern is 1 and
    1/K - gamma elsewhere, so the vector sums to 1 exactly.
    """
    if num_labels < 2 or num_labels % 2 != 0:
        raise ParameterError("num_labels must be an even integer >= 2")
    if sign_pattern is None:
        pattern = _default_pattern(num_labels)
    else:
        pattern = np.asarray(sign_pattern, dtype=np.int64)
        if pattern.shape != (num_labels,) or not np.all((pattern == 0) | (pattern == 1)):
            raise ParameterError("sign_pattern must be a 0/1 vector of length K")
        if int(pattern.sum()) * 2 != num_labels:
            raise ParameterError("sign_pattern must have exactly K/2 ones")
    gamma = hard_gamma(num_labels, n, epsilon, c_gamma)
    probs = 1.0 / num_labels + gamma * np.where(pattern == 1, 1.0, -1.0)
    return LabelDistribution(probabilities=probs, gamma=gamma)


@dataclass(frozen=True)
class HardInstance:
    """The full construction: distribution, optimizer direction, and sampler.

    ``direction`` is the unit vector b with theta = 1/K + alpha/sqrt(K) * ...
    i.e. theta - 1/K = alpha * b / ... normalized so ||b|| = 1 and
    alpha = gamma sqrt(K). ``sampler(gen, size)`` draws (features, labels)
    with labels iid from theta; features are None (the loss ignores them).
    """

    distribution: LabelDistribution
    direction: np.ndarray
    alpha: float
    num_labels: int
    fixed_feature: int
    sampler: Callable[[np.random.Generator, int], tuple[None, np.ndarray]]

    def __post_init__(self):
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > _DIRECTION_TOL:
            raise ParameterError("direction must be a unit vector")


def make_hard_instance(
    num_labels: int,
    n: int,
    epsilon: float,
    sign_pattern=None,
    c_gamma: float = 0.25,
) -> HardInstance:
    theta = make_hard_theta(num_labels, n, epsilon, sign_pattern, c_gamma)
    if theta.gamma == 0.0:
        raise ParameterError("gamma is zero: the instance would be degenerate")
    alpha = theta.gamma * math.sqrt(num_labels)
    direction = (theta.probabilities - 1.0 / num_labels) / alpha
    probs = theta.probabilities

    def sampler(gen: np.random.Generator, size: int):
        labels = gen.choice(num_labels, size=size, p=probs) + 1
        return None, labels

    return HardInstance(
        distribution=theta,
        direction=direction,
        alpha=alpha,
        num_labels=num_labels,
        fixed_feature=0,
        sampler=sampler,
    )


def linear_loss(num_labels: int) -> LossSpec:
    """loss(w; (x, y)) = -(1/2) <w, e_y - (1/K) 1>, Lipschitz with L = 1.

    Per-label gradients are the constant rows -(1/2)(e_k - 1/K), which sum
    to zero across k; features are ignored.
    """
    if num_labels < 2:
        raise ParameterError("num_labels must be >= 2")
    k = num_labels
    g = -0.5 * (np.eye(k) - 1.0 / k)

    def gradient_oracle(w, x, label):
        return g[label - 1]

    def value_oracle(w, x, label):
        w = np.asarray(w, dtype=float)
        return -0.5 * (w[label - 1] - float(w.mean()))

    def gradient_matrix(w, x):
        return g

    def batch_values(w, features, labels):
        w = np.asarray(w, dtype=float)
        return -0.5 * (w[np.asarray(labels) - 1] - w.mean())

    return LossSpec(
        num_labels=k,
        dimension=k,
        gradient_oracle=gradient_oracle,
        value_oracle=value_oracle,
        lipschitz_bound=1.0,
        convex=True,
        gradient_matrix=gradient_matrix,
        batch_values=batch_values,
        constant_gradients=True,
    )


def closed_form_excess_risk(w: np.ndarray, instance: HardInstance) -> float:
    """Exact excess population risk (alpha/2)(1 - <w, b>) of a feasible w."""
    w = np.asarray(w, dtype=float)
    if w.shape != (instance.num_labels,):
        raise ParameterError("w has the wrong dimension for this instance")
    if float(np.linalg.norm(w)) > 1.0 + 1e-9:
        raise ParameterError("w lies outside the unit ball")
    return 0.5 * instance.alpha * (1.0 - float(w @ instance.direction))


def reduce_to_theta_hat(w_hat: np.ndarray, num_labels: int, gamma: float) -> np.ndarray:
    """Distribution estimate theta_hat = 1/K + gamma sqrt(K) w_hat.

    Satisfies ||theta_hat - theta||_2 = alpha ||w_hat - b||_2 exactly. The
    output is not clipped to the simplex; entries may be negative when w_hat
    is far from b.
    """
    w_hat = np.asarray(w_hat, dtype=float)
    if w_hat.shape != (num_labels,):
        raise ParameterError("w_hat has the wrong dimension")
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    return 1.0 / num_labels + gamma * math.sqrt(num_labels) * w_hat
