"""An epsilon-LDP randomizer for vectors in a known low-dimensional subspace.

Given v lying in the span of an orthonormal basis Q (p x m) with coordinate
l1 norm at most ``l1_bound``, the randomizer releases an unbiased estimate
vhat while guaranteeing that the output distribution changes by at most a
factor e^eps across any two admissible inputs.

Scheme, on the coordinate vector c = Q^T v with r = l1_bound (so the cube
[-r, r]^m contains c):

1. Round c to a random vertex of the cube: coordinate j becomes +r with
   probability 1/2 + c_j / (2r), else -r. The vertex mean is exactly c.
2. With probability e^eps / (e^eps + 1) sample a uniform sign vector z from
   the open halfspace agreeing with the vertex, otherwise from the opposing
   open halfspace. Ties (<z, s> = 0, only possible for even m) are excluded
   by rejection so both halves have equal cardinality, which makes every
   output's likelihood ratio exactly e^eps.
3. Release B * z in coordinates, mapped back through Q. The debiasing scale

       B = r * (e^eps + 1)/(e^eps - 1) / m_agree(m),

   with m_agree(m) = E[z_1 s_1 | <z, s> > 0] computed by exact integer
   combinatorics, makes the release unbiased.

Every output has squared norm B^2 m, so E||vhat - v||^2 = B^2 m - ||c||^2
exactly; ``second_moment_constant`` reports the constant C for which
E||vhat - v||^2 <= C * l1_bound^2 * m / min(1, eps^2) holds. C grows
linearly in m: the cube scheme pays a dimension factor over the unit-ball
rate, and the module reports its constant rather than hiding it.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ParameterError
from .rng import RandomnessStream

_BASIS_ORTHO_TOL = 1e-8
_SPAN_TOL = 1e-6


@lru_cache(maxsize=None)
def _mean_agreement(dim: int) -> float:
    """E[z_1 s_1 | <z, s> > 0] for z uniform on {-1, +1}^dim, exact ratio.

    Counting over agreement counts a > dim/2: sum C(dim, a) (2a - dim) over
    the strict-majority region, divided by dim times the region's size.
    """
    if dim < 1:
        raise ParameterError(f"dimension must be >= 1, got {dim}")
    lo = dim // 2 + 1
    weighted = sum(math.comb(dim, a) * (2 * a - dim) for a in range(lo, dim + 1))
    count = sum(math.comb(dim, a) for a in range(lo, dim + 1))
    return weighted / (dim * count)


def debias_scale(dim: int, epsilon: float, l1_bound: float) -> float:
    """Scale B applied to the sampled sign vector so the release is unbiased."""
    if epsilon <= 0 or not math.isfinite(epsilon):
        raise ParameterError(f"epsilon must be positive and finite, got {epsilon}")
    if l1_bound <= 0 or not math.isfinite(l1_bound):
        raise ParameterError(f"l1_bound must be positive and finite, got {l1_bound}")
    e_eps = math.exp(epsilon)
    return l1_bound * (e_eps + 1.0) / (e_eps - 1.0) / _mean_agreement(dim)


def second_moment_constant(dim: int, epsilon: float) -> float:
    """Reported constant C with E||vhat - v||^2 <= C * l1_bound^2 * dim / min(1, eps^2)."""
    b_unit = debias_scale(dim, epsilon, 1.0)
    return b_unit * b_unit * min(1.0, epsilon * epsilon)


def _sample_signs(
    sign_patterns: np.ndarray, epsilon: float, gen: np.random.Generator
) -> np.ndarray:
    """Sample one sign vector per row, uniform on the chosen open halfspace."""
    count, dim = sign_patterns.shape
    e_eps = math.exp(epsilon)
    keep = gen.random(count) < e_eps / (e_eps + 1.0)
    target = np.where(keep, 1.0, -1.0)
    out = np.empty((count, dim))
    pending = np.arange(count)
    while pending.size:
        z = np.where(gen.random((pending.size, dim)) < 0.5, 1.0, -1.0)
        dots = np.einsum("ij,ij->i", z, sign_patterns[pending])
        ok = np.sign(dots) == target[pending]
        out[pending[ok]] = z[ok]
        pending = pending[~ok]
    return out


def _coordinates(v: np.ndarray, basis: np.ndarray, l1_bound: float) -> np.ndarray:
    basis = np.asarray(basis, dtype=float)
    v = np.asarray(v, dtype=float)
    if basis.ndim != 2:
        raise ParameterError("basis must be a (p, m) matrix with orthonormal columns")
    p, m = basis.shape
    if v.shape != (p,):
        raise ParameterError(f"vector shape {v.shape} does not match basis rows {p}")
    gram = basis.T @ basis
    if not np.allclose(gram, np.eye(m), atol=_BASIS_ORTHO_TOL):
        raise ParameterError("basis columns are not orthonormal")
    coords = basis.T @ v
    residual = v - basis @ coords
    if np.linalg.norm(residual) > _SPAN_TOL * max(1.0, np.linalg.norm(v)):
        raise ParameterError("vector does not lie in the span of the basis")
    l1 = float(np.abs(coords).sum())
    if l1 > l1_bound * (1.0 + 1e-12):
        raise ParameterError(f"coordinate l1 norm {l1} exceeds the stated bound {l1_bound}")
    return coords


def randomize_coordinates(
    coords: np.ndarray,
    l1_bound: float,
    epsilon: float,
    rng: RandomnessStream,
    size: int | None = None,
) -> np.ndarray:
    """Randomize a coordinate vector in the cube [-l1_bound, l1_bound]^m.

    Returns one draw of shape (m,) or, when ``size`` is given, a (size, m)
    batch of independent draws. Exposed separately so callers that share a
    basis can batch draws.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 1 or coords.size < 1:
        raise ParameterError("coords must be a non-empty vector")
    if not np.all(np.isfinite(coords)):
        raise ParameterError("coords must be finite")
    dim = coords.size
    if float(np.abs(coords).sum()) > l1_bound * (1.0 + 1e-12):
        raise ParameterError("coordinate l1 norm exceeds the stated bound")
    gen = rng.generator
    count = 1 if size is None else int(size)
    vertex_prob = 0.5 + coords / (2.0 * l1_bound)
    signs = np.where(gen.random((count, dim)) < vertex_prob, 1.0, -1.0)
    z = _sample_signs(signs, epsilon, gen)
    scaled = debias_scale(dim, epsilon, l1_bound) * z
    return scaled[0] if size is None else scaled


def djw_vector_randomize(
    v: np.ndarray,
    basis: np.ndarray,
    l1_bound: float,
    epsilon: float,
    rng: RandomnessStream,
    size: int | None = None,
) -> np.ndarray:
    """Unbiased epsilon-LDP release of a vector in the span of ``basis``.

    ``basis`` is a (p, m) matrix with orthonormal columns; ``v`` must lie in
    its span (within tolerance 1e-6) with coordinate l1 norm <= l1_bound.
    Returns vhat of shape (p,), or (size, p) for batched draws.
    """
    if epsilon <= 0 or not math.isfinite(epsilon):
        raise ParameterError(f"epsilon must be positive and finite, got {epsilon}")
    basis = np.asarray(basis, dtype=float)
    coords = _coordinates(v, basis, l1_bound)
    chat = randomize_coordinates(coords, l1_bound, epsilon, rng, size=size)
    return chat @ basis.T
