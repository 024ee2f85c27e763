"""Parametric source families: sampling, estimation, information geometry.

Two families are supported: memoryless categorical sources over an alphabet of
size k (parameter dimension d = k - 1) and first-order Markov chains
(d = k * (k - 1)).  Parameter vectors are numpy arrays: a length-k probability
vector for memoryless sources, a k-by-k row-stochastic matrix for Markov ones.
All entropies, divergences and redundancies are measured in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import LOG2E, log_gamma
from .rng import generator, split_seed

MEMORYLESS = "memoryless"
MARKOV1 = "markov1"

_ROW_SUM_TOL = 1e-12


class BoundaryThetaError(ValueError):
    """Raised when an operation needs an interior parameter vector.

    Fisher information (and the ellipsoid geometry built on it) is singular on
    the simplex boundary; callers holding boundary ML estimates should use
    ``smoothed_estimate`` instead.
    """


@dataclass(frozen=True)
class SourceFamily:
    kind: str
    k: int

    def __post_init__(self):
        if self.kind not in (MEMORYLESS, MARKOV1):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.k < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.k}")

    @property
    def d(self) -> int:
        """Free parameter dimension: k - 1, or k*(k-1) for Markov chains."""
        if self.kind == MEMORYLESS:
            return self.k - 1
        return self.k * (self.k - 1)


def memoryless(k: int) -> SourceFamily:
    return SourceFamily(MEMORYLESS, k)


def markov1(k: int) -> SourceFamily:
    return SourceFamily(MARKOV1, k)


def validate_theta(family: SourceFamily, theta) -> np.ndarray:
    """Check shape, nonnegativity and row sums; returns theta as an array."""
    theta = np.asarray(theta, dtype=np.float64)
    expected = (family.k,) if family.kind == MEMORYLESS else (family.k, family.k)
    if theta.shape != expected:
        raise ValueError(f"theta shape {theta.shape} does not match family {expected}")
    if np.any(theta < 0):
        raise ValueError("theta entries must be nonnegative")
    sums = theta.sum() if theta.ndim == 1 else theta.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
        raise ValueError(f"probability rows must sum to 1 within {_ROW_SUM_TOL}")
    return theta


def _validate_sequence(x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.ndim != 1:
        raise ValueError("sequence must be one-dimensional")
    if x.size and (x.min() < 0 or x.max() >= k):
        raise ValueError(f"sequence symbols must lie in [0, {k})")
    return x


def stationary_distribution(transition: np.ndarray) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix.

    Solves pi P = pi, sum(pi) = 1 by a rank-completed linear system.  When the
    chain is not irreducible (the system is singular or produces an invalid
    vector) the uniform distribution is returned as the documented fallback.
    """
    k = transition.shape[0]
    a = np.vstack([transition.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    try:
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    except np.linalg.LinAlgError:
        return np.full(k, 1.0 / k)
    if np.any(pi < -1e-9) or abs(pi.sum() - 1.0) > 1e-6 or np.max(np.abs(pi @ transition - pi)) > 1e-6:
        return np.full(k, 1.0 / k)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def sample_sequence(family: SourceFamily, theta, n: int, seed: int) -> np.ndarray:
    """Draw a length-n sequence; identical (family, theta, n, seed) give identical output."""
    theta = validate_theta(family, theta)
    if n < 0:
        raise ValueError(f"length must be nonnegative, got {n}")
    g = generator(seed)
    if family.kind == MEMORYLESS:
        u = g.random(n)
        cum = np.cumsum(theta)
        return np.minimum(np.searchsorted(cum, u, side="right"), family.k - 1).astype(np.int64)
    # Markov chain: initial state from the stationary distribution, then
    # inverse-CDF steps against per-row cumulative sums.
    pi = stationary_distribution(theta)
    cum_rows = np.cumsum(theta, axis=1)
    u = g.random(n + 1)
    out = np.empty(n, dtype=np.int64)
    state = int(np.minimum(np.searchsorted(np.cumsum(pi), u[0], side="right"), family.k - 1))
    for i in range(n):
        state = int(np.minimum(np.searchsorted(cum_rows[state], u[i + 1], side="right"), family.k - 1))
        out[i] = state
    return out


def _entropy_bits(p: np.ndarray) -> float:
    mask = p > 0
    return float(-(p[mask] * np.log2(p[mask])).sum())


def entropy_rate(family: SourceFamily, theta) -> float:
    """Entropy in bits per symbol; the length-n sequence entropy is n times this."""
    theta = validate_theta(family, theta)
    if family.kind == MEMORYLESS:
        return _entropy_bits(theta)
    pi = stationary_distribution(theta)
    return float(sum(pi[s] * _entropy_bits(theta[s]) for s in range(family.k)))


def ml_estimate(family: SourceFamily, x) -> np.ndarray:
    """Maximum-likelihood parameter: empirical frequencies (may sit on the boundary)."""
    x = _validate_sequence(x, family.k)
    if x.size == 0:
        raise ValueError("ml_estimate requires a nonempty sequence")
    if family.kind == MEMORYLESS:
        return np.bincount(x, minlength=family.k) / x.size
    k = family.k
    counts = np.zeros((k, k))
    np.add.at(counts, (x[:-1], x[1:]), 1.0)
    rows = counts.sum(axis=1, keepdims=True)
    out = np.where(rows > 0, counts / np.where(rows > 0, rows, 1.0), 1.0 / k)
    return out


def smoothed_estimate(family: SourceFamily, x) -> np.ndarray:
    """Posterior-mean estimate (c + 1/2) / (n + k/2); strictly interior, n = 0 allowed."""
    x = _validate_sequence(x, family.k)
    k = family.k
    if family.kind == MEMORYLESS:
        counts = np.bincount(x, minlength=k).astype(np.float64)
        return (counts + 0.5) / (x.size + 0.5 * k)
    counts = np.zeros((k, k))
    if x.size > 1:
        np.add.at(counts, (x[:-1], x[1:]), 1.0)
    rows = counts.sum(axis=1, keepdims=True)
    return (counts + 0.5) / (rows + 0.5 * k)


def kl_divergence_rate(family: SourceFamily, lam, theta) -> float:
    """Per-symbol divergence sum_i theta_i log2(theta_i / lambda_i), in bits.

    Returns inf when theta puts mass where lambda has none.  For Markov
    chains the per-row divergences are weighted by theta's stationary law.
    """
    lam = validate_theta(family, lam)
    theta = validate_theta(family, theta)

    def row_kl(t, l):
        mask = t > 0
        if np.any(l[mask] == 0):
            return math.inf
        return float((t[mask] * np.log2(t[mask] / l[mask])).sum())

    if family.kind == MEMORYLESS:
        return row_kl(theta, lam)
    pi = stationary_distribution(theta)
    total = 0.0
    for s in range(family.k):
        if pi[s] == 0:
            continue
        r = row_kl(theta[s], lam[s])
        if math.isinf(r):
            return math.inf
        total += pi[s] * r
    return total


def _fisher_simplex(theta_row: np.ndarray) -> np.ndarray:
    # Free coordinates theta_1..theta_{k-1}; I_ij = delta_ij/theta_i + 1/theta_k.
    if np.any(theta_row <= 0):
        raise BoundaryThetaError(
            "Fisher information is singular at the simplex boundary; "
            "use smoothed_estimate for an interior surrogate"
        )
    free = theta_row[:-1]
    return np.diag(1.0 / free) + 1.0 / theta_row[-1]


def fisher_info(family: SourceFamily, theta) -> np.ndarray:
    """Per-symbol Fisher information matrix in natural-log units.

    Memoryless: the (k-1)x(k-1) simplex matrix with det = 1/prod(theta).
    Markov: block-diagonal per-row simplex matrices weighted by the stationary
    probabilities (an approximation; flagged in downstream outputs).
    """
    theta = validate_theta(family, theta)
    if family.kind == MEMORYLESS:
        return _fisher_simplex(theta)
    k = family.k
    pi = stationary_distribution(theta)
    blocks = np.zeros((family.d, family.d))
    for s in range(k):
        block = pi[s] * _fisher_simplex(theta[s])
        i0 = s * (k - 1)
        blocks[i0 : i0 + k - 1, i0 : i0 + k - 1] = block
    return blocks


def log_jeffreys_integral(family: SourceFamily) -> float:
    """log2 of the integral of sqrt(det I(theta)) over the parameter space.

    Memoryless: log2(Gamma(1/2)^k / Gamma(k/2)), the Dirichlet(1/2) normalizer.
    Markov: k times the single-row value (per-row factorization approximation).
    """
    k = family.k
    row = (0.5 * k * math.log(math.pi) - log_gamma(0.5 * k)) * LOG2E
    if family.kind == MEMORYLESS:
        return row
    return k * row


def sample_jeffreys(family: SourceFamily, seed: int) -> np.ndarray:
    """Draw theta from the Jeffreys prior: Dirichlet(1/2, ..., 1/2) per row."""
    g = generator(seed)
    k = family.k

    def draw_row(gen):
        v = gen.standard_gamma(0.5, size=k)
        v = np.maximum(v, 1e-300)  # keep draws strictly interior
        return v / v.sum()

    if family.kind == MEMORYLESS:
        return draw_row(g)
    return np.vstack([draw_row(generator(split_seed(seed, s))) for s in range(k)])
