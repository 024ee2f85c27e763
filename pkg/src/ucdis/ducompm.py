"""Almost-lossless distributed codec with decoder-only memory (memoryless sources).

The encoder never sees the memory sequence.  It sends a short universal hash
of its sequence's type (count vector) plus the enumerative rank of the
sequence within its type class.  The decoder builds an acceptance ellipsoid
around the memory's smoothed parameter estimate, enumerates every type inside
it, and keeps the ones matching the hash: exactly one survivor decodes, zero
or several is a declared failure.  Decoding errors (declared plus silent)
stay below the permissible error probability by sizing the ellipsoid from the
chi-square quantile and the hash from the candidate count and a collision
budget.

Markov sources are not supported here (type enumeration over transition
matrices with flow constraints is a different problem); the strictly lossless
paths in :mod:`ucdis.codec` handle them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bounds import delta_d
from .codec import BitReader, BitStream, BitWriter, FramingError
from .numerics import chi2_quantile_upper
from .rng import GOLDEN, MASK64, mix64
from .sources import SourceFamily, _validate_sequence, fisher_info, smoothed_estimate

MERSENNE61 = (1 << 61) - 1

DEFAULT_INFLATION = 1.0
DEFAULT_CANDIDATE_CAP = 10_000_000


class ResourceLimitError(RuntimeError):
    """Candidate enumeration would exceed the configured cap (a configuration
    error, not a coding error)."""


@dataclass(frozen=True)
class DucompmConfig:
    """Shared offline parameters (the wire carries none of these).

    ``collision_budget`` defaults to p_e: the hash is sized so that a wrong
    in-ellipsoid type collides with probability at most the budget.
    """

    k: int
    m: int
    p_e: float
    hash_seed: int = 0x5EED
    inflation: float = DEFAULT_INFLATION
    collision_budget: float | None = None
    candidate_cap: int = DEFAULT_CANDIDATE_CAP

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not (0.0 < self.p_e < 1.0):
            raise ValueError(
                f"p_e must lie in (0,1), got {self.p_e}; "
                "for p_e = 0 use the strictly lossless ucomp path"
            )
        if self.inflation < 1.0:
            raise ValueError("inflation must be >= 1")
        if self.collision_budget is not None and not (0.0 < self.collision_budget < 1.0):
            raise ValueError("collision_budget must lie in (0,1)")

    @property
    def effective_collision_budget(self) -> float:
        return self.p_e if self.collision_budget is None else self.collision_budget


class Ellipsoid:
    """Acceptance region {phi : r (phi - center)' I(center) (phi - center) <= q}.

    ``center`` is the smoothed (strictly interior) estimate from the observed
    sequence, ``fisher`` the natural-units per-symbol Fisher matrix at the
    center over the free coordinates, r = n m / (n + m), and q the
    chi-square_d quantile at 1 - p_e.  ``radius_bits`` is the same threshold
    expressed in bits, q * log2(e) / 2.
    """

    __slots__ = ("center", "r", "fisher", "radius_bits", "chi2_threshold",
                 "_a_rows", "_center_free", "_d")

    def __init__(self, center: np.ndarray, r: float, fisher: np.ndarray,
                 radius_bits: float, chi2_threshold: float):
        self.center = center
        self.r = r
        self.fisher = fisher
        self.radius_bits = radius_bits
        self.chi2_threshold = chi2_threshold
        self._d = fisher.shape[0]
        self._center_free = [float(c) for c in center[: self._d]]
        self._a_rows = [[float(r * fisher[i, j]) for j in range(self._d)] for i in range(self._d)]

    @property
    def precision(self) -> np.ndarray:
        """r times the Fisher matrix (inverse covariance of the type estimate)."""
        return self.r * self.fisher


def type_of(x, k: int) -> np.ndarray:
    """Count vector of a sequence (its type); ml_estimate equals type/n."""
    x = _validate_sequence(x, k)
    return np.bincount(x, minlength=k)


def build_ellipsoid(y, n: int, p_e: float, k: int) -> Ellipsoid:
    """Decoder acceptance region for a length-n type, from memory sequence y."""
    y = _validate_sequence(y, k)
    m = y.size
    if m < 1:
        raise ValueError("memory sequence must be nonempty")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not (0.0 < p_e < 1.0):
        raise ValueError(f"p_e must lie in (0,1), got {p_e}")
    family = SourceFamily("memoryless", k)
    center = smoothed_estimate(family, y)
    fisher = fisher_info(family, center)
    r = n * m / (n + m)
    d = k - 1
    return Ellipsoid(
        center=center,
        r=r,
        fisher=fisher,
        radius_bits=delta_d(d, p_e),
        chi2_threshold=chi2_quantile_upper(d, p_e),
    )


def _qform(e: Ellipsoid, t, n: int) -> float:
    # r * v' I v over free coordinates, v = t/n - center; plain floats for speed
    c = e._center_free
    a = e._a_rows
    d = e._d
    v = [t[i] / n - c[i] for i in range(d)]
    q = 0.0
    for i in range(d):
        row = a[i]
        s = 0.0
        for j in range(d):
            s += row[j] * v[j]
        q += v[i] * s
    return q


def ellipsoid_contains(e: Ellipsoid, t, n: int) -> bool:
    """Membership of a type's empirical point t/n in the acceptance region."""
    t = np.asarray(t)
    if int(t.sum()) != n:
        raise ValueError(f"type counts sum to {int(t.sum())}, expected n={n}")
    return _qform(e, t, n) <= e.chi2_threshold


def enumerate_types_in_ellipsoid(
    e: Ellipsoid, n: int, k: int, cap: int = DEFAULT_CANDIDATE_CAP
) -> list[tuple[int, ...]]:
    """All length-n types inside the region, in ascending lexicographic order.

    Recursive coordinate bounding: each free coordinate ranges over the
    integer interval cut from the ellipsoid's axis-aligned bounding box, then
    candidates pass the exact membership form.  Raises ResourceLimitError if
    the candidate box exceeds ``cap``.
    """
    d = k - 1
    a = e.r * e.fisher
    thr = e.chi2_threshold
    a_inv = np.linalg.inv(a)
    box = np.sqrt(np.maximum(thr * np.diag(a_inv), 0.0))
    lo = [max(0, math.ceil(n * (e._center_free[i] - box[i]))) for i in range(d)]
    hi = [min(n, math.floor(n * (e._center_free[i] + box[i]))) for i in range(d)]
    if any(l > h for l, h in zip(lo, hi)):
        return []
    box_size = 1
    for l, h in zip(lo, hi):
        box_size *= h - l + 1
    if box_size > cap:
        raise ResourceLimitError(
            f"candidate box holds {box_size} lattice points (cap {cap}); "
            f"n={n}, k={k}, per-coordinate widths "
            f"{[h - l + 1 for l, h in zip(lo, hi)]}"
        )

    out: list[tuple[int, ...]] = []
    partial = [0] * d

    def recurse(i: int, remaining: int):
        if i == d:
            t = partial + [remaining]
            if _qform(e, t, n) <= thr:
                out.append(tuple(t))
            return
        top = min(hi[i], remaining)
        for v in range(lo[i], top + 1):
            partial[i] = v
            recurse(i + 1, remaining - v)

    recurse(0, n)
    return out


@lru_cache(maxsize=64)
def _hash_multipliers(seed: int, k: int) -> tuple[int, ...]:
    return tuple(mix64((seed + (i + 1) * GOLDEN) & MASK64) % MERSENNE61 for i in range(k))


def universal_hash(t, seed: int, b: int) -> int:
    """b low bits of a mixed multilinear hash of the count vector.

    Dot product with seed-derived multipliers over the prime field 2^61 - 1,
    passed through a bijective 64-bit mix, truncated to b bits.  Fully
    deterministic given (t, seed, b), so encoder and decoder agree exactly.
    """
    if not (1 <= b <= 64):
        raise ValueError(f"hash width must lie in [1, 64], got {b}")
    mult = _hash_multipliers(seed & MASK64, len(t))
    acc = 0
    for i, c in enumerate(t):
        acc = (acc + mult[i] * int(c)) % MERSENNE61
    return mix64(acc) & ((1 << b) - 1)


def hash_length(
    x,
    n: int,
    m: int,
    p_e: float,
    k: int,
    inflation: float = DEFAULT_INFLATION,
    collision_budget: float | None = None,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
) -> int:
    """Hash width chosen by the encoder without seeing the memory sequence.

    The encoder builds a surrogate ellipsoid centered at its own smoothed
    estimate with the decoder's (r, threshold) recipe, counts the candidate
    types N inside, and uses b = ceil(log2(inflation * N / collision_budget))
    bits: enough to separate inflation * N candidates (inflation covers the
    center mismatch against the decoder's ellipsoid) while a wrong candidate
    survives the hash with probability at most the budget.
    """
    x = _validate_sequence(x, k)
    if x.size != n:
        raise ValueError(f"sequence length {x.size} != n={n}")
    budget = p_e if collision_budget is None else collision_budget
    family = SourceFamily("memoryless", k)
    center = smoothed_estimate(family, x)
    d = k - 1
    surrogate = Ellipsoid(
        center=center,
        r=n * m / (n + m),
        fisher=fisher_info(family, center),
        radius_bits=delta_d(d, p_e),
        chi2_threshold=chi2_quantile_upper(d, p_e),
    )
    n_hat = max(1, len(enumerate_types_in_ellipsoid(surrogate, n, k, cap=candidate_cap)))
    b = max(1, math.ceil(math.log2(inflation * n_hat / budget)))
    if b > 64:
        raise ValueError(
            f"required hash width {b} exceeds 64 bits "
            f"(candidates={n_hat}, collision budget={budget:g})"
        )
    return b


def multinomial_count(counts) -> int:
    """Exact number of sequences sharing the type ``counts``."""
    total = 0
    size = 1
    for c in counts:
        c = int(c)
        if c < 0:
            raise ValueError("counts must be nonnegative")
        total += c
        size *= math.comb(total, c)
    return size


def type_rank(x, k: int) -> int:
    """Lexicographic rank of x among all sequences with the same type."""
    x = _validate_sequence(x, k)
    counts = np.bincount(x, minlength=k).tolist()
    total = x.size
    size = multinomial_count(counts)
    rank = 0
    for s in x.tolist():
        prefix = sum(counts[:s])
        if prefix:
            rank += size * prefix // total
        size = size * counts[s] // total
        counts[s] -= 1
        total -= 1
    return rank


def type_unrank(t, rank: int) -> np.ndarray:
    """Inverse of type_rank: the rank-th sequence of type t in lex order."""
    counts = [int(c) for c in t]
    total = sum(counts)
    size = multinomial_count(counts)
    if not (0 <= rank < max(size, 1)):
        raise ValueError(f"rank {rank} out of range for class size {size}")
    out = np.empty(total, dtype=np.int64)
    for pos in range(total):
        for a, c in enumerate(counts):
            if c == 0:
                continue
            w = size * c // total
            if rank < w:
                out[pos] = a
                size = w
                counts[a] -= 1
                total -= 1
                break
            rank -= w
    return out


@dataclass(frozen=True)
class DCodeword:
    """Wire object: hash width, hash of the type, in-class enumerative rank.

    The rank field's width is implied by the resolved type (ceil log2 of the
    class size), so it is not transmitted.  ``coded_bits`` counts hash plus
    rank; the u16 width field is framing and excluded from rate accounting.
    """

    n: int
    b: int
    hash_value: int
    rank: int
    rank_bit_length: int

    @property
    def coded_bits(self) -> int:
        return self.b + self.rank_bit_length

    def payload(self) -> BitStream:
        w = BitWriter()
        w.write_uint(self.b, 16)
        w.write_uint(self.hash_value, self.b)
        w.write_uint(self.rank, self.rank_bit_length)
        return w.getvalue()


@dataclass(frozen=True)
class DecodeOutcome:
    """Either a decoded sequence or a declared failure, never both.

    Silent mismatches (decoded != encoded) are invisible here by design; the
    experiment harness, which knows the ground truth, counts them as errors
    alongside declared failures.
    """

    sequence: np.ndarray | None = None
    failure_reason: str | None = None  # "no-candidate" or "ambiguous"

    def __post_init__(self):
        if (self.sequence is None) == (self.failure_reason is None):
            raise ValueError("exactly one of sequence/failure_reason must be set")

    @property
    def ok(self) -> bool:
        return self.sequence is not None


def encode_ducompm(x, config: DucompmConfig) -> DCodeword:
    """Encode x using only its own statistics and the known memory length."""
    x = _validate_sequence(x, config.k)
    n = x.size
    if n < 1:
        raise ValueError("cannot encode an empty sequence")
    counts = np.bincount(x, minlength=config.k)
    b = hash_length(
        x,
        n,
        config.m,
        config.p_e,
        config.k,
        inflation=config.inflation,
        collision_budget=config.collision_budget,
        candidate_cap=config.candidate_cap,
    )
    size = multinomial_count(counts)
    return DCodeword(
        n=n,
        b=b,
        hash_value=universal_hash(counts, config.hash_seed, b),
        rank=type_rank(x, config.k),
        rank_bit_length=(size - 1).bit_length(),
    )


def decode_ducompm(payload: BitStream, y, n: int, config: DucompmConfig) -> DecodeOutcome:
    """Resolve the type inside the memory's acceptance ellipsoid and unrank.

    A candidate survives only if its hash matches AND its class size implies
    exactly the transmitted rank-field width AND the transmitted rank is in
    range for it; the width and range checks are free filters that discard
    most hash collisions.  Zero survivors is a no-candidate failure, two or
    more is ambiguous.
    """
    y = _validate_sequence(y, config.k)
    if y.size != config.m:
        raise ValueError(f"memory length {y.size} != configured m={config.m}")
    if payload.bit_length < 16:
        raise FramingError("payload shorter than the hash-width field")
    r = BitReader(payload)
    b = r.read_uint(16)
    if not (1 <= b <= 64) or payload.bit_length < 16 + b:
        raise FramingError(f"invalid hash width {b} for payload of {payload.bit_length} bits")
    h = r.read_uint(b)
    rank_field_bits = payload.bit_length - 16 - b
    rank = r.read_uint(rank_field_bits)

    ellipsoid = build_ellipsoid(y, n, config.p_e, config.k)
    candidates = enumerate_types_in_ellipsoid(ellipsoid, n, config.k, cap=config.candidate_cap)
    seed = config.hash_seed
    survivors = []
    for t in candidates:
        if universal_hash(t, seed, b) != h:
            continue
        size = multinomial_count(t)
        if (size - 1).bit_length() != rank_field_bits or rank >= size:
            continue
        survivors.append(t)
    if not survivors:
        return DecodeOutcome(failure_reason="no-candidate")
    if len(survivors) > 1:
        return DecodeOutcome(failure_reason="ambiguous")
    return DecodeOutcome(sequence=type_unrank(survivors[0], rank))
