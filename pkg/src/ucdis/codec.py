"""Strictly lossless coding core: integer arithmetic coder driven by KT counts.

The coder is a classic carry-free integer-interval coder (64-bit registers,
MSB-first bit output, deferred-underflow renormalization).  Probability models
feed it exact integer frequency intervals; the Krichevsky-Trofimov model uses
freq(a) = 2*count(a) + 1 over total = 2*N + k so the implied probabilities
(count + 1/2)/(N + k/2) are exact rationals, keeping encoder and decoder
states identical bit for bit.

Universal coding without memory (ucomp) starts from empty counts; coding with
a shared memory sequence (ucompm) first primes the counts by consuming the
memory on both sides.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .numerics import LN2
from .sources import MARKOV1, MEMORYLESS, SourceFamily, _validate_sequence

_STATE_BITS = 64
_MASK = (1 << _STATE_BITS) - 1
_TOP = 1 << (_STATE_BITS - 1)
_SECOND = _TOP >> 1
_HALF_MASK = _MASK >> 1
_MAX_TOTAL = (_MASK >> 2) + 2  # totals above this could collapse an interval


class FramingError(ValueError):
    """Bitstream or container is malformed (bad magic, truncated payload, ...)."""


@dataclass(frozen=True)
class BitStream:
    """Packed bits, MSB-first within bytes; trailing pad bits are zero."""

    data: bytes
    bit_length: int

    def __post_init__(self):
        if self.bit_length < 0 or self.bit_length > 8 * len(self.data):
            raise ValueError("bit_length inconsistent with byte count")

    def bit(self, i: int) -> int:
        """The i-th bit; positions past bit_length read as zero padding."""
        if i >= self.bit_length:
            return 0
        return (self.data[i >> 3] >> (7 - (i & 7))) & 1


class BitWriter:
    """Accumulates bits MSB-first into bytes."""

    __slots__ = ("buf", "acc", "nacc")

    def __init__(self):
        self.buf = bytearray()
        self.acc = 0
        self.nacc = 0

    def write_bit(self, b: int):
        self.acc = (self.acc << 1) | b
        self.nacc += 1
        if self.nacc == 8:
            self.buf.append(self.acc)
            self.acc = 0
            self.nacc = 0

    def write_uint(self, value: int, nbits: int):
        for shift in range(nbits - 1, -1, -1):
            self.write_bit((value >> shift) & 1)

    def getvalue(self) -> BitStream:
        nbits = 8 * len(self.buf) + self.nacc
        if self.nacc:
            return BitStream(bytes(self.buf) + bytes([self.acc << (8 - self.nacc)]), nbits)
        return BitStream(bytes(self.buf), nbits)


class BitReader:
    """Reads bits MSB-first; past-the-end reads return zero padding."""

    __slots__ = ("stream", "pos")

    def __init__(self, stream: BitStream, pos: int = 0):
        self.stream = stream
        self.pos = pos

    def read_bit(self) -> int:
        b = self.stream.bit(self.pos)
        self.pos += 1
        return b

    def read_uint(self, nbits: int) -> int:
        v = 0
        for _ in range(nbits):
            v = (v << 1) | self.read_bit()
        return v

    @property
    def remaining(self) -> int:
        return max(0, self.stream.bit_length - self.pos)


class KTState:
    """Per-context symbol counts with integer coder frequencies.

    A Fenwick tree per context serves cumulative-frequency queries and symbol
    search in O(log k).  Counts only ever grow by one per consumed symbol
    (bulk priming aside).
    """

    __slots__ = ("k", "contexts", "counts", "totals", "trees", "tree_size")

    def __init__(self, k: int, contexts: int = 1):
        if k < 2:
            raise ValueError(f"alphabet size must be >= 2, got {k}")
        self.k = k
        self.contexts = contexts
        self.counts = [[0] * k for _ in range(contexts)]
        self.totals = [0] * contexts
        size = 1
        while size < k:
            size <<= 1
        self.tree_size = size
        self.trees = [[0] * (size + 1) for _ in range(contexts)]

    def prob(self, context: int, symbol: int) -> float:
        if not (0 <= symbol < self.k):
            raise ValueError(f"symbol {symbol} out of range for k={self.k}")
        return (self.counts[context][symbol] + 0.5) / (self.totals[context] + 0.5 * self.k)

    def update(self, context: int, symbol: int):
        self.counts[context][symbol] += 1
        self.totals[context] += 1
        tree = self.trees[context]
        i = symbol + 1
        size = self.tree_size
        while i <= size:
            tree[i] += 1
            i += i & (-i)

    def prime(self, context: int, extra_counts):
        """Bulk-add counts to one context and rebuild its tree."""
        cs = self.counts[context]
        for a, c in enumerate(extra_counts):
            cs[a] += int(c)
        self.totals[context] = sum(cs)
        tree = self.trees[context]
        prefix = 0
        pref = [0] * (self.tree_size + 1)
        for i in range(1, self.tree_size + 1):
            prefix += cs[i - 1] if i - 1 < self.k else 0
            pref[i] = prefix
        for i in range(1, self.tree_size + 1):
            tree[i] = pref[i] - pref[i - (i & (-i))]


def kt_probability(state: KTState, context: int, symbol: int) -> float:
    """Sequential KT probability (count + 1/2) / (total + k/2)."""
    return state.prob(context, symbol)


class KTCoderModel:
    """Adaptive KT model over a sequence; context = previous symbol for markov1.

    The initial context is fixed to symbol 0 on both sides, also after
    memory priming.
    """

    __slots__ = ("k", "state", "markov", "ctx", "_tree", "_counts", "_size")

    def __init__(self, family: SourceFamily, state: KTState | None = None):
        contexts = family.k if family.kind == MARKOV1 else 1
        if state is None:
            state = KTState(family.k, contexts)
        elif state.k != family.k or state.contexts != contexts:
            raise ValueError("state shape does not match family")
        self.k = family.k
        self.state = state
        self.markov = family.kind == MARKOV1
        self.ctx = 0
        self._tree = state.trees[0]
        self._counts = state.counts[0]
        self._size = state.tree_size

    def total(self) -> int:
        return 2 * self.state.totals[self.ctx] + self.k

    def interval(self, symbol: int) -> tuple[int, int]:
        tree = self._tree
        pre = 0
        i = symbol
        while i:
            pre += tree[i]
            i -= i & (-i)
        lo = 2 * pre + symbol
        return lo, lo + 2 * self._counts[symbol] + 1

    def locate(self, target: int) -> tuple[int, int, int]:
        tree = self._tree
        pos = 0
        rem = target
        bit = self._size
        while bit:
            nxt = pos + bit
            if nxt <= self._size:
                w = 2 * tree[nxt] + bit
                if w <= rem:
                    rem -= w
                    pos = nxt
            bit >>= 1
        lo = target - rem
        return pos, lo, lo + 2 * self._counts[pos] + 1

    def advance(self, symbol: int):
        self.state.update(self.ctx, symbol)
        if self.markov:
            self.ctx = symbol
            self._tree = self.state.trees[symbol]
            self._counts = self.state.counts[symbol]


class FixedModel:
    """Non-adaptive integer-frequency model (known-parameter coding, tests)."""

    __slots__ = ("freqs", "cum")

    def __init__(self, freqs):
        self.freqs = [int(f) for f in freqs]
        if any(f < 0 for f in self.freqs) or sum(self.freqs) < 1:
            raise ValueError("frequencies must be nonnegative with positive total")
        self.cum = [0]
        for f in self.freqs:
            self.cum.append(self.cum[-1] + f)

    def total(self) -> int:
        return self.cum[-1]

    def interval(self, symbol: int) -> tuple[int, int]:
        lo, hi = self.cum[symbol], self.cum[symbol + 1]
        if lo == hi:
            raise ValueError(f"symbol {symbol} has zero frequency")
        return lo, hi

    def locate(self, target: int) -> tuple[int, int, int]:
        # binary search for the interval containing target
        lo, hi = 0, len(self.freqs)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.cum[mid] <= target:
                lo = mid
            else:
                hi = mid
        return lo, self.cum[lo], self.cum[lo + 1]

    def advance(self, symbol: int):
        pass


def ac_encode(model, symbols) -> BitStream:
    """Arithmetic-encode ``symbols`` against a sequential integer-frequency model.

    The emitted length never exceeds the model's ideal codelength
    -log2 prod p(x_i | x^(i-1)) by more than 2 bits.
    """
    low = 0
    high = _MASK
    pending = 0
    w = BitWriter()
    write_bit = w.write_bit
    total = model.total
    interval = model.interval
    advance = model.advance
    for s in symbols:
        t = total()
        if t > _MAX_TOTAL:
            raise ValueError("model total exceeds coder capacity")
        lo, hi = interval(s)
        span = high - low + 1
        high = low + span * hi // t - 1
        low = low + span * lo // t
        while (low ^ high) & _TOP == 0:
            bit = low >> (_STATE_BITS - 1)
            write_bit(bit)
            if pending:
                inv = bit ^ 1
                for _ in range(pending):
                    write_bit(inv)
                pending = 0
            low = (low << 1) & _MASK
            high = ((high << 1) & _MASK) | 1
        while low & ~high & _SECOND:
            pending += 1
            low = (low << 1) & _HALF_MASK
            high = ((high << 1) & _HALF_MASK) | _TOP | 1
        advance(s)
    # Quarter-disambiguation termination: two bits plus any pending underflow
    # bits pin a dyadic interval inside [low, high] regardless of how the
    # stream is padded afterwards.  The final window is wider than a quarter,
    # so the emitted total stays within ideal codelength + 2 on every input.
    pending += 1
    bit = 0 if low < _SECOND else 1
    write_bit(bit)
    inv = bit ^ 1
    for _ in range(pending):
        write_bit(inv)
    return w.getvalue()


def ac_decode(model, bits: BitStream, n: int, start: int = 0):
    """Decode ``n`` symbols; the model must mirror the encoder's updates."""
    r = BitReader(bits, start)
    read_bit = r.read_bit
    code = 0
    for _ in range(_STATE_BITS):
        code = (code << 1) | read_bit()
    low = 0
    high = _MASK
    out = []
    append = out.append
    total = model.total
    locate = model.locate
    advance = model.advance
    for _ in range(n):
        t = total()
        span = high - low + 1
        target = ((code - low + 1) * t - 1) // span
        s, lo, hi = locate(target)
        high = low + span * hi // t - 1
        low = low + span * lo // t
        while (low ^ high) & _TOP == 0:
            code = ((code << 1) & _MASK) | read_bit()
            low = (low << 1) & _MASK
            high = ((high << 1) & _MASK) | 1
        while low & ~high & _SECOND:
            code = (code & _TOP) | ((code << 1) & _HALF_MASK) | read_bit()
            low = (low << 1) & _HALF_MASK
            high = ((high << 1) & _HALF_MASK) | _TOP | 1
        advance(s)
        append(s)
    return out


def _primed_state(family: SourceFamily, y: np.ndarray) -> KTState:
    contexts = family.k if family.kind == MARKOV1 else 1
    state = KTState(family.k, contexts)
    if family.kind == MEMORYLESS:
        state.prime(0, np.bincount(y, minlength=family.k))
    else:
        # consume the memory along its context chain, initial context 0
        k = family.k
        counts = np.zeros((k, k), dtype=np.int64)
        if y.size:
            prev = np.concatenate(([0], y[:-1]))
            np.add.at(counts, (prev, y), 1)
        for ctx in range(k):
            state.prime(ctx, counts[ctx])
    return state


def encode_ucomp(family: SourceFamily, x) -> BitStream:
    """Universal coding from empty counts (no memory)."""
    x = _validate_sequence(x, family.k)
    return ac_encode(KTCoderModel(family), x.tolist())


def decode_ucomp(family: SourceFamily, bits: BitStream, n: int) -> np.ndarray:
    return np.array(ac_decode(KTCoderModel(family), bits, n), dtype=np.int64)


def encode_ucompm(family: SourceFamily, y, x) -> BitStream:
    """Universal coding with counts primed by the shared memory sequence y."""
    y = _validate_sequence(y, family.k)
    x = _validate_sequence(x, family.k)
    return ac_encode(KTCoderModel(family, _primed_state(family, y)), x.tolist())


def decode_ucompm(family: SourceFamily, y, bits: BitStream, n: int) -> np.ndarray:
    y = _validate_sequence(y, family.k)
    return np.array(ac_decode(KTCoderModel(family, _primed_state(family, y)), bits, n), dtype=np.int64)


def ideal_kt_bits(family: SourceFamily, x, memory=None) -> float:
    """Ideal KT codelength -log2 prod (c+1/2)/(N+k/2), via gamma identities.

    With ``memory`` the product is taken with counts primed by the memory
    sequence, matching encode_ucompm's model.
    """
    x = _validate_sequence(x, family.k)
    k = family.k
    contexts = k if family.kind == MARKOV1 else 1

    def context_counts(seq):
        if family.kind == MEMORYLESS:
            return np.bincount(seq, minlength=k).reshape(1, k)
        counts = np.zeros((k, k), dtype=np.int64)
        if seq.size:
            prev = np.concatenate(([0], seq[:-1]))
            np.add.at(counts, (prev, seq), 1)
        return counts

    base = np.zeros((contexts, k), dtype=np.int64)
    if memory is not None:
        base = context_counts(_validate_sequence(memory, family.k))
    cx = context_counts(x)
    nats = 0.0
    for ctx in range(contexts):
        n0 = int(base[ctx].sum())
        n1 = int(cx[ctx].sum())
        if n1 == 0:
            continue
        nats += math.lgamma(n0 + 0.5 * k) - math.lgamma(n0 + n1 + 0.5 * k)
        for a in range(k):
            c0, c1 = int(base[ctx][a]), int(cx[ctx][a])
            if c1:
                nats += math.lgamma(c0 + c1 + 0.5) - math.lgamma(c0 + 0.5)
    return -nats / LN2


# --- container format -------------------------------------------------------

MAGIC = b"UCDS"
VERSION = 1
STRATEGY_IDS = {"ucomp": 0, "ucompm": 1, "ducompm": 2}
FAMILY_IDS = {MEMORYLESS: 0, MARKOV1: 1}
_STRATEGY_NAMES = {v: k for k, v in STRATEGY_IDS.items()}
_FAMILY_NAMES = {v: k for k, v in FAMILY_IDS.items()}
_HEADER = struct.Struct(">4sBBBHIIdI")


@dataclass(frozen=True)
class Container:
    strategy: str
    family_kind: str
    k: int
    n: int
    m: int
    p_e: float
    payload: BitStream


def pack_container(c: Container) -> bytes:
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        STRATEGY_IDS[c.strategy],
        FAMILY_IDS[c.family_kind],
        c.k,
        c.n,
        c.m,
        c.p_e,
        c.payload.bit_length,
    )
    return header + c.payload.data


def unpack_container(blob: bytes) -> Container:
    if len(blob) < _HEADER.size:
        raise FramingError("container shorter than header")
    magic, version, strat, fam, k, n, m, p_e, bitlen = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FramingError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FramingError(f"unsupported version {version}")
    if strat not in _STRATEGY_NAMES or fam not in _FAMILY_NAMES:
        raise FramingError("unknown strategy or family id")
    payload = blob[_HEADER.size :]
    if len(payload) != (bitlen + 7) // 8:
        raise FramingError(
            f"payload length {len(payload)} bytes inconsistent with {bitlen} bits"
        )
    return Container(
        strategy=_STRATEGY_NAMES[strat],
        family_kind=_FAMILY_NAMES[fam],
        k=k,
        n=n,
        m=m,
        p_e=p_e,
        payload=BitStream(payload, bitlen),
    )
