"""Las Vegas subset encoders built on a UR protocol.

``enc``/``dec`` compress an m-subset of [n] into a protocol message, a
residual subset ``B`` and one success bit per round. Each round asks Bob
for a new element of ``S``; between rounds the working set is trimmed to a
fixed size by dropping the lowest-priority elements under a shared random
permutation, which masks what earlier answers revealed about the protocol's
randomness. ``enc_k``/``dec_k`` do the same with k samples per round and a
nested random subsampling chain instead of trimming.

Decoding is exact for every seed and every protocol behavior: a protocol
that always fails only costs savings (every round records ``b_r = 0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ProtocolFailure
from .mixing import TAG_PRIORITY, TAG_SUBSAMPLE, counter_words, derive, generator
from .protocol import ProtocolParams, URProtocol


@dataclass(frozen=True)
class CodecParams:
    n: int
    delta: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ParameterError("delta must lie in (0, 1)")
        if self.K < 1:
            raise ParameterError(f"K = floor(log2(1/delta)/16) must be >= 1, got {self.K}")
        if not 1 <= self.m <= self.n:
            raise ParameterError(f"m = {self.m} does not fit in [1, n]")
        if self.R < 1:
            raise ParameterError("parameters leave no rounds (R < 1)")
        sched = self.schedule
        for r in range(self.R):
            if sched[r] - sched[r + 1] < 2:
                raise ParameterError(f"schedule gap n_{r} - n_{r + 1} = "
                                     f"{sched[r] - sched[r + 1]} is below 2")

    @property
    def log_inv_delta(self) -> float:
        return -math.log2(self.delta)

    @property
    def m(self) -> int:
        return math.floor(math.sqrt(self.n * self.log_inv_delta))

    @property
    def K(self) -> int:
        return math.floor(self.log_inv_delta / 16)

    @property
    def R(self) -> int:
        return math.floor(self.K * math.log2(self.m / (4 * self.K)))

    @property
    def schedule(self) -> list[int]:
        """Target working-set sizes n_0 = m > n_1 > ... > n_R."""
        return [math.floor(self.m * 2 ** (-r / self.K)) for r in range(self.R + 1)]

    def priority(self) -> np.ndarray:
        """pi_a for every a in [n]: a uniform permutation used as a static order."""
        return generator(self.seed, TAG_PRIORITY).permutation(self.n)

    def protocol(self, backend="rs") -> URProtocol:
        return URProtocol(ProtocolParams(self.n, 1, self.delta, backend, derive(self.seed, 1)))


@dataclass(frozen=True)
class CodecKParams:
    n: int
    k: int
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k <= self.n / 2**10:
            raise ParameterError(f"need 1 <= k <= n/2^10 so that R >= 3, got n={self.n}, k={self.k}")

    @property
    def m(self) -> int:
        return math.isqrt(self.n * self.k)

    @property
    def R(self) -> int:
        return math.floor(0.5 * math.log2(self.n / self.k) - 2)

    def depth(self, idx) -> np.ndarray:
        """Largest r <= R with a in T_r; each step keeps an element with probability 1/2."""
        words = counter_words(derive(self.seed, TAG_SUBSAMPLE), np.asarray(idx, dtype=np.int64))
        d = np.zeros(words.shape, dtype=np.int64)
        for j in range(1, self.R + 1):
            d += (words >> np.uint64(64 - j)) == 0
        return d

    def protocol(self, backend="rs", c_rec: int = 4) -> URProtocol:
        # delta is only nominal here; c_rec = 4 keeps s_max = 4k, the smallest valid value
        return URProtocol(ProtocolParams(self.n, self.k, 0.2, backend, derive(self.seed, 2),
                                         c_rec=c_rec))


@dataclass(frozen=True)
class CodecOutput:
    message: object
    residual: frozenset
    success_bits: tuple
    recovered_per_round: tuple = field(default=(), compare=False)


def _ask(protocol, msg, y) -> list[int] | None:
    try:
        return protocol.bob(msg, y)
    except ProtocolFailure:
        return None


def enc(S, params: CodecParams, protocol, trace: list | None = None) -> CodecOutput:
    S = frozenset(int(a) for a in S)
    if len(S) != params.m:
        raise ParameterError(f"|S| = {len(S)} but the codec encodes {params.m}-subsets")
    pi = params.priority()
    sched = params.schedule
    msg = protocol.alice(sorted(S))
    A, bits, cur = set(), [], set(S)
    for r in range(1, params.R + 1):
        out = _ask(protocol, msg, sorted(S - cur))
        if out is not None and len(out) == 1 and out[0] in cur:
            bits.append(1)
            A.add(out[0])
            cur.discard(out[0])
        else:
            bits.append(0)
        excess = len(cur) - sched[r]
        if excess > 0:
            cur.difference_update(sorted(cur, key=pi.__getitem__)[:excess])
        if trace is not None:
            trace.append(frozenset(cur))
    return CodecOutput(msg, frozenset(S - A), tuple(bits))


def dec(out: CodecOutput, params: CodecParams, protocol, trace: list | None = None) -> frozenset:
    pi = params.priority()
    sched = params.schedule
    B_order = sorted(out.residual, key=pi.__getitem__)
    A, C = set(), set()
    for r, bit in enumerate(out.success_bits, 1):
        if bit:
            s = protocol.bob(out.message, sorted(C))[0]
            A.add(s)
            C.add(s)
        need = params.m - sched[r] - len(C)
        for a in B_order:
            if need <= 0:
                break
            if a not in C:
                C.add(a)
                need -= 1
        if trace is not None:
            trace.append(frozenset(C))
    return frozenset(out.residual | A)


def enc_k(S, params: CodecKParams, protocol) -> CodecOutput:
    S = frozenset(int(a) for a in S)
    if len(S) != params.m:
        raise ParameterError(f"|S| = {len(S)} but the codec encodes {params.m}-subsets")
    elems = np.array(sorted(S), dtype=np.int64)
    depth = dict(zip(elems.tolist(), params.depth(elems).tolist()))
    msg = protocol.alice(elems)
    A, bits, counts = set(), [], []
    for r in range(1, params.R + 1):
        alive = {a for a in S if depth[a] >= r - 1}
        out = _ask(protocol, msg, sorted(S - alive))
        if out is not None and set(out) <= alive:
            bits.append(1)
            got = {a for a in out if depth[a] == r - 1}
            A |= got
            counts.append(len(got))
        else:
            bits.append(0)
    return CodecOutput(msg, frozenset(S - A), tuple(bits), tuple(counts))


def dec_k(out: CodecOutput, params: CodecKParams, protocol) -> frozenset:
    B = sorted(out.residual)
    depth_B = dict(zip(B, params.depth(np.array(B, dtype=np.int64)).tolist())) if B else {}
    A, C = set(), set()
    for r, bit in enumerate(out.success_bits, 1):
        if bit:
            got = protocol.bob(out.message, sorted(C))
            d = params.depth(np.array(got, dtype=np.int64)) if got else []
            fresh = [a for a, da in zip(got, list(d)) if da == r - 1]
            A.update(fresh)
            C.update(fresh)
        C.update(a for a in B if depth_B[a] == r - 1)
    return frozenset(out.residual | A)


def log2_binom(n: int, k: int) -> float:
    """log2 C(n, k) via log-gamma."""
    if not 0 <= k <= n:
        return float("-inf")
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / math.log(2)


def ceil_log2_int(x: int) -> int:
    """Bits to index x distinct values: ceil(log2 x), exact for integers."""
    return (x - 1).bit_length() if x > 1 else 0


def measure_cost(out: CodecOutput, n: int, m: int, protocol_bits: int | None = None) -> dict:
    """Bit accounting for one encoding: residual cost against the naive code."""
    R = len(out.success_bits)
    size_B = len(out.residual)
    residual = ceil_log2_int(n) + R + ceil_log2_int(math.comb(n, size_B))
    baseline = log2_binom(n, m)
    return {
        "protocol_bits": protocol_bits,
        "residual_bits": residual,
        "baseline_bits": baseline,
        "savings_bits": baseline - residual,
        "B": size_B,
        "popcount": sum(out.success_bits),
    }
