"""One-way public-coin protocol for UR_k with subset promise.

Alice sketches ``x`` at ``L + 1`` nested subsampling levels, level ``j``
holding each coordinate with probability ``2**-j``; Bob subtracts his own
sketch of ``y`` and tries exact sparse recovery from the sparsest level
downward, returning the first level that yields at least ``k`` differences.

Supports (``x``, ``y``) are given either as collections of indices in
``[0, n)`` or as boolean arrays of length ``n``.
"""
from __future__ import annotations

import functools
import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DecodeFailure, DimensionError, FormatError, ParameterError, ProtocolFailure
from .mixing import TAG_LEVELS, TAG_MATRIX, TAG_WRAP, counter_words, derive, generator
from .recovery import (Backend, RecoveryScheme, build_scheme, pack_syndrome, recover,
                       scheme_bit_size, unpack_syndrome)

MESSAGE_MAGIC = b"URMS"
MESSAGE_VERSION = 1
HEADER_BYTES = 16


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    k: int
    delta: float = 0.01
    backend: Backend = Backend.RS_SYNDROME
    seed: int = 0
    c_rec: int = 16

    def __post_init__(self):
        object.__setattr__(self, "backend", Backend.parse(self.backend))
        if not 1 <= self.k <= self.n // 2:
            raise ParameterError(f"need 1 <= k <= n/2, got n={self.n}, k={self.k}")
        if not 0 < self.delta < 1:
            raise ParameterError("delta must lie in (0, 1)")
        if self.s_max < 4 * self.k:
            raise ParameterError(f"recovery sparsity {self.s_max} is below 4k = {4 * self.k}")

    @property
    def L(self) -> int:
        # floor(log2(n/k)) in integer arithmetic
        return (self.n // self.k).bit_length() - 1

    @property
    def s_max(self) -> int:
        return min(self.c_rec * self.k, self.n // 2)

    @property
    def t(self) -> int:
        return max(self.k, math.ceil(-math.log2(self.delta)))

    @property
    def scheme(self) -> RecoveryScheme:
        return build_scheme(self.n, self.s_max, self.backend, derive(self.seed, TAG_MATRIX))

    @functools.cached_property
    def fingerprint(self) -> int:
        blob = struct.pack("<QQdBQQ", self.n, self.k, self.delta, int(self.backend),
                           self.seed, self.c_rec)
        return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")

    @functools.cached_property
    def level_array(self) -> np.ndarray:
        """Deepest level containing each coordinate (levels are nested)."""
        return levels_of(self.seed, np.arange(self.n), self.L)

    def members(self, j: int) -> np.ndarray:
        """Coordinates ``i`` with ``h_j(i) = 1``."""
        cache = self.__dict__.setdefault("_members", {})
        if j not in cache:
            cache[j] = np.flatnonzero(self.level_array >= j)
        return cache[j]


def levels_of(seed: int, idx, L: int) -> np.ndarray:
    """Level of each coordinate: h_j(i) = 1 iff the top j bits of its word are zero."""
    words = counter_words(derive(seed, TAG_LEVELS), np.asarray(idx, dtype=np.int64))
    lev = np.zeros(words.shape, dtype=np.int64)
    for j in range(1, L + 1):
        lev += (words >> np.uint64(64 - j)) == 0
    return lev


@dataclass(frozen=True, eq=False)
class UrMessage:
    levels: np.ndarray  # (L + 1, rows), entries in the scheme's field
    params_fingerprint: int

    def __eq__(self, other):
        return (isinstance(other, UrMessage)
                and self.params_fingerprint == other.params_fingerprint
                and np.array_equal(self.levels, other.levels))

    def __hash__(self):
        return hash((self.params_fingerprint, self.levels.tobytes()))


def support_indices(x, n: int) -> np.ndarray:
    """Sorted unique indices of a support given as indices or a boolean mask."""
    if isinstance(x, np.ndarray) and x.dtype == bool:
        if x.shape != (n,):
            raise DimensionError(f"indicator must have length {n}, got shape {x.shape}")
        return np.flatnonzero(x)
    arr = np.unique(np.fromiter((int(i) for i in x), dtype=np.int64)) if not isinstance(
        x, np.ndarray) else np.unique(x.astype(np.int64))
    if arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise DimensionError(f"support index outside [0, {n})")
    return arr


def encode_levels(params: ProtocolParams, idx, signs) -> np.ndarray:
    """Level syndromes of the signed vector with ``signs`` at ``idx``."""
    scheme = params.scheme
    out = np.zeros((params.L + 1, scheme.rows), dtype=np.int64)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        return out
    cols = scheme.columns(idx) * np.asarray(signs, dtype=np.int64)[:, None]
    lev = params.level_array[idx]
    for j in np.unique(lev).tolist():
        out[j] = cols[lev == j].sum(axis=0) % scheme.field_order
    out = np.cumsum(out[::-1], axis=0)[::-1] % scheme.field_order
    return np.ascontiguousarray(out)


def alice_encode(x, params: ProtocolParams) -> UrMessage:
    idx = support_indices(x, params.n)
    return UrMessage(encode_levels(params, idx, np.ones(idx.size, np.int64)), params.fingerprint)


def encode_signed(w: dict[int, int], params: ProtocolParams) -> UrMessage:
    """Message for a signed vector in {-1, 0, 1}^n given as ``{index: sign}``."""
    idx = np.fromiter(w.keys(), dtype=np.int64, count=len(w))
    if idx.size and (idx.min() < 0 or idx.max() >= params.n):
        raise DimensionError(f"index outside [0, {params.n})")
    return UrMessage(encode_levels(params, idx, np.fromiter(w.values(), np.int64, len(w))),
                     params.fingerprint)


def subtract(a: UrMessage, b: UrMessage, params: ProtocolParams) -> UrMessage:
    if a.params_fingerprint != b.params_fingerprint:
        raise FormatError("messages were produced under different parameters")
    return UrMessage((a.levels - b.levels) % params.scheme.field_order, a.params_fingerprint)


def decode_difference(levels: np.ndarray, params: ProtocolParams, k: int | None = None) -> list[int]:
    """Bob's level search on the syndromes of ``x - y``; raises ProtocolFailure."""
    k = params.k if k is None else k
    scheme = params.scheme
    for j in range(params.L, -1, -1):
        try:
            w = recover(scheme, levels[j], params.members(j) if j else None)
        except DecodeFailure:
            continue
        if len(w) >= k or j == 0:
            return sorted(w)[:k]
    raise ProtocolFailure("recovery failed at every level")


def bob_decode(msg: UrMessage, y, params: ProtocolParams, k: int | None = None) -> list[int]:
    """Up to ``k`` indices where Alice's and Bob's vectors differ, smallest first."""
    if msg.params_fingerprint != params.fingerprint:
        raise FormatError("message fingerprint does not match the protocol parameters")
    idx = support_indices(y, params.n)
    mine = encode_levels(params, idx, np.ones(idx.size, np.int64))
    return decode_difference((msg.levels - mine) % params.scheme.field_order, params, k)


def message_bits(params: ProtocolParams) -> int:
    return (params.L + 1) * scheme_bit_size(params.scheme) + 8 * HEADER_BYTES


def serialize(msg: UrMessage, params: ProtocolParams) -> bytes:
    scheme = params.scheme
    out = [MESSAGE_MAGIC, struct.pack("<BBHQ", MESSAGE_VERSION, int(params.backend),
                                      params.L + 1, msg.params_fingerprint)]
    for row in msg.levels:
        block = pack_syndrome(scheme, row)
        out.append(struct.pack("<H", len(block)))
        out.append(block)
    return b"".join(out)


def deserialize(data: bytes, params: ProtocolParams) -> UrMessage:
    if len(data) < HEADER_BYTES or data[:4] != MESSAGE_MAGIC:
        raise FormatError("missing URMS header")
    version, backend, nlev, fp = struct.unpack("<BBHQ", data[4:HEADER_BYTES])
    if version != MESSAGE_VERSION:
        raise FormatError(f"unsupported message version {version}")
    if fp != params.fingerprint or backend != int(params.backend) or nlev != params.L + 1:
        raise FormatError("message header does not match the protocol parameters")
    scheme = params.scheme
    pos, rows = HEADER_BYTES, []
    for _ in range(nlev):
        if pos + 2 > len(data):
            raise FormatError("truncated message")
        (size,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + size > len(data):
            raise FormatError("truncated syndrome block")
        rows.append(unpack_syndrome(scheme, data[pos:pos + size]))
        pos += size
    if pos != len(data):
        raise FormatError("trailing bytes after the last level")
    return UrMessage(np.array(rows, dtype=np.int64).reshape(nlev, scheme.rows), fp)


class URProtocol:
    """Protocol handle: ``alice`` builds the message, ``bob`` answers queries."""

    def __init__(self, params: ProtocolParams):
        self.params = params

    def alice(self, x) -> UrMessage:
        return alice_encode(x, self.params)

    def bob(self, msg: UrMessage, y, k: int | None = None) -> list[int]:
        return bob_decode(msg, y, self.params, k)

    def message_bits(self) -> int:
        return message_bits(self.params)


class UniformURProtocol(URProtocol):
    """Both parties relabel coordinates through a shared uniform permutation.

    Conditioned on success, every differing index (every k-subset of them) is
    equally likely over the permutation; message size and failure
    probability are those of the underlying protocol.
    """

    def __init__(self, params: ProtocolParams, seed2: int):
        super().__init__(params)
        self.seed2 = seed2
        self.sigma = generator(seed2, TAG_WRAP).permutation(params.n)
        self.sigma_inv = np.empty_like(self.sigma)
        self.sigma_inv[self.sigma] = np.arange(params.n)

    def forward(self, x) -> np.ndarray:
        return self.sigma[support_indices(x, self.params.n)]

    def alice(self, x) -> UrMessage:
        return alice_encode(self.forward(x), self.params)

    def bob(self, msg: UrMessage, y, k: int | None = None) -> list[int]:
        out = bob_decode(msg, self.forward(y), self.params, k)
        return sorted(self.sigma_inv[out].tolist())


def wrap_uniform(params: ProtocolParams, seed2: int) -> UniformURProtocol:
    return UniformURProtocol(params, seed2)
