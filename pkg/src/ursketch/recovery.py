"""Exact sparse recovery from linear syndromes over a finite field.

Two interchangeable backends share one contract:

* ``GF3_BRUTE``: a seed-derived uniform random matrix over GF(3) with enough
  rows that no nonzero ``2*s_max``-sparse vector lies in its kernel (with
  positive probability), decoded by exhaustive enumeration. Faithful but only
  usable for tiny ``n``.
* ``RS_SYNDROME``: ``2*s_max`` power-sum syndromes ``sum_i w_i (i+1)^t`` over
  the prime field F_p, p the smallest prime above ``n``, decoded with
  Berlekamp-Massey, a root search and Forney's formula.

Whatever the backend, :func:`recover` re-encodes every candidate before
returning it, so a returned vector always reproduces the syndrome and has at
most ``s_max`` nonzeros. Anything else raises :class:`DecodeFailure`.

Sparse vectors are dicts ``{index: +1 or -1}``; dense vectors are integer
sequences of length ``n`` with entries in {-1, 0, 1}.
"""
from __future__ import annotations

import enum
import functools
import itertools
import math
import struct
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .errors import DecodeFailure, DimensionError, DomainError, FormatError, ParameterError
from .mixing import TAG_MATRIX, generator

SCHEME_MAGIC = b"URSK"
SCHEME_VERSION = 1


class Backend(enum.IntEnum):
    GF3_BRUTE = 1
    RS_SYNDROME = 2

    @classmethod
    def parse(cls, name: "str | Backend") -> "Backend":
        if isinstance(name, Backend):
            return name
        key = name.strip().lower().replace("-", "_")
        aliases = {"gf3": cls.GF3_BRUTE, "gf3_brute": cls.GF3_BRUTE,
                   "rs": cls.RS_SYNDROME, "rs_syndrome": cls.RS_SYNDROME}
        try:
            return aliases[key]
        except KeyError:
            raise ParameterError(f"unknown backend {name!r}") from None


def smallest_prime_above(n: int) -> int:
    p = n + 1
    while True:
        if p >= 2 and all(p % d for d in range(2, math.isqrt(p) + 1)):
            return p
        p += 1


def ceil_log(base: int, x: int) -> int:
    """Smallest e >= 0 with base**e >= x, in exact integer arithmetic."""
    e, v = 0, 1
    while v < x:
        v *= base
        e += 1
    return e


def gf3_rows(n: int, s_max: int) -> int:
    return 2 * s_max + ceil_log(3, math.comb(n, 2 * s_max)) + 1


class TritVector:
    """Dense vector over GF(3), packed five trits per byte."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        arr = np.asarray(entries, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError("a trit vector is a non-empty 1-d sequence")
        if arr.min() < 0 or arr.max() > 2:
            raise DomainError("trit entries must lie in {0, 1, 2}")
        self.entries = arr.astype(np.uint8)
        self.entries.flags.writeable = False

    def __len__(self):
        return int(self.entries.size)

    def __eq__(self, other):
        return isinstance(other, TritVector) and np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"TritVector({self.entries.tolist()})"

    def pack(self) -> bytes:
        pad = (-len(self)) % 5
        t = np.concatenate([self.entries, np.zeros(pad, np.uint8)]).reshape(-1, 5).astype(np.int64)
        return (t @ np.array([1, 3, 9, 27, 81])).astype(np.uint8).tobytes()

    @classmethod
    def unpack(cls, data: bytes, length: int) -> "TritVector":
        if len(data) != -(-length // 5):
            raise FormatError(f"{len(data)} bytes cannot hold exactly {length} trits")
        b = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
        if b.size and b.max() >= 243:
            raise FormatError("byte value >= 243 is not a trit quintuple")
        t = (b[:, None] // np.array([1, 3, 9, 27, 81])) % 3
        return cls(t.reshape(-1)[:length])


@dataclass(frozen=True)
class RecoveryScheme:
    n: int
    s_max: int
    backend: Backend
    seed: int

    @property
    def rows(self) -> int:
        if self.backend is Backend.GF3_BRUTE:
            return gf3_rows(self.n, self.s_max)
        return 2 * self.s_max

    @property
    def field_order(self) -> int:
        if self.backend is Backend.GF3_BRUTE:
            return 3
        return _prime_above(self.n)

    @functools.cached_property
    def matrix(self) -> np.ndarray:
        """The GF(3) measurement matrix (rows x n); RS schemes have none stored."""
        if self.backend is not Backend.GF3_BRUTE:
            raise ParameterError("only GF3_BRUTE schemes carry an explicit matrix")
        m = generator(self.seed, TAG_MATRIX).integers(0, 3, size=(self.rows, self.n), dtype=np.int64)
        m.flags.writeable = False
        return m

    def columns(self, idx) -> np.ndarray:
        """Columns of the measurement map for coordinates ``idx``, one per row of the result."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.backend is Backend.GF3_BRUTE:
            return self.matrix[:, idx].T
        p = self.field_order
        alpha = (idx + 1) % p
        out = np.empty((idx.size, self.rows), dtype=np.int64)
        cur = alpha.copy()
        for t in range(self.rows):
            out[:, t] = cur
            cur = cur * alpha % p
        return out

    def syndrome_of(self, idx, signs) -> np.ndarray:
        """Syndrome of the sparse vector with ``signs`` at positions ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return np.zeros(self.rows, dtype=np.int64)
        signs = np.asarray(signs, dtype=np.int64)
        return (signs @ self.columns(idx)) % self.field_order

    def to_bytes(self) -> bytes:
        return SCHEME_MAGIC + struct.pack("<BBQQQ", SCHEME_VERSION, int(self.backend),
                                          self.n, self.s_max, self.seed)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RecoveryScheme":
        if len(data) != 30 or data[:4] != SCHEME_MAGIC:
            raise FormatError("not a serialized recovery scheme")
        version, backend, n, s_max, seed = struct.unpack("<BBQQQ", data[4:])
        if version != SCHEME_VERSION:
            raise FormatError(f"unsupported scheme version {version}")
        try:
            backend = Backend(backend)
        except ValueError:
            raise FormatError(f"unknown backend byte {backend}") from None
        return build_scheme(n, s_max, backend, seed)


@functools.lru_cache(maxsize=None)
def _prime_above(n: int) -> int:
    return smallest_prime_above(n)


@functools.lru_cache(maxsize=64)
def build_scheme(n: int, s_max: int, backend="rs", seed: int = 0) -> RecoveryScheme:
    backend = Backend.parse(backend)
    if n < 2 or s_max < 1 or 2 * s_max > n:
        raise ParameterError(f"need 1 <= s_max <= n/2, got n={n}, s_max={s_max}")
    if not 0 <= seed < 2**64:
        raise ParameterError("seed must be a 64-bit unsigned integer")
    return RecoveryScheme(n, s_max, backend, seed)


def as_sparse(scheme_n: int, w) -> dict[int, int]:
    """Normalize a dense or sparse signed vector to ``{index: +-1}``."""
    if isinstance(w, Mapping):
        items = ((int(i), int(v)) for i, v in w.items())
    else:
        arr = np.asarray(w, dtype=np.int64)
        if arr.ndim != 1 or arr.size != scheme_n:
            raise DimensionError(f"expected a length-{scheme_n} vector, got shape {arr.shape}")
        nz = np.flatnonzero(arr)
        items = zip(nz.tolist(), arr[nz].tolist())
    out = {}
    for i, v in items:
        if not 0 <= i < scheme_n:
            raise DimensionError(f"index {i} outside [0, {scheme_n})")
        if v not in (-1, 0, 1):
            raise DomainError(f"entry {v} at index {i} is not in {{-1, 0, 1}}")
        if v:
            out[i] = v
    return out


def encode_syndrome(scheme: RecoveryScheme, w) -> np.ndarray:
    """The forward map: syndrome of a signed vector with entries in {-1, 0, 1}."""
    sp = as_sparse(scheme.n, w)
    return scheme.syndrome_of(list(sp), list(sp.values()))


def scheme_bit_size(scheme: RecoveryScheme) -> int:
    """Bits needed to ship one syndrome of ``scheme``."""
    if scheme.backend is Backend.GF3_BRUTE:
        return -(-scheme.rows // 5) * 8
    return scheme.rows * (scheme.field_order - 1).bit_length()


def pack_syndrome(scheme: RecoveryScheme, syn) -> bytes:
    syn = np.asarray(syn, dtype=np.int64)
    if scheme.backend is Backend.GF3_BRUTE:
        return TritVector(syn).pack()
    width = (scheme.field_order - 1).bit_length()
    acc = 0
    for v in syn.tolist():
        acc = (acc << width) | v
    nbits = width * syn.size
    nbytes = -(-nbits // 8)
    return (acc << (8 * nbytes - nbits)).to_bytes(nbytes, "big")


def unpack_syndrome(scheme: RecoveryScheme, data: bytes) -> np.ndarray:
    rows = scheme.rows
    if scheme.backend is Backend.GF3_BRUTE:
        return TritVector.unpack(data, rows).entries.astype(np.int64)
    width = (scheme.field_order - 1).bit_length()
    nbits = width * rows
    if len(data) != -(-nbits // 8):
        raise FormatError("syndrome block has the wrong length")
    acc = int.from_bytes(data, "big") >> (8 * len(data) - nbits)
    mask = (1 << width) - 1
    out = [(acc >> (width * (rows - 1 - t))) & mask for t in range(rows)]
    if max(out, default=0) >= scheme.field_order:
        raise FormatError("syndrome entry exceeds the field order")
    return np.array(out, dtype=np.int64)


def recover(scheme: RecoveryScheme, syndrome, candidates: Iterable[int] | None = None) -> dict[int, int]:
    """Return the unique signed vector with at most ``s_max`` nonzeros and this syndrome.

    ``candidates`` optionally restricts the coordinates that may be nonzero
    (the caller's knowledge of where the support can lie); it only prunes the
    search, never the verification.
    """
    syn = np.asarray(syndrome, dtype=np.int64)
    if syn.shape != (scheme.rows,):
        raise DimensionError(f"syndrome must have length {scheme.rows}")
    if not syn.any():
        return {}
    if candidates is None:
        cand = np.arange(scheme.n, dtype=np.int64)
    else:
        cand = np.unique(np.asarray(list(candidates) if not isinstance(candidates, np.ndarray)
                                    else candidates, dtype=np.int64))
    if scheme.backend is Backend.GF3_BRUTE:
        w = _gf3_search(scheme, syn, cand)
    else:
        w = _rs_decode(scheme, syn, cand)
    if len(w) > scheme.s_max or not np.array_equal(
            scheme.syndrome_of(list(w), list(w.values())), syn):
        raise DecodeFailure("candidate failed re-encoding check")
    return w


def _gf3_search(scheme: RecoveryScheme, syn: np.ndarray, cand: np.ndarray) -> dict[int, int]:
    # ascending sparsity, lexicographic support, value 1 before 2
    cols = scheme.matrix[:, cand].T  # (|cand|, rows)
    for s in range(1, min(scheme.s_max, cand.size) + 1):
        vals = np.array(list(itertools.product((1, 2), repeat=s)), dtype=np.int64)  # (2^s, s)
        combos = itertools.combinations(range(cand.size), s)
        while True:
            chunk = np.array(list(itertools.islice(combos, 4096)), dtype=np.int64)
            if chunk.size == 0:
                break
            # (chunk, 2^s, rows)
            sy = np.einsum("vs,csr->cvr", vals, cols[chunk]) % 3
            hit = np.all(sy == syn, axis=2)
            if hit.any():
                c, v = np.unravel_index(np.argmax(hit), hit.shape)
                return {int(cand[chunk[c, j]]): (1 if vals[v, j] == 1 else -1) for j in range(s)}
    raise DecodeFailure("no vector of sparsity <= s_max matches the syndrome")


def berlekamp_massey(seq: list[int], p: int) -> list[int]:
    """Shortest connection polynomial ``C`` (C[0] = 1) generating ``seq`` over F_p."""
    C, B = [1], [1]
    L, m, b = 0, 1, 1
    for n_, s in enumerate(seq):
        d = s
        for i in range(1, L + 1):
            d += C[i] * seq[n_ - i]
        d %= p
        if d == 0:
            m += 1
            continue
        coef = d * pow(b, p - 2, p) % p
        T = C[:]
        if len(C) < len(B) + m:
            C.extend([0] * (len(B) + m - len(C)))
        for i, bi in enumerate(B):
            C[i + m] = (C[i + m] - coef * bi) % p
        if 2 * L <= n_:
            L, B, b, m = n_ + 1 - L, T, d, 1
        else:
            m += 1
    return C[:L + 1] + [0] * max(0, L + 1 - len(C))


def _rs_decode(scheme: RecoveryScheme, syn: np.ndarray, cand: np.ndarray) -> dict[int, int]:
    p = scheme.field_order
    seq = syn.tolist()
    lam = berlekamp_massey(seq, p)
    deg = len(lam) - 1
    if deg == 0 or deg > scheme.s_max or lam[deg] == 0:
        raise DecodeFailure("locator polynomial has no valid degree")
    # roots of lam(1/X) <=> roots of the reversed polynomial at X = i + 1
    x = (cand + 1) % p
    acc = np.full(cand.size, lam[0], dtype=np.int64)
    for c in lam[1:]:
        acc = (acc * x + c) % p
    pos = cand[acc == 0]
    if pos.size != deg:
        raise DecodeFailure(f"locator of degree {deg} has {pos.size} roots among candidates")
    # Forney: w_i = -Omega(X_i^-1) / Lambda'(X_i^-1), syndromes indexed from power 1
    omega = [sum(seq[j - i] * lam[i] for i in range(j + 1)) % p for j in range(deg)]
    dlam = [(i * lam[i]) % p for i in range(1, deg + 1)]
    out = {}
    for i in pos.tolist():
        xinv = pow(i + 1, p - 2, p)
        num = _horner(omega, xinv, p)
        den = _horner(dlam, xinv, p)
        if den == 0:
            raise DecodeFailure("repeated locator root")
        v = (-num * pow(den, p - 2, p)) % p
        if v == 1:
            out[i] = 1
        elif v == p - 1:
            out[i] = -1
        else:
            raise DecodeFailure(f"recovered value {v} at {i} is not +-1")
    return out


def _horner(coeffs: list[int], x: int, p: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def to_dense(n: int, w: Mapping[int, int]) -> np.ndarray:
    out = np.zeros(n, dtype=np.int64)
    for i, v in w.items():
        out[i] = v
    return out
