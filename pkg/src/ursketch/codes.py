"""Set families with small pairwise intersections.

A family holds N m-subsets of [u] whose pairwise intersections all have
fewer than m/2 elements, so any half of a member identifies it. Families
are built by seeded rejection sampling and then checked exhaustively;
N is a power of two so that each member carries log2(N) bits.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionFailure, FormatError, ParameterError, ProtocolFailure
from .mixing import TAG_FAMILY, generator

FAMILY_MAGIC = b"URCF"
FAMILY_VERSION = 1


def target_size(u: int, m: int) -> int:
    """Largest power of two not above sqrt((u/(2em))^(m/2) - 1), or 0 if that is below 1."""
    log2_base = (m / 2) * math.log2(u / (2 * math.e * m))
    if log2_base > 60:
        log2_n = log2_base / 2  # the -1 is invisible at this size
    else:
        val = 2.0 ** log2_base - 1
        if val < 1:
            return 0
        log2_n = 0.5 * math.log2(val)
    return 1 << math.floor(log2_n + 1e-12)


@dataclass(frozen=True, eq=False)
class CodeFamily:
    u: int
    m: int
    seed: int
    sets: tuple  # tuple of sorted tuples, construction order

    @property
    def N(self) -> int:
        return len(self.sets)

    @property
    def bits(self) -> int:
        return self.N.bit_length() - 1

    def __eq__(self, other):
        return (isinstance(other, CodeFamily) and (self.u, self.m, self.seed, self.sets)
                == (other.u, other.m, other.seed, other.sets))

    def __hash__(self):
        return hash((self.u, self.m, self.seed, self.sets))

    @property
    def _index(self) -> dict:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {s: i for i, s in enumerate(self.sets)}
            object.__setattr__(self, "_idx", idx)
        return idx

    @property
    def incidence(self) -> np.ndarray:
        """Boolean N x u membership matrix."""
        mat = self.__dict__.get("_inc")
        if mat is None:
            mat = np.zeros((self.N, self.u), dtype=bool)
            rows = np.repeat(np.arange(self.N), self.m)
            mat[rows, np.array(self.sets, dtype=np.int64).ravel()] = True
            object.__setattr__(self, "_inc", mat)
        return mat

    def max_intersection(self) -> int:
        """Largest pairwise intersection, checked over all pairs."""
        if self.N < 2:
            return 0
        inc = self.incidence.astype(np.int32)
        gram = inc @ inc.T
        np.fill_diagonal(gram, 0)
        return int(gram.max())

    # -- binary format --------------------------------------------------------

    def to_bytes(self) -> bytes:
        out = bytearray(FAMILY_MAGIC)
        out += struct.pack("<BQQQQ", FAMILY_VERSION, self.u, self.m, self.N, self.seed)
        for s in self.sets:
            prev = 0
            for a in s:
                _put_varint(out, a - prev)
                prev = a
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodeFamily":
        head = 4 + struct.calcsize("<BQQQQ")
        if len(data) < head or data[:4] != FAMILY_MAGIC:
            raise FormatError("missing URCF header")
        version, u, m, N, seed = struct.unpack_from("<BQQQQ", data, 4)
        if version != FAMILY_VERSION:
            raise FormatError(f"unsupported family version {version}")
        pos, sets = head, []
        for _ in range(N):
            cur, prev = [], 0
            for _ in range(m):
                gap, pos = _get_varint(data, pos)
                prev += gap
                cur.append(prev)
            sets.append(tuple(cur))
        if pos != len(data):
            raise FormatError("trailing bytes after the last set")
        return cls(u, m, seed, tuple(sets))


def _put_varint(buf: bytearray, v: int):
    while True:
        byte = v & 0x7F
        v >>= 7
        if v:
            buf.append(byte | 0x80)
        else:
            buf.append(byte)
            return


def _get_varint(data: bytes, pos: int) -> tuple[int, int]:
    v = shift = 0
    while True:
        if pos >= len(data):
            raise FormatError("truncated varint")
        byte = data[pos]
        pos += 1
        v |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return v, pos
        shift += 7


def build_family(u: int, m: int, seed: int = 0) -> CodeFamily:
    if not 1 <= m <= u / (4 * math.e):
        raise ParameterError(f"need 1 <= m <= u/(4e) = {u / (4 * math.e):.3f}, got m={m}")
    N = target_size(u, m)
    if N < 1:
        raise ParameterError(f"(u={u}, m={m}) admits no nonempty family")
    rng = generator(seed, TAG_FAMILY)
    limit = (m + 1) // 2  # intersections must stay strictly below m/2
    owners: list[list[int]] = [[] for _ in range(u)]
    sets: list[tuple] = []
    for _ in range(100 * N):
        cand = np.sort(rng.choice(u, size=m, replace=False))
        hits = [j for a in cand.tolist() for j in owners[a]]
        if hits and np.bincount(hits).max() >= limit:
            continue
        for a in cand.tolist():
            owners[a].append(len(sets))
        sets.append(tuple(cand.tolist()))
        if len(sets) == N:
            return CodeFamily(u, m, seed, tuple(sets))
    raise ConstructionFailure(f"kept {len(sets)} of {N} sets within {100 * N} draws")


def index_to_set(fam: CodeFamily, idx: int) -> tuple:
    if not 0 <= idx < fam.N:
        raise ParameterError(f"index {idx} outside [0, {fam.N})")
    return fam.sets[idx]


def set_to_index(fam: CodeFamily, S) -> int:
    key = tuple(sorted(int(a) for a in S))
    try:
        return fam._index[key]
    except KeyError:
        raise LookupError("set is not a member of the family") from None


def decode_half(fam: CodeFamily, T) -> tuple:
    """The member containing ``T``; raises ProtocolFailure if none does."""
    T = sorted({int(a) for a in T})
    if 2 * len(T) < fam.m:
        raise ParameterError(f"need |T| >= m/2 = {fam.m / 2}, got {len(T)}")
    if T and (T[0] < 0 or T[-1] >= fam.u):
        raise ProtocolFailure("T has elements outside the universe")
    hits = np.flatnonzero(fam.incidence[:, T].all(axis=1))
    if hits.size != 1:
        raise ProtocolFailure("no family member contains T")
    return fam.sets[int(hits[0])]
