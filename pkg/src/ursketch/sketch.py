"""Linear turnstile sketch for support-finding and l0-sampling, plus the
reductions that turn streaming algorithms into UR protocols.

The sketch holds exactly Alice's protocol message for the net update
vector ``z``, so it is linear and mergeable. Queries are only guaranteed
while ``z`` stays in {-1, 0, 1}^n; over GF(3) three +1 updates to one index
wrap back to zero and nothing detects that.
"""
from __future__ import annotations

import json
import struct
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import DimensionError, FormatError, ParameterError, ProtocolFailure
from .protocol import (ProtocolParams, UniformURProtocol, UrMessage, decode_difference,
                       deserialize, serialize, support_indices)


@dataclass(frozen=True)
class StreamUpdate:
    index: int
    delta: int

    def __post_init__(self):
        if self.delta not in (-1, 1):
            raise ParameterError(f"update delta must be +1 or -1, got {self.delta}")


class Sketch:
    """Accumulated level syndromes of the net update vector.

    With ``seed2`` set, coordinates are relabeled through the shared uniform
    permutation of :class:`UniformURProtocol`, which is what makes
    :func:`query_l0_sample` uniform over the support.
    """

    def __init__(self, params: ProtocolParams, seed2: int | None = None):
        self.params = params
        self.seed2 = seed2
        self._wrap = UniformURProtocol(params, seed2) if seed2 is not None else None
        self.accumulator = np.zeros((params.L + 1, params.scheme.rows), dtype=np.int64)
        self.update_count = 0

    @property
    def wrapped(self) -> bool:
        return self._wrap is not None

    def _label(self, i: int) -> int:
        return int(self._wrap.sigma[i]) if self._wrap is not None else i

    def update(self, i: int, delta: int) -> "Sketch":
        if not 0 <= i < self.params.n:
            raise DimensionError(f"index {i} outside [0, {self.params.n})")
        if delta not in (-1, 1):
            raise ParameterError(f"update delta must be +1 or -1, got {delta}")
        scheme = self.params.scheme
        j = self._label(i)
        col = scheme.columns([j])[0]
        top = int(self.params.level_array[j])
        self.accumulator[:top + 1] = (self.accumulator[:top + 1] + delta * col) % scheme.field_order
        self.update_count += 1
        return self

    def copy(self) -> "Sketch":
        out = Sketch.__new__(Sketch)
        out.params, out.seed2, out._wrap = self.params, self.seed2, self._wrap
        out.accumulator = self.accumulator.copy()
        out.update_count = self.update_count
        return out

    def negate(self) -> "Sketch":
        out = self.copy()
        out.accumulator = (-out.accumulator) % self.params.scheme.field_order
        return out

    def message(self) -> UrMessage:
        return UrMessage(self.accumulator.copy(), self.params.fingerprint)

    def __eq__(self, other):
        return (isinstance(other, Sketch) and self.params == other.params
                and self.seed2 == other.seed2
                and np.array_equal(self.accumulator, other.accumulator))

    def to_bytes(self) -> bytes:
        body = serialize(self.message(), self.params)
        return struct.pack("<Q", self.update_count) + body

    def load(self, data: bytes) -> "Sketch":
        if len(data) < 8:
            raise FormatError("truncated sketch state")
        (self.update_count,) = struct.unpack_from("<Q", data)
        self.accumulator = deserialize(data[8:], self.params).levels.copy()
        return self

    # streaming-algorithm interface used by ur_from_streaming
    def query(self, k: int) -> list[int]:
        return query_support_find(self, k)


def update(sketch: Sketch, u: StreamUpdate) -> Sketch:
    return sketch.update(u.index, u.delta)


def merge(s1: Sketch, s2: Sketch) -> Sketch:
    if s1.params.fingerprint != s2.params.fingerprint or s1.seed2 != s2.seed2:
        raise ParameterError("cannot merge sketches built with different parameters")
    out = s1.copy()
    out.accumulator = (s1.accumulator + s2.accumulator) % s1.params.scheme.field_order
    out.update_count = s1.update_count + s2.update_count
    return out


def query_support_find(sketch: Sketch, k: int) -> list[int]:
    """``min(k, |supp z|)`` indices of ``supp z``; raises ProtocolFailure."""
    if k < 1:
        raise ParameterError("k must be positive")
    out = decode_difference(sketch.accumulator, sketch.params, k)
    if sketch._wrap is not None:
        out = sorted(sketch._wrap.sigma_inv[out].tolist())
    return out


def query_l0_sample(sketch: Sketch, k: int) -> list[int]:
    """As :func:`query_support_find`, uniform over k-subsets of the support given success."""
    if not sketch.wrapped:
        raise ParameterError("l0-sampling needs a sketch built with a wrapping seed")
    return query_support_find(sketch, k)


# -- stream text format ------------------------------------------------------

def parse_stream(lines: Iterable[str]) -> Iterator[tuple[int, StreamUpdate | int]]:
    """Yield ``(line_no, StreamUpdate)`` for ``U i +-1`` and ``(line_no, k)`` for ``Q k``."""
    for no, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "U" and len(parts) == 3 and parts[2] in ("+1", "-1", "1"):
                yield no, StreamUpdate(int(parts[1]), int(parts[2]))
                continue
            if parts[0] == "Q" and len(parts) == 2:
                yield no, int(parts[1])
                continue
        except ValueError:
            pass
        raise FormatError(f"line {no}: cannot parse {line!r}")


def run_stream(sketch: Sketch, lines: Iterable[str]) -> Iterator[dict]:
    """Apply a text stream to ``sketch``, yielding one result record per query."""
    for no, item in parse_stream(lines):
        if isinstance(item, StreamUpdate):
            sketch.update(item.index, item.delta)
            continue
        rec = {"line": no, "k": item}
        try:
            rec["result"] = query_support_find(sketch, item)
            rec["status"] = "ok"
        except ProtocolFailure:
            rec["result"] = None
            rec["status"] = "fail"
        yield rec


def format_records(records: Iterable[dict]) -> Iterator[str]:
    for rec in records:
        yield json.dumps(rec, sort_keys=True)


# -- reductions from streaming algorithms to UR protocols --------------------

class SupportFindAlgorithm(Protocol):
    def update(self, i: int, delta: int): ...
    def query(self, k: int) -> list[int]: ...
    def to_bytes(self) -> bytes: ...
    def load(self, data: bytes): ...


class FindDupAlgorithm(Protocol):
    def consume(self, item: int): ...
    def result(self) -> int: ...
    def to_bytes(self) -> bytes: ...
    def load(self, data: bytes): ...


class ExactSupportFind:
    """Full-memory support-find oracle; never fails."""

    def __init__(self):
        self.z: dict[int, int] = {}

    def update(self, i: int, delta: int):
        v = self.z.get(i, 0) + delta
        if v:
            self.z[i] = v
        else:
            self.z.pop(i, None)
        return self

    def query(self, k: int) -> list[int]:
        return sorted(self.z)[:k]

    def to_bytes(self) -> bytes:
        return b"".join(struct.pack("<qq", i, v) for i, v in sorted(self.z.items()))

    def load(self, data: bytes):
        self.z = {i: v for i, v in struct.iter_unpack("<qq", data)}
        return self


class ExactFindDup:
    """Lookup-table duplicate finder: reports the first repeated item."""

    def __init__(self):
        self.seen: set[int] = set()
        self.dup: int | None = None

    def consume(self, item: int):
        if item in self.seen and self.dup is None:
            self.dup = item
        self.seen.add(item)
        return self

    def result(self) -> int:
        if self.dup is None:
            raise ProtocolFailure("no duplicate in the stream")
        return self.dup

    def to_bytes(self) -> bytes:
        return json.dumps({"seen": sorted(self.seen), "dup": self.dup}).encode()

    def load(self, data: bytes):
        state = json.loads(data)
        self.seen, self.dup = set(state["seen"]), state["dup"]
        return self


class StreamingURProtocol:
    """UR_k protocol from a support-find streaming algorithm.

    Alice inserts +1 for every index of ``x`` and ships the algorithm state;
    Bob resumes it, inserts -1 for every index of ``y`` and queries, so the
    algorithm sees exactly the indicator of ``supp x \\ supp y``.
    """

    def __init__(self, make_alg: Callable[[], SupportFindAlgorithm], n: int):
        self.make_alg = make_alg
        self.n = n

    def alice(self, x) -> bytes:
        alg = self.make_alg()
        for i in support_indices(x, self.n).tolist():
            alg.update(i, +1)
        return alg.to_bytes()

    def bob(self, msg: bytes, y, k: int = 1) -> list[int]:
        alg = self.make_alg().load(msg)
        for i in support_indices(y, self.n).tolist():
            alg.update(i, -1)
        return alg.query(k)


class FindDupURProtocol:
    """UR protocol (subset promise) from a duplicate-finding streaming algorithm.

    Alice streams ``supp x``; Bob, who knows ``|x|``, continues with the
    ``n + 1 - |x|`` smallest elements outside ``supp y``. The duplicate is
    exactly an index where ``x`` and ``y`` differ.
    """

    def __init__(self, make_alg: Callable[[], FindDupAlgorithm], n: int):
        self.make_alg = make_alg
        self.n = n

    def alice(self, x) -> bytes:
        alg = self.make_alg()
        for i in support_indices(x, self.n).tolist():
            alg.consume(i)
        return alg.to_bytes()

    def bob(self, msg: bytes, y, x_weight: int) -> list[int]:
        alg = self.make_alg().load(msg)
        mask = np.ones(self.n, dtype=bool)
        mask[support_indices(y, self.n)] = False
        need = self.n + 1 - x_weight
        rest = np.flatnonzero(mask)
        if rest.size < need:
            raise ParameterError("promise violated: supp y must be a proper subset of supp x")
        for i in rest[:need].tolist():
            alg.consume(i)
        return [alg.result()]


def ur_from_streaming(make_alg: Callable[[], SupportFindAlgorithm], n: int) -> StreamingURProtocol:
    return StreamingURProtocol(make_alg, n)


def ur_from_findup(make_alg: Callable[[], FindDupAlgorithm], n: int) -> FindDupURProtocol:
    return FindDupURProtocol(make_alg, n)
