"""Augmented indexing solved through a UR protocol.

Charlie turns each block of his bit string into a member of a code family,
places level ``i`` members in the universe with ``beta**i`` copies of each
element, hides everything behind a random bijection ``pi`` and sends Alice's
message. Diane already knows every block after her own, so she marks those
elements as known and keeps asking Bob for new ones until half of her
block's set is in hand; the code family then gives back the whole set.

Universe labels are laid out level by level: label ``off_i + a * beta**i + r``
stands for the triple ``(i, a, r)``. Labels at or beyond ``|A|`` are padding
that never enters Charlie's set.
"""
from __future__ import annotations

import functools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .codes import CodeFamily, build_family, decode_half, index_to_set, set_to_index
from .errors import DimensionError, ParameterError, ProtocolFailure
from .mixing import TAG_FAMILY, TAG_PI, derive, generator, trial_seed
from .protocol import ProtocolParams, URProtocol


@dataclass(frozen=True, eq=False)
class AugIndexParams:
    n: int
    L: int
    beta: int
    m: int
    seed: int
    u: tuple  # u[i - 1] = u_i
    families: tuple

    @property
    def weights(self) -> list[int]:
        return [self.beta ** i for i in range(1, self.L + 1)]

    @functools.cached_property
    def offsets(self) -> np.ndarray:
        sizes = [u * w for u, w in zip(self.u, self.weights)]
        return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    @property
    def core_size(self) -> int:
        """|A| before padding."""
        return int(self.offsets[-1])

    @property
    def block_bits(self) -> list[int]:
        return [f.bits for f in self.families]

    @property
    def N(self) -> int:
        return sum(self.block_bits)

    @functools.cached_property
    def pi(self) -> np.ndarray:
        return generator(self.seed, TAG_PI).permutation(self.n)

    @functools.cached_property
    def pi_inv(self) -> np.ndarray:
        inv = np.empty_like(self.pi)
        inv[self.pi] = np.arange(self.n)
        return inv

    def block_of(self, j: int) -> int:
        """Level i (1-based) whose block holds bit j."""
        if not 0 <= j < self.N:
            raise DimensionError(f"bit index {j} outside [0, {self.N})")
        acc = 0
        for i, b in enumerate(self.block_bits, 1):
            acc += b
            if j < acc:
                return i
        raise AssertionError("unreachable")

    def block_start(self, i: int) -> int:
        return sum(self.block_bits[:i - 1])

    def labels(self, i: int, elems) -> np.ndarray:
        """All copies (i, a, r) of the elements ``a`` of level i."""
        w = self.beta ** i
        a = np.asarray(sorted(elems), dtype=np.int64)
        return (self.offsets[i - 1] + a[:, None] * w + np.arange(w)).ravel()

    def triple(self, label: int) -> tuple[int, int, int] | None:
        """(i, a, r) for a core label, None for padding."""
        if not 0 <= label < self.core_size:
            return None
        i = int(np.searchsorted(self.offsets, label, side="right"))
        a, r = divmod(label - int(self.offsets[i - 1]), self.beta ** i)
        return i, a, r


def make_universe(n_hint: int, L: int, beta: int = 100, m: int = 4, seed: int = 0) -> AugIndexParams:
    if L < 1 or beta < 2 or m < 1:
        raise ParameterError("need L >= 1, beta >= 2, m >= 1")
    u = tuple(n_hint // (beta ** i * L) for i in range(1, L + 1))
    if u[-1] < 4 * math.e * m:
        raise ParameterError(f"u_L = {u[-1]} is below 4e*m = {4 * math.e * m:.1f}")
    fams = tuple(build_family(ui, m, derive(seed, TAG_FAMILY, i)) for i, ui in enumerate(u, 1))
    return AugIndexParams(n_hint, L, beta, m, seed, u, fams)


@dataclass(frozen=True)
class AugIndexInstance:
    z: tuple
    j_star: int

    @property
    def suffix(self) -> tuple:
        return self.z[self.j_star + 1:]


def random_instance(params: AugIndexParams, seed: int) -> AugIndexInstance:
    rng = generator(seed, TAG_PI)
    z = tuple(int(b) for b in rng.integers(0, 2, params.N))
    return AugIndexInstance(z, int(rng.integers(params.N)))


def _block_value(bits) -> int:
    return int("".join(map(str, bits)) or "0", 2)


def _block_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - t)) & 1 for t in range(width)]


def block_sets(z, params: AugIndexParams, levels=None) -> dict[int, tuple]:
    """S_i for each requested level, read from the bits of ``z`` (most significant first)."""
    if len(z) != params.N:
        raise DimensionError(f"z must have {params.N} bits, got {len(z)}")
    out = {}
    for i in (range(1, params.L + 1) if levels is None else levels):
        start = params.block_start(i)
        chunk = z[start:start + params.block_bits[i - 1]]
        out[i] = index_to_set(params.families[i - 1], _block_value(chunk))
    return out


def charlie_set(z, params: AugIndexParams) -> np.ndarray:
    """pi(S) for Charlie's input."""
    sets = block_sets(z, params)
    labels = np.concatenate([params.labels(i, S) for i, S in sets.items()])
    return np.sort(params.pi[labels])


def charlie_encode(instance: AugIndexInstance, params: AugIndexParams, protocol):
    return protocol.alice(charlie_set(instance.z, params))


def _known_levels(instance: AugIndexInstance, params: AugIndexParams):
    i_star = params.block_of(instance.j_star)
    full = (0,) * (instance.j_star + 1) + tuple(instance.suffix)
    known = block_sets(full, params, range(i_star + 1, params.L + 1))
    return i_star, known


def _initial_T(params: AugIndexParams, known: dict) -> set:
    T = set()
    for i, S in known.items():
        T.update(params.labels(i, S).tolist())
    return T


def _finish(params: AugIndexParams, instance: AugIndexInstance, i_star: int, found) -> int:
    fam: CodeFamily = params.families[i_star - 1]
    S = decode_half(fam, found)
    idx = set_to_index(fam, S)
    width = params.block_bits[i_star - 1]
    return _block_bits(idx, width)[instance.j_star - params.block_start(i_star)]


def diane_decode_adaptive(message, instance: AugIndexInstance, params: AugIndexParams, protocol,
                          trace: dict | None = None) -> int:
    """Diane with one-element answers; raises ProtocolFailure on Fail.

    Only ``instance.j_star`` and ``instance.suffix`` are read.
    """
    i_star, known = _known_levels(instance, params)
    T = _initial_T(params, known)
    found: set[int] = set()
    hist: Counter = Counter()
    seen_T = {len(T)}  # T only grows, so its size identifies it
    used = 0
    need = math.ceil(params.m / 2)
    try:
        while len(found) < need:
            if used >= 4 * params.m:
                raise ProtocolFailure(f"no half of block {i_star} after {used} queries")
            used += 1
            out = protocol.bob(message, params.pi[np.fromiter(T, np.int64, len(T))])
            if not out:
                continue
            label = int(params.pi_inv[out[0]])
            tri = params.triple(label)
            if tri is None or label in T:
                continue
            i, a, _ = tri
            hist[i] += 1
            T.update(params.labels(i, [a]).tolist())
            seen_T.add(len(T))
            if i == i_star:
                found.add(a)
        return _finish(params, instance, i_star, found)
    finally:
        if trace is not None:
            trace.update(queries_used=used, level_histogram=dict(sorted(hist.items())),
                         distinct_T_count=len(seen_T), i_star=i_star)


def diane_decode_oneshot(message, instance: AugIndexInstance, params: AugIndexParams, protocol_k,
                         trace: dict | None = None) -> int:
    """Diane with a single k-element query; raises ProtocolFailure on Fail."""
    i_star, known = _known_levels(instance, params)
    T = _initial_T(params, known)
    hist: Counter = Counter()
    found: set[int] = set()
    try:
        out = protocol_k.bob(message, params.pi[np.fromiter(T, np.int64, len(T))])
        for e in out:
            label = int(params.pi_inv[e])
            tri = params.triple(label)
            if tri is None or label in T:
                continue
            hist[tri[0]] += 1
            if tri[0] == i_star:
                found.add(tri[1])
        if 2 * len(found) < params.m:
            raise ProtocolFailure(f"only {len(found)} elements of block {i_star} recovered")
        return _finish(params, instance, i_star, found)
    finally:
        if trace is not None:
            trace.update(queries_used=1, level_histogram=dict(sorted(hist.items())),
                         distinct_T_count=1, i_star=i_star)


def adaptive_protocol(params: AugIndexParams, seed: int, backend="rs") -> URProtocol:
    return URProtocol(ProtocolParams(params.n, 1, backend=backend, seed=seed))


def oneshot_protocol(params: AugIndexParams, k: int, seed: int, backend="rs",
                     c_rec: int = 4) -> URProtocol:
    return URProtocol(ProtocolParams(params.n, k, backend=backend, seed=seed, c_rec=c_rec))


def run_trial(params: AugIndexParams, seed: int, mode: str = "adaptive", k: int = 32,
              backend="rs") -> dict:
    """One end-to-end reduction run; ``correct`` compares against the hidden bit."""
    inst = random_instance(params, seed)
    if mode == "adaptive":
        proto = adaptive_protocol(params, derive(seed, 1), backend)
        diane = diane_decode_adaptive
    elif mode == "oneshot":
        proto = oneshot_protocol(params, k, derive(seed, 1), backend)
        diane = diane_decode_oneshot
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    msg = charlie_encode(inst, params, proto)
    trace: dict = {}
    try:
        bit = diane(msg, inst, params, proto, trace)
    except ProtocolFailure:
        bit = None
    return {"success": bit is not None and bit == inst.z[inst.j_star],
            "wrong": bit is not None and bit != inst.z[inst.j_star],
            "queries_used": trace["queries_used"],
            "level_histogram": {str(i): c for i, c in trace["level_histogram"].items()},
            "distinct_T_count": trace["distinct_T_count"],
            "i_star": trace["i_star"]}


def uniformity_probe(params: AugIndexParams, S, T, trials: int, seed: int = 0,
                     backend="rs") -> dict:
    """Distribution of Bob's answer over S \\ T with the images of S and T held fixed.

    Each trial draws a fresh bijection from S \\ T onto the fixed image
    pi(S \\ T) and fresh protocol randomness, so any non-uniformity would
    have to come from the protocol seeing through the relabeling.
    """
    S, T = sorted({int(a) for a in S}), {int(a) for a in T}
    if not T < set(S):
        raise ParameterError("T must be a proper subset of S")
    diff = np.array([a for a in S if a not in T], dtype=np.int64)
    image = np.sort(params.pi[diff])
    y = params.pi[np.array(sorted(T), dtype=np.int64)]
    x = np.concatenate([image, y])
    counts = Counter()
    failures = 0
    for t in range(trials):
        ts = trial_seed(seed, t)
        mapping = generator(ts, TAG_PI).permutation(diff)  # mapping[r] sits at image[r]
        proto = URProtocol(ProtocolParams(params.n, 1, backend=backend, seed=ts))
        try:
            out = proto.bob(proto.alice(x), y)
        except ProtocolFailure:
            failures += 1
            continue
        pos = int(np.searchsorted(image, out[0]))
        if pos == image.size or image[pos] != out[0]:
            failures += 1
            continue
        counts[int(mapping[pos])] += 1
    freq = np.array([counts[a] for a in diff.tolist()], dtype=float)
    total = freq.sum()
    if diff.size > 1 and total > 0:
        chi2, p = stats.chisquare(freq)
        chi2, p = float(chi2), float(p)
    else:
        chi2, p = 0.0, 1.0
    return {"counts": {int(a): int(c) for a, c in zip(diff, freq)}, "successes": int(total),
            "failures": failures, "chi2": chi2, "p_value": p}
