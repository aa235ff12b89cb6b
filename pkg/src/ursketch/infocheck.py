"""Exact numerical checks of the information-theoretic bounds.

Everything here is a finite table computation in float64; no sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import log2_binom
from .errors import DimensionError, DomainError, HypothesisError, ParameterError

TOL = 1e-9


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """pmf table ``p[x, y]``."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise DomainError("pmf must be a nonempty 2-d table")
        if (p < 0).any():
            raise DomainError("pmf has negative entries")
        if abs(p.sum() - 1) > 1e-12:
            raise DomainError(f"pmf sums to {p.sum()!r}, not 1")
        object.__setattr__(self, "p", p)

    @property
    def px(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @classmethod
    def from_channel(cls, channel) -> "JointDistribution":
        """Uniform X pushed through the row-stochastic ``channel[x, y]``."""
        ch = np.asarray(channel, dtype=float)
        return cls(ch / ch.shape[0])


@dataclass(frozen=True, eq=False)
class PredicateTable:
    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f)
        if f.ndim != 2 or not np.isin(f, (0, 1)).all():
            raise DomainError("predicate must be a 2-d 0/1 table")
        object.__setattr__(self, "f", f.astype(bool))

    def column_rates(self) -> np.ndarray:
        """Pr(f(X, y) = 1) under uniform X, for every y."""
        return self.f.mean(axis=0)


def binary_entropy(p: float) -> float:
    if not 0 <= p <= 1:
        raise DomainError(f"probability {p} outside [0, 1]")
    if p in (0, 1):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def entropy(pmf) -> float:
    q = np.asarray(pmf, dtype=float).ravel()
    q = q[q > 0]
    return float(-(q * np.log2(q)).sum())


def mutual_information(d: JointDistribution) -> float:
    p = d.p
    outer = np.outer(d.px, d.py)
    nz = p > 0
    return max(0.0, float((p[nz] * np.log2(p[nz] / outer[nz])).sum()))


def equality_instance(n: int, t: float) -> tuple[PredicateTable, JointDistribution]:
    """f(x, y) = [x = y]; Y copies uniform X w.p. t/log2 n, else is fresh uniform."""
    lam = t / math.log2(n)
    if not 0 <= lam <= 1:
        raise ParameterError("need 0 <= t <= log2 n")
    p = np.full((n, n), (1 - lam) / n**2)
    p[np.diag_indices(n)] += lam / n
    return PredicateTable(np.eye(n, dtype=np.int8)), JointDistribution(p)


def check_adaptivity_bound(f: PredicateTable, d: JointDistribution, delta: float | None = None) -> dict:
    """Compare Pr(f(X,Y)=1) with (I(X;Y) + H2(delta)) / log2(1/delta).

    ``delta`` defaults to the largest column rate. ``holds_fano`` reports the
    same comparison with H2 evaluated at the left-hand side instead, which is
    what the flag-bit argument actually pays.
    """
    if f.f.shape != d.p.shape:
        raise DimensionError(f"predicate shape {f.f.shape} does not match pmf shape {d.p.shape}")
    nx = d.p.shape[0]
    if np.abs(d.px - 1 / nx).max() > 1e-12:
        raise HypothesisError("X-marginal is not uniform")
    rates = f.column_rates()
    worst = float(rates.max())
    if delta is None:
        delta = worst
    elif worst > delta + 1e-12:
        raise HypothesisError(f"column rate {worst} exceeds delta = {delta}")
    lhs = min(1.0, float(d.p[f.f].sum()))  # float sums can overshoot by an ulp
    info = mutual_information(d)
    if delta <= 0:
        rhs = rhs_fano = 0.0
    elif delta >= 1:
        rhs = rhs_fano = math.inf
    else:
        denom = -math.log2(delta)
        rhs = (info + binary_entropy(delta)) / denom
        rhs_fano = (info + binary_entropy(lhs)) / denom
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + TOL, "delta": delta,
            "mutual_information": info, "rhs_fano": rhs_fano,
            "holds_fano": lhs <= rhs_fano + TOL}


def random_adaptivity_instance(rng: np.random.Generator, max_size: int = 16):
    """Random predicate and channel from uniform X, sizes in [2, max_size]."""
    nx, ny = rng.integers(2, max_size + 1, size=2)
    density = rng.random()
    f = (rng.random((nx, ny)) < density).astype(np.int8)
    channel = rng.dirichlet(np.full(ny, rng.choice([0.1, 0.5, 1.0, 5.0])), size=nx)
    return PredicateTable(f), JointDistribution.from_channel(channel)


def check_pochhammer(K: int) -> dict:
    """prod_{j>=1} 1/(1 - 2^(-j/K)) against 2^(5K).

    Terms are multiplied until they are within 1e-15 of 1; the rest is
    capped by exp(2 * sum_{j>J} 2^(-j/K)), using -log(1-x) <= 2x for x <= 1/2.
    """
    if K < 1:
        raise ParameterError("K must be a positive integer")
    r = 2.0 ** (-1.0 / K)
    log_prod, j = 0.0, 0
    while True:
        j += 1
        term = 1.0 / (1.0 - r**j)
        log_prod += math.log(term)
        if term - 1 < 1e-15:
            break
    tail = 2 * r ** (j + 1) / (1 - r)
    product = math.exp(log_prod + tail)
    bound = 2.0 ** (5 * K)
    return {"K": K, "product": product, "bound": bound, "terms": j, "holds": product <= bound}


def check_bits_saving(n: int, m: int, w_pmf) -> dict:
    """E[log2 C(n,m) - log2 C(n,W)] against d*log2(n/m - 1) with d = m - E W."""
    if not 1 <= m < n:
        raise ParameterError("need 1 <= m < n")
    w = np.asarray(w_pmf, dtype=float)
    if (w < 0).any() or abs(w.sum() - 1) > 1e-12:
        raise DomainError("W pmf must be nonnegative and sum to 1")
    if w.size > m + 1 and w[m + 1:].any():
        raise DomainError("W pmf puts mass above m")
    w = w[:m + 1]
    support = np.flatnonzero(w)
    top = log2_binom(n, m)
    lhs = float(sum(w[v] * (top - log2_binom(n, int(v))) for v in support))
    d = m - float((np.arange(w.size) * w).sum())
    rhs = d * math.log2(n / m - 1)
    return {"n": n, "m": m, "d": d, "lhs": lhs, "rhs": rhs, "holds": lhs >= rhs - TOL}
