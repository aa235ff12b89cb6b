import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ursketch.errors import DimensionError, DomainError, HypothesisError, ParameterError
from ursketch.infocheck import (JointDistribution, PredicateTable, binary_entropy,
                                check_adaptivity_bound, check_bits_saving, check_pochhammer,
                                entropy, equality_instance, mutual_information,
                                random_adaptivity_instance)


def mi_by_entropies(p):
    return entropy(p.sum(1)) + entropy(p.sum(0)) - entropy(p)


def euler_product(q, terms=200):
    # prod (1 - q^j) via the pentagonal number series
    total = 0.0
    for k in range(-terms, terms + 1):
        total += (-1) ** (k % 2) * q ** (k * (3 * k - 1) // 2)
    return total


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0) == 0.0 == binary_entropy(1)
    assert binary_entropy(0.25) == pytest.approx(0.8112781244591328, abs=1e-15)
    for bad in (-0.1, 1.1):
        with pytest.raises(DomainError):
            binary_entropy(bad)


def test_mutual_information_examples():
    assert mutual_information(JointDistribution(np.full((4, 3), 1 / 12))) == pytest.approx(0, abs=1e-12)
    assert mutual_information(JointDistribution(np.eye(2) / 2)) == pytest.approx(1.0, abs=1e-12)


def test_equality_instance_closed_form():
    n, t = 1024, 5
    lam = t / 10
    f, d = equality_instance(n, t)
    hit = lam + (1 - lam) / n
    miss = (1 - lam) / n
    info = math.log2(n) + hit * math.log2(hit) + (n - 1) * miss * math.log2(miss)
    assert mutual_information(d) == pytest.approx(info, abs=1e-9)
    assert info == pytest.approx(4.0055876, abs=1e-6)  # not exactly t
    rec = check_adaptivity_bound(f, d)
    assert rec["delta"] == 1 / n
    assert rec["lhs"] == pytest.approx(0.5 + 0.5 / 1024, abs=1e-12)
    rhs = (info + binary_entropy(1 / n)) / 10
    assert rec["rhs"] == pytest.approx(rhs, abs=1e-9)
    assert rec["lhs"] / rec["rhs"] >= 0.5
    assert rec["holds_fano"]


def test_stated_bound_breaks_on_a_small_copy_channel():
    # Y = X w.p. 1/2 else uniform on 16 points, f = equality
    n = 16
    p = np.full((n, n), 0.5 / n**2)
    p[np.diag_indices(n)] += 0.5 / n
    rec = check_adaptivity_bound(PredicateTable(np.eye(n, dtype=int)), JointDistribution(p))
    assert rec["lhs"] == pytest.approx(0.53125, abs=1e-12)
    assert rec["rhs"] == pytest.approx(0.377, abs=1e-3)
    assert not rec["holds"] and rec["holds_fano"]


def test_independent_case():
    rng = np.random.default_rng(0)
    for _ in range(50):
        f = PredicateTable(rng.integers(0, 2, (8, 5)))
        d = JointDistribution(np.outer(np.full(8, 1 / 8), rng.dirichlet(np.ones(5))))
        rec = check_adaptivity_bound(f, d)
        assert rec["lhs"] <= rec["delta"] + 1e-12 and rec["holds"]


def test_hypothesis_errors():
    f = PredicateTable(np.eye(2, dtype=int))
    with pytest.raises(HypothesisError):
        check_adaptivity_bound(f, JointDistribution([[0.6, 0.1], [0.2, 0.1]]))
    with pytest.raises(HypothesisError):
        check_adaptivity_bound(f, JointDistribution(np.eye(2) / 2), delta=0.25)
    with pytest.raises(DimensionError):
        check_adaptivity_bound(PredicateTable(np.eye(3, dtype=int)), JointDistribution(np.eye(2) / 2))
    with pytest.raises(DomainError):
        JointDistribution([[0.5, 0.6]])
    with pytest.raises(DomainError):
        PredicateTable([[0, 2]])


def test_pochhammer_values():
    rec = check_pochhammer(1)
    assert 3.46 <= rec["product"] <= 3.47
    assert 1 / rec["product"] == pytest.approx(0.288788, abs=1e-6)
    for K in (1, 2, 3, 4):
        direct = 1 / euler_product(2 ** (-1 / K))
        assert check_pochhammer(K)["product"] == pytest.approx(direct, rel=1e-9)
    assert check_pochhammer(4)["product"] <= 2**20
    assert all(check_pochhammer(K)["holds"] for K in range(1, 65))
    with pytest.raises(ParameterError):
        check_pochhammer(0)


def test_bits_saving_examples():
    rec = check_bits_saving(100, 10, [0] * 10 + [1])
    assert rec["lhs"] == pytest.approx(0) and rec["rhs"] == 0 and rec["holds"]
    rec = check_bits_saving(100, 10, [0] * 9 + [1, 0])
    assert rec["lhs"] == pytest.approx(math.log2(91 / 10), abs=1e-9)
    assert rec["rhs"] == pytest.approx(math.log2(9), abs=1e-12) and rec["holds"]
    with pytest.raises(DomainError):
        check_bits_saving(100, 2, [0.5, 0, 0, 0.5])


@given(st.integers(0, 2**32))
def test_mutual_information_bounds(seed):
    rng = np.random.default_rng(seed)
    nx, ny = (int(v) for v in rng.integers(1, 9, size=2))
    table = rng.dirichlet(np.full(nx * ny, 0.3)).reshape(nx, ny)
    d = JointDistribution(table)
    mi = mutual_information(d)
    assert mi >= 0
    assert mi <= min(entropy(d.px), entropy(d.py)) + 1e-12
    assert mi == pytest.approx(mi_by_entropies(table), abs=1e-9)


@given(st.integers(0, 2**32))
def test_random_instances_are_valid(seed):
    f, d = random_adaptivity_instance(np.random.default_rng(seed))
    assert np.allclose(d.px, 1 / d.p.shape[0])
    rec = check_adaptivity_bound(f, d)
    assert 0 <= rec["lhs"] <= 1


@given(st.integers(2, 200), st.integers(0, 2**32))
def test_bits_saving_exact(n, seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, n))
    pmf = rng.dirichlet(np.full(m + 1, 0.5))
    rec = check_bits_saving(n, m, pmf)
    exact = sum(float(w) * (math.log2(math.comb(n, m)) - math.log2(math.comb(n, v)))
                for v, w in enumerate(pmf))
    assert rec["lhs"] == pytest.approx(exact, abs=1e-9)
    assert rec["holds"]
