"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import itertools
import math
import time
from collections import Counter, defaultdict

import numpy as np
import pytest
from scipy import stats

from ursketch.augindex import make_universe, run_trial
from ursketch.cli import scaling_rows
from ursketch.codec import CodecKParams, CodecParams, dec, dec_k, enc, enc_k
from ursketch.codes import build_family, decode_half
from ursketch.errors import DecodeFailure, ProtocolFailure
from ursketch.infocheck import (check_adaptivity_bound, check_pochhammer, equality_instance,
                                random_adaptivity_instance)
from ursketch.mixing import trial_seed
from ursketch.protocol import ProtocolParams, URProtocol, UniformURProtocol
from ursketch.recovery import build_scheme, encode_syndrome, recover
from ursketch.sketch import ExactFindDup, Sketch, ur_from_findup, ur_from_streaming


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {detail}")
    return emit


class AlwaysFail:
    def alice(self, x):
        return None

    def bob(self, msg, y, k=None):
        raise ProtocolFailure("stub")


def test_c01_exhaustive_gf3_recovery(report):
    t0 = time.time()
    n, s = 18, 2
    sch = build_scheme(n, s, "gf3", 0)
    vectors = [{}]
    for size in (1, 2):
        for supp in itertools.combinations(range(n), size):
            for signs in itertools.product((1, -1), repeat=size):
                vectors.append(dict(zip(supp, signs)))
    bad = sum(recover(sch, encode_syndrome(sch, w)) != w for w in vectors)
    dt = time.time() - t0
    ok = len(vectors) == 649 and bad == 0 and dt < 60
    report(1, ok, f"{len(vectors)} vectors, {bad} mismatches, {dt:.1f}s")
    assert ok


def test_c02_no_silent_decode_errors(report):
    n, s = 1024, 8
    sch = build_scheme(n, s, "rs", 0)
    rng = np.random.default_rng(2)
    wrong_sparse = unverified = failures = verified = 0
    for _ in range(10_000):
        k = int(rng.integers(1, s + 1))
        w = dict(zip(rng.choice(n, k, replace=False).tolist(), rng.choice([-1, 1], k).tolist()))
        try:
            wrong_sparse += recover(sch, encode_syndrome(sch, w)) != w
        except DecodeFailure:
            wrong_sparse += 1
    for _ in range(10_000):
        k = int(rng.integers(9, 33))
        w = dict(zip(rng.choice(n, k, replace=False).tolist(), rng.choice([-1, 1], k).tolist()))
        syn = encode_syndrome(sch, w)
        try:
            got = recover(sch, syn)
        except DecodeFailure:
            failures += 1
            continue
        if len(got) <= s and np.array_equal(encode_syndrome(sch, got), syn):
            verified += 1
        else:
            unverified += 1
    ok = wrong_sparse == 0 and unverified == 0
    report(2, ok, f"sparse mismatches {wrong_sparse}; overloaded: {failures} DecodeFailure, "
                  f"{verified} verified, {unverified} unverified")
    assert ok


def test_c03_protocol_soundness_and_failure_rate(report):
    t0 = time.time()
    trials, fails, unsound = 10_000, 0, 0
    for t in range(trials):
        ts = trial_seed(3, t)
        params = ProtocolParams(1024, 4, 0.01, "rs", ts)
        rng = np.random.default_rng(ts)
        x = rng.choice(1024, size=512, replace=False)
        proto = URProtocol(params)
        try:
            out = proto.bob(proto.alice(x), x[100:])
        except ProtocolFailure:
            fails += 1
            continue
        unsound += len(out) != 4 or not set(out) <= set(x[:100].tolist())
    dt = time.time() - t0
    rate = fails / trials
    ok = unsound == 0 and rate <= 0.02 and dt < 300
    report(3, ok, f"failure rate {rate:.4f}, unsound answers {unsound}, {dt:.0f}s")
    assert ok


def test_c04_message_size_scaling(report):
    rows = scaling_rows([2**10, 2**12, 2**14, 2**16], 4, 0.01)
    ratios = [r["ratio"] for r in rows]
    spread = max(ratios) / min(ratios)
    ok = spread < 2
    report(4, ok, "ratios " + ", ".join(f"{v:.2f}" for v in ratios) + f"; max/min {spread:.3f}")
    assert ok


def test_c05_codec_losslessness(report):
    lossy = errors = 0
    popcounts = []
    for t in range(500):
        ts = trial_seed(5, t)
        p = CodecParams(4096, 2.0**-64, ts)
        assert (p.m, p.K, p.R) == (512, 4, 20)
        S = np.random.default_rng(ts).choice(4096, size=p.m, replace=False)
        full = frozenset(S.tolist())
        for proto in (p.protocol(), AlwaysFail()):
            try:
                out = enc(S, p, proto)
                lossy += dec(out, p, proto) != full
            except Exception:  # any exception counts against the criterion
                errors += 1
                continue
            if not isinstance(proto, AlwaysFail):
                popcounts.append(sum(out.success_bits))
    ok = lossy == 0 and errors == 0
    report(5, ok, f"1000 round trips (500 real, 500 always-fail), {lossy} lossy, {errors} exceptions, "
                  f"mean popcount {np.mean(popcounts):.2f}/20")
    assert ok


def test_c06_codec_k_statistics(report):
    lossy = 0
    per_round = []
    for t in range(500):
        ts = trial_seed(6, t)
        p = CodecKParams(2**20, 16, ts)
        assert (p.m, p.R) == (4096, 6)
        proto = p.protocol()
        S = np.random.default_rng(ts).choice(2**20, size=p.m, replace=False)
        out = enc_k(S, p, proto)
        lossy += dec_k(out, p, proto) != frozenset(S.tolist())
        per_round.extend(out.recovered_per_round)
    mean = float(np.mean(per_round))
    ok = lossy == 0 and 0.4 * 16 <= mean <= 0.6 * 16
    report(6, ok, f"{lossy} lossy of 500; mean recovered per successful round {mean:.3f} "
                  f"over {len(per_round)} rounds (target [6.4, 9.6])")
    assert ok


def test_c07_adaptivity_bound(report):
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(10_000):
        f, d = random_adaptivity_instance(rng, 16)
        violations += not check_adaptivity_bound(f, d)["holds"]
    rec = check_adaptivity_bound(*equality_instance(1024, 5))
    ratio = rec["lhs"] / rec["rhs"]
    ok = violations == 0 and rec["holds"] and ratio >= 0.5
    report(7, ok, f"random: {violations}/10000 violations; equality instance lhs {rec['lhs']:.6f} "
                  f"rhs {rec['rhs']:.6f} holds={rec['holds']} lhs/rhs {ratio:.3f} "
                  f"(with H2(lhs) in place of H2(delta): rhs {rec['rhs_fano']:.6f} "
                  f"holds={rec['holds_fano']})")
    assert ok


def test_c08_pochhammer_sweep(report):
    recs = [check_pochhammer(K) for K in range(1, 65)]
    k1 = recs[0]["product"]
    ok = all(r["holds"] for r in recs) and 3.46 <= k1 <= 3.47
    report(8, ok, f"K=1 product {k1:.6f}; bound holds for {sum(r['holds'] for r in recs)}/64")
    assert ok


def test_c09_code_family(report):
    details, ok = [], True
    for seed in range(5):
        fam = build_family(256, 8, seed)
        worst = max(len(set(a) & set(b)) for a, b in itertools.combinations(fam.sets, 2))
        npairs = len(list(itertools.combinations(fam.sets, 2)))
        halves = bad = 0
        for S in fam.sets:
            for T in itertools.combinations(S, 4):
                halves += 1
                bad += decode_half(fam, T) != S
        ok &= fam.N == 32 and npairs == 496 and worst <= 3 and halves == 32 * 70 and bad == 0
        details.append(f"seed {seed}: N={fam.N} max|S∩S'|={worst} halves {halves - bad}/{halves}")
    report(9, ok, "; ".join(details))
    assert ok


def test_c10_uniform_sampling(report):
    params = ProtocolParams(256, 1, seed=10)
    x = list(range(0, 256, 8))  # 32 elements
    y = x[8:]
    counts = Counter()
    fails = 0
    s2 = 0
    while sum(counts.values()) < 100_000:
        proto = UniformURProtocol(params, trial_seed(10, s2))
        s2 += 1
        try:
            (i,) = proto.bob(proto.alice(x), y)
        except ProtocolFailure:
            fails += 1
            continue
        counts[i] += 1
    assert set(counts) <= set(x[:8])
    chi2, p = stats.chisquare([counts[i] for i in x[:8]])
    ok = p > 1e-3
    report(10, ok, f"100000 successes ({fails} failures), chi2 {chi2:.2f}, p {p:.4f}")
    assert ok


def test_c11_augindex_end_to_end(report):
    beta = 10
    P = make_universe(22000, 2, beta, 4, 11)
    recs = [run_trial(P, trial_seed(11, t), "adaptive") for t in range(300)]
    rate = sum(r["success"] for r in recs) / 300
    wrong = sum(r["wrong"] for r in recs)
    by_istar = defaultdict(Counter)
    for r in recs:
        for lvl, c in r["level_histogram"].items():
            by_istar[r["i_star"]][int(lvl)] += c
    level_ok, notes = True, []
    for i_star, hist in sorted(by_istar.items()):
        total = sum(hist.values())
        for j in range(1, i_star):
            frac = hist[j] / total
            bound = 2 * beta ** -(i_star - j)
            level_ok &= frac <= bound
            notes.append(f"i*={i_star} j={j}: {frac:.3f} <= {bound:.3f}")
    ok = rate >= 0.6 and wrong == 0 and level_ok
    report(11, ok, f"success {rate:.3f}, wrong bits {wrong}; " + "; ".join(notes))
    assert ok


def test_c12_reduction_harness(report):
    rng = np.random.default_rng(12)
    n = 64
    findup = ur_from_findup(ExactFindDup, n)
    valid = 0
    for _ in range(1000):
        S = rng.choice(n, size=int(rng.integers(2, n + 1)), replace=False)
        T = S[int(rng.integers(1, S.size)):]
        (out,) = findup.bob(findup.alice(S), T, S.size)
        valid += out in set(S.tolist()) - set(T.tolist())
    agree = sound = 0
    for t in range(1000):
        params = ProtocolParams(n, 2, seed=trial_seed(12, t))
        red = ur_from_streaming(lambda: Sketch(params), n)
        direct = URProtocol(params)
        S = rng.choice(n, size=int(rng.integers(2, n + 1)), replace=False)
        T = S[int(rng.integers(1, S.size)):]
        diff = set(S.tolist()) - set(T.tolist())
        try:
            a = red.bob(red.alice(S), T, 2)
        except ProtocolFailure:
            a = None
        try:
            b = direct.bob(direct.alice(S), T)
        except ProtocolFailure:
            b = None
        agree += a == b
        sound += a is None or (set(a) <= diff and len(a) == min(2, len(diff)))
    ok = valid == 1000 and agree == 1000 and sound == 1000
    report(12, ok, f"findup valid {valid}/1000; sketch reduction sound {sound}/1000, "
                   f"matches direct protocol {agree}/1000")
    assert ok
