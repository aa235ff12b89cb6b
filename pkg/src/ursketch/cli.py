"""Command-line entry point: ``ursketch <subcommand> ...``.

Every subcommand writes JSON lines (``scaling`` writes CSV) to standard
output or ``--output``. All randomness flows from ``--seed``; trial ``t``
runs under ``trial_seed(seed, t)``. Exit status is 0 when every invoked
check passes, 1 when one fails and 2 for bad flags.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import augindex, codec, codes, infocheck
from .errors import (ConstructionFailure, DimensionError, DomainError, FormatError,
                     ParameterError, ProtocolFailure)
from .mixing import TAG_TRIAL, generator, trial_seed
from .protocol import ProtocolParams, URProtocol, message_bits
from .sketch import Sketch, format_records, run_stream


class CheckFailed(Exception):
    pass


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


@contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit(fh, rec: dict):
    fh.write(json.dumps(rec, sort_keys=True) + "\n")


# -- ur-sim ---------------------------------------------------------------------

def ur_trial(params: ProtocolParams, diff: int, rng: np.random.Generator) -> tuple[bool, bool]:
    """One protocol run on random y < x with |x - y| = diff; returns (failed, wrong)."""
    n = params.n
    x = rng.choice(n, size=max(diff, n // 2), replace=False)
    y = x[diff:]
    proto = URProtocol(params)
    try:
        out = proto.bob(proto.alice(x), y)
    except ProtocolFailure:
        return True, False
    truth = set(x[:diff].tolist())
    return False, len(out) != min(params.k, diff) or not set(out) <= truth


def cmd_ur_sim(args, out):
    bad = 0
    for n in args.n:
        for k in args.k:
            for delta in args.delta:
                diff = args.diff if args.diff else min(100, n // 4)
                fails = wrong = 0
                for t in range(args.trials):
                    ts = trial_seed(args.seed, t)
                    params = ProtocolParams(n, k, delta, args.backend, ts, args.c_rec)
                    f, w = ur_trial(params, diff, generator(ts, TAG_TRIAL))
                    fails += f
                    wrong += w
                bad += wrong
                _emit(out, {"n": n, "k": k, "delta": delta, "diff": diff, "trials": args.trials,
                            "failures": fails, "wrong": wrong,
                            "empirical_rate": fails / args.trials if args.trials else 0.0,
                            "message_bits": message_bits(ProtocolParams(
                                n, k, delta, args.backend, args.seed, args.c_rec))})
    if bad:
        raise CheckFailed(f"{bad} unsound answers")


# -- sketch ---------------------------------------------------------------------

def cmd_sketch(args, out):
    params = ProtocolParams(args.n, args.k, args.delta, args.backend, args.seed, args.c_rec)
    sk = Sketch(params, args.wrap_seed)
    src = sys.stdin if args.input in (None, "-") else open(args.input)
    try:
        for line in format_records(run_stream(sk, src)):
            out.write(line + "\n")
    finally:
        if src is not sys.stdin:
            src.close()


# -- codecs ---------------------------------------------------------------------

class _AlwaysFail:
    def bob(self, msg, y, k=None):
        raise ProtocolFailure("stub")

    def alice(self, x):
        return None


def cmd_codec(args, out):
    lossy = 0
    for t in range(args.trials):
        ts = trial_seed(args.seed, t)
        params = codec.CodecParams(args.n, args.delta, ts)
        proto = _AlwaysFail() if args.stub == "fail" else params.protocol(args.backend)
        S = generator(ts, TAG_TRIAL).choice(args.n, size=params.m, replace=False)
        enc = codec.enc(S, params, proto)
        ok = codec.dec(enc, params, proto) == frozenset(S.tolist())
        lossy += not ok
        bits = None if args.stub == "fail" else proto.message_bits()
        cost = codec.measure_cost(enc, args.n, params.m, bits)
        _emit(out, {"seed": ts, "b": "".join(map(str, enc.success_bits)), "B": cost["B"],
                    "s_bits": bits, "residual_bits": cost["residual_bits"],
                    "baseline_bits": cost["baseline_bits"], "savings_bits": cost["savings_bits"],
                    "lossless": ok})
    if lossy:
        raise CheckFailed(f"{lossy} lossy round trips")


def cmd_codec_k(args, out):
    lossy = 0
    for t in range(args.trials):
        ts = trial_seed(args.seed, t)
        params = codec.CodecKParams(args.n, args.k, ts)
        proto = _AlwaysFail() if args.stub == "fail" else params.protocol(args.backend)
        S = generator(ts, TAG_TRIAL).choice(args.n, size=params.m, replace=False)
        enc = codec.enc_k(S, params, proto)
        ok = codec.dec_k(enc, params, proto) == frozenset(S.tolist())
        lossy += not ok
        bits = None if args.stub == "fail" else proto.message_bits()
        cost = codec.measure_cost(enc, args.n, params.m, bits)
        _emit(out, {"seed": ts, "b": "".join(map(str, enc.success_bits)), "B": cost["B"],
                    "s_bits": bits, "residual_bits": cost["residual_bits"],
                    "baseline_bits": cost["baseline_bits"], "savings_bits": cost["savings_bits"],
                    "recovered_per_round": list(enc.recovered_per_round), "lossless": ok})
    if lossy:
        raise CheckFailed(f"{lossy} lossy round trips")


# -- codes / augindex -----------------------------------------------------------

def cmd_codes_build(args, out):
    fam = codes.build_family(args.u, args.m, args.seed)
    worst = fam.max_intersection()
    with open(args.out, "wb") as fh:
        fh.write(fam.to_bytes())
    _emit(out, {"u": fam.u, "m": fam.m, "N": fam.N, "bits": fam.bits, "seed": fam.seed,
                "max_intersection": worst, "out": args.out})
    if 2 * worst >= fam.m and fam.N > 1:
        raise CheckFailed("intersection bound violated")


def cmd_augindex(args, out):
    params = augindex.make_universe(args.n, args.levels, args.beta, args.m, args.seed)
    wrong = 0
    for t in range(args.trials):
        ts = trial_seed(args.seed, t)
        rec = augindex.run_trial(params, ts, args.mode, args.k, args.backend)
        wrong += rec["wrong"]
        _emit(out, {"trial": t, "seed": ts, **rec})
    if wrong:
        raise CheckFailed(f"{wrong} wrong bits")


# -- verify ---------------------------------------------------------------------

def cmd_verify_lemma1(args, out):
    rng = generator(args.seed, TAG_TRIAL)
    failures = []
    for i in range(args.instances):
        f, d = infocheck.random_adaptivity_instance(rng, args.max_size)
        rec = infocheck.check_adaptivity_bound(f, d)
        if not rec["holds"]:
            failures.append({"instance": i, "lhs": rec["lhs"], "rhs": rec["rhs"]})
    checked = args.instances
    if args.equality:
        n, t = args.equality
        rec = infocheck.check_adaptivity_bound(*infocheck.equality_instance(int(n), t))
        checked += 1
        if not rec["holds"]:
            failures.append({"instance": f"equality n={int(n)} t={t}", "lhs": rec["lhs"],
                             "rhs": rec["rhs"], "rhs_fano": rec["rhs_fano"]})
    _emit(out, {"check": "lemma1", "checked": checked, "failures": failures})
    if failures:
        raise CheckFailed(f"{len(failures)} instances violate the bound")


def cmd_verify_pochhammer(args, out):
    recs = [infocheck.check_pochhammer(K) for K in range(1, args.kmax + 1)]
    failures = [r for r in recs if not r["holds"]]
    _emit(out, {"check": "pochhammer", "checked": len(recs), "failures": failures})
    if failures:
        raise CheckFailed(f"{len(failures)} values of K violate the bound")


def cmd_verify_bits_saving(args, out):
    rng = generator(args.seed, TAG_TRIAL)
    failures = []
    for i in range(args.cases):
        n = int(rng.integers(2, args.max_n + 1))
        m = int(rng.integers(1, n))
        pmf = rng.dirichlet(np.full(m + 1, 0.5))
        rec = infocheck.check_bits_saving(n, m, pmf)
        if not rec["holds"]:
            failures.append({"case": i, **{k: rec[k] for k in ("n", "m", "lhs", "rhs")}})
    _emit(out, {"check": "bits-saving", "checked": args.cases, "failures": failures})
    if failures:
        raise CheckFailed(f"{len(failures)} cases violate the bound")


# -- scaling --------------------------------------------------------------------

def scaling_rows(ns, k: int, delta: float, backend="rs", c_rec: int = 16) -> list[dict]:
    rows = []
    for n in ns:
        params = ProtocolParams(n, k, delta, backend, 0, c_rec)
        bits = message_bits(params)
        t = params.t
        rows.append({"n": n, "bits": bits, "ratio": bits / (t * math.log2(n / t) ** 2)})
    return rows


def cmd_scaling(args, out):
    rows = scaling_rows(args.ns, args.k, args.delta, args.backend, args.c_rec)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["n", "bits", "ratio"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({"n": r["n"], "bits": r["bits"], "ratio": f"{r['ratio']:.6f}"})
    out.write(buf.getvalue())


# -- parser ---------------------------------------------------------------------

def _common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--output", default=None, help="write results here instead of stdout")


def _proto_flags(p):
    p.add_argument("--backend", default="rs", choices=["rs", "gf3"])
    p.add_argument("--c-rec", type=int, default=16, dest="c_rec",
                   help="recovery sparsity multiplier: s_max = c_rec * k")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    ap = argparse.ArgumentParser(prog="ursketch", description=__doc__, formatter_class=fmt)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ur-sim", formatter_class=fmt, help="protocol failure rates and sizes",
                       epilog="output: one JSON object per (n, k, delta):\n"
                              "  {n, k, delta, diff, trials, failures, wrong, empirical_rate,"
                              " message_bits}\nexit 1 if any returned index is outside x - y")
    p.add_argument("--n", type=_ints, required=True, help="comma-separated universe sizes")
    p.add_argument("--k", type=_ints, default=[1])
    p.add_argument("--delta", type=_floats, default=[0.01])
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--diff", type=int, default=0, help="|x - y| (default min(100, n/4))")
    _proto_flags(p)
    _common(p)
    p.set_defaults(func=cmd_ur_sim)

    p = sub.add_parser("sketch", formatter_class=fmt, help="run a turnstile stream",
                       epilog="input lines: 'U <i> <+1|-1>', 'Q <k>', '#' comments\n"
                              "output: one JSON object per query: {line, k, result, status}\n"
                              "  status is 'ok' or 'fail'; result is null on fail")
    p.add_argument("--input", default="-", help="stream file (default stdin)")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--k", type=int, default=1, help="protocol k (sets the sketch size)")
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--wrap-seed", type=int, default=None, dest="wrap_seed",
                   help="relabel through a shared permutation (uniform samples)")
    _proto_flags(p)
    _common(p)
    p.set_defaults(func=cmd_sketch)

    codec_epilog = ("output: one JSON object per trial:\n"
                    "  {seed, b, B, s_bits, residual_bits, baseline_bits, savings_bits, lossless%s}\n"
                    "exit 1 if any round trip is lossy")
    for name, func, extra in (("codec", cmd_codec, ""),
                              ("codec-k", cmd_codec_k, ", recovered_per_round")):
        p = sub.add_parser(name, help=f"{name} encoder experiments")
        s2 = p.add_subparsers(dest="action", required=True)
        r = s2.add_parser("run", formatter_class=fmt, epilog=codec_epilog % extra)
        r.add_argument("--n", type=int, required=True)
        if name == "codec":
            r.add_argument("--delta", type=float, required=True)
        else:
            r.add_argument("--k", type=int, required=True)
        r.add_argument("--trials", type=int, default=10)
        r.add_argument("--backend", default="rs", choices=["rs", "gf3"])
        r.add_argument("--stub", choices=["fail"], default=None,
                       help="replace the protocol with one that always fails")
        _common(r)
        r.set_defaults(func=func)

    p = sub.add_parser("codes", help="set families")
    s2 = p.add_subparsers(dest="action", required=True)
    r = s2.add_parser("build", formatter_class=fmt,
                      epilog="writes the binary family to --out and prints\n"
                             "  {u, m, N, bits, seed, max_intersection, out}")
    r.add_argument("--u", type=int, required=True)
    r.add_argument("--m", type=int, required=True)
    r.add_argument("--out", required=True)
    _common(r)
    r.set_defaults(func=cmd_codes_build)

    p = sub.add_parser("augindex", help="augmented-indexing reduction")
    s2 = p.add_subparsers(dest="action", required=True)
    r = s2.add_parser("run", formatter_class=fmt,
                      epilog="output: one JSON object per trial:\n"
                             "  {trial, seed, success, wrong, queries_used, level_histogram,"
                             " distinct_T_count, i_star}\nexit 1 if any bit is silently wrong")
    r.add_argument("--n", type=int, default=22000)
    r.add_argument("--levels", type=int, default=2)
    r.add_argument("--beta", type=int, default=10)
    r.add_argument("--m", type=int, default=4)
    r.add_argument("--k", type=int, default=32, help="samples per query in oneshot mode")
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--mode", choices=["adaptive", "oneshot"], default="adaptive")
    r.add_argument("--backend", default="rs", choices=["rs", "gf3"])
    _common(r)
    r.set_defaults(func=cmd_augindex)

    p = sub.add_parser("verify", help="exact lemma checks")
    s2 = p.add_subparsers(dest="action", required=True)
    vep = "output: {check, checked, failures: [...]}; exit 1 if failures is nonempty"
    r = s2.add_parser("lemma1", epilog=vep)
    r.add_argument("--instances", type=int, default=10000)
    r.add_argument("--max-size", type=int, default=16, dest="max_size")
    r.add_argument("--equality", type=_floats, default=None, metavar="N,T",
                   help="also check the equality-predicate instance on [N] with t = T")
    _common(r)
    r.set_defaults(func=cmd_verify_lemma1)
    r = s2.add_parser("pochhammer", epilog=vep)
    r.add_argument("--kmax", type=int, default=64)
    _common(r, seed=False)
    r.set_defaults(func=cmd_verify_pochhammer)
    r = s2.add_parser("bits-saving", epilog=vep)
    r.add_argument("--cases", type=int, default=1000)
    r.add_argument("--max-n", type=int, default=200, dest="max_n")
    _common(r)
    r.set_defaults(func=cmd_verify_bits_saving)

    p = sub.add_parser("scaling", formatter_class=fmt, help="message size against t log^2(n/t)",
                       epilog="output: CSV with header n,bits,ratio where\n"
                              "  ratio = bits / (t * log2(n/t)^2), t = max(k, ceil(log2(1/delta)))")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--ns", type=_ints, default=[1024, 4096, 16384, 65536])
    _proto_flags(p)
    _common(p, seed=False)
    p.set_defaults(func=cmd_scaling)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command == "verify" and args.action == "lemma1" and args.equality is not None \
            and len(args.equality) != 2:
        print("ursketch: --equality takes N,T", file=sys.stderr)
        return 2
    try:
        with _sink(args.output) as out:
            args.func(args, out)
    except CheckFailed as e:
        print(f"ursketch: check failed: {e}", file=sys.stderr)
        return 1
    except (ParameterError, DimensionError, DomainError, FormatError, ConstructionFailure) as e:
        print(f"ursketch: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"ursketch: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
