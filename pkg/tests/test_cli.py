import io
import json

import pytest

from ursketch.cli import build_parser, main


def run(argv, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_pochhammer(capsys):
    code, out, _ = run(["verify", "pochhammer", "--kmax", "64"], capsys)
    assert code == 0 and json.loads(out) == {"check": "pochhammer", "checked": 64, "failures": []}


def test_sketch_cancellation(capsys, monkeypatch):
    code, out, _ = run(["sketch", "--n", "64"], capsys, "U 5 +1\nU 5 -1\nQ 1\n", monkeypatch)
    assert code == 0 and json.loads(out)["result"] == []


def test_sketch_bad_stream(capsys, monkeypatch):
    code, _, err = run(["sketch", "--n", "64"], capsys, "U 5 +3\n", monkeypatch)
    assert code == 2 and "cannot parse" in err


def test_ur_sim_fields(capsys):
    code, out, _ = run(["ur-sim", "--n", "1024", "--k", "4", "--trials", "50", "--seed", "1"], capsys)
    rec = json.loads(out)
    assert code == 0
    assert {"n", "k", "trials", "failures", "empirical_rate", "message_bits"} <= set(rec)
    assert rec["message_bits"] == 12800 and rec["wrong"] == 0


def test_scaling_csv(capsys):
    code, out, _ = run(["scaling", "--k", "4", "--delta", "0.01", "--ns", "1024,4096,16384,65536"],
                       capsys)
    lines = out.strip().split("\n")
    assert code == 0 and lines[0] == "n,bits,ratio" and len(lines) == 5
    assert lines[1].startswith("1024,12800,")


def test_codec_and_codes(capsys, tmp_path):
    code, out, _ = run(["codec", "run", "--n", "4096", "--delta", str(2.0**-64), "--trials", "2"],
                       capsys)
    recs = [json.loads(l) for l in out.splitlines()]
    assert code == 0 and len(recs) == 2
    assert {"seed", "b", "B", "s_bits", "baseline_bits", "savings_bits"} <= set(recs[0])
    code, out, _ = run(["codec", "run", "--n", "4096", "--delta", str(2.0**-64), "--trials", "1",
                        "--stub", "fail"], capsys)
    assert code == 0 and json.loads(out)["B"] == 512
    code, out, _ = run(["codec-k", "run", "--n", str(2**16), "--k", "4", "--trials", "1"], capsys)
    assert code == 0 and json.loads(out)["lossless"]
    path = tmp_path / "fam.bin"
    code, out, _ = run(["codes", "build", "--u", "256", "--m", "8", "--out", str(path)], capsys)
    assert code == 0 and json.loads(out)["N"] == 32 and path.read_bytes()[:4] == b"URCF"


def test_augindex_and_verify(capsys):
    code, out, _ = run(["augindex", "run", "--trials", "3"], capsys)
    recs = [json.loads(l) for l in out.splitlines()]
    assert code == 0 and len(recs) == 3
    assert {"success", "queries_used", "level_histogram", "distinct_T_count"} <= set(recs[0])
    code, out, _ = run(["verify", "lemma1", "--instances", "200"], capsys)
    assert code == 0 and json.loads(out)["checked"] == 200
    code, out, _ = run(["verify", "bits-saving", "--cases", "100"], capsys)
    assert code == 0
    code, out, err = run(["verify", "lemma1", "--instances", "0", "--equality", "1024,5"], capsys)
    assert code == 1 and len(json.loads(out)["failures"]) == 1


def test_flag_errors(capsys):
    assert run(["ur-sim"], capsys)[0] == 2
    assert run(["nope"], capsys)[0] == 2
    assert run(["codec", "run", "--n", "4096", "--delta", "0.5"], capsys)[0] == 2
    assert run(["codes", "build", "--u", "8", "--m", "4", "--out", "/dev/null"], capsys)[0] == 2


def test_reproducible_output_files(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for p in (a, b):
        assert main(["ur-sim", "--n", "256", "--k", "2", "--trials", "20", "--seed", "5",
                     "--output", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes() and a.read_bytes()


def test_help_documents_schemas():
    ap = build_parser()
    sub = ap._subparsers._group_actions[0].choices
    for name in ("ur-sim", "sketch", "scaling"):
        assert "output" in sub[name].epilog
