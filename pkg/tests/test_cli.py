import io
import subprocess
import sys

import pytest

from pwadyn.cli import read_strip_records, run
from pwadyn.report import parse_record_line


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, buf.getvalue()


def records(text):
    return [parse_record_line(ln) for ln in text.splitlines() if ln.strip()]


def test_validate_c4_reports_discontinuity():
    code, out = call("validate", "--map", "gallery:c4-nomax")
    assert code == 0
    assert "continuous=false" in out
    assert "witness=" in out


def test_entropy_c1_depth_8():
    code, out = call("entropy", "--map", "gallery:c1-cone", "--depth", "8")
    assert code == 0
    assert "c_8=256" in out


def test_entropy_visit_cap_flags_truncation():
    code, out = call("entropy", "--map", "gallery:cat", "--depth", "8", "--max-visits", "100")
    assert "truncated=true" in out


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["entropy", "--map", "gallery:cat"],
    ["entropy", "--map", "gallery:cat", "--depth", "0"],
    ["validate", "--map", "gallery:cat", "--bogus"],
    ["validate", "--map", "gallery:nope"],
    ["validate", "--map", "/no/such/file.map"],
    ["diag", "--map", "gallery:cat", "--samples", "5", "--depth", "4"],
    ["mult", "--map", "gallery:cat", "--depth", "2", "--point", "0.5.1,2"],
    ["periodic", "--map", "gallery:cat", "--nmax", "2", "--h", "-1"],
    [],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _ = call(*argv)
    assert code == 2


def test_file_errors_name_the_path(tmp_path, capsys):
    bad = tmp_path / "bad.map"
    bad.write_text("domain (0,0) (1,0) (0,1)\npiece a vertices (0,0) (1,0) (0,0.5) linear 1 0 0 1 translate 0 0\n")
    code, _ = call("validate", "--map", str(bad))
    assert code == 2
    err = capsys.readouterr().err
    assert str(bad) in err and "line 2" in err


def test_mult_at_point_accepts_decimals():
    code, out = call("mult", "--map", "gallery:c1-cone", "--depth", "5", "--point", "0,0")
    assert code == 0
    assert "mult=32" in out
    code2, out2 = call("mult", "--map", "gallery:c1-cone", "--depth", "5", "--point", "0.0,0.0")
    assert out2 == out


def test_manifold_and_lyapunov():
    code, out = call("manifold", "--map", "gallery:cat", "--point", "1/3,1/7", "--depth", "8", "--lyapunov", "100")
    assert code == 0
    rec = {k: v for r in records(out) for k, v in r.items()}
    assert abs(float(rec["lambda_u"]) - 0.962424) < 0.05


def test_periodic_cat():
    code, out = call("periodic", "--map", "gallery:cat", "--nmax", "4", "--h", "0.9624236501")
    assert code == 0
    counts = [int(r["count"]) for r in records(out) if "count" in r]
    assert counts == [1, 5, 16, 45]


def test_table_output():
    code, out = call("entropy", "--map", "gallery:c1-cone", "--depth", "3", "--out", "table")
    assert code == 0
    assert out.splitlines()[0].split()[:2] == ["n", "c_n"]


def test_seeded_commands_are_byte_identical():
    argv = ["diag", "--map", "gallery:cat", "--samples", "20", "--depth", "6", "--seed", "3"]
    assert call(*argv) == call(*argv)
    other = call("diag", "--map", "gallery:cat", "--samples", "20", "--depth", "6", "--seed", "4")
    assert other[1] != call(*argv)[1]


def test_rects_strips_graph_pipeline(tmp_path):
    rfile = tmp_path / "cat.rects"
    code, out = call("rects", "--map", "gallery:cat", "--samples", "200", "--depth", "10", "--l0", "0.25",
                     "--theta0", "0.3", "--cell-diam", "0.25", "--seed", "0", "--write", str(rfile))
    assert code == 0 and rfile.read_text().startswith("rect ")
    code, out = call("strips", "--map", "gallery:cat", "--rects", str(rfile), "--maxn", "4")
    assert code == 0
    sfile = tmp_path / "strips.txt"
    sfile.write_text(out)
    parsed = read_strip_records(out)
    assert parsed and all(st in ("yes", "no", "unknown") for _, st in parsed)

    gfile = tmp_path / "cat.graph"
    code, out = call("graph", "--strips", str(sfile), "--truncate", "12", "--write", str(gfile))
    assert code == 0
    vertex = next(ln.split()[1] for ln in gfile.read_text().splitlines() if ln.endswith(" base"))
    code, out = call("loops", "--graph", str(gfile), "--vertex", vertex, "--nmax", "12")
    assert code == 0 and "loops=" in out
    code, out = call("sample", "--graph", str(gfile), "--len", "20", "--truncate", "12", "--seed", "1")
    assert code in (0, 1)


def test_loops_on_gallery_graph():
    code, out = call("loops", "--graph", "gallery:golden-mean", "--vertex", "a", "--nmax", "5")
    assert code == 0
    assert [int(r["loops"]) for r in records(out)] == [1, 2, 3, 5, 8]


def test_sample_needs_seed():
    code, _ = call("sample", "--graph", "gallery:golden-mean", "--len", "10")
    assert code == 2


def test_module_entry_point_quick_suite_is_deterministic():
    argv = [sys.executable, "-m", "pwadyn", "suite", "--quick", "--seed", "0"]
    a = subprocess.run(argv, capture_output=True, text=True, timeout=600)
    b = subprocess.run(argv, capture_output=True, text=True, timeout=600)
    assert a.returncode == 0, a.stdout + a.stderr
    assert a.stdout == b.stdout
    assert "passed=9 failed=0" in a.stdout
