import os

import pytest

from ceerlab.cli import RunManifest, UsageError, main, parse_ceer

MINIMAL_DARK = """\
construction minimal_dark
ceer R id_n 1
opponent identity loop zero
extern c5 const 5
mirror mirror3 3
set count 2
stages 1500
"""


def write(path, text):
    path.write_text(text)
    return str(path)


def run_manifest(tmp_path, text, name="m.txt", out="out"):
    manifest = write(tmp_path / name, text)
    out_dir = tmp_path / out
    code = main(["run", manifest, "--out", str(out_dir)])
    return code, out_dir, manifest


def read_all(d):
    return {p: open(os.path.join(d, p), "rb").read() for p in sorted(os.listdir(d))}


def test_run_minimal_dark_writes_three_files(tmp_path, capsys):
    code, out, _ = run_manifest(tmp_path, MINIMAL_DARK)
    assert code == 0
    files = sorted(os.listdir(out))
    assert len(files) == 3 and "trace.txt" in files
    assert "0 violations" in capsys.readouterr().out


def test_run_is_byte_identical(tmp_path):
    _, a, _ = run_manifest(tmp_path, MINIMAL_DARK, out="a")
    _, b, _ = run_manifest(tmp_path, MINIMAL_DARK, out="b")
    assert read_all(a) == read_all(b)


def test_empty_manifest_gives_identity(tmp_path):
    code, out, _ = run_manifest(tmp_path, "construction empty\nstages 10\n")
    assert code == 0
    snap = (out / "0_E0.snap").read_text()
    assert snap == "ceer E0 10 0\n"
    assert (out / "trace.txt").read_text() == ""


def test_bad_construction_is_usage_error(tmp_path, capsys):
    code, _, _ = run_manifest(tmp_path, "construction nonsense\n")
    assert code == 2
    assert "unknown construction" in capsys.readouterr().err


def test_audit_clean_and_forged(tmp_path, capsys):
    _, out, manifest = run_manifest(tmp_path, MINIMAL_DARK)
    capsys.readouterr()
    assert main(["audit", str(out / "trace.txt"), manifest]) == 0
    assert "0 violations" in capsys.readouterr().out
    forged = write(tmp_path / "forged.txt", "1 0 RestraintSet pair 0 3 4\n2 1 Collapse 0 3 4\n")
    assert main(["audit", forged]) == 1
    assert "1 violations" in capsys.readouterr().out


def test_audit_missing_file(tmp_path):
    assert main(["audit", str(tmp_path / "nope.txt")]) == 2


def test_verify_identity_witness(tmp_path, capsys):
    snap = tmp_path / "id.snap"
    assert main(["snapshot", "export", "id", "--bound", "20", "--out", str(snap)]) == 0
    wit = write(tmp_path / "w.txt", "witness Id Id\n" + "".join(f"table {x} {x}\n" for x in range(20)))
    assert main(["verify", wit, str(snap), str(snap), "--bound", "20", "--stage", "0"]) == 0
    assert "ConsistentUpTo" in capsys.readouterr().out
    bad = write(tmp_path / "b.txt", "witness Id Id\n" + "".join(f"table {x} 0\n" for x in range(20)))
    assert main(["verify", bad, str(snap), str(snap), "--bound", "20", "--stage", "0"]) == 1


def test_oracle(capsys):
    assert main(["oracle", "id_n 3", "id_n 2"]) == 0
    assert capsys.readouterr().out == "none\n"
    assert main(["oracle", "finite 0,1|2", "id_n 2"]) == 0
    assert capsys.readouterr().out == "exists\ntable 0 0\ntable 1 0\ntable 2 1\n"
    assert main(["oracle", "id", "id_n 2"]) == 2


def test_compose_round_trip(tmp_path, capsys):
    a = tmp_path / "a.snap"
    b = tmp_path / "b.snap"
    main(["snapshot", "export", "id_n 1", "--bound", "8", "--out", str(a)])
    main(["snapshot", "export", "id_n 3", "--bound", "8", "--out", str(b)])
    wit = write(tmp_path / "w.txt", "witness A B\n" + "".join(f"table {x} 0\n" for x in range(8)))
    out = tmp_path / "span.txt"
    assert main(["compose", "plus-span", wit, str(a), str(b), "--points", "1,2",
                 "--bound", "8", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1:5] == ["table 0 0", "table 1 1", "table 2 0", "table 3 2"]
    clash = write(tmp_path / "c.txt", "witness A B\n" + "".join(f"table {x} 1\n" for x in range(8)))
    assert main(["compose", "plus-span", clash, str(a), str(b), "--points", "1",
                 "--bound", "8"]) == 3


def test_snapshot_import_round_trip(tmp_path, capsys):
    _, out, _ = run_manifest(tmp_path, MINIMAL_DARK)
    snap = out / "0_E0.snap"
    again = tmp_path / "again.snap"
    assert main(["snapshot", "import", str(snap), "--out", str(again)]) == 0
    assert again.read_bytes() == snap.read_bytes()


def test_argparse_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["oracle"]) == 2


def test_manifest_parsing():
    m = RunManifest.parse(MINIMAL_DARK)
    assert m.opponents == ["identity", "loop", "zero", "c5", "mirror3"]
    assert m.params == {"count": 2} and m.stages == 1500
    with pytest.raises(UsageError):
        RunManifest.parse("construction empty\nfrobnicate 3\n")


def test_opponents_file(tmp_path):
    manifest = write(tmp_path / "m.txt", "construction dark_join_pair\nstages 300\n")
    opp = write(tmp_path / "o.txt", "extern sq table 0:0 1:1\nidentity evens\n")
    out = tmp_path / "o"
    assert main(["run", manifest, "--opponents", opp, "--out", str(out)]) == 0
    assert sorted(os.listdir(out)) == ["0_E1.snap", "1_E2.snap", "trace.txt"]


def test_parse_ceer_specs():
    assert parse_ceer("id_n 4").finite_classes == 4
    assert parse_ceer("finite 0,2|1").finite_classes == 2
    with pytest.raises(UsageError):
        parse_ceer("wat")
