"""CLI surface: spec files, subcommands, exit codes, determinism."""

import json
import subprocess
import sys

import pytest
from mpmath import mpf

from sobpoly.errors import SpecFileError
from sobpoly.cli import main
from sobpoly.specfile import (
    load_measure_matrix,
    parse_measure_matrix,
    parse_transform,
    serialize_measure_matrix,
)

LEGENDRE_SPEC = {
    "order": 0,
    "precisionBits": 256,
    "entries": [
        {"row": 0, "col": 0, "continuous": {"family": "jacobi", "params": {"alpha": "0", "beta": "0"}}}
    ],
}

SOBOLEV_SPEC = {
    "order": 1,
    "entries": [
        {"row": 0, "col": 0, "continuous": {"family": "uniform", "params": {"a": "0", "b": "1"}, "polyFactor": ["2", "1"]}},
        {"row": 1, "col": 1, "continuous": {"family": "uniform", "params": {"a": "0", "b": "1"}}},
        {"row": 0, "col": 1, "continuous": {"family": "uniform", "params": {"a": "0", "b": "1"}, "polyFactor": ["0.25"]}, "atoms": [{"point": "0.5", "mass": "0.125"}]},
    ],
}

SINGULAR_SPEC = {
    "order": 0,
    "entries": [
        {"row": 0, "col": 0, "atoms": [{"point": "1", "mass": "1"}, {"point": "1", "mass": "-1"}]}
    ],
}


@pytest.fixture
def spec_path(tmp_path):
    p = tmp_path / "legendre.json"
    p.write_text(json.dumps(LEGENDRE_SPEC))
    return str(p)


def test_spec_roundtrip():
    w, bits = parse_measure_matrix(SOBOLEV_SPEC)
    doc = serialize_measure_matrix(w, bits)
    w2, _ = parse_measure_matrix(doc)
    doc2 = serialize_measure_matrix(w2, bits)
    assert doc == doc2
    assert w2.entry(0, 1).atoms == w.entry(0, 1).atoms


def test_spec_rejects_unknown_fields():
    bad = {"order": 0, "entries": [], "comment": "nope"}
    with pytest.raises(SpecFileError):
        parse_measure_matrix(bad)
    bad2 = {"order": 0, "entries": [{"row": 0, "col": 0, "weight": 1}]}
    with pytest.raises(SpecFileError):
        parse_measure_matrix(bad2)


def test_transform_parse():
    tr = parse_transform(
        {"R": [{"point": "2", "mult": 1}], "Q": [{"point": "-1", "mult": 1}], "xi": [[["0.5"]]], "side": "right", "orientation": "RL"}
    )
    assert tr["R"].degree == 1
    assert tr["Q"].germ.degree == 1
    assert tr["Q"].masses[0][0, 0] == mpf("0.5")


def test_sbps_command_legendre(spec_path, tmp_path, capsys):
    out = tmp_path / "res.json"
    code = main(["sbps", "--spec", spec_path, "--order", "5", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    # P2 row is (-1/3, 0, 1)
    row = doc["polynomials1"][2]
    assert row[2] == "1.0"
    assert abs(mpf(row[0]) + mpf(1) / 3) < mpf(10) ** -70
    assert (tmp_path / "res.json.timings.json").exists()


def test_cli_determinism(spec_path, tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["sbps", "--spec", spec_path, "--order", "6", "--out", str(out1)]) == 0
    assert main(["sbps", "--spec", spec_path, "--order", "6", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_exit_2_on_bad_spec(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["sbps", "--spec", str(p), "--order", "4"]) == 2
    p2 = tmp_path / "bad2.json"
    p2.write_text(json.dumps({"order": 0, "entries": [], "zzz": 1}))
    assert main(["sbps", "--spec", str(p2), "--order", "4"]) == 2


def test_cli_exit_3_on_singular_minor(tmp_path, capsys):
    p = tmp_path / "singular.json"
    p.write_text(json.dumps(SINGULAR_SPEC))
    code = main(["sbps", "--spec", p.as_posix(), "--order", "2"])
    assert code == 3
    err = capsys.readouterr().err
    assert "minor of size 1" in err


def test_cli_kernel_and_secondkind(spec_path, capsys):
    assert main(["kernel", "--spec", spec_path, "--order", "4", "--x", "0.3", "--y", "0.1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert "kernel" in doc
    assert main(["secondkind", "--spec", spec_path, "--order", "12", "--index", "0", "--y", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert "secondKind" in doc


def test_cli_christoffel(spec_path, tmp_path, capsys):
    tr = tmp_path / "tr.json"
    tr.write_text(json.dumps({"R": [{"point": "2", "mult": 1}], "side": "left"}))
    assert main(["christoffel", "--spec", spec_path, "--transform", str(tr), "--order", "5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    row = doc["polynomials1"][1]
    assert abs(mpf(row[0]) - mpf(1) / 6) < mpf(10) ** -70


def test_cli_discrete_and_plot(tmp_path, capsys):
    spec = tmp_path / "lag.json"
    spec.write_text(
        json.dumps(
            {"order": 0, "entries": [{"row": 0, "col": 0, "continuous": {"family": "laguerre", "params": {"alpha": "0"}}}]}
        )
    )
    tr = tmp_path / "tr.json"
    tr.write_text(json.dumps({"nodes": [{"point": "0", "n": 1, "m": 1, "mass": [["1"]]}]}))
    assert main(["discrete", "--spec", str(spec), "--transform", str(tr), "--order", "5", "--plot-data"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(mpf(doc["polynomials1"][1][0]) + mpf(1) / 2) < mpf(10) ** -70
    assert len(doc["plot"]) == 33


def test_cli_csv_output(spec_path, capsys):
    assert main(["sbps", "--spec", spec_path, "--order", "3", "--csv"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert len(lines) == 3
    assert lines[0] == "1.0"


def test_cli_verify_known_suite(capsys):
    assert main(["verify", "--suite", "determinism"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out


def test_cli_toda(tmp_path, capsys):
    spec = tmp_path / "herm.json"
    spec.write_text(
        json.dumps({"order": 0, "entries": [{"row": 0, "col": 0, "continuous": {"family": "hermite"}}]})
    )
    tr = tmp_path / "flow.json"
    tr.write_text(json.dumps({"t1": [[1, "0.4"]]}))
    assert main(["toda", "--spec", str(spec), "--transform", str(tr), "--order", "6"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(mpf(doc["lax1"][0][0]) - mpf("0.2")) < mpf(10) ** -50


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "sobpoly.cli", "verify", "--suite", "determinism"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
