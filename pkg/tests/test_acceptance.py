"""Acceptance gate: every criterion at its stated tolerance.

Each test runs one named verification suite and prints one line per check;
criterion 11 drives the CLI end to end, including the determinism check.
"""

import json

import pytest

from sobpoly.cli import main
from sobpoly.precision import set_precision
from sobpoly.verify import SUITES


def _run(name):
    set_precision(256)
    results = SUITES[name]()
    for label, ok, detail in results:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}"
        if detail:
            line += f" ({detail})"
        print(line)
    failures = [label for label, ok, _d in results if not ok]
    assert not failures, f"failed checks: {failures}"


def test_criterion_01_classical_oracle():
    _run("classical")


def test_criterion_02_classical_pair():
    _run("classical-pair")


def test_criterion_03_biorthogonality():
    _run("biorthogonality")


def test_criterion_04_dual_path_transforms():
    _run("transforms")


def test_criterion_05_discrete_sobolev():
    _run("discrete")


def test_criterion_06_wx_theorem():
    _run("wx")


def test_criterion_07_equivalence_moves():
    _run("moves")


def test_criterion_08_resolvent_structure():
    _run("resolvents")


def test_criterion_09_toda():
    _run("toda")


def test_criterion_10_kernel_properties():
    _run("kernels")


def test_criterion_11_cli_verify_all_and_determinism(tmp_path, capsys):
    spec = tmp_path / "w.json"
    spec.write_text(
        json.dumps(
            {
                "order": 1,
                "entries": [
                    {"row": 0, "col": 0, "continuous": {"family": "uniform", "params": {"a": "0", "b": "1"}, "polyFactor": ["2", "1"]}},
                    {"row": 1, "col": 1, "continuous": {"family": "uniform", "params": {"a": "0", "b": "1"}}},
                ],
            }
        )
    )
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert main(["sbps", "--spec", str(spec), "--order", "8", "--out", str(out1)]) == 0
    assert main(["sbps", "--spec", str(spec), "--order", "8", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes(), "CLI output is not byte-deterministic"
    print("[PASS] CLI determinism: byte-identical reruns")

    code = main(["verify", "--suite", "all"])
    print(f"[{'PASS' if code == 0 else 'FAIL'}] verify --suite all exit code {code}")
    assert code == 0
