"""Command-line interface smoke tests, driven in-process through cli.run.

Exit code contract: 0 success, 1 verification failure, 2 usage/parse error.
"""

import json

import pytest

from ppsynth.cli import run


def test_compile_full_writes_result(tmp_path, capsys):
    out = tmp_path / "full.json"
    assert run(["compile", "--formula", "x > 1", "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert obj["ell"] == 5
    assert obj["protocol"]["kind"] == "product"
    assert [s["name"] for s in obj["stage_stats"]][0] == "rdi"


def test_compile_rdi_threshold(tmp_path):
    out = tmp_path / "rdi.json"
    assert run(["compile", "--formula", "x > 1", "--mode", "rdi-threshold",
                "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert obj["flavor"] == "rdi"
    assert len(obj["states"]) == 17


def test_compile_greater_sum_requires_size(capsys):
    assert run(["compile", "--formula", "x - y > 0",
                "--mode", "greater-sum"]) == 2
    assert "size" in capsys.readouterr().err


def test_compile_rejects_bad_formula(capsys):
    assert run(["compile", "--formula", "x >"]) == 2


def test_stats_on_fixture(tmp_path, capsys):
    out = tmp_path / "pn.json"
    assert run(["fixtures", "--name", "pn", "--n", "2", "--out", str(out)]) == 0
    assert run(["stats", "--protocol", str(out)]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["states"] == 5          # 2^2 + 1 counting states
    assert obj["variables"] == ["x"]


def test_simulate_fixture(tmp_path, capsys):
    out = tmp_path / "pn.json"
    run(["fixtures", "--name", "pn", "--n", "2", "--out", str(out)])
    assert run(["simulate", "--protocol", str(out), "--input", "x=6",
                "--seed", "1", "--max-steps", "100000",
                "--window", "2000"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["outcome"] == "stabilized"
    assert obj["bit"] == 1             # 6 >= 2^2


def test_verify_pass_and_fail(tmp_path, capsys):
    out = tmp_path / "pn.json"
    run(["fixtures", "--name", "pn", "--n", "1", "--out", str(out)])
    assert run(["verify", "--protocol", str(out), "--formula", "x > 1",
                "--max-size", "4"]) == 0
    assert run(["verify", "--protocol", str(out), "--formula", "x > 2",
                "--max-size", "4"]) == 1


def test_check_rdi_quick(capsys):
    assert run(["check-rdi", "--formula", "x > 1", "--kind", "threshold",
                "--depth", "5", "--max-pop", "2"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["ok"] is True


def test_check_rdi_remainder_requires_mod_threshold(capsys):
    assert run(["check-rdi", "--formula", "x = 1 (mod 2)",
                "--kind", "remainder"]) == 2
    assert run(["check-rdi", "--formula", "x >= 1 (mod 2)",
                "--kind", "remainder", "--depth", "5", "--max-pop", "2"]) == 0


def test_check_halting_greater_sum(tmp_path, capsys):
    out = tmp_path / "gs.json"
    assert run(["compile", "--formula", "x - y > 0", "--mode", "greater-sum",
                "--size", "2", "--out", str(out)]) == 0
    assert run(["check-halting", "--protocol", str(out), "--size", "2"]) == 0


def test_check_halting_fails_on_nonhalting(tmp_path, capsys):
    from ppsynth.fixtures import toy_one_leader
    from ppsynth.protocol import to_json

    # passes through mixed-opinion configurations, so it is not halting
    out = tmp_path / "toy.json"
    out.write_text(to_json(toy_one_leader()))
    assert run(["check-halting", "--protocol", str(out), "--size", "3"]) == 1


def test_missing_protocol_file_is_usage_error(capsys):
    assert run(["stats", "--protocol", "/nonexistent.json"]) == 2


def test_unknown_verb_is_usage_error():
    assert run(["frobnicate"]) == 2
