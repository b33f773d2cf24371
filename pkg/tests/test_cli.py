from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from pnorm import cli, verify

FIXTURES_DIR = Path(__file__).parent / "fixtures"
SD_FILE = str(FIXTURES_DIR / "matrices" / "sd_element.json")
IDENTITY_FILE = str(FIXTURES_DIR / "matrices" / "identity_3.json")
BLOCK_FILE = str(FIXTURES_DIR / "matrices" / "block_121_column.json")


def _run(capsys, argv: list[str]) -> tuple[int, dict | None, str]:
    exit_code = cli.main(argv)
    captured = capsys.readouterr()
    payload = json.loads(captured.out) if captured.out.strip() else None
    return exit_code, payload, captured.err


def test_norm_of_identity_is_one(capsys) -> None:
    exit_code, payload, _ = _run(capsys, ["norm", IDENTITY_FILE, "--p", "3", "--estimate"])
    assert exit_code == 0
    assert payload["result"]["value"] == pytest.approx(1.0, abs=1e-12)
    assert payload["manifest"]["command"] == "norm"
    assert payload["manifest"]["tool_version"]


def test_exact_norm_of_sd_element(capsys) -> None:
    exit_code, payload, _ = _run(capsys, ["norm", SD_FILE, "--p", "1", "--exact"])
    assert exit_code == 0
    assert payload["result"]["value"] == pytest.approx(4.0)
    assert payload["result"]["method"] == "exact_formula"


def test_exact_and_estimated_two_norms_agree(capsys) -> None:
    rng = np.random.default_rng(0)
    values = rng.standard_normal((3, 3))
    matrix = json.dumps({"rows": 3, "cols": 3, "entries": values.ravel().tolist()})
    _, exact, _ = _run(capsys, ["norm", matrix, "--p", "2", "--exact"])
    _, estimate, _ = _run(capsys, ["norm", matrix, "--p", "2", "--estimate"])
    assert exact["result"]["value"] == pytest.approx(estimate["result"]["value"], abs=1e-8)


def test_oracle_norm_reports_upper_bound(capsys) -> None:
    exit_code, payload, _ = _run(capsys, ["norm", SD_FILE, "--p", "inf", "--q", "2", "--oracle", "--resolution", "8"])
    assert exit_code == 0
    assert payload["result"]["method"] == "grid_oracle"
    assert payload["result"]["upper_bound"] >= payload["result"]["value"]


def test_norm_exit_codes_for_bad_input(capsys) -> None:
    exit_code, payload, err = _run(capsys, ["norm", SD_FILE, "--p", "3", "--exact"])
    assert exit_code == 1
    assert payload is None
    assert err.startswith("error:")

    exit_code, _, err = _run(capsys, ["norm", "{broken", "--p", "2"])
    assert exit_code == 1
    assert "Malformed" in err

    exit_code, _, _ = _run(capsys, ["norm", IDENTITY_FILE, "--p", "0.5"])
    assert exit_code == 1

    exit_code, _, err = _run(capsys, ["norm", IDENTITY_FILE, "--p", "3", "--restarts", "0"])
    assert exit_code == 1
    assert "invalid configuration" in err


def test_norm_output_is_deterministic(capsys) -> None:
    _, first, _ = _run(capsys, ["norm", BLOCK_FILE, "--p", "3", "--seed", "4", "--restarts", "8"])
    _, second, _ = _run(capsys, ["norm", BLOCK_FILE, "--p", "3", "--seed", "4", "--restarts", "8"])
    first["manifest"].pop("duration_seconds")
    second["manifest"].pop("duration_seconds")
    assert first == second
    assert first["manifest"]["seed"] == 4


def test_gap_on_block_algebra_is_cstar_like(capsys) -> None:
    exit_code, payload, _ = _run(
        capsys, ["gap", BLOCK_FILE, "--algebra", "block:1,2,1", "--p", "1", "--restarts", "8"]
    )
    assert exit_code == 0
    assert payload["result"]["certified"] == "constructive"
    assert payload["result"]["cstar_like"] is True


def test_gap_on_zero_element(capsys) -> None:
    zero = json.dumps({"rows": 2, "cols": 2, "entries": [0, 0, 0, 0]})
    exit_code, payload, _ = _run(capsys, ["gap", zero, "--algebra", "block:1,1", "--p", "2"])
    assert exit_code == 0
    assert payload["result"]["gap"] == 0.0


def test_gap_on_sd_element_fails(capsys) -> None:
    exit_code, payload, _ = _run(capsys, ["gap", SD_FILE, "--algebra", "sd", "--p", "1", "--restarts", "256"])
    assert exit_code == 3
    assert payload["result"]["gap"] == pytest.approx(4 - math.sqrt(10), abs=1e-4)


def test_gap_rejects_non_members(capsys) -> None:
    exit_code, _, err = _run(capsys, ["gap", SD_FILE, "--algebra", "upper-triangular", "--p", "1"])
    assert exit_code == 1
    assert err.startswith("error:")


def test_gap_row_side(capsys) -> None:
    row = json.dumps({"rows": 2, "cols": 4, "entries": [1, 0, 2, 0, 0, 3, 0, -1]})
    exit_code, payload, _ = _run(
        capsys, ["gap", row, "--algebra", "block:1,1", "--p", "1", "--side", "row", "--restarts", "8"]
    )
    assert exit_code == 0
    assert payload["result"]["side"] == "row"
    assert payload["result"]["n"] == 2


def test_verify_passes_and_fails(monkeypatch, capsys) -> None:
    exit_code, payload, _ = _run(capsys, ["verify", "mainT2", "--trials", "2", "--restarts", "16"])
    assert exit_code == 0
    assert payload["result"]["passed"] is True

    monkeypatch.setitem(verify.SUITES, "duality", lambda rng, cfg: {"forced": (1.0, 0.0)})
    exit_code, payload, err = _run(capsys, ["verify", "duality", "--trials", "1", "--seed", "5"])
    assert exit_code == 3
    assert payload["result"]["failures"][0]["seed"] == [5, 0]
    assert "[5, 0]" in err


def test_counterexample_upper_triangular(capsys) -> None:
    exit_code, payload, _ = _run(
        capsys, ["counterexample", "upper-triangular", "--p", "1.5", "--n", "2", "--restarts", "8"]
    )
    assert exit_code == 0
    assert payload["result"]["report"]["pairing_sup"] == 0.0


def test_counterexample_sd_includes_claim_breakdown(capsys) -> None:
    exit_code, payload, _ = _run(capsys, ["counterexample", "sd"])
    assert exit_code == 0
    result = payload["result"]
    assert result["report"]["element_norm"] == pytest.approx(4.0)
    assert result["report"]["pairing_sup"] == pytest.approx(math.sqrt(10), abs=1e-4)
    assert result["claim"]["value"] == pytest.approx(math.sqrt(10), abs=1e-10)
    assert len(result["claim"]["cases"]) == 4
    assert payload["manifest"]["arguments"]["name"] == "sd"


def test_counterexample_self_module_needs_inputs(capsys) -> None:
    exit_code, _, err = _run(capsys, ["counterexample", "self-module"])
    assert exit_code == 1
    assert "--algebra" in err


def test_counterexample_self_module_on_nilpotent_algebra(capsys) -> None:
    element = json.dumps({"rows": 2, "cols": 2, "entries": [0, 1, 0, 0]})
    exit_code, payload, _ = _run(
        capsys,
        ["counterexample", "self-module", "--algebra", "upper-triangular", "--element", element, "--restarts", "8"],
    )
    assert exit_code == 3
    assert payload["result"]["report"]["gap"] == pytest.approx(1.0)


def test_sweep_writes_csv_and_manifest(tmp_path, capsys) -> None:
    out = tmp_path / "sweep.csv"
    exit_code, payload, _ = _run(
        capsys, ["sweep", "--grid", "2", "--out", str(out), "--restarts", "8", "--threads", "1"]
    )
    assert exit_code == 0
    assert payload["result"]["p_grid"] == [2.0]
    assert out.exists()
    assert (tmp_path / "sweep.csv.manifest.json").exists()
    assert "p,norm,sup,gap,certified,restarts,seed" in out.read_text(encoding="utf-8")


def test_sweep_rejects_unwritable_path(tmp_path, capsys) -> None:
    out = tmp_path / "missing" / "sweep.csv"
    exit_code, payload, err = _run(capsys, ["sweep", "--grid", "2", "--out", str(out)])
    assert exit_code == 1
    assert payload is None
    assert "not writable" in err


def test_sweep_rejects_zero_workers(tmp_path, capsys) -> None:
    out = tmp_path / "sweep.csv"
    exit_code, payload, err = _run(capsys, ["sweep", "--grid", "2", "--out", str(out), "--threads", "0"])
    assert exit_code == 1
    assert payload is None
    assert err.startswith("error:")
    assert not out.exists()


def test_malformed_environment_is_an_input_error(monkeypatch, capsys) -> None:
    monkeypatch.setenv("PNORM_RESTARTS", "abc")
    exit_code, payload, err = _run(capsys, ["norm", IDENTITY_FILE, "--p", "3"])
    assert exit_code == 1
    assert payload is None
    assert err.startswith("error: PNORM_RESTARTS")
    assert len(err.strip().splitlines()) == 1


def test_matrix_with_nan_entry_is_rejected(capsys) -> None:
    matrix = json.dumps({"rows": 1, "cols": 2, "entries": [1.0, math.nan]})
    exit_code, _, err = _run(capsys, ["norm", matrix, "--p", "2"])
    assert exit_code == 1
    assert "Invalid matrix JSON" in err


def test_no_command_prints_help(capsys) -> None:
    assert cli.main([]) == 0
    assert "usage" in capsys.readouterr().out
