"""Tests for the known counterexamples, the Claim oracle and the sweep over p."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from pnorm.block_algebra import BlockDiagAlgebra
from pnorm.contracts import InputError, OptimizerConfig, RunManifest
from pnorm.experiments import (
    CSV_COLUMNS,
    SQRT10,
    sd_claim_cases,
    sd_claim_oracle,
    sd_counterexample,
    sd_element,
    sd_sweep,
    self_module_gap,
    upper_triangular_algebra,
    upper_triangular_example,
    write_sweep_csv,
)
from pnorm.matrix_core import op_norm_exact

FAST = OptimizerConfig(restarts=16, max_iters=200)


def test_sd_element_has_norm_four_at_p_one() -> None:
    x = sd_element()
    assert x.n == 2
    assert op_norm_exact(x.matrix, 1, 1).value == pytest.approx(4.0, abs=1e-12)
    assert np.allclose(x.blocks[0], [[1.5, 0.5], [0.5, 1.5]])


def test_claim_cases_match_closed_forms() -> None:
    cases = {case.label: case for case in sd_claim_cases()}
    assert cases["(0,0,0,0)"].value == 0.0
    assert cases["(0,0,1,0)"].value == pytest.approx(4.0, abs=1e-12)
    assert cases["(1,0,1,0)"].value == pytest.approx(2 * SQRT10, abs=1e-10)
    assert cases["(1,0,0,1)"].value == pytest.approx(2 * SQRT10, abs=1e-10)
    assert math.cos(cases["(1,0,1,0)"].argmax) == pytest.approx(0.8, abs=1e-6)
    assert math.cos(cases["(1,0,0,1)"].argmax) == pytest.approx(0.0, abs=1e-6)


def test_claim_oracle_is_sqrt_ten() -> None:
    assert sd_claim_oracle() == pytest.approx(SQRT10, abs=1e-10)


def test_sd_counterexample_reproduces_known_gap() -> None:
    report = sd_counterexample()
    assert report.element_norm == pytest.approx(4.0, abs=1e-12)
    assert report.pairing_sup == pytest.approx(SQRT10, abs=1e-4)
    assert report.gap == pytest.approx(4.0 - SQRT10, abs=1e-4)
    assert not report.cstar_like
    assert report.certified == "heuristic"


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("p", [1, 1.5, 2, 3])
def test_upper_triangular_pairing_vanishes(p, n) -> None:
    report = upper_triangular_example(p, n, FAST)
    assert report.pairing_sup == 0.0
    assert report.gap == pytest.approx(report.element_norm)
    assert report.element_norm > 0
    assert not report.cstar_like


def test_self_module_gap_for_unital_and_nilpotent_algebras() -> None:
    algebra = BlockDiagAlgebra((2,))
    unital = self_module_gap(np.array([[1.0, 2.0], [0.5, -1.0]]), algebra, 1, FAST)
    assert unital.certified == "constructive"
    assert unital.gap == pytest.approx(0.0, abs=1e-9)

    nilpotent = self_module_gap(np.array([[0.0, 3.0], [0.0, 0.0]]), upper_triangular_algebra(), 1, FAST)
    assert nilpotent.element_norm == pytest.approx(3.0)
    assert nilpotent.gap == pytest.approx(3.0)


def test_sweep_seeds_and_consistency() -> None:
    result = sd_sweep([2.0, 3.0], OptimizerConfig(restarts=8, max_iters=100, seed=5), threads=2)
    assert result.p_grid == [2.0, 3.0]
    assert result.seeds == [5, 6]
    assert result.gaps[0] == pytest.approx(0.0, abs=1e-4)
    assert result.certified[0] == "constructive"
    for norm, sup, gap in zip(result.norms, result.sups, result.gaps):
        assert gap == pytest.approx(norm - sup, abs=1e-12)


def test_sweep_is_continuous_and_independent_of_worker_count() -> None:
    cfg = OptimizerConfig(restarts=8, max_iters=100)
    inline = sd_sweep([2.0, 2.05], cfg, threads=1)
    pooled = sd_sweep([2.0, 2.05], cfg, threads=2)
    assert pooled.gaps == inline.gaps
    assert pooled.sups == inline.sups
    assert abs(inline.gaps[1] - inline.gaps[0]) <= 0.1


def test_sweep_rejects_infinite_exponent() -> None:
    with pytest.raises(ValueError):
        sd_sweep(["inf"], FAST)


def test_sweep_rejects_malformed_worker_count(monkeypatch) -> None:
    monkeypatch.setenv("PNORM_THREADS", "many")
    with pytest.raises(InputError, match="PNORM_THREADS"):
        sd_sweep([2.0], FAST)


def _manifest(duration: float) -> RunManifest:
    return RunManifest(
        command="sweep",
        arguments={"grid": "2"},
        seed=0,
        tool_version="0.1.0",
        duration_seconds=duration,
    )


def test_sweep_csv_is_deterministic_and_has_sidecar(tmp_path) -> None:
    result = sd_sweep([2.0], OptimizerConfig(restarts=8, max_iters=100), threads=1)
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    write_sweep_csv(result, first, _manifest(1.0))
    write_sweep_csv(result, second, _manifest(2.5))
    assert first.read_bytes() == second.read_bytes()

    lines = first.read_text(encoding="utf-8").splitlines()
    comments = [line for line in lines if line.startswith("#")]
    assert [line.split(":")[0] for line in comments] == ["# command", "# tool_version", "# seed", "# arguments"]
    header = lines[len(comments)]
    assert header.split(",") == list(CSV_COLUMNS)
    assert lines[len(comments) + 1].startswith("2.0,")

    sidecar = json.loads((tmp_path / "first.csv.manifest.json").read_text(encoding="utf-8"))
    assert sidecar["duration_seconds"] == 1.0
