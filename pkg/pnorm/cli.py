"""Command line interface for pnorm."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Sequence

from pydantic import BaseModel, ValidationError

from pnorm import __version__
from pnorm.block_algebra import AlgebraError, ColumnModuleElement, RowModuleElement
from pnorm.contracts import OptimizerConfig, RunManifest, SweepResult
from pnorm.experiments import (
    DEFAULT_SWEEP_GRID,
    SD_RESTARTS,
    SQRT10,
    SD_NORM,
    RegressionError,
    sd_claim_cases,
    sd_counterexample,
    sd_sweep,
    self_module_gap,
    upper_triangular_example,
    write_sweep_csv,
)
from pnorm.guardrails import (
    InputError,
    load_algebra,
    load_matrix,
    parse_exponent,
    parse_finite_exponent,
    parse_grid,
)
from pnorm.matrix_core import (
    DimensionError,
    OracleBudgetError,
    UnsupportedExponentError,
    op_norm_estimate,
    op_norm_exact,
    op_norm_oracle_estimate,
    oracle_discretization,
)
from pnorm.module_pairing import cstar_gap
from pnorm.telemetry import configure_logging, start_span
from pnorm.verify import SUITES, PropertySuiteExecutor

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_FAILURE = 3

CommandResult = tuple[Any, int]


def _add_config_flags(parser: argparse.ArgumentParser, *, restarts_help: str = "Random restarts (PNORM_RESTARTS).") -> None:
    parser.add_argument("--restarts", type=int, default=None, help=restarts_help)
    parser.add_argument("--seed", type=int, default=None, help="Base seed (PNORM_SEED, default 0).")
    parser.add_argument("--max-iters", type=int, default=None, help="Iteration cap (PNORM_MAX_ITERS).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnorm",
        description="Matrix p-operator norms and C*-likeness checks for block-diagonal algebras.",
    )
    subparsers = parser.add_subparsers(dest="command")

    norm_parser = subparsers.add_parser("norm", help="Compute the p→q operator norm of a matrix.")
    norm_parser.add_argument("matrix", help="Matrix JSON file or inline JSON.")
    norm_parser.add_argument("--p", required=True, help="Domain exponent (number >= 1 or 'inf').")
    norm_parser.add_argument("--q", default=None, help="Codomain exponent (defaults to p).")
    mode = norm_parser.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="mode", action="store_const", const="exact")
    mode.add_argument("--estimate", dest="mode", action="store_const", const="estimate")
    mode.add_argument("--oracle", dest="mode", action="store_const", const="oracle")
    norm_parser.set_defaults(mode="estimate")
    norm_parser.add_argument("--resolution", type=int, default=16, help="Grid oracle resolution.")
    _add_config_flags(norm_parser)

    gap_parser = subparsers.add_parser("gap", help="C*-likeness gap of a module element.")
    gap_parser.add_argument("element", help="Stacked element matrix JSON (file or inline).")
    gap_parser.add_argument("--algebra", required=True, help="Algebra spec: JSON, 'sd', 'upper-triangular' or 'block:1,2,1'.")
    gap_parser.add_argument("--p", required=True, help="Finite exponent p >= 1.")
    gap_parser.add_argument("--side", choices=["column", "row"], default="column")
    gap_parser.add_argument("--tolerance", type=float, default=None, help="Override the gap tolerance.")
    gap_parser.add_argument("--oracle-resolution", type=int, default=None, help="Bracket the supremum on an oracle grid.")
    _add_config_flags(gap_parser)

    verify_parser = subparsers.add_parser("verify", help="Run a randomized property suite.")
    verify_parser.add_argument("suite", choices=sorted(SUITES))
    verify_parser.add_argument("--trials", type=int, default=25)
    _add_config_flags(verify_parser)

    counter_parser = subparsers.add_parser("counterexample", help="Reproduce a known counterexample.")
    counter_parser.add_argument("name", choices=["upper-triangular", "sd", "self-module"])
    counter_parser.add_argument("--p", default="1", help="Finite exponent p >= 1.")
    counter_parser.add_argument("--n", type=int, default=1, help="Module size for upper-triangular.")
    counter_parser.add_argument("--algebra", default=None, help="Algebra spec for self-module.")
    counter_parser.add_argument("--element", default=None, help="Algebra element matrix JSON for self-module.")
    _add_config_flags(counter_parser, restarts_help=f"Random restarts (default {SD_RESTARTS} for sd).")

    sweep_parser = subparsers.add_parser("sweep", help="Sweep the SD gap over p and write a CSV.")
    sweep_parser.add_argument(
        "--grid",
        default=",".join(f"{p:g}" for p in DEFAULT_SWEEP_GRID),
        help="Comma-separated finite exponents.",
    )
    sweep_parser.add_argument("--out", required=True, help="CSV output path.")
    sweep_parser.add_argument("--inner-restarts", type=int, default=None)
    sweep_parser.add_argument("--threads", type=int, default=None, help="Worker processes (PNORM_THREADS).")
    _add_config_flags(sweep_parser, restarts_help=f"Random restarts (default {SD_RESTARTS}).")
    return parser


def _config(args: argparse.Namespace, defaults: dict[str, Any] | None = None) -> OptimizerConfig:
    return OptimizerConfig.from_env(
        defaults,
        restarts=args.restarts,
        seed=args.seed,
        max_iters=args.max_iters,
        oracle_resolution=getattr(args, "oracle_resolution", None),
        inner_restarts=getattr(args, "inner_restarts", None),
    )


def _module_element(matrix: Any, algebra: Any, side: str):
    cls = ColumnModuleElement if side == "column" else RowModuleElement
    return cls.from_matrix(algebra, matrix)


def run_norm(args: argparse.Namespace, cfg: OptimizerConfig) -> CommandResult:
    matrix = load_matrix(args.matrix)
    p = parse_exponent(args.p)
    q = parse_exponent(args.q) if args.q is not None else p
    if args.mode == "exact":
        estimate = op_norm_exact(matrix, p, q)
    elif args.mode == "oracle":
        if args.resolution < 1:
            raise InputError("--resolution must be >= 1.")
        estimate = op_norm_oracle_estimate(matrix, p, q, args.resolution, cfg.oracle_budget)
    else:
        estimate = op_norm_estimate(matrix, p, q, cfg)
    payload = estimate.model_dump(mode="json")
    if args.mode == "oracle":
        delta = oracle_discretization(matrix.shape[1], p, args.resolution)
        payload["upper_bound"] = estimate.value / (1.0 - delta) if delta < 1.0 else None
    return payload, EXIT_OK if estimate.converged else EXIT_NOT_CONVERGED


def run_gap(args: argparse.Namespace, cfg: OptimizerConfig) -> CommandResult:
    algebra = load_algebra(args.algebra)
    p = parse_finite_exponent(args.p)
    element = _module_element(load_matrix(args.element), algebra, args.side)
    report = cstar_gap(element, algebra, p, cfg, tolerance=args.tolerance)
    if not report.element_converged:
        return report, EXIT_NOT_CONVERGED
    return report, EXIT_OK if report.cstar_like else EXIT_FAILURE


def run_verify(args: argparse.Namespace, cfg: OptimizerConfig) -> CommandResult:
    if args.trials < 1:
        raise InputError("--trials must be >= 1.")
    outcome = PropertySuiteExecutor(cfg=cfg).execute(args.suite, args.trials, cfg.seed)
    if not outcome.summary.passed:
        first = outcome.summary.failures[0]
        print(f"property {first.property} failed at seed {first.seed}", file=sys.stderr)
    return outcome.summary, EXIT_OK if outcome.summary.passed else EXIT_FAILURE


def run_counterexample(args: argparse.Namespace, cfg: OptimizerConfig) -> CommandResult:
    if args.name == "sd":
        report = sd_counterexample(cfg)
        cases = sd_claim_cases()
        claim = max(case.value for case in cases) / 2.0
        payload = {
            "report": report.model_dump(mode="json"),
            "claim": {
                "cases": [
                    {"label": case.label, "value": case.value, "argmax": case.argmax} for case in cases
                ],
                "value": claim,
            },
            "expected": {"norm": SD_NORM, "sup": SQRT10, "gap": SD_NORM - SQRT10},
        }
        return payload, EXIT_OK

    p = parse_finite_exponent(args.p)
    if args.name == "upper-triangular":
        if args.n < 1:
            raise InputError("--n must be >= 1.")
        report = upper_triangular_example(p, args.n, cfg)
        return {"report": report.model_dump(mode="json")}, EXIT_OK

    if args.algebra is None or args.element is None:
        raise InputError("self-module needs --algebra and --element.")
    algebra = load_algebra(args.algebra)
    element = load_matrix(args.element)
    if element.shape != (algebra.dim, algebra.dim):
        raise InputError(f"self-module element must be {algebra.dim}x{algebra.dim}.")
    report = self_module_gap(element, algebra, p, cfg)
    return {"report": report.model_dump(mode="json")}, EXIT_OK if report.cstar_like else EXIT_FAILURE


def _require_writable(path: str) -> Path:
    target = Path(path)
    parent = target.parent
    if target.is_dir():
        raise InputError(f"Output path '{path}' is a directory.")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise InputError(f"Output directory '{parent}' is not writable.")
    if target.exists() and not os.access(target, os.W_OK):
        raise InputError(f"Output file '{path}' is not writable.")
    return target


def run_sweep(args: argparse.Namespace, cfg: OptimizerConfig) -> CommandResult:
    grid = parse_grid(args.grid)
    if args.threads is not None and args.threads < 1:
        raise InputError("--threads must be >= 1.")
    _require_writable(args.out)
    return sd_sweep(grid, cfg, threads=args.threads), EXIT_OK


_COMMANDS: dict[str, Callable[[argparse.Namespace, OptimizerConfig], CommandResult]] = {
    "norm": run_norm,
    "gap": run_gap,
    "verify": run_verify,
    "counterexample": run_counterexample,
    "sweep": run_sweep,
}


def _defaults(args: argparse.Namespace) -> dict[str, Any] | None:
    if args.command == "sweep" or (args.command == "counterexample" and args.name == "sd"):
        return {"restarts": SD_RESTARTS}
    return None


def _arguments(args: argparse.Namespace) -> dict[str, Any]:
    return {key: value for key, value in sorted(vars(args).items()) if key != "command"}


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_OK

    handler = _COMMANDS[args.command]
    started = time.perf_counter()
    try:
        cfg = _config(args, _defaults(args))
        with start_span(f"cli.{args.command}"):
            result, code = handler(args, cfg)
        manifest = RunManifest(
            command=args.command,
            arguments=_arguments(args),
            seed=cfg.seed,
            tool_version=__version__,
            duration_seconds=time.perf_counter() - started,
        )
        if isinstance(result, SweepResult):
            write_sweep_csv(result, args.out, manifest)
        payload = result.model_dump(mode="json") if isinstance(result, BaseModel) else result
    except (InputError, AlgebraError, DimensionError, UnsupportedExponentError, OracleBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as exc:
        print(f"error: invalid configuration: {exc.errors()[0]['msg']}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RegressionError as exc:
        print(f"regression: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    print(
        json.dumps(
            {"manifest": manifest.model_dump(mode="json"), "result": payload},
            ensure_ascii=True,
            sort_keys=True,
            allow_nan=False,
        )
    )
    return code
