"""Command line interface: robust-loss-lab <loss-table | verify | toyfit | interp>."""

from __future__ import annotations

import argparse
import asyncio
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from .config import (
    CONF_BOUND,
    CONF_WORKERS,
    InterpRun,
    LossTableRun,
    ToyfitRun,
    build_interp_run,
    build_loss_table_run,
    build_toyfit_run,
    load_run_config,
)
from .const import (
    CONF_INTERP,
    CONF_TOYFIT,
    FLOAT_FORMAT,
    FORMAT_CSV,
    FORMAT_JSON,
    FORMAT_MARKDOWN,
    LOSS_TABLE_HEADER,
    OUTPUT_FORMATS,
    PROFILE_DEFAULT,
    _LOGGER,
)
from .exceptions import (
    AllDivergedError,
    InvalidParameterError,
    InvalidRangeError,
    RobustLossLabError,
)
from .interp import TABLE_ROWS, InterpretationTable, interpret_all
from .losses import (
    BoundSide,
    HuberParams,
    huber,
    huber_grad,
    kl_loss,
    kl_loss_grad,
    lower_bound_params,
    upper_bound_params,
)
from .presets import PRESETS
from .toyfit import GridSearchResult, SweepPoint, async_noise_sweep, noise_sweep
from .verify import PROFILES, BoundFactory, VerificationReport, run_checks

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

TOYFIT_HEADER = ("noise_scale", "repeat", "optimal_alpha", "best_lr", "best_rmse")


def format_float(value: float) -> str:
    """17 significant digits, negative zero printed as 0."""
    return format(float(value) + 0.0, FLOAT_FORMAT)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buffer.getvalue(), encoding="utf-8", newline="")


def loss_table_rows(
    alpha: float, x_min: float, x_max: float, n_points: int
) -> list[list[float]]:
    """Loss and derivative values on an even grid, one row per x.

    Args:
        alpha: Huber transition point
        x_min: First grid point
        x_max: Last grid point
        n_points: Grid size, at least 2

    Returns:
        Rows in LOSS_TABLE_HEADER column order

    Raises:
        InvalidRangeError: If the range is reversed or empty
    """
    if not x_min < x_max:
        raise InvalidRangeError(f"x range [{x_min}, {x_max}] is reversed or empty")
    if n_points < 2:
        raise InvalidParameterError(f"n_points must be at least 2, got {n_points}")
    xs = np.linspace(x_min, x_max, n_points)
    hp = HuberParams(alpha)
    lower = lower_bound_params(alpha)
    upper = upper_bound_params(alpha)
    columns = np.column_stack(
        [
            xs,
            huber(xs, hp),
            huber_grad(xs, hp),
            kl_loss(xs, lower),
            kl_loss_grad(xs, lower),
            kl_loss(xs, upper),
            kl_loss_grad(xs, upper),
        ]
    )
    return columns.tolist()


def loss_table_path(out: Path, alpha: float) -> Path:
    """out with _alpha=<value> appended to its stem."""
    suffix = out.suffix or ".csv"
    return out.with_name(f"{out.stem}_alpha={alpha:g}{suffix}")


def write_loss_tables(run: LossTableRun, out: Path) -> list[Path]:
    """Write one loss-table CSV per alpha and return the paths written."""
    tables = {
        loss_table_path(out, alpha): loss_table_rows(alpha, run.x_min, run.x_max, run.n_points)
        for alpha in run.alphas
    }
    for path, rows in tables.items():
        _write_csv(path, LOSS_TABLE_HEADER, [[format_float(v) for v in row] for row in rows])
        _LOGGER.info("Wrote %s", path)
    return list(tables)


def cmd_loss_table(args: argparse.Namespace) -> int:
    """Handle the loss-table command."""
    run = build_loss_table_run(load_run_config(args.config))
    run = LossTableRun(
        tuple(args.alpha) if args.alpha else run.alphas,
        run.x_min if args.x_min is None else args.x_min,
        run.x_max if args.x_max is None else args.x_max,
        run.n_points if args.n_points is None else args.n_points,
    )
    write_loss_tables(run, Path(args.out))
    return EXIT_OK


def format_report(report: VerificationReport) -> str:
    """Human readable verification report."""
    lines = [f"Verification profile: {report.profile}"]
    for result in report.results:
        status = "PASS" if result.passed else "FAIL"
        lines.append(
            f"{status} {result.name:<30} {result.value: .3e} (tolerance {result.tolerance: .3e})"
        )
        lines.extend(f"    {key}: {value:.3e}" for key, value in result.details.items())
    failure = report.first_failure
    lines.append(
        "All checks passed" if failure is None else f"First failing check: {failure.name}"
    )
    return "\n".join(lines) + "\n"


def cmd_verify(
    args: argparse.Namespace, lower_bound: BoundFactory = lower_bound_params
) -> int:
    """Handle the verify command; exit code 1 when any check fails."""
    report = run_checks(args.profile, lower_bound=lower_bound)
    print(format_report(report), end="")
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _LOGGER.info("Wrote %s", args.out)
    failure = report.first_failure
    if failure is not None:
        _LOGGER.error("Verification failed at check %s", failure.name)
        return EXIT_FAILURE
    return EXIT_OK


def run_sweep(run: ToyfitRun) -> list[SweepPoint]:
    """Run the configured sweep, in a process pool when workers > 1."""
    if run.workers == 1:
        return noise_sweep(
            run.base,
            run.noise_scales,
            run.alpha_grid,
            run.lr_grid,
            run.iterations,
            run.repeats,
            run.loss_form,
        )
    with ProcessPoolExecutor(max_workers=run.workers) as pool:
        return asyncio.run(
            async_noise_sweep(
                run.base,
                run.noise_scales,
                run.alpha_grid,
                run.lr_grid,
                run.iterations,
                run.repeats,
                run.loss_form,
                executor=pool,
            )
        )


def _json_float(value: float) -> float | None:
    return value if math.isfinite(value) else None


def _result_dict(result: GridSearchResult | None) -> dict[str, Any] | None:
    if result is None:
        return None
    return {
        "best_alpha": result.best_alpha,
        "best_lr": result.best_lr,
        "best_rmse": result.best_rmse,
        "table": [
            {
                "alpha": cell.alpha,
                "lr": cell.lr,
                "rmse": _json_float(cell.rmse),
                "diverged_at": cell.diverged_at,
            }
            for cell in result.table
        ],
    }


def toyfit_rows(curve: Sequence[SweepPoint]) -> list[list[str]]:
    """CSV rows of a sweep; all-diverged repeats print nan."""
    rows = []
    for point in curve:
        for run in point.runs:
            best = run.result
            values = (
                (math.nan, math.nan, math.nan)
                if best is None
                else (best.best_alpha, best.best_lr, best.best_rmse)
            )
            rows.append(
                [format_float(point.scale), str(run.repeat), *(format_float(v) for v in values)]
            )
    return rows


def toyfit_sidecar(run: ToyfitRun, curve: Sequence[SweepPoint]) -> dict[str, Any]:
    """Full grid tables of a sweep, keyed by noise scale and repeat."""
    return {
        "noise_family": run.base.noise.family.value,
        "seed": run.base.seed,
        "loss_form": run.loss_form.value,
        "iterations": run.iterations,
        "points": [
            {
                "noise_scale": point.scale,
                "mean_optimal_alpha": _json_float(point.mean_alpha),
                "runs": [
                    {
                        "repeat": sweep_run.repeat,
                        "seed": sweep_run.seed,
                        "diverged": sweep_run.result is None,
                        "result": _result_dict(sweep_run.result),
                    }
                    for sweep_run in point.runs
                ],
            }
            for point in curve
        ],
    }


def cmd_toyfit(args: argparse.Namespace) -> int:
    """Handle the toyfit command."""
    config = load_run_config(args.config)
    if args.workers is not None:
        config[CONF_TOYFIT][CONF_WORKERS] = args.workers
    run = build_toyfit_run(config, seed=args.seed)
    curve = run_sweep(run)

    out = Path(args.out)
    rows = toyfit_rows(curve)
    sidecar = out.with_suffix(".json")
    _write_csv(out, TOYFIT_HEADER, rows)
    sidecar.write_text(
        json.dumps(toyfit_sidecar(run, curve), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    _LOGGER.info("Wrote %s and %s", out, sidecar)

    if all(sweep_run.result is None for point in curve for sweep_run in point.runs):
        raise AllDivergedError("every repeat of the sweep diverged")
    return EXIT_OK


def render_csv(tables: Sequence[InterpretationTable]) -> str:
    """Interpretation tables as CSV, one column per config."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["row", *(table.name for table in tables)])
    cells = [table.rendered() for table in tables]
    for index, row in enumerate(TABLE_ROWS):
        writer.writerow([row, *(column[index] for column in cells)])
    return buffer.getvalue()


def render_json(tables: Sequence[InterpretationTable], bound: BoundSide) -> str:
    """Interpretation tables as JSON, including the log-domain scales."""
    document = {
        "bound": bound.value,
        "tables": [
            {
                "name": table.name,
                "rows": {row: scale.render() for row, scale in table.rows},
                "log_domain": {
                    coordinate: {"label": str(label), "prediction": str(prediction)}
                    for coordinate, label, prediction in table.log_domain
                },
            }
            for table in tables
        ],
    }
    return json.dumps(document, indent=2) + "\n"


def render_markdown(tables: Sequence[InterpretationTable]) -> str:
    """Interpretation tables as a markdown table."""
    cells = [table.rendered() for table in tables]
    lines = [
        "| row | " + " | ".join(table.name for table in tables) + " |",
        "|---|" + "---|" * len(tables),
    ]
    for index, row in enumerate(TABLE_ROWS):
        lines.append(f"| {row} | " + " | ".join(column[index] for column in cells) + " |")
    return "\n".join(lines) + "\n"


def render_interp(run: InterpRun, output_format: str) -> str:
    """Interpret every config of a run and serialise the tables."""
    tables = interpret_all(run.configs, run.bound)
    if output_format == FORMAT_JSON:
        return render_json(tables, run.bound)
    if output_format == FORMAT_MARKDOWN:
        return render_markdown(tables)
    return render_csv(tables)


def cmd_interp(args: argparse.Namespace) -> int:
    """Handle the interp command."""
    config = load_run_config(args.config)
    if args.bound is not None:
        config[CONF_INTERP][CONF_BOUND] = args.bound
    text = render_interp(build_interp_run(config, preset=args.preset), args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="")
        _LOGGER.info("Wrote %s", args.out)
    else:
        print(text, end="")
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """Argument parser of the robust-loss-lab command."""
    parser = argparse.ArgumentParser(
        prog="robust-loss-lab",
        description="Robust regression losses: tables, checks, toy fits and interpretation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug messages.")
    commands = parser.add_subparsers(dest="command", required=True)

    loss_table = commands.add_parser("loss-table", help="Write loss and gradient curves.")
    loss_table.add_argument("--config", help="RunConfig JSON document.")
    loss_table.add_argument(
        "--alpha", type=float, action="append", help="Transition point (repeatable)."
    )
    loss_table.add_argument("--x-min", type=float, help="First grid point.")
    loss_table.add_argument("--x-max", type=float, help="Last grid point.")
    loss_table.add_argument("--n-points", type=int, help="Grid size.")
    loss_table.add_argument(
        "--out", required=True, help="Output path; _alpha=<value> is added to the stem."
    )
    loss_table.set_defaults(handler=cmd_loss_table)

    verify = commands.add_parser("verify", help="Run the invariant checks.")
    verify.add_argument("--profile", choices=sorted(PROFILES), default=PROFILE_DEFAULT)
    verify.add_argument("--out", help="Also write the report as JSON.")
    verify.set_defaults(handler=cmd_verify)

    toyfit = commands.add_parser("toyfit", help="Sweep noise scales on the toy problem.")
    toyfit.add_argument("--config", help="RunConfig JSON document.")
    toyfit.add_argument("--out", required=True, help="CSV path; the JSON sidecar goes next to it.")
    toyfit.add_argument("--seed", type=int, help="Override the master seed.")
    toyfit.add_argument("--workers", type=_positive_int, help="Worker processes for the sweep.")
    toyfit.set_defaults(handler=cmd_toyfit)

    interp = commands.add_parser("interp", help="Interpret box-regression loss settings.")
    interp.add_argument("--config", help="RunConfig JSON document.")
    interp.add_argument("--preset", choices=sorted(PRESETS), help="Built-in configurations.")
    interp.add_argument("--format", choices=OUTPUT_FORMATS, default=FORMAT_CSV)
    interp.add_argument("--bound", choices=[side.value for side in BoundSide])
    interp.add_argument("--out", help="Output file, stdout when omitted.")
    interp.set_defaults(handler=cmd_interp)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point of the robust-loss-lab command."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except AllDivergedError as err:
        _LOGGER.error("%s", err)
        return EXIT_FAILURE
    except RobustLossLabError as err:
        _LOGGER.error("%s", err)
        return EXIT_USAGE
    except OSError as err:
        _LOGGER.error("I/O failure: %s", err)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
