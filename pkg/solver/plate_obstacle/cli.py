"""
Command-line entry point

    python -m plate_obstacle run --levels 1,2,3,4 --J 4,16 --overlap small --prec one,two
    python -m plate_obstacle tables --cells results/cells.csv --kind kappa --format markdown
    python -m plate_obstacle check --cells results/cells.csv

`run` executes the experiment matrix and writes cells.csv, the JSON-lines run log, every
table in CSV and markdown, and report.md into the output directory. `tables` re-renders
tables from a cells.csv. `check` evaluates the acceptance bands and exits 1 on violations.
"""

from pathlib import Path
from typing import Dict, List, Optional
import argparse
import logging
import sys

from dotenv import dotenv_values
from pydantic import ValidationError

from plate_obstacle import __version__
from plate_obstacle.config import settings
from plate_obstacle.exceptions import PlateObstacleError
from plate_obstacle.experiments.runner import CELLS_NAME, RUN_LOG_NAME, RunLog, run_experiment
from plate_obstacle.experiments.tables import compare_report, emit_table, load_cells, save_cells
from plate_obstacle.models.schemas import (
    CellStatus,
    ExperimentCell,
    ExperimentConfig,
    PreconditionerKind,
    TableFormat,
    TableKind,
)
from plate_obstacle.observability import solver_observability

logger = logging.getLogger("plate_obstacle")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SUFFIXES = {TableFormat.CSV: "csv", TableFormat.MARKDOWN: "md"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plate_obstacle",
        description="Obstacle problems for clamped Kirchhoff plates: PDAS with additive Schwarz PCG.",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--log-level', default=None, metavar='LEVEL',
                        help='logging level (default: PLATE_LOG_LEVEL or INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run the experiment matrix')
    run.add_argument('--config', type=Path, default=None, metavar='FILE',
                     help='key=value experiment file; flags override its entries')
    run.add_argument('--levels', default=None, metavar='L1,L2,...', help='refinement levels (default 1..6)')
    run.add_argument('--J', dest='J_values', default=None, metavar='J1,J2,...',
                     help='subdomain counts, powers of 4 (default 4,16,64)')
    run.add_argument('--overlap', dest='overlaps', default=None, metavar='small,generous',
                     help='overlap kinds')
    run.add_argument('--prec', dest='preconditioners', default=None, metavar='none,one,two',
                     help='preconditioner kinds')
    run.add_argument('--problem', choices=['dome', 'free'], default=None,
                     help="'dome' obstacle or the obstacle-free plate with f = 1")
    run.add_argument('--c', dest='pdas_c', type=float, default=None, help='PDAS constant c > 0')
    run.add_argument('--tol', dest='pcg_rel_tol', type=float, default=None,
                     help='PCG tolerance: stop when ||B r|| and ||r|| are both <= tol ||b||')
    run.add_argument('--max-pdas', dest='max_pdas', type=int, default=None, help='PDAS iteration cap')
    run.add_argument('--budget-sec', dest='budget_sec', type=float, default=None,
                     help='per-cell time budget, also checked inside PCG; exceeding it marks the cell DNC '
                          '(preconditioner setup is not interrupted)')
    run.add_argument('--out', dest='output_dir', type=Path, default=None, metavar='DIR',
                     help='output directory (default results)')
    run.add_argument('--seed', type=int, default=None,
                     help='seed of the random test vectors (PLATE_SEED), recorded in config.json')
    run.add_argument('--workers', dest='max_workers', type=int, default=None,
                     help='threads for subdomain factorizations')
    run.add_argument('--column-workers', type=int, default=1,
                     help='columns run concurrently (timings are only comparable with 1)')
    run.add_argument('--allow-high-levels', dest='allow_high_levels', action='store_true', default=None,
                     help='permit levels >= 7')

    tables = sub.add_parser('tables', help='render tables from a cells.csv')
    tables.add_argument('--cells', type=Path, default=Path('results') / CELLS_NAME)
    tables.add_argument('--kind', choices=[k.value for k in TableKind], default=None,
                        help='table kind (default: all)')
    tables.add_argument('--format', choices=[f.value for f in TableFormat], default=None,
                        help='output format (default: both)')
    tables.add_argument('--level', type=int, default=None, help='level of the scaling table')
    tables.add_argument('--out', type=Path, default=None, metavar='DIR',
                        help='write files here instead of printing')

    check = sub.add_parser('check', help='evaluate the acceptance bands')
    check.add_argument('--cells', type=Path, default=Path('results') / CELLS_NAME)
    check.add_argument('--report', type=Path, default=None, help='also write report.md here')
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """ExperimentConfig from the optional key=value file, overridden by explicit flags."""
    values: Dict[str, Optional[str]] = {}
    if args.config is not None:
        if not args.config.exists():
            raise FileNotFoundError(f"config file not found: {args.config}")
        values = dotenv_values(args.config)
    overrides = {
        name: getattr(args, name)
        for name in ('levels', 'J_values', 'overlaps', 'preconditioners', 'problem', 'pdas_c',
                     'pcg_rel_tol', 'max_pdas', 'budget_sec', 'output_dir', 'seed', 'max_workers',
                     'allow_high_levels')
    }
    return ExperimentConfig.from_key_values(values, **overrides)


def write_tables(cells: List[ExperimentCell], out_dir: Path, kinds=None, formats=None,
                 level: Optional[int] = None) -> List[Path]:
    written = []
    kinds = kinds or [TableKind.KAPPA, TableKind.PDAS_ITERS, TableKind.TIME, TableKind.SCALING]
    formats = formats or list(TableFormat)
    has_preconditioned = any(c.preconditioner is not PreconditionerKind.NONE for c in cells)
    for kind in kinds:
        if kind is TableKind.SCALING and not has_preconditioned:
            continue
        for fmt in formats:
            path = out_dir / f"{kind.value}.{SUFFIXES[fmt]}"
            emit_table(cells, kind, fmt, path, level)
            written.append(path)
    return written


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args)
    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(config.model_dump_json(indent=2))

    print(f"Running levels {config.levels}, J {config.J_values}, "
          f"overlaps {[o.value for o in config.overlaps]}, "
          f"preconditioners {[p.value for p in config.preconditioners]}")
    with RunLog(out_dir / RUN_LOG_NAME) as run_log:
        cells = run_experiment(config, on_record=run_log, workers=args.column_workers)

    save_cells(cells, out_dir / CELLS_NAME)
    write_tables(cells, out_dir)
    report = compare_report(cells, out_dir / "report.md")

    print(emit_table(cells, TableKind.KAPPA, TableFormat.MARKDOWN))
    errors = [c for c in cells if c.status is CellStatus.ERROR]
    print(f"✓ {len(cells)} cells written to {out_dir} "
          f"({len(errors)} errors, {len(report.violations)} band violations)")
    return EXIT_FAILURE if errors else EXIT_OK


def cmd_tables(args: argparse.Namespace) -> int:
    cells = load_cells(args.cells)
    kinds = [TableKind(args.kind)] if args.kind else None
    formats = [TableFormat(args.format)] if args.format else None
    if args.out is not None:
        for path in write_tables(cells, args.out, kinds, formats, args.level):
            print(f"✓ {path}")
        return EXIT_OK
    for kind in kinds or [TableKind.KAPPA, TableKind.PDAS_ITERS, TableKind.TIME]:
        print(emit_table(cells, kind, formats[0] if formats else TableFormat.MARKDOWN, level=args.level))
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    cells = load_cells(args.cells)
    report = compare_report(cells, args.report)
    print(report.to_markdown())
    if report.violations:
        print(f"✗ {len(report.violations)} of {len(report.checks)} band checks violated")
        return EXIT_FAILURE
    print(f"✓ {len(report.checks)} band checks passed")
    return EXIT_OK


COMMANDS = {'run': cmd_run, 'tables': cmd_tables, 'check': cmd_check}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if settings.tracing_enabled:
        solver_observability.initialize(
            project_name=settings.tracing_project_name,
            endpoint=settings.tracing_endpoint,
            console=settings.tracing_console,
        )

    try:
        return COMMANDS[args.command](args)
    except (ValidationError, ValueError, FileNotFoundError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except PlateObstacleError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    finally:
        if solver_observability.is_initialized():
            solver_observability.shutdown()


if __name__ == "__main__":
    sys.exit(main())
