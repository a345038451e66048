"""
Result Tables and Reports

Renders experiment cells as level x column tables (CSV or markdown), computes the
condition-number growth report with its acceptance bands, and persists cells as CSV.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from plate_obstacle.exceptions import ParameterError, TableOutputError
from plate_obstacle.models.schemas import (
    CellStatus,
    ExperimentCell,
    OverlapKind,
    PreconditionerKind,
    TableFormat,
    TableKind,
)

logger = logging.getLogger(__name__)

STATUS_MARKERS = {
    CellStatus.DNC: "DNC",
    CellStatus.SKIPPED: "-",
    CellStatus.ERROR: "ERROR",
}

KAPPA_NOTE = "avg kappa = arithmetic mean of the Lanczos estimates over the PDAS iterations of a cell"

# acceptance bands
UNPRECONDITIONED_GROWTH = (10.0, 24.0)
SMALL_OVERLAP_GROWTH = (4.0, 16.0)
GENEROUS_SPREAD = 2.0
TWO_VS_ONE_LEVEL = 2.0


def column_label(J: int, overlap: OverlapKind, prec: PreconditionerKind) -> str:
    if prec is PreconditionerKind.NONE:
        return "none"
    return f"J={J} {overlap.value} {prec.value}-level"


def _format_value(cell: ExperimentCell, kind: TableKind) -> str:
    if cell.status in STATUS_MARKERS:
        return STATUS_MARKERS[cell.status]
    if kind is TableKind.PDAS_ITERS:
        return str(cell.pdas_iterations)
    if kind is TableKind.TIME:
        return f"{cell.t_solve:.2f}"
    return f"{cell.avg_kappa:.4e}"


def table_frame(cells: Sequence[ExperimentCell], kind, level: Optional[int] = None) -> pd.DataFrame:
    """
    Table as a string-valued DataFrame.

    kappa / pdas_iters / time: rows are levels, one column per (J, overlap, preconditioner).
    scaling: rows are J at a fixed level (the finest by default), and every
    (overlap, preconditioner) pair contributes a kappa and a time column.
    """
    kind = TableKind(kind)
    if not cells:
        raise ParameterError("no cells to tabulate")

    if kind is TableKind.SCALING:
        level = max(c.level for c in cells) if level is None else level
        rows: Dict[int, Dict[str, str]] = {}
        for cell in cells:
            if cell.level != level or cell.preconditioner is PreconditionerKind.NONE:
                continue
            pair = f"{cell.overlap.value} {cell.preconditioner.value}-level"
            row = rows.setdefault(cell.J, {})
            row[f"{pair} kappa"] = _format_value(cell, TableKind.KAPPA)
            row[f"{pair} time"] = _format_value(cell, TableKind.TIME)
        if not rows:
            raise ParameterError(f"no preconditioned cells at level {level}")
        frame = pd.DataFrame.from_dict(rows, orient='index').sort_index()
        frame.index.name = 'J'
        return frame.fillna("-")

    columns: List[str] = []
    values: Dict[int, Dict[str, str]] = {}
    for cell in cells:
        label = column_label(cell.J, cell.overlap, cell.preconditioner)
        if label not in columns:
            columns.append(label)
        values.setdefault(cell.level, {})[label] = _format_value(cell, kind)
    frame = pd.DataFrame.from_dict(values, orient='index').sort_index()
    frame = frame.reindex(columns=columns).fillna("-")
    frame.index.name = 'level'
    return frame


def emit_table(cells: Sequence[ExperimentCell], kind, format=TableFormat.CSV,
               path=None, level: Optional[int] = None) -> str:
    """
    Render a table and, when `path` is given, write it there.

    Returns:
        The rendered text
    """
    kind, format = TableKind(kind), TableFormat(format)
    frame = table_frame(cells, kind, level)
    if format is TableFormat.CSV:
        text = frame.to_csv(lineterminator="\n")
    else:
        caption = f"Table: {kind.value}"
        if kind in (TableKind.KAPPA, TableKind.SCALING):
            caption += f" ({KAPPA_NOTE})"
        text = f"{caption}\n\n{frame.to_markdown()}\n"

    if path is not None:
        _write(path, text)
        logger.info(f"Wrote {kind.value} table to {path}")
    return text


def _write(path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise TableOutputError(path, e) from e


@dataclass
class BandCheck:
    name: str
    column: str
    value: float
    band: Tuple[float, float]

    @property
    def passed(self) -> bool:
        return self.band[0] <= self.value <= self.band[1]


@dataclass
class CompareReport:
    growth: pd.DataFrame
    j_growth: pd.DataFrame
    faster: pd.DataFrame
    two_vs_one_max: Optional[float]
    checks: List[BandCheck] = field(default_factory=list)

    @property
    def violations(self) -> List[BandCheck]:
        return [check for check in self.checks if not check.passed]

    def to_markdown(self) -> str:
        parts = ["# Condition number report", "", KAPPA_NOTE, ""]
        parts += ["## Growth ratios kappa(l+1) / kappa(l)", "",
                  self.growth.to_markdown(index=False) if len(self.growth) else "(none)", ""]
        parts += ["## Growth ratios kappa(4J) / kappa(J) at fixed level", "",
                  self.j_growth.to_markdown(index=False) if len(self.j_growth) else "(none)", ""]
        ratio = "n/a" if self.two_vs_one_max is None else f"{self.two_vs_one_max:.4f}"
        parts += ["## Two-level vs one-level", "", f"max kappa(two-level) / kappa(one-level): {ratio}", ""]
        parts += ["## Faster variant", "",
                  self.faster.to_markdown(index=False) if len(self.faster) else "(none)", ""]
        parts += ["## Acceptance bands", ""]
        if not self.checks:
            parts.append("(no checks applicable)")
        for check in self.checks:
            mark = "ok" if check.passed else "VIOLATION"
            parts.append(f"- [{mark}] {check.name} {check.column}: {check.value:.4g} "
                         f"in [{check.band[0]:g}, {check.band[1]:g}]")
        return "\n".join(parts) + "\n"


def _kappa_lookup(cells: Iterable[ExperimentCell]) -> Dict[Tuple, float]:
    return {
        (c.level, c.J, c.overlap, c.preconditioner): c.avg_kappa
        for c in cells if c.status is CellStatus.OK and c.avg_kappa > 0.0
    }


def compare_report(cells: Sequence[ExperimentCell], path=None) -> CompareReport:
    """
    Growth ratios per column, the two-level / one-level ratio, the faster-variant
    comparison and the acceptance band checks. Written as markdown when `path` is given.
    """
    kappa = _kappa_lookup(cells)
    columns = sorted({key[1:] for key in kappa}, key=lambda col: (col[2].value, col[0], col[1].value))

    growth_rows = []
    checks: List[BandCheck] = []
    for J, overlap, prec in columns:
        label = column_label(J, overlap, prec)
        levels = sorted(level for (level, *col) in kappa if tuple(col) == (J, overlap, prec))
        series = {level: kappa[(level, J, overlap, prec)] for level in levels}
        for lo, hi in zip(levels, levels[1:]):
            if hi != lo + 1:
                continue
            ratio = series[hi] / series[lo]
            growth_rows.append({'column': label, 'from_level': lo, 'to_level': hi, 'ratio': ratio})
            if prec is PreconditionerKind.NONE and lo >= 4:
                checks.append(BandCheck(f"unpreconditioned growth {lo}->{hi}", label, ratio,
                                        UNPRECONDITIONED_GROWTH))
            if prec is PreconditionerKind.ONE_LEVEL and overlap is OverlapKind.SMALL and lo >= 5:
                checks.append(BandCheck(f"small-overlap growth {lo}->{hi}", label, ratio,
                                        SMALL_OVERLAP_GROWTH))

        if overlap is OverlapKind.GENEROUS and prec is not PreconditionerKind.NONE:
            first = 3 if prec is PreconditionerKind.ONE_LEVEL else 4
            stable = [series[level] for level in levels if level >= first]
            if len(stable) >= 2:
                checks.append(BandCheck(f"generous-overlap spread (levels >= {first})", label,
                                        max(stable) / min(stable), (1.0, GENEROUS_SPREAD)))

    j_growth_rows = []
    for (level, J, overlap, prec), value in sorted(kappa.items(), key=lambda kv: (
            kv[0][0], kv[0][3].value, kv[0][2].value, kv[0][1])):
        finer = kappa.get((level, 4 * J, overlap, prec))
        if finer is not None and prec is not PreconditionerKind.NONE:
            j_growth_rows.append({'level': level, 'overlap': overlap.value, 'preconditioner': prec.value,
                                  'J': J, 'J_next': 4 * J, 'ratio': finer / value})

    ratios = [
        kappa[(level, J, overlap, PreconditionerKind.TWO_LEVEL)] / value
        for (level, J, overlap, prec), value in kappa.items()
        if prec is PreconditionerKind.ONE_LEVEL and (level, J, overlap, PreconditionerKind.TWO_LEVEL) in kappa
    ]
    two_vs_one = max(ratios) if ratios else None
    if two_vs_one is not None:
        checks.append(BandCheck("two-level / one-level max ratio", "all", two_vs_one, (0.0, TWO_VS_ONE_LEVEL)))

    report = CompareReport(
        growth=pd.DataFrame(growth_rows, columns=['column', 'from_level', 'to_level', 'ratio']),
        j_growth=pd.DataFrame(j_growth_rows, columns=['level', 'overlap', 'preconditioner', 'J', 'J_next', 'ratio']),
        faster=_faster_frame(cells),
        two_vs_one_max=two_vs_one,
        checks=checks,
    )
    for violation in report.violations:
        logger.warning(f"Acceptance band violated: {violation.name} {violation.column} = {violation.value:.4g}")
    if path is not None:
        _write(path, report.to_markdown())
        logger.info(f"Wrote comparison report to {path}")
    return report


def _faster_frame(cells: Sequence[ExperimentCell]) -> pd.DataFrame:
    """Per (level, J): which of one/two-level and which of small/generous overlap solved faster."""
    times = {
        (c.level, c.J, c.overlap, c.preconditioner): c.t_solve
        for c in cells if c.status is CellStatus.OK
    }
    rows = []
    for level, J in sorted({(key[0], key[1]) for key in times}):
        for overlap in OverlapKind:
            one = times.get((level, J, overlap, PreconditionerKind.ONE_LEVEL))
            two = times.get((level, J, overlap, PreconditionerKind.TWO_LEVEL))
            if one is not None and two is not None:
                rows.append({'level': level, 'J': J, 'comparison': f"{overlap.value}: one vs two",
                             'faster': 'one' if one <= two else 'two'})
        for prec in (PreconditionerKind.ONE_LEVEL, PreconditionerKind.TWO_LEVEL):
            small = times.get((level, J, OverlapKind.SMALL, prec))
            generous = times.get((level, J, OverlapKind.GENEROUS, prec))
            if small is not None and generous is not None:
                rows.append({'level': level, 'J': J, 'comparison': f"{prec.value}-level: small vs generous",
                             'faster': 'small' if small <= generous else 'generous'})
    return pd.DataFrame(rows, columns=['level', 'J', 'comparison', 'faster'])


def save_cells(cells: Sequence[ExperimentCell], path):
    """Persist cells as CSV (enum values, one row per cell)."""
    frame = cells_frame(cells)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise TableOutputError(path, e) from e


def load_cells(path) -> List[ExperimentCell]:
    frame = pd.read_csv(path, keep_default_na=False)
    cells = []
    for row in frame.to_dict(orient='records'):
        row['message'] = row.get('message') or None
        cells.append(ExperimentCell(**row))
    return cells


def cells_frame(cells: Sequence[ExperimentCell]) -> pd.DataFrame:
    return pd.DataFrame([cell.model_dump(mode='json') for cell in cells])


def kappa_series(cells: Sequence[ExperimentCell], J: int, overlap, prec) -> Dict[int, float]:
    """avg kappa by level for one column, OK cells only."""
    overlap, prec = OverlapKind(overlap), PreconditionerKind(prec)
    return {
        c.level: c.avg_kappa for c in cells
        if c.status is CellStatus.OK and c.J == J and c.overlap is overlap and c.preconditioner is prec
    }


def max_ratio(values: Iterable[float]) -> float:
    values = np.asarray(list(values), dtype=float)
    return float(values.max() / values.min()) if values.size else float('nan')
