"""
Test Experiment Runner, Tables and CLI

Config validation, the level sweep per column, table rendering, the comparison report
and the command-line surface on small levels.
"""

import sys
import os

# Add parent directory to path to import plate_obstacle modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import json

import numpy as np
import pytest
from dotenv import dotenv_values
from pydantic import ValidationError

from plate_obstacle.cli import main
from plate_obstacle.config import settings
from plate_obstacle.exceptions import TableOutputError
from plate_obstacle.experiments import (
    RunLog,
    compare_report,
    emit_table,
    experiment_columns,
    kappa_series,
    load_cells,
    run_experiment,
    save_cells,
    skip_reason,
    table_frame,
)
from plate_obstacle.experiments import runner
from plate_obstacle.experiments.tables import KAPPA_NOTE, max_ratio
from plate_obstacle.models.schemas import (
    CellStatus,
    ExperimentCell,
    ExperimentConfig,
    OverlapKind,
    PdasIterationRecord,
    PreconditionerKind,
    TableKind,
)
from plate_obstacle.solvers.pdas import ActiveSet, PdasReport


def cell(level, J=4, overlap='small', prec='one', kappa=10.0, status='OK', t=1.0, iters=3, message=None):
    return ExperimentCell(level=level, J=J, overlap=overlap, preconditioner=prec, avg_kappa=kappa,
                          status=status, t_solve=t, pdas_iterations=iters, message=message)


def small_config(tmp_path, **kwargs):
    values = dict(levels=[1, 2], J_values=[4], overlaps=['small'], preconditioners=['one'],
                  output_dir=tmp_path, max_workers=1)
    values.update(kwargs)
    return ExperimentConfig(**values)


# ----------------------------------------------------------------------------
# Config
# ----------------------------------------------------------------------------

def test_config_defaults_and_lists():
    config = ExperimentConfig()
    assert config.levels == [1, 2, 3, 4, 5, 6]
    assert config.J_values == [4, 16, 64]

    config = ExperimentConfig(levels="3,1,2", J_values="16,4", overlaps="generous",
                              preconditioners="none,two")
    assert config.levels == [1, 2, 3]
    assert config.J_values == [4, 16]
    assert config.overlaps == [OverlapKind.GENEROUS]
    assert config.preconditioners == [PreconditionerKind.NONE, PreconditionerKind.TWO_LEVEL]


@pytest.mark.parametrize("kwargs", [
    {'J_values': [5]},
    {'J_values': [0]},
    {'J_values': [8]},
    {'levels': [0, 1]},
    {'levels': []},
    {'levels': [7]},
    {'pdas_c': 0.0},
    {'problem': 'membrane'},
    {'overlaps': ['huge']},
])
def test_config_rejects_invalid_values(kwargs):
    with pytest.raises(ValidationError):
        ExperimentConfig(**kwargs)


def test_config_high_levels_need_opt_in():
    config = ExperimentConfig(levels=[7, 8], allow_high_levels=True)
    assert config.levels == [7, 8]


def test_config_from_env_file(tmp_path):
    path = tmp_path / "experiment.env"
    path.write_text("LEVELS=1,2\nJ_VALUES=4,16\nPRECONDITIONERS=none\n")
    config = ExperimentConfig.from_key_values(dotenv_values(path), pdas_c=5.0)
    assert config.levels == [1, 2]
    assert config.J_values == [4, 16]
    assert config.preconditioners == [PreconditionerKind.NONE]
    assert config.pdas_c == 5.0

    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_key_values({'LEVEL': '1'})


def test_seed_follows_settings(rng):
    assert ExperimentConfig().seed == settings.seed
    assert ExperimentConfig(seed=7).seed == 7
    assert rng.standard_normal() == np.random.default_rng(settings.seed).standard_normal()


def test_experiment_columns_and_skip_reason():
    columns = experiment_columns(ExperimentConfig())
    assert columns[0] == (1, OverlapKind.SMALL, PreconditionerKind.NONE)
    assert len(columns) == 1 + 2 * 3 * 2

    assert skip_reason(1, 4, PreconditionerKind.ONE_LEVEL) is None
    assert skip_reason(1, 16, PreconditionerKind.ONE_LEVEL) is not None
    assert "J >= 4" in skip_reason(2, 1, PreconditionerKind.TWO_LEVEL)
    assert skip_reason(3, 64, PreconditionerKind.NONE) is None


# ----------------------------------------------------------------------------
# Runner
# ----------------------------------------------------------------------------

def test_single_cell_run(tmp_path):
    cells = run_experiment(small_config(tmp_path, levels=[1]))
    assert len(cells) == 1
    only = cells[0]
    assert only.status is CellStatus.OK
    assert only.pdas_iterations >= 1
    assert only.avg_kappa >= 0.0
    assert (only.level, only.J, only.overlap) == (1, 4, OverlapKind.SMALL)


def test_skipped_cells(tmp_path):
    cells = run_experiment(small_config(tmp_path, J_values=[1, 16], preconditioners=['one', 'two']))
    by_key = {(c.level, c.J, c.preconditioner): c for c in cells}

    assert by_key[(1, 16, PreconditionerKind.ONE_LEVEL)].status is CellStatus.SKIPPED
    assert by_key[(2, 16, PreconditionerKind.ONE_LEVEL)].status is CellStatus.OK
    for level in (1, 2):
        skipped = by_key[(level, 1, PreconditionerKind.TWO_LEVEL)]
        assert skipped.status is CellStatus.SKIPPED
        assert skipped.message
    assert by_key[(2, 16, PreconditionerKind.TWO_LEVEL)].status is CellStatus.OK


def test_run_records_every_pdas_iteration(tmp_path):
    records = []
    cells = run_experiment(small_config(tmp_path), on_record=records.append)
    for c in cells:
        mine = [r for r in records if r.level == c.level]
        assert len(mine) == c.pdas_iterations
        assert [r.k for r in mine] == list(range(1, c.pdas_iterations + 1))


def test_run_is_deterministic(tmp_path):
    config = small_config(tmp_path, preconditioners=['none', 'one'])
    first, second = run_experiment(config), run_experiment(config)
    for a, b in zip(first, second):
        assert (a.status, a.pdas_iterations, a.avg_kappa) == (b.status, b.pdas_iterations, b.avg_kappa)


def test_columns_are_independent(tmp_path):
    alone = run_experiment(small_config(tmp_path))
    together = run_experiment(small_config(tmp_path, overlaps=['small', 'generous']))
    small = [c for c in together if c.overlap is OverlapKind.SMALL]
    assert [c.avg_kappa for c in small] == [c.avg_kappa for c in alone]


def test_column_workers_keep_order(tmp_path):
    config = small_config(tmp_path, overlaps=['small', 'generous'], preconditioners=['none', 'one'])
    sequential = run_experiment(config)
    threaded = run_experiment(config, workers=3)
    assert [c.column for c in threaded] == [c.column for c in sequential]
    assert [c.avg_kappa for c in threaded] == [c.avg_kappa for c in sequential]


def test_time_budget_marks_later_levels(tmp_path, monkeypatch):
    real_solve = runner.pdas_solve

    def budget_exhausted_at_level_2(problem, **kwargs):
        if problem.level == 2:
            return PdasReport(np.zeros(problem.size), np.zeros(problem.size), 1,
                              ActiveSet(np.array([], dtype=np.int64)), False, [], timed_out=True)
        return real_solve(problem, **kwargs)

    monkeypatch.setattr(runner, 'pdas_solve', budget_exhausted_at_level_2)
    cells = run_experiment(small_config(tmp_path, levels=[1, 2, 3]))
    assert [c.status for c in cells] == [CellStatus.OK, CellStatus.DNC, CellStatus.DNC]
    assert "budget" in cells[1].message
    assert cells[2].message == "level 2 did not complete"


def test_time_budget_interrupts_pcg(tmp_path):
    cells = run_experiment(small_config(tmp_path, levels=[2, 3], budget_sec=1e-9))
    assert [c.status for c in cells] == [CellStatus.DNC, CellStatus.DNC]
    assert "budget" in cells[0].message
    assert cells[0].pdas_iterations == 0


def test_run_log(tmp_path):
    path = tmp_path / "logs" / "run_log.jsonl"
    record = PdasIterationRecord(level=1, J=4, overlap='small', preconditioner='one', k=1,
                                 active_size=3, pcg_iterations=7, kappa=2.5, time=0.01)
    with RunLog(path) as log:
        log(record)
        log(record.model_copy(update={'k': 2}))
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[1])['k'] == 2
    assert json.loads(lines[0])['overlap'] == 'small'
    assert PdasIterationRecord.model_validate_json(lines[0]) == record


# ----------------------------------------------------------------------------
# Tables
# ----------------------------------------------------------------------------

def test_single_cell_table():
    text = emit_table([cell(1, kappa=12.5)], TableKind.KAPPA, 'csv')
    assert text == "level,J=4 small one-level\n1,1.2500e+01\n"
    assert emit_table([cell(1, iters=4)], 'pdas_iters', 'csv').endswith("1,4\n")
    assert emit_table([cell(1, t=0.125)], 'time', 'csv').endswith("1,0.12\n")


def test_status_markers():
    cells = [
        cell(1, prec='none', J=1),
        cell(2, prec='none', J=1, status='DNC', message='timed out'),
        cell(1),
        cell(2, status='SKIPPED', message='J too large'),
        cell(3, status='ERROR', message='factorization failed'),
    ]
    frame = table_frame(cells, TableKind.KAPPA)
    assert list(frame.columns) == ['none', 'J=4 small one-level']
    assert frame.loc[2, 'none'] == "DNC"
    assert frame.loc[2, 'J=4 small one-level'] == "-"
    assert frame.loc[3, 'J=4 small one-level'] == "ERROR"
    assert frame.loc[3, 'none'] == "-", "missing cells render as skipped"


def test_csv_and_markdown_carry_the_same_values():
    cells = [cell(level, overlap=overlap, kappa=level * 3.0)
             for level in (1, 2, 3) for overlap in ('small', 'generous')]
    csv_text = emit_table(cells, 'kappa', 'csv')
    markdown = emit_table(cells, 'kappa', 'markdown')
    assert markdown.startswith("Table: kappa")
    assert KAPPA_NOTE in markdown
    for line in csv_text.splitlines()[1:]:
        for value in line.split(',')[1:]:
            assert value in markdown


def test_table_bit_stable(tmp_path):
    cells = [cell(1, kappa=1.0 / 3.0), cell(2, kappa=2.0 / 3.0, status='DNC')]
    first = tmp_path / "a" / "kappa.csv"
    second = tmp_path / "b" / "kappa.csv"
    emit_table(cells, 'kappa', 'csv', first)
    emit_table(list(reversed(cells)), 'kappa', 'csv', second)
    assert first.read_bytes() == second.read_bytes()


def test_table_output_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    with pytest.raises(TableOutputError):
        emit_table([cell(1)], 'kappa', 'csv', blocker / "kappa.csv")


def test_scaling_table():
    cells = [cell(4, J=J, overlap=overlap, prec=prec, kappa=J * 1.0)
             for J in (4, 16) for overlap in ('small', 'generous') for prec in ('one', 'two')]
    cells.append(cell(4, J=1, prec='none', kappa=1e5))
    frame = table_frame(cells, 'scaling')
    assert list(frame.index) == [4, 16]
    assert frame.index.name == 'J'
    assert frame.loc[16, 'generous two-level kappa'] == "1.6000e+01"
    assert 'none kappa' not in frame.columns


def test_cells_round_trip(tmp_path):
    cells = [cell(1, kappa=1.0 / 3.0), cell(2, status='SKIPPED', message='J=16 too large', kappa=0.0)]
    save_cells(cells, tmp_path / "cells.csv")
    loaded = load_cells(tmp_path / "cells.csv")
    assert [c.status for c in loaded] == [CellStatus.OK, CellStatus.SKIPPED]
    assert loaded[0].message is None
    assert loaded[1].message == 'J=16 too large'
    assert loaded[0].avg_kappa == pytest.approx(1.0 / 3.0, rel=1e-15)


# ----------------------------------------------------------------------------
# Comparison report
# ----------------------------------------------------------------------------

def synthetic_cells(unpreconditioned_growth=16.0):
    cells = []
    for level, base in zip((4, 5, 6), (1e4, 1e4 * unpreconditioned_growth, 1e4 * unpreconditioned_growth ** 2)):
        cells.append(cell(level, J=1, prec='none', kappa=base))
    for level, value in zip((4, 5, 6), (50.0, 400.0, 3200.0)):
        cells.append(cell(level, overlap='small', prec='one', kappa=value))
    for level, value in zip((3, 4, 5, 6), (10.0, 12.0, 11.0, 13.0)):
        cells.append(cell(level, overlap='generous', prec='one', kappa=value, t=2.0))
    for level, value in zip((3, 4, 5, 6), (15.0, 8.0, 9.0, 8.5)):
        cells.append(cell(level, overlap='generous', prec='two', kappa=value, t=1.0))
    return cells


def test_compare_report_bands_pass(tmp_path):
    report = compare_report(synthetic_cells(), tmp_path / "report.md")
    assert report.violations == []
    names = {check.name for check in report.checks}
    assert "unpreconditioned growth 4->5" in names
    assert "small-overlap growth 5->6" in names
    assert "small-overlap growth 4->5" not in names
    assert report.two_vs_one_max == pytest.approx(1.5)
    text = (tmp_path / "report.md").read_text()
    assert "Acceptance bands" in text


def test_compare_report_flags_violation():
    report = compare_report(synthetic_cells(unpreconditioned_growth=30.0))
    violated = {check.name for check in report.violations}
    assert "unpreconditioned growth 4->5" in violated
    assert "VIOLATION" in report.to_markdown()


def test_compare_report_faster_variant():
    report = compare_report(synthetic_cells())
    rows = report.faster[report.faster['comparison'] == "generous: one vs two"]
    assert set(rows['faster']) == {'two'}


def test_kappa_series_and_ratio():
    cells = synthetic_cells()
    series = kappa_series(cells, 4, 'generous', 'one')
    assert series == {3: 10.0, 4: 12.0, 5: 11.0, 6: 13.0}
    assert max_ratio(series.values()) == pytest.approx(1.3)
    assert np.isnan(max_ratio([]))


# ----------------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------------

def test_cli_run_tables_check(tmp_path, capsys):
    out = tmp_path / "results"
    code = main(['run', '--levels', '1,2', '--J', '4', '--overlap', 'small', '--prec', 'none,one',
                 '--out', str(out)])
    assert code == 0
    for name in ('config.json', 'run_log.jsonl', 'cells.csv', 'kappa.csv', 'kappa.md',
                 'pdas_iters.csv', 'time.md', 'scaling.csv', 'report.md'):
        assert (out / name).exists(), name
    assert "Table: kappa" in capsys.readouterr().out

    assert main(['tables', '--cells', str(out / 'cells.csv'), '--kind', 'kappa', '--format', 'csv']) == 0
    printed = capsys.readouterr().out
    assert printed.startswith("level,none,J=4 small one-level")

    assert main(['check', '--cells', str(out / 'cells.csv')]) == 0


def test_cli_usage_errors(tmp_path):
    assert main(['run', '--J', '5', '--levels', '1', '--out', str(tmp_path)]) == 2
    assert main(['run', '--levels', '8', '--out', str(tmp_path)]) == 2
    assert main(['run', '--config', str(tmp_path / "missing.env")]) == 2
    assert main(['check', '--cells', str(tmp_path / "missing.csv")]) == 2
    with pytest.raises(SystemExit):
        main(['run', '--problem', 'membrane'])
