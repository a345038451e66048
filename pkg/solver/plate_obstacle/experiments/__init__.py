"""
Experiments Module

Runs the levels x J x overlap x preconditioner matrix and renders its tables and the
condition-number growth report.
"""

from plate_obstacle.experiments.runner import (
    RunLog,
    experiment_columns,
    run_column,
    run_experiment,
    skip_reason,
)
from plate_obstacle.experiments.tables import (
    CompareReport,
    compare_report,
    emit_table,
    kappa_series,
    load_cells,
    save_cells,
    table_frame,
)

__all__ = [
    'RunLog',
    'experiment_columns',
    'run_column',
    'run_experiment',
    'skip_reason',
    'CompareReport',
    'compare_report',
    'emit_table',
    'kappa_series',
    'load_cells',
    'save_cells',
    'table_frame',
]
