from plate_obstacle.models.schemas import (
    CellStatus,
    ExperimentCell,
    ExperimentConfig,
    OverlapKind,
    PdasIterationRecord,
    PreconditionerKind,
    TableFormat,
    TableKind,
)

__all__ = [
    'CellStatus',
    'ExperimentCell',
    'ExperimentConfig',
    'OverlapKind',
    'PdasIterationRecord',
    'PreconditionerKind',
    'TableFormat',
    'TableKind',
]
