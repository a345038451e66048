from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from plate_obstacle.config import settings


class OverlapKind(str, Enum):
    SMALL = "small"
    GENEROUS = "generous"


class PreconditionerKind(str, Enum):
    NONE = "none"
    ONE_LEVEL = "one"
    TWO_LEVEL = "two"


class CellStatus(str, Enum):
    OK = "OK"
    DNC = "DNC"
    SKIPPED = "SKIPPED"
    ERROR = "ERROR"


class TableKind(str, Enum):
    KAPPA = "kappa"
    PDAS_ITERS = "pdas_iters"
    TIME = "time"
    SCALING = "scaling"


class TableFormat(str, Enum):
    CSV = "csv"
    MARKDOWN = "markdown"


HIGH_LEVEL = 7


def _split_list(v):
    """Accept 'a,b,c' strings from flags and key=value files as lists"""
    if isinstance(v, str):
        return [item.strip() for item in v.split(',') if item.strip()]
    return v


class ExperimentConfig(BaseModel):
    levels: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    J_values: List[int] = Field(default_factory=lambda: [4, 16, 64])
    overlaps: List[OverlapKind] = Field(default_factory=lambda: [OverlapKind.SMALL, OverlapKind.GENEROUS])
    preconditioners: List[PreconditionerKind] = Field(
        default_factory=lambda: [PreconditionerKind.NONE, PreconditionerKind.ONE_LEVEL, PreconditionerKind.TWO_LEVEL]
    )
    problem: str = "dome"
    pdas_c: float = Field(default_factory=lambda: settings.pdas_c, gt=0)
    pcg_rel_tol: float = Field(default_factory=lambda: settings.pcg_rel_tol, gt=0)
    max_pdas: int = Field(default_factory=lambda: settings.max_pdas, ge=1)
    max_pcg_factor: int = Field(default_factory=lambda: settings.pcg_max_iter_factor, ge=1)
    budget_sec: float = Field(default_factory=lambda: settings.budget_sec, gt=0)
    output_dir: Path = Path("results")
    seed: int = Field(default_factory=lambda: settings.seed)
    allow_high_levels: bool = False
    max_workers: int = Field(default_factory=lambda: settings.max_workers, ge=1)

    @field_validator('levels', 'J_values', 'overlaps', 'preconditioners', mode='before')
    @classmethod
    def split_lists(cls, v):
        return _split_list(v)

    @field_validator('levels')
    @classmethod
    def check_levels(cls, v):
        if not v or any(level < 1 for level in v):
            raise ValueError("levels must be a non-empty list of integers >= 1")
        return sorted(set(v))

    @field_validator('J_values')
    @classmethod
    def check_j_values(cls, v):
        for J in v:
            m = 0
            while 4 ** m < J:
                m += 1
            if J < 1 or 4 ** m != J:
                raise ValueError(f"J values must be powers of 4, got {J}")
        return sorted(set(v))

    @field_validator('problem')
    @classmethod
    def check_problem(cls, v):
        if v not in ('dome', 'free'):
            raise ValueError(f"problem must be 'dome' or 'free', got {v!r}")
        return v

    @model_validator(mode='after')
    def check_high_levels(self):
        if max(self.levels) >= HIGH_LEVEL and not self.allow_high_levels:
            raise ValueError(f"levels >= {HIGH_LEVEL} need allow_high_levels (--allow-high-levels)")
        return self

    @classmethod
    def from_key_values(cls, values: Dict[str, Optional[str]], **overrides: Any) -> "ExperimentConfig":
        """Build from a key=value mapping (e.g. dotenv_values); keys are case-insensitive."""
        fields = {name.lower(): name for name in cls.model_fields}
        unknown = sorted(key for key in values if key.lower() not in fields)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        data = {fields[key.lower()]: value for key, value in values.items() if value is not None}
        data.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**data)


class ExperimentCell(BaseModel):
    level: int
    J: int
    overlap: OverlapKind
    preconditioner: PreconditionerKind
    pdas_iterations: int = 0
    avg_kappa: float = Field(default=0.0, ge=0)
    t_solve: float = 0.0
    status: CellStatus = CellStatus.OK
    message: Optional[str] = None

    @property
    def column(self):
        return (self.J, self.overlap, self.preconditioner)


class PdasIterationRecord(BaseModel):
    """One line of the JSON-lines run log"""
    level: int
    J: int
    overlap: OverlapKind
    preconditioner: PreconditionerKind
    k: int
    active_size: int
    pcg_iterations: int
    kappa: float
    time: float
