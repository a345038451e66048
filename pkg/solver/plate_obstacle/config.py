from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional
from pydantic import field_validator


class Settings(BaseSettings):
    # Discretization
    transition_ratio: float = 0.25
    gauss_points: int = 6
    drop_tolerance: float = 1e-14

    # PDAS / PCG
    pdas_c: float = 100.0
    pcg_rel_tol: float = 1e-15
    pcg_residual_rel_tol: Optional[float] = None  # None follows pcg_rel_tol
    max_pdas: int = 100
    pcg_max_iter_factor: int = 10
    zero_kappa_for_single_step: bool = True

    # Schwarz
    coarse_pivot_tol: float = 1e-12
    max_workers: int = 1

    # Experiments
    budget_sec: float = 600.0
    seed: int = 20240611  # random vectors in the test suite

    # Tracing / logging
    tracing_enabled: bool = False
    tracing_project_name: str = "plate-obstacle"
    tracing_endpoint: Optional[str] = None  # None uses the console exporter when tracing_console is set
    tracing_console: bool = False
    log_level: str = "INFO"

    model_config = SettingsConfigDict(env_prefix="PLATE_", env_file=".env", extra="ignore")

    @field_validator('tracing_endpoint', mode='before')
    @classmethod
    def empty_str_to_none(cls, v):
        """Convert empty string to None for tracing_endpoint"""
        if v == '' or (isinstance(v, str) and v.strip() == ''):
            return None
        return v

    @field_validator('transition_ratio')
    @classmethod
    def check_transition_ratio(cls, v):
        if not 0.0 < v < 0.5:
            raise ValueError("transition_ratio must lie in (0, 1/2)")
        return v


settings = Settings()
