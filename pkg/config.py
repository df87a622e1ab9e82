"""
Configuration settings for the Stokes-Darcy solver lab
"""
import logging
import os
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from utils.errors import ConfigurationError, ParameterError
from utils.mesh import BoundaryLayout
from utils.params import (
    DEFAULT_ALPHA_VALUES,
    DEFAULT_DA_VALUES,
    DEFAULT_NX_VALUES,
    DEFAULT_S_VALUES,
    BetaNMode,
    DimensionlessParams,
    PhysicalParams,
    SweepCase,
    application_presets,
    from_dimensionless,
    sweep_grid,
)

COMMANDS = ("solve", "sweep", "convergence", "cond")
FORMULATIONS = ("la", "ro")
PRECONDITIONERS = ("exact", "naive")
FRACTIONAL_VARIANTS = ("auto", "neumann", "dirichlet")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class SolverConfig:
    """Krylov solver and dense-path settings"""
    reduction: float = 1e-8
    max_iter: int = 10000
    dense_threshold: int = 20000
    symmetry_check: bool = False
    fractional_variant: str = "auto"


@dataclass
class SystemConfig:
    """System-wide configuration"""
    # Logging
    log_level: str = "INFO"
    log_file: str = "stokes_darcy.log"

    # Output
    output_dir: str = "results"
    record_timing: bool = False

    # Sweeps
    max_workers: int = None

    def __post_init__(self):
        if self.max_workers is None:
            self.max_workers = max(1, (os.cpu_count() or 1) - 1)


def _env(name: str, default, cast):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError:
        raise ConfigurationError(f"Malformed value for {name}: {raw!r}")


def _flag(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


def _choice(options):
    def cast(value: str) -> str:
        if value not in options:
            raise ValueError(value)
        return value
    return cast


class Config:
    """Main configuration class"""

    def __init__(self):
        self.solver = SolverConfig()
        self.system = SystemConfig()
        load_dotenv()
        self._load_from_env()

    def _load_from_env(self):
        """Load configuration from environment variables"""
        # Solver config
        self.solver.reduction = _env("STOKES_DARCY_REDUCTION", self.solver.reduction, float)
        self.solver.max_iter = _env("STOKES_DARCY_MAX_ITER", self.solver.max_iter, int)
        self.solver.dense_threshold = _env("STOKES_DARCY_DENSE_THRESHOLD", self.solver.dense_threshold, int)
        self.solver.fractional_variant = _env(
            "STOKES_DARCY_FRACTIONAL_VARIANT", self.solver.fractional_variant, _choice(FRACTIONAL_VARIANTS)
        )

        # System config
        self.system.log_level = _env("STOKES_DARCY_LOG_LEVEL", self.system.log_level, lambda v: _choice(LOG_LEVELS)(v.upper()))
        self.system.log_file = _env("STOKES_DARCY_LOG_FILE", self.system.log_file, str)
        self.system.output_dir = _env("STOKES_DARCY_OUTPUT_DIR", self.system.output_dir, str)
        self.system.max_workers = _env("STOKES_DARCY_MAX_WORKERS", self.system.max_workers, int)
        self.system.record_timing = _env("STOKES_DARCY_RECORD_TIMING", self.system.record_timing, _flag)

        if not (0.0 < self.solver.reduction < 1.0):
            raise ConfigurationError(f"Reduction must lie in (0, 1), got {self.solver.reduction}")
        if self.solver.max_iter < 1 or self.solver.dense_threshold < 1 or self.system.max_workers < 1:
            raise ConfigurationError("max_iter, dense_threshold and max_workers must be positive")

    def get_logging_config(self) -> Dict[str, Any]:
        """Get logging configuration"""
        return {
            "level": getattr(logging, self.system.log_level),
            "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            "handlers": [
                {"type": "file", "filename": self.system.log_file},
                {"type": "stream"},
            ],
        }


@dataclass
class RunConfig:
    """
    One CLI invocation

    Physical parameters come either as (mu, k) or as (S, Da); with neither,
    unit parameters are used. Grid axes (S_values, ...) or a preset turn
    sweep and cond into grid runs.
    """
    command: str = "solve"
    formulation: str = "la"
    precond: str = "exact"
    boundary: str = "example21"
    nx: int = 16
    ny_s: Optional[int] = None
    ny_d: Optional[int] = None
    mu: Optional[float] = None
    k: Optional[float] = None
    alpha: float = 1.0
    S: Optional[float] = None
    Da: Optional[float] = None
    beta_n: str = "consistent"
    seed: int = 1
    reduction: float = 1e-8
    max_iter: int = 10000
    out: Optional[str] = None
    dump_matrix: Optional[str] = None
    S_values: Optional[Tuple[float, ...]] = None
    Da_values: Optional[Tuple[float, ...]] = None
    alpha_values: Optional[Tuple[float, ...]] = None
    nx_values: Optional[Tuple[int, ...]] = None
    preset: Optional[str] = None
    fractional: str = "auto"
    spectrum_out: Optional[str] = None
    record_timing: bool = False
    check_symmetry: bool = False
    dense_threshold: int = 20000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"Unknown command '{self.command}' (expected one of {COMMANDS})")
        if self.formulation not in FORMULATIONS:
            raise ConfigurationError(f"Unknown formulation '{self.formulation}' (expected la or ro)")
        if self.precond not in PRECONDITIONERS:
            raise ConfigurationError(f"Unknown preconditioner '{self.precond}' (expected exact or naive)")
        if self.fractional not in FRACTIONAL_VARIANTS:
            raise ConfigurationError(f"Unknown fractional variant '{self.fractional}'")
        BoundaryLayout.named(self.boundary)
        for name in ("nx", "ny_s", "ny_d"):
            value = getattr(self, name)
            if value is not None and int(value) < 2:
                raise ConfigurationError(f"{name} must be at least 2, got {value}")
        if self.nx_values is not None and any(int(n) < 2 for n in self.nx_values):
            raise ConfigurationError(f"Mesh sizes must be at least 2, got {self.nx_values}")
        if not (0.0 < self.reduction < 1.0):
            raise ConfigurationError(f"Reduction must lie in (0, 1), got {self.reduction}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be positive, got {self.max_iter}")
        physical = (self.mu is not None, self.k is not None)
        dimensionless = (self.S is not None, self.Da is not None)
        if any(physical) and any(dimensionless):
            raise ConfigurationError("Give either (mu, k) or (S, Da), not both")
        if any(physical) and not all(physical):
            raise ConfigurationError("mu and k must be given together")
        if any(dimensionless) and not all(dimensionless):
            raise ConfigurationError("S and Da must be given together")
        if self.preset is not None and self.preset not in application_presets():
            raise ConfigurationError(
                f"Unknown preset '{self.preset}' (expected one of {sorted(application_presets())})"
            )
        try:
            BetaNMode.parse(self.beta_n)
        except ParameterError as e:
            raise ConfigurationError(str(e))

    @property
    def boundary_layout(self) -> BoundaryLayout:
        return BoundaryLayout.named(self.boundary)

    @property
    def beta_n_mode(self) -> BetaNMode:
        return BetaNMode.parse(self.beta_n)

    def mesh_shape(self, nx: Optional[int] = None) -> Tuple[int, int, int]:
        """(nx, ny_s, ny_d); the vertical counts follow nx unless set"""
        nx = int(nx if nx is not None else self.nx)
        return nx, int(self.ny_s or nx), int(self.ny_d or nx)

    def physical_params(self, alpha: Optional[float] = None) -> PhysicalParams:
        alpha = self.alpha if alpha is None else alpha
        if self.mu is not None:
            return PhysicalParams(mu=self.mu, k=self.k, alpha=alpha, beta_n_mode=self.beta_n_mode)
        S = self.S if self.S is not None else 1.0
        Da = self.Da if self.Da is not None else 1.0
        return from_dimensionless(DimensionlessParams(S=S, Da=Da, alpha=alpha), self.beta_n_mode)

    @property
    def has_grid(self) -> bool:
        return self.preset is not None or any(
            values is not None for values in (self.S_values, self.Da_values, self.alpha_values, self.nx_values)
        )

    def sweep_cases(self) -> List[SweepCase]:
        """
        Parameter grid in (S, Da, alpha, nx) order

        Axes come from explicit values, then the preset, then the defaults.
        """
        preset = application_presets()[self.preset] if self.preset is not None else None
        S_values = self.S_values or (preset.S_values if preset else DEFAULT_S_VALUES)
        Da_values = self.Da_values or (preset.Da_values if preset else DEFAULT_DA_VALUES)
        alpha_values = self.alpha_values or (preset.alpha_values if preset else DEFAULT_ALPHA_VALUES)
        nx_values = self.nx_values or DEFAULT_NX_VALUES
        return sweep_grid(S_values, Da_values, alpha_values, nx_values, beta_n_mode=self.beta_n_mode)

    def single_case(self) -> SweepCase:
        """The configured point as a one-element sweep case"""
        params = self.physical_params()
        S = self.S if self.S is not None else (None if self.mu is not None else 1.0)
        Da = self.Da if self.Da is not None else (None if self.mu is not None else 1.0)
        return SweepCase(0, S, Da, self.alpha, int(self.nx), params)

    def with_overrides(self, **changes) -> "RunConfig":
        return replace(self, **changes)


RUN_FILE_KEYS = {
    "mu": float,
    "k": float,
    "alpha": float,
    "S": float,
    "Da": float,
    "beta_n": str,
    "nx": int,
    "formulation": str,
    "precond": str,
    "seed": int,
    "boundary": str,
    "ny_s": int,
    "ny_d": int,
    "reduction": float,
    "max_iter": int,
}


def load_run_file(path: str) -> Dict[str, Any]:
    """
    Parse a key=value run file

    Args:
        path: Text file; blank lines and '#' comments are ignored

    Returns:
        Mapping of RunConfig field names to typed values
    """
    if not os.path.isfile(path):
        raise ConfigurationError(f"Run file not found: {path}")
    values: Dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in RUN_FILE_KEYS:
                raise ConfigurationError(f"{path}:{lineno}: unknown key '{key}'")
            if key in values:
                raise ConfigurationError(f"{path}:{lineno}: duplicate key '{key}'")
            try:
                values[key] = RUN_FILE_KEYS[key](value)
            except ValueError:
                raise ConfigurationError(f"{path}:{lineno}: cannot parse {key}={value!r}")
    if ("mu" in values or "k" in values) and ("S" in values or "Da" in values):
        raise ConfigurationError(f"{path}: give either (mu, k) or (S, Da), not both")
    return values


# Global configuration instance
config = Config()
