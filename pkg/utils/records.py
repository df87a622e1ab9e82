"""
Result records and CSV tables

One dataclass per table row kind. Tables are pandas DataFrames written with a
fixed float format so identical runs produce byte-identical files.
"""

import logging
import math
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .errors import InputError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"

CASE_COLUMNS = [
    "formulation", "precond", "mu", "k", "alpha", "nx", "iterations", "converged",
    "err_pD", "err_pS", "err_ux", "err_uy", "err_pGamma", "wall_time_s",
]


@dataclass
class CaseResult:
    """
    One solve: iteration count, convergence flag and error norms

    Attributes:
        formulation: 'la' or 'ro'
        precond: 'exact' or 'naive'
        mu, k, alpha: Physical parameters of the case
        nx: Cells per row
        iterations: MinRes iterations
        converged: Reduction reached before max_iter
        err_*: Discrete L2 errors against the manufactured solution (NaN when not measured)
        wall_time_s: Solve time, 0.0 when timing is disabled
        S, Da, boundary, beta_n, seed, case_index: Provenance columns
        residual_monotone: False when the MinRes residual history ever increased
    """
    formulation: str
    precond: str
    mu: float
    k: float
    alpha: float
    nx: int
    iterations: int
    converged: bool
    err_pD: float = math.nan
    err_pS: float = math.nan
    err_ux: float = math.nan
    err_uy: float = math.nan
    err_pGamma: float = math.nan
    wall_time_s: float = 0.0
    S: Optional[float] = None
    Da: Optional[float] = None
    boundary: str = "example21"
    beta_n: str = "consistent"
    seed: int = 0
    case_index: int = 0
    residual_monotone: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CaseResult":
        known = {f.name for f in fields(cls)}
        missing = [name for name in CASE_COLUMNS if name not in data]
        if missing:
            raise InputError(f"Case record is missing {missing}")
        values = {key: value for key, value in data.items() if key in known}
        values["nx"] = int(values["nx"])
        values["iterations"] = int(values["iterations"])
        values["converged"] = _as_bool(values["converged"])
        if "residual_monotone" in values:
            values["residual_monotone"] = _as_bool(values["residual_monotone"])
        for key in ("formulation", "precond", "boundary", "beta_n"):
            if key in values:
                values[key] = str(values[key])
        return cls(**values)


@dataclass
class ConditionResult:
    """Condition number of one preconditioned operator"""
    formulation: str
    precond: str
    mu: float
    k: float
    alpha: float
    nx: int
    cond: float
    theta_min_abs: float
    theta_max_abs: float
    n_negative: int
    n_positive: int
    n_dofs: int
    S: Optional[float] = None
    Da: Optional[float] = None
    boundary: str = "example21"
    case_index: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConditionResult":
        known = {f.name for f in fields(cls)}
        values = {key: value for key, value in data.items() if key in known}
        for key in ("nx", "n_negative", "n_positive", "n_dofs"):
            values[key] = int(values[key])
        return cls(**values)


@dataclass
class ConvergenceRow:
    """One level of a grid convergence study"""
    nx: int
    h: float
    err_ux: float
    err_uy: float
    err_pS: float
    err_pD: float
    err_pGamma: float = math.nan
    order_ux: float = math.nan
    order_uy: float = math.nan
    order_pS: float = math.nan
    order_pD: float = math.nan
    order_pGamma: float = math.nan

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConvergenceRow":
        known = {f.name for f in fields(cls)}
        values = {key: value for key, value in data.items() if key in known}
        values["nx"] = int(values["nx"])
        return cls(**values)


def _as_bool(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("true", "1", "yes")
    return bool(value)


def results_frame(rows: Sequence[Any]) -> pd.DataFrame:
    """DataFrame of records in the given order"""
    if not rows:
        return pd.DataFrame()
    return pd.DataFrame([row.to_dict() for row in rows])


def write_table(table: pd.DataFrame, path: str) -> str:
    """
    Write a table as CSV

    Args:
        table: DataFrame (or list of records)
        path: Output file; parent directories are created

    Returns:
        The path written
    """
    if isinstance(table, list):
        table = results_frame(table)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(table)} rows to {path}")
    return path


def read_cases(path: str) -> List[CaseResult]:
    """Load a solve/sweep table back into CaseResult records"""
    table = pd.read_csv(path)
    records = []
    for row in table.to_dict(orient="records"):
        for key in ("S", "Da"):
            if key in row and pd.isna(row[key]):
                row[key] = None
        records.append(CaseResult.from_dict(row))
    return records
