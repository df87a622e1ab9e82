"""
Condition-number tables and grid convergence studies
"""

import logging
import time
from typing import List, Tuple

import numpy as np
import pandas as pd

from config import RunConfig
from utils.assembly import assemble_system
from utils.errors import CapabilityError
from utils.linalg import preconditioned_spectrum
from utils.mesh import build_mesh
from utils.mms import convergence_study
from utils.params import DEFAULT_NX_VALUES, SweepCase
from utils.precond import build_preconditioner
from utils.records import ConditionResult, ConvergenceRow

from .runner import ExperimentRunner

logger = logging.getLogger(__name__)


def system_size(cfg: RunConfig, nx: int) -> int:
    """Unknowns of the monolithic system for one mesh size"""
    mesh = build_mesh(*cfg.mesh_shape(nx), cfg.boundary_layout)
    size = mesh.free_velocity_dofs().size + mesh.n_stokes_cells + mesh.n_darcy_cells
    if cfg.formulation == "la":
        size += mesh.n_facets
    return size


class ConditionRunner(ExperimentRunner):
    """
    Runner for dense spectra of preconditioned operators
    """

    def __init__(self, solver=None, system=None):
        super().__init__("ConditionRunner", solver, system)
        self.stats.update({
            "max_condition": 0.0,
        })
        logger.info("Condition runner initialized successfully")

    def check_capacity(self, cfg: RunConfig, cases: List[SweepCase]):
        """Refuse grids whose largest system exceeds the dense threshold"""
        largest = max(system_size(cfg, case.nx) for case in cases)
        if largest > cfg.dense_threshold:
            raise CapabilityError(
                f"cond needs dense spectra; the largest system has {largest} unknowns, "
                f"above the threshold of {cfg.dense_threshold}. Use smaller --nx values."
            )

    def condition_case(self, cfg: RunConfig, case: SweepCase) -> Tuple[ConditionResult, np.ndarray]:
        """
        Spectrum of B A for one case

        Returns:
            (ConditionResult row, all eigenvalues theta)
        """
        nx, ny_s, ny_d = cfg.mesh_shape(case.nx)
        mesh = build_mesh(nx, ny_s, ny_d, cfg.boundary_layout)
        params = case.params
        start = time.perf_counter()
        operator, _ = assemble_system(mesh, params, cfg.formulation)
        B = build_preconditioner(cfg.precond, mesh, params, cfg.formulation, cfg.fractional)
        report = preconditioned_spectrum(operator.matrix, B, cfg.dense_threshold)
        elapsed = self._timed(start, cfg)
        logger.info(
            f"Case {case.index} ({cfg.formulation}/{cfg.precond}, mu={params.mu:g}, k={params.k:g}, "
            f"alpha={params.alpha:g}, nx={nx}): condition number {report.condition_number:.4g}"
        )
        row = ConditionResult(
            formulation=cfg.formulation,
            precond=cfg.precond,
            mu=params.mu,
            k=params.k,
            alpha=params.alpha,
            nx=nx,
            S=case.S,
            Da=case.Da,
            boundary=mesh.boundary.name,
            case_index=case.index,
            **report.to_dict(),
        )
        self.record_result(row, elapsed)
        return row, report.theta

    def record_result(self, row: ConditionResult, elapsed: float = 0.0):
        self.record_case(bool(np.isfinite(row.cond)), elapsed)
        self.stats["max_condition"] = max(self.stats["max_condition"], row.cond)

    def run(self, cfg: RunConfig):
        cases = cfg.sweep_cases() if cfg.has_grid else [cfg.single_case()]
        self.check_capacity(cfg, cases)
        return [self.condition_case(cfg, case) for case in cases]


def spectrum_frame(results: List[Tuple[ConditionResult, np.ndarray]]) -> pd.DataFrame:
    """Long table of (case_index, nx, theta) for --spectrum-out"""
    parts = [
        pd.DataFrame({"case_index": row.case_index, "nx": row.nx, "theta": theta})
        for row, theta in results
    ]
    return pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(columns=["case_index", "nx", "theta"])


class ConvergenceRunner(ExperimentRunner):
    """
    Runner for manufactured-solution grid convergence studies
    """

    def __init__(self, solver=None, system=None):
        super().__init__("ConvergenceRunner", solver, system)
        self.stats.update({
            "levels_solved": 0,
        })
        logger.info("Convergence runner initialized successfully")

    def run(self, cfg: RunConfig) -> List[ConvergenceRow]:
        levels = cfg.nx_values or DEFAULT_NX_VALUES
        start = time.perf_counter()
        table = convergence_study(cfg.formulation, cfg.physical_params(), levels, cfg.boundary_layout)
        self.record_case(True, self._timed(start, cfg))
        self.stats["levels_solved"] += len(table)
        rows = [ConvergenceRow.from_dict(record) for record in table.to_dict(orient="records")]
        final = rows[-1]
        logger.info(
            f"Convergence study ({cfg.formulation}) finished: final orders "
            f"ux={final.order_ux:.2f}, uy={final.order_uy:.2f}, pS={final.order_pS:.2f}, pD={final.order_pD:.2f}"
        )
        return rows
