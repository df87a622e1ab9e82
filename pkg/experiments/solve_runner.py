"""
Preconditioned MinRes solves of the manufactured problem

One case = one (mu, k, alpha, nx) point: assemble, precondition, iterate from
a seeded random initial guess and measure the discrete errors.
"""

import logging
import time

import numpy as np

from config import RunConfig
from utils.assembly import BlockOperator, BlockVector, assemble_system
from utils.linalg import dump_matrix_market, minres, random_initial_guess
from utils.mesh import build_mesh
from utils.mms import MmsData, error_norm_fv
from utils.params import SweepCase
from utils.precond import build_preconditioner
from utils.records import CaseResult

from .runner import ExperimentRunner

logger = logging.getLogger(__name__)


def initial_guess(operator: BlockOperator, seed: int) -> BlockVector:
    """
    Uniform [0, 1) guess drawn over the full numbering, Dirichlet dofs zeroed

    Drawing before elimination keeps the guess of a given seed independent of
    the boundary layout's free-dof ordering.
    """
    mesh = operator.mesh
    n_rest = operator.layout.size - operator.layout.n_u
    mask = np.concatenate([mesh.dirichlet_velocity_mask(), np.zeros(n_rest, dtype=bool)])
    full = random_initial_guess(seed, mask.size, mask)
    u = full[: mesh.n_u][operator.free_dofs]
    return BlockVector.from_array(operator.layout, np.concatenate([u, full[mesh.n_u:]]))


class SolveRunner(ExperimentRunner):
    """
    Runner for single solves and sweep cases
    """

    def __init__(self, solver=None, system=None):
        super().__init__("SolveRunner", solver, system)
        self.stats.update({
            "total_iterations": 0,
            "max_iterations": 0,
            "non_monotone": 0,
        })
        logger.info("Solve runner initialized successfully")

    def solve_case(self, cfg: RunConfig, case: SweepCase) -> CaseResult:
        """
        Solve one case

        Args:
            cfg: Run configuration (formulation, preconditioner, seed, tolerances)
            case: Parameter point and mesh size

        Returns:
            CaseResult row
        """
        nx, ny_s, ny_d = cfg.mesh_shape(case.nx)
        mesh = build_mesh(nx, ny_s, ny_d, cfg.boundary_layout)
        params = case.params
        data = MmsData(params)
        operator, rhs = assemble_system(mesh, params, cfg.formulation, data=data)

        if cfg.dump_matrix:
            name = f"{cfg.formulation}_case{case.index}_nx{nx}"
            dump_matrix_market(cfg.dump_matrix, name, operator.matrix, rhs.to_array())

        start = time.perf_counter()
        B = build_preconditioner(cfg.precond, mesh, params, cfg.formulation, cfg.fractional)
        x0 = initial_guess(operator, cfg.seed)
        x, report = minres(
            operator.matrix,
            B,
            rhs,
            x0=x0,
            reduction=cfg.reduction,
            max_iter=cfg.max_iter,
            check_symmetry=cfg.check_symmetry,
            check_seed=cfg.seed,
        )
        elapsed = self._timed(start, cfg)
        errors = error_norm_fv(x, data, mesh)
        monotone = report.is_monotone()
        if not monotone:
            logger.warning(f"Case {case.index}: MinRes residual history is not monotone")
        logger.info(
            f"Case {case.index} ({cfg.formulation}/{cfg.precond}, mu={params.mu:g}, k={params.k:g}, "
            f"alpha={params.alpha:g}, nx={nx}): {report.iterations} iterations, converged={report.converged}"
        )
        row = CaseResult(
            formulation=cfg.formulation,
            precond=cfg.precond,
            mu=params.mu,
            k=params.k,
            alpha=params.alpha,
            nx=nx,
            iterations=report.iterations,
            converged=report.converged,
            err_pD=errors["pD"],
            err_pS=errors["pS"],
            err_ux=errors["ux"],
            err_uy=errors["uy"],
            err_pGamma=errors.get("pGamma", float("nan")),
            wall_time_s=elapsed,
            S=case.S,
            Da=case.Da,
            boundary=mesh.boundary.name,
            beta_n=params.beta_n_mode.label(),
            seed=cfg.seed,
            case_index=case.index,
            residual_monotone=monotone,
        )
        self.record_result(row)
        return row

    def record_result(self, row: CaseResult):
        """Update the counters from one finished case (local or from a worker process)"""
        self.record_case(row.converged, row.wall_time_s)
        self.stats["total_iterations"] += row.iterations
        self.stats["max_iterations"] = max(self.stats["max_iterations"], row.iterations)
        if not row.residual_monotone:
            self.stats["non_monotone"] += 1

    def run(self, cfg: RunConfig):
        return [self.solve_case(cfg, cfg.single_case())]

    def health_check(self):
        health = super().health_check()
        health["max_iterations"] = self.stats["max_iterations"]
        return health
