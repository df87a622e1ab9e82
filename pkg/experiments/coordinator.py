"""
Experiment coordinator

Dispatches a RunConfig to the runner of its command, schedules independent
sweep cases on a process pool and writes the resulting table. Rows always come
out in grid order, whatever order the workers finish in.
"""

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import pandas as pd

from config import RunConfig, SolverConfig, SystemConfig, config
from utils.params import SweepCase
from utils.records import results_frame, write_table

from .solve_runner import SolveRunner
from .study_runner import ConditionRunner, ConvergenceRunner, spectrum_frame

logger = logging.getLogger(__name__)

_worker_runners: Dict[str, Any] = {}


def _worker_runner(kind: str):
    if kind not in _worker_runners:
        _worker_runners[kind] = SolveRunner() if kind == "solve" else ConditionRunner()
    return _worker_runners[kind]


def _run_case(kind: str, cfg: RunConfig, case: SweepCase):
    """Process-pool entry point: one case with a per-process runner"""
    runner = _worker_runner(kind)
    if kind == "solve":
        return runner.solve_case(cfg, case)
    return runner.condition_case(cfg, case)


@dataclass
class RunOutcome:
    """Table produced by one command and where it went"""
    command: str
    table: pd.DataFrame
    path: Optional[str]
    all_converged: bool = True
    spectrum_path: Optional[str] = None


class ExperimentCoordinator:
    """
    Coordinator owning one runner per command

    Handles:
    - single solves and parameter sweeps
    - condition-number tables
    - grid convergence studies
    """

    def __init__(self, solver: SolverConfig = None, system: SystemConfig = None, max_workers: Optional[int] = None):
        """
        Initialize coordinator

        Args:
            solver: Solver settings (process defaults when omitted)
            system: System settings (process defaults when omitted)
            max_workers: Process cap for sweeps (SystemConfig.max_workers when omitted)
        """
        self.solver = solver if solver is not None else config.solver
        self.system = system if system is not None else config.system
        self.max_workers = max_workers if max_workers is not None else self.system.max_workers
        self.solve_runner = SolveRunner(self.solver, self.system)
        self.condition_runner = ConditionRunner(self.solver, self.system)
        self.convergence_runner = ConvergenceRunner(self.solver, self.system)
        self.stats = {
            "runs_dispatched": 0,
            "tables_written": 0,
            "total_time": 0.0,
        }
        logger.info("Experiment coordinator initialized successfully")

    def _map_cases(self, kind: str, cfg: RunConfig, cases: List[SweepCase]) -> list:
        """Run cases serially or on a process pool; results keep the case order"""
        runner = self.solve_runner if kind == "solve" else self.condition_runner
        workers = min(self.max_workers, len(cases))
        if workers <= 1:
            if kind == "solve":
                return [runner.solve_case(cfg, case) for case in cases]
            return [runner.condition_case(cfg, case) for case in cases]

        logger.info(f"Scheduling {len(cases)} cases on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_run_case, [kind] * len(cases), [cfg] * len(cases), cases))
        # worker-side counters stay in the worker processes
        for result in results:
            runner.record_result(result if kind == "solve" else result[0])
        return results

    def _output_path(self, cfg: RunConfig) -> str:
        if cfg.out:
            return cfg.out
        return os.path.join(self.system.output_dir, f"{cfg.command}_{cfg.formulation}_{cfg.precond}.csv")

    def dispatch(self, cfg: RunConfig) -> RunOutcome:
        """
        Run one command and write its table

        Args:
            cfg: Validated run configuration

        Returns:
            RunOutcome with the table and output path
        """
        start = time.perf_counter()
        self.stats["runs_dispatched"] += 1
        spectrum_path = None
        all_converged = True

        if cfg.command == "solve":
            rows = self.solve_runner.run(cfg)
            table = results_frame(rows)
            all_converged = all(row.converged for row in rows)
        elif cfg.command == "sweep":
            cases = cfg.sweep_cases()
            rows = self._map_cases("solve", cfg, cases)
            table = results_frame(rows)
            all_converged = all(row.converged for row in rows)
        elif cfg.command == "cond":
            cases = cfg.sweep_cases() if cfg.has_grid else [cfg.single_case()]
            self.condition_runner.check_capacity(cfg, cases)
            results = self._map_cases("cond", cfg, cases)
            table = results_frame([row for row, _ in results])
            if cfg.spectrum_out:
                spectrum_path = write_table(spectrum_frame(results), cfg.spectrum_out)
        else:
            rows = self.convergence_runner.run(cfg)
            table = results_frame(rows)

        path = write_table(table, self._output_path(cfg))
        self.stats["tables_written"] += 1
        self.stats["total_time"] += time.perf_counter() - start
        if not all_converged:
            logger.warning(f"{cfg.command}: at least one case did not converge (see {path})")
        return RunOutcome(cfg.command, table, path, all_converged, spectrum_path)

    def get_stats(self) -> Dict[str, Any]:
        """Get comprehensive run statistics"""
        return {
            "coordinator": self.stats.copy(),
            "solve": self.solve_runner.get_stats(),
            "condition": self.condition_runner.get_stats(),
            "convergence": self.convergence_runner.get_stats(),
        }

    def health_check(self) -> Dict[str, Any]:
        return {
            "status": "healthy",
            "max_workers": self.max_workers,
            "runners": [
                self.solve_runner.health_check(),
                self.condition_runner.health_check(),
                self.convergence_runner.health_check(),
            ],
        }
