"""
Base class for experiment runners

Every runner keeps its own counters and reports them through get_stats() and
health_check(), the same way for solves, sweeps, condition tables and
convergence studies.
"""

import logging
import time
from typing import Any, Dict

from config import RunConfig, SolverConfig, SystemConfig, config

logger = logging.getLogger(__name__)


class ExperimentRunner:
    """
    Base class for experiment runners

    Provides the statistics every runner tracks
    """

    def __init__(self, runner_id: str, solver: SolverConfig = None, system: SystemConfig = None):
        """
        Initialize experiment runner

        Args:
            runner_id: Identifier for this runner
            solver: Solver settings (process defaults when omitted)
            system: System settings (process defaults when omitted)
        """
        self.runner_id = runner_id
        self.solver = solver if solver is not None else config.solver
        self.system = system if system is not None else config.system
        self.stats = {
            "cases_run": 0,
            "cases_converged": 0,
            "failures": 0,
            "total_time": 0.0,
        }
        logger.info(f"Initialized experiment runner: {runner_id}")

    def run(self, cfg: RunConfig):
        raise NotImplementedError

    def record_case(self, converged: bool, elapsed: float):
        self.stats["cases_run"] += 1
        if converged:
            self.stats["cases_converged"] += 1
        else:
            self.stats["failures"] += 1
        self.stats["total_time"] += elapsed

    def _timed(self, start: float, cfg: RunConfig) -> float:
        """Elapsed seconds, or 0.0 when timing is switched off"""
        if not cfg.record_timing:
            return 0.0
        return time.perf_counter() - start

    def get_stats(self) -> Dict[str, Any]:
        """Get runner statistics"""
        return self.stats.copy()

    def health_check(self) -> Dict[str, Any]:
        """Get runner health status"""
        return {
            "status": "healthy" if self.stats["failures"] == 0 else "degraded",
            "runner_id": self.runner_id,
            "stats": self.get_stats(),
        }
