from .coordinator import ExperimentCoordinator, RunOutcome
from .runner import ExperimentRunner
from .solve_runner import SolveRunner
from .study_runner import ConditionRunner, ConvergenceRunner
