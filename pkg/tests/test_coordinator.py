from dataclasses import replace

import pandas as pd
import pytest

from config import RunConfig, SolverConfig, SystemConfig
from experiments.coordinator import ExperimentCoordinator, _run_case
from experiments.solve_runner import SolveRunner, initial_guess
from experiments.study_runner import ConditionRunner, system_size
from utils.assembly import assemble_system
from utils.errors import CapabilityError
from utils.mesh import BoundaryLayout, build_mesh
from utils.params import PhysicalParams


def coordinator(tmp_path, workers):
    system = SystemConfig(output_dir=str(tmp_path), record_timing=False, max_workers=workers)
    return ExperimentCoordinator(SolverConfig(), system)


def sweep_config(out):
    return RunConfig(
        command="sweep",
        S_values=(1.0,),
        Da_values=(1.0, 1e-4),
        alpha_values=(1.0,),
        nx_values=(4, 6),
        out=str(out),
        record_timing=False,
    )


def test_parallel_sweep_matches_serial_sweep_row_for_row(tmp_path):
    serial = coordinator(tmp_path, 1).dispatch(sweep_config(tmp_path / "serial.csv"))
    parallel = coordinator(tmp_path, 2).dispatch(sweep_config(tmp_path / "parallel.csv"))
    assert list(serial.table["case_index"]) == [0, 1, 2, 3]
    assert list(serial.table["nx"]) == [4, 6, 4, 6]
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "parallel.csv").read_bytes()
    assert serial.all_converged and parallel.all_converged


def test_parallel_results_update_runner_statistics(tmp_path):
    coord = coordinator(tmp_path, 2)
    coord.dispatch(sweep_config(tmp_path / "sweep.csv"))
    stats = coord.get_stats()
    assert stats["solve"]["cases_run"] == 4
    assert stats["solve"]["cases_converged"] == 4
    assert stats["coordinator"]["tables_written"] == 1
    assert coord.health_check()["runners"][0]["status"] == "healthy"


def test_pooled_and_serial_sweeps_count_the_same_iterations(tmp_path):
    serial = coordinator(tmp_path, 1)
    pooled = coordinator(tmp_path, 2)
    outcome = serial.dispatch(sweep_config(tmp_path / "serial.csv"))
    pooled.dispatch(sweep_config(tmp_path / "pooled.csv"))
    expected = int(outcome.table["iterations"].sum())
    for coord in (serial, pooled):
        stats = coord.get_stats()["solve"]
        assert stats["total_iterations"] == expected
        assert stats["max_iterations"] == int(outcome.table["iterations"].max())
        assert stats["non_monotone"] == 0
    assert outcome.table["residual_monotone"].all()


def test_default_output_path(tmp_path):
    outcome = coordinator(tmp_path, 1).dispatch(RunConfig(command="solve", nx=4, precond="naive", record_timing=False))
    assert outcome.path == str(tmp_path / "solve_la_naive.csv")
    assert len(pd.read_csv(outcome.path)) == 1


def test_process_entry_point_runs_one_case():
    cfg = RunConfig(command="sweep", nx_values=(4,), record_timing=False)
    case = cfg.sweep_cases()[0]
    row = _run_case("solve", cfg, case)
    assert row.case_index == 0
    assert row.converged
    result, theta = _run_case("cond", cfg.with_overrides(command="cond"), case)
    assert result.n_dofs == theta.size


def test_initial_guess_is_seeded_and_zero_on_dirichlet_dofs():
    mesh = build_mesh(4, 4, 4, BoundaryLayout.appendix_c())
    operator, _ = assemble_system(mesh, PhysicalParams(1.0, 1.0), "la")
    first = initial_guess(operator, seed=3)
    second = initial_guess(operator, seed=3)
    assert (first.to_array() == second.to_array()).all()
    full = operator.expand_velocity(first.u)
    assert (full[mesh.dirichlet_velocity_mask()] == 0.0).all()
    assert first.layout == operator.layout


def test_condition_runner_checks_capacity():
    runner = ConditionRunner()
    cfg = RunConfig(command="cond", nx=4, dense_threshold=50)
    assert system_size(cfg, 4) > 50
    with pytest.raises(CapabilityError):
        runner.run(cfg)


def test_flagged_rows_are_counted():
    runner = SolveRunner()
    cfg = RunConfig(command="solve", nx=4, record_timing=False)
    row = runner.solve_case(cfg, cfg.single_case())
    runner.record_result(replace(row, residual_monotone=False))
    stats = runner.get_stats()
    assert stats["cases_run"] == 2
    assert stats["non_monotone"] == 1
    assert stats["total_iterations"] == 2 * row.iterations


def test_solve_runner_records_iterations(tmp_path):
    runner = SolveRunner()
    cfg = RunConfig(command="solve", nx=4, formulation="ro", dump_matrix=str(tmp_path / "dump"))
    (row,) = runner.run(cfg)
    assert runner.get_stats()["max_iterations"] == row.iterations
    assert row.residual_monotone
    assert (tmp_path / "dump" / "ro_case0_nx4_matrix.mtx").exists()
    assert row.boundary == "example21"


@pytest.mark.slow
@pytest.mark.parametrize("formulation", ["la", "ro"])
def test_exact_preconditioners_are_parameter_robust(tmp_path, formulation):
    cfg = RunConfig(
        command="sweep",
        formulation=formulation,
        S_values=(1e1, 1e-5),
        alpha_values=(0.0, 100.0),
        nx_values=(16, 32),
        out=str(tmp_path / f"{formulation}.csv"),
        record_timing=False,
    )
    table = coordinator(tmp_path, 4).dispatch(cfg).table
    assert table["converged"].all()
    assert table["iterations"].max() <= 60
    if formulation == "la":
        spread = table.groupby(["S", "Da", "alpha"])["iterations"].agg(lambda it: it.max() / it.min())
        assert spread.max() <= 1.5


@pytest.mark.slow
def test_dirichlet_closure_sweep_on_the_swapped_layout(tmp_path):
    cfg = RunConfig(
        command="sweep",
        boundary="appendixC",
        fractional="dirichlet",
        S_values=(1.0,),
        Da_values=(1.0, 1e-2, 1e-4, 1e-8),
        alpha_values=(1.0,),
        nx_values=(16, 32),
        out=str(tmp_path / "appendix.csv"),
        record_timing=False,
    )
    table = coordinator(tmp_path, 4).dispatch(cfg).table
    assert table["converged"].all()
    assert table["iterations"].max() <= 60
