import numpy as np
import pytest
import scipy.sparse as sp

from utils.assembly import BlockVector, assemble_system
from utils.errors import ConfigurationError, PreconditionerError
from utils.fractional import build_interface_operator, lift_to_pressure
from utils.linalg import condition_number, dense_operator, minres, preconditioned_spectrum
from utils.mesh import BoundaryLayout, build_mesh
from utils.mms import MmsData
from utils.params import PhysicalParams
from utils.precond import (
    DiagonalScaling,
    InversePreconditioner,
    build_precond_la,
    build_precond_naive,
    build_precond_ro,
    build_preconditioner,
    la_interface_block,
)

PARAMETER_POINTS = [
    PhysicalParams(mu=1.0, k=1.0, alpha=1.0),
    PhysicalParams(mu=1e-3, k=1e-8, alpha=10.0),
    PhysicalParams(mu=10.0, k=1e-14, alpha=0.0),
]


def is_spd(matrix):
    dense = np.asarray(matrix)
    return np.array_equal(dense, dense.T) and np.linalg.eigvalsh(dense).min() > 0


@pytest.mark.parametrize("kind", ["exact", "naive"])
@pytest.mark.parametrize("formulation", ["la", "ro"])
@pytest.mark.parametrize("layout", [BoundaryLayout.example21(), BoundaryLayout.appendix_c()])
def test_preconditioners_are_spd(kind, formulation, layout):
    mesh = build_mesh(4, 3, 3, layout)
    for params in PARAMETER_POINTS:
        # every block is factorized with a positive-pivot check
        B = build_preconditioner(kind, mesh, params, formulation)
        assert B.kind == kind
        assert B.shape == (B.layout.size, B.layout.size)
    B = build_preconditioner(kind, mesh, PARAMETER_POINTS[0], formulation)
    dense = dense_operator(B, B.shape[0])
    assert np.linalg.eigvalsh(0.5 * (dense + dense.T)).min() > 0


def test_la_interface_block_structure():
    mesh = build_mesh(4, 4, 4)
    params = PhysicalParams(1.0, 1.0)
    S = build_interface_operator(mesh, params.mu)
    with_fractional = la_interface_block(mesh, params, S).toarray()
    without = la_interface_block(mesh, params, None).toarray()
    n_pD = mesh.n_darcy_cells
    diff = with_fractional - without
    assert np.allclose(diff[n_pD:, n_pD:], S.matrix)
    assert np.allclose(diff[:n_pD], 0.0)
    assert is_spd(with_fractional)
    assert is_spd(without)


def test_block_application_respects_the_layout():
    mesh = build_mesh(4, 4, 4)
    params = PhysicalParams(2.0, 1.0)
    B = build_precond_la(mesh, params, S=build_interface_operator(mesh, params.mu))
    operator, rhs = assemble_system(mesh, params, "la", data=MmsData(params))
    z = B.matvec(rhs)
    assert isinstance(z, BlockVector)
    pS = rhs.pS * 2.0 * params.mu / mesh.stokes_cell_volume
    assert np.allclose(z.pS, pS)
    velocity = operator.blocks["A"] @ z.u
    assert np.allclose(velocity, rhs.u)
    stacked = B.matmat(np.column_stack([rhs.to_array(), 2.0 * rhs.to_array()]))
    assert np.allclose(stacked[:, 1], 2.0 * z.to_array())
    assert np.allclose(B(rhs.to_array()), z.to_array())


def test_ro_needs_the_lifted_operator():
    mesh = build_mesh(4, 4, 4)
    with pytest.raises(PreconditionerError):
        build_precond_ro(mesh, PhysicalParams(1.0, 1.0))


def test_ro_darcy_block_sums_two_inverses():
    mesh = build_mesh(4, 4, 4)
    params = PhysicalParams(1.0, 1e-2)
    S = build_interface_operator(mesh, params.mu)
    B = build_precond_ro(mesh, params, S_lifted=lift_to_pressure(S, mesh))
    _, applier = B.appliers[2][1:]
    r = np.linspace(0.0, 1.0, mesh.n_darcy_cells)
    assert np.allclose(applier.solve(r), applier.first.solve(r) + applier.second.solve(r))


def block_matrix(applier, n):
    return np.linalg.inv(applier.solve(np.eye(n)))


def test_naive_la_matches_la_without_fractional_term_up_to_the_kappa_mass():
    mesh = build_mesh(4, 4, 4)
    params = PhysicalParams(1.0, 1e-4)
    naive = build_precond_naive(mesh, params, formulation="la")
    without_term = build_precond_la(mesh, params, S=None)
    names, rng, applier = naive.appliers[-1]
    assert names == ("pD", "pGamma")
    assert naive.naive
    n = rng.stop - rng.start
    diff = block_matrix(applier, n) - block_matrix(without_term.appliers[-1][2], n)
    expected = np.zeros(n)
    expected[: mesh.n_darcy_cells] = params.kappa * mesh.darcy_cell_volume
    scale = np.abs(la_interface_block(mesh, params, None).toarray()).max()
    assert np.allclose(diff, np.diag(expected), atol=1e-8 * scale)


def test_naive_ro_keeps_the_robin_solve():
    mesh = build_mesh(4, 4, 4)
    params = PhysicalParams(1.0, 1e-2)
    naive = build_precond_naive(mesh, params, formulation="ro")
    exact = build_preconditioner("exact", mesh, params, "ro")
    applier = naive.appliers[-1][2]
    r = np.linspace(-1.0, 1.0, mesh.n_darcy_cells)
    assert np.allclose(applier.first.solve(r), exact.appliers[-1][2].first.solve(r))
    assert np.allclose(applier.solve(r), applier.first.solve(r) + applier.second.solve(r))


def test_naive_and_exact_are_comparable_at_unit_parameters():
    mesh = build_mesh(16, 16, 16)
    params = PhysicalParams(mu=1.0, k=1.0, alpha=1.0)
    operator, rhs = assemble_system(mesh, params, "la", data=MmsData(params))
    counts = []
    for kind in ("naive", "exact"):
        B = build_preconditioner(kind, mesh, params, "la")
        _, report = minres(operator.matrix, B, rhs, max_iter=1000)
        assert report.converged
        counts.append(report.iterations)
    assert max(counts) <= 2 * min(counts), counts


def test_la_condition_number_at_unit_parameters():
    mesh = build_mesh(16, 16, 16)
    params = PhysicalParams(mu=1.0, k=1.0, alpha=1.0)
    operator, _ = assemble_system(mesh, params, "la")
    B = build_preconditioner("exact", mesh, params, "la")
    assert condition_number(operator.matrix, B) == pytest.approx(4.22, rel=0.03)


def test_errors():
    mesh = build_mesh(4, 4, 4)
    params = PhysicalParams(1.0, 1.0)
    with pytest.raises(ConfigurationError):
        build_preconditioner("amg", mesh, params, "la")
    with pytest.raises(ConfigurationError):
        build_precond_la(mesh, params, boundary=BoundaryLayout.appendix_c())
    with pytest.raises(PreconditionerError):
        DiagonalScaling(np.array([1.0, 0.0]))


def test_inverse_preconditioner_gives_unit_condition():
    A = sp.diags([-np.ones(9), 3.0 * np.ones(10), -np.ones(9)], [-1, 0, 1], format="csr")
    B = InversePreconditioner(A)
    assert condition_number(A, B) == pytest.approx(1.0, abs=1e-10)
    _, report = minres(A, B, np.ones(10))
    assert report.iterations == 1


@pytest.mark.parametrize("formulation", ["la", "ro"])
def test_spectrum_inertia(formulation):
    mesh = build_mesh(4, 4, 4)
    params = PhysicalParams(1.0, 1.0)
    operator, _ = assemble_system(mesh, params, formulation)
    B = build_preconditioner("exact", mesh, params, formulation)
    report = preconditioned_spectrum(operator.matrix, B)
    layout = operator.layout
    assert report.n_positive == layout.n_u
    assert report.n_negative == layout.size - layout.n_u


@pytest.mark.parametrize("formulation", ["la", "ro"])
@pytest.mark.parametrize("params", PARAMETER_POINTS)
def test_exact_preconditioner_minres_converges_on_a_small_grid(formulation, params):
    mesh = build_mesh(8, 8, 8)
    operator, rhs = assemble_system(mesh, params, formulation, data=MmsData(params))
    B = build_preconditioner("exact", mesh, params, formulation)
    x, report = minres(operator.matrix, B, rhs, max_iter=200)
    assert report.converged
    assert report.iterations <= 60
    assert report.is_monotone()
    assert x.layout == operator.layout


@pytest.mark.slow
@pytest.mark.parametrize("nx_values", [(8, 16, 32)])
def test_la_condition_numbers_are_bounded_and_mesh_robust(nx_values):
    for params in PARAMETER_POINTS:
        conds = []
        for nx in nx_values:
            mesh = build_mesh(nx, nx, nx)
            operator, _ = assemble_system(mesh, params, "la")
            B = build_preconditioner("exact", mesh, params, "la")
            conds.append(condition_number(operator.matrix, B))
        assert all(3.0 <= c <= 25.0 for c in conds), conds
        assert max(conds) / min(conds) <= 1.5, conds


@pytest.mark.slow
def test_fractional_term_matters_when_permeability_is_small():
    mesh = build_mesh(16, 16, 16)
    params = PhysicalParams(mu=1.0, k=1e-8, alpha=1.0)
    operator, _ = assemble_system(mesh, params, "la")
    with_term = build_precond_la(mesh, params, S=build_interface_operator(mesh, params.mu))
    without_term = build_precond_la(mesh, params, S=None)
    assert condition_number(operator.matrix, without_term) > condition_number(operator.matrix, with_term)


@pytest.mark.slow
def test_naive_preconditioner_degrades_with_permeability():
    mesh = build_mesh(64, 64, 64)
    iterations = {}
    for kind in ("naive", "exact"):
        for k in (1.0, 1e-4):
            params = PhysicalParams(mu=1.0, k=k, alpha=1.0)
            operator, rhs = assemble_system(mesh, params, "la", data=MmsData(params))
            B = build_preconditioner(kind, mesh, params, "la")
            _, report = minres(operator.matrix, B, rhs, max_iter=5000)
            iterations[kind, k] = report.iterations
    assert iterations["naive", 1e-4] >= 2.5 * iterations["naive", 1.0]
    exact = (iterations["exact", 1.0], iterations["exact", 1e-4])
    assert max(exact) / min(exact) <= 1.5


@pytest.mark.slow
def test_neumann_closure_degrades_when_gamma_meets_dirichlet_edges():
    mesh = build_mesh(16, 16, 16, BoundaryLayout.appendix_c())
    conds = []
    for k in (1.0, 1e-2, 1e-4):
        params = PhysicalParams(mu=1.0, k=k, alpha=1.0)
        operator, _ = assemble_system(mesh, params, "la")
        B = build_preconditioner("exact", mesh, params, "la", fractional_variant="neumann")
        conds.append(condition_number(operator.matrix, B))
    assert conds[0] < conds[1] < conds[2]
