import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
import hypothesis.strategies as st

from utils.assembly import (
    BlockLayout,
    BlockVector,
    Formulation,
    VERTEX_DIRICHLET,
    VERTEX_INTERFACE,
    VERTEX_INTERIOR,
    VERTEX_TRACTION,
    assemble_coupling,
    assemble_darcy_tpfa,
    assemble_divergence,
    assemble_stokes_block,
    assemble_system,
    shear_form,
    tpfa_flux,
    tpfa_transmissibility,
)
from utils.errors import ConfigurationError, InputError
from utils.linalg import SPD, SYMMETRIC_INDEFINITE, factorize, is_exactly_symmetric
from utils.mesh import BoundaryLayout, DarcyBC, build_mesh
from utils.mms import MmsData
from utils.params import DEFAULT_ALPHA_VALUES, DEFAULT_DA_VALUES, DEFAULT_S_VALUES, PhysicalParams
from utils.precond import la_interface_block

formulations = st.sampled_from(["la", "ro"])
layouts = st.sampled_from([BoundaryLayout.example21(), BoundaryLayout.appendix_c()])


def test_formulation_parse():
    assert Formulation.parse("LA") is Formulation.LA
    assert Formulation.parse(Formulation.RO) is Formulation.RO
    with pytest.raises(ConfigurationError):
        Formulation.parse("mixed")


def test_tpfa_transmissibility_is_harmonic():
    t = tpfa_transmissibility(k=2.0, mu=1.0, d_K=0.25, d_L=0.25, face_length=0.5)
    assert t == pytest.approx(2.0 * 0.5 / 0.5)
    assert tpfa_transmissibility(1.0, 1.0, 0.1, None, 1.0) == pytest.approx(10.0)
    assert tpfa_transmissibility(1.0, 1.0, 0.1, 0.3, 1.0) == pytest.approx(1.0 / 0.4)
    assert tpfa_flux(3.0, 1.0, t) == pytest.approx(2.0 * t)


def test_darcy_block_annihilates_constants_without_pressure_faces(unit_params):
    mesh = build_mesh(5, 3, 4)
    flux_only = BoundaryLayout(
        "flux_only",
        mesh.boundary.stokes_left, mesh.boundary.stokes_right, mesh.boundary.stokes_top,
        mesh.boundary.darcy_left, mesh.boundary.darcy_right, mesh.boundary.darcy_left,
    )
    K = assemble_darcy_tpfa(mesh, unit_params, flux_only)
    assert np.allclose(K @ np.ones(mesh.n_darcy_cells), 0.0)
    assert is_exactly_symmetric(K)


def test_darcy_pressure_faces_use_half_cell_transmissibility():
    params = PhysicalParams(mu=2.0, k=1e-3)
    mesh = build_mesh(4, 4, 8)
    K = assemble_darcy_tpfa(mesh, params)
    row_sums = K @ np.ones(mesh.n_darcy_cells)
    bottom = mesh.darcy_cell(np.arange(4), 0)
    expected = params.kappa * mesh.hx / (0.5 * mesh.hy_d)
    assert np.allclose(row_sums[bottom], expected)
    assert np.allclose(np.delete(row_sums, bottom), 0.0)
    factorize(K)


def test_divergence_of_a_linear_field(small_mesh):
    mesh = small_mesh
    x_ux, _ = mesh.ux_points()
    u = np.concatenate([x_ux, np.zeros(mesh.n_uy)])
    assert np.allclose(assemble_divergence(mesh) @ u, 1.0)
    _, y_uy = mesh.uy_points()
    u = np.concatenate([np.zeros(mesh.n_ux), 3.0 * y_uy])
    assert np.allclose(assemble_divergence(mesh) @ u, 3.0)


def test_vertex_classes_example21(small_mesh, unit_params):
    shear = shear_form(small_mesh, unit_params)
    vclass = shear.vertex_class.reshape(5, 5)
    assert np.all(vclass[-1, :] == VERTEX_DIRICHLET)
    assert np.all(vclass[0, 1:-1] == VERTEX_INTERFACE)
    assert vclass[0, 0] == vclass[0, -1] == VERTEX_TRACTION
    assert np.all(vclass[1:-1, [0, -1]] == VERTEX_TRACTION)
    assert np.all(vclass[1:-1, 1:-1] == VERTEX_INTERIOR)
    assert np.all(shear.weights[shear.vertex_class == VERTEX_TRACTION] == 0.0)


def test_vertex_classes_appendix_c(appendix_mesh, unit_params):
    vclass = shear_form(appendix_mesh, unit_params).vertex_class.reshape(5, 5)
    assert np.all(vclass[:, [0, -1]] == VERTEX_DIRICHLET)
    assert np.all(vclass[-1, 1:-1] == VERTEX_TRACTION)
    assert np.all(vclass[0, 1:-1] == VERTEX_INTERFACE)


def test_interface_weight_follows_slip_coefficient(small_mesh):
    no_slip_limit = PhysicalParams(mu=1.0, k=1e-12, alpha=1.0)
    free_slip = PhysicalParams(mu=1.0, k=1.0, alpha=0.0)
    strong = shear_form(small_mesh, no_slip_limit)
    weak = shear_form(small_mesh, free_slip)
    interface = strong.vertex_class == VERTEX_INTERFACE
    interior = strong.vertex_class == VERTEX_INTERIOR
    assert np.allclose(strong.weights[interface], 0.5 * strong.weights[interior][0], rtol=1e-5)
    assert np.all(weak.weights[interface] == 0.0)


@pytest.mark.parametrize("layout", [BoundaryLayout.example21(), BoundaryLayout.appendix_c()])
@pytest.mark.parametrize("formulation", ["la", "ro"])
def test_velocity_block_is_spd(layout, formulation):
    mesh = build_mesh(6, 4, 5, layout)
    for params in (PhysicalParams(1.0, 1.0, 1.0), PhysicalParams(1e-5, 1e-14, 100.0), PhysicalParams(10.0, 1.0, 0.0)):
        A = assemble_stokes_block(mesh, params, formulation)
        assert is_exactly_symmetric(A)
        factorize(A)


@settings(deadline=None, max_examples=15)
@given(
    st.sampled_from(DEFAULT_S_VALUES),
    st.sampled_from(DEFAULT_DA_VALUES),
    st.sampled_from(DEFAULT_ALPHA_VALUES),
    formulations,
    layouts,
)
def test_monolithic_system_is_exactly_symmetric(S, Da, alpha, formulation, layout):
    mesh = build_mesh(4, 3, 3, layout)
    params = PhysicalParams(mu=S, k=Da, alpha=alpha)
    operator, rhs = assemble_system(mesh, params, formulation, data=MmsData(params))
    assert is_exactly_symmetric(operator.matrix)
    assert operator.shape == (operator.layout.size, operator.layout.size)
    assert rhs.to_array().shape == (operator.layout.size,)


def test_la_block_structure(small_mesh, unit_params):
    operator, _ = assemble_system(small_mesh, unit_params, "la")
    layout = operator.layout
    assert layout.names == ("u", "pS", "pD", "pGamma")
    assert layout.n_pGamma == small_mesh.n_facets
    M = operator.matrix.tocsr()
    g = layout.slice("pGamma")
    gamma_block = M[g, g].toarray()
    beta_n = unit_params.beta_n(small_mesh.h_K)
    assert np.allclose(np.diag(gamma_block), -small_mesh.hx / beta_n)
    assert np.allclose(gamma_block - np.diag(np.diag(gamma_block)), 0.0)
    assert M[layout.slice("pS"), layout.slice("pS")].nnz == 0


def test_normal_trace_entries(small_mesh, unit_params):
    coupling = assemble_coupling(small_mesh, unit_params, "la")
    Tn = coupling.normal_trace.toarray()
    dofs = small_mesh.interface_uy_dofs()
    assert np.allclose(Tn[np.arange(4), dofs], -small_mesh.hx)
    assert np.count_nonzero(Tn) == 4
    robin = coupling.robin_velocity
    assert np.allclose(robin.diagonal()[dofs], unit_params.beta_n(small_mesh.h_K) * small_mesh.hx)


@pytest.mark.parametrize("layout", [BoundaryLayout.example21(), BoundaryLayout.appendix_c()])
def test_eliminating_the_interface_pressure_gives_the_robin_system(layout):
    mesh = build_mesh(6, 5, 4, layout)
    params = PhysicalParams(mu=2.0, k=0.5, alpha=3.0)
    data = MmsData(params)
    la, rhs_la = assemble_system(mesh, params, "la", data=data)
    ro, rhs_ro = assemble_system(mesh, params, "ro", data=data)

    M = la.matrix.toarray()
    r = rhs_la.to_array()
    g = la.layout.slice("pGamma")
    n = g.start
    inv_gamma = 1.0 / np.diag(M[g, g])
    M12 = M[:n, g]
    schur = M[:n, :n] - (M12 * inv_gamma) @ M12.T
    reduced_rhs = r[:n] - M12 @ (inv_gamma * r[g])

    expected = ro.matrix.toarray()
    scale = max(1.0, np.abs(expected).max())
    assert np.max(np.abs(schur - expected)) <= 1e-12 * scale
    assert np.max(np.abs(reduced_rhs - rhs_ro.to_array())) <= 1e-12 * max(1.0, np.abs(r).max())


def test_dirichlet_values_are_eliminated():
    mesh = build_mesh(4, 4, 4)
    params = PhysicalParams(mu=1.0, k=1.0)
    data = MmsData(params)
    operator, _ = assemble_system(mesh, params, "la", data=data)
    mask = operator.dirichlet_mask
    full = operator.expand_velocity(np.zeros(operator.layout.n_u))
    x, y = mesh.uy_points()
    _, gy = data.velocity(x, y)
    assert np.allclose(full[mask], gy[mask[mesh.n_ux:]])
    assert np.array_equal(operator.restrict_full(full), np.zeros(operator.layout.n_u))
    with pytest.raises(InputError):
        operator.restrict_full(np.zeros(3))


def test_boundary_mismatch_is_rejected(small_mesh, unit_params):
    with pytest.raises(ConfigurationError):
        assemble_system(small_mesh, unit_params, "la", boundary=BoundaryLayout.appendix_c())


def test_block_vector_round_trip_and_validation():
    layout = BlockLayout(Formulation.LA, 3, 2, 2, 1)
    v = BlockVector.from_array(layout, np.arange(8.0))
    assert np.array_equal(v.pGamma, [7.0])
    assert np.array_equal(v.to_array(), np.arange(8.0))
    assert v.like(np.ones(8)).norm() == pytest.approx(np.sqrt(8))
    with pytest.raises(InputError):
        BlockVector(BlockLayout(Formulation.RO, 3, 2, 2), np.zeros(3), np.zeros(2), np.zeros(2), np.zeros(1))
    with pytest.raises(InputError):
        BlockVector.from_array(layout, np.zeros(5))
    with pytest.raises(InputError):
        BlockLayout(Formulation.RO, 3, 2, 2).slice("pGamma")


def test_operator_matmul_keeps_block_vectors(small_mesh, unit_params):
    operator, rhs = assemble_system(small_mesh, unit_params, "ro", data=MmsData(unit_params))
    out = operator @ rhs
    assert isinstance(out, BlockVector)
    assert np.allclose(out.to_array(), operator.matrix @ rhs.to_array())
    assert sp.issparse(operator.blocks["darcy_normal_trace"])


def test_bjs_increment_on_interface_tangential_velocities():
    mesh = build_mesh(6, 4, 4)
    params = PhysicalParams(mu=0.5, k=1e-2, alpha=2.0)
    free_slip = PhysicalParams(mu=0.5, k=1e-2, alpha=0.0)
    increment = (
        assemble_stokes_block(mesh, params, "la") - assemble_stokes_block(mesh, free_slip, "la")
    ).diagonal()
    free = mesh.free_velocity_dofs()
    interface_ux = mesh.ux_index(np.arange(1, mesh.nx), 0)
    dofs = np.searchsorted(free, interface_ux)
    assert np.array_equal(free[dofs], interface_ux)

    beta, mu, hy = params.beta_tau, params.mu, mesh.hy_s
    theta = beta / (beta + 2.0 * mu / hy)
    assert np.allclose(increment[dofs], 2.0 * mu * theta * mesh.hx / hy, rtol=1e-12)
    # tends to beta |F| from below as hy -> 0
    assert np.all(increment[dofs] < beta * mesh.hx)
    finer = build_mesh(6, 64, 4)
    fine_increment = (
        assemble_stokes_block(finer, params, "la") - assemble_stokes_block(finer, free_slip, "la")
    ).diagonal()
    fine_dofs = np.searchsorted(finer.free_velocity_dofs(), finer.ux_index(np.arange(1, finer.nx), 0))
    assert np.all(np.abs(fine_increment[fine_dofs] - beta * finer.hx) < np.abs(increment[dofs] - beta * mesh.hx))


@pytest.mark.parametrize("layout", [BoundaryLayout.example21(), BoundaryLayout.appendix_c()])
def test_darcy_subsolve_is_locally_conservative(layout):
    mesh = build_mesh(6, 4, 5, layout)
    params = PhysicalParams(mu=2.0, k=0.5)
    nx, ny, n = mesh.nx, mesh.ny_d, mesh.n_darcy_cells
    half_x, half_y = 0.5 * mesh.hx, 0.5 * mesh.hy_d
    top = mesh.darcy_cell(np.arange(nx), ny - 1)

    # zero pressure on the interface closes the sub-problem
    t_top = tpfa_transmissibility(params.k, params.mu, half_y, None, mesh.hx)
    closure = np.zeros(n)
    closure[top] = t_top
    K = assemble_darcy_tpfa(mesh, params) + sp.diags(closure)
    source = np.random.default_rng(11).uniform(-1.0, 1.0, n) * mesh.darcy_cell_volume
    p = factorize(K).solve(source)

    outflow = np.zeros(n)
    t_x = tpfa_transmissibility(params.k, params.mu, half_x, half_x, mesh.hy_d)
    t_y = tpfa_transmissibility(params.k, params.mu, half_y, half_y, mesh.hx)
    for i in range(nx - 1):
        for j in range(ny):
            a, b = mesh.darcy_cell(i, j), mesh.darcy_cell(i + 1, j)
            q = tpfa_flux(p[a], p[b], t_x)
            outflow[a] += q
            outflow[b] -= q
    for i in range(nx):
        for j in range(ny - 1):
            a, b = mesh.darcy_cell(i, j), mesh.darcy_cell(i, j + 1)
            q = tpfa_flux(p[a], p[b], t_y)
            outflow[a] += q
            outflow[b] -= q
    rows, cols = np.arange(ny), np.arange(nx)
    edges = [
        (mesh.darcy_cell(0, rows), layout.darcy_left, half_x, mesh.hy_d),
        (mesh.darcy_cell(nx - 1, rows), layout.darcy_right, half_x, mesh.hy_d),
        (mesh.darcy_cell(cols, 0), layout.darcy_bottom, half_y, mesh.hx),
        (top, DarcyBC.PRESSURE, half_y, mesh.hx),
    ]
    for cells, tag, half, length in edges:
        if tag is DarcyBC.PRESSURE:
            t = tpfa_transmissibility(params.k, params.mu, half, None, length)
            np.add.at(outflow, cells, tpfa_flux(p[cells], 0.0, t))

    assert np.max(np.abs(outflow - source)) <= 1e-10 * np.linalg.norm(source)


def test_homogeneous_tpfa_is_the_scaled_five_point_laplacian():
    mesh = build_mesh(7, 4, 5)
    params = PhysicalParams(mu=4.0, k=3.0)
    nx, ny = mesh.nx, mesh.ny_d
    K = assemble_darcy_tpfa(mesh, params).toarray()

    def second_difference(m):
        return sp.diags([-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])

    five_point = params.kappa * (
        mesh.hy_d / mesh.hx * sp.kron(sp.identity(ny), second_difference(nx))
        + mesh.hx / mesh.hy_d * sp.kron(second_difference(ny), sp.identity(nx))
    ).toarray()
    i, j = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1))
    interior = mesh.darcy_cell(i.ravel(), j.ravel())
    assert np.allclose(K[interior], five_point[interior], rtol=1e-13, atol=0.0)


@pytest.mark.parametrize("layout", [BoundaryLayout.example21(), BoundaryLayout.appendix_c()])
@pytest.mark.parametrize("formulation", ["la", "ro"])
def test_velocity_block_energy_is_positive(layout, formulation):
    mesh = build_mesh(6, 4, 5, layout)
    rng = np.random.default_rng(17)
    for params in (PhysicalParams(1.0, 1.0, 1.0), PhysicalParams(1e-5, 1e-14, 100.0), PhysicalParams(10.0, 1.0, 0.0)):
        A = assemble_stokes_block(mesh, params, formulation)
        X = rng.standard_normal((A.shape[0], 50))
        energies = np.einsum("ij,ij->j", X, A @ X)
        assert np.all(energies > 0.0)


@pytest.mark.parametrize("layout", [BoundaryLayout.example21(), BoundaryLayout.appendix_c()])
@pytest.mark.parametrize("formulation", ["la", "ro"])
def test_factorized_blocks_solve_to_tight_residuals(layout, formulation):
    mesh = build_mesh(6, 4, 5, layout)
    params = PhysicalParams(mu=1.0, k=1e-2, alpha=1.0)
    operator, _ = assemble_system(mesh, params, formulation)
    blocks = [
        (assemble_stokes_block(mesh, params, formulation), SPD),
        (assemble_darcy_tpfa(mesh, params), SPD),
        (operator.matrix, SYMMETRIC_INDEFINITE),
    ]
    if formulation == "la":
        blocks.append((la_interface_block(mesh, params, None), SPD))
    rng = np.random.default_rng(23)
    for matrix, kind in blocks:
        rhs = rng.standard_normal((matrix.shape[0], 100))
        X = factorize(matrix, kind).solve(rhs)
        residual = np.linalg.norm(matrix @ X - rhs, axis=0) / np.linalg.norm(rhs, axis=0)
        assert residual.max() <= 1e-10
