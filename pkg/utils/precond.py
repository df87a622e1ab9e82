"""
Block-diagonal preconditioners

B^La and B^Ro are Riesz maps of the parameter-weighted norms in which the two
formulations are well posed, applied exactly through sparse factorizations.
The naive variants drop the fractional interface term and regularize the
Darcy block with a kappa-scaled mass instead.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .assembly import (
    BlockLayout,
    BlockVector,
    Formulation,
    assemble_coupling,
    assemble_darcy_tpfa,
    assemble_stokes_block,
)
from .errors import ConfigurationError, DefinitenessError, PreconditionerError
from .fractional import SpectralFractionalOp, build_interface_operator, lift_to_pressure
from .linalg import SPD, FactorizedSolver, as_csr, factorize, symmetrize
from .mesh import BoundaryLayout, StaggeredMesh
from .params import PhysicalParams

logger = logging.getLogger(__name__)

EXACT = "exact"
NAIVE = "naive"


class DiagonalScaling:
    """Applies r -> d * r"""

    def __init__(self, diagonal: np.ndarray):
        self.diagonal = np.asarray(diagonal, dtype=float)
        if np.any(self.diagonal <= 0.0):
            raise PreconditionerError("Diagonal scaling must be positive")

    def solve(self, r: np.ndarray) -> np.ndarray:
        if r.ndim == 2:
            return self.diagonal[:, None] * r
        return self.diagonal * r


class SumOfSolves:
    """Applies r -> A1^{-1} r + A2^{-1} r"""

    def __init__(self, first: FactorizedSolver, second: FactorizedSolver):
        self.first = first
        self.second = second

    def solve(self, r: np.ndarray) -> np.ndarray:
        return self.first.solve(r) + self.second.solve(r)


def _factorize_block(matrix, label: str) -> FactorizedSolver:
    try:
        return factorize(symmetrize(matrix), SPD)
    except DefinitenessError as e:
        raise PreconditionerError(f"{label} block is not positive definite: {str(e)}")


class BlockPreconditioner:
    """
    Block-diagonal preconditioner over a BlockLayout

    Each applier acts on a contiguous range of blocks; the coupled (pD, pGamma)
    block of B^La is one applier spanning two blocks.
    """

    def __init__(self, formulation: Formulation, layout: BlockLayout, appliers: List[Tuple[Tuple[str, ...], object]], naive: bool = False):
        self.formulation = formulation
        self.layout = layout
        self.naive = naive
        self.appliers = []
        covered = []
        for names, applier in appliers:
            start = layout.slice(names[0]).start
            stop = layout.slice(names[-1]).stop
            self.appliers.append((names, slice(start, stop), applier))
            covered.extend(names)
        if tuple(covered) != layout.names:
            raise PreconditionerError(f"Appliers cover {covered}, layout has {list(layout.names)}")
        self.shape = (layout.size, layout.size)
        self.dtype = np.dtype(float)

    @property
    def kind(self) -> str:
        return NAIVE if self.naive else EXACT

    def matmat(self, R: np.ndarray) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        out = np.empty_like(R)
        for _, rng, applier in self.appliers:
            out[rng] = applier.solve(R[rng])
        return out

    def matvec(self, r):
        if isinstance(r, BlockVector):
            return r.like(self.matmat(r.to_array()))
        return self.matmat(np.asarray(r, dtype=float).reshape(-1))

    def __call__(self, r):
        return self.matvec(r)


class InversePreconditioner:
    """Exact inverse of an SPD matrix through its factorization"""

    def __init__(self, A):
        self._solver = factorize(A, SPD)
        self.shape = self._solver.shape
        self.dtype = np.dtype(float)

    def matvec(self, r: np.ndarray) -> np.ndarray:
        return self._solver.solve(r)

    def matmat(self, R: np.ndarray) -> np.ndarray:
        return self._solver.solve(R)


def _pressure_scaling(mesh: StaggeredMesh, params: PhysicalParams) -> DiagonalScaling:
    """Inverse of the (2 mu)^{-1}-weighted cell mass on the Stokes pressure"""
    return DiagonalScaling(np.full(mesh.n_stokes_cells, 2.0 * params.mu / mesh.stokes_cell_volume))


def _layout(mesh: StaggeredMesh, formulation: Formulation) -> BlockLayout:
    n_u = mesh.free_velocity_dofs().size
    if formulation is Formulation.LA:
        return BlockLayout(formulation, n_u, mesh.n_stokes_cells, mesh.n_darcy_cells, mesh.n_facets)
    return BlockLayout(formulation, n_u, mesh.n_stokes_cells, mesh.n_darcy_cells)


def _check_boundary(mesh: StaggeredMesh, boundary: Optional[BoundaryLayout]):
    if boundary is not None and boundary != mesh.boundary:
        raise ConfigurationError(
            f"Boundary layout '{boundary.name}' does not match the mesh layout '{mesh.boundary.name}'"
        )


def la_interface_block(mesh: StaggeredMesh, params: PhysicalParams, S: Optional[SpectralFractionalOp]) -> sp.csr_matrix:
    """
    Coupled (pD, pGamma) block of B^La

        [ K_D + Pi^T D Pi     -Pi^T D   ]
        [ -D Pi               D + S     ]   with D = diag(beta_n^{-1} |F|)

    S=None leaves the fractional term out.
    """
    K_D = assemble_darcy_tpfa(mesh, params)
    coupling = assemble_coupling(mesh, params, Formulation.LA)
    Ct = coupling.darcy_interface
    gamma = sp.diags(coupling.inv_beta_mass)
    if S is not None:
        if S.size != mesh.n_facets:
            raise PreconditionerError(f"Fractional operator of size {S.size} does not match {mesh.n_facets} facets")
        gamma = gamma + sp.csr_matrix(S.matrix)
    block = sp.bmat([[K_D + coupling.darcy_facet_mass, -Ct], [-Ct.T, gamma]], format="csr")
    return as_csr(block)


def build_precond_la(
    mesh: StaggeredMesh,
    params: PhysicalParams,
    boundary: BoundaryLayout = None,
    S: Optional[SpectralFractionalOp] = None,
) -> BlockPreconditioner:
    """
    B^La: velocity, Stokes pressure and the coupled (pD, pGamma) block

    Args:
        mesh: Staggered mesh
        params: Physical parameters
        boundary: Must match mesh.boundary when given
        S: Fractional interface operator (omitted from the pGamma block when None)

    Returns:
        Four-block preconditioner
    """
    _check_boundary(mesh, boundary)
    layout = _layout(mesh, Formulation.LA)
    velocity = _factorize_block(assemble_stokes_block(mesh, params, Formulation.LA), "Velocity")
    coupled = _factorize_block(la_interface_block(mesh, params, S), "Darcy-interface")
    logger.debug(f"Built B^La on {layout.size} unknowns (fractional term {'on' if S is not None else 'off'})")
    return BlockPreconditioner(
        Formulation.LA,
        layout,
        [(("u",), velocity), (("pS",), _pressure_scaling(mesh, params)), (("pD", "pGamma"), coupled)],
    )


def build_precond_ro(
    mesh: StaggeredMesh,
    params: PhysicalParams,
    boundary: BoundaryLayout = None,
    S_lifted=None,
) -> BlockPreconditioner:
    """
    B^Ro: velocity, Stokes pressure and a Darcy block that sums two inverses

        (K_D + Pi^T beta_n^{-1}|F| Pi)^{-1} + (K_D + Pi^T S Pi)^{-1}

    Args:
        S_lifted: Pi^T S Pi from lift_to_pressure
    """
    _check_boundary(mesh, boundary)
    if S_lifted is None:
        raise PreconditionerError("B^Ro needs the lifted fractional operator")
    layout = _layout(mesh, Formulation.RO)
    K_D = assemble_darcy_tpfa(mesh, params)
    coupling = assemble_coupling(mesh, params, Formulation.RO)
    velocity = _factorize_block(assemble_stokes_block(mesh, params, Formulation.RO), "Velocity")
    robin = _factorize_block(K_D + coupling.darcy_facet_mass, "Darcy-Robin")
    fractional = _factorize_block(K_D + sp.csr_matrix(S_lifted), "Darcy-fractional")
    logger.debug(f"Built B^Ro on {layout.size} unknowns")
    return BlockPreconditioner(
        Formulation.RO,
        layout,
        [(("u",), velocity), (("pS",), _pressure_scaling(mesh, params)), (("pD",), SumOfSolves(robin, fractional))],
    )


def build_precond_naive(
    mesh: StaggeredMesh,
    params: PhysicalParams,
    boundary: BoundaryLayout = None,
    formulation="la",
) -> BlockPreconditioner:
    """
    Baseline without the fractional term

    The fractional operator is swapped for -kappa(Delta + I), i.e. the
    kappa-scaled cell mass added to the pD diagonal. For la the coupled
    (pD, pGamma) block keeps its beta_n^{-1} cross terms; for ro the Robin
    solve of B^Ro is kept and the regularized Darcy solve replaces the
    fractional one.
    """
    _check_boundary(mesh, boundary)
    formulation = Formulation.parse(formulation)
    layout = _layout(mesh, formulation)
    velocity = _factorize_block(assemble_stokes_block(mesh, params, formulation), "Velocity")
    kappa_mass = np.full(mesh.n_darcy_cells, params.kappa * mesh.darcy_cell_volume)
    appliers = [(("u",), velocity), (("pS",), _pressure_scaling(mesh, params))]
    if formulation is Formulation.LA:
        shift = sp.diags(np.concatenate([kappa_mass, np.zeros(mesh.n_facets)]))
        coupled = _factorize_block(la_interface_block(mesh, params, None) + shift, "Darcy-interface")
        appliers.append((("pD", "pGamma"), coupled))
    else:
        K_D = assemble_darcy_tpfa(mesh, params)
        coupling = assemble_coupling(mesh, params, formulation)
        robin = _factorize_block(K_D + coupling.darcy_facet_mass, "Darcy-Robin")
        regularized = _factorize_block(K_D + sp.diags(kappa_mass), "Darcy")
        appliers.append((("pD",), SumOfSolves(robin, regularized)))
    logger.debug(f"Built naive {formulation.value} preconditioner on {layout.size} unknowns")
    return BlockPreconditioner(formulation, layout, appliers, naive=True)


def build_preconditioner(
    kind: str,
    mesh: StaggeredMesh,
    params: PhysicalParams,
    formulation,
    fractional_variant="auto",
) -> BlockPreconditioner:
    """
    Preconditioner by name

    Args:
        kind: 'exact' (B^La / B^Ro with the fractional operator) or 'naive'
        fractional_variant: auto | neumann | dirichlet interface closure
    """
    formulation = Formulation.parse(formulation)
    if kind == NAIVE:
        return build_precond_naive(mesh, params, formulation=formulation)
    if kind != EXACT:
        raise ConfigurationError(f"Unknown preconditioner '{kind}' (expected exact or naive)")
    S = build_interface_operator(mesh, params.mu, fractional_variant)
    if formulation is Formulation.LA:
        return build_precond_la(mesh, params, S=S)
    return build_precond_ro(mesh, params, S_lifted=lift_to_pressure(S, mesh))
