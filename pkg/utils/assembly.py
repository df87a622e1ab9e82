"""
Discrete Stokes-Darcy operators

Stokes: staggered (MAC) finite volumes in the full symmetric-gradient form
2 mu eps(u):eps(v). Normal strains live in cells, shear strains at cell
vertices. Darcy: cell-centered TPFA. The two are coupled either through an
interface pressure p_Gamma (Lagrange multiplier formulation, "la") or through
the Robin condition obtained by eliminating p_Gamma ("ro").

Unknown ordering of the monolithic systems:
  la: [u (free dofs), pS, pD, pGamma]
  ro: [u (free dofs), pS, pD]
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Protocol, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InputError
from .linalg import as_csr, symmetrize
from .mesh import BoundaryLayout, DarcyBC, StaggeredMesh, StokesBC
from .params import PhysicalParams

logger = logging.getLogger(__name__)


class Formulation(Enum):
    """Interface coupling formulation"""
    LA = "la"
    RO = "ro"

    @classmethod
    def parse(cls, value) -> "Formulation":
        if isinstance(value, Formulation):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigurationError(f"Unknown formulation '{value}' (expected 'la' or 'ro')")


class ProblemData(Protocol):
    """
    Boundary, source and interface data of a Stokes-Darcy problem

    Every evaluator takes numpy coordinate arrays and returns arrays of the
    same shape. Normals are outward normals of the owning subdomain.
    """

    def velocity(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]: ...

    def traction(self, x: np.ndarray, y: np.ndarray, n_x: float, n_y: float) -> Tuple[np.ndarray, np.ndarray]: ...

    def stokes_source(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]: ...

    def darcy_source(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    def darcy_pressure(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    def darcy_flux(self, x: np.ndarray, y: np.ndarray, n_x: float, n_y: float) -> np.ndarray: ...

    def interface_data(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]: ...


class HomogeneousData:
    """All sources, boundary values and interface data equal to zero"""

    def velocity(self, x, y):
        return np.zeros_like(x, dtype=float), np.zeros_like(x, dtype=float)

    def traction(self, x, y, n_x, n_y):
        return np.zeros_like(x, dtype=float), np.zeros_like(x, dtype=float)

    def stokes_source(self, x, y):
        return np.zeros_like(x, dtype=float), np.zeros_like(x, dtype=float)

    def darcy_source(self, x, y):
        return np.zeros_like(x, dtype=float)

    def darcy_pressure(self, x, y):
        return np.zeros_like(x, dtype=float)

    def darcy_flux(self, x, y, n_x, n_y):
        return np.zeros_like(x, dtype=float)

    def interface_data(self, x):
        zero = np.zeros_like(x, dtype=float)
        return zero, zero.copy(), zero.copy()


BLOCK_NAMES = ("u", "pS", "pD", "pGamma")


@dataclass(frozen=True)
class BlockLayout:
    """Sizes of the unknown blocks of one formulation"""
    formulation: Formulation
    n_u: int
    n_pS: int
    n_pD: int
    n_pGamma: int = 0

    @property
    def names(self) -> Tuple[str, ...]:
        return BLOCK_NAMES if self.formulation is Formulation.LA else BLOCK_NAMES[:3]

    @property
    def sizes(self) -> Tuple[int, ...]:
        sizes = (self.n_u, self.n_pS, self.n_pD, self.n_pGamma)
        return sizes[: len(self.names)]

    @property
    def size(self) -> int:
        return int(sum(self.sizes))

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(int(v) for v in np.concatenate([[0], np.cumsum(self.sizes)]))

    def slice(self, name: str) -> slice:
        if name not in self.names:
            raise InputError(f"Block '{name}' does not exist in the {self.formulation.value} layout")
        k = self.names.index(name)
        offsets = self.offsets
        return slice(offsets[k], offsets[k + 1])


@dataclass
class BlockVector:
    """
    Partitioned unknowns (u, pS, pD[, pGamma])

    u holds the free velocity dofs only; Dirichlet values live on the operator.
    """
    layout: BlockLayout
    u: np.ndarray
    pS: np.ndarray
    pD: np.ndarray
    pGamma: Optional[np.ndarray] = None

    def __post_init__(self):
        has_gamma = self.layout.formulation is Formulation.LA
        if has_gamma != (self.pGamma is not None):
            raise InputError("pGamma must be present exactly for the la formulation")
        for name, n in zip(self.layout.names, self.layout.sizes):
            block = getattr(self, name)
            if np.shape(block) != (n,):
                raise InputError(f"Block '{name}' has shape {np.shape(block)}, expected ({n},)")

    @classmethod
    def zeros(cls, layout: BlockLayout) -> "BlockVector":
        return cls.from_array(layout, np.zeros(layout.size))

    @classmethod
    def from_array(cls, layout: BlockLayout, array: np.ndarray) -> "BlockVector":
        array = np.asarray(array, dtype=float)
        if array.shape != (layout.size,):
            raise InputError(f"Vector of shape {array.shape} does not fit layout of size {layout.size}")
        blocks = {name: array[layout.slice(name)].copy() for name in layout.names}
        return cls(layout=layout, **blocks)

    def like(self, array: np.ndarray) -> "BlockVector":
        """New BlockVector with this layout holding `array`"""
        return BlockVector.from_array(self.layout, array)

    def to_array(self) -> np.ndarray:
        return np.concatenate([getattr(self, name) for name in self.layout.names])

    def blocks(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.layout.names}

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_array()))


@dataclass
class CouplingBlocks:
    """
    Interface coupling pieces shared by both formulations

    Attributes:
        normal_trace: T_n over the full velocity numbering (facets x n_u), entries -|F|
        selection: Pi_Gamma, facet -> adjacent Darcy cell 0/1 map (facets x n_pD)
        inv_beta_mass: beta_n^{-1} |F| per facet
        beta_mass: beta_n |F| per facet
        interface_dofs: Interface y-velocity dofs in facet order
    """
    formulation: Formulation
    normal_trace: sp.csr_matrix
    selection: sp.csr_matrix
    inv_beta_mass: np.ndarray
    beta_mass: np.ndarray
    interface_dofs: np.ndarray

    @property
    def darcy_interface(self) -> sp.csr_matrix:
        """pD rows x pGamma columns, beta_n^{-1}|F| on interface-adjacent cells"""
        return as_csr(self.selection.T @ sp.diags(self.inv_beta_mass))

    @property
    def darcy_facet_mass(self) -> sp.csr_matrix:
        """Pi^T diag(beta_n^{-1}|F|) Pi over the Darcy cells"""
        return as_csr(self.selection.T @ sp.diags(self.inv_beta_mass) @ self.selection)

    @property
    def robin_velocity(self) -> sp.csr_matrix:
        """T_n^T diag(beta_n |F|) T_n / |F|^2, i.e. beta_n |F| on interface y-velocities"""
        n_u = self.normal_trace.shape[1]
        dofs = self.interface_dofs
        return sp.csr_matrix((self.beta_mass, (dofs, dofs)), shape=(n_u, n_u))

    @property
    def darcy_normal_trace(self) -> sp.csr_matrix:
        """Pi^T T_n: pairs interface y-velocities with the adjacent Darcy cell"""
        return as_csr(self.selection.T @ self.normal_trace)


@dataclass
class BlockOperator:
    """
    Assembled monolithic operator of one formulation

    blocks holds the named sub-blocks the monolithic matrix was built from
    (restricted to free velocity dofs); the matrix itself is exactly symmetric.
    """
    formulation: Formulation
    mesh: StaggeredMesh
    params: PhysicalParams
    layout: BlockLayout
    matrix: sp.csr_matrix
    blocks: Dict[str, sp.csr_matrix] = field(default_factory=dict)
    free_dofs: np.ndarray = None
    dirichlet_values: np.ndarray = None

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    @property
    def dtype(self):
        return self.matrix.dtype

    @property
    def dirichlet_mask(self) -> np.ndarray:
        return self.mesh.dirichlet_velocity_mask()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def __matmul__(self, other):
        if isinstance(other, BlockVector):
            return other.like(self.matrix @ other.to_array())
        return self.matrix @ other

    def restrict_full(self, u_full: np.ndarray) -> np.ndarray:
        """Free part of a velocity vector in the full numbering"""
        u_full = np.asarray(u_full, dtype=float)
        if u_full.shape != (self.mesh.n_u,):
            raise InputError(f"Full velocity vector must have {self.mesh.n_u} entries, got {u_full.shape}")
        return u_full[self.free_dofs].copy()

    def expand_velocity(self, u_free: np.ndarray) -> np.ndarray:
        """Full velocity vector: free values plus the eliminated Dirichlet values"""
        u_free = np.asarray(u_free, dtype=float)
        if u_free.shape != (self.free_dofs.size,):
            raise InputError(f"Free velocity vector must have {self.free_dofs.size} entries, got {u_free.shape}")
        u_full = self.dirichlet_values.copy()
        u_full[self.free_dofs] = u_free
        return u_full


def tpfa_transmissibility(k: float, mu: float, d_K: float, d_L: Optional[float], face_length: float) -> float:
    """
    Harmonic two-point transmissibility of a face

    Args:
        k, mu: Permeability and viscosity (kappa = k / mu)
        d_K, d_L: Centroid-to-face distances; d_L=None for a Dirichlet boundary face
        face_length: |F|

    Returns:
        t_K t_L / (t_K + t_L) with t = kappa |F| / d, or t_K on boundary faces
    """
    kappa = k / mu
    t_K = kappa * face_length / d_K
    if d_L is None:
        return t_K
    t_L = kappa * face_length / d_L
    return t_K * t_L / (t_K + t_L)


def tpfa_flux(p_K, p_L, transmissibility: float):
    """Flux leaving cell K through the face shared with L"""
    return transmissibility * (np.asarray(p_K) - np.asarray(p_L))


def _pair_laplacian(n: int, a: np.ndarray, b: np.ndarray, t: np.ndarray) -> sp.csr_matrix:
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    vals = np.concatenate([t, t, -t, -t])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _darcy_boundary_faces(mesh: StaggeredMesh, boundary: BoundaryLayout):
    """(cells, face x, face y, normal, |F|, half distance, tag) per outer Darcy edge"""
    nx, ny = mesh.nx, mesh.ny_d
    rows = np.arange(ny)
    cols = np.arange(nx)
    x_c, y_c = mesh.darcy_centroids()
    y_rows = y_c[mesh.darcy_cell(0, rows)]
    x_cols = x_c[mesh.darcy_cell(cols, 0)]
    return [
        (mesh.darcy_cell(0, rows), np.full(ny, mesh.x_min), y_rows, (-1.0, 0.0),
         mesh.hy_d, 0.5 * mesh.hx, boundary.darcy_left),
        (mesh.darcy_cell(nx - 1, rows), np.full(ny, mesh.x_max), y_rows, (1.0, 0.0),
         mesh.hy_d, 0.5 * mesh.hx, boundary.darcy_right),
        (mesh.darcy_cell(cols, 0), x_cols, np.full(nx, mesh.y_bottom), (0.0, -1.0),
         mesh.hx, 0.5 * mesh.hy_d, boundary.darcy_bottom),
    ]


def assemble_darcy_tpfa(mesh: StaggeredMesh, params: PhysicalParams, boundary: BoundaryLayout = None) -> sp.csr_matrix:
    """
    Cell-centered TPFA discretization of -div(kappa grad p)

    Interior faces use harmonic transmissibilities; pressure-Dirichlet faces the
    half-cell transmissibility kappa |F| / (h/2). Interface faces are left to
    the coupling blocks and flux faces contribute only to the right-hand side.

    Returns:
        Symmetric positive semidefinite matrix over the Darcy cells
    """
    boundary = boundary if boundary is not None else mesh.boundary
    nx, ny = mesh.nx, mesh.ny_d
    n = mesh.n_darcy_cells
    t_x = tpfa_transmissibility(params.k, params.mu, 0.5 * mesh.hx, 0.5 * mesh.hx, mesh.hy_d)
    t_y = tpfa_transmissibility(params.k, params.mu, 0.5 * mesh.hy_d, 0.5 * mesh.hy_d, mesh.hx)

    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny))
    a_x = mesh.darcy_cell(i.ravel(), j.ravel())
    i, j = np.meshgrid(np.arange(nx), np.arange(ny - 1))
    a_y = mesh.darcy_cell(i.ravel(), j.ravel())
    K = _pair_laplacian(n, a_x, a_x + 1, np.full(a_x.size, t_x))
    K = K + _pair_laplacian(n, a_y, a_y + nx, np.full(a_y.size, t_y))

    diag = np.zeros(n)
    for cells, _, _, _, length, half, tag in _darcy_boundary_faces(mesh, boundary):
        if tag is DarcyBC.PRESSURE:
            np.add.at(diag, cells, tpfa_transmissibility(params.k, params.mu, half, None, length))
    K = K + sp.diags(diag)
    logger.debug(f"Darcy TPFA block: {n} cells, nnz {K.nnz}")
    return as_csr(K)


def _darcy_rhs(mesh: StaggeredMesh, params: PhysicalParams, boundary: BoundaryLayout, data: ProblemData) -> np.ndarray:
    """-f_D |K| + q_N |F| on flux faces - t p_D on pressure faces"""
    x, y = mesh.darcy_centroids()
    rhs = -data.darcy_source(x, y) * mesh.darcy_cell_volume
    for cells, xf, yf, (n_x, n_y), length, half, tag in _darcy_boundary_faces(mesh, boundary):
        if tag is DarcyBC.PRESSURE:
            t = tpfa_transmissibility(params.k, params.mu, half, None, length)
            np.add.at(rhs, cells, -t * data.darcy_pressure(xf, yf))
        else:
            np.add.at(rhs, cells, data.darcy_flux(xf, yf, n_x, n_y) * length)
    return rhs


def assemble_divergence(mesh: StaggeredMesh) -> sp.csr_matrix:
    """
    MAC divergence over the full velocity numbering: (D u)_K = div u in cell K

    The monolithic systems use B = -|K| D and its transpose, so the pressure
    gradient is the exact discrete adjoint.
    """
    return as_csr(_normal_strain(mesh, "x") + _normal_strain(mesh, "y"))


def _normal_strain(mesh: StaggeredMesh, direction: str) -> sp.csr_matrix:
    i, j = np.meshgrid(np.arange(mesh.nx), np.arange(mesh.ny_s))
    i, j = i.ravel(), j.ravel()
    cells = mesh.stokes_cell(i, j)
    if direction == "x":
        lo, hi, h = mesh.ux_index(i, j), mesh.ux_index(i + 1, j), mesh.hx
    else:
        lo, hi, h = mesh.uy_index(i, j), mesh.uy_index(i, j + 1), mesh.hy_s
    rows = np.concatenate([cells, cells])
    cols = np.concatenate([hi, lo])
    vals = np.concatenate([np.full(cells.size, 1.0 / h), np.full(cells.size, -1.0 / h)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_stokes_cells, mesh.n_u))


@dataclass
class ShearForm:
    """
    Vertex shear strains gamma = R u + c0 with weights w and linear data lin

    The shear part of the energy is sum_v w_v gamma_v^2 / 2 + lin_v (R u)_v.
    """
    R: sp.csr_matrix
    weights: np.ndarray
    offset: np.ndarray
    linear: np.ndarray
    vertex_class: np.ndarray


VERTEX_INTERIOR, VERTEX_DIRICHLET, VERTEX_INTERFACE, VERTEX_TRACTION = 0, 1, 2, 3


def shear_form(mesh: StaggeredMesh, params: PhysicalParams, data: ProblemData = None) -> ShearForm:
    """
    Shear strain rows at every Stokes vertex

    A neighbour missing at the boundary is replaced by the vertex value at
    distance h/2. On the interface that value is eliminated with the BJS
    relation sigma_xy = beta_tau u_x + h_tau, which scales the vertex weight by
    theta = beta_tau / (beta_tau + 2 mu / hy) and moves h_tau to the linear term.
    Traction vertices carry the prescribed shear stress instead of a weight.
    """
    data = data if data is not None else HomogeneousData()
    b = mesh.boundary
    nx, ny = mesh.nx, mesh.ny_s
    hx, hy = mesh.hx, mesh.hy_s
    mu = params.mu

    I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    I, J = I.ravel(), J.ravel()
    n_v = I.size
    vertex = np.arange(n_v)
    xv = mesh.x_min + I * hx
    yv = mesh.y_interface + J * hy
    wx, wy = mesh.vertex_weights()
    area = wx[I] * wy[J]

    on_left, on_right = I == 0, I == nx
    on_top, on_gamma = J == ny, J == 0
    vel_edge = (
        (on_left & (b.stokes_left is StokesBC.VELOCITY))
        | (on_right & (b.stokes_right is StokesBC.VELOCITY))
        | (on_top & (b.stokes_top is StokesBC.VELOCITY))
    )
    trac_edge = (
        (on_left & (b.stokes_left is StokesBC.TRACTION))
        | (on_right & (b.stokes_right is StokesBC.TRACTION))
        | (on_top & (b.stokes_top is StokesBC.TRACTION))
    )
    vclass = np.full(n_v, VERTEX_INTERIOR)
    vclass[vel_edge] = VERTEX_DIRICHLET
    interface = ~vel_edge & on_gamma & ~on_left & ~on_right
    vclass[interface] = VERTEX_INTERFACE
    vclass[~vel_edge & ~interface & trac_edge] = VERTEX_TRACTION

    gx, gy = data.velocity(xv, yv)
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    offset = np.zeros(n_v)

    def add(mask, dofs, coef):
        rows.append(vertex[mask])
        cols.append(dofs)
        vals.append(np.full(int(mask.sum()), coef))

    # d ux / dy
    both = (J >= 1) & (J <= ny - 1)
    add(both, mesh.ux_index(I[both], J[both]), 1.0 / hy)
    add(both, mesh.ux_index(I[both], J[both] - 1), -1.0 / hy)
    add(on_gamma, mesh.ux_index(I[on_gamma], 0), 2.0 / hy)
    ghost = on_gamma & ~interface
    offset[ghost] -= 2.0 * gx[ghost] / hy
    add(on_top, mesh.ux_index(I[on_top], ny - 1), -2.0 / hy)
    offset[on_top] += 2.0 * gx[on_top] / hy

    # d uy / dx
    both = (I >= 1) & (I <= nx - 1)
    add(both, mesh.uy_index(I[both], J[both]), 1.0 / hx)
    add(both, mesh.uy_index(I[both] - 1, J[both]), -1.0 / hx)
    add(on_left, mesh.uy_index(0, J[on_left]), 2.0 / hx)
    offset[on_left] -= 2.0 * gy[on_left] / hx
    add(on_right, mesh.uy_index(nx - 1, J[on_right]), -2.0 / hx)
    offset[on_right] += 2.0 * gy[on_right] / hx

    R = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_v, mesh.n_u),
    )

    beta = params.beta_tau
    denom = beta + 2.0 * mu / hy
    theta = beta / denom
    weights = mu * area
    weights[interface] *= theta
    weights[vclass == VERTEX_TRACTION] = 0.0

    linear = np.zeros(n_v)
    h_tau, _, _ = data.interface_data(xv[interface])
    linear[interface] = wx[I[interface]] * mu * h_tau / denom

    # prescribed shear stress sigma_xy = t . (swapped normal) on traction vertices
    traction = vclass == VERTEX_TRACTION
    sigma_xy = np.zeros(n_v)
    remaining = traction.copy()
    for edge_mask, tag, (n_x, n_y) in (
        (on_left, b.stokes_left, (-1.0, 0.0)),
        (on_right, b.stokes_right, (1.0, 0.0)),
        (on_top, b.stokes_top, (0.0, 1.0)),
    ):
        if tag is not StokesBC.TRACTION:
            continue
        sel = remaining & edge_mask
        if not sel.any():
            continue
        t_x, t_y = data.traction(xv[sel], yv[sel], n_x, n_y)
        sigma_xy[sel] = t_y * n_x + t_x * n_y
        remaining &= ~sel
    linear[traction] = area[traction] * sigma_xy[traction]

    return ShearForm(R=R, weights=weights, offset=offset, linear=linear, vertex_class=vclass)


def _velocity_energy(mesh: StaggeredMesh, params: PhysicalParams, data: ProblemData = None):
    """Full-numbering velocity matrix and its right-hand side"""
    data = data if data is not None else HomogeneousData()
    shear = shear_form(mesh, params, data)
    Dxx = _normal_strain(mesh, "x")
    Dyy = _normal_strain(mesh, "y")
    cell = mesh.stokes_cell_volume
    A = 2.0 * params.mu * cell * (Dxx.T @ Dxx + Dyy.T @ Dyy)
    A = A + shear.R.T @ sp.diags(shear.weights) @ shear.R

    rhs = -(shear.R.T @ (shear.weights * shear.offset + shear.linear))
    ux_x, ux_y = mesh.ux_points()
    uy_x, uy_y = mesh.uy_points()
    fx, _ = data.stokes_source(ux_x, ux_y)
    _, fy = data.stokes_source(uy_x, uy_y)
    rhs = rhs + np.concatenate([fx, fy]) * mesh.velocity_cv_areas()

    b = mesh.boundary
    rows = np.arange(mesh.ny_s)
    for i, tag, n_x in ((0, b.stokes_left, -1.0), (mesh.nx, b.stokes_right, 1.0)):
        if tag is StokesBC.TRACTION:
            dofs = mesh.ux_index(i, rows)
            t_x, _ = data.traction(ux_x[dofs], ux_y[dofs], n_x, 0.0)
            rhs[dofs] += t_x * mesh.hy_s
    if b.stokes_top is StokesBC.TRACTION:
        dofs = mesh.uy_index(np.arange(mesh.nx), mesh.ny_s)
        _, t_y = data.traction(uy_x[dofs - mesh.n_ux], uy_y[dofs - mesh.n_ux], 0.0, 1.0)
        rhs[dofs] += t_y * mesh.hx
    return as_csr(A), rhs


def _dirichlet_values(mesh: StaggeredMesh, data: ProblemData) -> np.ndarray:
    mask = mesh.dirichlet_velocity_mask()
    values = np.zeros(mesh.n_u)
    ux_x, ux_y = mesh.ux_points()
    uy_x, uy_y = mesh.uy_points()
    gx, _ = data.velocity(ux_x, ux_y)
    _, gy = data.velocity(uy_x, uy_y)
    full = np.concatenate([gx, gy])
    values[mask] = full[mask]
    return values


def assemble_stokes_block(mesh: StaggeredMesh, params: PhysicalParams, formulation) -> sp.csr_matrix:
    """
    Velocity block over the free dofs

    Symmetric-gradient MAC operator with the BJS tangential closure; the Robin
    formulation adds beta_n |F| on the interface y-velocities.

    Args:
        mesh: Staggered mesh (carries the boundary layout)
        params: Physical parameters
        formulation: 'la' or 'ro'

    Returns:
        SPD matrix, free velocity dofs only
    """
    formulation = Formulation.parse(formulation)
    A, _ = _velocity_energy(mesh, params)
    if formulation is Formulation.RO:
        A = A + assemble_coupling(mesh, params, formulation).robin_velocity
    free = mesh.free_velocity_dofs()
    return symmetrize(A[free][:, free])


def _interface_beta(mesh: StaggeredMesh, params: PhysicalParams) -> np.ndarray:
    return np.full(mesh.n_facets, params.beta_n(mesh.h_K))


def assemble_coupling(mesh: StaggeredMesh, params: PhysicalParams, formulation) -> CouplingBlocks:
    """
    Interface coupling blocks

    la: T_n pairs interface y-velocities with pGamma (entries -|F|, n = (0,-1));
        beta_n^{-1}|F| couples pGamma with the adjacent Darcy cell.
    ro: the same T_n pairs the y-velocities with the adjacent Darcy cell and
        beta_n |F| enters the velocity block.
    """
    formulation = Formulation.parse(formulation)
    n_f = mesh.n_facets
    facets = np.arange(n_f)
    length = np.full(n_f, mesh.hx)
    n_y = mesh.interface_normal[1]
    normal_trace = sp.csr_matrix(
        (n_y * length, (facets, mesh.interface_uy_dofs())), shape=(n_f, mesh.n_u)
    )
    selection = sp.csr_matrix(
        (np.ones(n_f), (facets, mesh.interface_darcy_cells())), shape=(n_f, mesh.n_darcy_cells)
    )
    beta = _interface_beta(mesh, params)
    return CouplingBlocks(
        formulation=formulation,
        normal_trace=as_csr(normal_trace),
        selection=as_csr(selection),
        inv_beta_mass=length / beta,
        beta_mass=beta * length,
        interface_dofs=mesh.interface_uy_dofs(),
    )


def assemble_system(
    mesh: StaggeredMesh,
    params: PhysicalParams,
    formulation,
    boundary: BoundaryLayout = None,
    data: ProblemData = None,
) -> Tuple[BlockOperator, BlockVector]:
    """
    Monolithic symmetric system of one formulation

    Args:
        mesh: Staggered mesh
        params: Physical parameters
        formulation: 'la' or 'ro'
        boundary: Must match mesh.boundary when given
        data: Sources, boundary and interface data (homogeneous when omitted)

    Returns:
        (BlockOperator, right-hand side BlockVector)
    """
    formulation = Formulation.parse(formulation)
    if boundary is not None and boundary != mesh.boundary:
        raise ConfigurationError(
            f"Boundary layout '{boundary.name}' does not match the mesh layout '{mesh.boundary.name}'"
        )
    boundary = mesh.boundary
    data = data if data is not None else HomogeneousData()

    A_full, rhs_u_full = _velocity_energy(mesh, params, data)
    D = assemble_divergence(mesh)
    B_full = -mesh.stokes_cell_volume * D
    K_D = assemble_darcy_tpfa(mesh, params, boundary)
    coupling = assemble_coupling(mesh, params, formulation)

    free = mesh.free_velocity_dofs()
    mask = mesh.dirichlet_velocity_mask()
    fixed = np.flatnonzero(mask)
    g = _dirichlet_values(mesh, data)
    g_d = g[fixed]

    facet_x = mesh.facet_centroids()
    _, h_n, g_gamma = data.interface_data(facet_x)
    length = np.full(mesh.n_facets, mesh.hx)
    uy_gamma = mesh.interface_uy_dofs()

    # traction part of the interface normal stress condition
    rhs_u_full = rhs_u_full.copy()
    rhs_u_full[uy_gamma] -= h_n * length
    if formulation is Formulation.RO:
        A_full = A_full + coupling.robin_velocity
        beta = _interface_beta(mesh, params)
        rhs_u_full[uy_gamma] -= beta * g_gamma * length

    A_csr = as_csr(A_full)
    A = A_csr[free][:, free]
    rhs_u = rhs_u_full[free] - A_csr[free][:, fixed] @ g_d
    B_csr = as_csr(B_full)
    B = B_csr[:, free]
    rhs_pS = -(B_csr[:, fixed] @ g_d)
    rhs_D = _darcy_rhs(mesh, params, boundary, data)

    blocks = {"A": as_csr(A), "B": as_csr(B), "darcy": K_D}
    if formulation is Formulation.LA:
        Tn = as_csr(coupling.normal_trace[:, free])
        Ct = coupling.darcy_interface
        darcy_block = -K_D - coupling.darcy_facet_mass
        interface_block = sp.diags(-coupling.inv_beta_mass)
        matrix = sp.bmat(
            [
                [A, B.T, None, Tn.T],
                [B, None, None, None],
                [None, None, darcy_block, Ct],
                [Tn, None, Ct.T, interface_block],
            ],
            format="csr",
        )
        blocks.update({"normal_trace": Tn, "darcy_interface": Ct, "interface": as_csr(interface_block)})
        rhs_gamma = g_gamma * length
        layout = BlockLayout(formulation, free.size, mesh.n_stokes_cells, mesh.n_darcy_cells, mesh.n_facets)
        rhs = BlockVector(layout, rhs_u, rhs_pS, rhs_D, rhs_gamma)
    else:
        Tn_D = as_csr(coupling.darcy_normal_trace[:, free])
        matrix = sp.bmat(
            [
                [A, B.T, Tn_D.T],
                [B, None, None],
                [Tn_D, None, -K_D],
            ],
            format="csr",
        )
        blocks.update({"darcy_normal_trace": Tn_D})
        rhs_D = rhs_D + coupling.selection.T @ (g_gamma * length)
        layout = BlockLayout(formulation, free.size, mesh.n_stokes_cells, mesh.n_darcy_cells)
        rhs = BlockVector(layout, rhs_u, rhs_pS, rhs_D)

    matrix = symmetrize(matrix)
    blocks["A"] = symmetrize(blocks["A"])
    operator = BlockOperator(
        formulation=formulation,
        mesh=mesh,
        params=params,
        layout=layout,
        matrix=matrix,
        blocks=blocks,
        free_dofs=free,
        dirichlet_values=g,
    )
    logger.debug(
        f"Assembled {formulation.value} system: {layout.size} unknowns "
        f"(u {layout.n_u}, pS {layout.n_pS}, pD {layout.n_pD}, pGamma {layout.n_pGamma}), nnz {matrix.nnz}"
    )
    return operator, rhs
