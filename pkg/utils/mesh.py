"""
Structured staggered two-subdomain grid

Stokes occupies [x_min, x_max] x [y_interface, y_top], Darcy occupies
[x_min, x_max] x [y_bottom, y_interface]; both share nx columns so every
interface facet is the top face of exactly one Darcy cell and the bottom face
of exactly one Stokes cell.

Numbering (row-major, j counts upwards inside each subdomain):
  ux(i, j)  = j * (nx + 1) + i            i = 0..nx,   j = 0..ny_s - 1
  uy(i, j)  = n_ux + j * nx + i           i = 0..nx-1, j = 0..ny_s (row 0 lies on the interface)
  pS(i, j)  = j * nx + i                  Stokes cells
  pD(i, j)  = j * nx + i                  Darcy cells, row ny_d - 1 touches the interface
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Tuple

import numpy as np

from .errors import ConfigurationError

logger = logging.getLogger(__name__)


class StokesBC(Enum):
    """Stokes boundary condition types"""
    VELOCITY = "velocity"
    TRACTION = "traction"


class DarcyBC(Enum):
    """Darcy boundary condition types"""
    PRESSURE = "pressure"
    FLUX = "flux"


@dataclass(frozen=True)
class BoundaryLayout:
    """
    Per-edge boundary tags of both subdomains (the interface is never tagged)

    Attributes:
        name: Layout name used in CSV output
        stokes_left, stokes_right, stokes_top: Stokes edge conditions
        darcy_left, darcy_right, darcy_bottom: Darcy edge conditions
    """
    name: str
    stokes_left: StokesBC
    stokes_right: StokesBC
    stokes_top: StokesBC
    darcy_left: DarcyBC
    darcy_right: DarcyBC
    darcy_bottom: DarcyBC

    @classmethod
    def example21(cls) -> "BoundaryLayout":
        """Velocity on the Stokes top, pressure on the Darcy bottom, Neumann sides"""
        return cls(
            name="example21",
            stokes_left=StokesBC.TRACTION,
            stokes_right=StokesBC.TRACTION,
            stokes_top=StokesBC.VELOCITY,
            darcy_left=DarcyBC.FLUX,
            darcy_right=DarcyBC.FLUX,
            darcy_bottom=DarcyBC.PRESSURE,
        )

    @classmethod
    def appendix_c(cls) -> "BoundaryLayout":
        """Dirichlet sides meeting the interface, Neumann top and bottom"""
        return cls(
            name="appendixC",
            stokes_left=StokesBC.VELOCITY,
            stokes_right=StokesBC.VELOCITY,
            stokes_top=StokesBC.TRACTION,
            darcy_left=DarcyBC.PRESSURE,
            darcy_right=DarcyBC.PRESSURE,
            darcy_bottom=DarcyBC.FLUX,
        )

    @classmethod
    def named(cls, name: str) -> "BoundaryLayout":
        layouts = {"example21": cls.example21, "appendixC": cls.appendix_c}
        if name not in layouts:
            raise ConfigurationError(
                f"Unknown boundary layout '{name}' (expected one of {sorted(layouts)})"
            )
        return layouts[name]()

    @property
    def interface_meets_dirichlet(self) -> bool:
        """True when an end point of the interface touches a Dirichlet edge"""
        return (
            self.stokes_left is StokesBC.VELOCITY
            or self.stokes_right is StokesBC.VELOCITY
            or self.darcy_left is DarcyBC.PRESSURE
            or self.darcy_right is DarcyBC.PRESSURE
        )

    @property
    def has_stokes_velocity(self) -> bool:
        return StokesBC.VELOCITY in (self.stokes_left, self.stokes_right, self.stokes_top)

    @property
    def has_darcy_pressure(self) -> bool:
        return DarcyBC.PRESSURE in (self.darcy_left, self.darcy_right, self.darcy_bottom)


class InterfaceFacet(NamedTuple):
    """One interface facet and its two neighbours"""
    facet_id: int
    length: float
    darcy_cell: int
    uy_dof: int
    x_centroid: float


@dataclass(frozen=True)
class StaggeredMesh:
    """
    Uniform staggered grid for Stokes over a cell-centered grid for Darcy

    Immutable; index helpers accept scalars or numpy arrays.
    """
    nx: int
    ny_s: int
    ny_d: int
    boundary: BoundaryLayout
    x_min: float = 0.0
    x_max: float = 1.0
    y_bottom: float = 0.0
    y_interface: float = 1.0
    y_top: float = 2.0

    def __post_init__(self):
        for label, value in (("nx", self.nx), ("ny_s", self.ny_s), ("ny_d", self.ny_d)):
            if int(value) != value or value < 2:
                raise ConfigurationError(
                    f"{label} must be an integer >= 2 for the staggered stencils, got {value}"
                )
        if not (self.x_max > self.x_min and self.y_top > self.y_interface > self.y_bottom):
            raise ConfigurationError("Subdomain extents must be strictly increasing")

    # Spacing
    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def hy_s(self) -> float:
        return (self.y_top - self.y_interface) / self.ny_s

    @property
    def hy_d(self) -> float:
        return (self.y_interface - self.y_bottom) / self.ny_d

    @property
    def hy(self) -> float:
        """Stokes vertical spacing"""
        return self.hy_s

    @property
    def h_K(self) -> float:
        """Distance from an interface-adjacent Darcy centroid to its facet centroid"""
        return 0.5 * self.hy_d

    @property
    def stokes_cell_volume(self) -> float:
        return self.hx * self.hy_s

    @property
    def darcy_cell_volume(self) -> float:
        return self.hx * self.hy_d

    @property
    def interface_normal(self) -> Tuple[float, float]:
        """Outward normal of the Stokes subdomain on the interface"""
        return (0.0, -1.0)

    @property
    def interface_tangent(self) -> Tuple[float, float]:
        return (1.0, 0.0)

    # Counts
    @property
    def n_ux(self) -> int:
        return (self.nx + 1) * self.ny_s

    @property
    def n_uy(self) -> int:
        return self.nx * (self.ny_s + 1)

    @property
    def n_u(self) -> int:
        return self.n_ux + self.n_uy

    @property
    def n_stokes_cells(self) -> int:
        return self.nx * self.ny_s

    @property
    def n_darcy_cells(self) -> int:
        return self.nx * self.ny_d

    @property
    def n_facets(self) -> int:
        return self.nx

    # Index maps
    def ux_index(self, i, j):
        return j * (self.nx + 1) + i

    def uy_index(self, i, j):
        return self.n_ux + j * self.nx + i

    def stokes_cell(self, i, j):
        return j * self.nx + i

    def darcy_cell(self, i, j):
        return j * self.nx + i

    def interface_darcy_cells(self) -> np.ndarray:
        """Darcy cells adjacent to facets 0..nx-1, in facet order"""
        return self.darcy_cell(np.arange(self.nx), self.ny_d - 1)

    def interface_uy_dofs(self) -> np.ndarray:
        """y-velocity dofs lying on the interface, in facet order"""
        return self.uy_index(np.arange(self.nx), 0)

    # Geometry
    def ux_points(self) -> Tuple[np.ndarray, np.ndarray]:
        i, j = np.meshgrid(np.arange(self.nx + 1), np.arange(self.ny_s))
        x = self.x_min + i.ravel() * self.hx
        y = self.y_interface + (j.ravel() + 0.5) * self.hy_s
        return x, y

    def uy_points(self) -> Tuple[np.ndarray, np.ndarray]:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny_s + 1))
        x = self.x_min + (i.ravel() + 0.5) * self.hx
        y = self.y_interface + j.ravel() * self.hy_s
        return x, y

    def stokes_centroids(self) -> Tuple[np.ndarray, np.ndarray]:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny_s))
        return (
            self.x_min + (i.ravel() + 0.5) * self.hx,
            self.y_interface + (j.ravel() + 0.5) * self.hy_s,
        )

    def darcy_centroids(self) -> Tuple[np.ndarray, np.ndarray]:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny_d))
        return (
            self.x_min + (i.ravel() + 0.5) * self.hx,
            self.y_bottom + (j.ravel() + 0.5) * self.hy_d,
        )

    def facet_centroids(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.hx

    def vertex_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """Dual-cell widths around Stokes vertices: halved on the outer rows and columns"""
        wx = np.full(self.nx + 1, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny_s + 1, self.hy_s)
        wy[[0, -1]] *= 0.5
        return wx, wy

    def velocity_cv_areas(self) -> np.ndarray:
        """Control-volume area of every velocity dof in the full numbering"""
        wx, wy = self.vertex_weights()
        ux_area = np.tile(wx * self.hy_s, self.ny_s)
        uy_area = np.repeat(wy * self.hx, self.nx)
        return np.concatenate([ux_area, uy_area])

    def dirichlet_velocity_mask(self) -> np.ndarray:
        """Boolean mask over the full velocity numbering marking velocity-Dirichlet dofs"""
        mask = np.zeros(self.n_u, dtype=bool)
        rows = np.arange(self.ny_s)
        if self.boundary.stokes_left is StokesBC.VELOCITY:
            mask[self.ux_index(0, rows)] = True
        if self.boundary.stokes_right is StokesBC.VELOCITY:
            mask[self.ux_index(self.nx, rows)] = True
        if self.boundary.stokes_top is StokesBC.VELOCITY:
            mask[self.uy_index(np.arange(self.nx), self.ny_s)] = True
        return mask

    def free_velocity_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet_velocity_mask())


def build_mesh(nx: int, ny_s: int, ny_d: int, boundary: BoundaryLayout = None) -> StaggeredMesh:
    """
    Build the two-subdomain staggered grid

    Args:
        nx: Cells per row in both subdomains
        ny_s: Stokes cell rows
        ny_d: Darcy cell rows
        boundary: Edge tags (example21 layout when omitted)

    Returns:
        Immutable StaggeredMesh
    """
    mesh = StaggeredMesh(
        nx=nx, ny_s=ny_s, ny_d=ny_d,
        boundary=boundary if boundary is not None else BoundaryLayout.example21(),
    )
    logger.debug(
        f"Built mesh nx={nx} ny_s={ny_s} ny_d={ny_d} ({mesh.n_u} velocity dofs, "
        f"{mesh.n_stokes_cells}+{mesh.n_darcy_cells} cells, layout {mesh.boundary.name})"
    )
    return mesh


def interface_facets(mesh: StaggeredMesh) -> List[InterfaceFacet]:
    """One record per interface facet, left to right"""
    cells = mesh.interface_darcy_cells()
    dofs = mesh.interface_uy_dofs()
    centroids = mesh.facet_centroids()
    return [
        InterfaceFacet(
            facet_id=f,
            length=mesh.hx,
            darcy_cell=int(cells[f]),
            uy_dof=int(dofs[f]),
            x_centroid=float(centroids[f]),
        )
        for f in range(mesh.nx)
    ]
