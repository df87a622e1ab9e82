"""
Spectral fractional interface operator

The interface problem (-Delta_Gamma + I_Gamma) u = lambda M u, discretized by
1D TPFA on the interface facets, is solved densely; the fractional power then
follows from the eigenpairs:

    S = scale * M U diag(E ** exponent) U^T M,   U^T M U = I

With exponent -1/2 and scale (2 mu)^{-1} this is the H^{-1/2} Riesz map used
by the interface blocks of the preconditioners.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InputError
from .linalg import DenseEigenDecomp, as_csr, dense_sym_gevp
from .mesh import BoundaryLayout, StaggeredMesh

logger = logging.getLogger(__name__)


class FractionalVariant(Enum):
    """Closure of the interface problem at the end points of Gamma"""
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"

    @classmethod
    def resolve(cls, value, boundary: BoundaryLayout = None) -> "FractionalVariant":
        """
        Map 'auto' | 'neumann' | 'dirichlet' to a variant

        auto picks Dirichlet when an end point of the interface touches a
        Dirichlet edge and Neumann otherwise.
        """
        if isinstance(value, FractionalVariant):
            return value
        token = str(value).strip().lower() if value is not None else "auto"
        if token == "auto":
            if boundary is not None and boundary.interface_meets_dirichlet:
                return cls.DIRICHLET
            return cls.NEUMANN
        try:
            return cls(token)
        except ValueError:
            raise ConfigurationError(
                f"Unknown fractional variant '{value}' (expected auto, neumann or dirichlet)"
            )


def interface_laplacian_1d(n_facets: int, length: float, variant) -> Tuple[sp.csr_matrix, np.ndarray]:
    """Interface problem on n_facets facets of equal length"""
    variant = FractionalVariant.resolve(variant)
    if n_facets < 1:
        raise InputError("Interface needs at least one facet")
    if variant is FractionalVariant.DIRICHLET and n_facets < 2:
        raise InputError("Dirichlet interface problem needs at least two facets")
    t = 1.0 / length
    diag = np.zeros(n_facets)
    diag[:-1] += t
    diag[1:] += t
    off = np.full(n_facets - 1, -t)
    mass = np.full(n_facets, length)
    if variant is FractionalVariant.NEUMANN:
        diag += mass
    else:
        # half-facet closure at both end points of Gamma
        diag[[0, -1]] += 2.0 / length
    A = sp.diags([off, diag, off], [-1, 0, 1], shape=(n_facets, n_facets))
    return as_csr(A), mass


def interface_laplacian(mesh: StaggeredMesh, variant) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    TPFA discretization of the interface problem

    Args:
        mesh: Mesh whose interface facets carry the problem
        variant: 'neumann' (stiffness plus facet mass) or 'dirichlet'
                 (stiffness with end point closure), or 'auto'

    Returns:
        (A, M) with A symmetric and M the diagonal of facet lengths
    """
    variant = FractionalVariant.resolve(variant, mesh.boundary)
    return interface_laplacian_1d(mesh.n_facets, mesh.hx, variant)


@dataclass(frozen=True)
class SpectralFractionalOp:
    """Dense fractional interface operator and the eigenpairs it was built from"""
    decomp: DenseEigenDecomp
    scale: float
    exponent: float
    variant: FractionalVariant
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def spectral_image(self, i: int) -> np.ndarray:
        """scale * lambda_i^exponent * M u_i, the image of the i-th eigenvector"""
        d = self.decomp
        return self.scale * d.eigenvalues[i] ** self.exponent * d.mass * d.eigenvectors[:, i]


def build_fractional(
    A, M, mu: float, exponent: float = -0.5, variant=FractionalVariant.NEUMANN
) -> SpectralFractionalOp:
    """
    Spectral realization of scale * (A, M)^exponent with scale = (2 mu)^{-1}

    Args:
        A: Interface stiffness from interface_laplacian
        M: Facet-length mass (vector or diagonal matrix)
        mu: Viscosity
        exponent: Fractional power (-1/2 for the preconditioners)
        variant: Recorded on the operator

    Returns:
        SpectralFractionalOp with an exactly symmetric dense matrix
    """
    if not (np.isfinite(mu) and mu > 0):
        raise InputError(f"mu must be positive, got {mu!r}")
    decomp = dense_sym_gevp(A, M)
    if np.any(decomp.eigenvalues <= 0.0):
        raise InputError(
            f"Interface eigenvalue {decomp.eigenvalues.min():.3e} is not positive; check the boundary closure"
        )
    scale = 1.0 / (2.0 * mu)
    MU = decomp.mass[:, None] * decomp.eigenvectors
    S = scale * (MU * decomp.eigenvalues ** exponent) @ MU.T
    S = 0.5 * (S + S.T)
    logger.debug(
        f"Fractional operator on {decomp.size} facets: lambda in [{decomp.eigenvalues[0]:.3e}, "
        f"{decomp.eigenvalues[-1]:.3e}], scale {scale:.3e}"
    )
    return SpectralFractionalOp(
        decomp=decomp,
        scale=scale,
        exponent=exponent,
        variant=FractionalVariant.resolve(variant),
        matrix=S,
    )


def interface_selection(mesh: StaggeredMesh) -> sp.csr_matrix:
    """Pi_Gamma: copies the interface-adjacent Darcy cell value onto its facet"""
    n_f = mesh.n_facets
    return sp.csr_matrix(
        (np.ones(n_f), (np.arange(n_f), mesh.interface_darcy_cells())),
        shape=(n_f, mesh.n_darcy_cells),
    )


def lift_to_pressure(S: SpectralFractionalOp, mesh: StaggeredMesh) -> sp.csr_matrix:
    """Pi^T S Pi over the Darcy cells, supported on the interface-adjacent row"""
    if S.size != mesh.n_facets:
        raise InputError(f"Fractional operator of size {S.size} does not match {mesh.n_facets} facets")
    Pi = interface_selection(mesh)
    return as_csr(Pi.T @ sp.csr_matrix(S.matrix) @ Pi)


def build_interface_operator(mesh: StaggeredMesh, mu: float, variant="auto", exponent: float = -0.5) -> SpectralFractionalOp:
    """interface_laplacian followed by build_fractional"""
    variant = FractionalVariant.resolve(variant, mesh.boundary)
    A, M = interface_laplacian(mesh, variant)
    return build_fractional(A, M, mu, exponent=exponent, variant=variant)
