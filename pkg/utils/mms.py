"""
Manufactured solution and grid convergence

Closed-form Stokes-Darcy fields on the unit two-subdomain geometry

    u_S    = (-(1/pi) e^y sin(pi x), (e^y - e) cos(pi x))
    p_S    = 2 e^y cos(pi x)
    p_D    = (e^y - y e) cos(pi x)
    lambda = p_D(x, 1) = 0

with the sources and modified interface data that make them exact for any
mu, k, alpha. MmsData plugs into assemble_system as problem data.
"""

import logging
import math
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np
import pandas as pd

from .assembly import BlockVector, Formulation, assemble_system
from .errors import DomainError, ParameterError
from .linalg import SYMMETRIC_INDEFINITE, factorize
from .mesh import BoundaryLayout, StaggeredMesh, build_mesh
from .params import PhysicalParams

logger = logging.getLogger(__name__)

PI = math.pi
E = math.e
DOMAIN_TOL = 1e-12
FIELDS = ("uS", "pS", "pD", "lambda")
ERROR_FIELDS = ("ux", "uy", "pS", "pD", "pGamma")


def _stokes_velocity(x, y):
    ey = np.exp(y)
    return -ey * np.sin(PI * x) / PI, (ey - E) * np.cos(PI * x)


def _stokes_pressure(x, y):
    return 2.0 * np.exp(y) * np.cos(PI * x)


def _darcy_pressure(x, y):
    return (np.exp(y) - y * E) * np.cos(PI * x)


def _darcy_gradient(x, y):
    return (
        -PI * (np.exp(y) - y * E) * np.sin(PI * x),
        (np.exp(y) - E) * np.cos(PI * x),
    )


def _check_domain(field: str, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < -DOMAIN_TOL) or np.any(x > 1.0 + DOMAIN_TOL):
        raise DomainError(f"x outside [0, 1] for field '{field}'")
    if field in ("uS", "pS", "fS"):
        lo, hi = 1.0, 2.0
    elif field in ("pD", "fD"):
        lo, hi = 0.0, 1.0
    else:
        lo, hi = 1.0, 1.0
    if np.any(y < lo - DOMAIN_TOL) or np.any(y > hi + DOMAIN_TOL):
        raise DomainError(f"y outside [{lo}, {hi}] for field '{field}'")


def exact(field: str, point):
    """
    Exact value of a field at point (x, y)

    Args:
        field: 'uS' (returns a 2-vector), 'pS', 'pD' or 'lambda' (y must be 1)
        point: (x, y); arrays are accepted component-wise

    Returns:
        Scalar (or tuple for uS)
    """
    x, y = point
    if field not in FIELDS:
        raise DomainError(f"Unknown field '{field}' (expected one of {FIELDS})")
    _check_domain(field, x, y)
    if field == "uS":
        return _stokes_velocity(x, y)
    if field == "pS":
        return _stokes_pressure(x, y)
    if field == "pD":
        return _darcy_pressure(x, y)
    return np.zeros_like(np.asarray(x, dtype=float))


def stokes_source(params: PhysicalParams, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """f_S = -div(2 mu eps(u) - p I)"""
    mu = params.mu
    ey = np.exp(y)
    f_x = ey * np.sin(PI * x) * (mu - mu * PI ** 2 - 2.0 * PI ** 2) / PI
    f_y = np.cos(PI * x) * (mu * ((PI ** 2 - 1.0) * ey - PI ** 2 * E) + 2.0 * ey)
    return f_x, f_y


def darcy_source(params: PhysicalParams, x, y) -> np.ndarray:
    """f_D = -div(kappa grad p_D)"""
    return params.kappa * np.cos(PI * x) * ((PI ** 2 - 1.0) * np.exp(y) - PI ** 2 * y * E)


def sources(params: PhysicalParams, point, field: str = "fS"):
    """
    Source terms at a point of the owning subdomain

    Args:
        params: Supplies mu, k
        point: (x, y)
        field: 'fS' for the Stokes momentum source (2-vector), 'fD' for the Darcy source
    """
    x, y = point
    if field not in ("fS", "fD"):
        raise DomainError(f"Unknown source '{field}' (expected 'fS' or 'fD')")
    _check_domain(field, x, y)
    if field == "fS":
        return stokes_source(params, x, y)
    return darcy_source(params, x, y)


def interface_data(params: PhysicalParams, x1):
    """
    Modified coupling data on Gamma

    Returns:
        (h_tau, h_n, g) with sigma_xy = beta_tau u_x + h_tau, sigma_yy = -p_Gamma + h_n
        and g the mass-conservation defect (always zero)
    """
    x1 = np.asarray(x1, dtype=float)
    if np.any(x1 < -DOMAIN_TOL) or np.any(x1 > 1.0 + DOMAIN_TOL):
        raise DomainError("Interface coordinate outside [0, 1]")
    h_tau = (params.beta_tau - params.mu) * E * np.sin(PI * x1) / PI
    h_n = 2.0 * (params.mu - 1.0) * E * np.cos(PI * x1)
    return h_tau, h_n, np.zeros_like(x1)


def stress(params: PhysicalParams, x, y):
    """(sigma_xx, sigma_xy, sigma_yy) of the exact Stokes fields"""
    mu = params.mu
    ey = np.exp(y)
    p = _stokes_pressure(x, y)
    ux_x = -ey * np.cos(PI * x)
    uy_y = ey * np.cos(PI * x)
    shear = mu * (-ey * np.sin(PI * x) / PI - PI * (ey - E) * np.sin(PI * x))
    return 2.0 * mu * ux_x - p, shear, 2.0 * mu * uy_y - p


class MmsData:
    """
    Manufactured problem data for assemble_system

    Evaluators accept coordinate arrays; normals are outward normals of the
    owning subdomain.
    """

    def __init__(self, params: PhysicalParams):
        self.params = params

    def exact(self, field: str, point):
        return exact(field, point)

    def velocity(self, x, y):
        return _stokes_velocity(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def traction(self, x, y, n_x, n_y):
        s_xx, s_xy, s_yy = stress(self.params, np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return s_xx * n_x + s_xy * n_y, s_xy * n_x + s_yy * n_y

    def stokes_source(self, x, y):
        return stokes_source(self.params, np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def darcy_source(self, x, y):
        return darcy_source(self.params, np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def darcy_pressure(self, x, y):
        return _darcy_pressure(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def darcy_flux(self, x, y, n_x, n_y):
        g_x, g_y = _darcy_gradient(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return -self.params.kappa * (g_x * n_x + g_y * n_y)

    def interface_data(self, x):
        return interface_data(self.params, x)


def _weighted_norm(values: np.ndarray, weights) -> float:
    return float(np.sqrt(np.sum(weights * values ** 2)))


def error_norm_fv(numeric: BlockVector, mms: MmsData, mesh: StaggeredMesh) -> Dict[str, float]:
    """
    Discrete L2 errors (sum_K |K| e_K^2)^{1/2} per field

    Velocities are compared at face centers with control-volume weights
    (Dirichlet dofs carry the exact values), pressures at cell centroids and
    pGamma against lambda = 0 with facet-length weights.

    Returns:
        {'ux', 'uy', 'pS', 'pD'} plus 'pGamma' for la solutions
    """
    free = mesh.free_velocity_dofs()
    ux_x, ux_y = mesh.ux_points()
    uy_x, uy_y = mesh.uy_points()
    ex_x, _ = mms.velocity(ux_x, ux_y)
    _, ex_y = mms.velocity(uy_x, uy_y)
    exact_u = np.concatenate([ex_x, ex_y])
    u = exact_u.copy()
    u[free] = numeric.u
    areas = mesh.velocity_cv_areas()
    err_u = u - exact_u
    n_ux = mesh.n_ux

    xs, ys = mesh.stokes_centroids()
    xd, yd = mesh.darcy_centroids()
    errors = {
        "ux": _weighted_norm(err_u[:n_ux], areas[:n_ux]),
        "uy": _weighted_norm(err_u[n_ux:], areas[n_ux:]),
        "pS": _weighted_norm(numeric.pS - _stokes_pressure(xs, ys), mesh.stokes_cell_volume),
        "pD": _weighted_norm(numeric.pD - _darcy_pressure(xd, yd), mesh.darcy_cell_volume),
    }
    if numeric.pGamma is not None:
        errors["pGamma"] = _weighted_norm(numeric.pGamma, mesh.hx)
    return errors


def solve_direct(mesh: StaggeredMesh, params: PhysicalParams, formulation, data=None):
    """Assemble and solve the monolithic system with a sparse direct solver"""
    operator, rhs = assemble_system(mesh, params, formulation, data=data)
    solver = factorize(operator.matrix, SYMMETRIC_INDEFINITE)
    return operator, rhs.like(solver.solve(rhs.to_array()))


def observed_orders(h: Sequence[float], errors: Sequence[float]) -> np.ndarray:
    """
    log(e_coarse / e_fine) / log(h_coarse / h_fine) between consecutive levels

    The first entry is NaN; so is every order involving a zero error.
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    orders = np.full(e.shape, np.nan)
    for i in range(1, e.size):
        if e[i - 1] > 0.0 and e[i] > 0.0:
            orders[i] = math.log(e[i - 1] / e[i]) / math.log(h[i - 1] / h[i])
    return orders


def convergence_study(
    formulation,
    params: PhysicalParams,
    nx_values: Iterable[int] = (16, 32, 64, 128),
    boundary: BoundaryLayout = None,
) -> pd.DataFrame:
    """
    Grid convergence table of the manufactured problem

    Each level uses ny_s = ny_d = nx and a direct solve.

    Returns:
        DataFrame with columns nx, h, err_*, order_* (pGamma columns only for la)
    """
    formulation = Formulation.parse(formulation)
    levels = [int(n) for n in nx_values]
    if len(levels) < 3:
        raise ParameterError(f"A convergence study needs at least three levels, got {levels}")
    fields = ERROR_FIELDS if formulation is Formulation.LA else ERROR_FIELDS[:4]
    data = MmsData(params)
    records = []
    for nx in levels:
        mesh = build_mesh(nx, nx, nx, boundary)
        _, solution = solve_direct(mesh, params, formulation, data)
        errors = error_norm_fv(solution, data, mesh)
        logger.info(f"Convergence level nx={nx}: " + ", ".join(f"{k}={errors[k]:.3e}" for k in fields))
        records.append({"nx": nx, "h": mesh.hx, **{f"err_{k}": errors[k] for k in fields}})

    table = pd.DataFrame(records)
    for k in fields:
        table[f"order_{k}"] = observed_orders(table["h"], table[f"err_{k}"])
    return table
