"""
Linear algebra kernels

Sparse matrices are scipy CSR matrices throughout. This module adds the
pieces the preconditioner lab needs on top of scipy: exact factorizations
with a definiteness check, the dense weighted eigenproblem of the interface
operator, a preconditioned MinRes that reports the preconditioned residual
history, and dense spectra of preconditioned operators.
"""

import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator, splu

from .errors import (
    CapabilityError,
    ContractViolation,
    DefinitenessError,
    InputError,
    PreconditionerError,
)

logger = logging.getLogger(__name__)

SPD = "spd"
SYMMETRIC_INDEFINITE = "symmetric-indefinite"


def as_csr(A) -> sp.csr_matrix:
    """CSR copy with sorted indices and explicit zeros removed"""
    A = sp.csr_matrix(A, dtype=float)
    A.eliminate_zeros()
    A.sort_indices()
    return A


def symmetrize(A) -> sp.csr_matrix:
    """0.5 (A + A^T); the result is symmetric bit for bit"""
    A = sp.csr_matrix(A, dtype=float)
    return as_csr(0.5 * (A + A.T))


def is_exactly_symmetric(A) -> bool:
    """max |A_ij - A_ji| == 0 over all stored entries"""
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        return False
    diff = (A - A.T).tocsr()
    diff.eliminate_zeros()
    return diff.nnz == 0


class FactorizedSolver:
    """
    Direct solver handle over a sparse LU factorization

    Solves accept a vector or a matrix of right-hand sides.
    """

    def __init__(self, A, kind: str = SPD):
        if kind not in (SPD, SYMMETRIC_INDEFINITE):
            raise InputError(f"Unknown factorization kind '{kind}'")
        A = sp.csc_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise InputError(f"Cannot factorize a non-square matrix of shape {A.shape}")
        self.kind = kind
        self.shape = A.shape
        self.dtype = np.dtype(float)
        try:
            if kind == SPD:
                self._lu = splu(
                    A,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            else:
                self._lu = splu(A)
        except RuntimeError as e:
            raise DefinitenessError(f"Factorization failed ({kind}): {str(e)}")

        if kind == SPD:
            pivots = self._lu.U.diagonal()
            if not np.all(pivots > 0):
                worst = float(pivots.min()) if pivots.size else float("nan")
                raise DefinitenessError(
                    f"Matrix of size {self.shape[0]} is not positive definite (smallest pivot {worst:.3e})"
                )
        logger.debug(f"Factorized {kind} matrix of size {self.shape[0]} (nnz L+U = {self._lu.L.nnz + self._lu.U.nnz})")

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        return self._lu.solve(np.ascontiguousarray(b))

    def matvec(self, b: np.ndarray) -> np.ndarray:
        return self.solve(b)

    def matmat(self, B: np.ndarray) -> np.ndarray:
        return self.solve(B)


def factorize(A, kind: str = SPD) -> FactorizedSolver:
    """
    Factorize A for repeated exact solves

    Args:
        A: Square sparse (or dense) matrix
        kind: 'spd' (checked, raises DefinitenessError on a non-positive pivot)
              or 'symmetric-indefinite' (plain pivoted LU)

    Returns:
        FactorizedSolver handle
    """
    return FactorizedSolver(A, kind)


@dataclass
class DenseEigenDecomp:
    """
    Solution of A U = M U diag(E) with U^T M U = I

    Attributes:
        eigenvalues: Ascending eigenvalues E
        eigenvectors: Columns are M-orthonormal eigenvectors U
        mass: Diagonal of M
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mass: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def mass_matrix(self) -> np.ndarray:
        return np.diag(self.mass)


def _mass_diagonal(M) -> np.ndarray:
    if sp.issparse(M):
        M = M.toarray()
    M = np.asarray(M, dtype=float)
    if M.ndim == 2:
        off = M - np.diag(np.diag(M))
        if np.any(off != 0.0):
            raise InputError("Mass matrix must be diagonal")
        M = np.diag(M).copy()
    return M


def dense_sym_gevp(A, M) -> DenseEigenDecomp:
    """
    Dense symmetric generalized eigenproblem with a diagonal positive mass

    Args:
        A: Symmetric matrix (dense or sparse)
        M: Diagonal mass, as a vector or a diagonal matrix

    Returns:
        DenseEigenDecomp with ascending eigenvalues
    """
    mass = _mass_diagonal(M)
    if np.any(~np.isfinite(mass)) or np.any(mass <= 0.0):
        raise InputError("Mass matrix entries must be positive")
    A = A.toarray() if sp.issparse(A) else np.array(A, dtype=float)
    if A.shape != (mass.size, mass.size):
        raise InputError(f"Shape mismatch: A {A.shape} vs mass {mass.size}")
    eigenvalues, eigenvectors = scipy.linalg.eigh(0.5 * (A + A.T), np.diag(mass))
    return DenseEigenDecomp(eigenvalues=eigenvalues, eigenvectors=eigenvectors, mass=mass)


@dataclass
class SolveReport:
    """
    Outcome of one Krylov solve

    residual_history holds the preconditioned residual norms, starting with
    the initial one.
    """
    iterations: int
    residual_history: List[float]
    converged: bool
    wall_time: float
    reduction: float = 1e-8

    @property
    def initial_residual(self) -> float:
        return self.residual_history[0]

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    @property
    def relative_residual(self) -> float:
        if self.initial_residual == 0.0:
            return 0.0
        return self.final_residual / self.initial_residual

    def is_monotone(self) -> bool:
        history = np.asarray(self.residual_history)
        return bool(np.all(np.diff(history) <= 0.0))

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "relative_residual": self.relative_residual,
            "wall_time_s": self.wall_time,
        }


def _unwrap(v):
    """Split a BlockVector-like object into its flat array and a re-wrapper"""
    if hasattr(v, "to_array") and hasattr(v, "like"):
        return np.asarray(v.to_array(), dtype=float), v.like
    return np.asarray(v, dtype=float), lambda arr: arr


def _apply_checked(op: LinearOperator, r: np.ndarray) -> np.ndarray:
    z = np.asarray(op.matvec(r), dtype=float).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise PreconditionerError("Preconditioner application returned non-finite values")
    return z


def _check_symmetry(op: LinearOperator, label: str, rng: np.random.Generator, tol: float = 1e-10):
    n = op.shape[0]
    for _ in range(3):
        v = rng.standard_normal(n)
        w = rng.standard_normal(n)
        Av = op.matvec(v)
        Aw = op.matvec(w)
        lhs = float(w @ Av)
        rhs = float(v @ Aw)
        scale = np.linalg.norm(Av) * np.linalg.norm(w) + np.linalg.norm(Aw) * np.linalg.norm(v)
        if abs(lhs - rhs) > tol * max(scale, np.finfo(float).tiny):
            raise ContractViolation(
                f"{label} is not symmetric: <w, Av> - <v, Aw> = {lhs - rhs:.3e}"
            )


def minres(
    A,
    B,
    b,
    x0=None,
    reduction: float = 1e-8,
    max_iter: int = 10000,
    check_symmetry: bool = False,
    check_seed: int = 0,
):
    """
    Preconditioned minimal residual method for symmetric systems

    Lanczos process in the B inner product with Givens updates of the QR
    factorization (Paige-Saunders recurrences). Stops once the preconditioned
    residual norm ||r_k||_B falls to reduction * ||r_0||_B.

    Args:
        A: Symmetric operator (sparse matrix or object with shape/matvec)
        B: Symmetric positive definite preconditioner (approximate inverse of A)
        b: Right-hand side, a numpy vector or a BlockVector
        x0: Initial guess of the same kind (zero when omitted)
        reduction: Required reduction of the preconditioned residual norm
        max_iter: Iteration cap
        check_symmetry: Test A and B with random vectors before iterating
        check_seed: Seed of the random symmetry test vectors

    Returns:
        (solution in the type of b, SolveReport)
    """
    start = time.perf_counter()
    b_arr, wrap = _unwrap(b)
    n = b_arr.shape[0]
    A_op = aslinearoperator(A)
    B_op = aslinearoperator(B)
    if A_op.shape != (n, n) or B_op.shape != (n, n):
        raise InputError(f"Shape mismatch: A {A_op.shape}, B {B_op.shape}, b ({n},)")

    if x0 is None:
        x = np.zeros(n)
    else:
        x = _unwrap(x0)[0].copy()
        if x.shape != (n,):
            raise InputError(f"Initial guess has shape {x.shape}, expected ({n},)")

    if check_symmetry:
        rng = np.random.default_rng(check_seed)
        _check_symmetry(A_op, "Operator", rng)
        _check_symmetry(B_op, "Preconditioner", rng)

    eps = np.finfo(float).eps
    r1 = b_arr - A_op.matvec(x)
    y = _apply_checked(B_op, r1)
    beta1 = float(r1 @ y)
    if beta1 < 0.0:
        raise PreconditionerError("Preconditioner is not positive definite (negative initial B-norm)")
    if beta1 == 0.0:
        report = SolveReport(0, [0.0], True, time.perf_counter() - start, reduction)
        return wrap(x), report
    beta1 = math.sqrt(beta1)

    history = [beta1]
    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1
    converged = False
    itn = 0

    while itn < max_iter:
        itn += 1
        v = y / beta
        y = A_op.matvec(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = _apply_checked(B_op, r2)
        oldb = beta
        beta2 = float(r2 @ y)
        if beta2 < 0.0:
            if beta2 < -eps * oldb ** 2:
                raise ContractViolation("Lanczos process lost symmetry (negative B-norm)")
            beta2 = 0.0
        beta = math.sqrt(beta2)

        # Previous rotation, then the new one eliminating beta
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(math.hypot(gbar, beta), eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        history.append(phibar)
        if not math.isfinite(phibar):
            raise PreconditionerError("Residual norm became non-finite")
        if phibar <= reduction * beta1:
            converged = True
            break
        if beta == 0.0:
            # invariant Krylov space without reaching the target
            break

    wall_time = time.perf_counter() - start
    report = SolveReport(itn, history, converged, wall_time, reduction)
    if converged:
        logger.debug(f"MinRes converged in {itn} iterations (reduction {phibar / beta1:.2e})")
    else:
        logger.warning(f"MinRes stopped after {itn} iterations at reduction {phibar / beta1:.2e}")
    return wrap(x), report


def random_initial_guess(seed: int, layout, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Uniform [0, 1) initial guess with masked (Dirichlet) entries set to 0

    Args:
        seed: Generator seed
        layout: Vector length or an object with a `size` attribute
        mask: Boolean mask of entries forced to zero

    Returns:
        Deterministic vector for a fixed seed
    """
    size = int(layout.size) if hasattr(layout, "size") else int(layout)
    x = np.random.default_rng(seed).random(size)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (size,):
            raise InputError(f"Mask of shape {mask.shape} does not match layout size {size}")
        x[mask] = 0.0
    return x


def dense_operator(op, n: int) -> np.ndarray:
    """Dense matrix of a linear operator, built by applying it to the identity"""
    if sp.issparse(op):
        return op.toarray()
    if isinstance(op, np.ndarray):
        return np.array(op, dtype=float)
    if hasattr(op, "matmat"):
        return np.asarray(op.matmat(np.eye(n)), dtype=float)
    return np.column_stack([op.matvec(e) for e in np.eye(n)])


@dataclass
class SpectrumReport:
    """Eigenvalues theta of A x = theta B^{-1} x"""
    theta: np.ndarray
    condition_number: float
    min_abs: float
    max_abs: float
    n_negative: int
    n_positive: int
    size: int = field(default=0)

    def to_dict(self):
        return {
            "cond": self.condition_number,
            "theta_min_abs": self.min_abs,
            "theta_max_abs": self.max_abs,
            "n_negative": self.n_negative,
            "n_positive": self.n_positive,
            "n_dofs": self.size,
        }


def preconditioned_spectrum(A, B, dense_threshold: int = 20000) -> SpectrumReport:
    """
    Full spectrum of the preconditioned operator B A (dense path)

    With B = L L^T (Cholesky), the eigenvalues of B A coincide with those of
    the symmetric matrix L^T A L.
    """
    n = A.shape[0]
    if n > dense_threshold:
        raise CapabilityError(
            f"Dense spectrum limited to {dense_threshold} unknowns, system has {n}; "
            "use a coarser mesh or raise STOKES_DARCY_DENSE_THRESHOLD"
        )
    A_dense = dense_operator(A, n)
    B_dense = dense_operator(B, n)
    B_dense = 0.5 * (B_dense + B_dense.T)
    try:
        L = scipy.linalg.cholesky(B_dense, lower=True)
    except np.linalg.LinAlgError:
        raise PreconditionerError("Preconditioner is not positive definite (Cholesky failed)")
    C = L.T @ A_dense @ L
    theta = scipy.linalg.eigvalsh(0.5 * (C + C.T))
    magnitudes = np.abs(theta)
    min_abs = float(magnitudes.min())
    max_abs = float(magnitudes.max())
    cond = max_abs / min_abs if min_abs > 0 else float("inf")
    return SpectrumReport(
        theta=theta,
        condition_number=cond,
        min_abs=min_abs,
        max_abs=max_abs,
        n_negative=int(np.sum(theta < 0)),
        n_positive=int(np.sum(theta > 0)),
        size=n,
    )


def condition_number(A, B, dense_threshold: int = 20000) -> float:
    """max|theta| / min|theta| over the generalized eigenvalues of A x = theta B^{-1} x"""
    return preconditioned_spectrum(A, B, dense_threshold).condition_number


def dump_matrix_market(directory: str, name: str, A, rhs: Optional[np.ndarray] = None) -> Tuple[str, Optional[str]]:
    """
    Write A (and rhs as a column) in MatrixMarket coordinate format

    Returns:
        Paths of the matrix and rhs files
    """
    os.makedirs(directory, exist_ok=True)
    matrix_path = os.path.join(directory, f"{name}_matrix.mtx")
    scipy.io.mmwrite(matrix_path, sp.coo_matrix(A), symmetry="general")
    rhs_path = None
    if rhs is not None:
        rhs_path = os.path.join(directory, f"{name}_rhs.mtx")
        scipy.io.mmwrite(rhs_path, np.asarray(rhs, dtype=float).reshape(-1, 1))
    logger.info(f"Wrote MatrixMarket dump {matrix_path}")
    return matrix_path, rhs_path
