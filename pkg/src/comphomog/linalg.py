"""Sparse storage helpers and a preconditioned conjugate gradient solver.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted, no
duplicates, no entries below ``DROP_TOL`` in magnitude).
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgument, NumericalError

DROP_TOL = 1e-300


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    converged: bool


def finalize(A):
    """Return ``A`` as canonical CSR with negligible entries dropped."""
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.data[np.abs(A.data) < DROP_TOL] = 0.0
    A.eliminate_zeros()
    A.sort_indices()
    return A


def from_dense(rows):
    return finalize(sp.csr_matrix(np.asarray(rows, dtype=float)))


def spmv(A, x):
    """Row-wise product ``A @ x``; summation runs in ascending column order."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise InvalidArgument(f"vector of length {x.shape} does not match {A.shape}")
    return A @ x


def diagonal_positions(A):
    """Index into ``A.data`` of each row's diagonal entry (CSR, all present)."""
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    pos = np.flatnonzero(A.indices == rows)
    if pos.size != A.shape[0]:
        raise InvalidArgument("matrix has rows without a stored diagonal entry")
    return pos


def factorized_preconditioner(P):
    """Apply ``P^{-1}`` through a sparse LU factorization of ``P``.

    Meant for a fixed SPD matrix that is spectrally close to the systems
    being solved, e.g. ``M/tau + K`` for systems that differ from it by a
    bounded diagonal reaction term.
    """
    return spla.factorized(sp.csc_matrix(P))


def cg_solve(A, b, tol=1e-10, max_iter=None, preconditioner="jacobi", x0=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Parameters
    ----------
    A : csr_matrix
    b : array_like
    tol : float
        Relative residual target, ``||b - A x|| <= tol * ||b||``.
    max_iter : int, optional
        Defaults to ``10 * n``.
    preconditioner : {"none", "jacobi"} or callable
        A callable is applied as ``z = preconditioner(r)`` and must
        represent an SPD operator.
    x0 : array_like, optional
        Starting guess.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    n = A.shape[0]
    b = np.asarray(b, dtype=float)
    if A.shape[1] != n or b.shape != (n,):
        raise InvalidArgument(f"incompatible shapes {A.shape} and {b.shape}")
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    if not callable(preconditioner) and preconditioner not in ("none", "jacobi"):
        raise InvalidArgument(f"unknown preconditioner {preconditioner!r}")
    if max_iter is None:
        max_iter = 10 * n

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)

    if callable(preconditioner):
        apply = preconditioner
    elif preconditioner == "jacobi":
        d = A.diagonal()
        if np.any(d <= 0):
            raise NumericalError("Jacobi preconditioner needs a positive diagonal")
        dinv = 1.0 / d

        def apply(res):
            return res * dinv
    else:
        def apply(res):
            return res.copy()

    # work with b / ||b|| so that tiny right-hand sides cannot underflow
    scale = bnorm
    b = b / scale
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float) / scale
    r = b - A @ x
    rnorm = np.linalg.norm(r)
    target = tol
    if rnorm <= target:
        return x * scale, SolveReport(0, rnorm, True)

    z = apply(r)
    p = z.copy()
    rz = r @ z
    it = 0
    while it < max_iter:
        it += 1
        q = A @ p
        curv = p @ q
        if not curv > 0:
            raise NumericalError(
                f"CG breakdown: non-positive curvature {curv:g} at iteration {it}",
                report=SolveReport(it, rnorm, False),
            )
        step = rz / curv
        x += step * p
        r -= step * q
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # confirm against the true residual; recursion drift can lie
            rtrue = np.linalg.norm(b - A @ x)
            if rtrue <= target:
                return x * scale, SolveReport(it, rtrue, True)
            r = b - A @ x
            z = apply(r)
            p = z.copy()
            rz = r @ z
            continue
        z = apply(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    rtrue = np.linalg.norm(b - A @ x)
    return x * scale, SolveReport(it, rtrue, rtrue <= target)
