"""Effective diffusion tensors from periodic cell problems.

The numeric route solves, for each direction ``e_i``, the corrector
equation ``div(A (e_i + grad w_i)) = 0`` on the unit torus with P1
elements on a criss-cross mesh whose opposite boundary vertices are
identified. Closed forms cover the 1D harmonic mean and layered media.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import StiffnessAssembler
from .coefficients import CoefficientField, DiagonalField, LayeredField, as_profile
from .errors import InvalidArgument, NumericalError
from .linalg import cg_solve
from .mesh import build_crisscross_mesh


@dataclass(frozen=True)
class HomogenizedTensor:
    matrix: np.ndarray
    provenance: str

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def is_positive_definite(self):
        probes = list(np.eye(self.dim)) + [np.ones(self.dim)]
        return all(z @ self.matrix @ z > 0 for z in probes)

    def format(self):
        rows = "\n".join(" ".join(f"{v:.10g}" for v in row) for row in self.matrix)
        return f"{rows}\nprovenance: {self.provenance}"


@dataclass(frozen=True, eq=False)
class CellSolution:
    """Nodal correctors on the periodic cell mesh.

    ``correctors[i]`` holds the values of the i-th corrector at every
    vertex of ``mesh`` (periodic copies repeat the same value).
    """

    mesh: object
    correctors: np.ndarray
    mean_zero: bool
    coeff: CoefficientField = None


def _midpoints(n_quad):
    return (np.arange(n_quad) + 0.5) / n_quad


def harmonic_mean_1d(profile, n_quad=1024):
    """``1 / int_0^1 dy / a(y)`` by the composite midpoint rule."""
    if n_quad < 16:
        raise InvalidArgument(f"n_quad must be >= 16, got {n_quad}")
    a = as_profile(profile)(_midpoints(n_quad))
    if np.any(a <= 0):
        raise InvalidArgument("profile must be positive on [0, 1)")
    return HomogenizedTensor(np.array([[1.0 / np.mean(1.0 / a)]]), "harmonic-1d")


def layered_homogenized_2d(a11, a12, a21, a22, n_quad=1024):
    """Closed-form effective matrix of a medium layered in ``y_1``."""
    if n_quad < 16:
        raise InvalidArgument(f"n_quad must be >= 16, got {n_quad}")
    s = _midpoints(n_quad)
    p11, p12, p21, p22 = (as_profile(p)(s) for p in (a11, a12, a21, a22))
    if np.any(p11 <= 0):
        raise InvalidArgument("A11 must be positive on [0, 1)")
    inv_mean = np.mean(1.0 / p11)
    m12 = np.mean(p12 / p11)
    m21 = np.mean(p21 / p11)
    schur = np.mean(p22 - p12 * p21 / p11)
    hom = np.array(
        [
            [1.0 / inv_mean, m12 / inv_mean],
            [m21 / inv_mean, m21 * m12 / inv_mean + schur],
        ]
    )
    return HomogenizedTensor(hom, "layered-2d")


def periodic_fold(n):
    """Map criss-cross vertices of the unit square to torus unknowns."""
    ng = n + 1
    k = np.arange(ng * ng)
    i, j = k % ng, k // ng
    grid = (j % n) * n + (i % n)
    centres = n * n + np.arange(n * n)
    return np.concatenate([grid, centres])


def _solve_singular(K, rhs, tol):
    """Pin unknown 0 and solve the remaining regular system."""
    Kr = K[1:, 1:].tocsr()
    br = rhs[1:]
    sym = abs(Kr - Kr.T).max() <= 1e-12 * abs(Kr).max()
    if sym:
        x, report = cg_solve(Kr, br, tol=tol, preconditioner="jacobi")
        if not report.converged:
            raise NumericalError("cell problem CG did not converge", report=report)
    else:
        # nonsymmetric forms (A12 != A21) are outside CG's contract
        x = spla.spsolve(Kr.tocsc(), br)
    return np.concatenate([[0.0], x])


def solve_cell_problems(coeff, n, tol=1e-12):
    """Correctors for every unit direction on an ``n x n`` periodic mesh."""
    if coeff.dim != 2:
        raise InvalidArgument("numeric cell problems are implemented for d = 2")
    if n < 4:
        raise InvalidArgument(f"cell resolution must be >= 4, got {n}")
    mesh = build_crisscross_mesh(n)
    fold = periodic_fold(n)
    asm = StiffnessAssembler(mesh, fold=fold)
    A = coeff.eval_cell(mesh.barycenters)
    K = asm.assemble(A)
    nt = asm.n
    g = mesh.gradients
    m_torus = np.bincount(fold, weights=mesh.lumped_mass, minlength=nt)

    correctors = np.zeros((2, mesh.n_vertices))
    for i in range(2):
        # load: -int A e_i . grad(phi_a)
        flux = A[:, :, i]  # A e_i per element
        local = -mesh.measures[:, None] * np.einsum("ek,eak->ea", flux, g)
        rhs = np.bincount(fold[mesh.elements].ravel(), weights=local.ravel(), minlength=nt)
        w = _solve_singular(K, rhs, tol)
        w -= (m_torus @ w) / m_torus.sum()
        correctors[i] = w[fold]
    return CellSolution(mesh, correctors, True, coeff)


def homogenized_tensor(coeff, cell):
    """``[A_hom]_ij = int_Y A (e_j + grad w_j) . e_i`` with barycentre quadrature."""
    mesh = cell.mesh
    A = coeff.eval_cell(mesh.barycenters)
    g = mesh.gradients
    d = coeff.dim
    hom = np.zeros((d, d))
    for j in range(d):
        grad_w = np.einsum("ea,eak->ek", cell.correctors[j][mesh.elements], g)
        field = grad_w.copy()
        field[:, j] += 1.0
        flux = np.einsum("ekl,el->ek", A, field)
        hom[:, j] = mesh.measures @ flux
    return HomogenizedTensor(hom, "numeric-cell-solve")


def homogenize(coeff, n=128, n_quad=1024):
    """Effective tensor by the cheapest exact route available.

    Constant fields return themselves, 1D fields use the harmonic mean,
    diagonal fields whose i-th entry depends on ``y_i`` alone decouple into
    1D harmonic means, layered fields use their closed form and everything
    else goes through the numeric cell solve.
    """
    if coeff.is_constant:
        return HomogenizedTensor(coeff.eval_cell(np.zeros(coeff.dim)), "constant")
    if isinstance(coeff, DiagonalField) and coeff.dim == 2:
        means = [harmonic_mean_1d(p, n_quad).matrix[0, 0] for p in coeff.profiles]
        return HomogenizedTensor(np.diag(means), "harmonic-diagonal")
    if isinstance(coeff, LayeredField):
        return layered_from_field(coeff, n_quad)
    if coeff.dim == 1:
        prof = getattr(coeff, "profiles", None)
        if prof is None:
            return harmonic_mean_1d(lambda s: coeff.eval_cell(s[:, None])[:, 0, 0], n_quad)
        return harmonic_mean_1d(prof[0], n_quad)
    return homogenized_tensor(coeff, solve_cell_problems(coeff, n))


def layered_from_field(field, n_quad=1024):
    """Closed form for a :class:`LayeredField` (or compatible diagonal field)."""
    if isinstance(field, LayeredField):
        e = field.entries
        return layered_homogenized_2d(e[0][0], e[0][1], e[1][0], e[1][1], n_quad)
    raise InvalidArgument(f"{field!r} is not a layered field")
