"""P1 finite element assembly on a :class:`~comphomog.mesh.Mesh`."""
import numpy as np
import scipy.sparse as sp

from .linalg import DROP_TOL, finalize


class StiffnessAssembler:
    """Precomputed scatter pattern for repeated stiffness assembly.

    ``assemble(coef)`` builds ``K_ij = sum_T |T| grad(phi_i) . C_T grad(phi_j)``
    for per-element coefficient matrices ``C_T``. The sparsity pattern and
    the scatter map are fixed at construction so repeated assembly is a
    single ``bincount``.

    ``fold`` optionally maps mesh vertices to fewer unknowns (periodic
    identification); the assembled matrix then acts on the folded unknowns.
    """

    def __init__(self, mesh, fold=None):
        self.mesh = mesh
        nloc = mesh.dim + 1
        elems = mesh.elements if fold is None else np.asarray(fold)[mesh.elements]
        self.n = mesh.n_vertices if fold is None else int(np.max(fold)) + 1
        rows = np.repeat(elems, nloc, axis=1).ravel()
        cols = np.tile(elems, (1, nloc)).ravel()
        pattern = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(self.n, self.n)
        )
        pattern.sum_duplicates()
        pattern.sort_indices()
        self._indptr = pattern.indptr
        self._indices = pattern.indices
        # position of every local entry inside the CSR data array
        keys = rows.astype(np.int64) * self.n + cols
        csr_rows = np.repeat(np.arange(self.n), np.diff(pattern.indptr))
        csr_keys = csr_rows.astype(np.int64) * self.n + pattern.indices
        pos = np.searchsorted(csr_keys, keys)
        self._scatter = pos
        self._nnz = pattern.nnz
        self._grads = mesh.gradients
        self._measures = mesh.measures

    def local(self, coef):
        """Element matrices for per-element (or shared) coefficients.

        ``coef`` has shape (n_elements, dim, dim) or (dim, dim). Entry
        ``[e, a, b]`` is ``|T_e| grad(phi_a) . C_e grad(phi_b)``: row ``a``
        is the test function, column ``b`` the trial function.
        """
        g = self._grads
        coef = np.asarray(coef, dtype=float)
        if coef.ndim == 2:
            cg = np.einsum("kl,ebl->ebk", coef, g)
        else:
            cg = np.einsum("ekl,ebl->ebk", coef, g)
        return self._measures[:, None, None] * np.einsum("eak,ebk->eab", g, cg)

    def assemble_local(self, local):
        data = np.bincount(self._scatter, weights=local.ravel(), minlength=self._nnz)
        K = sp.csr_matrix(
            (data, self._indices.copy(), self._indptr.copy()), shape=(self.n, self.n)
        )
        K.data[np.abs(K.data) < DROP_TOL] = 0.0
        K.eliminate_zeros()
        return K

    def assemble(self, coef):
        return self.assemble_local(self.local(coef))


def consistent_mass(mesh):
    """Consistent P1 mass matrix."""
    nloc = mesh.dim + 1
    base = (np.ones((nloc, nloc)) + np.eye(nloc)) / (nloc * (nloc + 1))
    local = mesh.measures[:, None, None] * base
    rows = np.repeat(mesh.elements, nloc, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, nloc)).ravel()
    M = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)
    return finalize(M)
