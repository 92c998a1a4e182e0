import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from comphomog.errors import InvalidArgument, NumericalError
from comphomog.linalg import (cg_solve, diagonal_positions, factorized_preconditioner,
                              finalize, from_dense, spmv)


def test_cg_identity():
    x, rep = cg_solve(sp.identity(3, format="csr"), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(x, [1, 2, 3])
    assert rep.converged and rep.iterations <= 1


def test_cg_two_by_two():
    A = from_dense([[4.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    x, rep = cg_solve(A, b, preconditioner="none")
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), b), rtol=1e-12)
    np.testing.assert_allclose(x, [1 / 11, 7 / 11], rtol=1e-12)


def test_cg_tridiagonal():
    A = from_dense([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    x, _ = cg_solve(A, np.array([0.0, 1.0, 0.0]))
    np.testing.assert_allclose(x, [0.5, 1.0, 0.5], rtol=1e-12)


def test_cg_zero_rhs():
    x, rep = cg_solve(sp.identity(4, format="csr") * 2.0, np.zeros(4))
    assert rep.converged and np.all(x == 0)


def test_cg_dimension_mismatch():
    with pytest.raises(InvalidArgument):
        cg_solve(sp.identity(3, format="csr"), np.ones(4))


def test_cg_indefinite_breakdown():
    A = from_dense([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(NumericalError):
        cg_solve(A, np.array([0.0, 1.0]), preconditioner="none")


def test_cg_reports_nonconvergence():
    n = 200
    A = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n), format="csr")
    _, rep = cg_solve(A, np.ones(n), tol=1e-14, max_iter=3, preconditioner="none")
    assert not rep.converged and rep.iterations == 3


def _spd(seed, n):
    rng = np.random.default_rng(seed)
    B = sp.random(n, n, density=0.2, random_state=rng)
    return finalize(B @ B.T + sp.identity(n) * n * 0.1), rng.standard_normal(n)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40), st.sampled_from(["jacobi", "none"]))
def test_cg_residual_contract(seed, n, pre):
    A, b = _spd(seed, n)
    tol = 1e-10
    x, rep = cg_solve(A, b, tol=tol, preconditioner=pre)
    assert rep.converged
    assert np.linalg.norm(A @ x - b) <= tol * np.linalg.norm(b)


def test_cg_factorized_preconditioner_converges_fast():
    n = 500
    K = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n), format="csr")
    S = finalize(K + sp.identity(n) * 0.01)
    pre = factorized_preconditioner(S)
    x, rep = cg_solve(S, np.ones(n), preconditioner=pre)
    assert rep.converged and rep.iterations <= 2


def test_cg_deterministic():
    A, b = _spd(3, 30)
    x1, _ = cg_solve(A, b)
    x2, _ = cg_solve(A, b)
    assert np.array_equal(x1, x2)


def test_spmv_examples():
    np.testing.assert_array_equal(spmv(sp.identity(3, format="csr"), np.array([1.0, 2, 3])), [1, 2, 3])
    np.testing.assert_array_equal(spmv(sp.csr_matrix((2, 2)), np.ones(2)), [0, 0])
    np.testing.assert_array_equal(spmv(from_dense([[2.0, 0], [0, 3.0]]), np.ones(2)), [2, 3])


def test_spmv_mismatch():
    with pytest.raises(InvalidArgument):
        spmv(sp.identity(3, format="csr"), np.ones(2))


def test_finalize_storage_invariants():
    A = sp.csr_matrix((np.array([1.0, 1e-310, 2.0, 0.0]), (np.array([0, 0, 1, 1]), np.array([1, 0, 1, 0]))),
                      shape=(2, 2))
    F = finalize(A)
    assert np.all(np.abs(F.data) >= 1e-300)
    for i in range(2):
        cols = F.indices[F.indptr[i]:F.indptr[i + 1]]
        assert np.all(np.diff(cols) > 0)


def test_diagonal_positions():
    A = from_dense([[4.0, 1.0, 0.0], [1.0, 3.0, 2.0], [0.0, 2.0, 5.0]])
    pos = diagonal_positions(A)
    np.testing.assert_array_equal(A.data[pos], [4, 3, 5])
