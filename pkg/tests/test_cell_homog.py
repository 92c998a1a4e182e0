import numpy as np
import pytest
from scipy import integrate

from comphomog.cell_homog import (HomogenizedTensor, harmonic_mean_1d, homogenize,
                                  homogenized_tensor, layered_homogenized_2d, solve_cell_problems)
from comphomog.coefficients import (ConstantField, DiagonalField, LayeredField, SinProfile,
                                    StepProfile, TabulatedField, constant, sin1d)
from comphomog.errors import InvalidArgument


def _quad_harmonic(a):
    val, _ = integrate.quad(lambda y: 1.0 / a(y), 0.0, 1.0, limit=200)
    return 1.0 / val


def test_harmonic_constant():
    assert harmonic_mean_1d(2.0).matrix[0, 0] == pytest.approx(2.0)


def test_harmonic_sin_profile_against_quadrature():
    hom = harmonic_mean_1d(SinProfile(2.0, 1.5), n_quad=1024).matrix[0, 0]
    oracle = _quad_harmonic(lambda y: 2.0 + 1.5 * np.sin(2 * np.pi * y))
    assert hom == pytest.approx(oracle, abs=1e-10)
    assert oracle == pytest.approx(np.sqrt(1.75), abs=1e-10)
    assert abs(hom - 1.3229) <= 1e-3


def test_harmonic_step_profile():
    assert harmonic_mean_1d(StepProfile([1.0, 3.0])).matrix[0, 0] == pytest.approx(1.5)


def test_harmonic_rejects():
    with pytest.raises(InvalidArgument):
        harmonic_mean_1d(SinProfile(1.0, 1.5))
    with pytest.raises(InvalidArgument):
        harmonic_mean_1d(2.0, n_quad=8)


def test_layered_constant_entries():
    hom = layered_homogenized_2d(2.0, 0.3, -0.1, 1.5).matrix
    np.testing.assert_allclose(hom, [[2.0, 0.3], [-0.1, 1.5]], atol=1e-14)


def test_layered_sin_example():
    hom = layered_homogenized_2d(SinProfile(2, 1.5), 0.0, 0.0, 2.0).matrix
    np.testing.assert_allclose(hom, [[np.sqrt(1.75), 0], [0, 2]], atol=1e-10)


def test_layered_step_example():
    s = StepProfile([1.0, 2.0])
    hom = layered_homogenized_2d(s, 0.0, 0.0, s).matrix
    np.testing.assert_allclose(hom, [[4 / 3, 0], [0, 1.5]], atol=1e-12)


def test_layered_against_quadrature_oracle():
    a11 = lambda y: 2 + np.sin(2 * np.pi * y)
    a12 = lambda y: 0.5 + 0.3 * np.cos(2 * np.pi * y)
    a21 = lambda y: -0.2 + 0.1 * np.sin(2 * np.pi * y)
    a22 = lambda y: 3 + 0.5 * np.cos(4 * np.pi * y)
    q = lambda f: integrate.quad(f, 0, 1, limit=200)[0]
    h = 1 / q(lambda y: 1 / a11(y))
    oracle = np.array([
        [h, h * q(lambda y: a12(y) / a11(y))],
        [h * q(lambda y: a21(y) / a11(y)),
         h * q(lambda y: a21(y) / a11(y)) * q(lambda y: a12(y) / a11(y))
         + q(lambda y: a22(y) - a12(y) * a21(y) / a11(y))],
    ])
    hom = layered_homogenized_2d(a11, a12, a21, a22, n_quad=1024).matrix
    np.testing.assert_allclose(hom, oracle, rtol=1e-10)


def test_constant_coefficient_cell_solve():
    A = np.array([[2.0, 0.4], [0.4, 1.0]])
    cell = solve_cell_problems(ConstantField(A), 16)
    assert np.abs(cell.correctors).max() < 1e-12
    np.testing.assert_allclose(homogenized_tensor(ConstantField(A), cell).matrix, A, atol=1e-9)


def test_diag_sin_correctors_match_1d_ode():
    coeff = sin1d(2.0, 1.5, dim=2)
    n = 64
    cell = solve_cell_problems(coeff, n)
    y1, y2 = cell.mesh.vertices.T
    w1, w2 = cell.correctors
    assert np.abs(w2).max() < 1e-10
    # independent of y2: compare the two extreme grid lines
    bottom = np.flatnonzero(np.isclose(y2, 0.0))
    top = np.flatnonzero(np.isclose(y2, 0.5))
    np.testing.assert_allclose(w1[bottom], w1[top], atol=1e-10)
    # 1D cell ODE: w' = c / a - 1 with c the harmonic mean, mean zero
    a = lambda s: 2.0 + 1.5 * np.sin(2 * np.pi * s)
    c = np.sqrt(1.75)
    prim = lambda s: integrate.quad(lambda t: c / a(t) - 1.0, 0.0, s, limit=200)[0]
    mean = integrate.quad(prim, 0.0, 1.0, limit=200)[0]
    xs = y1[bottom]
    oracle = np.array([prim(s) for s in xs]) - mean
    assert np.abs(w1[bottom] - oracle).max() < 5e-3


def test_correctors_mean_zero():
    coeff = LayeredField(SinProfile(2, 1), 0.3, 0.3, 2.0)
    cell = solve_cell_problems(coeff, 16)
    m = cell.mesh.lumped_mass
    for w in cell.correctors:
        # boundary copies are duplicates, so integrate with the torus weights
        from comphomog.cell_homog import periodic_fold
        fold = periodic_fold(16)
        mt = np.bincount(fold, weights=m)
        wt = np.zeros(mt.size)
        wt[fold] = w
        assert abs(mt @ wt) <= 1e-10


def test_numeric_diag_sin_tensor():
    hom = homogenize(sin1d(2.0, 1.5, dim=2))  # closed-form route
    np.testing.assert_allclose(hom.matrix, np.diag([np.sqrt(1.75), 2.0]), atol=1e-9)
    num = homogenized_tensor(sin1d(2.0, 1.5, dim=2), solve_cell_problems(sin1d(2.0, 1.5, dim=2), 128))
    np.testing.assert_allclose(num.matrix, np.diag([1.3229, 2.0]), atol=1e-3)


def test_numeric_matches_harmonic_per_axis():
    coeff = DiagonalField([SinProfile(2.0, 1.5), SinProfile(3.0, 1.0)])
    num = homogenized_tensor(coeff, solve_cell_problems(coeff, 128)).matrix
    ref = [harmonic_mean_1d(SinProfile(2.0, 1.5)).matrix[0, 0],
           harmonic_mean_1d(SinProfile(3.0, 1.0)).matrix[0, 0]]
    np.testing.assert_allclose(np.diag(num), ref, atol=1e-3)
    assert abs(num[0, 1]) < 1e-10 and abs(num[1, 0]) < 1e-10


def test_layered_nonsymmetric_numeric_vs_closed_form():
    a11, a12, a21, a22 = SinProfile(2.0, 1.0), SinProfile(0.5, 0.3), SinProfile(-0.2, 0.1), 3.0
    coeff = LayeredField(a11, a12, a21, a22)
    num = homogenized_tensor(coeff, solve_cell_problems(coeff, 64)).matrix
    ref = layered_homogenized_2d(a11, a12, a21, a22).matrix
    assert np.all(np.abs(num - ref) <= 1e-2 * np.abs(ref))


def _isotropic(n_tab=32):
    f = lambda y: (2 + np.sin(2 * np.pi * y[..., 0]) * np.cos(2 * np.pi * y[..., 1]))
    return TabulatedField.from_function(lambda y: f(y)[..., None, None] * np.eye(2), n_tab, 2), f


def test_voigt_reuss_bracketing():
    coeff, f = _isotropic()
    hom = homogenized_tensor(coeff, solve_cell_problems(coeff, 32)).matrix
    mesh = solve_cell_problems(coeff, 32).mesh
    vals = coeff.eval_cell(mesh.barycenters)[:, 0, 0]
    arith = mesh.measures @ vals
    harm = 1.0 / (mesh.measures @ (1.0 / vals))
    for i in range(2):
        assert harm - 1e-10 <= hom[i, i] <= arith + 1e-10


def test_symmetric_input_symmetric_output():
    coeff, _ = _isotropic()
    hom = homogenized_tensor(coeff, solve_cell_problems(coeff, 16)).matrix
    assert abs(hom[0, 1] - hom[1, 0]) <= 1e-10


def test_refinement_consistency():
    coeff = sin1d(2.0, 1.5, dim=2)
    vals = [homogenized_tensor(coeff, solve_cell_problems(coeff, n)).matrix[0, 0]
            for n in (8, 16, 32, 64)]
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] < diffs[:-1])
    # Richardson extrapolation of the O(h^2) sequence
    extrap = vals[-1] + (vals[-1] - vals[-2]) / 3
    assert extrap == pytest.approx(np.sqrt(1.75), abs=1e-3)


def test_cell_solve_preconditions():
    with pytest.raises(InvalidArgument):
        solve_cell_problems(constant(2.0, dim=1), 16)
    with pytest.raises(InvalidArgument):
        solve_cell_problems(constant(2.0, dim=2), 3)


def test_tensor_positive_definite_check():
    assert HomogenizedTensor(np.diag([1.0, 2.0]), "constant").is_positive_definite()
    assert not HomogenizedTensor(np.array([[1.0, 0.0], [0.0, -1.0]]), "constant").is_positive_definite()
    text = HomogenizedTensor(np.eye(2), "constant").format()
    assert text.splitlines()[-1] == "provenance: constant"


def test_homogenize_routes():
    assert homogenize(constant(2.0)).provenance == "constant"
    assert homogenize(sin1d(2, 1.5)).provenance == "harmonic-1d"
    assert homogenize(LayeredField(SinProfile(2, 1), 0.0, 0.0, 2.0)).provenance == "layered-2d"
    coeff, _ = _isotropic(8)
    assert homogenize(coeff, n=8).provenance == "numeric-cell-solve"
