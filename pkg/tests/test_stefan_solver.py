import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from comphomog.assembly import StiffnessAssembler
from comphomog.errors import InvalidArgument, NumericalError
from comphomog.mesh import build_crisscross_mesh, build_interval_mesh
from comphomog.stefan_solver import (EnthalpyModel, EnthalpyState, StefanStepper, diffusion_select,
                                     initial_enthalpy, phi, phi_reg, phi_reg_inverse,
                                     recover_fields, run_stefan, stefan_step)

MESH = build_interval_mesh(200)
X = MESH.vertices[:, 0]
MODEL = EnthalpyModel(1.0, [[np.sqrt(1.75)]], [[2.0]])


def test_phi_branches():
    assert phi(-0.3, 1.0) == pytest.approx(-0.3)
    assert phi(0.5, 1.0) == 0.0
    assert phi(1.5, 1.0) == pytest.approx(0.5)
    s = np.linspace(-2, 2, 41)
    np.testing.assert_array_equal(phi(s, 0.0), s)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(0, 3), st.floats(1e-4, 1))
def test_phi_reg_inverse_roundtrip(s, lam, sigma):
    p = phi_reg(s, lam, sigma)
    z, dz = phi_reg_inverse(p, lam, sigma)
    assert z == pytest.approx(s, abs=1e-9 * max(1.0, 1 / sigma))
    assert dz >= 1.0
    # regularisation only touches the plateau
    assert abs(p - phi(s, lam)) <= sigma * lam + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 3))
def test_phi_reg_strictly_increasing(a, b, lam):
    if a < b:
        assert phi_reg(a, lam, 1e-3) < phi_reg(b, lam, 1e-3)


def test_diffusion_select():
    model = EnthalpyModel(1.0, np.diag([1.0, 2.0]), 3 * np.eye(2))
    np.testing.assert_array_equal(diffusion_select(1.0, model), np.diag([1.0, 2.0]))
    np.testing.assert_array_equal(diffusion_select(-1.0, model), 3 * np.eye(2))
    np.testing.assert_array_equal(diffusion_select(0.0, model), np.diag([2.0, 2.5]))


def test_model_validation():
    with pytest.raises(InvalidArgument):
        EnthalpyModel(-1.0, [[1.0]], [[1.0]])
    with pytest.raises(InvalidArgument):
        EnthalpyModel(1.0, [[-1.0]], [[1.0]])
    with pytest.raises(InvalidArgument):
        EnthalpyModel(1.0, [[1.0]], [[1.0]], sigma_reg=0.0)


def test_recover_examples():
    f = recover_fields(EnthalpyState(0, np.array([1.5, -0.2, 0.5])), MODEL, 1.1)
    np.testing.assert_allclose(f.u_star, [0.5, 0.0, 0.0])
    np.testing.assert_allclose(f.v_star, [0.0, 0.22, 0.0])
    np.testing.assert_allclose(f.w_star, [1.0, 0.0, 0.5])
    lam0 = EnthalpyModel(0.0, [[1.0]], [[1.0]])
    f0 = recover_fields(EnthalpyState(0, np.array([0.3, -0.3, 0.0])), lam0, 2.0)
    np.testing.assert_allclose(f0.w_star, [1.0, 0.0, 0.0])
    with pytest.raises(InvalidArgument):
        recover_fields(EnthalpyState(0, np.zeros(2)), MODEL, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.floats(0, 2), st.floats(0.1, 5))
def test_recover_segregation_and_bounds(zs, lam, alpha):
    model = EnthalpyModel(lam, [[1.0]], [[1.0]])
    f = recover_fields(EnthalpyState(0, np.array(zs)), model, alpha)
    assert np.all(f.u_star * f.v_star == 0)
    assert np.all(f.u_star >= 0) and np.all(f.v_star >= 0)
    assert np.all((0 <= f.w_star) & (f.w_star <= 1))
    # the recovery inverts the definition of Z
    np.testing.assert_allclose(initial_enthalpy(f.u_star, f.v_star, f.w_star, alpha, lam), zs,
                               atol=1e-12)


def test_plateau_fixed_point():
    s = stefan_step(EnthalpyState(0.0, np.full(MESH.n_vertices, 0.5)), MODEL, MESH, 1e-3)
    np.testing.assert_allclose(s.Z, 0.5, atol=1e-12)


def test_constant_u_phase_fixed_point():
    s = stefan_step(EnthalpyState(0.0, np.full(MESH.n_vertices, 1.7)), MODEL, MESH, 1e-3)
    np.testing.assert_allclose(s.Z, 1.7, atol=1e-12)


def test_one_step_conservation_two_phase():
    Z0 = np.where(X < 0.5, 2.0, -1.0)
    s = stefan_step(EnthalpyState(0.0, Z0), MODEL, MESH, 1e-3)
    m = MESH.lumped_mass
    # direct summation oracle
    before = sum(mi * zi for mi, zi in zip(m, Z0))
    after = sum(mi * zi for mi, zi in zip(m, s.Z))
    assert abs(after - before) <= 1e-10 * abs(before)
    assert not np.allclose(s.Z, Z0)


@pytest.mark.parametrize("mesh", [MESH, build_crisscross_mesh(12)], ids=["1d", "2d"])
def test_linear_heat_limit(mesh):
    D = np.eye(mesh.dim) * 1.5
    model = EnthalpyModel(0.0, D, D)
    x = mesh.vertices[:, 0]
    Z0 = np.cos(np.pi * x) + 0.2
    tau = 1e-2
    s = stefan_step(EnthalpyState(0.0, Z0), model, mesh, tau)
    K = StiffnessAssembler(mesh).assemble(D)
    m = mesh.lumped_mass
    import scipy.sparse as sp

    ref = spla.spsolve((sp.diags(m / tau) + K).tocsc(), m * Z0 / tau)
    np.testing.assert_allclose(s.Z, ref, atol=1e-10)


def test_regularisation_cauchy():
    Z0 = np.where(X < 0.5, 2.0, -1.0)
    sols = []
    for sigma in (8e-3, 4e-3, 2e-3, 1e-3):
        model = EnthalpyModel(1.0, [[np.sqrt(1.75)]], [[2.0]], sigma_reg=sigma)
        sols.append(run_stefan(MESH, model, Z0, 1e-3, 0.05).states[-1].Z)
    m = MESH.lumped_mass
    gaps = [np.sqrt(m @ (a - b) ** 2) for a, b in zip(sols, sols[1:])]
    assert gaps[0] > gaps[1] > gaps[2]


def test_newton_failure_reports_trace():
    stepper = StefanStepper(MESH, MODEL, max_newton=0)
    with pytest.raises(NumericalError) as info:
        stepper.step(EnthalpyState(0.0, np.where(X < 0.5, 2.0, -1.0)), 1e-3)
    assert len(info.value.report.residuals) == 1


def test_bad_tau():
    with pytest.raises(InvalidArgument):
        stefan_step(EnthalpyState(0.0, np.zeros(MESH.n_vertices)), MODEL, MESH, 0.0)


def test_run_records():
    Z0 = np.where(X < 0.5, 2.0, -1.0)
    traj = run_stefan(MESH, MODEL, Z0, 1e-3, 0.01, record_steps_list=[0, 5, 10])
    assert traj.times == [0.0, pytest.approx(0.005), pytest.approx(0.01)]
    assert traj.at(0.005).Z.shape == Z0.shape
