"""Enthalpy solver for the homogenized two-phase limit problem.

Unknown is the conserved variable ``Z = u - v/alpha + lam*w``. Each step
solves ``M (Z' - Z) / tau + K_D phi(Z') = 0`` with lumped ``M`` and a
stiffness ``K_D`` whose per-element tensor is frozen at the sign of
``phi(Z)`` from the previous level.

Newton runs in the variable ``P = phi_s(Z')``, where ``phi_s`` is the
truncation with its plateau given slope ``sigma_reg``. Its inverse ``beta``
is monotone and piecewise linear, so the Jacobian
``diag(m beta'(P) / tau) + K_D`` is symmetric positive definite and CG
applies. The new enthalpy is then formed as ``Z - tau M^{-1} K_D P``, which
conserves ``sum(M Z)`` independently of solver tolerances.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import StiffnessAssembler
from .cell_homog import HomogenizedTensor
from .errors import InvalidArgument, NumericalError
from .linalg import cg_solve, factorized_preconditioner


def phi(s, lam):
    """Truncation map: ``s`` below 0, 0 on ``[0, lam]``, ``s - lam`` above."""
    s = np.asarray(s, dtype=float)
    return np.where(s < 0, s, np.where(s > lam, s - lam, 0.0))


def phi_reg(s, lam, sigma):
    """``phi`` with plateau slope ``sigma`` (continuous, strictly increasing)."""
    s = np.asarray(s, dtype=float)
    if lam == 0:
        return s.copy()
    return np.where(s < 0, s, np.where(s > lam, s - lam + sigma * lam, sigma * s))


def phi_reg_inverse(p, lam, sigma):
    """Inverse of :func:`phi_reg` and its derivative."""
    p = np.asarray(p, dtype=float)
    if lam == 0:
        return p.copy(), np.ones_like(p)
    top = sigma * lam
    z = np.where(p < 0, p, np.where(p > top, p + lam - top, p / sigma))
    dz = np.where((p >= 0) & (p <= top), 1.0 / sigma, 1.0)
    return z, dz


def _matrix(t):
    return t.matrix if isinstance(t, HomogenizedTensor) else np.atleast_2d(np.asarray(t, float))


@dataclass
class EnthalpyModel:
    lam: float
    A_hom: object
    B_hom: object
    sigma_reg: float = 1e-3

    def __post_init__(self):
        self.A_hom = _matrix(self.A_hom)
        self.B_hom = _matrix(self.B_hom)
        if self.lam < 0:
            raise InvalidArgument("lam must be non-negative")
        if not 0 < self.sigma_reg <= 1:
            raise InvalidArgument("sigma_reg must lie in (0, 1]")
        for name, m in (("A_hom", self.A_hom), ("B_hom", self.B_hom)):
            if not HomogenizedTensor(m, "input").is_positive_definite():
                raise InvalidArgument(f"{name} is not positive definite")


def diffusion_select(s, model):
    """``A_hom`` for s > 0, ``B_hom`` for s < 0, their mean at s == 0."""
    if s > 0:
        return model.A_hom
    if s < 0:
        return model.B_hom
    return 0.5 * (model.A_hom + model.B_hom)


@dataclass
class EnthalpyState:
    t: float
    Z: np.ndarray


@dataclass
class StefanFields:
    u_star: np.ndarray
    v_star: np.ndarray
    w_star: np.ndarray


def recover_fields(state, model, alpha):
    """Segregated densities from the enthalpy.

    ``u = phi(Z)_+``, ``v = alpha * phi(Z)_-`` and ``w`` is the plateau
    fraction ``(Z - phi(Z)) / lam`` (the indicator of ``Z > 0`` if lam = 0).
    """
    if not alpha > 0:
        raise InvalidArgument("alpha must be positive")
    Z = state.Z
    p = phi(Z, model.lam)
    u = np.maximum(p, 0.0)
    v = alpha * np.maximum(-p, 0.0)
    if model.lam > 0:
        w = np.clip((Z - p) / model.lam, 0.0, 1.0)
    else:
        w = (Z > 0).astype(float)
    return StefanFields(u, v, w)


@dataclass
class NewtonTrace:
    residuals: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)


class StefanStepper:
    """Caches mesh geometry and per-element tensors for repeated steps."""

    def __init__(self, mesh, model, newton_tol=1e-10, max_newton=50, cg_tol=1e-10):
        self.mesh = mesh
        self.model = model
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        self.cg_tol = cg_tol
        self.m = mesh.lumped_mass
        self._asm = StiffnessAssembler(mesh)
        self._loc_A = self._asm.local(model.A_hom)
        self._loc_B = self._asm.local(model.B_hom)
        self.last_trace = None

    def stiffness(self, Z):
        """``K_D`` with the tensor chosen per element from ``phi(Z)``."""
        p = phi(Z, self.model.lam)
        s = p[self.mesh.elements].mean(axis=1)
        wa = np.where(s > 0, 1.0, np.where(s < 0, 0.0, 0.5))
        local = wa[:, None, None] * self._loc_A + (1.0 - wa)[:, None, None] * self._loc_B
        return self._asm.assemble_local(local)

    def step(self, state, tau):
        if not tau > 0:
            raise InvalidArgument("tau must be positive")
        lam, sig = self.model.lam, self.model.sigma_reg
        Z0 = state.Z
        m = self.m
        K = self.stiffness(Z0)
        P = phi_reg(Z0, lam, sig)
        scale = np.linalg.norm(m * Z0) / tau + np.linalg.norm(K @ P) + 1e-300
        trace = NewtonTrace()
        for it in range(self.max_newton + 1):
            z, dz = phi_reg_inverse(P, lam, sig)
            F = m * (z - Z0) / tau + K @ P
            res = np.linalg.norm(F) / scale
            trace.residuals.append(res)
            if res <= self.newton_tol:
                break
            if it == self.max_newton:
                self.last_trace = trace
                raise NumericalError(
                    f"Newton did not converge in {self.max_newton} iterations "
                    f"(residuals {trace.residuals[-5:]})",
                    report=trace, t=state.t + tau,
                )
            J = (K + sp.diags(m * dz / tau)).tocsr()
            pre = factorized_preconditioner(J) if self.mesh.dim == 1 else "jacobi"
            dP, rep = cg_solve(J, -F, tol=self.cg_tol, preconditioner=pre)
            trace.cg_iterations.append(rep.iterations)
            if not rep.converged:
                raise NumericalError(f"Newton linear solve did not converge: {rep}", report=rep,
                                     t=state.t + tau)
            P = self._damped(P, dP, Z0, K, tau, res * scale)
        self.last_trace = trace
        Z1 = Z0 - tau * (K @ P) / m
        return EnthalpyState(state.t + tau, Z1)

    def _damped(self, P, dP, Z0, K, tau, fnorm):
        """Full Newton step unless it fails to reduce the residual."""
        lam, sig, m = self.model.lam, self.model.sigma_reg, self.m
        step = 1.0
        for _ in range(30):
            trial = P + step * dP
            z, _ = phi_reg_inverse(trial, lam, sig)
            if np.linalg.norm(m * (z - Z0) / tau + K @ trial) < fnorm or step < 1e-6:
                return trial
            step *= 0.5
        return P + step * dP


def stefan_step(state, model, mesh, tau, stepper=None):
    """One implicit step of the enthalpy problem (see :class:`StefanStepper`)."""
    stepper = stepper or StefanStepper(mesh, model)
    return stepper.step(state, tau)


@dataclass
class StefanTrajectory:
    states: list = field(default_factory=list)

    @property
    def times(self):
        return [s.t for s in self.states]

    def at(self, t, tol=1e-9):
        for s in self.states:
            if abs(s.t - t) <= tol:
                return s
        raise KeyError(t)


def initial_enthalpy(u, v, w, alpha, lam):
    """``Z = u - v/alpha + lam*w`` from species densities."""
    return np.asarray(u) - np.asarray(v) / alpha + lam * np.asarray(w)


def run_stefan(mesh, model, Z0, tau, t_end, record_steps_list=None, recorder=None):
    """Integrate the enthalpy problem; record at the given step indices."""
    n_steps = int(round(t_end / tau))
    steps = set(record_steps_list or [0, n_steps])
    stepper = StefanStepper(mesh, model)
    state = EnthalpyState(0.0, np.array(Z0, dtype=float))
    traj = StefanTrajectory()

    def record(s):
        traj.states.append(EnthalpyState(s.t, s.Z.copy()))
        if recorder is not None:
            recorder(s)

    if 0 in steps:
        record(state)
    for l in range(1, n_steps + 1):
        state = stepper.step(state, tau)
        state.t = l * tau
        if l in steps:
            record(state)
    return traj
