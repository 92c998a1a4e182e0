"""IMEX Euler / P1 time stepping of the oscillating competition-diffusion system.

Diffusion is implicit, reactions are lagged. Each step solves two
decoupled SPD systems for u and v and a nodal closed form for w.
"""
import re
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import StiffnessAssembler, consistent_mass
from .errors import InvalidArgument, NumericalError, ReduceTimestepError
from .linalg import cg_solve, diagonal_positions, factorized_preconditioner
from . import diagnostics as diag

REFACTOR_ITERS = 20


@dataclass(frozen=True)
class SimParams:
    eps: float
    alpha: float
    lam: float
    r: float = 0.0
    tau: float = 1e-3
    t_end: float = 0.6
    delta: float = None
    mass_lumping: bool = True
    cg_tol: float = 1e-10
    preconditioner: str = "factorized"
    w_update: str = "updated"

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", self.eps)
        for name in ("eps", "delta", "alpha", "tau", "t_end"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("lam", "r"):
            if not getattr(self, name) >= 0:
                raise InvalidArgument(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.preconditioner not in ("factorized", "jacobi", "none"):
            raise InvalidArgument(f"unknown preconditioner {self.preconditioner!r}")
        if self.w_update not in ("updated", "lagged"):
            raise InvalidArgument(f"w_update must be 'updated' or 'lagged', got {self.w_update!r}")
        if self.t_end < self.tau:
            raise InvalidArgument("t_end must be at least one time step")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.tau))


@dataclass
class FieldState:
    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def copy(self):
        return FieldState(self.t, self.u.copy(), self.v.copy(), self.w.copy())


@dataclass
class Operators:
    """Matrices of one (mesh, coefficients, eps) combination.

    ``m`` is the lumped mass vector. ``M`` is the mass matrix actually used
    for time derivatives: diagonal when lumping, consistent otherwise.
    """

    mesh: object
    m: np.ndarray
    M: sp.csr_matrix
    K_A: sp.csr_matrix
    K_B: sp.csr_matrix
    lumped: bool

    def __post_init__(self):
        self._base = {}

    def system(self, which, tau):
        """Copy of the base matrix for ``which`` and its diagonal slots.

        For lumped mass the base is ``K`` alone (``M/tau`` is added together
        with the reaction diagonal); otherwise it is ``K + M/tau``.
        """
        key = (which, tau)
        if key not in self._base:
            K = self.K_A if which == "A" else self.K_B
            base = K.copy() if self.lumped else (K + self.M / tau).tocsr()
            base.sort_indices()
            self._base[key] = (base, diagonal_positions(base))
        base, pos = self._base[key]
        return base.copy(), pos

    def preconditioner(self, which, tau, kind, S):
        """Preconditioner for the system ``S`` about to be solved.

        ``"factorized"`` keeps an exact factorization of an earlier system
        matrix. The matrices differ between steps only in their reaction
        diagonal, so the old factors stay an excellent preconditioner; they
        are rebuilt from the current ``S`` once CG needed more than
        ``REFACTOR_ITERS`` iterations with them.
        """
        if kind != "factorized":
            return kind
        key = ("P", which, tau)
        entry = self._base.get(key)
        if entry is None or entry[1]:
            entry = [factorized_preconditioner(S), False]
            self._base[key] = entry
        return entry[0]

    def note_iterations(self, which, tau, iterations):
        entry = self._base.get(("P", which, tau))
        if entry is not None and iterations > REFACTOR_ITERS:
            entry[1] = True


# --- initial data -----------------------------------------------------------

_DESCRIPTOR = re.compile(r"^\s*([a-z0-9-]+)\s*\((.*)\)\s*$")


def _parse_descriptor(text):
    match = _DESCRIPTOR.match(text)
    if not match:
        raise InvalidArgument(f"cannot parse initial condition {text!r}")
    name, args = match.groups()
    return name, [a.strip() for a in args.split(",")] if args.strip() else []


def set_initial_data(mesh, descriptor):
    """Nodal interpolation of an initial condition descriptor.

    Supported: ``step-1d(threshold)``, ``sine-front-2d(amplitude, threshold)``,
    ``uniform(cu, cv, cw)``, ``file(path)``.
    """
    name, args = _parse_descriptor(descriptor)
    x = mesh.vertices
    if name == "step-1d":
        thr = float(args[0]) if args else 0.5
        u = (x[:, 0] < thr).astype(float)
        v = 1.0 - u
        w = u.copy()
    elif name == "sine-front-2d":
        if mesh.dim != 2:
            raise InvalidArgument("sine-front-2d needs a 2D mesh")
        amp, thr = (float(a) for a in args) if args else (0.1, 0.5)
        u = (x[:, 0] + amp * np.sin(2.0 * np.pi * x[:, 1]) < thr).astype(float)
        v = 1.0 - u
        w = u.copy()
    elif name == "uniform":
        cu, cv, cw = (float(a) for a in args)
        n = mesh.n_vertices
        u, v, w = np.full(n, cu), np.full(n, cv), np.full(n, cw)
    elif name == "file":
        data = np.loadtxt(args[0], ndmin=2)
        if data.shape != (mesh.n_vertices, mesh.dim + 3):
            raise InvalidArgument(
                f"{args[0]}: expected {mesh.n_vertices} rows of {mesh.dim + 3} columns"
            )
        u, v, w = (data[:, mesh.dim + k].copy() for k in range(3))
    else:
        raise InvalidArgument(f"unknown initial condition {name!r}")
    return FieldState(0.0, u, v, w)


# --- operators --------------------------------------------------------------

def assemble_operators(mesh, coeffA, coeffB, eps, lumping=True):
    """Mass and stiffness matrices with ``A(x/eps)`` sampled at barycentres."""
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    if mesh.h > eps / 8 and not (coeffA.is_constant and coeffB.is_constant):
        warnings.warn(
            f"mesh size {mesh.h:.3g} does not resolve eps={eps:g} (h > eps/8)",
            stacklevel=2,
        )
    asm = StiffnessAssembler(mesh)
    bc = mesh.barycenters
    K_A = asm.assemble(coeffA.eval_eps(bc, eps))
    K_B = asm.assemble(coeffB.eval_eps(bc, eps))
    m = mesh.lumped_mass.copy()
    M = sp.diags(m, format="csr") if lumping else consistent_mass(mesh)
    return Operators(mesh, m, M, K_A, K_B, lumping)


# --- time stepping ----------------------------------------------------------

def _implicit_solve(ops, which, coef, rhs_field, guess, params, t):
    """Solve ``(M/tau + K + m*coef) X = M rhs_field / tau``."""
    tau = params.tau
    if np.any(1.0 / tau + coef <= 0):
        bad = int(np.argmin(coef))
        raise ReduceTimestepError(
            f"reaction diagonal for {which} not positive at node {bad} "
            f"(coefficient {coef[bad]:g}, 1/tau={1 / tau:g}); reduce tau",
            t=t,
        )
    S, pos = ops.system("A" if which == "u" else "B", tau)
    if ops.lumped:
        S.data[pos] += ops.m * (1.0 / tau + coef)
        rhs = ops.m * rhs_field / tau
    else:
        S.data[pos] += ops.m * coef
        rhs = ops.M @ rhs_field / tau
    key = "A" if which == "u" else "B"
    pre = ops.preconditioner(key, tau, params.preconditioner, S)
    x, report = cg_solve(S, rhs, tol=params.cg_tol, x0=guess, preconditioner=pre)
    ops.note_iterations(key, tau, report.iterations)
    if not report.converged:
        raise NumericalError(f"{which}-solve did not converge", report=report, t=t)
    return x


def imex_step(state, params, ops):
    """Advance ``state`` by one time step ``params.tau``.

    The nodal w-equation is treated implicitly in w,
    ``W' = (W + q U*) / (1 + q (U* + V*))`` with ``q = tau / delta``, which
    keeps ``0 <= W' <= 1``. ``U*, V*`` are the freshly computed levels
    (``w_update="updated"``) or the previous ones (``"lagged"``).
    """
    u, v, w = state.u, state.v, state.w
    dl = params.delta
    cu = (v + params.lam * (1.0 - w)) / dl - params.r * (1.0 - u)
    cv = params.alpha * (u + params.lam * w) / dl - params.r * (1.0 - v)
    t_new = state.t + params.tau
    u_new = _implicit_solve(ops, "u", cu, u, u, params, t_new)
    v_new = _implicit_solve(ops, "v", cv, v, v, params, t_new)
    q = params.tau / dl
    if params.w_update == "updated":
        us, vs = u_new, v_new
    else:
        us, vs = u, v
    w_new = (w + q * us) / (1.0 + q * (us + vs))
    return FieldState(t_new, u_new, v_new, w_new)


@dataclass
class Trajectory:
    """Recorded states plus per-record diagnostics rows."""

    states: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    seg_total: float = 0.0

    @property
    def times(self):
        return [s.t for s in self.states]

    def at(self, t, tol=1e-9):
        for s in self.states:
            if abs(s.t - t) <= tol:
                return s
        raise KeyError(t)


def record_steps(params, record_interval):
    """Step indices at which a snapshot is taken (always 0 and the last)."""
    n = params.n_steps
    steps = {0, n}
    if record_interval:
        stride = record_interval / params.tau
        k = 1
        while True:
            s = int(round(k * stride))
            if s >= n:
                break
            steps.add(s)
            k += 1
    return sorted(steps)


def diagnostics_row(state, params, ops, u_bound=None, v_bound=None):
    rep = diag.bounds_report(state, u_bound, v_bound)
    return {
        "t": state.t,
        "Q": diag.conserved_quantity(state, params.alpha, params.lam, ops.m),
        "min_u": rep.min_u,
        "max_u": rep.max_u,
        "min_v": rep.min_v,
        "max_v": rep.max_v,
        "min_w": rep.min_w,
        "max_w": rep.max_w,
        "seg": diag.segregation_norm(state, ops.m),
        "bounds_ok": rep.passed,
    }


def field_bounds(init, params):
    """Maximum-principle ceilings for u and v."""
    ub = float(np.max(init.u, initial=0.0))
    vb = float(np.max(init.v, initial=0.0))
    if params.r > 0:
        ub, vb = max(ub, 1.0), max(vb, 1.0)
    return ub, vb


def run_simulation(mesh, coeffA, coeffB, params, init, record_interval=0.1,
                   recorder=None, ops=None):
    """Integrate from ``init`` to ``params.t_end``.

    ``recorder(state, row)`` is called at every recorded step. Returns a
    :class:`Trajectory`; ``seg_total`` is the space-time integral of u*v
    (rectangle rule over the new time levels).
    """
    if init.u.shape[0] != mesh.n_vertices:
        raise InvalidArgument("initial data does not match the mesh")
    if ops is None:
        ops = assemble_operators(mesh, coeffA, coeffB, params.eps, params.mass_lumping)
    ub, vb = field_bounds(init, params)
    steps = set(record_steps(params, record_interval))
    traj = Trajectory()
    state = init.copy()
    state.t = 0.0

    def record(s):
        row = diagnostics_row(s, params, ops, ub, vb)
        traj.states.append(s.copy())
        traj.rows.append(row)
        if recorder is not None:
            recorder(s, row)

    record(state)
    for l in range(1, params.n_steps + 1):
        try:
            state = imex_step(state, params, ops)
        except NumericalError as exc:
            exc.t = l * params.tau
            raise
        state.t = l * params.tau
        traj.seg_total += params.tau * diag.segregation_norm(state, ops.m)
        if l in steps:
            record(state)
    return traj
