"""Scenario runner: eps simulations, enthalpy runs, comparisons and sweeps.

All file output of the package happens here. Field snapshots are plain
text (``# t=<time> ...`` header, one row per vertex), time series are CSV.
"""
import csv
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .cell_homog import homogenize, solve_cell_problems, homogenized_tensor
from .config import parse_coefficient
from .eps_solver import (FieldState, SimParams, assemble_operators, record_steps,
                         run_simulation, set_initial_data)
from .errors import ConfigError, InvalidArgument, NumericalError
from .mesh import build_crisscross_mesh, build_interval_mesh
from .stefan_solver import EnthalpyModel, initial_enthalpy, recover_fields, run_stefan

DIAG_COLUMNS = ["t", "Q", "min_u", "max_u", "min_v", "max_v", "min_w", "max_w", "seg"]
FRONT_COLUMNS = ["t", "x2", "front_x1"]
SWEEP_COLUMNS = ["eps", "front_end", "seg_total", "l2_to_stefan"]
COMPARE_COLUMNS = ["t", "l2_u", "l2_v", "l2"]


@dataclass
class ScenarioResult:
    mode: str
    summary: str
    files: list = field(default_factory=list)
    data: dict = field(default_factory=dict)


# --- building blocks --------------------------------------------------------

def build_mesh(cfg):
    n = cfg["mesh.n"]
    return build_interval_mesh(n) if cfg.dim == 1 else build_crisscross_mesh(n)


def build_coefficients(cfg):
    try:
        A = parse_coefficient(cfg["coefficients.A"], cfg.dim, cfg.base_dir)
        B = parse_coefficient(cfg["coefficients.B"], cfg.dim, cfg.base_dir)
    except InvalidArgument as exc:
        raise ConfigError(f"coefficients: {exc}") from None
    return A, B


def sim_params(cfg, eps=None):
    kw = cfg.sim_params_kwargs()
    if eps is not None:
        kw["eps"] = eps
    try:
        return SimParams(**kw)
    except InvalidArgument as exc:
        raise ConfigError(f"params: {exc}") from None


def initial_state(cfg, mesh):
    init = cfg["run.init"]
    if init.startswith("file(") and not Path(init[5:-1].strip()).is_absolute():
        init = f"file({cfg.base_dir / init[5:-1].strip()})"
    try:
        return set_initial_data(mesh, init)
    except (InvalidArgument, OSError) as exc:
        raise ConfigError(f"run.init: {exc}") from None


def homogenized_model(cfg, A, B):
    n, nq = cfg["cell.n"], cfg["cell.n_quad"]
    return EnthalpyModel(cfg["params.lam"], homogenize(A, n, nq), homogenize(B, n, nq),
                         cfg["stefan.sigma_reg"])


def output_dir(cfg):
    out = Path(cfg["run.output"])
    if not out.is_absolute():
        out = Path.cwd() / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def snapshot_name(t):
    return f"snap_t{t:.4f}.txt"


def write_snapshot(path, mesh, t, columns, names, kind):
    n = mesh.grid_shape[0] if mesh.grid_shape else mesh.n_elements
    header = f"t={t:.10g} dim={mesh.dim} n={n} kind={kind}\n"
    header += " ".join(["x", "y"][: mesh.dim] + names)
    data = np.column_stack([mesh.vertices] + list(columns))
    np.savetxt(path, data, fmt="%.12g", header=header)


def read_snapshot(path):
    """Return ``(meta, data)`` of a snapshot written by :func:`write_snapshot`."""
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# t="):
        raise InvalidArgument(f"{path} is not a snapshot file")
    meta = dict(tok.split("=", 1) for tok in first[1:].split())
    return meta, np.loadtxt(path, ndmin=2)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.12g}"


def front_rows(curves):
    rows = []
    for c in curves:
        rows.extend((c.t, a, b) for a, b in zip(c.x2, c.x1))
    return rows


def front_summary(curve):
    if curve.empty:
        return "none"
    return f"{curve.position:.6g}" if curve.dim == 1 else f"{curve.mean_x1:.6g} (mean x1)"


# --- modes ------------------------------------------------------------------

def run_eps(cfg, write=True):
    mesh = build_mesh(cfg)
    A, B = build_coefficients(cfg)
    params = sim_params(cfg)
    init = initial_state(cfg, mesh)
    out = output_dir(cfg) if write else None
    curves, files = [], []

    def recorder(state, row):
        curves.append(diag.front_position(state, mesh))
        if out is not None and cfg["run.write_snapshots"]:
            p = out / snapshot_name(state.t)
            write_snapshot(p, mesh, state.t, [state.u, state.v, state.w], ["u", "v", "w"], "eps")
            files.append(p)

    traj = run_simulation(mesh, A, B, params, init, cfg["run.record_interval"], recorder)
    diag.front_velocity(curves)
    if out is not None:
        write_csv(out / "diagnostics.csv", DIAG_COLUMNS,
                  [[r[c] for c in DIAG_COLUMNS] for r in traj.rows])
        write_csv(out / "front.csv", FRONT_COLUMNS, front_rows(curves))
        files += [out / "diagnostics.csv", out / "front.csv"]
    last = traj.rows[-1]
    ok = all(r["bounds_ok"] for r in traj.rows)
    summary = (f"eps: t={last['t']:.6g} Q={last['Q']:.10g} bounds={'pass' if ok else 'FAIL'} "
               f"front={front_summary(curves[-1])}")
    return ScenarioResult("eps", summary, files,
                          {"trajectory": traj, "fronts": curves, "mesh": mesh, "params": params})


def _stefan_trajectory(cfg, mesh, A, B, init, params):
    model = homogenized_model(cfg, A, B)
    Z0 = initial_enthalpy(init.u, init.v, init.w, params.alpha, params.lam)
    steps = record_steps(params, cfg["run.record_interval"])
    traj = run_stefan(mesh, model, Z0, params.tau, params.t_end, steps)
    states = []
    for s in traj.states:
        f = recover_fields(s, model, params.alpha)
        states.append(FieldState(s.t, f.u_star, f.v_star, f.w_star))
    return model, traj, states


def run_stefan_mode(cfg, write=True):
    mesh = build_mesh(cfg)
    A, B = build_coefficients(cfg)
    params = sim_params(cfg)
    init = initial_state(cfg, mesh)
    model, traj, states = _stefan_trajectory(cfg, mesh, A, B, init, params)
    curves = diag.front_velocity([diag.front_position(s, mesh) for s in states])
    m = mesh.lumped_mass
    files = []
    if write:
        out = output_dir(cfg)
        if cfg["run.write_snapshots"]:
            for es, fs in zip(traj.states, states):
                p = out / snapshot_name(es.t)
                write_snapshot(p, mesh, es.t, [es.Z, fs.u, fs.v, fs.w], ["Z", "u", "v", "w"],
                               "stefan")
                files.append(p)
        write_csv(out / "front.csv", FRONT_COLUMNS, front_rows(curves))
        write_csv(out / "enthalpy.csv", ["t", "total_Z"], [(s.t, m @ s.Z) for s in traj.states])
        files += [out / "front.csv", out / "enthalpy.csv"]
    total = m @ traj.states[-1].Z
    summary = (f"stefan: t={traj.states[-1].t:.6g} sum(MZ)={total:.10g} "
               f"A_hom={model.A_hom.tolist()} B_hom={model.B_hom.tolist()} "
               f"front={front_summary(curves[-1])}")
    return ScenarioResult("stefan", summary, files,
                          {"trajectory": traj, "states": states, "fronts": curves,
                           "model": model, "mesh": mesh})


def combined_l2(state, ref, m):
    """``sqrt(|u - u*|^2 + |v - v*|^2)`` in the lumped L2 norm."""
    du = diag.l2_distance(state.u, ref.u, m)
    dv = diag.l2_distance(state.v, ref.v, m)
    return du, dv, math.hypot(du, dv)


def run_compare(cfg, write=True):
    eps_res = run_eps(cfg, write=False)
    mesh, params = eps_res.data["mesh"], eps_res.data["params"]
    A, B = build_coefficients(cfg)
    init = initial_state(cfg, mesh)
    _, _, ref_states = _stefan_trajectory(cfg, mesh, A, B, init, params)
    eps_states = eps_res.data["trajectory"].states
    if [s.t for s in eps_states] != [s.t for s in ref_states]:
        raise NumericalError("recorded times of the two trajectories differ")
    m = mesh.lumped_mass
    rows = [(s.t,) + combined_l2(s, r, m) for s, r in zip(eps_states, ref_states)]
    files = []
    if write:
        out = output_dir(cfg)
        write_csv(out / "compare.csv", COMPARE_COLUMNS, rows)
        files.append(out / "compare.csv")
    summary = f"compare: eps={params.eps:g} t={rows[-1][0]:.6g} l2={rows[-1][3]:.6g}"
    return ScenarioResult("compare", summary, files, {"rows": rows})


def eps_sweep(cfg, eps_list=None, write=True, log=None):
    """One row ``(eps, front_end, seg_total, l2_to_stefan)`` per eps.

    The enthalpy reference is computed once. Rows whose simulation fails
    are written as ``failed`` and the sweep continues.
    """
    eps_list = list(eps_list if eps_list is not None else (cfg["run.eps_list"] or []))
    if not eps_list:
        raise ConfigError("sweep needs a non-empty run.eps_list")
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps_list must be strictly descending")
    mesh = build_mesh(cfg)
    A, B = build_coefficients(cfg)
    base = sim_params(cfg)
    init = initial_state(cfg, mesh)
    _, _, ref_states = _stefan_trajectory(cfg, mesh, A, B, init, base)
    ref = ref_states[-1]
    m = mesh.lumped_mass
    rows = []
    for eps in eps_list:
        try:
            params = sim_params(cfg, eps)
            ops = assemble_operators(mesh, A, B, eps, params.mass_lumping)
            traj = run_simulation(mesh, A, B, params, init, 0.0, ops=ops)
            final = traj.states[-1]
            curve = diag.front_position(final, mesh)
            front = curve.position if mesh.dim == 1 else curve.mean_x1
            rows.append((eps, front, traj.seg_total, combined_l2(final, ref, m)[2]))
        except (NumericalError, InvalidArgument, ConfigError) as exc:
            print(f"sweep: eps={eps:g} failed: {exc}", file=log or sys.stderr)
            rows.append((eps, "failed", "failed", "failed"))
    files = []
    if write:
        out = output_dir(cfg)
        write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
        files.append(out / "sweep.csv")
    summary = "sweep: " + "; ".join(
        f"eps={r[0]:g} front={_fmt(r[1])} seg={_fmt(r[2])} l2={_fmt(r[3])}" for r in rows)
    return ScenarioResult("sweep", summary, files, {"rows": rows})


def run_cell(cfg):
    """Effective tensors of A and B (numeric cell solve in 2D as a cross-check)."""
    A, B = build_coefficients(cfg)
    n, nq = cfg["cell.n"], cfg["cell.n_quad"]
    lines, data = [], {}
    for name, coeff in (("A", A), ("B", B)):
        hom = homogenize(coeff, n, nq)
        data[name] = hom
        lines.append(f"{name}_hom [{hom.provenance}]: {hom.matrix.tolist()}")
        if coeff.dim == 2 and not coeff.is_constant and hom.provenance != "numeric-cell-solve":
            num = homogenized_tensor(coeff, solve_cell_problems(coeff, n))
            data[name + "_numeric"] = num
            lines.append(f"{name}_hom [numeric-cell-solve n={n}]: {num.matrix.tolist()}")
    return ScenarioResult("cell", "\n".join(lines), [], data)


def run_scenario(cfg):
    mode = cfg.mode
    if mode == "eps":
        return run_eps(cfg)
    if mode == "stefan":
        return run_stefan_mode(cfg)
    if mode == "compare":
        return run_compare(cfg)
    if mode == "sweep":
        return eps_sweep(cfg)
    if mode == "cell":
        return run_cell(cfg)
    raise ConfigError(f"unknown mode {mode!r}")


def fronts_from_snapshots(directory):
    """Rebuild front curves (with velocities) from a directory of snapshots."""
    paths = sorted(Path(directory).glob("snap_t*.txt"))
    if not paths:
        raise InvalidArgument(f"no snapshot files in {directory}")
    curves = []
    meshes = {}
    for p in paths:
        meta, data = read_snapshot(p)
        dim, n = int(meta["dim"]), int(meta["n"])
        if (dim, n) not in meshes:
            meshes[(dim, n)] = build_interval_mesh(n) if dim == 1 else build_crisscross_mesh(n)
        mesh = meshes[(dim, n)]
        if data.shape[0] != mesh.n_vertices:
            raise InvalidArgument(f"{p}: row count does not match the recorded mesh")
        u, v, w = data[:, -3], data[:, -2], data[:, -1]
        curves.append(diag.front_position(FieldState(float(meta["t"]), u, v, w), mesh))
    curves.sort(key=lambda c: c.t)
    return diag.front_velocity(curves)
