"""Measured invariants: conserved quantity, bounds, segregation, fronts, L2."""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

BOUND_TOL = 1e-10


def conserved_quantity(state, alpha, lam, m):
    """Lumped integral of ``u - v/alpha + lam*w``."""
    return float(m @ (state.u - state.v / alpha + lam * state.w))


def segregation_norm(state, m):
    """Lumped integral of the nodal product ``u*v``."""
    return float(m @ (state.u * state.v))


def l2_distance(a, b, m):
    """``sqrt(sum m (a - b)^2)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape != np.shape(m):
        raise InvalidArgument(f"length mismatch: {a.shape}, {b.shape}, {np.shape(m)}")
    d = a - b
    return float(np.sqrt(m @ (d * d)))


@dataclass
class BoundsReport:
    min_u: float
    max_u: float
    min_v: float
    max_v: float
    min_w: float
    max_w: float
    passed: bool
    violations: list

    def __str__(self):
        status = "pass" if self.passed else "FAIL " + "; ".join(self.violations)
        return (f"u in [{self.min_u:.3g}, {self.max_u:.3g}], v in [{self.min_v:.3g}, "
                f"{self.max_v:.3g}], w in [{self.min_w:.3g}, {self.max_w:.3g}]: {status}")


def bounds_report(state, u_bound=None, v_bound=None, tol=BOUND_TOL):
    """Check ``0 <= u <= u_bound``, ``0 <= v <= v_bound``, ``0 <= w <= 1``.

    Missing ceilings skip the upper check for that field. Every violation
    names the first offending node.
    """
    checks = [("u", state.u, u_bound), ("v", state.v, v_bound), ("w", state.w, 1.0)]
    violations = []
    for name, f, hi in checks:
        low = np.flatnonzero(f < -tol)
        if low.size:
            violations.append(f"{name}[{low[0]}]={f[low[0]]:.3g} < 0")
        if hi is not None:
            high = np.flatnonzero(f > hi + tol)
            if high.size:
                violations.append(f"{name}[{high[0]}]={f[high[0]]:.3g} > {hi:g}")
    return BoundsReport(
        float(state.u.min()), float(state.u.max()),
        float(state.v.min()), float(state.v.max()),
        float(state.w.min()), float(state.w.max()),
        not violations, violations,
    )


# --- fronts -----------------------------------------------------------------

@dataclass
class FrontCurve:
    """Zero set of ``u - v`` sampled along scan lines.

    ``x2`` and ``x1`` are the crossing points (1D: ``x2 == [0]``), sorted
    by ``x2``. ``velocity`` is filled by :func:`front_velocity`.
    """

    t: float
    dim: int
    x2: np.ndarray
    x1: np.ndarray
    velocity: np.ndarray = None

    @property
    def empty(self):
        return self.x1.size == 0

    @property
    def position(self):
        """1D front position, or None when no crossing exists."""
        return None if self.empty else float(self.x1[0])

    @property
    def mean_x1(self):
        return float(np.mean(self.x1)) if not self.empty else float("nan")


def first_crossing(x, d):
    """First sign change of ``d`` along increasing ``x``, interpolated.

    Nodes where ``d == 0`` are skipped; returns None without a crossing.
    """
    nz = np.flatnonzero(d != 0)
    if nz.size < 2:
        return None
    s = np.sign(d[nz])
    k = np.flatnonzero(s[:-1] != s[1:])
    if k.size == 0:
        return None
    i, j = nz[k[0]], nz[k[0] + 1]
    if j == i + 1:
        return float(x[i] + (x[j] - x[i]) * d[i] / (d[i] - d[j]))
    # a run of exact zeros separates the two signs: take its midpoint
    return float(0.5 * (x[i + 1] + x[j - 1]))


def front_position(state, mesh):
    """Front between the two habitats, ``{u = v}``."""
    d = state.u - state.v
    if mesh.dim == 1:
        order = np.argsort(mesh.vertices[:, 0], kind="stable")
        xs = mesh.vertices[order, 0]
        p = first_crossing(xs, d[order])
        x1 = np.array([] if p is None else [p])
        x2 = np.zeros(x1.size)
        return FrontCurve(state.t, 1, x2, x1)
    x1s, x2s = [], []
    for line in mesh.grid_lines():
        xs = mesh.vertices[line, 0]
        p = first_crossing(xs, d[line])
        if p is not None:
            x1s.append(p)
            x2s.append(mesh.vertices[line[0], 1])
    return FrontCurve(state.t, 2, np.array(x2s), np.array(x1s))


def front_velocity(curves):
    """Estimate x1-velocity of every front point by finite differences.

    Centred differences in the interior of the time series, one-sided at
    the ends; points are matched by their ``x2`` value. Returns the same
    curves with ``velocity`` filled (NaN where no neighbour matches).
    """
    def lookup(c):
        return {round(float(a), 12): float(b) for a, b in zip(c.x2, c.x1)}

    maps = [lookup(c) for c in curves]
    for k, c in enumerate(curves):
        lo = max(k - 1, 0)
        hi = min(k + 1, len(curves) - 1)
        vel = np.full(c.x1.size, np.nan)
        if hi > lo:
            dt = curves[hi].t - curves[lo].t
            for i, key in enumerate(round(float(a), 12) for a in c.x2):
                if key in maps[lo] and key in maps[hi]:
                    vel[i] = (maps[hi][key] - maps[lo][key]) / dt
        c.velocity = vel
    return curves
