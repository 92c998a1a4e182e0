"""Uniform P1 meshes: 1D intervals and 2D criss-cross triangulations.

Vertex ordering is deterministic. For the criss-cross mesh of the unit
square the (n+1)**2 grid vertices come first in lexicographic order
(x index fastest), followed by the n**2 square centres.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable simplicial mesh.

    Attributes
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    vertices : ndarray, shape (n_vertices, dim)
    elements : ndarray of int, shape (n_elements, dim + 1)
        Vertex indices; 2D triangles are counter-clockwise.
    boundary : ndarray of bool, shape (n_vertices,)
    measures : ndarray, shape (n_elements,)
        Element lengths (1D) or areas (2D).
    grid_shape : tuple or None
        ``(n, n)`` for criss-cross meshes, used to address grid lines.
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    boundary: np.ndarray
    measures: np.ndarray
    grid_shape: tuple = None

    def __post_init__(self):
        for arr in (self.vertices, self.elements, self.boundary, self.measures):
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def volume(self):
        return float(self.measures.sum())

    @cached_property
    def h(self):
        """Largest element diameter."""
        pts = self.vertices[self.elements]
        d = pts[:, :, None, :] - pts[:, None, :, :]
        return float(np.sqrt((d**2).sum(axis=-1)).max())

    @cached_property
    def barycenters(self):
        return self.vertices[self.elements].mean(axis=1)

    @cached_property
    def gradients(self):
        """Constant P1 basis gradients, shape (n_elements, dim + 1, dim)."""
        pts = self.vertices[self.elements]
        if self.dim == 1:
            length = pts[:, 1, 0] - pts[:, 0, 0]
            g = np.empty((self.n_elements, 2, 1))
            g[:, 0, 0] = -1.0 / length
            g[:, 1, 0] = 1.0 / length
            return g
        # barycentric gradients from the inverse of the edge matrix
        edges = pts[:, 1:, :] - pts[:, :1, :]
        inv = np.linalg.inv(edges)  # rows of inv^T are grad(lambda_1), grad(lambda_2)
        g12 = np.transpose(inv, (0, 2, 1))
        g0 = -g12.sum(axis=1, keepdims=True)
        return np.concatenate([g0, g12], axis=1)

    @cached_property
    def lumped_mass(self):
        """Row-sum lumped mass, i.e. the integral of every hat function."""
        m = np.zeros(self.n_vertices)
        share = np.repeat(self.measures / (self.dim + 1), self.dim + 1)
        np.add.at(m, self.elements.ravel(), share)
        return m

    def grid_lines(self):
        """Vertex indices of each horizontal grid line (criss-cross only).

        Returns a list of ``n + 1`` index arrays ordered by increasing x2,
        each sorted by increasing x1. Square centres are excluded.
        """
        if self.grid_shape is None:
            raise InvalidArgument("grid lines are only defined for criss-cross meshes")
        n = self.grid_shape[0]
        return [np.arange(j * (n + 1), (j + 1) * (n + 1)) for j in range(n + 1)]

    def dump(self, path):
        """Write the plain-text mesh format: header, vertices, elements."""
        with open(path, "w") as fh:
            fh.write(f"{self.dim} {self.n_vertices} {self.n_elements}\n")
            np.savetxt(fh, self.vertices, fmt="%.17g")
            np.savetxt(fh, self.elements, fmt="%d")


def load_mesh(path):
    """Read a mesh written by :meth:`Mesh.dump`."""
    with open(path) as fh:
        dim, nv, ne = (int(tok) for tok in fh.readline().split())
        verts = np.loadtxt(fh, max_rows=nv, ndmin=2)
        elems = np.loadtxt(fh, max_rows=ne, ndmin=2, dtype=np.int64)
    pts = verts[elems]
    if dim == 1:
        measures = pts[:, 1, 0] - pts[:, 0, 0]
        lo, hi = verts[:, 0].min(), verts[:, 0].max()
        boundary = (verts[:, 0] == lo) | (verts[:, 0] == hi)
    else:
        e1 = pts[:, 1] - pts[:, 0]
        e2 = pts[:, 2] - pts[:, 0]
        measures = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        lo, hi = verts.min(axis=0), verts.max(axis=0)
        boundary = np.any((verts == lo) | (verts == hi), axis=1)
    return Mesh(dim, verts, elems, boundary, measures)


def build_interval_mesh(n_cells, a=0.0, b=1.0):
    """Uniform mesh of ``(a, b)`` with ``n_cells`` elements."""
    if int(n_cells) != n_cells or n_cells < 2:
        raise InvalidArgument(f"n_cells must be an integer >= 2, got {n_cells}")
    if not b > a:
        raise InvalidArgument(f"need a < b, got a={a}, b={b}")
    n_cells = int(n_cells)
    x = a + (b - a) * np.arange(n_cells + 1) / n_cells
    x[-1] = b
    elements = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    boundary = np.zeros(n_cells + 1, dtype=bool)
    boundary[[0, -1]] = True
    measures = np.diff(x)
    return Mesh(1, x[:, None], elements, boundary, measures)


def crisscross_connectivity(n):
    """Vertex coordinates and triangles of the criss-cross unit square.

    Shared by :func:`build_crisscross_mesh` and the periodic cell mesh.
    """
    ng = n + 1
    s = np.arange(ng) / n
    gx, gy = np.meshgrid(s, s)  # gx varies along axis 1 -> x index fastest
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    c = (np.arange(n) + 0.5) / n
    cx, cy = np.meshgrid(c, c)
    centres = np.column_stack([cx.ravel(), cy.ravel()])
    vertices = np.vstack([grid, centres])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    v00 = j * ng + i
    v10 = v00 + 1
    v01 = v00 + ng
    v11 = v01 + 1
    ctr = ng * ng + j * n + i
    # bottom, right, top, left; each counter-clockwise
    tris = np.stack(
        [
            np.column_stack([v00, v10, ctr]),
            np.column_stack([v10, v11, ctr]),
            np.column_stack([v11, v01, ctr]),
            np.column_stack([v01, v00, ctr]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return vertices, tris


def build_crisscross_mesh(n):
    """Criss-cross triangulation of (0, 1)^2 with ``n`` squares per side.

    Every square is cut into four triangles through its centre, giving
    ``(n + 1)**2 + n**2`` vertices and ``4 n**2`` triangles.
    """
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be an integer >= 1, got {n}")
    n = int(n)
    vertices, tris = crisscross_connectivity(n)
    ng = n + 1
    ii = np.arange(ng * ng) % ng
    jj = np.arange(ng * ng) // ng
    boundary = np.zeros(vertices.shape[0], dtype=bool)
    boundary[: ng * ng] = (ii == 0) | (ii == n) | (jj == 0) | (jj == n)
    measures = np.full(tris.shape[0], 0.25 / (n * n))
    return Mesh(2, vertices, tris, boundary, measures, grid_shape=(n, n))
