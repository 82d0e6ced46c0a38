"""Structured P1 triangulations of rectangles.

Node ``(i, j)`` sits at ``(x0 + i*hx, y0 + j*hy)`` and has index
``i + j*(nx + 1)``.  Each cell is split along its SW-NE diagonal (or the
SE-NW one with ``diagonal="nw"``) into two counter-clockwise triangles.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError

__all__ = [
    "TriMesh",
    "ScalarField",
    "GradField",
    "build_mesh",
    "interpolate",
    "gradient",
    "divergence_form",
    "element_measure",
    "stiffness_matrix",
    "write_tables",
    "TABLE_FORMAT_VERSION",
]

TABLE_FORMAT_VERSION = 1


class TriMesh:
    """Immutable triangulation with precomputed P1 geometry."""

    def __init__(self, bounds, nx, ny, diagonal="ne"):
        x0, x1, y0, y1 = map(float, bounds)
        if not (np.isfinite([x0, x1, y0, y1]).all() and x1 > x0 and y1 > y0):
            raise InvalidInputError(f"degenerate rectangle bounds {bounds!r}")
        if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
            raise InvalidInputError("nx and ny must be integers >= 2")
        if diagonal not in ("ne", "nw"):
            raise InvalidInputError("diagonal must be 'ne' or 'nw'")
        nx, ny = int(nx), int(ny)
        self.bounds = (x0, x1, y0, y1)
        self.nx, self.ny = nx, ny
        self.diagonal = diagonal
        self.hx = (x1 - x0) / nx
        self.hy = (y1 - y0) / ny

        xs = x0 + self.hx * np.arange(nx + 1)
        ys = y0 + self.hy * np.arange(ny + 1)
        xs[-1], ys[-1] = x1, y1
        X, Y = np.meshgrid(xs, ys)
        self.nodes = np.column_stack([X.ravel(), Y.ravel()])

        i, j = np.meshgrid(np.arange(nx), np.arange(ny))
        i, j = i.ravel(), j.ravel()
        sw = i + j * (nx + 1)
        se, nw = sw + 1, sw + nx + 1
        ne = nw + 1
        if diagonal == "ne":
            lower = np.column_stack([sw, se, ne])
            upper = np.column_stack([sw, ne, nw])
        else:
            lower = np.column_stack([sw, se, nw])
            upper = np.column_stack([se, ne, nw])
        tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
        tris[0::2], tris[1::2] = lower, upper
        self.triangles = tris

        ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
        self.boundary = ((ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)).ravel()
        self.interior = np.flatnonzero(~self.boundary)

        p = self.nodes[tris]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        twice = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.areas = 0.5 * twice
        # gradient of the barycentric coordinate of vertex k on each triangle
        gb = np.empty((len(tris), 3, 2))
        for k in range(3):
            a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
            gb[:, k, 0] = (a[:, 1] - b[:, 1]) / twice
            gb[:, k, 1] = (b[:, 0] - a[:, 0]) / twice
        self.grad_basis = gb
        self.centroids = p.mean(axis=1)
        self.node_weights = np.bincount(
            tris.ravel(), weights=np.repeat(self.areas / 3.0, 3), minlength=len(self.nodes)
        )
        self._build_edges()
        self.h = float(self.edge_lengths.max())

        rows = np.repeat(np.arange(len(tris)), 3)
        cols = tris.ravel()
        shape = (len(tris), len(self.nodes))
        self.grad_x = sp.csr_matrix((gb[:, :, 0].ravel(), (rows, cols)), shape=shape)
        self.grad_y = sp.csr_matrix((gb[:, :, 1].ravel(), (rows, cols)), shape=shape)

        for arr in (self.nodes, self.triangles, self.boundary, self.interior, self.areas,
                    self.grad_basis, self.centroids, self.node_weights, self.edges,
                    self.edge_triangles, self.edge_lengths):
            arr.setflags(write=False)

    def _build_edges(self):
        tris = self.triangles
        local = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        owner = np.tile(np.arange(len(tris)), 3)
        key = np.sort(local, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        order = np.argsort(inverse, kind="stable")
        counts = np.bincount(inverse, minlength=len(edges))
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        et = np.full((len(edges), 2), -1, dtype=np.int64)
        et[:, 0] = owner[order[starts]]
        two = counts == 2
        et[two, 1] = owner[order[starts[two] + 1]]
        self.edges = edges
        self.edge_triangles = et
        d = self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]]
        self.edge_lengths = np.hypot(d[:, 0], d[:, 1])

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def area(self):
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0) * (y1 - y0)

    @property
    def cell_size(self):
        return max(self.hx, self.hy)

    def refine(self):
        return TriMesh(self.bounds, 2 * self.nx, 2 * self.ny, self.diagonal)

    def triangles_within(self, region, tol=1e-12):
        """Mask of triangles whose closure lies inside ``region``."""
        region = check_region(self, region)
        x0, x1, y0, y1 = region
        scale = tol * max(1.0, *map(abs, self.bounds))
        p = self.nodes[self.triangles]
        inside = (
            (p[..., 0] >= x0 - scale) & (p[..., 0] <= x1 + scale)
            & (p[..., 1] >= y0 - scale) & (p[..., 1] <= y1 + scale)
        )
        return inside.all(axis=1)

    def __repr__(self):
        return f"TriMesh(bounds={self.bounds}, nx={self.nx}, ny={self.ny}, diagonal={self.diagonal!r})"


def check_region(mesh, region):
    if region is None:
        return mesh.bounds
    x0, x1, y0, y1 = map(float, region)
    X0, X1, Y0, Y1 = mesh.bounds
    tol = 1e-12 * max(1.0, *map(abs, mesh.bounds))
    if not (x1 > x0 and y1 > y0):
        raise InvalidInputError(f"degenerate sub-rectangle {region!r}")
    if x0 < X0 - tol or x1 > X1 + tol or y0 < Y0 - tol or y1 > Y1 + tol:
        raise InvalidInputError(f"sub-rectangle {region!r} is not contained in {mesh.bounds!r}")
    return (x0, x1, y0, y1)


def build_mesh(bounds, nx, ny, diagonal="ne"):
    return TriMesh(bounds, nx, ny, diagonal)


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise InvalidInputError(
                f"expected {self.mesh.n_nodes} nodal values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("non-finite nodal value")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.mesh, self.values + other.values)
        return ScalarField(self.mesh, self.values + other)

    def __mul__(self, c):
        return ScalarField(self.mesh, self.values * c)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other


@dataclass(frozen=True, eq=False)
class GradField:
    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_triangles, 2):
            raise InvalidInputError("expected one 2-vector per triangle")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def norms(self):
        return np.hypot(self.values[:, 0], self.values[:, 1])


def interpolate(mesh, func):
    """Nodal interpolant of ``func(x, y)``."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    return ScalarField(mesh, np.broadcast_to(np.asarray(func(x, y), dtype=float), x.shape))


def gradient(u: ScalarField) -> GradField:
    """Exact per-triangle gradient of the P1 interpolant."""
    m = u.mesh
    vals = u.values[m.triangles]
    return GradField(m, np.einsum("tk,tkd->td", vals, m.grad_basis))


def divergence_form(mesh, flux):
    """Return ``r_i = sum_T area(T) <w_T, grad phi_i|_T>`` for every node."""
    w = flux.values if isinstance(flux, GradField) else np.asarray(flux, dtype=float)
    if w.shape != (mesh.n_triangles, 2):
        raise InvalidInputError("flux must carry one 2-vector per triangle")
    contrib = mesh.areas[:, None] * np.einsum("td,tkd->tk", w, mesh.grad_basis)
    return np.bincount(mesh.triangles.ravel(), weights=contrib.ravel(), minlength=mesh.n_nodes)


def stiffness_matrix(mesh):
    """Assembled P1 Laplace stiffness matrix (sparse CSR)."""
    gb = mesh.grad_basis
    local = mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", gb, gb)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def element_measure(mesh, predicate, region=None):
    """Total area of triangles inside ``region`` that satisfy ``predicate``.

    ``predicate`` is a boolean per-triangle array or a callable taking the
    mesh and returning one.
    """
    within = mesh.triangles_within(region)
    mask = predicate(mesh) if callable(predicate) else predicate
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), (mesh.n_triangles,))
    return float(np.sum(mesh.areas[within & mask]))


def write_tables(mesh, directory, fields=None, prefix=""):
    """Write plain-text tables for plotting.

    ``nodes.txt``: ``node x y boundary``; ``triangles.txt``: ``triangle v0 v1
    v2``; ``<name>.txt`` per nodal field: ``node value``.  Every file starts
    with ``# format_version=1`` and a ``# columns:`` line.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    head = f"# format_version={TABLE_FORMAT_VERSION}\n"
    with open(out / f"{prefix}nodes.txt", "w") as fh:
        fh.write(head + "# columns: node x y boundary\n")
        for k, ((x, y), b) in enumerate(zip(mesh.nodes, mesh.boundary)):
            fh.write(f"{k} {float(x)!r} {float(y)!r} {int(b)}\n")
    with open(out / f"{prefix}triangles.txt", "w") as fh:
        fh.write(head + "# columns: triangle v0 v1 v2\n")
        for k, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"{k} {a} {b} {c}\n")
    for name, field in (fields or {}).items():
        vals = field.values if isinstance(field, ScalarField) else np.asarray(field)
        with open(out / f"{prefix}{name}.txt", "w") as fh:
            fh.write(head + "# columns: node value\n")
            for k, v in enumerate(vals):
                fh.write(f"{k} {float(v)!r}\n")
    return out
