"""Mesh-based distance oracles used to cross-check curve shortening.

Two oracles are offered.  ``graph`` runs Dijkstra on a grid graph whose
edges are chart-straight segments measured on the manifold, so every graph
path is a real curve and refinement on nested grids can only shorten it.
``polyhedral`` builds the chart triangulation as a polyhedral surface in
ambient space and computes exact polyhedral geodesics by edge flipping; it
converges at second order and is the one to use for tight agreement checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import Unreachable
from .manifold import EmbeddedManifold

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def segment_lengths(m: EmbeddedManifold, U0: np.ndarray, dU: np.ndarray) -> np.ndarray:
    """Lengths of the chart-straight segments ``U0 + s dU``, ``s`` in [0, 1] (Gauss-Legendre)."""
    U0 = np.atleast_2d(U0)
    dU = np.broadcast_to(dU, U0.shape)
    out = np.zeros(len(U0))
    for s, w in zip(_GL_X, _GL_W):
        J = m.jacobian_batch(U0 + s * dU)
        out += w * np.linalg.norm(np.einsum("nak,nk->na", J, dU), axis=-1)
    return out


def _stencil(k: int, radius: int) -> list[tuple]:
    offs = []
    for o in itertools.product(range(-radius, radius + 1), repeat=k):
        if any(o) and math.gcd(*[abs(c) for c in o]) == 1:
            # keep one of each +/- pair
            if next(c for c in o if c != 0) > 0:
                offs.append(o)
    return offs


@dataclass
class MeshGraph:
    """Grid graph over a (truncated) chart box; edges join grid vertices along stencil offsets.

    Edge weight is the length of the chart-straight segment on the manifold,
    so every graph path is a real curve and graph distances bound the
    intrinsic distance from above.
    """

    manifold: EmbeddedManifold
    box: tuple
    shape: tuple
    axes: list
    vertices: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    radius: int
    weight: str


def build_mesh(m: EmbeddedManifold, resolution: int, box: Optional[tuple] = None, radius: int = 3, weight: str = "path") -> MeshGraph:
    if m.intrinsic_dim not in (1, 2):
        raise ValueError("mesh oracle supports 1- and 2-dimensional charts")
    if resolution < 16:
        raise ValueError("resolution must be at least 16 per axis")
    b = m.resolve_box(box)
    axes, periodic = [], []
    for i, (lo, hi) in enumerate(b):
        if m.periods[i] is not None:
            axes.append(lo + (hi - lo) * np.arange(resolution) / resolution)
            periodic.append(True)
        else:
            axes.append(np.linspace(lo, hi, resolution + 1))
            periodic.append(False)
    shape = tuple(len(a) for a in axes)
    grids = np.meshgrid(*axes, indexing="ij")
    V = np.stack([g.ravel() for g in grids], axis=-1)
    idx = np.arange(V.shape[0]).reshape(shape)
    steps = np.array([a[1] - a[0] for a in axes])
    rows, cols, wts = [], [], []
    for off in _stencil(m.intrinsic_dim, radius):
        src = idx
        dst_index = []
        valid = np.ones(shape, dtype=bool)
        for ax, o in enumerate(off):
            n = shape[ax]
            pos = np.arange(n) + o
            if periodic[ax]:
                pos = pos % n
            else:
                ok = (pos >= 0) & (pos < n)
                sl = [None] * len(shape)
                sl[ax] = slice(None)
                valid &= ok[tuple(sl)] if len(shape) > 1 else ok
                pos = np.clip(pos, 0, n - 1)
            dst_index.append(pos)
        dst = idx[np.ix_(*dst_index)]
        s, d = src[valid], dst[valid]
        dU = np.array(off, dtype=float) * steps
        if weight == "path":
            w = segment_lengths(m, V[s], dU)
        elif weight == "chord":
            w = np.linalg.norm(m.evaluate(V[s]) - m.evaluate(V[s] + dU), axis=-1)
        else:
            raise ValueError(f"unknown weight {weight!r}")
        rows.append(s)
        cols.append(d)
        wts.append(w)
    return MeshGraph(m, b, shape, axes, V, np.concatenate(rows), np.concatenate(cols), np.concatenate(wts), radius, weight)


def _attach(mesh: MeshGraph, u: np.ndarray, vid: int):
    """Edges from an off-grid point to nearby grid vertices, or the matching vertex if on-grid."""
    m = mesh.manifold
    cell, exact = [], True
    for ax, a in enumerate(mesh.axes):
        h = a[1] - a[0]
        f = (u[ax] - a[0]) / h
        j = int(np.floor(f + 1e-9))
        if abs(f - round(f)) > 1e-9:
            exact = False
        cell.append(j)
    if exact:
        flat = 0
        for ax, j in enumerate(cell):
            j = j % mesh.shape[ax] if m.periods[ax] is not None else j
            flat = flat * mesh.shape[ax] + j
        return flat, None
    nbrs = []
    for off in itertools.product(range(-mesh.radius + 1, mesh.radius + 1), repeat=len(cell)):
        flat = 0
        ok = True
        for ax, (j, o) in enumerate(zip(cell, off)):
            jj = j + o
            if m.periods[ax] is not None:
                jj %= mesh.shape[ax]
            elif not 0 <= jj < mesh.shape[ax]:
                ok = False
                break
            flat = flat * mesh.shape[ax] + jj
        if ok:
            nbrs.append(flat)
    nbrs = np.array(nbrs)
    dU = m.wrap_delta(mesh.vertices[nbrs] - u[None, :])
    w = segment_lengths(m, np.repeat(u[None, :], len(nbrs), 0), dU) if mesh.weight == "path" else np.linalg.norm(
        m.evaluate(mesh.vertices[nbrs]) - m.evaluate(u), axis=-1
    )
    return vid, (np.full(len(nbrs), vid), nbrs, w)


def mesh_distances(mesh: MeshGraph, pairs) -> np.ndarray:
    """Graph distances for a list of (p, q) chart-coordinate pairs on one mesh."""
    m = mesh.manifold
    nv = len(mesh.vertices)
    rows, cols, wts = [mesh.rows], [mesh.cols], [mesh.weights]
    ends = []
    nxt = nv
    for p, q in pairs:
        ids = []
        for u in (p, q):
            u = m.canonicalize(np.asarray(getattr(u, "u", u), dtype=float))
            vid, extra = _attach(mesh, u, nxt)
            if extra is not None:
                nxt += 1
                rows.append(extra[0])
                cols.append(extra[1])
                wts.append(extra[2])
            ids.append(vid)
        ends.append(ids)
    r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(wts)
    graph = csr_matrix((w, (r, c)), shape=(nxt, nxt))
    sources = sorted({e[0] for e in ends})
    dist = dijkstra(graph, directed=False, indices=sources)
    row_of = {s: i for i, s in enumerate(sources)}
    out = np.array([dist[row_of[a], b] for a, b in ends])
    if not np.all(np.isfinite(out)):
        raise Unreachable("endpoints lie in different components of the truncated mesh")
    return out


# -- polyhedral oracle ------------------------------------------------------------------


def _grid_axes(m: EmbeddedManifold, resolution: int, box) -> tuple[tuple, list, list]:
    b = m.resolve_box(box)
    axes, periodic = [], []
    for i, (lo, hi) in enumerate(b):
        if m.periods[i] is not None:
            axes.append(lo + (hi - lo) * np.arange(resolution) / resolution)
            periodic.append(True)
        else:
            axes.append(np.linspace(lo, hi, resolution + 1))
            periodic.append(False)
    return b, axes, periodic


class _Triangulation:
    """Chart-grid triangulation of a 2-d chart box with on-demand point insertion.

    Each grid cell starts as two triangles.  Inserted points split the
    triangle containing them, so faces never leave the cell they began in and
    point location only searches one cell.
    """

    def __init__(self, m: EmbeddedManifold, resolution: int, box):
        self.m = m
        self.box, self.axes, self.periodic = _grid_axes(m, resolution, box)
        self.shape = tuple(len(a) for a in self.axes)
        self.h = np.array([a[1] - a[0] for a in self.axes])
        n0, n1 = self.shape
        self.ncell = tuple(n if p else n - 1 for n, p in zip(self.shape, self.periodic))
        g0, g1 = np.meshgrid(*self.axes, indexing="ij")
        self.U = [np.stack([g0.ravel(), g1.ravel()], axis=-1)]
        self.nv = n0 * n1
        self.faces: list = []
        self.local: list = []
        self.alive: list = []
        self.cells: dict = {}
        self.inserted: dict = {}
        unit = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        for i in range(self.ncell[0]):
            for j in range(self.ncell[1]):
                ids = [self._vid(i + di, j + dj) for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1))]
                loc = unit * self.h
                self.cells[(i, j)] = []
                for tri in ((0, 1, 2), (0, 2, 3)):
                    self._add_face((i, j), [ids[t] for t in tri], loc[list(tri)])

    def _vid(self, i: int, j: int) -> int:
        n0, n1 = self.shape
        if self.periodic[0]:
            i %= n0
        if self.periodic[1]:
            j %= n1
        return i * n1 + j

    def _add_face(self, cell, ids, loc):
        self.faces.append(list(ids))
        self.local.append(np.asarray(loc, dtype=float))
        self.alive.append(True)
        self.cells[cell].append(len(self.faces) - 1)

    def _cell_of(self, u: np.ndarray) -> tuple[tuple, np.ndarray]:
        cell = []
        for ax in range(2):
            f = (u[ax] - self.axes[ax][0]) / self.h[ax]
            c = int(math.floor(f))
            if self.periodic[ax]:
                c %= self.ncell[ax]
            else:
                c = min(max(c, 0), self.ncell[ax] - 1)
            cell.append(c)
        origin = np.array([self.axes[ax][0] + cell[ax] * self.h[ax] for ax in range(2)])
        loc = u - origin
        for ax in range(2):
            if self.periodic[ax]:
                span = self.h[ax] * self.shape[ax]
                loc[ax] -= span * math.floor(loc[ax] / span)
        return tuple(cell), origin, loc

    def insert(self, u: np.ndarray) -> int:
        """Vertex id for chart point ``u``, splitting its triangle if needed."""
        key = tuple(np.round(u, 13))
        if key in self.inserted:
            return self.inserted[key]
        cell, origin, loc = self._cell_of(u)
        best = None
        for f in self.cells[cell]:
            if not self.alive[f]:
                continue
            P = self.local[f]
            T = np.column_stack([P[1] - P[0], P[2] - P[0]])
            l1, l2 = np.linalg.solve(T, loc - P[0])
            bary = np.array([1.0 - l1 - l2, l1, l2])
            if best is None or bary.min() > best[1].min():
                best = (f, bary)
        f, bary = best
        P = self.local[f]
        scale = np.linalg.norm(self.h)
        # on a vertex: reuse it
        for c in range(3):
            if np.linalg.norm(loc - P[c]) <= 1e-12 * scale:
                self.inserted[key] = self.faces[f][c]
                return self.faces[f][c]
        # on an edge: nudge a hair into the interior (moves the point by ~1e-9 h)
        if bary.min() < 1e-9:
            loc = (1.0 - 1e-8) * loc + 1e-8 * P.mean(axis=0)
        ids = self.faces[f]
        self.alive[f] = False
        vid = self.nv
        self.nv += 1
        self.U.append((origin + loc)[None, :])
        for a, b in ((0, 1), (1, 2), (2, 0)):
            self._add_face(cell, [ids[a], ids[b], vid], np.stack([P[a], P[b], loc]))
        self.inserted[key] = vid
        return vid

    def nearest_vertex(self, u: np.ndarray) -> int:
        idx = []
        for ax in range(2):
            j = int(round((u[ax] - self.axes[ax][0]) / self.h[ax]))
            j = j % self.shape[ax] if self.periodic[ax] else min(max(j, 0), self.shape[ax] - 1)
            idx.append(j)
        return idx[0] * self.shape[1] + idx[1]

    def surface(self) -> tuple[np.ndarray, np.ndarray]:
        U = np.vstack(self.U)
        F = np.array([f for f, a in zip(self.faces, self.alive) if a], dtype=np.int64)
        return self.m.evaluate(U), F


def _winding_displacements(m: EmbeddedManifold, du: np.ndarray) -> list[np.ndarray]:
    base = m.wrap_delta(du)
    choices = []
    for i, p in enumerate(m.periods):
        if p is None:
            choices.append([0.0])
        else:
            choices.append([0.0, -math.copysign(p, base[i]) if base[i] != 0 else p])
    return [base + np.array(s) for s in itertools.product(*choices)]


def polyhedral_distances(m: EmbeddedManifold, pairs, resolution: int = 256, box: Optional[tuple] = None) -> np.ndarray:
    """Exact polyhedral geodesic distances on the triangulated chart box.

    For periodic charts a shortest path is searched in each winding class
    (seeded through a waypoint halfway along that winding) and the shortest
    result is kept.  One-dimensional charts reduce to the chain graph; surfaces
    must sit in R^3.
    """
    import potpourri3d as pp3d

    if m.intrinsic_dim == 1:
        return mesh_distances(build_mesh(m, resolution, box, radius=1), pairs)
    if m.intrinsic_dim != 2 or m.ambient_dim != 3:
        raise ValueError("polyhedral oracle supports curves and surfaces in R^3")
    if resolution < 16:
        raise ValueError("resolution must be at least 16 per axis")
    tri = _Triangulation(m, resolution, box)
    ends = []
    for p, q in pairs:
        u = m.canonicalize(np.asarray(getattr(p, "u", p), dtype=float))
        v = m.canonicalize(np.asarray(getattr(q, "u", q), dtype=float))
        for w in (u, v):
            for ax, (lo, hi) in enumerate(tri.box):
                if not lo - 1e-12 <= w[ax] <= hi + 1e-12:
                    raise Unreachable("endpoint outside the truncation box")
        ends.append((u, v, tri.insert(u), tri.insert(v)))
    X, F = tri.surface()
    solver = pp3d.EdgeFlipGeodesicSolver(X, F)
    out = np.empty(len(ends))
    for n, (u, v, a, b) in enumerate(ends):
        if a == b:
            out[n] = 0.0
            continue
        best = math.inf
        seeds = [[a, b]]
        for du in _winding_displacements(m, v - u):
            w = tri.nearest_vertex(m.canonicalize(u + 0.5 * du))
            if w not in (a, b):
                seeds.append([a, w, b])
        for s in seeds:
            try:
                path = solver.find_geodesic_path_poly(s) if len(s) > 2 else solver.find_geodesic_path(a, b)
            except (RuntimeError, ValueError):
                continue
            if len(path) >= 2:
                best = min(best, float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1))))
        if not math.isfinite(best):
            raise Unreachable("no path between endpoints on the truncated surface")
        out[n] = best
    return out


def mesh_distance_oracle(
    m: EmbeddedManifold,
    p,
    q,
    resolution: int = 64,
    box: Optional[tuple] = None,
    method: str = "graph",
    radius: int = 3,
    weight: str = "path",
) -> float:
    """Distance between two points through a mesh of the (truncated) chart box.

    ``method="graph"`` is the grid-graph shortest path (an upper bound that
    decreases under nested refinement); ``method="polyhedral"`` is the exact
    geodesic of the triangulated surface.
    """
    if method == "graph":
        mesh = build_mesh(m, resolution, box, radius, weight)
        return float(mesh_distances(mesh, [(p, q)])[0])
    if method == "polyhedral":
        return float(polyhedral_distances(m, [(p, q)], resolution, box)[0])
    raise ValueError(f"unknown mesh method {method!r}")
