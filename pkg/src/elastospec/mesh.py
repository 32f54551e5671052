"""Triangular mesh families on the unit square and the L-shaped domain.

Six families are supported, three per domain:

* square (``]0,1[^2``): Right, Crossed, Nonuniform
* L-shape (``]0,1[^2`` minus the upper-right quadrant): Left, Uniform, Nonuniform

Each generator is deterministic: the same ``(family, n, seed)`` triple
produces a bit-identical mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

SQUARE_FAMILIES = ("right", "crossed", "nonuniform")
LSHAPE_FAMILIES = ("left", "uniform", "nonuniform")


class MeshError(ValueError):
    """Invalid mesh request or broken mesh topology."""


def cross2(a, b):
    """z-component of the cross product of planar vectors (broadcasting)."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass
class TriMesh:
    """Triangulation with oriented edges and boundary tags.

    ``cells`` are counterclockwise vertex triples.  Local edge ``i`` of a
    cell is the edge opposite local vertex ``i``.  ``cell_edge_signs`` is
    +1 when the cell's outward normal on that edge coincides with the
    global edge normal (which points from the lower to the higher adjacent
    cell index, and outward on the boundary).
    """

    vertices: np.ndarray            # (V, 2) float
    cells: np.ndarray               # (T, 3) int
    family: str
    domain: str                     # "square" | "lshape"
    n_per_side: int
    edges: np.ndarray = field(default=None)            # (E, 2) int, sorted pairs
    edge_cells: np.ndarray = field(default=None)       # (E, 2) int, -1 if absent
    cell_edges: np.ndarray = field(default=None)       # (T, 3) int
    cell_edge_signs: np.ndarray = field(default=None)  # (T, 3) float
    boundary_tags: dict = field(default_factory=dict)  # edge index -> tag

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    def cell_areas(self):
        p = self.vertices[self.cells]
        return 0.5 * cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    def boundary_vertices(self):
        be = self.boundary_edges
        return np.unique(self.edges[be].ravel())

    def domain_area(self):
        return 1.0 if self.domain == "square" else 0.75


def _splitmix64(x):
    """64-bit splitmix finalizer; deterministic integer hash."""
    x = np.uint64(x)
    with np.errstate(over="ignore"):
        x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
        z = x
        z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
        z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
        z = z ^ (z >> np.uint64(31))
    return z


def _hash_unit(seed, i, j, axis):
    """Deterministic value in [0, 1) from (seed, i, j, axis)."""
    h = _splitmix64(np.uint64(seed) ^ _splitmix64(np.uint64(i) * np.uint64(0x100000001) + np.uint64(j)))
    h = _splitmix64(h ^ np.uint64(axis + 1))
    return float(h) / float(2**64)


def _grid_vertices(n):
    xs = np.linspace(0.0, 1.0, n + 1)
    vid = -np.ones((n + 1, n + 1), dtype=int)
    verts = []
    k = 0
    for j in range(n + 1):
        for i in range(n + 1):
            vid[i, j] = k
            verts.append((xs[i], xs[j]))
            k += 1
    return np.array(verts), vid


def _right_cells(vid, squares):
    """Split each grid square by the lower-left to upper-right diagonal."""
    cells = []
    for i, j in squares:
        v00, v10 = vid[i, j], vid[i + 1, j]
        v01, v11 = vid[i, j + 1], vid[i + 1, j + 1]
        cells.append((v00, v10, v11))
        cells.append((v00, v11, v01))
    return cells


def _left_cells(vid, squares):
    """Split each grid square by the lower-right to upper-left diagonal."""
    cells = []
    for i, j in squares:
        v00, v10 = vid[i, j], vid[i + 1, j]
        v01, v11 = vid[i, j + 1], vid[i + 1, j + 1]
        cells.append((v00, v10, v01))
        cells.append((v10, v11, v01))
    return cells


def _crossed_cells(vid, squares, verts):
    """Split each grid square into 4 triangles meeting at its center."""
    verts = list(map(tuple, verts))
    cells = []
    for i, j in squares:
        v00, v10 = vid[i, j], vid[i + 1, j]
        v01, v11 = vid[i, j + 1], vid[i + 1, j + 1]
        cx = 0.5 * (verts[v00][0] + verts[v11][0])
        cy = 0.5 * (verts[v00][1] + verts[v11][1])
        vc = len(verts)
        verts.append((cx, cy))
        cells.append((v00, v10, vc))
        cells.append((v10, v11, vc))
        cells.append((v11, v01, vc))
        cells.append((v01, v00, vc))
    return np.array(verts), cells


def _compact(verts, cells):
    """Drop vertices unused by any cell, renumbering contiguously."""
    cells = np.asarray(cells, dtype=int)
    used = np.unique(cells.ravel())
    remap = -np.ones(len(verts), dtype=int)
    remap[used] = np.arange(len(used))
    return np.asarray(verts, dtype=float)[used], remap[cells]


def _perturb_interior(verts, cells, n, seed):
    """Displace interior vertices by a deterministic pseudo-random offset.

    Magnitude starts at 0.25/n per coordinate and is halved until every
    cell keeps positive area.
    """
    interior = _interior_vertices(verts, cells)
    offsets = np.zeros_like(verts)
    for v in interior:
        i = int(round(verts[v, 0] * n))
        j = int(round(verts[v, 1] * n))
        offsets[v, 0] = 2.0 * _hash_unit(seed, i, j, 0) - 1.0
        offsets[v, 1] = 2.0 * _hash_unit(seed, i, j, 1) - 1.0
    amp = 0.25 / n
    for _ in range(20):
        moved = verts + amp * offsets
        p = moved[cells]
        areas = 0.5 * cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        if np.all(areas > 1e-14):
            return moved
        amp *= 0.5
    raise MeshError("could not find a non-inverting perturbation amplitude")


def _interior_vertices(verts, cells):
    edge_count = {}
    for tri in cells:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1
    boundary = set()
    for (a, b), c in edge_count.items():
        if c == 1:
            boundary.add(a)
            boundary.add(b)
    return [v for v in range(len(verts)) if v not in boundary]


def generate_square(family, n, seed=0):
    """Generate a unit-square mesh of the given family with n cells per side."""
    family = family.lower()
    if family not in SQUARE_FAMILIES:
        raise MeshError(f"unknown square family {family!r}")
    if n < 1:
        raise MeshError("n must be >= 1")
    if family == "nonuniform" and n < 2:
        raise MeshError("nonuniform meshes need n >= 2")
    verts, vid = _grid_vertices(n)
    squares = [(i, j) for j in range(n) for i in range(n)]
    if family == "crossed":
        verts, cells = _crossed_cells(vid, squares, verts)
        cells = np.asarray(cells, dtype=int)
    else:
        cells = np.asarray(_right_cells(vid, squares), dtype=int)
        if family == "nonuniform":
            verts = _perturb_interior(verts, cells, n, seed)
    mesh = TriMesh(vertices=verts, cells=cells, family=family,
                   domain="square", n_per_side=n)
    return build_topology(mesh)


def generate_lshape(family, n, seed=0):
    """Generate an L-shaped-domain mesh; n must be even so (0.5, 0.5) is a vertex."""
    family = family.lower()
    if family not in LSHAPE_FAMILIES:
        raise MeshError(f"unknown L-shape family {family!r}")
    if n < 2 or n % 2 != 0:
        raise MeshError("L-shape meshes need an even n >= 2")
    verts, vid = _grid_vertices(n)
    half = n // 2
    squares = [(i, j) for j in range(n) for i in range(n)
               if not (i >= half and j >= half)]
    if family == "uniform":
        verts, cells = _crossed_cells(vid, squares, verts)
        verts, cells = _compact(verts, cells)
    else:
        verts, cells = _compact(verts, _left_cells(vid, squares))
        if family == "nonuniform":
            verts = _perturb_interior(verts, cells, n, seed)
    mesh = TriMesh(vertices=verts, cells=cells, family=family,
                   domain="lshape", n_per_side=n)
    return build_topology(mesh)


def generate(domain, family, n, seed=0):
    if domain == "square":
        return generate_square(family, n, seed)
    if domain == "lshape":
        return generate_lshape(family, n, seed)
    raise MeshError(f"unknown domain {domain!r}")


def build_topology(mesh, bc="dirichlet_all"):
    """Fill edges, adjacency, orientation signs and boundary tags.

    The global normal of an edge points from the lower to the higher
    adjacent cell index, and outward on the boundary.
    """
    cells = mesh.cells
    areas = mesh.cell_areas()
    if np.any(areas <= 0):
        raise MeshError("cell with non-positive area (orientation broken)")

    edge_index = {}
    edges = []
    adj = []
    for t, tri in enumerate(cells):
        for a, b in ((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])):
            key = (min(a, b), max(a, b))
            if key not in edge_index:
                edge_index[key] = len(edges)
                edges.append(key)
                adj.append([])
            adj[edge_index[key]].append(t)

    E = len(edges)
    edge_cells = -np.ones((E, 2), dtype=int)
    for e, ts in enumerate(adj):
        if len(ts) > 2:
            raise MeshError(f"non-manifold edge {edges[e]} with {len(ts)} cells")
        ts = sorted(ts)
        edge_cells[e, : len(ts)] = ts

    T = len(cells)
    cell_edges = np.empty((T, 3), dtype=int)
    cell_edge_signs = np.empty((T, 3))
    for t, tri in enumerate(cells):
        for loc, (a, b) in enumerate(((tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1]))):
            e = edge_index[(min(a, b), max(a, b))]
            cell_edges[t, loc] = e
            # +1 when this cell owns the global normal direction
            cell_edge_signs[t, loc] = 1.0 if edge_cells[e, 0] == t else -1.0

    mesh.edges = np.asarray(edges, dtype=int)
    mesh.edge_cells = edge_cells
    mesh.cell_edges = cell_edges
    mesh.cell_edge_signs = cell_edge_signs

    boundary = np.flatnonzero(edge_cells[:, 1] < 0)
    if bc == "dirichlet_all":
        mesh.boundary_tags = {int(e): DIRICHLET for e in boundary}
    else:
        tags = list(bc)
        if len(tags) != len(boundary):
            raise MeshError("boundary tag list length mismatch")
        for e, tag in zip(boundary, tags):
            if tag not in (DIRICHLET, NEUMANN):
                raise MeshError(f"unknown boundary tag {tag!r}")
            mesh.boundary_tags[int(e)] = tag
    return mesh


def validate(mesh, rtol=1e-12):
    """Check orientation, Euler formula, manifoldness and total area."""
    areas = mesh.cell_areas()
    if np.any(areas <= 0):
        raise MeshError("non-positive cell area")
    V, E, T = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    if V - E + T != 1:
        raise MeshError(f"Euler formula violated: V-E+T = {V - E + T}")
    total = areas.sum()
    if abs(total - mesh.domain_area()) > rtol * mesh.domain_area():
        raise MeshError(f"area sum {total} does not match the domain")
    for e in mesh.boundary_edges:
        if mesh.edge_cells[e, 0] < 0:
            raise MeshError("boundary edge with no adjacent cell")
    return True


def export_text(mesh, path):
    """Plain-text mesh dump: header `V T E`, vertex lines, cell lines."""
    with open(path, "w") as f:
        f.write(f"{mesh.n_vertices} {mesh.n_cells} {mesh.n_edges}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.cells:
            f.write(f"{a} {b} {c}\n")


def export_vtk(mesh, path, point_data=None, cell_data=None):
    """Legacy ASCII VTK unstructured-grid export for inspection.

    point_data: name -> (V,) or (V, 2) arrays; cell_data: name -> (T,) arrays.
    """
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{mesh.family} mesh N={mesh.n_per_side}\n")
        f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        f.write(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}\n")
        for a, b, c in mesh.cells:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {mesh.n_cells}\n")
        f.write("5\n" * mesh.n_cells)
        if point_data:
            f.write(f"POINT_DATA {mesh.n_vertices}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr)
                if arr.ndim == 2:
                    f.write(f"VECTORS {name} double\n")
                    for vx, vy in arr:
                        f.write(f"{float(vx)!r} {float(vy)!r} 0.0\n")
                else:
                    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in arr:
                        f.write(f"{float(v)!r}\n")
        if cell_data:
            f.write(f"CELL_DATA {mesh.n_cells}\n")
            for name, arr in cell_data.items():
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(arr):
                    f.write(f"{float(v)!r}\n")
