"""Discrete spaces and global index layout.

Stress lives in RT0 per tensor row (one normal-flux DOF per edge per row),
displacement in vector continuous P1 (two DOFs per free vertex), rotation
in scalar DG0 (one DOF per cell).  The global ordering is stress, then
displacement, then rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import DIRICHLET, NEUMANN, TriMesh, cross2


class DofError(ValueError):
    pass


@dataclass(frozen=True)
class ElasticParams:
    """Lame parameters; mu > 0 and lambda finite and > 0."""

    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise DofError("mu must be positive and finite")
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise DofError("lambda must be positive and finite")

    @property
    def trace_factor(self):
        # lambda / (d*lambda + 2*mu) with d = 2
        return self.lam / (2.0 * self.lam + 2.0 * self.mu)


class DofMap:
    """Index layout for (stress, displacement, rotation) unknowns.

    ``edge_pos[e]`` is the position of edge ``e`` among unconstrained
    edges (-1 when the edge carries a Neumann stress constraint);
    ``vertex_pos[v]`` likewise for free vertices.
    """

    def __init__(self, mesh: TriMesh, bc="dirichlet_all"):
        if mesh.edges is None:
            raise DofError("mesh topology not built")
        E, V, T = mesh.n_edges, mesh.n_vertices, mesh.n_cells

        neumann_edges = {e for e, tag in mesh.boundary_tags.items() if tag == NEUMANN}
        dirichlet_edges = [e for e, tag in mesh.boundary_tags.items() if tag == DIRICHLET]

        self.edge_pos = -np.ones(E, dtype=int)
        free_edges = [e for e in range(E) if e not in neumann_edges]
        self.edge_pos[free_edges] = np.arange(len(free_edges))
        self.n_free_edges = len(free_edges)

        fixed = set()
        for e in dirichlet_edges:
            fixed.update(mesh.edges[e])
        self.vertex_pos = -np.ones(V, dtype=int)
        free_verts = [v for v in range(V) if v not in fixed]
        self.vertex_pos[free_verts] = np.arange(len(free_verts))
        self.n_free_vertices = len(free_verts)
        self.free_vertices = np.array(free_verts, dtype=int)

        if self.n_free_vertices == 0:
            raise DofError("empty displacement space: no free vertices")

        self.n_stress = 2 * self.n_free_edges
        self.n_disp = 2 * self.n_free_vertices
        self.n_rot = T
        self.mesh = mesh
        self.bc = bc

    @property
    def total(self):
        return self.n_stress + self.n_disp + self.n_rot

    def stress_index(self, row, edge):
        p = self.edge_pos[edge]
        return -1 if p < 0 else row * self.n_free_edges + p

    def disp_index(self, component, vertex):
        p = self.vertex_pos[vertex]
        return -1 if p < 0 else self.n_stress + component * self.n_free_vertices + p

    def rot_index(self, cell):
        return self.n_stress + self.n_disp + cell


def build_dofmap(mesh, bc="dirichlet_all"):
    return DofMap(mesh, bc=bc)


@dataclass(frozen=True)
class RT0Basis:
    """One RT0 basis field phi(x) = coef * (x - opposite), div phi = 2*coef."""

    opposite: np.ndarray
    coef: float

    def __call__(self, x):
        return self.coef * (np.asarray(x) - self.opposite)

    @property
    def divergence(self):
        return 2.0 * self.coef


def rt0_basis_on_cell(mesh, cell):
    """The three edge-associated RT0 fields of a cell.

    Field ``i`` belongs to the edge opposite local vertex ``i``; its normal
    flux across that edge is 1 in the global edge orientation and 0 across
    the other two.
    """
    tri = mesh.cells[cell]
    p = mesh.vertices[tri]
    area = 0.5 * cross2(p[1] - p[0], p[2] - p[0])
    if area <= 0:
        raise DofError(f"cell {cell} has non-positive area")
    out = []
    for loc in range(3):
        a, b = p[(loc + 1) % 3], p[(loc + 2) % 3]
        length = float(np.hypot(*(b - a)))
        sign = mesh.cell_edge_signs[cell, loc]
        out.append(RT0Basis(opposite=p[loc], coef=sign * length / (2.0 * area)))
    return out


def p1_gradients(mesh, cell):
    """Constant gradients of the three P1 hat functions on a cell."""
    tri = mesh.cells[cell]
    p = mesh.vertices[tri]
    area = 0.5 * cross2(p[1] - p[0], p[2] - p[0])
    g = np.empty((3, 2))
    for loc in range(3):
        a, b = p[(loc + 1) % 3], p[(loc + 2) % 3]
        # rotate the opposite edge vector by -90 degrees, scale by 1/(2|K|)
        g[loc] = np.array([a[1] - b[1], b[0] - a[0]]) / (2.0 * area)
    return g
