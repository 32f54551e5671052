"""Assembly of the seven bilinear-form blocks of the three-field pencil.

The left-hand side couples stress (RT0 per row), displacement (vector P1)
and rotation (DG0) through the blocks

    A: (Cm s, Cm t) + (div s, div t) + (as s, as t)      stress x stress
    B: -(Cm s, grad v)                                   disp   x stress
    C: +(Cm s, chi p)                                    rot    x stress
    D: (grad u, grad v)                                  disp   x disp
    E: -(grad u, chi p)                                  rot    x disp
    F: (chi q, chi p) = 2 (q, p)                         rot    x rot
    G: -(u, div t)                                       stress x disp (rhs)

with Cm the compliance map and chi the 2D rotation generator
[[0, -1], [1, 0]].  All integrands are polynomials of degree <= 2, so the
3-point edge-midpoint rule integrates every term exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dof import DofMap, ElasticParams
from .mesh import cross2


class AssemblyError(ValueError):
    pass


@dataclass
class BlockSystem:
    """Global sparse blocks, each indexed from zero within its own space."""

    A: sp.csr_matrix          # n_stress x n_stress
    B: sp.csr_matrix          # n_disp x n_stress
    C: sp.csr_matrix          # n_rot x n_stress
    D: sp.csr_matrix          # n_disp x n_disp
    E: sp.csr_matrix          # n_rot x n_disp
    F: sp.csr_matrix          # n_rot x n_rot, diagonal
    G: sp.csr_matrix          # n_stress x n_disp
    params: ElasticParams
    dofmap: DofMap
    stress_trace: np.ndarray  # integral of tr(tau_i) per stress DOF
    rot_mean: np.ndarray      # integral of the DG0 basis per cell (= |K|)

    def lhs_matrix(self):
        """The full symmetric left-hand block matrix."""
        return sp.bmat(
            [[self.A, self.B.T, self.C.T],
             [self.B, self.D, self.E.T],
             [self.C, self.E, self.F]],
            format="csr",
        )

    def rhs_matrix(self):
        """The singular right-hand block matrix (G in the (0, 1) slot)."""
        ns, nd, nr = self.A.shape[0], self.D.shape[0], self.F.shape[0]
        rows = [[None, self.G, None],
                [sp.csr_matrix((nd, ns)), None, None],
                [None, None, sp.csr_matrix((nr, nr))]]
        return sp.bmat(rows, format="csr")


def compliance_apply(tau, params):
    """Apply the compliance map: (tau - tf * tr(tau) I) / (2 mu), d = 2."""
    tau = np.asarray(tau, dtype=float)
    tr = tau[0, 0] + tau[1, 1]
    return (tau - params.trace_factor * tr * np.eye(2)) / (2.0 * params.mu)


def _cell_geometry(mesh, cells=None):
    """Batched per-cell geometry: points, areas, P1 gradients, RT0 data."""
    idx = np.arange(mesh.n_cells) if cells is None else np.atleast_1d(cells)
    pts = mesh.vertices[mesh.cells[idx]]                      # (T,3,2)
    area = 0.5 * cross2(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
    if np.any(area < 1e-14):
        raise AssemblyError("degenerate cell (area below 1e-14)")
    nxt = pts[:, [1, 2, 0]]
    prv = pts[:, [2, 0, 1]]
    grads = np.stack([nxt[..., 1] - prv[..., 1], prv[..., 0] - nxt[..., 0]],
                     axis=-1) / (2.0 * area[:, None, None])   # (T,3,2)
    elen = np.linalg.norm(prv - nxt, axis=-1)                 # (T,3)
    signs = mesh.cell_edge_signs[idx]
    coef = signs * elen / (2.0 * area[:, None])               # (T,3)
    qpts = 0.5 * (nxt + prv)                                  # (T,3,2) edge midpoints
    return idx, pts, area, grads, coef, qpts


def local_blocks(mesh, cell, params):
    """Element matrices (A, B, C, D, E, F, G) for one cell.

    Stress local index is row*3 + local_edge; displacement local index is
    component*3 + local_vertex.
    """
    out = _batched_blocks(mesh, params, cells=cell)
    return tuple(m[0] for m in out[:7])


def _batched_blocks(mesh, params, cells=None):
    idx, pts, area, grads, coef, qpts = _cell_geometry(mesh, cells)
    T = len(idx)
    w = area / 3.0                                            # midpoint-rule weight

    # RT0 values at the quadrature points: phi[t, loc, q, xy]
    phi = coef[:, :, None, None] * (qpts[:, None, :, :] - pts[:, :, None, :])
    div = 2.0 * coef                                          # (T,3)

    # stress tensor basis tau[t, s, q, i, j], s = row*3 + loc
    tau = np.zeros((T, 6, 3, 2, 2))
    tau[:, 0:3, :, 0, :] = phi
    tau[:, 3:6, :, 1, :] = phi

    tr = tau[..., 0, 0] + tau[..., 1, 1]
    At = tau.copy()
    At[..., 0, 0] -= params.trace_factor * tr
    At[..., 1, 1] -= params.trace_factor * tr
    At /= 2.0 * params.mu

    skew = tau[..., 1, 0] - tau[..., 0, 1]                    # s(tau), (T,6,3)
    divvec = np.zeros((T, 6, 2))
    divvec[:, 0:3, 0] = div
    divvec[:, 3:6, 1] = div

    A_el = np.einsum("t,taqij,tbqij->tab", w, At, At)
    A_el += area[:, None, None] * np.einsum("tai,tbi->tab", divvec, divvec)
    A_el += 0.5 * np.einsum("t,taq,tbq->tab", w, skew, skew)

    # displacement basis m = comp*3 + vert; grad of v_m has row comp = grads[v]
    B_el = np.zeros((T, 6, 6))
    AtInt = np.einsum("t,tsqcj->tscj", w, At)                 # integral of Cm tau
    for c in range(2):
        B_el[:, 3 * c:3 * c + 3, :] = -np.einsum("tsj,tvj->tvs", AtInt[:, :, c, :], grads)

    C_el = np.einsum("t,tsq->ts", w, At[..., 1, 0] - At[..., 0, 1])[:, None, :]

    gg = np.einsum("tvi,twi->tvw", grads, grads) * area[:, None, None]
    D_el = np.zeros((T, 6, 6))
    D_el[:, 0:3, 0:3] = gg
    D_el[:, 3:6, 3:6] = gg

    E_el = np.zeros((T, 1, 6))
    # (chi p, grad v) = grad_v[1,0] - grad_v[0,1]; E is its negative
    E_el[:, 0, 0:3] = area[:, None] * grads[:, :, 1]          # -(-g_y) for comp 0
    E_el[:, 0, 3:6] = -area[:, None] * grads[:, :, 0]         # -(+g_x) for comp 1

    F_el = 2.0 * area.reshape(T, 1, 1)

    G_el = np.zeros((T, 6, 6))
    third = area / 3.0
    for r in range(2):
        for loc in range(3):
            s = 3 * r + loc
            for v in range(3):
                G_el[:, s, 3 * r + v] = -div[:, loc] * third

    return A_el, B_el, C_el, D_el, E_el, F_el, G_el, idx


def _scatter(rows, cols, vals, shape):
    rows = rows.ravel()
    cols = cols.ravel()
    vals = vals.ravel()
    keep = (rows >= 0) & (cols >= 0)
    m = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=shape)
    return m.tocsr()


def assemble_blocks(mesh, dofmap, params):
    """Assemble the global sparse blocks by scattering the element blocks."""
    if dofmap.mesh is not mesh:
        if dofmap.mesh.n_cells != mesh.n_cells or dofmap.mesh.n_edges != mesh.n_edges:
            raise AssemblyError("mesh and dofmap are inconsistent")
    A_el, B_el, C_el, D_el, E_el, F_el, G_el, idx = _batched_blocks(mesh, params)
    T = len(idx)

    nFE = dofmap.n_free_edges
    nFV = dofmap.n_free_vertices
    ns, nd, nr = dofmap.n_stress, dofmap.n_disp, dofmap.n_rot

    epos = dofmap.edge_pos[mesh.cell_edges[idx]]              # (T,3)
    gs = np.concatenate([np.where(epos >= 0, epos, -1),
                         np.where(epos >= 0, epos + nFE, -1)], axis=1)  # (T,6)
    vpos = dofmap.vertex_pos[mesh.cells[idx]]                 # (T,3)
    gd = np.concatenate([np.where(vpos >= 0, vpos, -1),
                         np.where(vpos >= 0, vpos + nFV, -1)], axis=1)  # (T,6)
    gr = idx.reshape(T, 1)

    def pair(r, c):
        return (np.repeat(r[:, :, None], c.shape[1], axis=2),
                np.repeat(c[:, None, :], r.shape[1], axis=1))

    rA, cA = pair(gs, gs)
    A = _scatter(rA, cA, A_el, (ns, ns))
    rB, cB = pair(gd, gs)
    B = _scatter(rB, cB, B_el, (nd, ns))
    rC, cC = pair(gr, gs)
    C = _scatter(rC, cC, C_el, (nr, ns))
    rD, cD = pair(gd, gd)
    D = _scatter(rD, cD, D_el, (nd, nd))
    rE, cE = pair(gr, gd)
    E = _scatter(rE, cE, E_el, (nr, nd))
    rF, cF = pair(gr, gr)
    F = _scatter(rF, cF, F_el, (nr, nr))
    rG, cG = pair(gs, gd)
    G = _scatter(rG, cG, G_el, (ns, nd))

    # integral of tr(tau_s) per stress DOF (for the optional mean-trace
    # constraint): tr of the row-r field is the r-th component of phi
    _, pts, area, grads, coef, qpts = _cell_geometry(mesh)
    phi = coef[:, :, None, None] * (qpts[:, None, :, :] - pts[:, :, None, :])
    w = area / 3.0
    tr_loc = np.concatenate([np.einsum("t,tlq->tl", w, phi[..., 0]),
                             np.einsum("t,tlq->tl", w, phi[..., 1])], axis=1)
    stress_trace = np.zeros(ns)
    np.add.at(stress_trace, np.where(gs >= 0, gs, 0), np.where(gs >= 0, tr_loc, 0.0))

    blocks = BlockSystem(A=A, B=B, C=C, D=D, E=E, F=F, G=G,
                         params=params, dofmap=dofmap,
                         stress_trace=stress_trace, rot_mean=area.copy())
    return blocks


def export_matrix_market(matrix, path):
    """Matrix Market coordinate export for cross-checking with other tools."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(matrix))
