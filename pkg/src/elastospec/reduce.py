"""Rotation elimination and the displacement-sized Schur pencil.

With F invertible the rotation satisfies psi = -F^{-1} (C sigma + E u),
which collapses the 3x3 block pencil to a 2x2 one with

    At = A - C^t F^{-1} C      Bt = B^t - C^t F^{-1} E
    Ct = B - E^t F^{-1} C      Dt = D - E^t F^{-1} E

and finally to the displacement pencil

    (Ct At^{-1} Bt - Dt) u = gamma (Ct At^{-1} G) u.

The default (unconstrained) mode exploits the diagonal DG0 mass matrix F.
The optional constrained mode appends two scalar multiplier unknowns
enforcing zero mean of tr(sigma) and of psi; it is meant for coarse-mesh
comparison runs and works on dense matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assemble import BlockSystem


class ReductionError(RuntimeError):
    pass


@dataclass
class TildeSystem:
    """The four eliminated matrices plus what back-substitution needs."""

    At: sp.csr_matrix
    Bt: sp.csr_matrix
    Ct: sp.csr_matrix
    Dt: sp.csr_matrix
    G: sp.csr_matrix
    blocks: BlockSystem
    f_inv_diag: np.ndarray | None    # None in constrained mode
    constrained: bool = False

    def solve_f(self, rhs):
        """Apply F^{-1} (diagonal in the unconstrained mode)."""
        if self.f_inv_diag is not None:
            return self.f_inv_diag[:, None] * rhs if rhs.ndim == 2 else self.f_inv_diag * rhs
        return self._f_dense_solve(rhs)

    def _f_dense_solve(self, rhs):
        return np.linalg.solve(self._f_aug, rhs)


def eliminate_rotation(blocks, constrained=False):
    """Form the tilde matrices by eliminating the rotation via F^{-1}."""
    if constrained:
        return _eliminate_constrained(blocks)
    f_diag = blocks.F.diagonal()
    if blocks.F.nnz != np.count_nonzero(f_diag) or np.any(f_diag <= 0):
        raise ReductionError("rotation mass matrix not invertible")
    f_inv = 1.0 / f_diag
    Finv = sp.diags(f_inv)
    C, E = blocks.C, blocks.E
    FC = Finv @ C
    FE = Finv @ E
    At = (blocks.A - C.T @ FC).tocsr()
    Bt = (blocks.B.T - C.T @ FE).tocsr()
    Ct = (blocks.B - E.T @ FC).tocsr()
    Dt = (blocks.D - E.T @ FE).tocsr()
    return TildeSystem(At=At, Bt=Bt, Ct=Ct, Dt=Dt, G=blocks.G,
                       blocks=blocks, f_inv_diag=f_inv)


def _eliminate_constrained(blocks):
    """Constrained mode: zero-mean multipliers on tr(sigma) and psi.

    The stress block gains one multiplier column (mean trace), the
    rotation block one (mean rotation); the eliminated system keeps the
    displacement size.  Dense, intended for coarse meshes.
    """
    A = blocks.A.toarray()
    B = blocks.B.toarray()
    C = blocks.C.toarray()
    D = blocks.D.toarray()
    E = blocks.E.toarray()
    F = blocks.F.toarray()
    G = blocks.G.toarray()
    t = blocks.stress_trace
    m = blocks.rot_mean
    ns, nd, nr = A.shape[0], D.shape[0], F.shape[0]

    A_aug = np.zeros((ns + 1, ns + 1))
    A_aug[:ns, :ns] = A
    A_aug[:ns, ns] = t
    A_aug[ns, :ns] = t
    B_aug = np.hstack([B, np.zeros((nd, 1))])
    C_aug = np.zeros((nr + 1, ns + 1))
    C_aug[:nr, :ns] = C
    E_aug = np.vstack([E, np.zeros((1, nd))])
    F_aug = np.zeros((nr + 1, nr + 1))
    F_aug[:nr, :nr] = F
    F_aug[:nr, nr] = m
    F_aug[nr, :nr] = m
    G_aug = np.vstack([G, np.zeros((1, nd))])

    FC = np.linalg.solve(F_aug, C_aug)
    FE = np.linalg.solve(F_aug, E_aug)
    ts = TildeSystem(
        At=sp.csr_matrix(A_aug - C_aug.T @ FC),
        Bt=sp.csr_matrix(B_aug.T - C_aug.T @ FE),
        Ct=sp.csr_matrix(B_aug - E_aug.T @ FC),
        Dt=sp.csr_matrix(D - E_aug.T @ FE),
        G=sp.csr_matrix(G_aug),
        blocks=blocks, f_inv_diag=None, constrained=True)
    ts._f_aug = F_aug
    ts._c_aug = C_aug
    ts._e_aug = E_aug
    return ts


@dataclass
class SchurPencil:
    """Dense pencil M u = gamma N u on the displacement unknowns."""

    M: np.ndarray
    N_rhs: np.ndarray
    tilde: TildeSystem

    @property
    def size(self):
        return self.M.shape[0]


def _factorize(At):
    try:
        lu = spla.splu(At.tocsc())
    except RuntimeError as err:  # pragma: no cover - SuperLU breakdown
        raise ReductionError(f"factorization of the eliminated stress block failed: {err}")
    return lu


def build_schur_pencil(tilde, chunk=512):
    """Build M = Ct At^{-1} Bt - Dt and N = Ct At^{-1} G column by column."""
    lu = _factorize(tilde.At)
    tilde._at_lu = lu
    Ct = tilde.Ct.toarray()
    nd = tilde.Dt.shape[0]

    def schur_product(Rhs):
        out = np.empty((nd, Rhs.shape[1]))
        for lo in range(0, Rhs.shape[1], chunk):
            cols = np.asarray(Rhs[:, lo:lo + chunk].todense())
            out[:, lo:lo + chunk] = Ct @ lu.solve(cols)
        return out

    M = schur_product(tilde.Bt.tocsc()) - tilde.Dt.toarray()
    N = schur_product(tilde.G.tocsc())
    return SchurPencil(M=M, N_rhs=N, tilde=tilde)


def recover_fields(pencil, gamma, u_hat):
    """Back-substitute an eigenpair of the Schur pencil to (sigma, psi).

    sigma solves At sigma = gamma G u - Bt u; the rotation follows from
    psi = -F^{-1} (C sigma + E u).
    """
    u_hat = np.asarray(u_hat)
    if not np.any(np.abs(u_hat) > 0):
        raise ReductionError("u_hat = 0 is not a valid eigenvector")
    tilde = pencil.tilde
    lu = getattr(tilde, "_at_lu", None)
    if lu is None:
        lu = _factorize(tilde.At)
        tilde._at_lu = lu

    rhs = gamma * (tilde.G @ u_hat) - tilde.Bt @ u_hat
    if np.iscomplexobj(rhs):
        sigma = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
    else:
        sigma = lu.solve(rhs)

    if tilde.constrained:
        C = tilde._c_aug
        E = tilde._e_aug
        psi = -tilde.solve_f(C @ sigma + E @ u_hat)
    else:
        psi = -tilde.f_inv_diag * (tilde.blocks.C @ sigma + tilde.blocks.E @ u_hat)
    return sigma, psi


def system_residuals(blocks, gamma, sigma, u_hat, psi):
    """Relative residuals of the three coupled equations (debug/test aid)."""
    scale = max(np.linalg.norm(u_hat), np.linalg.norm(sigma), 1e-300)
    r1 = blocks.A @ sigma + blocks.B.T @ u_hat + blocks.C.T @ psi - gamma * (blocks.G @ u_hat)
    r2 = blocks.B @ sigma + blocks.D @ u_hat + blocks.E.T @ psi
    r3 = blocks.C @ sigma + blocks.E @ u_hat + blocks.F @ psi
    return tuple(np.linalg.norm(r) / scale for r in (r1, r2, r3))
