"""Generalized-pencil eigensolves and spectral analytics.

The displacement pencil M u = gamma N u has a singular, non-symmetric
right-hand side, so the solve goes through a QZ-style reduction returning
(alpha, beta) ratio pairs; small-beta modes are classified as infinite.
The module also hosts the independent primal oracle: a conforming vector
P2 discretization of the classical displacement eigenproblem, used to
derive reference eigenvalues.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mesh as meshmod


class SpectrumError(RuntimeError):
    pass


@dataclass
class Spectrum:
    """Finite complex eigenvalues plus the count of infinite modes.

    ``finite`` is sorted by modulus, then by imaginary part (negative
    first), making the ordering total and test-stable.
    """

    finite: np.ndarray
    n_infinite: int
    vectors: np.ndarray | None = None   # columns aligned with ``finite``
    meta: dict = field(default_factory=dict)

    @property
    def size(self):
        return len(self.finite) + self.n_infinite


def _modulus_order(values):
    return np.lexsort((values.imag, np.abs(values)))


def solve_pencil(M, N_rhs, filter_ratio=1e10, want_vectors=False, meta=None):
    """Full QZ solve of M v = gamma N v with infinite-mode filtering.

    A mode is infinite when its |beta| falls below a pencil-norm-scaled
    threshold, or when its modulus exceeds ``filter_ratio`` times the
    median modulus of the provisionally finite ones.
    """
    M = np.asarray(M, dtype=float)
    N_rhs = np.asarray(N_rhs, dtype=float)
    n = M.shape[0]
    if M.shape != N_rhs.shape or M.shape[0] != M.shape[1]:
        raise SpectrumError("pencil matrices must be square and same shape")
    if filter_ratio <= 0:
        raise SpectrumError("filter_ratio must be positive")

    try:
        if want_vectors:
            (alpha, beta), vecs = la.eig(M, N_rhs, homogeneous_eigvals=True,
                                         right=True)
        else:
            alpha, beta = la.eig(M, N_rhs, homogeneous_eigvals=True,
                                 right=False)
            vecs = None
    except la.LinAlgError as err:
        raise SpectrumError(f"QZ iteration failed: {err}")

    # stage 1: beta below a norm-scaled threshold means an infinite mode
    pencil_scale = max(np.abs(alpha).max(initial=0.0), np.abs(beta).max(initial=0.0))
    beta_tol = n * np.finfo(float).eps * max(pencil_scale, 1e-300)
    finite_mask = np.abs(beta) > beta_tol

    # stage 2: modulus-outlier cut against the finite median
    if np.any(finite_mask):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(finite_mask, alpha / np.where(beta == 0, 1, beta), np.inf)
        med = np.median(np.abs(ratios[finite_mask]))
        if med > 0 and np.isfinite(med):
            finite_mask &= np.abs(ratios) <= filter_ratio * med

    if not np.any(finite_mask):
        raise SpectrumError("empty finite spectrum: all modes classified infinite")

    gammas = alpha[finite_mask] / beta[finite_mask]
    order = _modulus_order(gammas)
    gammas = gammas[order]
    out_vecs = None
    if vecs is not None:
        out_vecs = vecs[:, finite_mask][:, order]
    return Spectrum(finite=gammas, n_infinite=int(n - len(gammas)),
                    vectors=out_vecs, meta=dict(meta or {}))


def smallest_modulus_eigs(M, N_rhs, k=8, want_vectors=False, meta=None):
    """The k smallest-modulus finite eigenvalues via shift-invert Arnoldi.

    Works on the reversed pencil N v = (1/gamma) M v: the largest-modulus
    eigenvalues of M^{-1} N are the reciprocals of the wanted gammas.
    Much cheaper than the full QZ solve for fine meshes.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    k = min(k, n - 2)
    if k < 1:
        spec = solve_pencil(M, N_rhs, want_vectors=want_vectors, meta=meta)
        return spec
    lu = la.lu_factor(M)
    op = spla.LinearOperator((n, n), matvec=lambda x: la.lu_solve(lu, N_rhs @ x))
    v0 = np.full(n, 1.0 / np.sqrt(n))
    theta, vecs = spla.eigs(op, k=k, which="LM", v0=v0)
    keep = np.abs(theta) > n * np.finfo(float).eps * np.abs(theta).max()
    gammas = 1.0 / theta[keep]
    vecs = vecs[:, keep]
    order = _modulus_order(gammas)
    return Spectrum(finite=gammas[order], n_infinite=0,
                    vectors=vecs[:, order] if want_vectors else None,
                    meta=dict(meta or {}, truncated=True, k=k))


def eigenpair_residual(M, N_rhs, gamma, v):
    """Relative residual ||M v - gamma N v|| / (||M|| ||v||)."""
    r = M @ v - gamma * (N_rhs @ v)
    return np.linalg.norm(r) / (np.linalg.norm(M, "fro") * np.linalg.norm(v))


def check_conjugate_closure(values, rtol=1e-8):
    """True when every strictly complex eigenvalue has its conjugate."""
    values = np.asarray(values)
    scale = np.abs(values).max(initial=1.0)
    for z in values:
        if abs(z.imag) <= rtol * max(abs(z), 1e-300):
            continue
        if np.min(np.abs(values - np.conj(z))) > rtol * scale:
            return False
    return True


def count_in_disk(spectrum, radius):
    """Number of finite eigenvalues with modulus strictly below radius."""
    if radius <= 0:
        raise SpectrumError("radius must be positive")
    values = spectrum.finite if isinstance(spectrum, Spectrum) else np.asarray(spectrum)
    return int(np.count_nonzero(np.abs(values) < radius))


def first_real_eigenvalue(spectrum, imag_rtol=1e-6):
    """Smallest-modulus essentially-real finite eigenvalue.

    Errors out when the two smallest-modulus values form a conjugate pair
    (nothing to track in that case; never silently picks one of them).
    """
    vals = spectrum.finite if isinstance(spectrum, Spectrum) else np.asarray(spectrum)
    if len(vals) == 0:
        raise SpectrumError("no finite eigenvalues")
    if len(vals) >= 2:
        a, b = vals[0], vals[1]
        if abs(a.imag) > imag_rtol * abs(a) and abs(a - np.conj(b)) <= 1e-8 * max(abs(a), 1e-300):
            raise SpectrumError("two smallest-modulus eigenvalues form a conjugate pair")
    for z in vals:
        if abs(z.imag) <= imag_rtol * abs(z):
            return float(z.real)
    raise SpectrumError("no essentially-real finite eigenvalue found")


# ---------------------------------------------------------------------------
# primal P2 oracle


def _p2_space(m):
    """Node numbering for quadratic elements: vertices then edge midpoints."""
    V, E = m.n_vertices, m.n_edges
    n_nodes = V + E
    cell_nodes = np.hstack([m.cells, V + m.cell_edges])        # (T, 6)
    coords = np.vstack([m.vertices, 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])])
    bvert = set(m.boundary_vertices().tolist())
    bedge = set(m.boundary_edges.tolist())
    boundary = np.array(sorted(bvert | {V + e for e in bedge}), dtype=int)
    free = np.setdiff1d(np.arange(n_nodes), boundary)
    return coords, cell_nodes, free


# degree-4 rule on the reference triangle (6 points, weights sum to 1)
_Q4_BARY = np.array([
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
])
_Q4_W = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3)


def _p2_shape(bary):
    """P2 shape values and barycentric gradients at given barycentric points."""
    l1, l2, l3 = bary[:, 0], bary[:, 1], bary[:, 2]
    vals = np.stack([
        l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
        4 * l2 * l3, 4 * l3 * l1, 4 * l1 * l2,
    ], axis=1)                                                # (q, 6)
    z = np.zeros_like(l1)
    dl = np.stack([
        np.stack([4 * l1 - 1, z, z], axis=1),
        np.stack([z, 4 * l2 - 1, z], axis=1),
        np.stack([z, z, 4 * l3 - 1], axis=1),
        np.stack([z, 4 * l3, 4 * l2], axis=1),
        np.stack([4 * l3, z, 4 * l1], axis=1),
        np.stack([4 * l2, 4 * l1, z], axis=1),
    ], axis=1)                                                # (q, 6, 3)
    return vals, dl


def _p2_matrices(m, lam, mu):
    """Sparse elasticity stiffness (2 mu eps:eps + lam div div) and mass."""
    pts = m.vertices[m.cells]                                 # (T,3,2)
    area = 0.5 * meshmod.cross2(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
    # gradients of barycentric coordinates
    nxt = pts[:, [1, 2, 0]]
    prv = pts[:, [2, 0, 1]]
    gl = np.stack([nxt[..., 1] - prv[..., 1], prv[..., 0] - nxt[..., 0]],
                  axis=-1) / (2.0 * area[:, None, None])      # (T,3,2)

    vals, dl = _p2_shape(_Q4_BARY)                            # (q,6), (q,6,3)
    # physical gradients: (T, q, 6, 2)
    g = np.einsum("qnb,tbx->tqnx", dl, gl)
    w = _Q4_W[None, :] * area[:, None]                        # (T, q)

    T = m.n_cells
    coords, cell_nodes, free = _p2_space(m)
    n_nodes = len(coords)

    # scalar building integrals
    Kxx = np.einsum("tq,tqn,tqm->tnm", w, g[..., 0], g[..., 0])
    Kyy = np.einsum("tq,tqn,tqm->tnm", w, g[..., 1], g[..., 1])
    Kxy = np.einsum("tq,tqn,tqm->tnm", w, g[..., 0], g[..., 1])
    Mel = np.einsum("tq,qn,qm->tnm", w, vals, vals)

    # vector element matrices (12x12, node-major inside each component block)
    K11 = 2 * mu * (Kxx + 0.5 * Kyy) + lam * Kxx
    K22 = 2 * mu * (Kyy + 0.5 * Kxx) + lam * Kyy
    K12 = mu * Kxy.transpose(0, 2, 1) + lam * Kxy
    # (eps(u):eps(v)) cross term: mu * (du1/dy dv2/dx) + lam div div cross

    rows_n = cell_nodes                                       # (T,6)

    def scatter(block, rowc, colc):
        r = np.repeat(rows_n[:, :, None], 6, axis=2) + rowc * n_nodes
        c = np.repeat(rows_n[:, None, :], 6, axis=1) + colc * n_nodes
        return sp.coo_matrix((block.ravel(), (r.ravel(), c.ravel())),
                             shape=(2 * n_nodes, 2 * n_nodes))

    K = (scatter(K11, 0, 0) + scatter(K22, 1, 1)
         + scatter(K12, 0, 1) + scatter(K12.transpose(0, 2, 1), 1, 0)).tocsr()
    Mass = (scatter(Mel, 0, 0) + scatter(Mel, 1, 1)).tocsr()

    keep = np.concatenate([free, free + n_nodes])
    return K[keep][:, keep], Mass[keep][:, keep]


def primal_oracle(domain, n, lam=1.0, mu=1.0, n_eigs=8):
    """Smallest eigenvalues of the classical displacement eigenproblem.

    Conforming vector P2 on a crossed mesh, clamped boundary; solved by
    shift-invert Lanczos.  Under refinement the values decrease
    monotonically toward the true eigenvalues.  Known limitation: volume
    locking makes the oracle unreliable for lam >= 1e4; use it for
    reference values only at moderate lam.
    """
    if lam >= 1e4:
        warnings.warn("primal oracle is locking-prone for lambda >= 1e4; "
                      "values are indicative only")
    family = "crossed" if domain == "square" else "uniform"
    m = meshmod.generate(domain, family, n)
    K, Mass = _p2_matrices(m, lam, mu)
    ndof = K.shape[0]
    k = min(n_eigs, ndof - 1)
    try:
        vals = spla.eigsh(K, k=k, M=Mass, sigma=0.0, which="LM",
                          v0=np.full(ndof, 1.0 / np.sqrt(ndof)),
                          return_eigenvectors=False)
    except RuntimeError as err:
        raise SpectrumError(f"oracle factorization failed (lambda={lam}): {err}")
    return np.sort(vals)


@dataclass
class ReferenceEigen:
    """A derived reference eigenvalue with provenance."""

    domain: str
    lam: float
    value: float
    uncertainty: float
    provenance: dict

    def __post_init__(self):
        if not self.uncertainty > 0:
            raise SpectrumError("reference uncertainty must be positive")

    def to_dict(self):
        return {"domain": self.domain, "lambda": self.lam, "value": self.value,
                "uncertainty": self.uncertainty, "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d):
        return cls(domain=d["domain"], lam=d["lambda"], value=d["value"],
                   uncertainty=d["uncertainty"], provenance=d["provenance"])


def richardson_reference(domain, lam=1.0, mu=1.0, levels=(32, 64, 128), index=0):
    """Richardson-extrapolated first oracle eigenvalue with observed order."""
    levels = tuple(levels)
    if len(levels) < 3:
        raise SpectrumError("need at least three oracle levels")
    vals = [primal_oracle(domain, n, lam=lam, mu=mu, n_eigs=index + 2)[index]
            for n in levels]
    g0, g1, g2 = vals[-3], vals[-2], vals[-1]
    num, den = g0 - g1, g1 - g2
    if den == 0 or num / den <= 1:
        order = 2.0
    else:
        order = float(np.log2(num / den))
    extrap = g2 - (g1 - g2) / (2.0 ** order - 1.0)
    unc = max(abs(extrap - g2), np.finfo(float).eps * abs(extrap))
    return ReferenceEigen(
        domain=domain, lam=lam, value=float(extrap), uncertainty=float(unc),
        provenance={
            "method": "primal-P2 shift-invert with Richardson extrapolation",
            "mesh": "crossed" if domain == "square" else "uniform",
            "levels": list(levels),
            "observed_order": order,
            "raw_values": [float(v) for v in vals],
            "eig_index": index,
        })


def estimate_rate(samples):
    """Least-squares slope of log(err) vs log(h), plus pairwise slopes.

    ``samples`` is a list of (h, err) with h strictly decreasing.  Samples
    with non-positive error are dropped with a warning.
    """
    clean = []
    for h, err in samples:
        if err <= 0:
            warnings.warn(f"dropping zero/negative error sample at h={h}")
            continue
        clean.append((h, err))
    if len(clean) < 2:
        raise SpectrumError("need at least two positive-error samples")
    h = np.array([s[0] for s in clean])
    if np.any(np.diff(h) >= 0):
        raise SpectrumError("h must be strictly decreasing")
    e = np.array([s[1] for s in clean])
    slope = np.polyfit(np.log(h), np.log(e), 1)[0]
    pairwise = np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
    return float(slope), pairwise.tolist()
