"""P1 finite elements for the Laplace-Beltrami operator on closed surfaces."""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, splu

from .errors import NonFiniteEntry, SolverFailure, ZeroFunction
from .mesh import _EDGE_CORNERS, heron

DENSE_LIMIT = 3000
CLUSTER_GAP = 1e-6
SPARSE_EXTRA = 8


def cotangents(lengths):
    """Cotangent of the angle at each corner, from the three opposite lengths."""
    lengths = np.asarray(lengths, dtype=float)
    area = heron(lengths)
    sq = lengths**2
    cot = np.empty_like(lengths)
    for k, (i, j) in enumerate(_EDGE_CORNERS):
        cot[:, k] = (sq[:, i] + sq[:, j] - sq[:, k]) / (4.0 * area)
    return cot


def stiffness_matrix(triangles, lengths, n):
    cot = cotangents(lengths)
    rows, cols, vals = [], [], []
    for k, (i, j) in enumerate(_EDGE_CORNERS):
        w = 0.5 * cot[:, k]
        a, b = triangles[:, i], triangles[:, j]
        rows += [a, b, a, b]
        cols += [b, a, a, b]
        vals += [-w, -w, w, w]
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return K.tocsr()


def mass_matrix(triangles, lengths, n, lumped=True):
    area = heron(lengths)
    if lumped:
        m = np.bincount(triangles.ravel(), weights=np.repeat(area / 3.0, 3), minlength=n)
        return sp.diags(m, format="csr")
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            rows.append(triangles[:, a])
            cols.append(triangles[:, b])
            vals.append(area / (6.0 if a == b else 12.0))
    M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return M.tocsr()


def assemble(mesh, lumped=True):
    """Stiffness and mass matrices ``(K, M)``.

    K is built from the background lengths of the conformal class, so it does
    not change under :func:`confspec.mesh.apply_conformal_factor`; M uses the
    actual metric.
    """
    K = stiffness_matrix(mesh.triangles, mesh.base_lengths, mesh.n_vertices)
    M = mass_matrix(mesh.triangles, mesh.edge_lengths, mesh.n_vertices, lumped=lumped)
    if not (np.all(np.isfinite(K.data)) and np.all(np.isfinite(M.data))):
        raise NonFiniteEntry("non-finite FEM matrix entry (degenerate triangle?)")
    return K, M


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    volume: float
    m: int = 2

    @property
    def normalized(self):
        return self.eigenvalues * self.volume ** (2.0 / self.m)

    def clusters(self, gap=CLUSTER_GAP):
        """``[(mean value, multiplicity, first index)]`` for the computed eigenvalues.

        The last cluster may be cut short by the number of computed pairs.
        """
        lam = self.eigenvalues
        out = []
        start = 0
        for j in range(1, len(lam) + 1):
            if j == len(lam) or lam[j] - lam[j - 1] > gap * max(abs(lam[j]), 1e-300):
                out.append((float(lam[start:j].mean()), j - start, start))
                start = j
        return out

    def multiplicity(self, index):
        for _, mult, first in self.clusters():
            if first <= index < first + mult:
                return mult
        raise IndexError(index)


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def eigenpairs(K, M, k):
    """Smallest ``k + 1`` eigenpairs of ``K v = lambda M v``.

    Up to :data:`DENSE_LIMIT` unknowns a dense solver is used, above that
    shift-invert Lanczos (ARPACK) with a seeded start vector. Either way the
    result is cleaned by a Rayleigh-Ritz step so that the eigenvectors are
    M-orthonormal to rounding.
    """
    if k < 2:
        raise ValueError("need k >= 2")
    n = K.shape[0]
    nev = k + 1
    if n <= DENSE_LIMIT:
        try:
            w, V = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, nev - 1])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverFailure(str(exc)) from exc
    else:
        diagK = K.diagonal().sum()
        diagM = M.diagonal().sum()
        sigma = -0.05 * diagK / (diagM * n) * 4.0
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            # extra pairs so that a degenerate cluster at the cut is not lost
            w, V = eigsh(K, k=min(nev + SPARSE_EXTRA, n - 1), M=M, sigma=sigma, which="LM", v0=v0, tol=1e-12)
        except ArpackNoConvergence as exc:
            raise SolverFailure(str(exc)) from exc
        order = np.argsort(w)
        V = V[:, order]
    Ks = V.T @ (K @ V)
    Ms = V.T @ (M @ V)
    w, C = scipy.linalg.eigh(0.5 * (Ks + Ks.T), 0.5 * (Ms + Ms.T))
    w, C = w[:nev], C[:, :nev]
    V = _fix_signs(V @ C)
    volume = float(M.sum())
    return SpectralSummary(w, V, volume)


def normalized(summary):
    return summary.normalized


def rayleigh_quotient(K, M, f):
    f = np.asarray(f, dtype=float)
    den = f @ (M @ f)
    if not den > 0:
        raise ZeroFunction("Rayleigh quotient of the zero function")
    return float(f @ (K @ f) / den)


def eigen_residual(K, M, f, lam):
    """Relative residual ``||K f - lam M f||_{M^-1} / (lam ||f||_M)``."""
    f = np.asarray(f, dtype=float)
    r = K @ f - lam * (M @ f)
    if sp.issparse(M) and M.nnz == M.shape[0] and np.all(M.diagonal() > 0):
        dual = r @ (r / M.diagonal())
    else:
        dual = r @ splu(sp.csc_matrix(M)).solve(r)
    return float(np.sqrt(dual) / (lam * np.sqrt(f @ (M @ f))))


def export_matrix_market(K, M, prefix):
    scipy.io.mmwrite(f"{prefix}_stiffness.mtx", K)
    scipy.io.mmwrite(f"{prefix}_mass.mtx", M)
    return f"{prefix}_stiffness.mtx", f"{prefix}_mass.mtx"


def solve(mesh, k=6, lumped=True):
    """Convenience wrapper: assemble and solve."""
    K, M = assemble(mesh, lumped=lumped)
    return eigenpairs(K, M, k), K, M
