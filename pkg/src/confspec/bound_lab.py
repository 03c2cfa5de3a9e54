"""Folded, renormalized trial functions and the lambda_2 bound chain.

A conformal immersion ``phi: M -> S^n`` is first renormalized so that its
pushed-forward volume has center of mass zero. For a cap ``C`` the trial map is
``phi_{xi_C} o F_C o phi``; its coordinates are orthogonal to constants by the
choice of ``xi_C`` and, at a zero of ``psi(p, t)``, to the first eigenfunction.
Their summed Rayleigh quotient bounds ``lambda_2`` from above and their Dirichlet
energy is bounded by four times the conformal volume (m = 2).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from ._accel import worker_count
from .conformal_volume import estimate_vc
from .errors import NotAdmissible, SearchFailure
from .hersch import REL_TOL, renormalize
from .measure import DiscreteMeasure
from .mesh import ImmersionSamples, icosphere
from .sphere import SphericalCap, as_unit, degree_estimate, fold, moebius_apply, sphere_directions, tangent_basis
from .spectral import assemble, eigenpairs

SCHEMA_VERSION = 1
T_GRID = np.arange(16) / 16.0
T_MAX = 1.0 - 1e-6
CHAIN_SLACK = 0.02
RAYLEIGH_SLACK = 1e-9
ZERO_MOMENT = 1e-8


def _masses(mesh):
    return mesh.vertex_masses()


def moment_against_f1(mesh, images, f1):
    """``sum_v m_v f1(v) phi(v)`` with lumped vertex masses."""
    images = images.images if isinstance(images, ImmersionSamples) else np.asarray(images, dtype=float)
    return (_masses(mesh) * np.asarray(f1, dtype=float)) @ images


def first_eigenfunction(summary, mesh, images):
    """The lambda_1 eigenvector with the largest moment against ``images``.

    Returns ``(f1, index, moment)``. Ties (within 1e-12 relative) go to the
    lower index.
    """
    clusters = summary.clusters()
    if clusters[0][1] > 1:
        raise NotAdmissible("first eigenvalue cluster is not the simple constant mode")
    _, mult, first = clusters[1]
    best = None
    for j in range(first, first + mult):
        mom = moment_against_f1(mesh, images, summary.eigenvectors[:, j])
        nrm = float(np.linalg.norm(mom))
        if best is None or nrm > best[2] * (1.0 + 1e-12):
            best = (j, mom, nrm)
    j, mom, _ = best
    return summary.eigenvectors[:, j], j, mom


@dataclass(frozen=True, eq=False)
class FoldedTrial:
    functions: np.ndarray
    xi: np.ndarray
    mean_residual: float
    converged: bool


def folded_trial(mesh, phi, C, xi0=None, masses=None):
    """Coordinates of ``phi_{xi_C} o F_C o phi`` at the vertices.

    ``C=None`` skips the fold. ``xi_C`` is the renormalization point of the
    folded volume measure.
    """
    images = phi.images if isinstance(phi, ImmersionSamples) else np.asarray(phi, dtype=float)
    masses = _masses(mesh) if masses is None else masses
    G = images if C is None else fold(C, images)
    res = renormalize(DiscreteMeasure(G, masses), xi0=xi0)
    f = moebius_apply(res.xi, G)
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    mean = float(np.linalg.norm(masses @ f))
    return FoldedTrial(f, res.xi, mean, res.converged)


def psi(mesh, phi, f1, C, xi0=None, masses=None):
    """``psi(p, t)``: the f1-moment of the folded trial map, plus the trial."""
    masses = _masses(mesh) if masses is None else masses
    trial = folded_trial(mesh, phi, C, xi0=xi0, masses=masses)
    return (masses * f1) @ trial.functions, trial


@dataclass(frozen=True, eq=False)
class CapSearchResult:
    cap: SphericalCap
    xi: np.ndarray
    psi_norm: float
    tol_psi: float
    mean_residual: float
    moment_residual: np.ndarray
    evaluations: int
    landscape: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self):
        return self.psi_norm <= self.tol_psi


def _cap_from(p0, basis, s, t):
    """Cap at tangent offset ``s`` from ``p0``.

    Negative ``t`` means the complementary cap ``(-p, -t)``. Its folded trial
    map differs from that of ``(p, t)`` by an isometry, so ``|psi|`` continues
    smoothly through ``t = 0``.
    """
    p = as_unit(p0 + basis.T @ s)
    if t < 0.0:
        p, t = -p, -t
    return SphericalCap(p, float(min(t, T_MAX)))


class _PsiEval:
    """Memo-free psi evaluator that counts Hersch solves and keeps warm starts."""

    def __init__(self, mesh, phi, f1):
        self.mesh = mesh
        self.phi = phi
        self.f1 = np.asarray(f1, dtype=float)
        self.masses = _masses(mesh)
        self.count = 0

    def __call__(self, C, xi0=None):
        self.count += 1
        return psi(self.mesh, self.phi, self.f1, C, xi0=xi0, masses=self.masses)


def _sweep_direction(ev, p):
    """psi norms along the t grid for one direction, warm-starting in t."""
    out = np.empty(len(T_GRID))
    xis = []
    xi = None
    for k, t in enumerate(T_GRID):
        v, trial = ev(SphericalCap(p, t), xi0=xi)
        xi = trial.xi
        out[k] = np.linalg.norm(v)
        xis.append(xi)
    return out, xis


def _newton(ev, p0, t0, xi0, tol, max_iter=30, h=1e-6):
    """Newton on psi = 0 over (tangent offset of p, t)."""
    dim = p0.size
    basis = tangent_basis(p0)
    x = np.zeros(dim)
    x[-1] = t0
    v, trial = ev(_cap_from(p0, basis, x[:-1], x[-1]), xi0)
    xi = trial.xi
    best = (np.linalg.norm(v), x.copy(), trial)
    for _ in range(max_iter):
        if best[0] <= tol:
            break
        J = np.empty((dim, dim))
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = h
            xp = x + e
            xm = x - e
            if j == dim - 1:
                xp[-1] = min(xp[-1], T_MAX)
                xm[-1] = max(xm[-1], 0.0)
            vp, _ = ev(_cap_from(p0, basis, xp[:-1], xp[-1]), xi)
            vm, _ = ev(_cap_from(p0, basis, xm[:-1], xm[-1]), xi)
            J[:, j] = (vp - vm) / (xp[j] - xm[j])
        try:
            step = np.linalg.lstsq(J, -v, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        improved = False
        while lam > 1e-4:
            xn = x + lam * step
            xn[-1] = np.clip(xn[-1], 0.0, T_MAX)  # Newton stays on one side of t = 0
            vn, tn = ev(_cap_from(p0, basis, xn[:-1], xn[-1]), xi)
            if np.linalg.norm(vn) < np.linalg.norm(v):
                x, v, xi = xn, vn, tn.xi
                improved = True
                if np.linalg.norm(v) < best[0]:
                    best = (np.linalg.norm(v), x.copy(), tn)
                break
            lam *= 0.5
        if not improved:
            break
    nrm, x, trial = best
    return nrm, _cap_from(p0, basis, x[:-1], x[-1]), trial


def cap_search(mesh, phi, f1, n_directions=60, seed=0, candidates=4, refine_evals=60):
    """Find a cap ``C_(p,t)``, ``t`` in ``[0, 1)``, where ``psi`` vanishes.

    Grid over directions (Fibonacci on S^2, seeded Gaussian otherwise) times
    16 values of ``t``, then Nelder-Mead on ``|psi|^2`` and a Newton polish from
    the best few grid points. The cap with the smallest ``|psi|`` wins.
    """
    f1 = np.asarray(f1, dtype=float)
    ev = _PsiEval(mesh, phi, f1)
    vol = float(ev.masses.sum())
    tol = 1e-6 * vol * float(np.abs(f1).max())
    mom = moment_against_f1(mesh, phi, f1)
    if np.linalg.norm(mom) <= ZERO_MOMENT * vol * float(np.abs(f1).max()):
        raise NotAdmissible("moment against f1 vanishes; use the unfolded trial")
    dim = phi.n + 1
    dirs = sphere_directions(int(n_directions), dim, seed=seed)
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda d: _sweep_direction(ev, d), dirs))
    else:
        rows = [_sweep_direction(ev, d) for d in dirs]
    grid = np.array([r[0] for r in rows])
    order = np.argsort(grid, axis=None, kind="stable")
    landscape = {
        "directions": dirs.tolist(),
        "t": T_GRID.tolist(),
        "psi_norm": grid.tolist(),
    }
    best = None
    for k in order[:candidates]:
        i, j = np.unravel_index(k, grid.shape)
        p0 = dirs[i]
        xi0 = rows[i][1][j]
        basis = tangent_basis(p0)

        def obj(x):
            v, _ = ev(_cap_from(p0, basis, x[:-1], x[-1]), xi0)
            return float(v @ v)

        start = np.zeros(dim)
        start[-1] = T_GRID[j]
        step = 0.5 / np.sqrt(n_directions)
        simplex = np.vstack([start] + [start + step * e for e in np.eye(dim)])
        res = minimize(obj, start, method="Nelder-Mead", options={"maxfev": refine_evals, "initial_simplex": simplex})
        cap0 = _cap_from(p0, basis, res.x[:-1], res.x[-1])
        nrm, cap, trial = _newton(ev, cap0.p, cap0.t, xi0, tol)
        if best is None or nrm < best[0]:
            best = (nrm, cap, trial)
        if nrm <= tol:
            break
    nrm, cap, trial = best
    landscape["best"] = {"p": cap.p.tolist(), "t": cap.t, "psi_norm": float(nrm)}
    if nrm > tol:
        raise SearchFailure(f"no cap with |psi| <= {tol:.3e} (best {nrm:.3e})", landscape)
    v = (ev.masses * f1) @ trial.functions
    return CapSearchResult(cap, trial.xi, float(nrm), tol, trial.mean_residual, v, ev.count, landscape)


def degree_of_h0(mesh, phi, f1, subdivisions=2):
    """Degree of ``p -> psi(p, 0) / |psi(p, 0)|`` on S^2 (n = 2 only)."""
    if phi.n != 2:
        return None
    sm, dirs = icosphere(subdivisions)
    ev = _PsiEval(mesh, phi, f1)
    vals = np.array([ev(SphericalCap(p, 0.0))[0] for p in dirs.images])
    est = degree_estimate(vals, sm, strict=False)
    return {"degree": est.degree, "value": est.value, "flagged": est.flagged}


@dataclass(frozen=True, eq=False)
class BoundReport:
    lambda2_fem: float
    rayleigh_bound: float
    energy: float
    volume: float
    folded_area: float
    area_inside: float
    area_outside: float
    vc_estimate: float
    theorem_rhs: float
    chain_ok: bool
    checks: dict
    branch: str
    cap: dict = None
    xi: list = None
    residuals: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def lambda2_bar(self):
        return self.lambda2_fem * self.volume

    def to_dict(self):
        out = asdict(self)
        out["lambda2_bar"] = self.lambda2_bar
        out["schema_version"] = SCHEMA_VERSION
        return out


def _project(f, f1, masses):
    """M-orthogonal projection off constants and ``f1`` (f1 M-normalized)."""
    mass = masses.sum()
    c0 = (masses @ f) / mass
    g = f - c0[None, :]
    c1 = (masses * f1) @ g
    return g - np.outer(f1, c1), c0, c1


def lambda2_upper_bound(mesh, phi, result, summary, K, M, vc, f1):
    """Rayleigh bound for lambda_2 from the trial map and the chain around it.

    ``result=None`` uses the unfolded renormalized immersion. Trial coordinates
    are projected M-orthogonally off constants and ``f1`` so that the discrete
    min-max inequality ``lambda_2 <= rayleigh_bound`` holds exactly.
    """
    masses = M.diagonal() if M.nnz == M.shape[0] else np.asarray(M.sum(axis=1)).ravel()
    if result is None:
        trial = folded_trial(mesh, phi, None, masses=masses)
        cap = None
        P = phi.triangle_images(mesh)
        a_in, a_out = kernels.weighted_area(P, trial.xi)
    else:
        trial = folded_trial(mesh, phi, result.cap, xi0=result.xi, masses=masses)
        cap = result.cap
        a_in, a_out = kernels.weighted_area(phi.triangle_images(mesh), trial.xi, cap.p, cap.t, fold=True)
    f = trial.functions
    g, c0, c1 = _project(f, f1, masses)
    energy = float(np.einsum("vi,vi->", f, K @ f))
    num = float(np.einsum("vi,vi->", g, K @ g))
    den = float(np.einsum("vi,vi->", g, M @ g))
    if not den > 0:
        raise NotAdmissible("projected trial functions vanish")
    rayleigh = num / den
    vol = float(summary.volume)
    lam2 = float(summary.eigenvalues[2])
    folded_area = a_in + a_out
    rhs = 4.0 * vc
    checks = {
        "lambda2_le_rayleigh": lam2 <= rayleigh * (1.0 + RAYLEIGH_SLACK),
        "rayleigh_vol_le_4vc": rayleigh * vol <= rhs * (1.0 + CHAIN_SLACK),
        "energy_le_2_folded_area": energy <= 2.0 * folded_area * (1.0 + CHAIN_SLACK),
        "folded_area_le_2vc": folded_area <= 2.0 * vc * (1.0 + CHAIN_SLACK),
        "lambda2_bar_lt_rhs": lam2 * vol < rhs,
    }
    chain_ok = bool(checks["lambda2_le_rayleigh"] and checks["rayleigh_vol_le_4vc"] and checks["lambda2_bar_lt_rhs"])
    residuals = {
        "mean_residual": trial.mean_residual,
        "mean_tolerance": REL_TOL * vol,
        "constant_component": float(np.linalg.norm(c0)),
        "f1_component": float(np.linalg.norm(c1)),
        "projection_mass_loss": float(vol - den),
        "renormalization_converged": trial.converged,
    }
    if result is not None:
        residuals["psi_norm"] = result.psi_norm
        residuals["tol_psi"] = result.tol_psi
    return BoundReport(
        lambda2_fem=lam2,
        rayleigh_bound=rayleigh,
        energy=energy,
        volume=vol,
        folded_area=folded_area,
        area_inside=a_in,
        area_outside=a_out,
        vc_estimate=float(vc),
        theorem_rhs=rhs,
        chain_ok=chain_ok,
        checks={k: bool(v) for k, v in checks.items()},
        branch="unfolded" if result is None else "folded",
        cap=None if cap is None else {"p": cap.p.tolist(), "t": cap.t},
        xi=trial.xi.tolist(),
        residuals=residuals,
    )


def verify_bound(mesh, phi, budget=128, seed=0, n_directions=60, degree_check=False):
    """Run the whole chain for one mesh and immersion.

    Returns ``(report, landscape)``; ``landscape`` is ``None`` on the
    unfolded branch.
    """
    K, M = assemble(mesh)
    summary = eigenpairs(K, M, 6)
    masses = M.diagonal()
    base = renormalize(DiscreteMeasure(phi.images, masses))
    phi0 = ImmersionSamples(moebius_apply(base.xi, phi.images))
    f1, idx, mom = first_eigenfunction(summary, mesh, phi0)
    scale = float(summary.volume) * float(np.abs(f1).max())
    vc = estimate_vc(mesh, phi0, budget=budget, seed=seed)
    landscape = None
    if np.linalg.norm(mom) <= ZERO_MOMENT * scale:
        result = None
    else:
        result = cap_search(mesh, phi0, f1, n_directions=n_directions, seed=seed)
        landscape = result.landscape
    report = lambda2_upper_bound(mesh, phi0, result, summary, K, M, vc.value, f1)
    extras = {
        "lambda1_fem": float(summary.eigenvalues[1]),
        "lambda1_multiplicity": summary.multiplicity(1),
        "f1_index": int(idx),
        "moment_norm": float(np.linalg.norm(mom)),
        "base_xi": base.xi.tolist(),
        "vc": vc.to_dict(),
        "mesh": dict(mesh.metadata, topology=mesh.topology, vertices=mesh.n_vertices),
    }
    if result is not None:
        extras["cap_search_evaluations"] = result.evaluations
        if degree_check:
            extras["h0_degree"] = degree_of_h0(mesh, phi0, f1)
    report = BoundReport(**{**report.__dict__, "extras": extras})
    return report, landscape
