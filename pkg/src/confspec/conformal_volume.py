"""Conformal volume of an immersion: sup over Möbius maps of the pulled-back area."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .sphere import sphere_directions

RADIAL_CLAMP = 1.0 - 1e-3
BASE_BUDGET = 64
RESTARTS = 3


def volume_under_moebius(mesh, phi, xi):
    """Area of ``M`` in the metric pulled back by ``phi_xi o phi`` (m = 2).

    Each geodesic image triangle spans a great 2-sphere whose Möbius image is
    a round sphere, so the area is exact: Gauss-Bonnet on the image triangle,
    whose sides are circle arcs.
    """
    xi = np.asarray(xi, dtype=float)
    return kernels.weighted_area(phi.triangle_images(mesh), xi)[0]


def pullback_area(mesh, phi):
    return volume_under_moebius(mesh, phi, np.zeros(phi.n + 1))


@dataclass(frozen=True, eq=False)
class ConformalVolumeEstimate:
    """Best pulled-back area found. A lower bound for the true supremum."""

    value: float
    argmax_xi: np.ndarray
    boundary_supremum: bool
    budget_exhausted: bool
    samples: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "argmax_xi": [float(x) for x in self.argmax_xi],
            "boundary_supremum": self.boundary_supremum,
            "budget_exhausted": self.budget_exhausted,
            "samples": self.samples,
        }


def _clamp(z, rmax=RADIAL_CLAMP):
    r = np.linalg.norm(z)
    return z if r <= rmax else z * (rmax / r)


def _grid_shape(budget, dim):
    """Split a grid allowance into (directions, radii)."""
    n_rad = int(np.clip(np.sqrt(budget / 8.0), 3, 12))
    n_dir = max(2 * dim, budget // n_rad)
    return n_dir, n_rad


def _stage(mesh, phi, budget, seed):
    dim = phi.n + 1
    P = phi.triangle_images(mesh)
    evals = [0]

    def vol(xi):
        evals[0] += 1
        return kernels.weighted_area(P, xi)[0]

    n_dir, n_rad = _grid_shape(budget // 2, dim)
    dirs = sphere_directions(n_dir, dim, seed=seed)
    radii = 1.0 - np.logspace(np.log10(1.0 - 0.25), -3.0, n_rad)
    v0 = vol(np.zeros(dim))
    grid = np.empty((n_rad, n_dir))
    for i, r in enumerate(radii):
        for j, d in enumerate(dirs):
            grid[i, j] = vol(r * d)
    flat = np.argsort(-grid, axis=None, kind="stable")
    points = [(v0, np.zeros(dim))]
    for k in flat[: RESTARTS - 1]:
        i, j = np.unravel_index(k, grid.shape)
        points.append((grid[i, j], radii[i] * dirs[j]))
    points.sort(key=lambda vp: -vp[0])

    best_v, best_x = max(points, key=lambda vp: vp[0])
    remaining = max(budget - evals[0], 0)
    per_start = max(remaining // RESTARTS, 4 * dim)
    exhausted = False
    scale = max(abs(best_v), 1e-300)
    for start_v, start in points[:RESTARTS]:
        step = 0.1 * (1.0 - np.linalg.norm(start)) + 0.02
        simplex = np.vstack([start] + [start + step * e for e in np.eye(dim)])
        res = minimize(
            lambda z: -vol(_clamp(z)) / scale,
            start,
            method="Nelder-Mead",
            options={
                "maxfev": per_start,
                "xatol": 1e-5,
                "fatol": 1e-12,
                "initial_simplex": simplex,
            },
        )
        exhausted |= res.status != 0
        x = _clamp(res.x)
        v = -res.fun * scale
        if v > best_v or (v == best_v and tuple(x) < tuple(best_x)):
            best_v, best_x = v, x
    profile = [float(v) for v in grid.max(axis=1)]
    diag = {
        "budget": int(budget),
        "evaluations": int(evals[0]),
        "volume_at_origin": float(v0),
        "grid_directions": int(n_dir),
        "grid_radii": [float(r) for r in radii],
        "radial_profile_max": profile,
        "grid_min": float(min(grid.min(), v0)),
        "grid_max": float(max(grid.max(), v0)),
    }
    return float(best_v), np.asarray(best_x, dtype=float), exhausted, diag


def estimate_vc(mesh, phi, budget=256, seed=0):
    """Estimate ``sup_xi`` of the pulled-back area of ``phi_xi o phi``.

    The search runs stages with budgets ``budget, budget/2, ...`` down to
    :data:`BASE_BUDGET` and keeps the best value, so doubling the budget never
    lowers the estimate. Each stage is a radial-by-direction grid in the ball
    (radii up to ``1 - 1e-3``) followed by Nelder-Mead from the best grid
    points. ``boundary_supremum`` is set when the maximizer sits on the radial
    clamp.
    """
    budget = max(int(budget), BASE_BUDGET)
    budgets = []
    b = budget
    while b >= BASE_BUDGET:
        budgets.append(b)
        b //= 2
    best = None
    stages = []
    for b in budgets:
        v, x, exhausted, diag = _stage(mesh, phi, b, seed)
        stages.append(diag)
        if best is None or v > best[0]:
            best = (v, x, exhausted)
    v, x, exhausted = best
    top = stages[0]
    samples = {
        "stages": len(stages),
        "evaluations": int(sum(s["evaluations"] for s in stages)),
        "volume_at_origin": top["volume_at_origin"],
        "grid_min": min(s["grid_min"] for s in stages),
        "grid_max": max(s["grid_max"] for s in stages),
        "grid_radii": top["grid_radii"],
        "radial_profile_max": top["radial_profile_max"],
    }
    boundary = bool(np.linalg.norm(x) >= RADIAL_CLAMP * (1.0 - 1e-9))
    return ConformalVolumeEstimate(v, x, boundary, bool(exhausted), samples)
