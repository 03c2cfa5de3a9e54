"""Hersch renormalization: the unique xi with ``sum_i w_i phi_xi(x_i) = 0``."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import MaxIterations, NotAdmissible
from .measure import DiscreteMeasure, center_of_mass, hersch_admissible, total_mass
from .sphere import BALL_EPS, moebius_apply

REL_TOL = 1e-10
MAX_ITER = 200
FD_STEP = 1e-6
NEAR_BOUNDARY = 1e-6


@dataclass(frozen=True)
class RenormalizationResult:
    xi: np.ndarray
    residual_norm: float
    iterations: int
    near_boundary: bool
    converged: bool


def renormalize(mu, xi0=None, tol=REL_TOL, max_iter=MAX_ITER, check=True, strict=False):
    """Solve for the renormalization point of ``mu``.

    Damped Newton with a central-difference Jacobian; when a Newton step fails
    to decrease the residual, 50 fixed-point steps ``xi <- xi - alpha G / mass``
    with ``alpha = 0.5 / n`` are taken before Newton resumes. Iterates are
    clamped to the ball of radius ``1 - 1e-9``.

    A run that exhausts ``max_iter`` returns its best iterate with
    ``converged=False``; pass ``strict=True`` to raise :class:`MaxIterations`.
    """
    if check and not hersch_admissible(mu):
        raise NotAdmissible("a point carries at least half of the total mass")
    mass = total_mass(mu)
    n = mu.dim - 1
    if xi0 is None:
        xi0 = -center_of_mass(mu)
    rmax = 1.0 - BALL_EPS
    xi, g, it, _ = kernels.hersch_newton(
        mu.atoms, mu.weights, xi0, tol * mass, max_iter, FD_STEP, rmax, 0.5 / max(n, 1)
    )
    converged = g <= tol * mass
    if not converged and strict:
        raise MaxIterations(f"residual {g:.3e} after {it} iterations")
    near = bool(np.linalg.norm(xi) > 1.0 - NEAR_BOUNDARY)
    return RenormalizationResult(xi, g, it, near, bool(converged))


def renormalized_pushforward(mu, **kwargs):
    res = renormalize(mu, **kwargs)
    return DiscreteMeasure(moebius_apply(res.xi, mu.atoms), mu.weights)
