"""Möbius automorphisms, reflections, spherical caps and folds on S^n.

Points are plain float arrays with the ambient coordinate on the last axis, so
every map below also works on stacks of points of shape ``(..., n+1)``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NonIntegralDegree
from .kernels import BOUNDARY_EPS

NORMALIZATION_TOL = 1e-12
BALL_EPS = 1e-9


def as_unit(x):
    """Renormalize ``x`` onto the unit sphere (last axis)."""
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(nrm == 0):
        raise ValueError("zero vector has no direction")
    return x / nrm


def as_ball(xi, eps=BALL_EPS):
    """Return ``xi`` as an interior ball point, clamped to radius ``1 - eps``.

    Vectors of norm above 1 are rejected; norms in ``[1 - eps, 1]`` are pulled
    back inside so that every Möbius map below is well defined.
    """
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1, keepdims=True)
    if np.any(r > 1.0 + 1e-12):
        raise ValueError(f"ball point has norm {float(np.max(r))} > 1")
    scale = np.where(r > 1.0 - eps, (1.0 - eps) / np.where(r > 0, r, 1.0), 1.0)
    return xi * scale


@dataclass(frozen=True)
class SphericalCap:
    """The cap ``phi_{-tp}`` of the open hemisphere ``<x, p> > 0``."""

    p: np.ndarray
    t: float

    def __post_init__(self):
        if not -1.0 < self.t < 1.0:
            raise ValueError(f"cap parameter t={self.t} outside (-1, 1)")
        object.__setattr__(self, "p", as_unit(self.p))
        object.__setattr__(self, "t", float(self.t))


def _dot(a, b):
    return np.einsum("...k,...k->...", a, b)


def moebius_apply(xi, x):
    """``phi_xi(x) = xi + (1 - |xi|^2) / |x + xi|^2 (x + xi)``."""
    xi = np.asarray(xi, dtype=float)
    y = np.asarray(x, dtype=float) + xi
    return xi + ((1.0 - _dot(xi, xi)) / _dot(y, y))[..., None] * y


def moebius_conformal_factor(xi, x):
    """Linear stretch of ``phi_xi`` at ``x``: ``(1 - |xi|^2) / |x + xi|^2``."""
    xi = np.asarray(xi, dtype=float)
    y = np.asarray(x, dtype=float) + xi
    return (1.0 - _dot(xi, xi)) / _dot(y, y)


def reflect(p, x):
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    return x - 2.0 * _dot(x, p)[..., None] * p


def cap_boundary_distance(C, x):
    """Signed membership value ``<phi_{tp}(x), p>``; positive inside ``C``."""
    return _dot(moebius_apply(C.t * C.p, x), C.p)


def cap_contains(C, x):
    return cap_boundary_distance(C, x) > BOUNDARY_EPS


def cap_reflect(C, x):
    """``tau_C = phi_{-tp} o R_p o phi_{tp}``."""
    tp = C.t * C.p
    return moebius_apply(-tp, reflect(C.p, moebius_apply(tp, x)))


def fold(C, x):
    x = np.asarray(x, dtype=float)
    inside = cap_contains(C, x)
    return np.where(np.asarray(inside)[..., None], x, cap_reflect(C, x))


class FoldResiduals(NamedTuple):
    fold_reflection: float
    moebius_reflection: float


def fold_identity_check(p, x, xi=None):
    """Max deviations of ``F_(p,0) = R_p o F_(-p,0)`` and ``phi_xi o R_p = R_p o phi_{R_p xi}``.

    ``xi`` defaults to a fixed interior point built from ``p`` and the first
    sample, which is enough to exercise the second identity.
    """
    p = as_unit(p)
    x = np.asarray(x, dtype=float)
    if xi is None:
        base = x.reshape(-1, x.shape[-1])[0]
        xi = 0.35 * p + 0.4 * base
    xi = as_ball(xi)
    hp = SphericalCap(p, 0.0)
    hm = SphericalCap(-p, 0.0)
    r_fold = np.max(np.abs(fold(hp, x) - reflect(p, fold(hm, x))))
    r_moeb = np.max(np.abs(moebius_apply(xi, reflect(p, x)) - reflect(p, moebius_apply(reflect(p, xi), x))))
    return FoldResiduals(float(r_fold), float(r_moeb))


def _edge_angle(a, b):
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), _dot(a, b))


def signed_spherical_areas(a, b, c):
    """Signed areas of geodesic triangles on S^2 (L'Huilier, triple-product sign)."""
    la = _edge_angle(b, c)
    lb = _edge_angle(c, a)
    lc = _edge_angle(a, b)
    s = 0.5 * (la + lb + lc)
    prod = (
        np.tan(0.5 * s)
        * np.tan(0.5 * np.maximum(s - la, 0.0))
        * np.tan(0.5 * np.maximum(s - lb, 0.0))
        * np.tan(0.5 * np.maximum(s - lc, 0.0))
    )
    excess = 4.0 * np.arctan(np.sqrt(np.maximum(prod, 0.0)))
    return np.sign(_dot(a, np.cross(b, c))) * excess


class DegreeEstimate(NamedTuple):
    degree: int
    value: float
    flagged: bool


def degree_estimate(V, mesh, strict=True):
    """Degree of a map S^2 -> S^2 sampled at the vertices of ``mesh``.

    ``mesh`` must be an oriented closed triangulation of S^2 (``mesh.triangles``).
    """
    V = as_unit(V)
    if V.shape[-1] != 3:
        raise ValueError("degree_estimate needs maps into S^2")
    tri = np.asarray(mesh.triangles)
    total = signed_spherical_areas(V[tri[:, 0]], V[tri[:, 1]], V[tri[:, 2]]).sum()
    value = float(total / (4.0 * np.pi))
    deg = int(np.rint(value))
    flagged = abs(value - deg) > 0.1
    if flagged and strict:
        raise NonIntegralDegree(value)
    return DegreeEstimate(deg, value, flagged)


def sphere_directions(count, dim, seed=0):
    """Deterministic, roughly uniform directions on S^{dim-1}.

    S^2 uses a Fibonacci lattice; other dimensions use seeded Gaussian samples,
    which form a nested sequence (a longer request extends a shorter one).
    """
    if dim == 3:
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        ang = np.pi * (3.0 - np.sqrt(5.0)) * i
        return np.column_stack([r * np.cos(ang), r * np.sin(ang), z])
    rng = np.random.default_rng(seed)
    return as_unit(rng.standard_normal((count, dim)))


def tangent_basis(x):
    """Orthonormal basis (rows) of the tangent space of S^n at unit ``x``."""
    x = np.asarray(x, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([x, np.eye(x.size)]))
    return q[:, 1 : x.size].T
