"""Named conformal-factor presets ``u`` (metric ``e^{2u} g``) on mesh vertices."""

import re

import numpy as np

PRESETS = ("none", "bump", "random-fourier")


def _periodic_offsets(mesh, center):
    """Shortest chart displacement from ``center`` on a flat torus."""
    B = np.asarray(mesh.metadata["basis"], dtype=float)
    d = mesh.vertices - np.asarray(center, dtype=float)
    coeff = d @ np.linalg.inv(B)
    coeff -= np.round(coeff)
    best = None
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            cand = (coeff + (i, j)) @ B
            n2 = np.einsum("ij,ij->i", cand, cand)
            best = n2 if best is None else np.minimum(best, n2)
    return best


def bump(mesh, center=None, width=0.5, amp=1.0):
    """Gaussian bump ``amp * exp(-d^2 / (2 width^2))``.

    ``d`` is the chord distance on spheres and projective planes and the flat
    distance on tori. The default center is the north pole (sphere) or the
    chart origin (torus).
    """
    if width <= 0:
        raise ValueError("bump width must be positive")
    if mesh.topology in ("sphere", "rp2"):
        c = np.array([0.0, 0.0, 1.0]) if center is None else np.asarray(center, dtype=float)
        c = c / np.linalg.norm(c)
        d2 = np.sum((mesh.vertices - c) ** 2, axis=1)
        if mesh.topology == "rp2":
            d2 = np.minimum(d2, np.sum((mesh.vertices + c) ** 2, axis=1))
    elif mesh.topology == "torus":
        c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
        d2 = _periodic_offsets(mesh, c)
    else:
        raise ValueError(f"no bump preset for topology {mesh.topology!r}")
    return amp * np.exp(-d2 / (2.0 * width**2))


def random_fourier(mesh, seed=0, modes=6, amp=1.0):
    """Random trigonometric sum scaled so that ``max |u| <= amp``.

    Frequencies are ambient on spheres (cosines only on projective planes so
    that ``u`` stays even) and dual-lattice vectors on tori.
    """
    if modes < 1:
        raise ValueError("need at least one mode")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(modes)
    b = rng.standard_normal(modes)
    if mesh.topology in ("sphere", "rp2"):
        w = rng.standard_normal((modes, 3)) * 1.5
        phase = mesh.vertices @ w.T
        if mesh.topology == "rp2":
            b[:] = 0.0
    elif mesh.topology == "torus":
        A = np.linalg.inv(np.asarray(mesh.metadata["basis"], dtype=float)).T
        k = rng.integers(-3, 4, size=(modes, 2))
        k[np.all(k == 0, axis=1)] = (1, 0)
        phase = 2.0 * np.pi * mesh.vertices @ (k @ A).T
    else:
        raise ValueError(f"no random-fourier preset for topology {mesh.topology!r}")
    s = np.cos(phase) @ a + np.sin(phase) @ b
    return amp * s / np.sum(np.abs(a) + np.abs(b))


def parse_factor(text):
    """Parse ``name`` or ``name:key=value,...`` into ``(name, params)``.

    Vector values use ``/`` as separator, e.g. ``bump:center=0/0/1,width=0.4``.
    """
    text = (text or "none").strip()
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name not in PRESETS:
        raise ValueError(f"unknown conformal factor {name!r}; choose from {', '.join(PRESETS)}")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if not re.fullmatch(r"[a-z_]+=[^=]+", item):
            raise ValueError(f"malformed factor parameter {item!r}")
        key, val = item.split("=")
        if "/" in val:
            params[key] = [float(v) for v in val.split("/")]
        elif key in ("seed", "modes"):
            params[key] = int(val)
        else:
            params[key] = float(val)
    return name, params


def make_factor(mesh, name, **params):
    if name == "none":
        return np.zeros(mesh.n_vertices)
    if name == "bump":
        return bump(mesh, **params)
    if name == "random-fourier":
        return random_fourier(mesh, **params)
    raise ValueError(f"unknown conformal factor {name!r}")


__all__ = ["PRESETS", "bump", "random_fourier", "parse_factor", "make_factor"]
