"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting, so a failing criterion still reports its measured numbers.
"""

import json
import math
import time

import numpy as np
import pytest
from helpers import random_rotation, record

from confspec import cli
from confspec.hersch import renormalize
from confspec.measure import DiscreteMeasure, pushforward
from confspec.mesh import EQUILATERAL_LATTICE, SQUARE_LATTICE, flat_torus, icosphere, klein_bottle_revolution, projective_plane
from confspec.sphere import (
    SphericalCap,
    cap_boundary_distance,
    cap_reflect,
    fold,
    fold_identity_check,
    moebius_apply,
    moebius_conformal_factor,
    reflect,
)
from confspec.spectral import solve
from confspec.tables import KLEIN_MODULUS, bound_table, elliptic_E, table_row

PI = math.pi
DIMS = range(2, 8)
CASES = 10_000
VB_SEEDS = range(20)
VB_ARGS = ["--subdiv", "4", "--budget", "128"]
TORUS_ARGS = ["--surface", "torus", "--lattice", "equilateral", "--resolution", "48", "--budget", "128"]
TORUS_FACTORS = ("none", "bump:amp=1", "random-fourier:seed=3")
CV_RUNS = {
    "identity": ["--subdiv", "4", "--budget", "128"],
    "squaring": ["--subdiv", "4", "--budget", "128", "--immersion", "squaring"],
    "torus": TORUS_ARGS,
}

# JSON bytes of the first runs of criteria 5-7, compared again in criterion 10
FIRST_RUN = {}


def _cli_json(tmp, name, argv):
    out = tmp / f"{name}.json"
    code = cli.main([*argv, "--out", str(out)])
    return code, out.read_bytes()


def _verify_bound_runs(tmp):
    out = {}
    for k in VB_SEEDS:
        out[f"vb{k}"] = _cli_json(tmp, f"vb{k}", ["verify-bound", *VB_ARGS, "--factor", f"random-fourier:seed={k},amp=1"])
    return out


def _torus_runs(tmp):
    out = {}
    for i, fac in enumerate(TORUS_FACTORS):
        out[f"tor{i}"] = _cli_json(tmp, f"tor{i}", ["verify-bound", *TORUS_ARGS, "--factor", fac])
    return out


def _cv_runs(tmp):
    return {f"cv_{name}": _cli_json(tmp, f"cv_{name}", ["conformal-volume", *argv]) for name, argv in CV_RUNS.items()}


def test_c01_round_sphere():
    t0 = time.perf_counter()
    s, _, _ = solve(icosphere(5)[0], 6)
    dt = time.perf_counter() - t0
    lam1, mult, bar = s.eigenvalues[1], s.multiplicity(1), s.normalized[1]
    ok = abs(lam1 - 2) <= 5e-3 * 2 and mult == 3 and abs(bar - 8 * PI) <= 1e-2 * 8 * PI and dt <= 60
    detail = f"lambda1={lam1:.6f} mult={mult} lambda1_bar/8pi={bar / (8 * PI):.5f} t={dt:.1f}s"
    assert record(1, "round sphere spectrum", ok, detail), detail


def test_c02_tori():
    parts, ok = [], True
    for name, basis in (("square", SQUARE_LATTICE), ("equilateral", EQUILATERAL_LATTICE)):
        t0 = time.perf_counter()
        s, _, _ = solve(flat_torus(basis, 64), 8)
        dt = time.perf_counter() - t0
        # dual-lattice oracle: smallest nonzero 4 pi^2 |k|^2 over the dual lattice
        dual = np.linalg.inv(np.asarray(basis)).T
        ks = [np.array([a, b]) @ dual for a in range(-3, 4) for b in range(-3, 4) if (a, b) != (0, 0)]
        exact = 4 * PI**2 * min(k @ k for k in ks)
        lam1 = s.eigenvalues[1]
        ok &= abs(lam1 / exact - 1) <= 5e-3 and dt <= 60
        parts.append(f"{name}: lambda1/exact={lam1 / exact:.5f}")
        if name == "equilateral":
            ok &= abs(exact - 16 * PI**2 / 3) <= 1e-12 * exact
            target = 8 * PI**2 * math.sqrt(3) / 3
            ok &= abs(s.normalized[1] / target - 1) <= 1e-2
            parts.append(f"lambda1_bar/target={s.normalized[1] / target:.5f}")
        parts.append(f"t={dt:.1f}s")
    detail = " ".join(parts)
    assert record(2, "torus spectra", ok, detail), detail


def test_c03_klein_bottle():
    t0 = time.perf_counter()
    mesh = klein_bottle_revolution(256, 256)
    s, _, _ = solve(mesh, 6)
    dt = time.perf_counter() - t0
    E = elliptic_E(KLEIN_MODULUS)
    area_ratio = mesh.volume / (6 * PI * E)
    bar_ratio = s.normalized[1] / (12 * PI * E)
    ok = abs(area_ratio - 1) <= 5e-3 and abs(bar_ratio - 1) <= 2e-2 and dt <= 300
    detail = (
        f"area/6piE={area_ratio:.6f} lambda1_bar/12piE={bar_ratio:.5f} "
        f"(lambda2_bar/12piE={s.normalized[2] / (12 * PI * E):.5f}) t={dt:.1f}s"
    )
    assert record(3, "Klein bottle", ok, detail), detail


def test_c04_projective_plane():
    t0 = time.perf_counter()
    s, _, _ = solve(projective_plane(5), 6)
    dt = time.perf_counter() - t0
    ratio = s.normalized[1] / (12 * PI)
    ok = abs(ratio - 1) <= 1e-2 and dt <= 60
    detail = f"lambda1_bar/12pi={ratio:.5f} t={dt:.1f}s"
    assert record(4, "projective plane", ok, detail), detail


def test_c05_bound_chain_random_factors(tmp_path):
    t0 = time.perf_counter()
    runs = _verify_bound_runs(tmp_path)
    dt = time.perf_counter() - t0
    FIRST_RUN.update(runs)
    bad, worst = [], 0.0
    for k in VB_SEEDS:
        code, raw = runs[f"vb{k}"]
        doc = json.loads(raw)
        good = (
            code == 0
            and doc["chain_ok"]
            and doc["lambda2_fem"] <= doc["rayleigh_bound"] * (1 + 1e-12)
            and doc["lambda2_bar"] < 16 * PI
        )
        worst = max(worst, doc["lambda2_bar"] / (16 * PI))
        if not good:
            bad.append(k)
    ok = not bad and dt <= 600
    detail = f"{len(VB_SEEDS) - len(bad)}/{len(VB_SEEDS)} chain_ok, max lambda2_bar/16pi={worst:.4f} violations={bad} t={dt:.0f}s"
    assert record(5, "bound chain on random factors", ok, detail), detail


def test_c06_equilateral_torus_lambda2(tmp_path):
    t0 = time.perf_counter()
    runs = _torus_runs(tmp_path)
    dt = time.perf_counter() - t0
    FIRST_RUN.update(runs)
    rhs = 16 * PI**2 * math.sqrt(3) / 3
    ok, margins = dt <= 120, []
    for i, fac in enumerate(TORUS_FACTORS):
        code, raw = runs[f"tor{i}"]
        doc = json.loads(raw)
        margin = 1 - doc["lambda2_bar"] / rhs
        ok &= code == 0 and doc["lambda2_bar"] < rhs
        margins.append(f"{fac}:{margin:.3f}")
    detail = "margin 1-lambda2_bar/rhs " + " ".join(margins) + f" t={dt:.0f}s"
    assert record(6, "equilateral torus lambda2 bound", ok, detail), detail


def test_c07_conformal_volume(tmp_path):
    t0 = time.perf_counter()
    runs = _cv_runs(tmp_path)
    dt = time.perf_counter() - t0
    FIRST_RUN.update(runs)
    ok = dt <= 300 and all(code == 0 for code, _ in runs.values())
    est = {name: json.loads(runs[f"cv_{name}"][1])["estimate"] for name in CV_RUNS}

    def spread(e, target):
        s = e["samples"]
        return max(abs(s["grid_min"] / target - 1), abs(s["grid_max"] / target - 1), abs(e["value"] / target - 1))

    d_id = spread(est["identity"], 4 * PI)
    d_sq = spread(est["squaring"], 8 * PI)
    target = 4 * PI**2 / math.sqrt(3)
    tor = est["torus"]
    xi_norm = float(np.linalg.norm(tor["argmax_xi"]))
    d_tor = abs(tor["value"] / target - 1)
    ok &= d_id <= 1e-2 and d_sq <= 1.5e-2 and xi_norm <= 0.05 and d_tor <= 1.5e-2
    detail = f"identity dev={d_id:.2e} squaring dev={d_sq:.2e} torus |xi|={xi_norm:.3f} dev={d_tor:.2e} t={dt:.0f}s"
    assert record(7, "conformal volume sanity", ok, detail), detail


def _random_unit(rng, shape):
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _random_ball(rng, n, dim, rmax):
    return _random_unit(rng, (n, dim)) * (rmax * rng.random((n, 1)))


def _exp(x, v, h):
    return np.cos(h) * x + np.sin(h) * v


def _geometry_defects(rng, n):
    d = n + 1
    worst = {}
    # Möbius inverse, |xi| <= 0.99
    xi = _random_ball(rng, CASES, d, 0.99)
    x = _random_unit(rng, (CASES, d))
    worst["inverse"] = np.max(np.abs(moebius_apply(-xi, moebius_apply(xi, x)) - x))
    # conformality: central differences along great circles of a tangent frame
    xi = _random_ball(rng, CASES, d, 0.9)
    A = rng.standard_normal((CASES, d, d))
    A[:, :, 0] = x
    Q, _ = np.linalg.qr(A)
    T = Q[:, :, 1:] * np.sign(np.einsum("nk,nk->n", Q[:, :, 0], x))[:, None, None]
    h = 1e-5
    J = np.stack(
        [(moebius_apply(xi, _exp(x, T[:, :, k], h)) - moebius_apply(xi, _exp(x, T[:, :, k], -h))) / (2 * h) for k in range(n)],
        axis=2,
    )
    rho = moebius_conformal_factor(xi, x)
    # J / rho should be an isometry onto its image: all singular values 1
    sv = np.linalg.svd(J / rho[:, None, None], compute_uv=False)
    worst["conformality"] = np.max(np.abs(sv - 1.0))
    # cap reflection: involution, and boundary points stay put
    inv = bnd = 0.0
    for p, t in zip(_random_unit(rng, (CASES // 10, d)), rng.uniform(-0.9, 0.9, CASES // 10)):
        C = SphericalCap(p, t)
        y = _random_unit(rng, (10, d))
        inv = max(inv, np.max(np.abs(cap_reflect(C, cap_reflect(C, y)) - y)))
        # boundary sphere = phi_{-tp} of the great sphere p-perp
        e = y - np.outer(y @ C.p, C.p)
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        b = moebius_apply(-C.t * C.p, e)
        assert np.max(np.abs(cap_boundary_distance(C, b))) <= 1e-12
        bnd = max(bnd, np.max(np.abs(cap_reflect(C, b) - b)))
    worst["cap_involution"] = inv
    worst["cap_boundary"] = bnd
    # identities (ii) and (iii)
    r2 = r3 = 0.0
    for p in _random_unit(rng, (CASES // 10, d)):
        y = _random_unit(rng, (10, d))
        res = fold_identity_check(p, y, _random_ball(rng, 1, d, 0.95)[0])
        r2, r3 = max(r2, res.fold_reflection), max(r3, res.moebius_reflection)
    worst["identity_ii"], worst["identity_iii"] = r2, r3
    return worst


def _hersch_defects(rng, n, cases):
    d = n + 1
    worst = {"identity_i": 0.0, "hersch_residual": 0.0, "equivariance": 0.0}
    if n == 2:
        mesh, phi = icosphere(1)
        atoms, weights = phi.images, mesh.vertex_masses()
    else:
        atoms = _random_unit(rng, (40, d))
        weights = rng.uniform(0.5, 1.5, 40)
    base = DiscreteMeasure(atoms, weights)
    unconverged = 0
    for _ in range(cases):
        p = _random_unit(rng, d)
        up = renormalize(pushforward(lambda x: fold(SphericalCap(p, 0.0), x), base))
        dn = renormalize(pushforward(lambda x: fold(SphericalCap(-p, 0.0), x), base))
        worst["identity_i"] = max(worst["identity_i"], np.max(np.abs(up.xi - reflect(p, dn.xi))))
        # equivariance on a random measure pushed through a random rotation
        mu = DiscreteMeasure(_random_unit(rng, (12, d)), rng.uniform(0.5, 1.5, 12))
        R = random_rotation(rng, d)
        a = renormalize(mu)
        b = renormalize(DiscreteMeasure(mu.atoms @ R.T, mu.weights))
        worst["equivariance"] = max(worst["equivariance"], np.max(np.abs(b.xi - R @ a.xi)))
        for res, m in ((up, base), (dn, base), (a, mu), (b, mu)):
            unconverged += not res.converged
            worst["hersch_residual"] = max(worst["hersch_residual"], res.residual_norm / m.weights.sum())
    worst["unconverged"] = unconverged
    return worst


GEOMETRY_TOL = {
    "inverse": 1e-10,
    "conformality": 1e-6,
    "cap_involution": 1e-10,
    "cap_boundary": 1e-10,
    "identity_ii": 1e-12,
    "identity_iii": 1e-12,
    "identity_i": 1e-8,
    "hersch_residual": 1e-10,
    "equivariance": 1e-9,
    "unconverged": 0,
}


def test_c08_geometry_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260801)
    worst = dict.fromkeys(GEOMETRY_TOL, 0.0)
    per_dim = -(-CASES // len(DIMS))
    for n in DIMS:
        for defects in (_geometry_defects(rng, n), _hersch_defects(rng, n, per_dim)):
            for key, val in defects.items():
                worst[key] = max(worst[key], float(val))
    dt = time.perf_counter() - t0
    failed = [k for k, tol in GEOMETRY_TOL.items() if worst[k] > tol]
    ok = not failed and dt <= 120
    detail = " ".join(f"{k}={worst[k]:.1e}" for k in GEOMETRY_TOL) + f" t={dt:.0f}s"
    assert record(8, "geometry property suite", ok, detail), (failed, detail)


def test_c09_table():
    t0 = time.perf_counter()
    rows = bound_table()
    doubled = all(r.lambda2_bar_bound == 2 ** (2 / r.m) * r.lambda1_bar_bound for r in rows)
    s2 = table_row("S^m", m=2).lambda1_bar_bound
    cp1 = table_row("CP^d", d=1).lambda1_bar_bound
    cross = abs(s2 - cp1) / s2
    dt = time.perf_counter() - t0
    ok = len(rows) == 8 and doubled and cross <= 1e-12 and dt <= 1
    detail = f"rows={len(rows)} doubling exact={doubled} S2/CP1 rel diff={cross:.1e} t={dt * 1e3:.1f}ms"
    assert record(9, "bound table", ok, detail), detail


def test_c10_determinism(tmp_path):
    if len(FIRST_RUN) != len(VB_SEEDS) + len(TORUS_FACTORS) + len(CV_RUNS):
        pytest.skip("criteria 5-7 did not run in this session")
    second = {**_verify_bound_runs(tmp_path), **_torus_runs(tmp_path), **_cv_runs(tmp_path)}
    differ = sorted(k for k in FIRST_RUN if FIRST_RUN[k] != second[k])
    ok = not differ
    detail = f"{len(FIRST_RUN) - len(differ)}/{len(FIRST_RUN)} JSON outputs byte-identical" + (f" differ={differ}" if differ else "")
    assert record(10, "determinism", ok, detail), detail
