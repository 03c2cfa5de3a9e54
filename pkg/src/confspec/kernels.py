"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names at the bottom dispatch on :func:`confspec._accel.numba_enabled`
at call time, so the environment flag can be flipped inside a process (the
benchmark and the parity tests rely on this).
"""

import numpy as np

from ._accel import njit, numba_enabled

BOUNDARY_EPS = 1e-12
STRADDLE_DEPTH = 6


# ---------------------------------------------------------------------------
# Hersch renormalization: damped Newton on G(xi) = sum_i w_i phi_xi(x_i)
# ---------------------------------------------------------------------------


@njit
def _moebius_sum_nb(atoms, weights, xi):
    n, d = atoms.shape
    s = 1.0 - np.dot(xi, xi)
    out = np.zeros(d)
    mass = 0.0
    for i in range(n):
        q = 0.0
        for k in range(d):
            y = atoms[i, k] + xi[k]
            q += y * y
        c = weights[i] * s / q
        for k in range(d):
            out[k] += c * (atoms[i, k] + xi[k])
        mass += weights[i]
    for k in range(d):
        out[k] += mass * xi[k]
    return out


def _moebius_sum_np(atoms, weights, xi):
    y = atoms + xi
    q = np.einsum("ij,ij->i", y, y)
    c = weights * ((1.0 - xi @ xi) / q)
    return c @ y + weights.sum() * xi


@njit
def _clamp_nb(xi, rmax):
    r = np.sqrt(np.dot(xi, xi))
    if r > rmax:
        return xi * (rmax / r), True
    return xi.copy(), False


@njit
def _hersch_newton_nb(atoms, weights, xi0, tol, max_iter, fd_step, rmax, alpha, n_fixed):
    d = atoms.shape[1]
    mass = weights.sum()
    xi, hit = _clamp_nb(xi0, rmax)
    G = _moebius_sum_nb(atoms, weights, xi)
    g = np.sqrt(np.dot(G, G))
    best = xi.copy()
    best_g = g
    it = 0
    J = np.empty((d, d))
    e = np.zeros(d)
    while it < max_iter and best_g > tol:
        it += 1
        for j in range(d):
            e[:] = 0.0
            e[j] = fd_step
            gp = _moebius_sum_nb(atoms, weights, xi + e)
            gm = _moebius_sum_nb(atoms, weights, xi - e)
            for k in range(d):
                J[k, j] = (gp[k] - gm[k]) / (2.0 * fd_step)
        ok = True
        step = np.zeros(d)
        try:
            step = np.linalg.solve(J, -G)
        except Exception:
            ok = False
        accepted = False
        if ok:
            lam = 1.0
            for _ in range(40):
                cand, h = _clamp_nb(xi + lam * step, rmax)
                Gc = _moebius_sum_nb(atoms, weights, cand)
                gc = np.sqrt(np.dot(Gc, Gc))
                if gc < g:
                    xi, G, g = cand, Gc, gc
                    hit = hit or h
                    accepted = True
                    break
                lam *= 0.5
        if not accepted:
            for _ in range(n_fixed):
                xi, h = _clamp_nb(xi - alpha * G / mass, rmax)
                hit = hit or h
                G = _moebius_sum_nb(atoms, weights, xi)
            g = np.sqrt(np.dot(G, G))
        if g < best_g:
            best_g = g
            best = xi.copy()
    return best, best_g, it, hit


def _clamp_np(xi, rmax):
    r = np.linalg.norm(xi)
    if r > rmax:
        return xi * (rmax / r), True
    return xi.copy(), False


def _hersch_newton_np(atoms, weights, xi0, tol, max_iter, fd_step, rmax, alpha, n_fixed):
    d = atoms.shape[1]
    mass = weights.sum()
    xi, hit = _clamp_np(xi0, rmax)
    G = _moebius_sum_np(atoms, weights, xi)
    g = np.linalg.norm(G)
    best, best_g = xi.copy(), g
    it = 0
    eye = np.eye(d) * fd_step
    while it < max_iter and best_g > tol:
        it += 1
        J = np.empty((d, d))
        for j in range(d):
            J[:, j] = (
                _moebius_sum_np(atoms, weights, xi + eye[j])
                - _moebius_sum_np(atoms, weights, xi - eye[j])
            ) / (2.0 * fd_step)
        accepted = False
        try:
            step = np.linalg.solve(J, -G)
        except np.linalg.LinAlgError:
            step = None
        if step is not None:
            lam = 1.0
            for _ in range(40):
                cand, h = _clamp_np(xi + lam * step, rmax)
                Gc = _moebius_sum_np(atoms, weights, cand)
                gc = np.linalg.norm(Gc)
                if gc < g:
                    xi, G, g = cand, Gc, gc
                    hit = hit or h
                    accepted = True
                    break
                lam *= 0.5
        if not accepted:
            for _ in range(n_fixed):
                xi, h = _clamp_np(xi - alpha * G / mass, rmax)
                hit = hit or h
                G = _moebius_sum_np(atoms, weights, xi)
            g = np.linalg.norm(G)
        if g < best_g:
            best_g, best = g, xi.copy()
    return best, best_g, it, hit


# ---------------------------------------------------------------------------
# Conformally weighted area of spherical triangles
# ---------------------------------------------------------------------------
# Every triangle is the spherical triangle spanned by its vertex images on
# S^n; it lies on the great 2-sphere through those images. The squared
# conformal factor of a Moebius map integrates to the area of the image, and
# the image of that great sphere is a round 2-sphere of radius
# R = 1 / sqrt(a^2 - |b_S|^2), where 1/rho = a + <b, x> and b_S is the part of
# b in the span of the triangle. Up to a rotation the map restricted there is R
# times phi_eta on S^2 with eta = R b_S / (1 + R a). The image triangle has
# circular edges, so Gauss-Bonnet gives its area in closed form:
# 2 pi - (turning angles) - sum over edges of (geodesic curvature x length).
#
# ``lin`` holds (a, b) for the inside map in row 0 and for the outside map
# phi_xi o tau_C in row 1. Only triangles crossing the fold boundary are
# subdivided; after ``straddle_depth`` levels a crossing piece goes to the side
# of its centroid.

TWO_PI = 2.0 * np.pi
_WRAP_EPS = 1e-12


@njit
def _cross3(u, v, out):
    out[0] = u[1] * v[2] - u[2] * v[1]
    out[1] = u[2] * v[0] - u[0] * v[2]
    out[2] = u[0] * v[1] - u[1] * v[0]


@njit
def _dot3(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


@njit
def _ccw_angle_nb(n, delta, A, B, u, w, c):
    """Counter-clockwise angle about ``n`` from A to B on the circle <n, x> = delta."""
    for i in range(3):
        u[i] = A[i] - delta * n[i]
        w[i] = B[i] - delta * n[i]
    _cross3(u, w, c)
    ang = np.arctan2(_dot3(n, c), _dot3(u, w))
    if ang < -_WRAP_EPS:
        ang += TWO_PI
    return ang


@njit
def _moebius3_nb(eta, s, x, out):
    yy = 0.0
    for i in range(3):
        v = x[i] + eta[i]
        yy += v * v
    for i in range(3):
        out[i] = eta[i] + s / yy * (x[i] + eta[i])


@njit
def _image_area_nb(ys, a, b):
    """Area of the image of the spherical triangle ``ys`` (3, d) under the
    Moebius map with 1/rho = a + <b, x>."""
    d = ys.shape[1]
    q = np.empty((3, d))
    for k in range(3):
        for i in range(d):
            q[k, i] = ys[k, i]
        for _ in range(2):
            for j in range(k):
                c = 0.0
                for i in range(d):
                    c += q[k, i] * q[j, i]
                for i in range(d):
                    q[k, i] -= c * q[j, i]
        nrm = 0.0
        for i in range(d):
            nrm += q[k, i] * q[k, i]
        nrm = np.sqrt(nrm)
        if nrm < 1e-15:
            return 0.0
        for i in range(d):
            q[k, i] /= nrm
    loc = np.zeros((3, 3))
    bl = np.zeros(3)
    for k in range(3):
        for j in range(3):
            c = 0.0
            for i in range(d):
                c += ys[k, i] * q[j, i]
            loc[k, j] = c
        c = 0.0
        for i in range(d):
            c += b[i] * q[k, i]
        bl[k] = c
    tmp = np.empty(3)
    _cross3(loc[1], loc[2], tmp)
    if _dot3(loc[0], tmp) < 0.0:
        # flip the frame so the triangle is counter-clockwise seen from outside
        for k in range(3):
            loc[k, 2] = -loc[k, 2]
        bl[2] = -bl[2]
    R2 = 1.0 / (a * a - _dot3(bl, bl))
    R = np.sqrt(R2)
    ap = R * a
    eta = np.empty(3)
    for i in range(3):
        eta[i] = R * bl[i] / (1.0 + ap)
    s = 2.0 / (1.0 + ap)
    img = np.empty((3, 3))
    mid = np.empty((3, 3))
    m = np.empty(3)
    for k in range(3):
        _moebius3_nb(eta, s, loc[k], img[k])
        k1 = (k + 1) % 3
        nrm = 0.0
        for i in range(3):
            m[i] = loc[k, i] + loc[k1, i]
            nrm += m[i] * m[i]
        nrm = np.sqrt(nrm)
        for i in range(3):
            m[i] /= nrm
        _moebius3_nb(eta, s, m, mid[k])
    normals = np.empty((3, 3))
    e1 = np.empty(3)
    e2 = np.empty(3)
    u = np.empty(3)
    w = np.empty(3)
    c3 = np.empty(3)
    edge = 0.0
    for k in range(3):
        A = img[k]
        B = img[(k + 1) % 3]
        M = mid[k]
        for i in range(3):
            e1[i] = B[i] - A[i]
            e2[i] = M[i] - A[i]
        _cross3(e1, e2, tmp)
        nn = np.sqrt(_dot3(tmp, tmp))
        if nn == 0.0:
            _cross3(A, B, tmp)
            nn = np.sqrt(_dot3(tmp, tmp))
            for i in range(3):
                normals[k, i] = tmp[i] / nn
            continue
        for i in range(3):
            normals[k, i] = -tmp[i] / nn
        n = normals[k]
        delta = _dot3(n, A)
        ang = _ccw_angle_nb(n, delta, A, M, u, w, c3) + _ccw_angle_nb(n, delta, M, B, u, w, c3)
        edge += delta * ang
    turn = 0.0
    for k in range(3):
        A = img[k]
        _cross3(normals[(k + 2) % 3], A, e1)
        _cross3(normals[k], A, e2)
        _cross3(e1, e2, tmp)
        turn += np.arctan2(_dot3(A, tmp), _dot3(e1, e2))
    return R2 * (TWO_PI - turn - edge)


@njit
def _inside_nb(y, p, tp, z):
    _phi_into_nb(tp, y, z)
    s = 0.0
    for i in range(y.size):
        s += z[i] * p[i]
    return s > BOUNDARY_EPS


@njit
def _rho_nb(xi, x):
    yy = 0.0
    xx = 0.0
    for i in range(x.size):
        v = x[i] + xi[i]
        yy += v * v
        xx += xi[i] * xi[i]
    return (1.0 - xx) / yy


@njit
def _phi_into_nb(xi, x, out):
    """Write ``phi_xi(x)`` into ``out`` and return the conformal factor."""
    yy = 0.0
    xx = 0.0
    for i in range(x.size):
        v = x[i] + xi[i]
        yy += v * v
        xx += xi[i] * xi[i]
    r = (1.0 - xx) / yy
    for i in range(x.size):
        out[i] = xi[i] + r * (x[i] + xi[i])
    return r


@njit
def _weighted_area_nb(P, p, t, fold, lin, straddle_depth):
    T, _, d = P.shape
    a_in = 0.0
    a_out = 0.0
    cap = 3 * straddle_depth + 8
    stack = np.empty((cap, 3, 3))
    depths = np.empty(cap, dtype=np.int64)
    ys = np.empty((3, d))
    cen = np.empty(d)
    z = np.empty(d)
    tp = t * p
    b = np.empty((3, 3))
    ins = np.empty(3, dtype=np.bool_)
    row0 = lin[0, 1:].copy()
    row1 = lin[1, 1:].copy()
    for tri in range(T):
        if not fold:
            a_in += _image_area_nb(P[tri], lin[0, 0], row0)
            continue
        for i in range(3):
            for j in range(3):
                stack[0, i, j] = 1.0 if i == j else 0.0
        depths[0] = 0
        top = 1
        while top > 0:
            top -= 1
            b[:, :] = stack[top]
            dep = depths[top]
            for k in range(3):
                nrm = 0.0
                for i in range(d):
                    v = b[k, 0] * P[tri, 0, i] + b[k, 1] * P[tri, 1, i] + b[k, 2] * P[tri, 2, i]
                    ys[k, i] = v
                    nrm += v * v
                nrm = np.sqrt(nrm)
                for i in range(d):
                    ys[k, i] /= nrm
                ins[k] = _inside_nb(ys[k], p, tp, z)
            straddle = not (ins[0] == ins[1] and ins[1] == ins[2])
            if straddle and dep < straddle_depth:
                for j in range(3):
                    m01 = 0.5 * (b[0, j] + b[1, j])
                    m12 = 0.5 * (b[1, j] + b[2, j])
                    m20 = 0.5 * (b[2, j] + b[0, j])
                    stack[top, 0, j] = b[0, j]
                    stack[top, 1, j] = m01
                    stack[top, 2, j] = m20
                    stack[top + 1, 0, j] = m01
                    stack[top + 1, 1, j] = b[1, j]
                    stack[top + 1, 2, j] = m12
                    stack[top + 2, 0, j] = m20
                    stack[top + 2, 1, j] = m12
                    stack[top + 2, 2, j] = b[2, j]
                    stack[top + 3, 0, j] = m01
                    stack[top + 3, 1, j] = m12
                    stack[top + 3, 2, j] = m20
                for q in range(4):
                    depths[top + q] = dep + 1
                top += 4
                continue
            region = ins[0]
            if straddle:
                nrm = 0.0
                for i in range(d):
                    cen[i] = ys[0, i] + ys[1, i] + ys[2, i]
                    nrm += cen[i] * cen[i]
                nrm = np.sqrt(nrm)
                for i in range(d):
                    cen[i] /= nrm
                region = _inside_nb(cen, p, tp, z)
            if region:
                a_in += _image_area_nb(ys, lin[0, 0], row0)
            else:
                a_out += _image_area_nb(ys, lin[1, 0], row1)
    return a_in, a_out


def _rho_np(xi, x):
    y = x + xi
    return (1.0 - xi @ xi) / np.einsum("...k,...k->...", y, y)


def _phi_np(xi, x):
    y = x + xi
    return xi + ((1.0 - xi @ xi) / np.einsum("...k,...k->...", y, y))[..., None] * y


def _weights_np(y, xi, p, t, fold):
    """(inside flag, squared factor inside, squared factor outside) at points ``y``."""
    rin = _rho_np(xi, y) ** 2
    if not fold:
        return np.ones(y.shape[:-1], dtype=bool), rin, rin
    tp = t * p
    z = _phi_np(tp, y)
    s = z @ p
    r1 = _rho_np(tp, y)
    zr = z - 2.0 * s[..., None] * p
    r2 = _rho_np(-tp, zr)
    r3 = _rho_np(xi, _phi_np(-tp, zr))
    return s > BOUNDARY_EPS, rin, (r1 * r2 * r3) ** 2


def _ccw_angle_np(n, delta, A, B):
    u = A - delta[:, None] * n
    w = B - delta[:, None] * n
    ang = np.arctan2(np.einsum("ij,ij->i", n, np.cross(u, w)), np.einsum("ij,ij->i", u, w))
    return np.where(ang < -_WRAP_EPS, ang + TWO_PI, ang)


def _image_area_np(ys, a, b):
    """Vectorized :func:`_image_area_nb` over triangles ``ys`` (N, 3, d) with
    per-triangle coefficients ``a`` (N,) and ``b`` (N, d)."""
    Q, Rq = np.linalg.qr(np.swapaxes(ys, 1, 2))
    loc = np.einsum("nkd,ndj->nkj", ys, Q)
    bl = np.einsum("nd,ndj->nj", b, Q)
    flip = np.linalg.det(loc) < 0
    loc[flip, :, 2] *= -1.0
    bl[flip, 2] *= -1.0
    degenerate = np.abs(Rq[:, 2, 2]) < 1e-15
    R2 = 1.0 / (a * a - np.einsum("nj,nj->n", bl, bl))
    R = np.sqrt(R2)
    ap = R * a
    eta = (R / (1.0 + ap))[:, None] * bl
    s = 2.0 / (1.0 + ap)

    def image(x):
        y = x + eta
        return eta + (s / np.einsum("nj,nj->n", y, y))[:, None] * y

    img = [image(loc[:, k]) for k in range(3)]
    normals = []
    edge = np.zeros(len(ys))
    for k in range(3):
        A, B = img[k], img[(k + 1) % 3]
        m = loc[:, k] + loc[:, (k + 1) % 3]
        M = image(m / np.linalg.norm(m, axis=1, keepdims=True))
        n = np.cross(B - A, M - A)
        nn = np.linalg.norm(n, axis=1)
        great = nn == 0.0
        if great.any():
            n[great] = -np.cross(A[great], B[great])
            nn[great] = np.linalg.norm(n[great], axis=1)
        n = -n / nn[:, None]
        delta = np.where(great, 0.0, np.einsum("nj,nj->n", n, A))
        ang = _ccw_angle_np(n, delta, A, M) + _ccw_angle_np(n, delta, M, B)
        edge += np.where(great, 0.0, delta * ang)
        normals.append(n)
    turn = np.zeros(len(ys))
    for k in range(3):
        A = img[k]
        t_in = np.cross(normals[(k + 2) % 3], A)
        t_out = np.cross(normals[k], A)
        turn += np.arctan2(np.einsum("nj,nj->n", A, np.cross(t_in, t_out)), np.einsum("nj,nj->n", t_in, t_out))
    return np.where(degenerate, 0.0, R2 * (TWO_PI - turn - edge))


def _weighted_area_np(P, p, t, fold, lin, straddle_depth):
    if not fold:
        n = P.shape[0]
        return float(_image_area_np(P, np.full(n, lin[0, 0]), np.broadcast_to(lin[0, 1:], (n, P.shape[2]))).sum()), 0.0
    a_in = 0.0
    a_out = 0.0
    parent = np.arange(P.shape[0])
    bary = np.broadcast_to(np.eye(3), (P.shape[0], 3, 3)).copy()
    xi0 = np.zeros(P.shape[2])
    depth = 0
    while parent.size:
        ys = np.einsum("skj,sjd->skd", bary, P[parent])
        ys /= np.linalg.norm(ys, axis=-1, keepdims=True)
        ins = _weights_np(ys, xi0, p, t, True)[0]
        straddle = ~(ins.all(axis=1) | (~ins).all(axis=1))
        split = straddle & (depth < straddle_depth)
        done = ~split
        if done.any():
            c = ys[done].sum(axis=1)
            c /= np.linalg.norm(c, axis=-1, keepdims=True)
            region = np.where(straddle[done], _weights_np(c, xi0, p, t, True)[0], ins[done, 0])
            coeff = np.where(region[:, None], lin[0], lin[1])
            area = _image_area_np(ys[done], coeff[:, 0], coeff[:, 1:])
            a_in += area[region].sum()
            a_out += area[~region].sum()
        if not split.any():
            break
        b = bary[split]
        m01 = 0.5 * (b[:, 0] + b[:, 1])
        m12 = 0.5 * (b[:, 1] + b[:, 2])
        m20 = 0.5 * (b[:, 2] + b[:, 0])
        kids = np.stack(
            [
                np.stack([b[:, 0], m01, m20], axis=1),
                np.stack([m01, b[:, 1], m12], axis=1),
                np.stack([m20, m12, b[:, 2]], axis=1),
                np.stack([m01, m12, m20], axis=1),
            ],
            axis=1,
        )
        bary = kids.reshape(-1, 3, 3)
        parent = np.repeat(parent[split], 4)
        depth += 1
    return a_in, a_out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def moebius_sum(atoms, weights, xi):
    """Return ``sum_i w_i phi_xi(x_i)``."""
    atoms = np.ascontiguousarray(atoms, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    xi = np.ascontiguousarray(xi, dtype=float)
    if numba_enabled():
        return _moebius_sum_nb(atoms, weights, xi)
    return _moebius_sum_np(atoms, weights, xi)


def hersch_newton(atoms, weights, xi0, tol, max_iter, fd_step, rmax, alpha, n_fixed=50):
    args = (
        np.ascontiguousarray(atoms, dtype=float),
        np.ascontiguousarray(weights, dtype=float),
        np.ascontiguousarray(xi0, dtype=float),
        float(tol),
        int(max_iter),
        float(fd_step),
        float(rmax),
        float(alpha),
        int(n_fixed),
    )
    if numba_enabled():
        xi, g, it, hit = _hersch_newton_nb(*args)
    else:
        xi, g, it, hit = _hersch_newton_np(*args)
    return np.asarray(xi), float(g), int(it), bool(hit)


def _inverse_factor_coeffs(xi):
    s = 1.0 - xi @ xi
    return np.concatenate([[(2.0 - s) / s], 2.0 * xi / s])


def _inverse_factor_coeffs_fold(xi, p, t):
    # 1/rho is affine, so central differences at +-e_k recover it exactly
    d = xi.size
    E = np.vstack([np.eye(d), -np.eye(d)])
    g = 1.0 / np.sqrt(_weights_np(E, xi, p, t, True)[2])
    b = 0.5 * (g[:d] - g[d:])
    a = 0.5 * (g[:d] + g[d:]).mean()
    return np.concatenate([[a], b])


def weighted_area(P, xi, p=None, t=0.0, fold=False, straddle_depth=STRADDLE_DEPTH):
    """Integrate the squared conformal factor over the spherical triangles ``P``.

    The integrand is that of ``phi_xi`` or, with ``fold=True``, of
    ``phi_xi`` inside the cap ``(p, t)`` and ``phi_xi o tau_C`` outside it.
    Returns ``(area_inside, area_outside)``; without folding everything is
    accumulated in the first slot. Triangles cut by the cap boundary are
    bisected up to ``straddle_depth`` times; leftovers go by their centroid.
    """
    P = np.ascontiguousarray(P, dtype=float)
    if P.shape[0] == 0:
        return 0.0, 0.0
    d = P.shape[-1]
    xi = np.ascontiguousarray(xi, dtype=float)
    p = np.zeros(d) if p is None else np.ascontiguousarray(p, dtype=float)
    inner = _inverse_factor_coeffs(xi)
    outer = _inverse_factor_coeffs_fold(xi, p, float(t)) if fold else inner
    lin = np.ascontiguousarray(np.vstack([inner, outer]))
    args = (P, p, float(t), bool(fold), lin, int(straddle_depth))
    if numba_enabled():
        a, b = _weighted_area_nb(*args)
    else:
        a, b = _weighted_area_np(*args)
    return float(a), float(b)
