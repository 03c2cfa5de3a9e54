import numpy as np


def random_unit(rng, n, dim):
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_ball(rng, n, dim, rmax=0.95):
    d = random_unit(rng, n, dim)
    r = rmax * rng.random(n) ** (1.0 / dim)
    return d * r[:, None]


def squaring_map(points):
    """Complex squaring on the Riemann sphere, written in ambient coordinates."""
    x, y, z = points.T
    return np.column_stack([x * x - y * y, 2 * x * y, 2 * z]) / (1 + z * z)[:, None]


def random_rotation(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


# (number, title, ok, detail) per acceptance criterion, printed at session end
ACCEPTANCE = {}


def record(num, title, ok, detail):
    ACCEPTANCE[num] = (title, bool(ok), detail)
    return bool(ok)
