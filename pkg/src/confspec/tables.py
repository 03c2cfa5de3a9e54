"""Closed-form eigenvalue bounds for homogeneous spaces and the genus bound."""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

from .errors import ModulusOutOfRange, UnknownRow

KLEIN_MODULUS = 2.0 * math.sqrt(2.0) / 3.0


def sphere_volume(m):
    """Volume of the unit round sphere S^m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0)


def elliptic_E(k):
    """Complete elliptic integral of the second kind, ``E(k) = int sqrt(1 - k^2 sin^2)``.

    Arithmetic-geometric mean with the Legendre sum for ``E / K``.
    """
    k = float(k)
    if not 0.0 <= k < 1.0:
        raise ModulusOutOfRange(f"modulus {k} outside [0, 1)")
    a, b = 1.0, math.sqrt(1.0 - k * k)
    c = k
    total = 0.5 * c * c
    power = 0.5
    for _ in range(64):
        if abs(c) <= 1e-16 * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        power *= 2.0
        total += power * c * c
    K = math.pi / (2.0 * a)
    return K * (1.0 - total)


@dataclass(frozen=True)
class TableRow:
    name: str
    m: int
    lambda1_bar_bound: float
    lambda2_bar_bound: float
    formula: str
    params: str = ""


def _row(name, m, lam1, formula, params=""):
    return TableRow(name, m, lam1, 2.0 ** (2.0 / m) * lam1, formula, params)


def _sphere(m=2):
    w = sphere_volume(m)
    return _row("S^m", m, m * w ** (2.0 / m), "m omega_m^(2/m)", f"m={m}")


def _real_projective(m=2):
    w = sphere_volume(m)
    return _row("RP^m", m, 2 * (m + 1) * (w / 2.0) ** (2.0 / m), "2(m+1)(omega_m/2)^(2/m)", f"m={m}")


def _complex_projective(d=1):
    lam1 = 4.0 * math.pi * (d + 1) / math.factorial(d) ** (1.0 / d)
    return _row("CP^d", 2 * d, lam1, "4pi(d+1)/d!^(1/d)", f"d={d}")


def _quaternionic_projective(d=1):
    lam1 = 8.0 * math.pi * (d + 1) / math.factorial(2 * d + 1) ** (1.0 / (2 * d))
    return _row("HP^d", 4 * d, lam1, "8pi(d+1)/(2d+1)!^(1/(2d))", f"d={d}")


def _octonionic_plane():
    lam1 = 48.0 * math.pi * (6.0 / math.factorial(11)) ** (1.0 / 8.0)
    return _row("OP^2", 16, lam1, "48pi(6/11!)^(1/8)")


def _clifford(p=1, q=1):
    m = p + q
    lam1 = (p**p * q**q) ** (1.0 / m) * (sphere_volume(p) * sphere_volume(q)) ** (2.0 / m)
    return _row("S^p x S^q", m, lam1, "(p^p q^q)^(1/m)(omega_p omega_q)^(2/m)", f"p={p},q={q}")


def _equilateral_torus():
    return _row("T^2_eq", 2, 8.0 * math.pi**2 * math.sqrt(3.0) / 3.0, "8pi^2 sqrt(3)/3")


def _klein_bottle():
    return _row("K", 2, 12.0 * math.pi * elliptic_E(KLEIN_MODULUS), "12pi E(2sqrt(2)/3)")


ROWS = {
    "S^m": _sphere,
    "RP^m": _real_projective,
    "CP^d": _complex_projective,
    "HP^d": _quaternionic_projective,
    "OP^2": _octonionic_plane,
    "S^p x S^q": _clifford,
    "T^2_eq": _equilateral_torus,
    "K": _klein_bottle,
}


def table_row(name, **params):
    """One row of the bound table; ``params`` are m, d or p/q as the row needs."""
    try:
        make = ROWS[name]
    except KeyError:
        raise UnknownRow(f"unknown row {name!r}; known rows: {', '.join(ROWS)}") from None
    try:
        return make(**params)
    except TypeError as exc:
        raise UnknownRow(f"bad parameters for {name!r}: {exc}") from None


def bound_table():
    return [table_row(name) for name in ROWS]


def genus_bound(genus, k):
    """``8 pi k floor((genus + 3) / 2)`` for k in {1, 2}."""
    if genus < 0:
        raise ValueError("genus must be >= 0")
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    return 8.0 * math.pi * k * ((genus + 3) // 2)


def genus_rows(genera):
    return [
        {"genus": g, "lambda1_bar_bound": genus_bound(g, 1), "lambda2_bar_bound": genus_bound(g, 2)}
        for g in genera
    ]


COLUMNS = ("name", "m", "lambda1_bar_bound", "lambda2_bar_bound", "formula", "params")


def table_json(rows, genera=()):
    doc = {
        "schema_version": 1,
        "rows": [asdict(r) for r in rows],
        "genus_bounds": genus_rows(genera),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def table_csv(rows, genera=()):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r.name, r.m, repr(r.lambda1_bar_bound), repr(r.lambda2_bar_bound), r.formula, r.params])
    for g in genus_rows(genera):
        w.writerow([f"genus {g['genus']}", 2, repr(g["lambda1_bar_bound"]), repr(g["lambda2_bar_bound"]), "8pi k floor((g+3)/2)", ""])
    return buf.getvalue()
