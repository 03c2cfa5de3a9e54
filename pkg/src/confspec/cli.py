"""Command-line front end.

Exit codes: 0 success, 1 bound-chain violation, 2 usage error, 3 numerical
failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bound_lab, mesh as meshes
from .conformal_volume import estimate_vc
from .errors import ConfspecError, UnknownRow, WrongLattice
from .factors import make_factor, parse_factor
from .hersch import renormalize
from .measure import DiscreteMeasure
from .sphere import moebius_apply
from .spectral import assemble, eigenpairs, export_matrix_market
from .tables import bound_table, table_csv, table_json

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
SCHEMA_VERSION = 1

SURFACES = ("sphere", "torus", "klein", "rp2")
LATTICES = {"square": meshes.SQUARE_LATTICE, "equilateral": meshes.EQUILATERAL_LATTICE}


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _sibling(out, suffix):
    p = Path(out)
    return p.with_name(p.stem + suffix)


def build_surface(args):
    """Mesh plus its immersion (``None`` where no immersion is available)."""
    if args.mesh:
        mesh = meshes.load_mesh(args.mesh)
        phi = None
        if mesh.topology == "sphere" and mesh.vertices.shape[1] == 3:
            phi = meshes.ImmersionSamples(mesh.vertices)
        elif mesh.topology == "torus" and "basis" in mesh.metadata:
            phi = meshes.torus_minimal_immersion(mesh)
    elif args.surface == "sphere":
        mesh, phi = meshes.icosphere(args.subdiv if args.subdiv is not None else 4)
        if args.immersion == "squaring":
            x, y, z = phi.images.T
            phi = meshes.ImmersionSamples(np.column_stack([x * x - y * y, 2 * x * y, 2 * z]) / (1 + z * z)[:, None])
    elif args.surface == "torus":
        mesh = meshes.flat_torus(LATTICES[args.lattice], args.resolution or 64)
        phi = meshes.torus_minimal_immersion(mesh)
    elif args.surface == "klein":
        n = args.resolution or 128
        mesh, phi = meshes.klein_bottle_revolution(n, n), None
    elif args.surface == "rp2":
        mesh, phi = meshes.projective_plane(args.subdiv if args.subdiv is not None else 4), None
    else:
        raise UsageError(f"unknown surface {args.surface!r}")
    name, params = parse_factor(args.factor)
    if name != "none":
        if "seed" not in params and name == "random-fourier":
            params["seed"] = args.seed
        mesh = meshes.apply_conformal_factor(mesh, make_factor(mesh, name, **params))
    return mesh, phi


def _need_immersion(phi, args):
    if phi is None:
        raise UsageError(f"no conformal immersion available for surface {args.surface!r}")
    return phi


def cmd_spectrum(args):
    mesh, _ = build_surface(args)
    K, M = assemble(mesh)
    s = eigenpairs(K, M, args.k)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "spectrum",
        "mesh": dict(mesh.metadata, topology=mesh.topology, vertices=mesh.n_vertices, triangles=mesh.n_triangles),
        "factor": args.factor,
        "volume": s.volume,
        "euler_characteristic": mesh.euler_characteristic,
        "eigenvalues": s.eigenvalues.tolist(),
        "normalized": s.normalized.tolist(),
        "clusters": [{"value": v, "multiplicity": mult, "first_index": first} for v, mult, first in s.clusters()],
        "lambda1": float(s.eigenvalues[1]),
        "lambda1_multiplicity": s.multiplicity(1),
        "lambda1_bar": float(s.normalized[1]),
    }
    if args.export_mtx:
        doc["matrix_market"] = list(export_matrix_market(K, M, args.export_mtx))
    if args.save_mesh:
        meshes.save_mesh(mesh, args.save_mesh)
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_conformal_volume(args):
    mesh, phi = build_surface(args)
    phi = _need_immersion(phi, args)
    est = estimate_vc(mesh, phi, budget=args.budget, seed=args.seed)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "conformal-volume",
        "mesh": dict(mesh.metadata, topology=mesh.topology, vertices=mesh.n_vertices),
        "immersion": args.immersion,
        "target_dimension": phi.n,
        "estimate": est.to_dict(),
    }
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_cap_search(args):
    from .plots import plot_cap_landscape

    mesh, phi = build_surface(args)
    phi = _need_immersion(phi, args)
    K, M = assemble(mesh)
    s = eigenpairs(K, M, 6)
    base = renormalize(DiscreteMeasure(phi.images, M.diagonal()))
    phi0 = meshes.ImmersionSamples(moebius_apply(base.xi, phi.images))
    f1, idx, mom = bound_lab.first_eigenfunction(s, mesh, phi0)
    res = bound_lab.cap_search(mesh, phi0, f1, n_directions=args.directions, seed=args.seed)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "cap-search",
        "cap": {"p": res.cap.p.tolist(), "t": res.cap.t},
        "xi": res.xi.tolist(),
        "psi_norm": res.psi_norm,
        "tol_psi": res.tol_psi,
        "mean_residual": res.mean_residual,
        "moment_residual": res.moment_residual.tolist(),
        "evaluations": res.evaluations,
        "f1_index": idx,
        "moment_norm": float(np.linalg.norm(mom)),
        "landscape": res.landscape,
    }
    if args.degree_check:
        doc["h0_degree"] = bound_lab.degree_of_h0(mesh, phi0, f1)
    _emit(dumps(doc), args.out)
    if args.out:
        plot_cap_landscape(res.landscape, _sibling(args.out, "_landscape.svg"))
    return EXIT_OK


def cmd_verify_bound(args):
    from .plots import plot_cap_landscape, plot_chain

    mesh, phi = build_surface(args)
    phi = _need_immersion(phi, args)
    report, landscape = bound_lab.verify_bound(
        mesh, phi, budget=args.budget, seed=args.seed, n_directions=args.directions, degree_check=args.degree_check
    )
    doc = report.to_dict()
    doc["command"] = "verify-bound"
    doc["factor"] = args.factor
    _emit(dumps(doc), args.out)
    if args.out:
        plot_chain(doc, _sibling(args.out, "_chain.svg"))
        if landscape is not None:
            plot_cap_landscape(landscape, _sibling(args.out, "_landscape.svg"))
    if not report.chain_ok:
        sys.stderr.write("bound chain VIOLATED: " + json.dumps(report.checks, sort_keys=True) + "\n")
        return EXIT_VIOLATION
    return EXIT_OK


def _parse_genera(text):
    if not text:
        return []
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if any(g < 0 for g in out):
        raise UsageError("genus must be >= 0")
    return out


def cmd_table(args):
    try:
        genera = _parse_genera(args.genus)
    except ValueError:
        raise UsageError(f"malformed --genus {args.genus!r}") from None
    rows = bound_table()
    text = table_csv(rows, genera) if args.format == "csv" else table_json(rows, genera)
    _emit(text, args.out)
    return EXIT_OK


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return v

    return conv


def build_parser():
    parser = argparse.ArgumentParser(prog="confspec", description="Conformal spectral bounds on surfaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_surface=True):
        p.add_argument("--out", help="output file (stdout when omitted)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=0)
        if not with_surface:
            return
        p.add_argument("--surface", choices=SURFACES, default="sphere")
        p.add_argument("--mesh", help="OFF mesh with a JSON sidecar (overrides --surface)")
        p.add_argument("--subdiv", type=int, help="icosphere subdivisions (sphere, rp2)")
        p.add_argument("--resolution", type=_positive(int), help="grid size (torus, klein)")
        p.add_argument("--lattice", choices=tuple(LATTICES), default="equilateral")
        p.add_argument("--factor", default="none", help="none | bump:key=val,... | random-fourier:key=val,...")
        p.add_argument("--budget", type=_positive(int), default=128, help="conformal-volume evaluations")
        p.add_argument("--immersion", choices=("default", "squaring"), default="default")

    p = sub.add_parser("spectrum", help="lowest Laplace eigenvalues")
    common(p)
    p.add_argument("--k", type=_positive(int), default=6)
    p.add_argument("--export-mtx", help="prefix for Matrix Market stiffness/mass files")
    p.add_argument("--save-mesh", help="write the mesh as OFF + JSON sidecar")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify-bound", help="run the lambda_2 bound chain")
    common(p)
    p.add_argument("--directions", type=_positive(int), default=60)
    p.add_argument("--degree-check", action="store_true")
    p.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("conformal-volume", help="estimate the conformal volume of the immersion")
    common(p)
    p.set_defaults(func=cmd_conformal_volume)

    p = sub.add_parser("cap-search", help="find a doubly admissible cap")
    common(p)
    p.add_argument("--directions", type=_positive(int), default=60)
    p.add_argument("--degree-check", action="store_true")
    p.set_defaults(func=cmd_cap_search)

    p = sub.add_parser("table", help="closed-form bound table")
    common(p, with_surface=False)
    p.add_argument("--genus", help="genus rows, e.g. 0..5 or 0,2,4")
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command != "table" and args.format == "csv":
        sys.stderr.write("confspec: --format csv is only available for 'table'\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, UnknownRow, WrongLattice, ValueError) as exc:
        sys.stderr.write(f"confspec: {exc}\n")
        return EXIT_USAGE
    except (ConfspecError, np.linalg.LinAlgError, FloatingPointError) as exc:
        sys.stderr.write(f"confspec: numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
