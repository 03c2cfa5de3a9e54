"""Triangulated closed surfaces carrying an intrinsic metric.

The metric lives in per-triangle edge lengths. ``base_lengths`` describe the
background metric g0 of the conformal class and ``conformal_log_factor`` the
per-vertex ``u`` of ``g = e^{2u} g0``; :attr:`SurfaceMesh.edge_lengths` gives
the lengths of ``g`` itself. Lengths are stored opposite to the triangle
corner with the same index: column 0 is the edge (v1, v2) and so on.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateLattice, MeshError, TriangleInequalityViolated, WrongLattice

TOPOLOGIES = ("sphere", "torus", "klein", "rp2")
ORIENTABLE = {"sphere": True, "torus": True, "klein": False, "rp2": False}

# corner pairs spanning the edge opposite corner k
_EDGE_CORNERS = ((1, 2), (2, 0), (0, 1))


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    base_lengths: np.ndarray
    topology: str
    conformal_log_factor: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise MeshError(f"unknown topology {self.topology!r}")
        object.__setattr__(self, "vertices", _frozen(self.vertices))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64))
        object.__setattr__(self, "base_lengths", _frozen(self.base_lengths))
        u = self.conformal_log_factor
        u = np.zeros(len(self.vertices)) if u is None else u
        object.__setattr__(self, "conformal_log_factor", _frozen(u))
        if self.base_lengths.shape != self.triangles.shape:
            raise MeshError("need three edge lengths per triangle")
        if self.conformal_log_factor.shape != (len(self.vertices),):
            raise MeshError("conformal factor must be per vertex")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def orientable(self):
        return ORIENTABLE[self.topology]

    @property
    def edge_lengths(self):
        u = self.conformal_log_factor
        if not np.any(u):
            return self.base_lengths
        scale = np.empty(self.triangles.shape)
        for k, (i, j) in enumerate(_EDGE_CORNERS):
            scale[:, k] = np.exp(0.5 * (u[self.triangles[:, i]] + u[self.triangles[:, j]]))
        return self.base_lengths * scale

    def triangle_areas(self, lengths=None):
        return heron(self.edge_lengths if lengths is None else lengths)

    def vertex_masses(self):
        """Lumped masses: a third of every incident triangle area."""
        third = self.triangle_areas() / 3.0
        return np.bincount(self.triangles.ravel(), weights=np.repeat(third, 3), minlength=self.n_vertices)

    @property
    def volume(self):
        return float(self.triangle_areas().sum())

    def edges(self):
        """Unique undirected edges as a sorted ``(E, 2)`` array."""
        e = self.triangles[:, [1, 2, 2, 0, 0, 1]].reshape(-1, 2)
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def euler_characteristic(self):
        return self.n_vertices - len(self.edges()) + self.n_triangles

    def validate(self):
        """Raise if the mesh is not a closed, metrically valid triangulation."""
        tri = self.triangles
        if np.any(tri[:, 0] == tri[:, 1]) or np.any(tri[:, 1] == tri[:, 2]) or np.any(tri[:, 0] == tri[:, 2]):
            raise MeshError("degenerate triangle")
        directed = tri[:, [1, 2, 2, 0, 0, 1]].reshape(-1, 2)
        und = np.sort(directed, axis=1)
        _, counts = np.unique(und, axis=0, return_counts=True)
        if np.any(counts != 2):
            raise MeshError("not a closed manifold: some edge is not shared by exactly two triangles")
        if self.orientable:
            _, dcounts = np.unique(directed, axis=0, return_counts=True)
            if np.any(dcounts != 1):
                raise MeshError("orientable mesh with inconsistent triangle orientation")
        check_triangle_inequality(self.base_lengths)
        check_triangle_inequality(self.edge_lengths)
        return self


@dataclass(frozen=True, eq=False)
class ImmersionSamples:
    """Per-vertex images of a conformal immersion into S^n."""

    images: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.images, dtype=float)
        x = x / np.linalg.norm(x, axis=1, keepdims=True)
        object.__setattr__(self, "images", _frozen(x))

    @property
    def n(self):
        return self.images.shape[1] - 1

    def triangle_images(self, mesh):
        return self.images[mesh.triangles]


def heron(lengths):
    """Triangle areas from edge lengths (Kahan's stable Heron formula)."""
    s = np.sort(np.asarray(lengths, dtype=float), axis=1)
    c, b, a = s[:, 0], s[:, 1], s[:, 2]
    prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(prod, 0.0))


def check_triangle_inequality(lengths):
    s = np.sort(np.asarray(lengths), axis=1)
    bad = s[:, 2] >= s[:, 0] + s[:, 1]
    if np.any(bad) or np.any(s[:, 0] <= 0):
        raise TriangleInequalityViolated(f"{int(bad.sum())} triangles violate the triangle inequality")


def lengths_from_positions(positions, triangles):
    p = np.asarray(positions)[triangles]
    return np.stack([np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in _EDGE_CORNERS], axis=1)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def _icosahedron():
    g = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
            [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
            [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _subdivide(verts, faces):
    edges = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    mid = verts[uniq[:, 0]] + verts[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    m = (inv.reshape(-1, 3) + len(verts)).astype(np.int64)
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
    new = np.concatenate(
        [np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1), np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1)]
    )
    return np.vstack([verts, mid]), new


def icosphere(subdivisions):
    """Unit icosphere and its identity immersion into S^2."""
    if not 0 <= subdivisions <= 8:
        raise ValueError("subdivisions must lie in [0, 8]")
    v, f = _icosahedron()
    for _ in range(subdivisions):
        v, f = _subdivide(v, f)
    mesh = SurfaceMesh(
        v, f, lengths_from_positions(v, f), "sphere",
        metadata={"surface": "sphere", "subdivisions": int(subdivisions)},
    )
    return mesh, ImmersionSamples(v)


SQUARE_LATTICE = ((1.0, 0.0), (0.0, 1.0))
EQUILATERAL_LATTICE = ((1.0, 0.0), (0.5, np.sqrt(3.0) / 2.0))


def flat_torus(basis, resolution):
    """Flat torus R^2 / (Z b1 + Z b2) on a ``resolution x resolution`` grid."""
    B = np.asarray(basis, dtype=float)
    if B.shape != (2, 2):
        raise ValueError("basis must be two 2-D vectors")
    if abs(np.linalg.det(B)) < 1e-12:
        raise DegenerateLattice("lattice vectors are linearly dependent")
    N = int(resolution)
    if N < 3:
        raise ValueError("resolution must be at least 3")
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    idx = lambda a, b: (a % N) * N + (b % N)  # noqa: E731
    v00, v10, v01, v11 = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
    tris = np.concatenate([np.stack([v00, v10, v01], -1).reshape(-1, 3), np.stack([v10, v11, v01], -1).reshape(-1, 3)])
    if np.linalg.det(B) < 0:
        tris = tris[:, [0, 2, 1]]
    coords = np.stack([i.ravel(), j.ravel()], 1) / N
    verts = coords @ B
    # every grid triangle of a kind has the same three lattice displacements
    b1, b2 = B / N
    lower = [np.linalg.norm(b2 - b1), np.linalg.norm(b2), np.linalg.norm(b1)]
    upper = [np.linalg.norm(b1), np.linalg.norm(b2 - b1), np.linalg.norm(b2)]
    half = N * N
    lengths = np.empty((2 * half, 3))
    lengths[:half] = lower
    lengths[half:] = upper
    if np.linalg.det(B) < 0:
        lengths = lengths[:, [0, 2, 1]]
    return SurfaceMesh(
        verts, tris, lengths, "torus",
        metadata={"surface": "torus", "basis": B.tolist(), "resolution": N},
    )


def klein_factors(v):
    """Metric coefficients (E, G) of ``E du^2 + G dv^2`` for the Klein metric of revolution."""
    a = 1.0 + 8.0 * np.cos(v) ** 2
    lam = (9.0 + a * a) / a
    return lam, lam / a


def klein_bottle_revolution(grid_u, grid_v, gluing="u-glide"):
    """Klein bottle ``0 <= u < pi/2, 0 <= v < pi`` with the metric of revolution.

    ``gluing='u-glide'`` identifies ``(pi/2, v) ~ (0, pi - v)`` and makes ``v``
    periodic; ``'v-glide'`` identifies ``(u, pi) ~ (pi/2 - u, 0)`` and makes
    ``u`` periodic. Edge lengths come from midpoint quadrature of the metric
    along straight parameter-space edges.
    """
    Nu, Nv = int(grid_u), int(grid_v)
    if Nu < 16 or Nv < 16:
        raise ValueError("Klein grids must be at least 16 x 16")
    if gluing not in ("u-glide", "v-glide"):
        raise ValueError(f"unknown gluing {gluing!r}")
    du, dv = (np.pi / 2) / Nu, np.pi / Nv

    def idx(i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        if gluing == "u-glide":
            wrap = i >= Nu
            i = np.where(wrap, i - Nu, i)
            j = np.where(wrap, (Nv - j) % Nv, j % Nv)
        else:
            wrap = j >= Nv
            j = np.where(wrap, j - Nv, j)
            i = np.where(wrap, (Nu - i) % Nu, i % Nu)
        return i * Nv + j

    i, j = np.meshgrid(np.arange(Nu), np.arange(Nv), indexing="ij")
    i, j = i.ravel(), j.ravel()
    corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]
    ids = [idx(a, b) for a, b in corners]
    tris = np.concatenate([np.stack([ids[0], ids[1], ids[2]], 1), np.stack([ids[1], ids[3], ids[2]], 1)])
    # unwrapped parameter coordinates of each triangle's corners
    uv = [np.stack([a * du, b * dv], 1) for a, b in corners]
    pts = np.concatenate([np.stack([uv[0], uv[1], uv[2]], 1), np.stack([uv[1], uv[3], uv[2]], 1)])
    lengths = np.empty(tris.shape)
    for k, (a, b) in enumerate(_EDGE_CORNERS):
        d = pts[:, b] - pts[:, a]
        E, G = klein_factors(0.5 * (pts[:, a, 1] + pts[:, b, 1]))
        lengths[:, k] = np.sqrt(E * d[:, 0] ** 2 + G * d[:, 1] ** 2)
    verts = np.stack([i * du, j * dv], 1).astype(float)
    return SurfaceMesh(
        verts, tris, lengths, "klein",
        metadata={"surface": "klein", "grid_u": Nu, "grid_v": Nv, "gluing": gluing},
    )


def projective_plane(subdivisions):
    """RP^2 as the antipodal quotient of the icosphere."""
    if subdivisions < 1:
        raise ValueError("projective_plane needs at least one subdivision")
    sph, _ = icosphere(subdivisions)
    v = sph.vertices
    order = {tuple(x): k for k, x in enumerate(v)}
    anti = np.array([order[tuple(-x)] for x in v])
    rep = np.minimum(np.arange(len(v)), anti)
    keep = np.unique(rep)
    new_index = np.full(len(v), -1)
    new_index[keep] = np.arange(len(keep))
    mapped = new_index[rep[sph.triangles]]
    _, first = np.unique(np.sort(mapped, axis=1), axis=0, return_index=True)
    first = np.sort(first)
    return SurfaceMesh(
        v[keep], mapped[first], sph.base_lengths[first], "rp2",
        metadata={"surface": "rp2", "subdivisions": int(subdivisions)},
    )


def apply_conformal_factor(mesh, u):
    """Multiply the metric by ``e^{2u}`` (composing with any existing factor)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,) or not np.all(np.isfinite(u)):
        raise ValueError("conformal factor must be finite and given per vertex")
    out = replace(mesh, conformal_log_factor=mesh.conformal_log_factor + u)
    check_triangle_inequality(out.edge_lengths)
    return out


# ---------------------------------------------------------------------------
# minimal immersions of flat tori by first eigenfunctions
# ---------------------------------------------------------------------------


def shortest_dual_vectors(basis, tol=1e-9):
    """Shortest nonzero dual-lattice vectors, one per +/- pair."""
    B = np.asarray(basis, dtype=float)
    A = np.linalg.inv(B).T
    ks = [(k1, k2) for k1 in range(-3, 4) for k2 in range(-3, 4) if (k1, k2) != (0, 0)]
    vecs = np.array([k1 * A[0] + k2 * A[1] for k1, k2 in ks])
    norms = np.linalg.norm(vecs, axis=1)
    short = vecs[norms <= norms.min() * (1 + tol)]
    out = []
    for w in short:
        if not any(np.allclose(w, -o) for o in out):
            out.append(w)
    return np.array(out)


def torus_minimal_immersion(mesh):
    """Immerse a flat torus into S^{2P-1} by its P pairs of first eigenfunctions.

    Only lattices whose first eigenfunctions give a conformal map qualify (the
    square and equilateral lattices); anything else raises
    :class:`WrongLattice`.
    """
    if mesh.topology != "torus" or "basis" not in mesh.metadata:
        raise WrongLattice("mesh is not a flat torus")
    a = shortest_dual_vectors(mesh.metadata["basis"])
    if len(a) < 2:
        raise WrongLattice("first eigenspace too small for an immersion")
    S = a.T @ a
    if not np.allclose(S, S[0, 0] * np.eye(2), rtol=1e-9, atol=1e-12):
        raise WrongLattice("first eigenfunctions do not give a conformal map")
    phase = 2.0 * np.pi * mesh.vertices @ a.T
    cols = np.empty((mesh.n_vertices, 2 * len(a)))
    cols[:, 0::2] = np.cos(phase)
    cols[:, 1::2] = np.sin(phase)
    return ImmersionSamples(cols / np.sqrt(len(a)))


def equilateral_torus_immersion(mesh):
    imm = torus_minimal_immersion(mesh)
    if imm.n != 5:
        raise WrongLattice("not the equilateral lattice")
    return imm


# ---------------------------------------------------------------------------
# OFF + JSON sidecar
# ---------------------------------------------------------------------------


def save_mesh(mesh, path):
    """Write ``path`` (OFF, positions padded to 3-D) plus ``path.json``."""
    path = Path(path)
    pos = np.zeros((mesh.n_vertices, 3))
    pos[:, : min(3, mesh.vertices.shape[1])] = mesh.vertices[:, :3]
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} 0"]
    lines += [" ".join(repr(float(c)) for c in p) for p in pos]
    lines += ["3 " + " ".join(str(int(k)) for k in t) for t in mesh.triangles]
    path.write_text("\n".join(lines) + "\n")
    side = {
        "schema_version": 1,
        "topology": mesh.topology,
        "chart_dim": int(mesh.vertices.shape[1]),
        "edge_lengths": mesh.base_lengths.tolist(),
        "conformal_log_factor": mesh.conformal_log_factor.tolist(),
        "metadata": mesh.metadata,
    }
    Path(str(path) + ".json").write_text(json.dumps(side, sort_keys=True))
    return path


def load_mesh(path):
    path = Path(path)
    tokens = [ln.split("#")[0].strip() for ln in path.read_text().splitlines()]
    tokens = [t for t in tokens if t]
    if not tokens[0].startswith("OFF"):
        raise MeshError(f"{path} is not an OFF file")
    nv, nf = (int(x) for x in tokens[1].split()[:2])
    pos = np.array([[float(x) for x in ln.split()[:3]] for ln in tokens[2 : 2 + nv]])
    faces = []
    for ln in tokens[2 + nv : 2 + nv + nf]:
        parts = [int(x) for x in ln.split()]
        if parts[0] != 3:
            raise MeshError("only triangle faces are supported")
        faces.append(parts[1:4])
    faces = np.array(faces, dtype=np.int64)
    side_path = Path(str(path) + ".json")
    if side_path.exists():
        side = json.loads(side_path.read_text())
        lengths = np.array(side["edge_lengths"], dtype=float)
        u = np.array(side["conformal_log_factor"], dtype=float)
        topo = side["topology"]
        pos = pos[:, : side.get("chart_dim", 3)]
        meta = side.get("metadata", {})
    else:
        lengths = lengths_from_positions(pos, faces)
        u, topo, meta = None, "sphere", {}
    return SurfaceMesh(pos, faces, lengths, topo, u, meta).validate()
