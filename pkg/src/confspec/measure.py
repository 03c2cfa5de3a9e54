"""Weighted atomic measures on S^n."""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import EmptyMeasure

COINCIDENCE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if atoms.size == 0 or weights.size == 0:
            raise EmptyMeasure("measure has no atoms")
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError("atoms and weights differ in length")
        if not np.all(weights > 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be positive and finite")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self):
        return self.atoms.shape[1]

    def __len__(self):
        return self.weights.shape[0]


def total_mass(mu):
    if mu is None or len(mu) == 0:
        raise EmptyMeasure("measure has no atoms")
    return float(np.sum(mu.weights))


def center_of_mass(mu):
    return (mu.weights @ mu.atoms) / total_mass(mu)


def pushforward(f, mu):
    """Map atoms through ``f`` (vectorized over rows); weights are kept as is."""
    return DiscreteMeasure(np.asarray(f(mu.atoms), dtype=float), mu.weights)


def max_point_mass(mu, tol=COINCIDENCE_TOL):
    """Largest total weight carried by a cluster of coincident atoms."""
    pairs = cKDTree(mu.atoms).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return float(mu.weights.max())
    n = len(mu)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return float(np.bincount(labels, weights=mu.weights).max())


def hersch_admissible(mu):
    """True iff no single point carries half of the total mass or more."""
    return max_point_mass(mu) < 0.5 * total_mass(mu)


def mesh_measure(mesh, images):
    """Atomize the metric volume of ``mesh`` at the vertex images (lumped masses)."""
    return DiscreteMeasure(images, mesh.vertex_masses())
