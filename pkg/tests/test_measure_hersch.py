import numpy as np
import pytest
from helpers import random_rotation, random_unit
from hypothesis import given
from hypothesis import strategies as st

from confspec import kernels
from confspec.errors import EmptyMeasure, MaxIterations, NotAdmissible
from confspec.hersch import renormalize, renormalized_pushforward
from confspec.measure import (
    DiscreteMeasure,
    center_of_mass,
    hersch_admissible,
    max_point_mass,
    mesh_measure,
    pushforward,
    total_mass,
)
from confspec.sphere import SphericalCap, fold, reflect

# root of the symmetric three-atom equation, from a scipy brentq run on the
# scalar equation along the (1,1,1) axis (independent of the Newton solver)
THREE_ATOM_S = -0.31783724519578216

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=3, max_value=8)


def test_total_mass_and_empty():
    mu = DiscreteMeasure(np.eye(4), np.ones(4))
    assert total_mass(mu) == 4.0
    with pytest.raises(EmptyMeasure):
        DiscreteMeasure(np.empty((0, 3)), np.empty(0))


def test_weights_validated():
    with pytest.raises(ValueError):
        DiscreteMeasure(np.eye(3), [1.0, -1.0, 1.0])
    with pytest.raises(ValueError):
        DiscreteMeasure(np.eye(3), [1.0, 1.0])


def test_center_of_mass_examples():
    e = np.eye(3)
    assert np.allclose(center_of_mass(DiscreteMeasure([e[0], -e[0]], [1, 1])), 0)
    assert np.allclose(center_of_mass(DiscreteMeasure([e[0]], [2.0])), e[0])
    assert np.allclose(center_of_mass(DiscreteMeasure(e, np.ones(3))), [1 / 3] * 3)


def test_icosphere_measure_mass(sphere4):
    mesh, phi = sphere4
    mu = mesh_measure(mesh, phi.images)
    assert total_mass(mu) == pytest.approx(4 * np.pi, rel=0.01)


@given(dims, seeds)
def test_pushforward_keeps_weights_and_mass(dim, seed):
    rng = np.random.default_rng(seed)
    mu = DiscreteMeasure(random_unit(rng, 9, dim), rng.random(9) + 0.1)
    p = random_unit(rng, 1, dim)[0]
    nu = pushforward(lambda x: reflect(p, x), mu)
    assert total_mass(nu) == total_mass(mu)
    assert np.allclose(center_of_mass(nu), reflect(p, center_of_mass(mu)))
    assert pushforward(lambda x: x, mu).atoms.tolist() == mu.atoms.tolist()
    C = SphericalCap(p, 0.2)
    folded = pushforward(lambda x: fold(C, x), mu)
    from confspec.sphere import cap_boundary_distance

    assert np.all(cap_boundary_distance(C, folded.atoms) >= -1e-10)


@given(dims, seeds)
def test_center_of_mass_in_ball(dim, seed):
    rng = np.random.default_rng(seed)
    mu = DiscreteMeasure(random_unit(rng, 7, dim), rng.random(7) + 0.01)
    assert np.linalg.norm(center_of_mass(mu)) <= 1.0 + 1e-15


def test_admissibility_examples():
    e = np.eye(3)
    assert not hersch_admissible(DiscreteMeasure(e[:2], [1, 1]))
    assert hersch_admissible(DiscreteMeasure(e, [1, 1, 1]))
    assert not hersch_admissible(DiscreteMeasure(e[:1], [1]))
    # coincident atoms are aggregated
    atoms = np.vstack([e[0], e[0] + 1e-14, e[1], e[2]])
    assert max_point_mass(DiscreteMeasure(atoms, np.ones(4))) == 2.0
    assert not hersch_admissible(DiscreteMeasure(atoms, np.ones(4)))


@given(seeds)
def test_admissibility_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    atoms = random_unit(rng, 6, 3)
    w = rng.random(6) + 0.1
    w[0] = w[1:].sum() * rng.uniform(0.8, 1.2)
    perm = rng.permutation(6)
    a = hersch_admissible(DiscreteMeasure(atoms, w))
    assert a == hersch_admissible(DiscreteMeasure(atoms[perm], w[perm]))


def test_three_atoms_match_bisection_oracle():
    res = renormalize(DiscreteMeasure(np.eye(3), np.ones(3)))
    assert res.converged
    assert np.allclose(res.xi, THREE_ATOM_S / np.sqrt(3) * np.ones(3), atol=1e-10)
    nu = renormalized_pushforward(DiscreteMeasure(np.eye(3), np.ones(3)))
    assert np.linalg.norm(nu.atoms.sum(axis=0)) <= 1e-10 * 3


def test_two_atoms_not_admissible():
    with pytest.raises(NotAdmissible):
        renormalize(DiscreteMeasure(np.eye(3)[:2], [1, 1]))


def test_symmetric_icosphere_is_fixed(sphere3):
    mesh, phi = sphere3
    mu = mesh_measure(mesh, phi.images)
    res = renormalize(mu)
    assert np.linalg.norm(res.xi) <= 1e-10
    nu = renormalized_pushforward(mu)
    assert np.allclose(nu.atoms, mu.atoms, atol=1e-10)


def test_concentrated_measure_moves_xi_away(sphere3):
    mesh, phi = sphere3
    q = np.array([0.0, 0.0, 1.0])
    w = mesh.vertex_masses().copy()
    near = phi.images @ q > 0.95
    w[near] *= 0.95 * w[~near].sum() / (0.05 * w[near].sum())
    res = renormalize(DiscreteMeasure(phi.images, w))
    assert res.xi @ q < 0
    assert res.residual_norm <= 1e-10 * w.sum()


@given(dims, seeds)
def test_residual_and_equivariance(dim, seed):
    rng = np.random.default_rng(seed)
    mu = DiscreteMeasure(random_unit(rng, 12, dim), rng.random(12) + 0.05)
    res = renormalize(mu)
    assert res.residual_norm <= 1e-10 * total_mass(mu)
    R = random_rotation(rng, dim)
    rot = renormalize(DiscreteMeasure(mu.atoms @ R.T, mu.weights))
    assert np.allclose(rot.xi, R @ res.xi, atol=1e-9)


@given(seeds)
def test_continuity_in_weights(seed):
    rng = np.random.default_rng(seed)
    atoms = random_unit(rng, 15, 4)
    w = rng.random(15) + 0.2
    a = renormalize(DiscreteMeasure(atoms, w)).xi
    w2 = w.copy()
    w2[rng.integers(15)] *= 1 + 1e-6
    b = renormalize(DiscreteMeasure(atoms, w2)).xi
    assert np.linalg.norm(a - b) <= 1e-3


@given(dims, seeds)
def test_hemisphere_fold_points_are_reflections(dim, seed):
    rng = np.random.default_rng(seed)
    mu = DiscreteMeasure(random_unit(rng, 20, dim), rng.random(20) + 0.1)
    p = random_unit(rng, 1, dim)[0]
    up = renormalize(pushforward(lambda x: fold(SphericalCap(p, 0.0), x), mu))
    down = renormalize(pushforward(lambda x: fold(SphericalCap(-p, 0.0), x), mu))
    assert np.allclose(up.xi, reflect(p, down.xi), atol=1e-8)


def test_max_iterations_reported():
    rng = np.random.default_rng(0)
    mu = DiscreteMeasure(random_unit(rng, 30, 3), rng.random(30) + 0.1)
    res = renormalize(mu, max_iter=1, xi0=np.array([0.9, 0.0, 0.0]))
    assert not res.converged
    with pytest.raises(MaxIterations):
        renormalize(mu, max_iter=1, xi0=np.array([0.9, 0.0, 0.0]), strict=True)


@pytest.mark.parametrize("dim", [3, 6])
def test_newton_kernels_agree(dim):
    rng = np.random.default_rng(dim)
    atoms = random_unit(rng, 40, dim)
    w = rng.random(40) + 0.1
    x0 = np.zeros(dim)
    nb = kernels._hersch_newton_nb(atoms, w, x0, 1e-10 * w.sum(), 200, 1e-6, 1 - 1e-9, 0.25, 50)
    npy = kernels._hersch_newton_np(atoms, w, x0, 1e-10 * w.sum(), 200, 1e-6, 1 - 1e-9, 0.25, 50)
    assert np.allclose(nb[0], npy[0], atol=1e-10)
    assert np.allclose(kernels._moebius_sum_nb(atoms, w, nb[0]), kernels._moebius_sum_np(atoms, w, nb[0]), atol=1e-12)


def test_renormalize_backends(backend):
    res = renormalize(DiscreteMeasure(np.eye(3), np.ones(3)))
    assert np.allclose(res.xi, THREE_ATOM_S / np.sqrt(3), atol=1e-10)
