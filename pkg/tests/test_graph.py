import numpy as np
import pytest

from twinclust.graph import (
    connected_components,
    laplacian,
    pairwise_indicator_distances,
    smallest_eigenvectors,
    zero_eigen_multiplicity,
)

from conftest import block_similarity, orthonormal, random_simplex_matrix
from oracles import loop_spectral_term


def test_two_node_laplacian():
    np.testing.assert_array_equal(laplacian(np.array([[0.0, 1.0], [1.0, 0.0]])), [[1, -1], [-1, 1]])


def test_identity_gives_zero_laplacian():
    np.testing.assert_array_equal(laplacian(np.eye(4)), np.zeros((4, 4)))


def test_laplacian_rows_sum_to_zero(rng):
    L = laplacian(random_simplex_matrix(rng, 12))
    np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-12)
    np.testing.assert_array_equal(L, L.T)
    assert np.linalg.eigvalsh(L)[0] >= -1e-12


def test_two_node_eigenvector():
    P, vals = smallest_eigenvectors(np.array([[1.0, -1.0], [-1.0, 1.0]]), 1, return_eigenvalues=True)
    np.testing.assert_allclose(P[:, 0], [2**-0.5, 2**-0.5])
    assert abs(vals[0]) < 1e-14


def test_block_laplacian_has_zero_pair(rng):
    L = laplacian(block_similarity(rng, [4, 6]))
    _, vals = smallest_eigenvectors(L, 2, return_eigenvalues=True)
    np.testing.assert_allclose(vals, 0.0, atol=1e-12)


def test_eigenvector_residuals(rng):
    A = rng.normal(size=(15, 15))
    L = A @ A.T
    P, vals = smallest_eigenvectors(L, 4, return_eigenvalues=True)
    np.testing.assert_allclose(P.T @ P, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(L @ P, P * vals, atol=1e-8)
    assert np.all(np.diff(vals) >= 0)


def test_sign_convention(rng):
    L = laplacian(random_simplex_matrix(rng, 10))
    P = smallest_eigenvectors(L, 3)
    for col in P.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_permutation_invariance(rng):
    Z = random_simplex_matrix(rng, 12)
    perm = rng.permutation(12)
    L = laplacian(Z)
    Lp = laplacian(Z[np.ix_(perm, perm)])
    P, vals = smallest_eigenvectors(L, 3, return_eigenvalues=True)
    Pp, valsp = smallest_eigenvectors(Lp, 3, return_eigenvalues=True)
    np.testing.assert_allclose(vals, valsp, atol=1e-10)
    # the c-dimensional subspaces agree (projectors are basis-independent)
    np.testing.assert_allclose((P @ P.T)[np.ix_(perm, perm)], Pp @ Pp.T, atol=1e-8)


def test_components_blocks_and_dense(rng):
    count, labels = connected_components(block_similarity(rng, [3, 5]))
    assert count == 2
    np.testing.assert_array_equal(labels, [0] * 3 + [1] * 5)
    assert connected_components(random_simplex_matrix(rng, 9))[0] == 1


def test_component_labels_follow_first_appearance():
    Z = np.eye(4)
    Z[:, [0, 2]] = Z[:, [2, 0]]  # 0<->2 linked, 1 and 3 isolated
    Z = Z / Z.sum(axis=0)
    count, labels = connected_components(Z)
    assert count == 3
    np.testing.assert_array_equal(labels, [0, 1, 0, 2])


@pytest.mark.parametrize("seed", range(50))
def test_components_equal_zero_multiplicity(seed):
    rng = np.random.default_rng(seed)
    k = rng.integers(1, 6)
    sizes = list(rng.integers(1, 8, size=k))
    Z = block_similarity(rng, sizes)
    perm = rng.permutation(Z.shape[0])
    Z = Z[np.ix_(perm, perm)]
    # drop weak edges so the thresholded graph can split further
    Z[Z < 0.05] = 0.0
    Z = Z / Z.sum(axis=0)
    count, _ = connected_components(Z, 1e-8)
    W = (Z + Z.T) / 2
    A = np.where(W > 1e-8, W, 0.0)
    L = np.diag(A.sum(axis=1)) - A
    assert count == zero_eigen_multiplicity(L, 1e-8)


def test_indicator_distances_examples():
    P = np.array([[0.6, 0.8], [0.6, 0.8], [1.0, 0.0]])
    d = pairwise_indicator_distances(P)
    assert d[0, 1] == 0.0
    E = np.eye(3)
    d = pairwise_indicator_distances(E)
    np.testing.assert_allclose(d, 2.0 * (1 - np.eye(3)))
    np.testing.assert_array_equal(np.diag(d), 0.0)


def test_spectral_identity_against_loop(rng):
    Z = random_simplex_matrix(rng, 9)
    P = orthonormal(rng, 9, 3)
    trace = np.trace(P.T @ laplacian(Z) @ P)
    assert loop_spectral_term(P, Z) == pytest.approx(trace, rel=1e-10)
    assert 0.5 * np.sum(pairwise_indicator_distances(P) * Z) == pytest.approx(trace, rel=1e-10)
