import math

import numpy as np
import pytest

from oracles import centering, gram_loop
from ralign.errors import DegenerateData, NonPSDPrecomputed, NotSymmetric, ValidationError, ZeroRowNormalization
from ralign.kernels import (
    KernelSpec,
    center,
    cross_gram,
    eigenvalue_clusters,
    gram,
    median_heuristic_gamma,
    spectrum,
)


def test_linear_two_points():
    k = gram(np.array([[1.0], [-1.0]]), KernelSpec("linear"))
    np.testing.assert_array_equal(k.entries, [[1, -1], [-1, 1]])


def test_linear_identity_rows():
    np.testing.assert_array_equal(gram(np.eye(2)).entries, np.eye(2))


def test_rbf_hand_value():
    k = gram(np.array([[0.0], [3.0]]), KernelSpec("rbf", 1.0)).entries
    np.testing.assert_allclose(k, [[1, math.exp(-9)], [math.exp(-9), 1]], rtol=1e-15)


def test_gram_matches_loop(rng):
    x = rng.standard_normal((9, 4))
    np.testing.assert_allclose(gram(x).entries, gram_loop(x), rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(gram(x, KernelSpec("rbf", 0.3)).entries, gram_loop(x, "rbf", 0.3), rtol=1e-12)


def test_normalize_diagonal(rng):
    x = rng.standard_normal((7, 3))
    k = gram(x, KernelSpec("linear", normalize_diagonal=True)).entries
    np.testing.assert_allclose(np.diag(k), 1.0, rtol=1e-14)
    x[2] = 0.0
    with pytest.raises(ZeroRowNormalization):
        gram(x, KernelSpec("linear", normalize_diagonal=True))


def test_precomputed_psd_check(rng):
    a = rng.standard_normal((5, 3))
    k = a @ a.T
    np.testing.assert_array_equal(gram(k, KernelSpec("precomputed")).entries, k)
    with pytest.raises(NonPSDPrecomputed):
        gram(np.array([[1.0, 2.0], [2.0, 1.0]]), KernelSpec("precomputed"))


def test_kernel_spec_parse():
    assert KernelSpec.parse("rbf:0.5").gamma == 0.5
    assert KernelSpec.parse("rbf:median").gamma == "median"
    assert KernelSpec.parse("linear").kind == "linear"
    with pytest.raises(ValidationError):
        KernelSpec.parse("rbf:-1")
    with pytest.raises(ValidationError):
        KernelSpec.parse("poly")


def test_center_ones_is_zero():
    np.testing.assert_allclose(center(np.ones((4, 4))).entries, 0.0, atol=1e-15)


def test_center_identity_two():
    np.testing.assert_allclose(center(np.eye(2)).entries, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


def test_center_idempotent_and_dense_oracle(rng):
    a = rng.standard_normal((8, 3))
    k = a @ a.T
    h = centering(8)
    c1 = center(k).entries
    np.testing.assert_allclose(c1, h @ k @ h, atol=1e-12)
    np.testing.assert_allclose(center(c1).entries, c1, atol=1e-12)
    assert np.all(np.abs(c1.sum(axis=1)) <= 1e-8 * 8 * np.abs(c1).max())


def test_spectrum_diagonal():
    s = spectrum(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(s.eigenvalues, [3, 2, 1])


def test_spectrum_rank_one():
    v = np.array([1.0, 2.0, 0.0])
    s = spectrum(np.outer(v, v))
    np.testing.assert_allclose(s.eigenvalues, [5, 0, 0], atol=1e-14)
    assert s.rank == 1


def test_spectrum_reconstruction_and_signs(rng):
    a = rng.standard_normal((5, 5))
    k = a @ a.T
    s = spectrum(k)
    assert np.linalg.norm(s.reconstruct() - k) < 1e-8 * np.linalg.norm(k)
    np.testing.assert_allclose(s.eigenvectors.T @ s.eigenvectors, np.eye(5), atol=1e-8)
    for col in s.eigenvectors.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_spectrum_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        spectrum(np.array([[1.0, 0.3], [0.0, 1.0]]))


def test_median_gamma_examples():
    assert median_heuristic_gamma(np.array([[0.0], [2.0]])) == pytest.approx(0.125)
    assert median_heuristic_gamma(np.array([[0.0], [1.0], [3.0]])) == pytest.approx(0.125)
    with pytest.raises(DegenerateData):
        median_heuristic_gamma(np.ones((4, 2)))


def test_linear_duality(rng):
    x = rng.standard_normal((30, 4))
    ev_n = spectrum(gram(x).entries / 30).eigenvalues[:4]
    ev_d = np.sort(np.linalg.eigvalsh(x.T @ x / 30))[::-1]
    np.testing.assert_allclose(ev_n, ev_d, rtol=1e-8)


def test_cross_gram_matches_gram(rng):
    x = rng.standard_normal((6, 2))
    np.testing.assert_allclose(cross_gram(x, x, KernelSpec("rbf", 0.7)), gram(x, KernelSpec("rbf", 0.7)).entries, atol=1e-15)


def test_eigenvalue_clusters():
    clusters = eigenvalue_clusters(np.array([3.0, 3.0 * (1 + 1e-10), 1.0, 0.5]))
    assert (0, 2) in [tuple(c) for c in clusters]
