import numpy as np
import pytest

from ralign.core import GramMatrix, OverlapMatrix, PairedDataset, RepresentationSet, Spectrum, numerical_rank, validate_paired
from ralign.errors import MismatchedSampleCount, NonFiniteEntry, NotSymmetric, TooFewSamples, ValidationError


def test_paired_ok(rng):
    p = PairedDataset.from_arrays(rng.standard_normal((10, 3)), rng.standard_normal((10, 5)))
    validate_paired(p)
    assert p.n == 10 and p.left.dim == 3 and p.right.dim == 5


def test_mismatched_counts(rng):
    with pytest.raises(MismatchedSampleCount):
        PairedDataset.from_arrays(rng.standard_normal((10, 3)), rng.standard_normal((9, 5)))


def test_nan_rejected(rng):
    x = rng.standard_normal((10, 3))
    x[4, 1] = np.nan
    with pytest.raises(NonFiniteEntry):
        RepresentationSet(x)


def test_inf_targets_rejected(rng):
    y = np.zeros(10)
    y[0] = np.inf
    with pytest.raises(NonFiniteEntry):
        PairedDataset.from_arrays(rng.standard_normal((10, 2)), rng.standard_normal((10, 2)), y)


def test_single_sample_rejected():
    with pytest.raises(TooFewSamples):
        RepresentationSet(np.ones((1, 3)))


def test_target_rows_checked(rng):
    with pytest.raises(ValidationError):
        PairedDataset.from_arrays(rng.standard_normal((10, 2)), rng.standard_normal((10, 2)), np.zeros(9))


def test_representation_is_immutable(rng):
    x = rng.standard_normal((5, 2))
    r = RepresentationSet(x)
    x[0, 0] = 99.0
    assert r.data[0, 0] != 99.0
    with pytest.raises(ValueError):
        r.data[0, 0] = 1.0


def test_vector_becomes_column():
    r = RepresentationSet([1.0, 2.0, 3.0])
    assert r.data.shape == (3, 1)


def test_gram_invariants():
    GramMatrix(np.eye(3)).validate()
    with pytest.raises(NotSymmetric):
        GramMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        GramMatrix(np.array([[1.0, 2.0], [2.0, 1.0]])).validate()  # eigenvalue -1
    with pytest.raises(ValidationError):
        GramMatrix(np.eye(2), centered=True).validate()  # rows do not sum to zero


def test_spectrum_reconstruction(rng):
    a = rng.standard_normal((6, 4))
    k = a @ a.T
    w, v = np.linalg.eigh(k)
    s = Spectrum(w[::-1].clip(0), v[:, ::-1])
    assert np.linalg.norm(s.reconstruct() - k) <= 1e-8 * np.linalg.norm(k)
    assert s.rank == 4


def test_numerical_rank_threshold():
    assert numerical_rank(np.array([1.0, 1e-9, 1e-11])) == 2
    assert numerical_rank(np.zeros(3)) == 0


def test_overlap_bounds():
    OverlapMatrix(np.eye(2))
    with pytest.raises(ValidationError):
        OverlapMatrix(np.array([[1.5]]))
