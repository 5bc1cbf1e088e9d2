"""Shared domain types and the sample-pairing contract.

All arrays held by these types are float64 copies flagged read-only, so
instances can be shared freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    MismatchedSampleCount,
    NonFiniteEntry,
    NotSymmetric,
    TooFewSamples,
    ValidationError,
)

# eigenvalues below RANK_RTOL * largest count as zero for ranks and pseudo-inverses
RANK_RTOL = 1e-10
SYMMETRY_RTOL = 1e-12


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def numerical_rank(eigenvalues: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Number of eigenvalues above ``rtol`` times the largest one."""
    ev = np.asarray(eigenvalues, dtype=np.float64)
    if ev.size == 0:
        return 0
    top = float(np.max(ev))
    if top <= 0.0:
        return 0
    return int(np.count_nonzero(ev > rtol * top))


@dataclass(frozen=True)
class RepresentationSet:
    """n samples by d features; row i is the embedding of sample i."""

    data: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2:
            raise ValidationError(f"representation must be 2-D, got shape {a.shape}")
        if a.shape[0] < 2:
            raise TooFewSamples(f"need at least 2 samples, got {a.shape[0]}")
        if a.shape[1] < 1:
            raise ValidationError("representation needs at least one feature column")
        if not np.all(np.isfinite(a)):
            bad = np.argwhere(~np.isfinite(a))[0]
            raise NonFiniteEntry(f"non-finite entry at row {bad[0]}, column {bad[1]}")
        object.__setattr__(self, "data", _frozen(a))

    @property
    def sample_count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def subset(self, rows) -> "RepresentationSet":
        return RepresentationSet(self.data[rows], self.label)


@dataclass(frozen=True)
class PairedDataset:
    """Two representations of the same samples, paired by row position.

    ``targets`` is optional: either an n x t real matrix or a length-n vector
    (class labels or scalar responses).
    """

    left: RepresentationSet
    right: RepresentationSet
    targets: np.ndarray | None = None

    def __post_init__(self):
        if self.targets is not None:
            t = np.asarray(self.targets)
            if t.dtype.kind not in "iuf":
                t = t.astype(np.float64)
            if not np.all(np.isfinite(t)):
                raise NonFiniteEntry("targets contain non-finite entries")
            t = np.array(t, copy=True)
            t.setflags(write=False)
            object.__setattr__(self, "targets", t)
        validate_paired(self)

    @classmethod
    def from_arrays(cls, left, right, targets=None, labels=("left", "right")):
        return cls(RepresentationSet(left, labels[0]), RepresentationSet(right, labels[1]), targets)

    @property
    def n(self) -> int:
        return self.left.sample_count

    def target_matrix(self) -> np.ndarray:
        """Targets as an n x t float matrix."""
        if self.targets is None:
            raise ValidationError("dataset has no targets")
        t = np.asarray(self.targets, dtype=np.float64)
        return t[:, None] if t.ndim == 1 else t

    def subset(self, rows) -> "PairedDataset":
        rows = np.asarray(rows)
        targets = None if self.targets is None else self.targets[rows]
        return PairedDataset(self.left.subset(rows), self.right.subset(rows), targets)

    def swapped(self) -> "PairedDataset":
        return PairedDataset(self.right, self.left, self.targets)


def validate_paired(p: PairedDataset) -> None:
    """Raise if any pairing or type invariant is violated."""
    for side in (p.left, p.right):
        a = side.data
        if a.ndim != 2 or a.shape[1] < 1:
            raise ValidationError(f"bad representation shape {a.shape}")
        if a.shape[0] < 2:
            raise TooFewSamples(f"need at least 2 samples, got {a.shape[0]}")
        if not np.all(np.isfinite(a)):
            raise NonFiniteEntry(f"representation {side.label!r} has non-finite entries")
    if p.left.sample_count != p.right.sample_count:
        raise MismatchedSampleCount(
            f"left has {p.left.sample_count} samples, right has {p.right.sample_count}"
        )
    if p.targets is not None and np.asarray(p.targets).shape[0] != p.left.sample_count:
        raise MismatchedSampleCount(
            f"targets have {np.asarray(p.targets).shape[0]} rows, expected {p.left.sample_count}"
        )


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric n x n kernel matrix.

    Construction checks shape, finiteness and symmetry. The O(n^3)
    positive-semidefiniteness check lives in :meth:`validate`.
    """

    entries: np.ndarray
    centered: bool = False

    def __post_init__(self):
        k = np.asarray(self.entries, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise DimensionMismatch(f"Gram matrix must be square, got shape {k.shape}")
        if not np.all(np.isfinite(k)):
            raise NonFiniteEntry("Gram matrix has non-finite entries")
        scale = float(np.max(np.abs(k))) if k.size else 0.0
        if scale > 0 and float(np.max(np.abs(k - k.T))) > SYMMETRY_RTOL * scale:
            raise NotSymmetric("Gram matrix is not symmetric")
        object.__setattr__(self, "entries", _frozen(k))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def validate(self, psd_rtol: float = 1e-10) -> None:
        k = self.entries
        ev = np.linalg.eigvalsh(k)
        top = max(float(ev[-1]), 0.0)
        if ev[0] < -psd_rtol * top or (top == 0.0 and ev[0] < 0.0):
            from .errors import NonPSDPrecomputed

            raise NonPSDPrecomputed(f"smallest eigenvalue {ev[0]:.3e} vs largest {top:.3e}")
        if self.centered:
            tol = 1e-8 * self.n * float(np.max(np.abs(k)))
            if float(np.max(np.abs(k.sum(axis=1)))) > tol:
                raise ValidationError("matrix flagged centered but row sums are not zero")


@dataclass(frozen=True)
class Spectrum:
    """Descending, nonnegative eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))
        object.__setattr__(self, "eigenvectors", _frozen(self.eigenvectors))

    @property
    def rank(self) -> int:
        return numerical_rank(self.eigenvalues)

    def truncated(self, k: int | None = None) -> "Spectrum":
        """Leading ``k`` modes (default: the numerical rank)."""
        k = self.rank if k is None else k
        return Spectrum(self.eigenvalues[:k], self.eigenvectors[:, :k])

    def normalized_eigenvalues(self) -> np.ndarray:
        ev = self.eigenvalues
        return ev / np.linalg.norm(ev)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class OverlapMatrix:
    """Inner products between two sets of empirical eigenvectors.

    ``entries[i, j]`` is the inner product of eigenvector i of the left kernel
    with eigenvector j of the right kernel. ``left_clusters`` and
    ``right_clusters`` list (start, stop) index ranges of near-degenerate
    eigenvalues, inside which individual eigenvectors are not unique.
    """

    entries: np.ndarray
    convention: str = ""
    left_clusters: tuple = field(default=())
    right_clusters: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(np.atleast_2d(self.entries)))
        if self.entries.size and np.max(np.abs(self.entries)) > 1.0 + 1e-8:
            raise ValidationError("overlap entries of orthonormal bases must lie in [-1, 1]")
