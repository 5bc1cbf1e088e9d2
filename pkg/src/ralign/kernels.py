"""Kernel evaluation, Gram assembly, centering and symmetric eigendecomposition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .core import GramMatrix, RepresentationSet, Spectrum, numerical_rank
from .errors import DegenerateData, NotSymmetric, ValidationError, ZeroRowNormalization

SPECTRUM_SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to evaluate.

    ``kind`` is ``"linear"``, ``"rbf"`` or ``"precomputed"``. RBF kernels use
    ``exp(-gamma * |x - x'|^2)``; ``gamma`` may be a positive float or the
    string ``"median"`` (resolved per dataset by :func:`median_heuristic_gamma`).
    For ``"precomputed"`` the representation's data matrix *is* the n x n kernel.
    """

    kind: str = "linear"
    gamma: float | str | None = None
    normalize_diagonal: bool = False

    def __post_init__(self):
        if self.kind not in ("linear", "rbf", "precomputed"):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf":
            g = "median" if self.gamma is None else self.gamma
            if isinstance(g, str):
                if g != "median":
                    raise ValidationError(f"bad gamma {g!r}")
            elif not (np.isfinite(g) and g > 0):
                raise ValidationError(f"gamma must be positive, got {g}")
            else:
                g = float(g)
            object.__setattr__(self, "gamma", g)

    @classmethod
    def parse(cls, text: str, normalize_diagonal: bool = False) -> "KernelSpec":
        """Parse ``linear``, ``rbf:<gamma>``, ``rbf:median`` or ``precomputed``."""
        head, _, arg = text.strip().partition(":")
        if head == "rbf":
            gamma = arg or "median"
            if gamma != "median":
                try:
                    gamma = float(gamma)
                except ValueError:
                    raise ValidationError(f"bad rbf gamma {arg!r}") from None
            return cls("rbf", gamma, normalize_diagonal)
        if arg:
            raise ValidationError(f"kernel {head!r} takes no argument")
        return cls(head, None, normalize_diagonal)

    def describe(self) -> str:
        if self.kind == "rbf":
            return f"rbf:{self.gamma}" + (",normalized" if self.normalize_diagonal else "")
        return self.kind + (",normalized" if self.normalize_diagonal else "")

    def resolved_gamma(self, f: RepresentationSet | np.ndarray) -> float:
        if self.gamma == "median":
            return median_heuristic_gamma(f)
        return float(self.gamma)


def _data(f) -> np.ndarray:
    return f.data if isinstance(f, RepresentationSet) else np.asarray(f, dtype=np.float64)


def _symmetrize(k: np.ndarray) -> np.ndarray:
    return 0.5 * (k + k.T)


def unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    if np.any(norms == 0):
        raise ZeroRowNormalization(f"row {int(np.argmin(norms))} is all zero")
    return x / norms[:, None]


def feature_matrix(f, spec: KernelSpec) -> np.ndarray:
    """Features as fed to a linear kernel (unit rows if normalization requested)."""
    x = _data(f)
    if spec.kind == "linear" and spec.normalize_diagonal:
        return unit_rows(x)
    return x


def gram(f: RepresentationSet | np.ndarray, spec: KernelSpec = KernelSpec()) -> GramMatrix:
    """Kernel matrix ``K[i, j] = k(f_i, f_j)``."""
    x = _data(f)
    if spec.kind == "precomputed":
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise ValidationError(f"precomputed kernel must be square, got {x.shape}")
        scale = float(np.max(np.abs(x)))
        if scale > 0 and float(np.max(np.abs(x - x.T))) > SPECTRUM_SYMMETRY_RTOL * scale:
            raise NotSymmetric("precomputed kernel is not symmetric")
        k = _symmetrize(x)
        if spec.normalize_diagonal:
            d = np.diag(k)
            if np.any(d <= 0):
                raise ZeroRowNormalization("precomputed kernel has a non-positive diagonal entry")
            s = 1.0 / np.sqrt(d)
            k = _symmetrize(k * s[:, None] * s[None, :])
            np.fill_diagonal(k, 1.0)
        g = GramMatrix(k)
        g.validate()
        return g
    if spec.kind == "linear":
        z = feature_matrix(x, spec)
        k = _accel.linear(z, z)
        if spec.normalize_diagonal:
            np.fill_diagonal(k, 1.0)
        return GramMatrix(k)
    gamma = spec.resolved_gamma(x)
    k = np.exp(-gamma * _accel.sqdist(x, x))
    np.fill_diagonal(k, 1.0)
    return GramMatrix(k)


def cross_gram(x, y, spec: KernelSpec = KernelSpec(), gamma: float | None = None) -> np.ndarray:
    """Rectangular kernel block ``k(x_i, y_j)`` for linear and RBF kernels."""
    x, y = _data(x), _data(y)
    if spec.kind == "precomputed":
        raise ValidationError("cross kernels are not defined for precomputed kernels")
    if spec.kind == "linear":
        if spec.normalize_diagonal:
            x, y = unit_rows(x), unit_rows(y)
        return _accel.linear(x, y)
    if gamma is None:
        gamma = spec.resolved_gamma(np.vstack([x, y]))
    return np.exp(-gamma * _accel.sqdist(x, y))


def center_matrix(k: np.ndarray) -> np.ndarray:
    """H K H with H = I - 11^T/n, for a plain array."""
    k = np.asarray(k, dtype=np.float64)
    col = k.mean(axis=0)
    row = k.mean(axis=1)
    out = k - col[None, :] - row[:, None] + k.mean()
    return _symmetrize(out)


def center(K: GramMatrix | np.ndarray) -> GramMatrix:
    """Double-centred copy of ``K`` (idempotent)."""
    if isinstance(K, GramMatrix):
        if K.centered:
            return K
        entries = K.entries
    else:
        entries = np.asarray(K, dtype=np.float64)
    return GramMatrix(center_matrix(entries), centered=True)


def _fix_signs(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def spectrum(K: GramMatrix | np.ndarray) -> Spectrum:
    """Eigendecomposition with descending, zero-clipped eigenvalues.

    Each eigenvector's largest-magnitude entry is made positive.
    """
    a = K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"need a square matrix, got shape {a.shape}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale > 0 and float(np.max(np.abs(a - a.T))) > SPECTRUM_SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix asymmetry exceeds tolerance")
    w, v = np.linalg.eigh(_symmetrize(a))
    w = w[::-1]
    v = v[:, ::-1]
    return Spectrum(np.clip(w, 0.0, None), _fix_signs(v))


def eigenvalue_clusters(eigenvalues: np.ndarray, rtol: float = 1e-8) -> tuple:
    """(start, stop) ranges of consecutive eigenvalues within ``rtol`` relative gap."""
    ev = np.asarray(eigenvalues)
    if ev.size == 0:
        return ()
    scale = max(float(ev[0]), np.finfo(float).tiny)
    out, start = [], 0
    for i in range(1, ev.size):
        if abs(ev[i - 1] - ev[i]) > rtol * scale:
            out.append((start, i))
            start = i
    out.append((start, ev.size))
    return tuple(out)


def median_heuristic_gamma(f: RepresentationSet | np.ndarray) -> float:
    """``1 / (2 * median squared distance)`` over distinct sample pairs."""
    x = _data(f)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise DegenerateData("need at least two samples")
    d2 = _accel.sqdist(x, x)
    iu = np.triu_indices(n, k=1)
    med = float(np.median(d2[iu]))
    if med <= 0.0:
        raise DegenerateData("median pairwise squared distance is zero")
    return 1.0 / (2.0 * med)


def rank(K: GramMatrix | np.ndarray) -> int:
    return numerical_rank(spectrum(K).eigenvalues)
