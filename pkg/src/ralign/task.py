"""Alignment between a kernel and a task: KTA, the Parzen-window bound, KARE,
cumulative power and the source-condition diagnostic."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GramMatrix, PairedDataset, RepresentationSet, Spectrum, numerical_rank
from .errors import DimensionMismatch, NonBinaryTargets, ValidationError, ZeroKernel, ZeroPower, ZeroTarget
from .kernels import KernelSpec, gram, spectrum
from .metrics import ka

# the bound's proof needs max_x E'[K(x,x')^2] / E[K^2] close to 1; beyond this
# ratio the bound is reported but flagged
PARZEN_RATIO_LIMIT = 2.0


def _entries(K) -> np.ndarray:
    return K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)


def _target_vector(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    if y.ndim != 1:
        raise DimensionMismatch(f"expected a target vector, got shape {y.shape}")
    if y.shape[0] != n:
        raise DimensionMismatch(f"target length {y.shape[0]} != n = {n}")
    return y


def kta(K, y) -> float:
    """Kernel-target alignment ``A(K, y y^T)``."""
    k = _entries(K)
    y = _target_vector(y, k.shape[0])
    if not np.any(y):
        raise ZeroTarget("target vector is zero")
    return ka(k, np.outer(y, y))


@dataclass(frozen=True)
class ParzenResult:
    risk: float
    risk_unnormalized_root: float
    bound: float
    kta: float
    normalization_ratio: float
    assumption_ok: bool

    @property
    def bound_holds(self) -> bool:
        return self.risk <= self.bound + 1e-12

    def to_dict(self) -> dict:
        return {
            "risk": self.risk,
            "risk_unnormalized_root": self.risk_unnormalized_root,
            "bound": self.bound,
            "kta": self.kta,
            "normalization_ratio": self.normalization_ratio,
            "assumption_ok": self.assumption_ok,
            "bound_holds": self.bound_holds,
        }


def parzen_risk_from_gram(K, y) -> ParzenResult:
    """Leave-one-out Parzen predictor risk next to the ``2 (1 - KTA)`` bound.

    The predictor is ``h(x_i) = mean_{j != i} K_ij y_j / N``. ``risk`` uses
    ``N = sqrt(E[K^2])``; ``risk_unnormalized_root`` uses ``N = E[K^2]``.
    Expectations over pairs exclude the diagonal.
    """
    k = _entries(K)
    n = k.shape[0]
    y = _target_vector(y, n)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise NonBinaryTargets("Parzen bound needs targets in {-1, +1}")
    off = ~np.eye(n, dtype=bool)
    k_off = np.where(off, k, 0.0)
    sq = k_off**2
    ek2 = sq.sum() / (n * (n - 1))
    if ek2 <= 0.0:
        raise ZeroKernel("kernel has no off-diagonal mass")
    mean_ky = (k_off @ y) / (n - 1)
    h_root = mean_ky / np.sqrt(ek2)
    h_plain = mean_ky / ek2
    ratio = float(sq.sum(axis=1).max() / (n - 1) / ek2)
    align = kta(k, y)
    return ParzenResult(
        risk=float(np.mean((h_root - y) ** 2)),
        risk_unnormalized_root=float(np.mean((h_plain - y) ** 2)),
        bound=2.0 * (1.0 - align),
        kta=align,
        normalization_ratio=ratio,
        assumption_ok=ratio <= PARZEN_RATIO_LIMIT,
    )


def parzen_predictor_risk(p: PairedDataset | RepresentationSet, spec: KernelSpec = KernelSpec("rbf"), y=None) -> ParzenResult:
    """Parzen risk/bound on the left representation of ``p`` (or on ``p`` with ``y``)."""
    if isinstance(p, PairedDataset):
        f = p.left
        y = p.target_matrix() if y is None else y
    else:
        f = p
    if y is None:
        raise ValidationError("targets are required")
    return parzen_risk_from_gram(gram(f, spec), y)


# --------------------------------------------------------------------- KARE


class KareEstimator:
    """KARE for one kernel, with a single eigendecomposition reused across lambdas."""

    def __init__(self, K, y):
        k = _entries(K)
        self.n = k.shape[0]
        yy = np.asarray(y, dtype=np.float64)
        if yy.ndim == 1:
            yy = yy[:, None]
        if yy.shape[0] != self.n:
            raise DimensionMismatch(f"target length {yy.shape[0]} != n = {self.n}")
        sp = spectrum(k)
        self.eigenvalues = sp.eigenvalues
        # squared projections of the targets, summed over output columns
        self.proj2 = ((sp.eigenvectors.T @ yy) ** 2).sum(axis=1)

    def __call__(self, lam: float) -> float:
        if not lam > 0:
            raise ValidationError("lambda must be positive")
        mu = self.eigenvalues / self.n + lam
        num = np.sum(self.proj2 / mu**2) / self.n
        den = (np.sum(1.0 / mu) / self.n) ** 2
        return float(num / den)

    def sweep(self, lambdas) -> list[tuple[float, float]]:
        return [(float(lam), self(lam)) for lam in lambdas]


def kare(K, y, lam: float) -> float:
    """Kernel alignment risk estimator at ridge ``lam``."""
    return KareEstimator(K, y)(lam)


# ----------------------------------------------------- spectral task profile


@dataclass(frozen=True)
class TaskSpectrumProfile:
    """Kernel eigenvalues ``eta`` and target coefficients ``w`` with h = sum w_i sqrt(eta_i) phi_i."""

    eta: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.float64)
        w = np.asarray(self.w, dtype=np.float64)
        if eta.shape != w.shape or eta.ndim != 1:
            raise DimensionMismatch("eta and w must be vectors of equal length")
        if np.any(eta < 0) or np.any(np.diff(eta) > 0):
            raise ValidationError("eta must be nonnegative and descending")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "w", w)

    @property
    def power(self) -> np.ndarray:
        return self.eta * self.w**2

    @classmethod
    def from_gram(cls, K, y) -> "TaskSpectrumProfile":
        """Empirical profile: eigenpairs of K/n, coefficients ``v_i^T y / sqrt(lambda_i)``.

        Eigenfunctions are normalised in the empirical L2 norm (``phi_i = sqrt(n) v_i``),
        so ``eta_i = lambda_i / n``. Zero modes are dropped.
        """
        k = _entries(K)
        n = k.shape[0]
        y = _target_vector(y, n)
        sp: Spectrum = spectrum(k)
        r = numerical_rank(sp.eigenvalues)
        lam = sp.eigenvalues[:r]
        w = (sp.eigenvectors[:, :r].T @ y) / np.sqrt(lam)
        return cls(lam / n, w)


def cumulative_power(profile: TaskSpectrumProfile) -> np.ndarray:
    """Fraction of target power captured by the leading 1..m modes."""
    p = profile.power
    total = p.sum()
    if not total > 0:
        raise ZeroPower("target has no power on the kernel eigenbasis")
    c = np.cumsum(p) / total
    c[-1] = 1.0
    return np.clip(c, 0.0, 1.0)


@dataclass(frozen=True)
class SourceConditionResult:
    partial_sum: float
    divergent: bool
    tail_slope: float | None
    terms: int

    def to_dict(self) -> dict:
        return {
            "partial_sum": self.partial_sum,
            "divergent": self.divergent,
            "tail_slope": self.tail_slope,
            "terms": self.terms,
        }


def source_condition_diagnostic(profile: TaskSpectrumProfile, r: float, min_tail: int = 8) -> SourceConditionResult:
    """Partial sum of ``eta_i^(1-2r) w_i^2`` plus a divergence heuristic.

    The series is flagged divergent when the log-log slope of its terms over
    the last half of the available modes is at least -1 (terms decaying no
    faster than a harmonic series). Fewer than ``min_tail`` tail terms: no flag.
    """
    if not r > 0:
        raise ValidationError("r must be positive")
    eta, w = profile.eta, profile.w
    keep = eta > 0
    idx = np.nonzero(keep)[0]
    terms = eta[keep] ** (1.0 - 2.0 * r) * w[keep] ** 2
    total = float(np.sum(terms))
    tail = slice(len(terms) // 2, len(terms))
    t_idx, t_val = idx[tail] + 1.0, terms[tail]
    pos = t_val > 0
    slope = None
    divergent = False
    if np.count_nonzero(pos) >= min_tail:
        slope = float(np.polyfit(np.log(t_idx[pos]), np.log(t_val[pos]), 1)[0])
        divergent = slope >= -1.0
    return SourceConditionResult(total, divergent, slope, int(len(terms)))
