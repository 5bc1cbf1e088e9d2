"""Paired Gaussian representations with prescribed spectra and overlap.

A shared standard Gaussian ``phi`` in R^D is read through two frames
``U1`` (D x d1) and ``U2`` (D x d2) with orthonormal columns and
``U1^T U2 = C``, then scaled: ``f_q = diag(eta_q)^1/2 U_q^T phi``. Hence
``E[f_q f_q^T] = diag(eta_q)`` and ``E[f1 f2^T] = diag(eta1)^1/2 C diag(eta2)^1/2``
exactly, and every population quantity below is closed form.

Random numbers come from numpy's PCG64 bit generator seeded with the
spec's 64-bit seed; Gaussians use numpy's ziggurat ``standard_normal``.
Target noise draws from an independent PCG64 stream seeded with
``SeedSequence([seed, 1])``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import PairedDataset, RepresentationSet
from .errors import AmbientTooSmall, DimensionMismatch, UnrealizableOverlap, ValidationError
from .metrics import gaussian_mi_from_correlations, gaussian_w2_from_correlations
from .stitching import HeadFunction, theorem2_rhs

OVERLAP_OP_TOL = 1e-10


@dataclass(frozen=True)
class SyntheticSpec:
    ambient_dim: int
    eta1: np.ndarray
    eta2: np.ndarray
    C: np.ndarray
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        eta1 = np.atleast_1d(np.asarray(self.eta1, dtype=np.float64))
        eta2 = np.atleast_1d(np.asarray(self.eta2, dtype=np.float64))
        C = np.asarray(self.C, dtype=np.float64).reshape(eta1.size, eta2.size) if np.size(self.C) == eta1.size * eta2.size else None
        if C is None:
            raise DimensionMismatch(f"overlap must be {eta1.size} x {eta2.size}")
        if np.any(eta1 <= 0) or np.any(eta2 <= 0) or not np.all(np.isfinite(eta1)) or not np.all(np.isfinite(eta2)):
            raise ValidationError("spectra must be positive and finite")
        if not np.all(np.isfinite(C)):
            raise ValidationError("overlap must be finite")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.noise_level < 0:
            raise ValidationError("noise_level must be nonnegative")
        opnorm = float(np.linalg.norm(C, 2)) if C.size else 0.0
        if opnorm > 1.0 + OVERLAP_OP_TOL:
            raise UnrealizableOverlap(f"overlap operator norm {opnorm:.6g} > 1")
        D = int(self.ambient_dim)
        needed = eta1.size + _complement_rank(C)
        if D < max(eta1.size, eta2.size) or D < needed:
            raise AmbientTooSmall(f"ambient_dim={D} but the frames need at least {needed}")
        for name, val in (("eta1", eta1), ("eta2", eta2), ("C", C)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "ambient_dim", D)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "noise_level", float(self.noise_level))

    @property
    def d1(self) -> int:
        return self.eta1.size

    @property
    def d2(self) -> int:
        return self.eta2.size

    def to_dict(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "eta1": self.eta1.tolist(),
            "eta2": self.eta2.tolist(),
            "C": self.C.tolist(),
            "noise_level": self.noise_level,
            "seed": self.seed,
        }

    def with_seed(self, seed: int) -> "SyntheticSpec":
        return SyntheticSpec(self.ambient_dim, self.eta1, self.eta2, self.C, self.noise_level, seed)


def _complement(C: np.ndarray) -> np.ndarray:
    """B with ``B^T B = I - C^T C`` and one row per nonzero eigenvalue."""
    w, q = np.linalg.eigh(np.eye(C.shape[1]) - C.T @ C)
    keep = w > OVERLAP_OP_TOL
    return (q[:, keep] * np.sqrt(w[keep])).T


def _complement_rank(C: np.ndarray) -> int:
    return _complement(C).shape[0]


def frames(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal-column frames U1, U2 in R^D with ``U1^T U2 = C``."""
    D, d1, d2 = spec.ambient_dim, spec.d1, spec.d2
    U1 = np.zeros((D, d1))
    U1[:d1, :d1] = np.eye(d1)
    B = _complement(spec.C)
    U2 = np.zeros((D, d2))
    U2[:d1] = spec.C
    U2[d1 : d1 + B.shape[0]] = B
    return U1, U2


@dataclass(frozen=True)
class OracleValues:
    """Population values for linear kernels, in closed form from (eta1, eta2, C)."""

    ka: float
    cka: float
    hsic: float
    coco: float
    gaussian_mi: float
    gaussian_w2: float
    a_tilde: float
    canonical_correlations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reference_risk: float | None = None

    def theorem2_bound(self, kappa: float, reference_risk: float | None = None) -> float:
        r = self.reference_risk if reference_risk is None else reference_risk
        if r is None:
            raise ValidationError("no reference risk available")
        return theorem2_rhs(r, self.a_tilde, kappa)

    def to_dict(self) -> dict:
        return {
            "ka": self.ka,
            "cka": self.cka,
            "hsic": self.hsic,
            "coco": self.coco,
            "gaussian_mi": self.gaussian_mi,
            "gaussian_w2": self.gaussian_w2,
            "a_tilde": self.a_tilde,
            "canonical_correlations": self.canonical_correlations.tolist(),
            "reference_risk": self.reference_risk,
        }


def oracles(spec: SyntheticSpec, reference_risk: float | None = None) -> OracleValues:
    e1, e2, C = spec.eta1, spec.eta2, spec.C
    c2 = C * C
    cross = float(e1 @ c2 @ e2)  # |Sigma_12|_F^2
    align = float(cross / (np.linalg.norm(e1) * np.linalg.norm(e2)))
    sigma12 = np.sqrt(e1)[:, None] * C * np.sqrt(e2)[None, :]
    rho = np.linalg.svd(C, compute_uv=False) if C.size else np.zeros(0)
    rho = np.clip(rho, 0.0, 1.0)
    if np.any(1.0 - rho**2 < 1e-12):
        mi = math.inf
    else:
        mi = gaussian_mi_from_correlations(rho)
    return OracleValues(
        ka=align,
        cka=align,  # features are mean zero, so centring leaves the population kernels unchanged
        hsic=cross,
        coco=float(np.linalg.norm(sigma12, 2)),
        gaussian_mi=mi,
        gaussian_w2=float(gaussian_w2_from_correlations(rho)),
        a_tilde=float(np.sum(e2) - np.sum(c2 * e2[None, :])),
        canonical_correlations=rho,
        reference_risk=reference_risk,
    )


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    if stream == 0:
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def sample_features(spec: SyntheticSpec, n: int, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ValidationError("n must be at least 2")
    rng = _rng(spec.seed) if rng is None else rng
    U1, U2 = frames(spec)
    phi = rng.standard_normal((n, spec.ambient_dim))
    return (phi @ U1) * np.sqrt(spec.eta1), (phi @ U2) * np.sqrt(spec.eta2)


def generate(spec: SyntheticSpec, n: int) -> tuple[PairedDataset, OracleValues]:
    """n i.i.d. paired samples and the population oracles."""
    f1, f2 = sample_features(spec, n)
    p = PairedDataset(RepresentationSet(f1, "left"), RepresentationSet(f2, "right"))
    return p, oracles(spec)


def generate_task(
    spec: SyntheticSpec, head: HeadFunction, n: int, noise: float | None = None
) -> tuple[PairedDataset, OracleValues]:
    """Paired samples with targets ``head(f2) + noise * N(0, I)``.

    The oracle reference risk of ``head o f2`` is ``noise^2 * t``.
    """
    if head.input_dim != spec.d2:
        raise DimensionMismatch(f"head expects dim {head.input_dim}, right features have dim {spec.d2}")
    noise = spec.noise_level if noise is None else float(noise)
    if noise < 0:
        raise ValidationError("noise must be nonnegative")
    f1, f2 = sample_features(spec, n)
    t = head.output_dim
    y = head(f2) + noise * _rng(spec.seed, 1).standard_normal((n, t))
    p = PairedDataset(RepresentationSet(f1, "left"), RepresentationSet(f2, "right"), y)
    return p, oracles(spec, reference_risk=noise * noise * t)


def random_spec(
    rng: np.random.Generator,
    d1: int,
    d2: int,
    ambient_dim: int | None = None,
    max_correlation: float = 0.95,
    seed: int | None = None,
    decay: tuple[float, float] = (0.3, 2.0),
) -> SyntheticSpec:
    """Random power-law spectra and a random contraction as overlap."""
    e1 = np.arange(1, d1 + 1) ** -rng.uniform(*decay)
    e2 = np.arange(1, d2 + 1) ** -rng.uniform(*decay)
    a = rng.standard_normal((d1, d1))
    b = rng.standard_normal((d2, d2))
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    k = min(d1, d2)
    s = rng.uniform(0.0, max_correlation, size=k)
    C = qa[:, :k] @ np.diag(s) @ qb[:, :k].T
    D = ambient_dim if ambient_dim is not None else d1 + d2
    seed = int(rng.integers(0, 2**63)) if seed is None else seed
    return SyntheticSpec(D, e1, e2, C, 0.0, seed)
