"""Pairwise representation-alignment metrics.

Estimator conventions:

* KA/CKA are ratios, so they carry no sample-size normalisation.
* HSIC is the biased (V-statistic) estimator ``<HK1H, HK2H>_F / (n-1)^2``.
* COCO uses ``(1/n) sqrt(lambda_max)`` of the centred kernel product.
* Gaussian MI / W2 estimate covariances with ``1/n`` after demeaning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .core import (
    RANK_RTOL,
    GramMatrix,
    OverlapMatrix,
    PairedDataset,
    RepresentationSet,
    Spectrum,
)
from .errors import (
    DimensionMismatch,
    EmptySpectrum,
    MismatchedSampleCount,
    SingularCovariance,
    SingularSystem,
    SpectralRadiusExceeded,
    ValidationError,
    ZeroKernel,
)
from .kernels import KernelSpec, center_matrix, cross_gram, eigenvalue_clusters, gram, spectrum

# a centred kernel whose Frobenius norm is below this fraction of the raw
# kernel's norm is treated as identically zero
ZERO_KERNEL_RTOL = 1e-12


def _entries(K) -> np.ndarray:
    if isinstance(K, GramMatrix):
        return K.entries
    return np.asarray(K, dtype=np.float64)


def _same_n(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"kernel shapes differ: {a.shape} vs {b.shape}")


def _centered(K, check_against=None) -> np.ndarray:
    """Centred entries; raises ZeroKernel when centring annihilates the kernel."""
    if isinstance(K, GramMatrix) and K.centered:
        return K.entries
    raw = _entries(K)
    kc = center_matrix(raw)
    raw_norm = np.linalg.norm(raw)
    if check_against is not None and np.linalg.norm(kc) <= ZERO_KERNEL_RTOL * raw_norm:
        raise ZeroKernel(check_against)
    return kc


def _centered_or_zero(K) -> np.ndarray:
    """Centred entries, with numerically vanishing results snapped to exact zero."""
    raw = _entries(K)
    if isinstance(K, GramMatrix) and K.centered:
        return raw
    kc = center_matrix(raw)
    if np.linalg.norm(kc) <= ZERO_KERNEL_RTOL * np.linalg.norm(raw):
        return np.zeros_like(kc)
    return kc


# ------------------------------------------------------------------ KA family


def ka(K1, K2) -> float:
    """Kernel alignment: cosine similarity of two Gram matrices."""
    a, b = _entries(K1), _entries(K2)
    _same_n(a, b)
    n1, n2 = np.linalg.norm(a), np.linalg.norm(b)
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroKernel("kernel alignment is undefined for a zero kernel")
    value = float(np.vdot(a, b) / (n1 * n2))
    return min(max(value, 0.0), 1.0)


def cka(K1, K2) -> float:
    """Centred kernel alignment."""
    a = _centered(K1, "left kernel vanishes after centring")
    b = _centered(K2, "right kernel vanishes after centring")
    _same_n(a, b)
    return ka(a, b)


def cross_covariance(p: PairedDataset, centered: bool = False):
    """(Sigma_12, Sigma_11, Sigma_22) second-moment matrices with 1/n scaling."""
    x, y = p.left.data, p.right.data
    if centered:
        x = x - x.mean(axis=0)
        y = y - y.mean(axis=0)
    n = x.shape[0]
    return x.T @ y / n, x.T @ x / n, y.T @ y / n


def ka_feature_form(p: PairedDataset, centered: bool = False) -> float:
    """KA of linear kernels computed from d x d moment matrices.

    With ``centered=True`` the columns are demeaned first, which gives linear CKA.
    """
    s12, s11, s22 = cross_covariance(p, centered)
    d1, d2 = np.linalg.norm(s11), np.linalg.norm(s22)
    if d1 <= 0.0 or d2 <= 0.0:
        raise ZeroKernel("a feature set has zero second moment")
    if centered:
        raw1 = np.linalg.norm(p.left.data.T @ p.left.data) / p.n
        raw2 = np.linalg.norm(p.right.data.T @ p.right.data) / p.n
        if d1 <= ZERO_KERNEL_RTOL * raw1 or d2 <= ZERO_KERNEL_RTOL * raw2:
            raise ZeroKernel("a feature set is constant")
    value = float(np.linalg.norm(s12) ** 2 / (d1 * d2))
    return min(max(value, 0.0), 1.0)


def spectral_ka(s1: Spectrum, s2: Spectrum, C: OverlapMatrix | np.ndarray) -> float:
    """``<eta1_hat, (C*C) eta2_hat>`` with unit-norm eigenvalue vectors.

    Eigenvalue vectors are truncated to the shape of ``C``.
    """
    c = C.entries if isinstance(C, OverlapMatrix) else np.atleast_2d(np.asarray(C, dtype=np.float64))
    r1, r2 = c.shape
    e1 = np.asarray(s1.eigenvalues if isinstance(s1, Spectrum) else s1, dtype=np.float64)[:r1]
    e2 = np.asarray(s2.eigenvalues if isinstance(s2, Spectrum) else s2, dtype=np.float64)[:r2]
    if e1.size < r1 or e2.size < r2:
        raise DimensionMismatch("overlap matrix larger than the supplied spectra")
    n1, n2 = np.linalg.norm(e1), np.linalg.norm(e2)
    if e1.size == 0 or e2.size == 0 or n1 == 0.0 or n2 == 0.0:
        raise EmptySpectrum("spectral alignment needs a nonzero spectrum on both sides")
    return float((e1 / n1) @ (c * c) @ (e2 / n2))


def overlap_matrix(
    f1,
    f2=None,
    spec1: KernelSpec = KernelSpec(),
    spec2: KernelSpec = KernelSpec(),
    centered: bool = True,
) -> tuple[Spectrum, Spectrum, OverlapMatrix]:
    """Spectra of both (centred) Gram matrices and their eigenvector overlaps.

    Spectra are truncated to their numerical ranks; ``C`` is rank1 x rank2.
    ``f1`` may be a :class:`PairedDataset`, in which case ``f2`` is omitted.
    """
    if isinstance(f1, PairedDataset):
        f1, f2 = f1.left, f1.right
    if f1.sample_count != f2.sample_count:
        raise MismatchedSampleCount("overlap needs paired samples")
    k1, k2 = gram(f1, spec1).entries, gram(f2, spec2).entries
    if centered:
        k1, k2 = center_matrix(k1), center_matrix(k2)
    sp1, sp2 = spectrum(k1).truncated(), spectrum(k2).truncated()
    if sp1.eigenvalues.size == 0 or sp2.eigenvalues.size == 0:
        raise EmptySpectrum("a kernel has no nonzero eigenvalues")
    c = sp1.eigenvectors.T @ sp2.eigenvectors
    note = "centred Gram eigenvectors" if centered else "raw Gram eigenvectors"
    om = OverlapMatrix(
        c,
        convention=note + f"; left rank {c.shape[0]}, right rank {c.shape[1]}",
        left_clusters=eigenvalue_clusters(sp1.eigenvalues),
        right_clusters=eigenvalue_clusters(sp2.eigenvalues),
    )
    return sp1, sp2, om


def cluster_overlap(C: OverlapMatrix) -> np.ndarray:
    """Squared overlap mass between eigenvalue clusters (basis-free within clusters)."""
    c2 = C.entries ** 2
    lc = C.left_clusters or tuple((i, i + 1) for i in range(c2.shape[0]))
    rc = C.right_clusters or tuple((j, j + 1) for j in range(c2.shape[1]))
    out = np.empty((len(lc), len(rc)))
    for a, (i0, i1) in enumerate(lc):
        for b, (j0, j1) in enumerate(rc):
            out[a, b] = c2[i0:i1, j0:j1].sum()
    return out


# ------------------------------------------------------------ distance family


def distance_alignment(p: PairedDataset) -> float:
    """Mean over all ordered pairs of the squared gap between squared distances."""
    n = p.n
    return _accel.distance_alignment_sum(p.left.data, p.right.data) / (n * n)


def distance_alignment_via_ka(K1, K2) -> dict:
    """Distance alignment predicted from kernel alignment for unit-norm features.

    ``exact`` is ``4 (c1^2 + c2^2 - 2 c1 c2 A)`` with ``c_q = |K_q|_F / n``;
    ``squared_norm`` (``8 c^2 (1 - A)``) and ``linear_norm`` (``8 c (1 - A)``)
    use ``c = sqrt(c1 c2)`` and coincide with ``exact`` only when c1 == c2
    (the first) or additionally c == 1 (the second).
    """
    a, b = _entries(K1), _entries(K2)
    n = a.shape[0]
    c1, c2 = np.linalg.norm(a) / n, np.linalg.norm(b) / n
    align = ka(a, b)
    c = math.sqrt(c1 * c2)
    return {
        "exact": float(4.0 * (c1 * c1 + c2 * c2 - 2.0 * c1 * c2 * align)),
        "squared_norm": float(8.0 * c * c * (1.0 - align)),
        "linear_norm": float(8.0 * c * (1.0 - align)),
        "ka": align,
        "norm": c,
    }


# ------------------------------------------------------ independence criteria


def hsic(K1, K2) -> float:
    """Biased HSIC estimate ``<HK1H, HK2H>_F / (n-1)^2``."""
    a, b = _centered_or_zero(K1), _centered_or_zero(K2)
    _same_n(a, b)
    n = a.shape[0]
    return float(np.vdot(a, b)) / (n - 1) ** 2


def hsic_unbiased(K1, K2) -> float:
    """Unbiased HSIC U-statistic on the uncentred Grams with zeroed diagonals (n >= 4)."""
    a, b = _entries(K1).copy(), _entries(K2).copy()
    _same_n(a, b)
    n = a.shape[0]
    if n < 4:
        raise ValidationError("unbiased HSIC needs at least 4 samples")
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(b, 0.0)
    ra, rb = a.sum(axis=1), b.sum(axis=1)
    value = np.vdot(a, b) + ra.sum() * rb.sum() / ((n - 1) * (n - 2)) - 2.0 * (ra @ rb) / (n - 2)
    return float(value / (n * (n - 3)))


def _product_eigenvalues(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``a @ b`` for PSD ``a``, ``b`` via ``a^1/2 b a^1/2``."""
    sa = spectrum(a)
    r = sa.rank
    if r == 0:
        return np.zeros(1)
    v = sa.eigenvectors[:, :r]
    root = np.sqrt(sa.eigenvalues[:r])
    m = (v.T @ b @ v) * root[:, None] * root[None, :]
    return np.clip(np.linalg.eigvalsh(0.5 * (m + m.T))[::-1], 0.0, None)


def coco(K1, K2) -> float:
    """Constrained covariance: ``(1/n) sqrt(lambda_max(HK1H HK2H))``."""
    a, b = _centered_or_zero(K1), _centered_or_zero(K2)
    _same_n(a, b)
    n = a.shape[0]
    if not a.any() or not b.any():
        return 0.0
    return math.sqrt(float(_product_eigenvalues(a, b)[0])) / n


def kcc(
    p: PairedDataset,
    kappa: float = 1e-3,
    spec1: KernelSpec = KernelSpec(),
    spec2: KernelSpec = KernelSpec(),
) -> float:
    """Regularised kernel canonical correlation.

    Maximises ``cov(h1, h2) / sqrt((var h1 + kappa |h1|^2)(var h2 + kappa |h2|^2))``
    over h_q in the span of the centred kernel sections; with centred Gram
    eigenpairs (l, v) this is ``(1/n) sigma_max(D1 V1^T V2 D2)`` where
    ``D = diag(sqrt(l / (l/n + kappa)))``.
    """
    if not kappa > 0:
        raise ValidationError("kappa must be positive")
    n = p.n
    parts = []
    for f, spec in ((p.left, spec1), (p.right, spec2)):
        kc = _centered_or_zero(gram(f, spec))
        sp = spectrum(kc)
        r = sp.rank
        if r == 0:
            return 0.0
        lam = sp.eigenvalues[:r]
        if kappa * n < np.finfo(float).eps * lam[0]:
            raise SingularSystem(f"kappa={kappa} is below the numerical resolution of the kernel")
        d = np.sqrt(lam / (lam / n + kappa))
        parts.append(sp.eigenvectors[:, :r] * d[None, :])
    m = parts[0].T @ parts[1]
    value = float(np.linalg.norm(m, 2)) / n
    return min(value, 1.0)


def kmi(K1, K2, kappa1: float | None = None, kappa2: float | None = None) -> float:
    """Kernel mutual information ``-1/2 log det(I - kappa1 kappa2 HK1H HK2H)``.

    Both scalings default to ``1/n``.
    """
    a, b = _centered_or_zero(K1), _centered_or_zero(K2)
    _same_n(a, b)
    n = a.shape[0]
    k1 = 1.0 / n if kappa1 is None else float(kappa1)
    k2 = 1.0 / n if kappa2 is None else float(kappa2)
    if not a.any() or not b.any():
        return 0.0
    sigma = k1 * k2 * _product_eigenvalues(a, b)
    if sigma[0] >= 1.0:
        raise SpectralRadiusExceeded(f"spectral radius {sigma[0]:.6g} >= 1")
    return max(0.0, float(-0.5 * np.sum(np.log1p(-sigma))))


# ---------------------------------------------------------------- measure family


def mmd2(x1, x2, spec: KernelSpec = KernelSpec(), unbiased: bool = False) -> float:
    """Squared maximum mean discrepancy between two samples in the same space.

    Biased V-statistic by default; ``unbiased=True`` drops the diagonal of the
    within-sample blocks (needs at least two points per sample).
    """
    a = x1.data if isinstance(x1, RepresentationSet) else np.atleast_2d(np.asarray(x1, dtype=np.float64))
    b = x2.data if isinstance(x2, RepresentationSet) else np.atleast_2d(np.asarray(x2, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"sample dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    gamma = spec.resolved_gamma(np.vstack([a, b])) if spec.kind == "rbf" else None
    kaa = cross_gram(a, a, spec, gamma)
    kbb = cross_gram(b, b, spec, gamma)
    kab = cross_gram(a, b, spec, gamma)
    m, n = a.shape[0], b.shape[0]
    if not unbiased:
        return float(kaa.mean() + kbb.mean() - 2.0 * kab.mean())
    if m < 2 or n < 2:
        raise ValidationError("unbiased MMD needs at least two points per sample")
    saa = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    sbb = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    return float(saa + sbb - 2.0 * kab.mean())


def mmd2_independence_from_grams(K1, K2) -> float:
    """MMD^2 between the joint sample and the product of its marginals.

    Uses the product kernel ``k1 * k2``; the product-of-marginals sample is all
    n^2 pairings. Rescaled by ``n^2/(n-1)^2`` to share the HSIC convention.
    """
    a, b = _entries(K1), _entries(K2)
    _same_n(a, b)
    n = a.shape[0]
    joint = np.vdot(a, b) / n**2
    product = a.mean() * b.mean()
    mixed = (a.sum(axis=1) @ b.sum(axis=1)) / n**3
    return float((joint + product - 2.0 * mixed) * n**2 / (n - 1) ** 2)


def mmd2_independence(p: PairedDataset, spec1: KernelSpec = KernelSpec(), spec2: KernelSpec = KernelSpec()) -> float:
    return mmd2_independence_from_grams(gram(p.left, spec1), gram(p.right, spec2))


def _inv_sqrt(cov: np.ndarray, ridge: float) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    if ridge == 0.0 and (w[-1] <= 0 or w[0] <= RANK_RTOL * w[-1]):
        raise SingularCovariance("covariance is rank deficient; use a positive ridge")
    w = w + ridge
    if w[0] <= 0:
        raise SingularCovariance("covariance is not positive definite")
    return (v / np.sqrt(w)) @ v.T


def canonical_correlations(p: PairedDataset, ridge: float | None = None) -> np.ndarray:
    """Singular values of the whitened cross-covariance (descending).

    Default ridge per side is ``1e-8 * trace / d``.
    """
    s12, s11, s22 = cross_covariance(p, centered=True)
    r1 = 1e-8 * np.trace(s11) / s11.shape[0] if ridge is None else float(ridge)
    r2 = 1e-8 * np.trace(s22) / s22.shape[0] if ridge is None else float(ridge)
    if r1 < 0 or r2 < 0:
        raise ValidationError("ridge must be nonnegative")
    if np.trace(s11) <= 0 or np.trace(s22) <= 0:
        raise SingularCovariance("a side has zero variance")
    w = _inv_sqrt(s11, r1) @ s12 @ _inv_sqrt(s22, r2)
    return np.linalg.svd(w, compute_uv=False)


def _check_rho(rho: np.ndarray) -> np.ndarray:
    rho = np.clip(np.asarray(rho, dtype=np.float64), 0.0, None)
    if np.any(1.0 - rho**2 < 1e-12):
        raise SingularCovariance("a canonical correlation is numerically 1; the measure diverges")
    return rho


def gaussian_mi_from_correlations(rho) -> float:
    rho = _check_rho(rho)
    return max(0.0, float(-0.5 * np.sum(np.log1p(-(rho**2)))))


def gaussian_w2_from_correlations(rho) -> float:
    rho = np.clip(np.asarray(rho, dtype=np.float64), 0.0, 1.0)
    return float(2.0 * np.sum(1.0 - np.sqrt(1.0 - rho**2)))


def gaussian_mi(p: PairedDataset, ridge: float | None = None) -> float:
    """Mutual information of the Gaussian fitted to the paired data."""
    return gaussian_mi_from_correlations(canonical_correlations(p, ridge))


def gaussian_w2_independence(p: PairedDataset, ridge: float | None = None) -> float:
    """Squared W2 distance between the whitened joint Gaussian and its product of marginals."""
    return gaussian_w2_from_correlations(canonical_correlations(p, ridge))


# ---------------------------------------------------------------- reporting

KA_LIKE = ("ka", "cka", "spectral_ka", "ka_feature_form", "kcc")
METRIC_NAMES = (
    "ka",
    "cka",
    "hsic",
    "coco",
    "kcc",
    "kmi",
    "mmd2_independence",
    "gaussian_mi",
    "gaussian_w2",
    "distance_alignment",
    "spectral_ka",
)


@dataclass
class AlignmentReport:
    """Named metric values plus the estimator conventions that produced them."""

    metrics: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=dict)
    n: int = 0
    kernels: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name, value in self.metrics.items():
            if not np.all(np.isfinite(value)):
                raise ValidationError(f"metric {name} is not finite")
            if name in KA_LIKE and not (-1e-12 <= value <= 1 + 1e-8):
                raise ValidationError(f"metric {name}={value} outside [0, 1]")

    def to_dict(self) -> dict:
        self.validate()
        return {
            "kind": "alignment",
            "metrics": dict(self.metrics),
            "conventions": dict(self.conventions),
            "n": int(self.n),
            "kernels": dict(self.kernels),
            "extras": dict(self.extras),
        }


def align(
    p: PairedDataset,
    metrics=METRIC_NAMES,
    spec1: KernelSpec = KernelSpec(),
    spec2: KernelSpec | None = None,
    kappa: float = 1e-3,
    ridge: float | None = None,
    centered: bool = False,
    unbiased: bool = False,
) -> AlignmentReport:
    """Compute a set of metrics on one paired dataset.

    ``centered`` makes ``ka`` use centred Grams; ``unbiased`` swaps HSIC for
    its U-statistic.
    """
    spec2 = spec1 if spec2 is None else spec2
    metrics = tuple(metrics)
    unknown = set(metrics) - set(METRIC_NAMES)
    if unknown:
        raise ValidationError(f"unknown metrics: {sorted(unknown)}")
    k1, k2 = gram(p.left, spec1), gram(p.right, spec2)
    out, extras = {}, {}
    for name in metrics:
        if name == "ka":
            out[name] = cka(k1, k2) if centered else ka(k1, k2)
        elif name == "cka":
            out[name] = cka(k1, k2)
        elif name == "hsic":
            out[name] = hsic_unbiased(k1, k2) if unbiased else hsic(k1, k2)
        elif name == "coco":
            out[name] = coco(k1, k2)
        elif name == "kcc":
            out[name] = kcc(p, kappa, spec1, spec2)
        elif name == "kmi":
            out[name] = kmi(k1, k2)
        elif name == "mmd2_independence":
            out[name] = mmd2_independence_from_grams(k1, k2)
        elif name == "gaussian_mi":
            out[name] = gaussian_mi(p, ridge)
        elif name == "gaussian_w2":
            out[name] = gaussian_w2_independence(p, ridge)
        elif name == "distance_alignment":
            out[name] = distance_alignment(p)
            extras["distance_alignment_via_ka"] = distance_alignment_via_ka(k1, k2)
        elif name == "spectral_ka":
            s1, s2 = spectrum(center_matrix(k1.entries)), spectrum(center_matrix(k2.entries))
            s1, s2 = s1.truncated(), s2.truncated()
            if s1.eigenvalues.size == 0 or s2.eigenvalues.size == 0:
                raise EmptySpectrum("a centred kernel has no nonzero eigenvalues")
            c = s1.eigenvectors.T @ s2.eigenvectors
            out[name] = spectral_ka(s1, s2, c)
            extras["overlap_ranks"] = [int(c.shape[0]), int(c.shape[1])]
    conventions = {
        "centered": {"ka": bool(centered), "cka": True, "spectral_ka": True, "hsic": True},
        "hsic_normalization": "1/(n(n-3)) (unbiased U-statistic)" if unbiased else "1/(n-1)^2 (biased V-statistic)",
        "mmd2_independence": "V-statistic, rescaled to the HSIC convention",
        "coco_normalization": "1/n",
        "kcc_kappa": kappa,
        "kmi_kappa": "1/n",
        "gaussian_ridge": "1e-8*trace/d" if ridge is None else ridge,
        "covariance_normalization": "1/n",
        "distance_alignment": "V-statistic over all ordered pairs",
    }
    return AlignmentReport(
        metrics=out,
        conventions=conventions,
        n=p.n,
        kernels={"left": spec1.describe(), "right": spec2.describe()},
        extras=extras,
    )
