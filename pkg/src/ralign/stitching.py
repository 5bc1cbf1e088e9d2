"""Linear stitching between representations and numerical checks of the
stitching-risk bounds.

Conventions
-----------
Risks are mean squared errors ``mean_i |prediction_i - y_i|^2`` (summed over
output coordinates). By default each check splits the data 50/50 with a
seeded permutation: stitchers are fitted on the first half and every risk,
residual and class minimum is evaluated on the second half. Class minima
(the best linear head on a representation, the best stitcher for a fixed
linear head) are always minimised on the evaluation sample itself, because
they are properties of the evaluation measure. Pass ``fit_fraction=None``
to use one sample for everything.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import RANK_RTOL, PairedDataset, numerical_rank
from .errors import (
    BoundViolation,
    ContainmentNotEstablished,
    DimensionMismatch,
    RankDeficientHead,
    UncertifiedLipschitz,
    ValidationError,
)

RELATIVE_SLACK = 1e-8


# --------------------------------------------------------------------- heads


@dataclass(frozen=True)
class HeadFunction:
    """A map from representation space to outputs, with a Lipschitz certificate.

    Build with :meth:`linear`, :meth:`tanh_linear`, :meth:`constant` or
    :meth:`black_box`. ``weight`` is only set for linear heads.
    """

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]
    input_dim: int
    output_dim: int
    kappa: float | None
    weight: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @classmethod
    def linear(cls, W) -> "HeadFunction":
        W = np.atleast_2d(np.asarray(W, dtype=np.float64))
        W.setflags(write=False)
        return cls("linear", lambda z: z @ W.T, W.shape[1], W.shape[0], float(np.linalg.norm(W, 2)), W)

    @classmethod
    def tanh_linear(cls, V, bias=None, out=None) -> "HeadFunction":
        """``z -> out @ tanh(V z + bias)``; kappa = |out|_2 |V|_2 since tanh is 1-Lipschitz."""
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        b = np.zeros(V.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64).reshape(-1)
        if b.shape[0] != V.shape[0]:
            raise DimensionMismatch("bias length must match the rows of V")
        O = np.eye(V.shape[0]) if out is None else np.atleast_2d(np.asarray(out, dtype=np.float64))
        if O.shape[1] != V.shape[0]:
            raise DimensionMismatch("output weight must have one column per hidden unit")
        kappa = float(np.linalg.norm(O, 2) * np.linalg.norm(V, 2))
        params = {"V": V, "bias": b, "out": O}
        return cls("tanh_linear", lambda z: np.tanh(z @ V.T + b) @ O.T, V.shape[1], O.shape[0], kappa, None, params)

    @classmethod
    def constant(cls, c, input_dim: int) -> "HeadFunction":
        c = np.atleast_1d(np.asarray(c, dtype=np.float64))
        return cls("constant", lambda z: np.broadcast_to(c, (z.shape[0], c.shape[0])).copy(), input_dim, c.shape[0], 0.0)

    @classmethod
    def black_box(cls, fn, input_dim: int, output_dim: int, kappa: float | None = None) -> "HeadFunction":
        return cls("black_box", fn, input_dim, output_dim, None if kappa is None else float(kappa))

    def __call__(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[1] != self.input_dim:
            raise DimensionMismatch(f"head expects inputs of dim {self.input_dim}, got {z.shape[1]}")
        out = np.asarray(self.fn(z), dtype=np.float64)
        return out.reshape(z.shape[0], self.output_dim)

    def then_linear(self, A) -> "HeadFunction":
        """The head precomposed with a linear map: ``z -> self(A z)``."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if A.shape[0] != self.input_dim:
            raise DimensionMismatch("precomposed map has the wrong output dimension")
        if self.kind == "linear":
            return HeadFunction.linear(self.weight @ A)
        kappa = None if self.kappa is None else self.kappa * float(np.linalg.norm(A, 2))
        inner = self.fn
        return HeadFunction(self.kind + "_after_linear", lambda z: inner(z @ A.T), A.shape[1], self.output_dim, kappa)


# ----------------------------------------------------------------- stitchers


@dataclass(frozen=True)
class LinearStitcher:
    """``z1 -> S z1`` with S of shape (d2, d1)."""

    S: np.ndarray
    method: str = "ols"
    lam: float = 0.0
    residual: float = 0.0
    rank: int = 0
    clipped: bool = False

    def apply(self, f1) -> np.ndarray:
        x = f1.data if hasattr(f1, "data") else np.asarray(f1, dtype=np.float64)
        return x @ self.S.T


def _moments(p: PairedDataset):
    x, y = p.left.data, p.right.data
    n = x.shape[0]
    return x.T @ x / n, y.T @ x / n, y.T @ y / n


def fit_stitcher(p: PairedDataset, method: str = "ols", lam: float = 0.0) -> LinearStitcher:
    """Least-squares linear map from left to right features.

    OLS solves the normal equations through an eigendecomposition of the
    left second-moment matrix, treating eigenvalues below 1e-10 of the
    largest as zero. Ridge adds ``lam * |S|_F^2`` to the mean squared error.
    The stored ``residual`` is the mean squared error of the fit (penalty excluded).
    """
    s11, s21, _ = _moments(p)
    w, u = np.linalg.eigh(s11)
    if method == "ols":
        top = max(float(w[-1]), 0.0)
        keep = w > RANK_RTOL * top if top > 0 else np.zeros_like(w, dtype=bool)
        inv = np.zeros_like(w)
        inv[keep] = 1.0 / w[keep]
        rank = int(np.count_nonzero(keep))
        lam_used = 0.0
    elif method == "ridge":
        if not lam > 0:
            raise ValidationError("ridge stitcher needs lam > 0")
        inv = 1.0 / (np.clip(w, 0.0, None) + lam)
        rank = numerical_rank(w)
        lam_used = float(lam)
    else:
        raise ValidationError(f"unknown stitcher method {method!r}")
    S = ((s21 @ u) * inv) @ u.T
    resid = p.left.data @ S.T - p.right.data
    return LinearStitcher(
        S=S,
        method=method,
        lam=lam_used,
        residual=float(np.mean(np.einsum("ij,ij->i", resid, resid))),
        rank=rank,
        clipped=rank < s11.shape[0],
    )


def regression_residual(p: PairedDataset, S) -> float:
    """Mean squared residual ``mean |S f1 - f2|^2`` of a given stitcher."""
    S = S.S if isinstance(S, LinearStitcher) else np.asarray(S, dtype=np.float64)
    resid = p.left.data @ S.T - p.right.data
    return float(np.mean(np.einsum("ij,ij->i", resid, resid)))


def a_tilde_spectral(p: PairedDataset) -> dict:
    """Minimal regression residual from moment spectra alone.

    With left/right second moments diagonalised as ``diag(eta1)``,
    ``diag(eta2)`` and overlap ``C = diag(eta1)^-1/2 Sigma_12 diag(eta2)^-1/2``
    the minimum is ``sum(eta2) - sum_ij C_ij^2 eta2_j``.
    """
    s11, s21, s22 = _moments(p)
    w1, u1 = np.linalg.eigh(s11)
    w2, u2 = np.linalg.eigh(s22)
    w1, u1, w2, u2 = w1[::-1], u1[:, ::-1], np.clip(w2[::-1], 0.0, None), u2[:, ::-1]
    r1 = numerical_rank(w1)
    eta1 = w1[:r1]
    cross = u1[:, :r1].T @ s21.T @ u2  # Sigma_12 in both eigenbases
    with np.errstate(divide="ignore", invalid="ignore"):
        scale2 = np.where(w2 > 0, 1.0 / np.sqrt(w2), 0.0)
    C = cross / np.sqrt(eta1)[:, None] * scale2[None, :]
    captured = float(np.sum((cross**2) / eta1[:, None]))
    return {
        "a_tilde": float(np.sum(w2) - captured),
        "identity_norm": float(np.sum(w2)),
        "overlap_norm": captured,
        "eta1": eta1,
        "eta2": w2,
        "C": C,
    }


# ------------------------------------------------------------------- risks


def _targets(p: PairedDataset) -> np.ndarray:
    if p.targets is None:
        raise ValidationError("this operation needs targets")
    return p.target_matrix()


def _mse(pred: np.ndarray, y: np.ndarray) -> float:
    d = pred - y
    return float(np.mean(np.einsum("ij,ij->i", d, d)))


def stitch_risk(g2: HeadFunction, s: LinearStitcher | np.ndarray, p: PairedDataset) -> float:
    """Risk of ``g2 o S o f1`` on ``p``."""
    S = s.S if isinstance(s, LinearStitcher) else np.atleast_2d(np.asarray(s, dtype=np.float64))
    y = _targets(p)
    if S.shape[1] != p.left.dim or S.shape[0] != g2.input_dim:
        raise DimensionMismatch(f"stitcher shape {S.shape} does not connect dim {p.left.dim} to {g2.input_dim}")
    if y.shape[1] != g2.output_dim:
        raise DimensionMismatch(f"targets have {y.shape[1]} columns, head outputs {g2.output_dim}")
    return _mse(g2(p.left.data @ S.T), y)


def model_risk(g: HeadFunction, f, p: PairedDataset) -> float:
    """Risk of ``g o f`` where ``f`` is the representation matrix (n x d)."""
    x = f.data if hasattr(f, "data") else np.asarray(f, dtype=np.float64)
    y = _targets(p)
    if y.shape[1] != g.output_dim:
        raise DimensionMismatch(f"targets have {y.shape[1]} columns, head outputs {g.output_dim}")
    return _mse(g(x), y)


def best_linear_head(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares head W (t x d) for ``y ~ W x`` and its mean squared error."""
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    W = coef.T
    return W, _mse(x @ coef, y)


def best_stitch_for_linear_head(W2: np.ndarray, x1: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimise ``mean |W2 S x1 - y|^2`` over S directly as least squares in vec(S)."""
    n, d1 = x1.shape
    t, d2 = W2.shape
    design = np.einsum("ib,ka->ikba", x1, W2).reshape(n * t, d1 * d2)
    vec, *_ = np.linalg.lstsq(design, y.reshape(n * t), rcond=None)
    S = vec.reshape(d1, d2).T
    return S, _mse(x1 @ S.T @ W2.T, y)


def projection_residual(W2: np.ndarray, W1: np.ndarray, x1: np.ndarray) -> float:
    """``tr(P W1 Sigma_11 W1^T P)`` with P the projector onto the complement of range(W2).

    This is the excess of the best stitched risk over the best left-model risk.
    """
    P = np.eye(W2.shape[0]) - W2 @ np.linalg.pinv(W2)
    M = P @ W1
    s11 = x1.T @ x1 / x1.shape[0]
    return float(np.trace(M @ s11 @ M.T))


def theorem2_rhs(reference_risk: float, a_tilde: float, kappa: float) -> float:
    """``R2 + kappa^2 A + 2 kappa sqrt(A R2)``."""
    a = max(a_tilde, 0.0)
    return reference_risk + kappa * kappa * a + 2.0 * kappa * math.sqrt(a * max(reference_risk, 0.0))


# ------------------------------------------------------------------- reports


@dataclass(frozen=True)
class Inequality:
    """``lhs <= rhs``; satisfied when ``rhs - lhs >= -tolerance``."""

    name: str
    lhs: float
    rhs: float
    tolerance: float
    asserted: bool = True

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def satisfied(self) -> bool:
        return self.slack >= -self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "satisfied": self.satisfied,
            "asserted": self.asserted,
        }


def _ineq(name, lhs, rhs, asserted=True, scale=None) -> Inequality:
    scale = abs(rhs) if scale is None else abs(scale)
    return Inequality(name, float(lhs), float(rhs), RELATIVE_SLACK * max(1.0, scale), asserted)


@dataclass
class StitchReport:
    mode: str
    stitch_risk: float | None = None
    reference_risks: dict = field(default_factory=dict)
    excess_stitch_risk: float | None = None
    a_tilde: float | None = None
    kappa: float | None = None
    bound_value: float | None = None
    inequalities: list = field(default_factory=list)
    evaluation: str = ""
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(q.satisfied for q in self.inequalities if q.asserted)

    def failures(self) -> list:
        return [q for q in self.inequalities if q.asserted and not q.satisfied]

    def raise_on_violation(self) -> "StitchReport":
        bad = self.failures()
        if bad:
            names = ", ".join(f"{q.name} (slack {q.slack:.3e})" for q in bad)
            raise BoundViolation(f"{self.mode}: violated {names}")
        return self

    def to_dict(self) -> dict:
        return {
            "kind": "stitch",
            "mode": self.mode,
            "stitch_risk": self.stitch_risk,
            "reference_risks": dict(self.reference_risks),
            "excess_stitch_risk": self.excess_stitch_risk,
            "a_tilde": self.a_tilde,
            "kappa": self.kappa,
            "bound_value": self.bound_value,
            "inequalities": [q.to_dict() for q in self.inequalities],
            "evaluation": self.evaluation,
            "ok": self.ok,
            "notes": _plain(self.notes),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ----------------------------------------------------------------- instances


@dataclass(frozen=True)
class StitchInstance:
    """Paired features with targets and the head of model 2.

    ``head2=None`` means the best linear head on the right features
    (fitted on the evaluation sample). ``containment`` certifies that every
    ``head2 o S`` lies in model 1's head class; it is implied for linear
    heads, where model 1's class is all linear maps. For certified nonlinear
    containment the caller supplies ``risk1``, model 1's class-minimum risk.
    """

    data: PairedDataset
    head2: HeadFunction | None = None
    containment: bool | None = None
    risk1: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.data.targets is None:
            raise ValidationError("stitching instances need targets")


def split(p: PairedDataset, fit_fraction: float | None = 0.5, seed: int = 0) -> tuple[PairedDataset, PairedDataset, str]:
    """(fit, eval, description) for a seeded random split."""
    if fit_fraction is None:
        return p, p, "in-sample"
    if not 0.0 < fit_fraction < 1.0:
        raise ValidationError("fit_fraction must lie in (0, 1)")
    n = p.n
    n_fit = int(round(fit_fraction * n))
    if n_fit < 2 or n - n_fit < 2:
        raise ValidationError(f"cannot split {n} samples with fit_fraction={fit_fraction}")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    return p.subset(perm[:n_fit]), p.subset(perm[n_fit:]), f"held-out(fit_fraction={fit_fraction}, seed={seed})"


def _resolve_head2(inst: StitchInstance, ev: PairedDataset) -> HeadFunction:
    if inst.head2 is not None:
        if inst.head2.input_dim != ev.right.dim:
            raise DimensionMismatch("head2 input dimension does not match the right features")
        return inst.head2
    W, _ = best_linear_head(ev.right.data, ev.target_matrix())
    return HeadFunction.linear(W)


def fit_only(inst: StitchInstance | PairedDataset, method: str = "ols", lam: float = 0.0) -> StitchReport:
    p = inst.data if isinstance(inst, StitchInstance) else inst
    s = fit_stitcher(p, method, lam)
    spec = a_tilde_spectral(p)
    return StitchReport(
        mode="fit-only",
        a_tilde=s.residual,
        evaluation="in-sample",
        notes={
            "S": s.S,
            "method": method,
            "lam": s.lam,
            "rank": s.rank,
            "clipped": s.clipped,
            "a_tilde_spectral": spec["a_tilde"],
        },
    )


def check_lemma_linear_heads(
    inst: StitchInstance, fit_fraction: float | None = 0.5, seed: int = 0, strict: bool = False
) -> StitchReport:
    """Best stitched risk with a linear head equals the best linear risk on the left features.

    Equality is asserted only when the head has full row rank d <= d2;
    otherwise the projection residual accounting for the gap is checked.
    """
    _, ev, how = split(inst.data, fit_fraction, seed)
    g2 = _resolve_head2(inst, ev)
    if g2.kind != "linear":
        raise ValidationError("the linear-head lemma needs a linear head")
    W2 = g2.weight
    x1, y = ev.left.data, ev.target_matrix()
    W1, r1 = best_linear_head(x1, y)
    S, r_stitch = best_stitch_for_linear_head(W2, x1, y)
    resid = projection_residual(W2, W1, x1)
    t, d2 = W2.shape
    full = np.linalg.matrix_rank(W2) == t and t <= d2
    if strict and not full:
        raise RankDeficientHead(f"head rank {np.linalg.matrix_rank(W2)} < output dim {t}")
    ineqs = [
        _ineq("lemma2_equality", abs(r_stitch - r1), 0.0, asserted=bool(full), scale=r1),
        _ineq("projection_residual_identity", abs(r_stitch - (r1 + resid)), 0.0, scale=r_stitch),
        _ineq("stitch_at_least_left_optimum", r1, r_stitch),
    ]
    r2 = model_risk(g2, ev.right, ev)
    return StitchReport(
        mode="lemma2",
        stitch_risk=r_stitch,
        reference_risks={"R1": r1, "R2": r2},
        excess_stitch_risk=r_stitch - r2,
        kappa=g2.kappa,
        inequalities=ineqs,
        evaluation=how,
        notes={"rank_deficient_head": not full, "projection_residual": resid, "S": S},
    )


def check_theorem2_bound(inst: StitchInstance, fit_fraction: float | None = 0.5, seed: int = 0) -> StitchReport:
    """Risk of the OLS stitcher against ``R2 + kappa^2 A + 2 kappa sqrt(A R2)``.

    ``R2`` is the evaluation risk of the given model ``head2 o f2`` and ``A``
    the evaluation residual of the fitted stitcher (its training residual is
    reported as ``a_tilde_fit``).
    """
    fit, ev, how = split(inst.data, fit_fraction, seed)
    g2 = _resolve_head2(inst, ev)
    if g2.kappa is None:
        raise UncertifiedLipschitz("head2 has no certified Lipschitz constant")
    s = fit_stitcher(fit, "ols")
    r2 = model_risk(g2, ev.right, ev)
    lhs = stitch_risk(g2, s, ev)
    a = regression_residual(ev, s)
    rhs = theorem2_rhs(r2, a, g2.kappa)
    spec = a_tilde_spectral(ev)
    return StitchReport(
        mode="thm2",
        stitch_risk=lhs,
        reference_risks={"R2": r2},
        excess_stitch_risk=lhs - r2,
        a_tilde=a,
        kappa=g2.kappa,
        bound_value=rhs,
        inequalities=[_ineq("theorem2", lhs, rhs)],
        evaluation=how,
        notes={
            "a_tilde_fit": s.residual,
            "a_tilde_eval_minimum": spec["a_tilde"],
            "head": g2.kind,
            "stitcher_rank": s.rank,
        },
    )


def _left_optimum(inst: StitchInstance, g2: HeadFunction, ev: PairedDataset) -> float:
    if g2.kind == "linear" and inst.containment is not False:
        return best_linear_head(ev.left.data, ev.target_matrix())[1]
    if inst.containment and inst.risk1 is not None:
        return float(inst.risk1)
    raise ContainmentNotEstablished(
        "head2 is not linear; supply containment=True and risk1 (model 1's class-minimum risk)"
    )


def check_lower_bound(
    inst: StitchInstance,
    fit_fraction: float | None = 0.5,
    seed: int = 0,
    ridge_grid=(1e-3, 1e-1, 1.0, 10.0),
    n_random: int = 8,
) -> StitchReport:
    """Every candidate stitcher's risk is at least model 1's optimal risk."""
    fit, ev, how = split(inst.data, fit_fraction, seed)
    g2 = _resolve_head2(inst, ev)
    r1 = _left_optimum(inst, g2, ev)
    candidates = {"ols": fit_stitcher(fit, "ols").S}
    for lam in ridge_grid:
        candidates[f"ridge({lam:g})"] = fit_stitcher(fit, "ridge", lam).S
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    d2, d1 = g2.input_dim, ev.left.dim
    for k in range(n_random):
        candidates[f"random{k}"] = rng.standard_normal((d2, d1))
    if g2.kind == "linear":
        candidates["composite_optimum"] = best_stitch_for_linear_head(g2.weight, ev.left.data, ev.target_matrix())[0]
    risks = {name: stitch_risk(g2, S, ev) for name, S in candidates.items()}
    ineqs = [_ineq(f"lower_bound[{name}]", r1, r, scale=r1) for name, r in risks.items()]
    best = min(risks, key=risks.get)
    return StitchReport(
        mode="lower",
        stitch_risk=risks[best],
        reference_risks={"R1": r1, "R2": model_risk(g2, ev.right, ev)},
        kappa=g2.kappa,
        inequalities=ineqs,
        evaluation=how,
        notes={"candidate_risks": risks, "best_candidate": best},
    )


def check_theorem3_sandwich(inst: StitchInstance, fit_fraction: float | None = 0.5, seed: int = 0) -> StitchReport:
    """``R1 - R2 <= R_stitch - R2 <= kappa^2 A + 2 kappa sqrt(A R2)``.

    ``R_stitch`` is the best stitched risk when the head is linear (computed
    exactly) and the OLS stitcher's risk otherwise; the upper side is always
    certified through the OLS stitcher.
    """
    fit, ev, how = split(inst.data, fit_fraction, seed)
    g2 = _resolve_head2(inst, ev)
    if g2.kappa is None:
        raise UncertifiedLipschitz("head2 has no certified Lipschitz constant")
    r1 = _left_optimum(inst, g2, ev)
    r2 = model_risk(g2, ev.right, ev)
    s = fit_stitcher(fit, "ols")
    r_ols = stitch_risk(g2, s, ev)
    if g2.kind == "linear":
        r_stitch = best_stitch_for_linear_head(g2.weight, ev.left.data, ev.target_matrix())[1]
    else:
        r_stitch = r_ols
    a = regression_residual(ev, s)
    upper = theorem2_rhs(r2, a, g2.kappa) - r2
    ineqs = [
        _ineq("sandwich_lower", r1 - r2, r_stitch - r2, scale=max(abs(r1), abs(r_stitch))),
        _ineq("sandwich_upper", r_stitch - r2, upper, scale=max(abs(r_ols), abs(r2))),
        _ineq("ols_upper", r_ols - r2, upper, scale=max(abs(r_ols), abs(r2))),
    ]
    return StitchReport(
        mode="sandwich",
        stitch_risk=r_stitch,
        reference_risks={"R1": r1, "R2": r2},
        excess_stitch_risk=r_stitch - r2,
        a_tilde=a,
        kappa=g2.kappa,
        bound_value=upper,
        inequalities=ineqs,
        evaluation=how,
        notes={"ols_stitch_risk": r_ols, "a_tilde_fit": s.residual},
    )


def check_theorem3_layers(
    layers, fit_fraction: float | None = 0.5, seed: int = 0, risk_rtol: float = 1e-8
) -> StitchReport:
    """Sandwich at several depths of the same pair of models.

    ``layers`` is a sequence of :class:`StitchInstance`, one per depth, each
    holding that depth's features and the head of model 2 above it. The
    report gives the per-depth bounds, the smallest one and its depth, and
    asserts the risk gap against the smallest bound using that depth's
    certified model-1 optimum.
    """
    layers = list(layers)
    if not layers:
        raise ValidationError("need at least one depth")
    per_depth = [check_theorem3_sandwich(inst, fit_fraction, seed) for inst in layers]
    bounds = [r.bound_value for r in per_depth]
    best = int(np.argmin(bounds))
    r2s = [r.reference_risks["R2"] for r in per_depth]
    consistent = max(r2s) - min(r2s) <= risk_rtol * max(1.0, max(abs(v) for v in r2s))
    ineqs = []
    for j, rep in enumerate(per_depth):
        ineqs.extend(
            Inequality(f"depth{j}:{q.name}", q.lhs, q.rhs, q.tolerance, q.asserted) for q in rep.inequalities
        )
    chosen = per_depth[best]
    gap = chosen.reference_risks["R1"] - chosen.reference_risks["R2"]
    ineqs.append(_ineq("layer_min", gap, bounds[best], scale=max(abs(chosen.reference_risks["R1"]), abs(bounds[best]))))
    return StitchReport(
        mode="sandwich-layers",
        stitch_risk=chosen.stitch_risk,
        reference_risks=dict(chosen.reference_risks),
        excess_stitch_risk=chosen.excess_stitch_risk,
        a_tilde=chosen.a_tilde,
        kappa=chosen.kappa,
        bound_value=bounds[best],
        inequalities=ineqs,
        evaluation=chosen.evaluation,
        notes={
            "argmin_depth": best,
            "bounds_by_depth": bounds,
            "a_tilde_by_depth": [r.a_tilde for r in per_depth],
            "reference_risk_consistent": bool(consistent),
            "labels": [inst.label for inst in layers],
        },
    )
