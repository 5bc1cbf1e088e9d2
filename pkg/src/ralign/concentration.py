"""Monte Carlo check of the McDiarmid concentration bound for kernel alignment.

Each trial draws ``n`` fresh samples and measures two deviations from a
high-accuracy reference:

* the unnormalised statistic ``<K1, K2>_F / n^2`` against ``E[k1(x,x') k2(x,x')]``,
* the normalised KA against ``E[k1 k2] / sqrt(E[k1^2] E[k2^2])``.

Kernels are forced to unit diagonal so both are bounded by 1. The
references are averages of ``k1 k2``, ``k1^2`` and ``k2^2`` over
``max(64 * n_max, 2^18)`` independent pairs ``(x, x')`` drawn from a
dedicated stream, which is unbiased for the population expectation and
costs O(n_ref) kernel evaluations.

Only the unnormalised violation rate is asserted against
``delta + 3 sqrt(delta (1 - delta) / trials)``; the normalised deviation is
reported without an assertion.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _accel
from .errors import BoundViolation, InvalidDelta, ValidationError
from .kernels import KernelSpec, median_heuristic_gamma, unit_rows
from .synth import SyntheticSpec, sample_features

QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)
MIN_REFERENCE_PAIRS = 2**18

Sampler = Callable[[np.random.Generator, int], tuple]


def bound_value(n: int, delta: float) -> float:
    """``sqrt((32 / n) log(2 / delta))``."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValidationError("n must be a positive integer")
    if not (0.0 < delta < 1.0):
        raise InvalidDelta(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(32.0 / n * math.log(2.0 / delta))


def binomial_ceiling(delta: float, trials: int) -> float:
    return delta + 3.0 * math.sqrt(delta * (1.0 - delta) / trials)


@dataclass(frozen=True)
class ConcentrationResult:
    n: int
    delta: float
    bound: float
    trials: int
    violation_rate: float
    deviation_quantiles: np.ndarray
    normalized_violation_rate: float = 0.0
    normalized_quantiles: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reference: float = 0.0
    reference_normalized: float = 0.0
    deviations: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def ceiling(self) -> float:
        return binomial_ceiling(self.delta, self.trials)

    @property
    def within_ceiling(self) -> bool:
        return self.violation_rate <= self.ceiling

    @property
    def median_deviation(self) -> float:
        return float(np.median(self.deviations))

    def to_dict(self) -> dict:
        return {
            "kind": "concentration",
            "n": self.n,
            "delta": self.delta,
            "bound": self.bound,
            "trials": self.trials,
            "violation_rate": self.violation_rate,
            "ceiling": self.ceiling,
            "within_ceiling": self.within_ceiling,
            "quantile_levels": list(QUANTILE_LEVELS),
            "deviation_quantiles": self.deviation_quantiles.tolist(),
            "normalized_violation_rate": self.normalized_violation_rate,
            "normalized_quantiles": self.normalized_quantiles.tolist(),
            "reference": self.reference,
            "reference_normalized": self.reference_normalized,
        }


@dataclass(frozen=True)
class ConcentrationStudy:
    """Results over an n-grid plus the fitted log-log rate of the median deviation."""

    results: tuple
    rate_exponent: float | None
    seed: int
    kernel: str

    @property
    def ok(self) -> bool:
        return all(r.within_ceiling for r in self.results)

    def raise_on_violation(self) -> "ConcentrationStudy":
        bad = [r.n for r in self.results if not r.within_ceiling]
        if bad:
            raise BoundViolation(f"violation rate above the binomial ceiling at n = {bad}")
        return self

    def csv_rows(self):
        for r in self.results:
            for t, dev in enumerate(r.deviations):
                yield r.n, t, float(dev)

    def to_dict(self) -> dict:
        return {
            "kind": "concentration_study",
            "results": [r.to_dict() for r in self.results],
            "rate_exponent": self.rate_exponent,
            "seed": self.seed,
            "kernel": self.kernel,
            "ok": self.ok,
        }


def _pair_values(x: np.ndarray, y: np.ndarray, spec: KernelSpec, gamma: float | None) -> np.ndarray:
    """k(x_i, y_i) for matched rows, inputs already unit-normalised when linear."""
    if spec.kind == "linear":
        return np.einsum("ij,ij->i", x, y)
    d = x - y
    return np.exp(-gamma * np.einsum("ij,ij->i", d, d))


def _prepare(x: np.ndarray, spec: KernelSpec) -> np.ndarray:
    return unit_rows(x) if spec.kind == "linear" else x


def _kernel_sums(x1, x2, spec: KernelSpec, g1, g2) -> tuple[float, float, float]:
    kind = _accel.KIND_LINEAR if spec.kind == "linear" else _accel.KIND_RBF
    return _accel.kernel_product_sums(
        _prepare(x1, spec), _prepare(x2, spec), kind, g1 or 0.0, kind, g2 or 0.0
    )


def _as_sampler(source) -> tuple[Sampler, int]:
    if isinstance(source, SyntheticSpec):
        return (lambda rng, n: sample_features(source, n, rng)), source.seed
    if callable(source):
        return source, 0
    raise ValidationError("source must be a SyntheticSpec or a sampler callable")


def _trial_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *path])))


def _resolve_gammas(sampler, spec: KernelSpec, seed: int) -> tuple[float | None, float | None]:
    if spec.kind == "linear":
        return None, None
    if spec.gamma != "median":
        return float(spec.gamma), float(spec.gamma)
    x1, x2 = sampler(_trial_rng(seed, 2, 0), 512)
    return median_heuristic_gamma(np.asarray(x1, float)), median_heuristic_gamma(np.asarray(x2, float))


def reference_values(sampler, spec: KernelSpec, gammas, seed: int, n_ref: int) -> tuple[float, float]:
    """(E[k1 k2], E[k1 k2] / sqrt(E[k1^2] E[k2^2])) from independent pairs."""
    rng = _trial_rng(seed, 1, 0)
    a1, a2 = (np.asarray(v, float) for v in sampler(rng, n_ref))
    b1, b2 = (np.asarray(v, float) for v in sampler(rng, n_ref))
    k1 = _pair_values(_prepare(a1, spec), _prepare(b1, spec), spec, gammas[0])
    k2 = _pair_values(_prepare(a2, spec), _prepare(b2, spec), spec, gammas[1])
    cross = float(np.mean(k1 * k2))
    norm = math.sqrt(float(np.mean(k1 * k1)) * float(np.mean(k2 * k2)))
    return cross, (cross / norm if norm > 0 else 0.0)


def _one_trial(sampler, spec, gammas, seed, n, t) -> tuple[float, float]:
    x1, x2 = sampler(_trial_rng(seed, 0, n, t), n)
    s12, s11, s22 = _kernel_sums(np.asarray(x1, float), np.asarray(x2, float), spec, *gammas)
    raw = s12 / (n * n)
    norm = math.sqrt(s11 * s22)
    return raw, (s12 / norm if norm > 0 else 0.0)


def run_trials(
    source,
    n: int,
    trials: int,
    delta: float,
    kernel: KernelSpec = KernelSpec("linear"),
    seed: int | None = None,
    threads: int = 1,
    reference: tuple[float, float] | None = None,
) -> ConcentrationResult:
    """Violation rate of ``|A_hat - A| > bound_value(n, delta)`` over ``trials`` draws.

    ``source`` is a :class:`SyntheticSpec` or a callable ``(rng, n) -> (f1, f2)``.
    Trial ``t`` at size ``n`` uses the stream ``SeedSequence([seed, 0, n, t])``
    so the result does not depend on ``threads``.
    """
    eps = bound_value(n, delta)
    if trials < 1:
        raise ValidationError("trials must be positive")
    if kernel.kind == "precomputed":
        raise ValidationError("concentration trials need a feature kernel")
    sampler, default_seed = _as_sampler(source)
    seed = default_seed if seed is None else int(seed)
    spec = KernelSpec(kernel.kind, kernel.gamma, True)
    gammas = _resolve_gammas(sampler, spec, seed)
    if reference is None:
        reference = reference_values(sampler, spec, gammas, seed, max(64 * n, MIN_REFERENCE_PAIRS))
    ref_raw, ref_norm = reference

    def work(t):
        return _one_trial(sampler, spec, gammas, seed, n, t)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(work, range(trials)))
    else:
        vals = [work(t) for t in range(trials)]
    vals = np.asarray(vals)
    dev = np.abs(vals[:, 0] - ref_raw)
    dev_norm = np.abs(vals[:, 1] - ref_norm)
    return ConcentrationResult(
        n=int(n),
        delta=float(delta),
        bound=eps,
        trials=int(trials),
        violation_rate=float(np.mean(dev > eps)),
        deviation_quantiles=np.quantile(dev, QUANTILE_LEVELS),
        normalized_violation_rate=float(np.mean(dev_norm > eps)),
        normalized_quantiles=np.quantile(dev_norm, QUANTILE_LEVELS),
        reference=ref_raw,
        reference_normalized=ref_norm,
        deviations=dev,
    )


def rate_exponent(ns, medians) -> float | None:
    """Slope of log(median deviation) against log(n); None if undefined."""
    ns = np.asarray(ns, float)
    med = np.asarray(medians, float)
    ok = med > 0
    if np.count_nonzero(ok) < 2:
        return None
    return float(np.polyfit(np.log(ns[ok]), np.log(med[ok]), 1)[0])


def study(
    source,
    n_grid,
    trials: int,
    delta: float,
    kernel: KernelSpec = KernelSpec("linear"),
    seed: int | None = None,
    threads: int = 1,
) -> ConcentrationStudy:
    """Trials at every n in the grid, sharing one reference sized for the largest n."""
    n_grid = sorted({int(v) for v in n_grid})
    if not n_grid:
        raise ValidationError("empty n grid")
    sampler, default_seed = _as_sampler(source)
    seed = default_seed if seed is None else int(seed)
    spec = KernelSpec(kernel.kind, kernel.gamma, True)
    for n in n_grid:
        bound_value(n, delta)
    gammas = _resolve_gammas(sampler, spec, seed)
    ref = reference_values(sampler, spec, gammas, seed, max(64 * n_grid[-1], MIN_REFERENCE_PAIRS))
    results = tuple(run_trials(sampler, n, trials, delta, spec, seed, threads, ref) for n in n_grid)
    slope = rate_exponent([r.n for r in results], [r.median_deviation for r in results])
    return ConcentrationStudy(results, slope, seed, spec.describe())
