import math

import numpy as np
import pytest

from ralign.core import validate_paired
from ralign.errors import AmbientTooSmall, DimensionMismatch, UnrealizableOverlap
from ralign.metrics import canonical_correlations, gaussian_mi, gaussian_w2_independence, ka_feature_form
from ralign.stitching import HeadFunction, fit_stitcher, model_risk
from ralign.synth import SyntheticSpec, frames, generate, generate_task, oracles, random_spec


def test_identity_overlap_equal_spectra():
    o = oracles(SyntheticSpec(6, [1.0, 0.5, 0.2], [1.0, 0.5, 0.2], np.eye(3)))
    assert o.ka == pytest.approx(1.0, rel=1e-14)


def test_zero_overlap():
    eta2 = [2.0, 0.5]
    o = oracles(SyntheticSpec(5, [1.0, 0.3, 0.1], eta2, np.zeros((3, 2))))
    assert o.ka == 0.0 and o.gaussian_mi == 0.0 and o.gaussian_w2 == 0.0
    assert o.a_tilde == pytest.approx(sum(eta2))


def test_scalar_06():
    o = oracles(SyntheticSpec(2, [1.0], [1.0], [[0.6]]))
    np.testing.assert_allclose(o.canonical_correlations, [0.6])
    assert o.gaussian_mi == pytest.approx(0.22314, abs=1e-5)
    assert o.gaussian_mi == pytest.approx(-0.5 * math.log(0.64), rel=1e-14)
    assert o.gaussian_w2 == pytest.approx(0.4, rel=1e-12)
    assert o.ka == pytest.approx(0.36, rel=1e-14)


def test_frames_realize_overlap(rng):
    spec = random_spec(rng, 4, 3)
    U1, U2 = frames(spec)
    np.testing.assert_allclose(U1.T @ U1, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(U2.T @ U2, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(U1.T @ U2, spec.C, atol=1e-12)


def test_errors():
    with pytest.raises(UnrealizableOverlap):
        SyntheticSpec(4, [1.0], [1.0], [[1.2]])
    with pytest.raises(AmbientTooSmall):
        SyntheticSpec(2, [1.0, 1.0], [1.0, 1.0], np.zeros((2, 2)))
    with pytest.raises(DimensionMismatch):
        SyntheticSpec(4, [1.0, 1.0], [1.0], np.zeros((3, 3)))


def test_generate_moments_and_invariants(rng):
    spec = random_spec(rng, 3, 2, seed=5)
    p, o = generate(spec, 20000)
    validate_paired(p)
    n = p.n
    s11 = p.left.data.T @ p.left.data / n
    s12 = p.left.data.T @ p.right.data / n
    target = np.sqrt(spec.eta1)[:, None] * spec.C * np.sqrt(spec.eta2)[None, :]
    band = 5 / math.sqrt(n)
    assert np.max(np.abs(s11 - np.diag(spec.eta1))) < band * spec.eta1.max()
    assert np.max(np.abs(s12 - target)) < band


def test_same_seed_identical():
    spec = SyntheticSpec(5, [1.0, 0.5], [1.0, 0.2], [[0.5, 0.1], [0.0, 0.3]], seed=123)
    a, _ = generate(spec, 50)
    b, _ = generate(spec, 50)
    assert a.left.data.tobytes() == b.left.data.tobytes()
    c, _ = generate(spec.with_seed(124), 50)
    assert a.left.data.tobytes() != c.left.data.tobytes()


def test_pcg64_stream_documented():
    spec = SyntheticSpec(1, [4.0], [1.0], [[1.0]], seed=42)
    p, _ = generate(spec, 3)
    phi = np.random.Generator(np.random.PCG64(42)).standard_normal((3, 1))
    np.testing.assert_array_equal(p.left.data, 2.0 * phi)
    np.testing.assert_array_equal(p.right.data, phi)


def test_task_reference_risk(rng):
    spec = random_spec(rng, 3, 2, seed=9)
    head = HeadFunction.linear(rng.standard_normal((1, 2)))
    p, o = generate_task(spec, head, 100, 0.0)
    assert o.reference_risk == 0.0
    assert model_risk(head, p.right, p) == 0.0
    p, o = generate_task(spec, head, 40000, 0.1)
    assert o.reference_risk == pytest.approx(0.01)
    assert model_risk(head, p.right, p) == pytest.approx(0.01, rel=0.05)
    with pytest.raises(DimensionMismatch):
        generate_task(spec, HeadFunction.linear(np.ones((1, 5))), 10, 0.0)


def test_tanh_head_consistency(rng):
    spec = random_spec(rng, 3, 3, seed=2)
    head = HeadFunction.tanh_linear(rng.standard_normal((4, 3)), out=rng.standard_normal((1, 4)))
    risks = [model_risk(head, p.right, p) for p, _ in (generate_task(spec, head, n, 0.0) for n in (10, 1000))]
    assert risks == [0.0, 0.0]


def test_oracle_convergence_band(rng):
    spec = SyntheticSpec(7, [1.0, 0.6, 0.3], [1.0, 0.4], [[0.7, 0.1], [0.0, 0.5], [0.2, 0.0]])
    o = oracles(spec)
    devs = {"cka": [], "mi": [], "w2": [], "a": []}
    for seed in range(20):
        p, _ = generate(spec.with_seed(seed), 4096)
        devs["cka"].append(abs(ka_feature_form(p, centered=True) - o.cka))
        devs["mi"].append(abs(gaussian_mi(p) - o.gaussian_mi))
        devs["w2"].append(abs(gaussian_w2_independence(p) - o.gaussian_w2))
        devs["a"].append(abs(fit_stitcher(p).residual - o.a_tilde))
    for k, v in devs.items():
        assert np.median(v) < 0.02, k
    p, _ = generate(spec, 4096)
    np.testing.assert_allclose(canonical_correlations(p), o.canonical_correlations, atol=0.05)


def test_hsic_and_coco_oracles_by_moments():
    # population HSIC of linear kernels is |Sigma_12|_F^2, COCO its top singular value
    spec = SyntheticSpec(4, [2.0, 0.5], [1.0, 0.25], [[0.6, 0.0], [0.0, 0.8]])
    o = oracles(spec)
    s12 = np.diag([math.sqrt(2.0) * 0.6, math.sqrt(0.125) * 0.8])
    assert o.hsic == pytest.approx(np.sum(s12**2))
    assert o.coco == pytest.approx(np.linalg.norm(s12, 2))
