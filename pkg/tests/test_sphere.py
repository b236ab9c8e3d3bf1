import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multishape.deformation import PreShape, Shape
from multishape.errors import AntipodalError, DataError
from multishape.fourier import MultiCurve, inner_product
from multishape.ingest import sample_curve
from multishape.sphere import (
    GeometryWarning,
    TangentVector,
    align_dataset,
    curve_rng,
    estimate_curves,
    estimate_pipeline,
    exp_map,
    frechet_mean,
    frechet_objective,
    geodesic_distance,
    log_map,
)
from multishape.fourier import BasisSpec
from multishape.synth import SynthConfig, generate, two_class_sample

from conftest import random_preshape, random_tangent


def point_at(rng, mu, dist):
    v = random_tangent(rng, mu)
    return exp_map(MultiCurve(dist * v), mu)


def test_geodesic_distance_basics(rng):
    f, g = random_preshape(rng), random_preshape(rng)
    assert geodesic_distance(f, f) == pytest.approx(0.0, abs=1e-7)
    assert geodesic_distance(f, g) == geodesic_distance(g, f)
    assert 0 <= geodesic_distance(f, g) <= np.pi
    assert geodesic_distance(f, PreShape(-f.coef)) == pytest.approx(np.pi)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), dist=st.floats(1e-6, np.pi - 1e-3))
def test_log_exp_roundtrip(seed, dist):
    rng = np.random.default_rng(seed)
    mu = random_preshape(rng, 2, 6)
    f = point_at(rng, mu, dist)
    v = log_map(f, mu)
    assert v.norm() == pytest.approx(geodesic_distance(f, mu), abs=1e-10)
    assert exp_map(v, mu).allclose(f, atol=1e-9)


def test_exp_log_roundtrip_in_tangent_space(rng):
    mu = random_preshape(rng)
    v = MultiCurve(2.0 * random_tangent(rng, mu))
    back = log_map(exp_map(v, mu), mu)
    assert back.vector.allclose(v, atol=1e-9)


def test_log_map_is_tangent_and_centered(rng):
    mu, f = random_preshape(rng), random_preshape(rng)
    v = log_map(f, mu).vector
    assert abs(inner_product(v, mu)) < 1e-12
    np.testing.assert_allclose(v.B.mean(axis=0), 0.0, atol=1e-15)


def test_log_map_small_angle_is_zero(rng):
    mu = random_preshape(rng)
    assert log_map(mu, mu).norm() == 0.0
    assert exp_map(MultiCurve(np.zeros_like(mu.coef)), mu).allclose(mu, atol=0)


def test_log_map_antipode_raises(rng):
    mu = random_preshape(rng)
    with pytest.raises(AntipodalError):
        log_map(PreShape(-mu.coef), mu)


def test_tangent_vector_validation(rng):
    mu = random_preshape(rng)
    with pytest.raises(DataError):
        TangentVector(mu, mu)


def test_frechet_mean_of_identical_shapes_is_exact(rng):
    x = random_preshape(rng)
    res = frechet_mean([x] * 7)
    np.testing.assert_array_equal(res.mean.coef, x.coef)
    assert res.variance == 0.0 and res.converged


def test_frechet_mean_of_two_points_is_geodesic_midpoint(rng):
    mu = random_preshape(rng)
    f, g = point_at(rng, mu, 0.8), point_at(rng, mu, 1.1)
    m = frechet_mean([f, g]).mean
    slerp = (f.coef + g.coef) / np.linalg.norm(f.coef + g.coef)
    np.testing.assert_allclose(m.coef, slerp, atol=1e-8)


def test_frechet_mean_stationarity_and_optimality(rng):
    mu = random_preshape(rng)
    shapes = [point_at(rng, mu, d) for d in rng.uniform(0.1, 0.6, 25)]
    res = frechet_mean(shapes, tol=1e-12)
    assert res.converged
    tangent_mean = np.mean([log_map(s, res.mean).vector.coef for s in shapes], axis=0)
    assert np.linalg.norm(tangent_mean) < 1e-8
    assert res.variance == pytest.approx(frechet_objective(shapes, res.mean))
    # a perturbed mean is never better
    for _ in range(5):
        other = point_at(rng, res.mean, 1e-3)
        assert frechet_objective(shapes, other) >= res.variance


def test_frechet_mean_skips_antipodal_shapes(rng):
    mu = random_preshape(rng)
    shapes = [point_at(rng, mu, 0.1) for _ in range(4)] + [PreShape(-mu.coef)]
    with pytest.warns(GeometryWarning):
        res = frechet_mean(shapes, init=mu, max_iter=1)
    assert res.n_excluded == 1
    assert np.isfinite(res.variance)


def test_frechet_mean_empty():
    with pytest.raises(DataError):
        frechet_mean([])


def test_curve_rng_streams_are_independent_and_reproducible():
    a = curve_rng(7, 1, 3).random(4)
    np.testing.assert_array_equal(a, curve_rng(7, 1, 3).random(4))
    assert not np.array_equal(a, curve_rng(7, 1, 4).random(4))
    assert not np.array_equal(a, curve_rng(8, 1, 3).random(4))
    curve_rng(2**64 - 1)  # full unsigned 64-bit range accepted


def test_align_dataset_variance_is_monotone(template):
    sample = generate(SynthConfig(template, n=40, sigma=0.5, seed=5))
    out = align_dataset(sample.preshapes, xi=1e-6, seed=1)
    eta = np.array(out.eta_history)
    assert out.monotone
    assert np.all(np.diff(eta) <= 1e-10)
    assert len(out.shapes) == 40 and all(isinstance(s, Shape) for s in out.shapes)
    # every aligned shape is at least as close to the mean as its unaligned pre-shape
    mu = out.mean.mean
    for x, s in zip(sample.preshapes, out.shapes):
        assert inner_product(s, mu) >= inner_product(x, mu) - 1e-12


def test_align_dataset_is_seed_deterministic(template):
    sample = generate(SynthConfig(template, n=10, sigma=0.5, seed=2))
    a = align_dataset(sample.preshapes, seed=9)
    b = align_dataset(sample.preshapes, seed=9)
    np.testing.assert_array_equal(a.mean.mean.coef, b.mean.mean.coef)
    assert a.eta_history == b.eta_history


def test_estimate_pipeline_from_contours(template):
    curves, labels = two_class_sample(template, n=6, seed=3)
    dataset = [sample_curve(c, 300, int(l), f"c{i}") for i, (c, l) in enumerate(zip(curves, labels))]
    res = estimate_pipeline(dataset, BasisSpec(22), xi=1e-4, seed=0)
    assert res.ids == [f"c{i}" for i in range(6)]
    assert len(res.params) == 6 and res.params[0].delta.shape == (3,)
    assert res.monotone
    for c, prm, s in zip(res.curves, res.params, res.shapes):
        assert prm.rho == pytest.approx(np.sqrt(np.sum((c.coef - np.concatenate(
            [np.broadcast_to(prm.T, (3, 2))[:, :, None], np.zeros((3, 2, 22))], axis=2)) ** 2)))


def test_estimate_curves_errors():
    with pytest.raises(DataError):
        estimate_pipeline([])
    flat = np.zeros((2, 2, 5))
    with pytest.raises(DataError, match="curve bad"):
        estimate_curves([MultiCurve(flat)], ids=["bad"])
