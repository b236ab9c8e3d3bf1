import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multishape.deformation import (
    AlignmentWarning,
    DeformationParams,
    PreShape,
    Shape,
    aligned_shape,
    alignment_objective,
    center_and_scale,
    estimate_rotation,
    icf_align,
    solve_reparam,
)
from multishape.errors import DegenerateInputError, DomainError
from multishape.fourier import MultiCurve, reparametrize, rotate
from multishape.synth import SynthConfig, generate

from conftest import random_curve, random_preshape
from oracles import cyclic_gap, grid_rotation, grid_shift


def test_center_and_scale_reconstructs(rng):
    c = random_curve(rng, scale=40.0)
    x, T, rho = center_and_scale(c)
    assert abs(x.norm() - 1.0) < 1e-14
    np.testing.assert_allclose(x.B.mean(axis=0), 0.0, atol=1e-15)
    rebuilt = x.coef * rho
    rebuilt[:, :, 0] += T
    np.testing.assert_allclose(rebuilt, c.coef, atol=1e-10)
    np.testing.assert_allclose(T, c.B.mean(axis=0))


def test_center_and_scale_invariance(rng):
    c = random_curve(rng)
    coef = 3.5 * c.coef
    coef[:, :, 0] += [10.0, -4.0]
    x1, _, _ = center_and_scale(c)
    x2, _, rho2 = center_and_scale(MultiCurve(coef))
    assert x1.allclose(x2, atol=1e-14)


def test_zero_scale_is_degenerate():
    coef = np.zeros((2, 2, 5))
    coef[:, :, 0] = [3.0, 1.0]
    with pytest.raises(DegenerateInputError):
        center_and_scale(MultiCurve(coef))


def test_preshape_validation(rng):
    c = random_curve(rng)
    with pytest.raises(DomainError):
        PreShape(c.coef)
    coef = c.coef / c.norm()
    with pytest.raises(DomainError):
        PreShape(coef)  # not centered
    x = random_preshape(rng)
    assert Shape(x.coef, template_id="t").template_id == "t"


def test_deformation_params_normalise():
    prm = DeformationParams([1, 2], 2.0, -0.5, [1.25, -0.25])
    assert prm.theta == pytest.approx(2 * np.pi - 0.5)
    np.testing.assert_allclose(prm.delta, [0.25, 0.75])
    assert prm.as_row()[:3] == [1.0, 2.0, 2.0]
    with pytest.raises(DomainError):
        DeformationParams([0, 0], 0.0, 0.0, [0.0])


def _noisy_instance(template, seed, sigma=0.5):
    s = generate(SynthConfig(template, n=1, sigma=sigma, seed=seed))
    return s.preshapes[0], s.true_theta[0], s.true_delta[0]


@pytest.mark.parametrize("seed", range(5))
def test_estimate_rotation_matches_grid_search(template, template_preshape, seed):
    x, _, _ = _noisy_instance(template, seed)
    delta = np.random.default_rng(seed).random(3)
    theta = estimate_rotation(x, template_preshape, delta)
    ref, ref_val = grid_rotation(template_preshape.coef, x.coef, delta)
    assert cyclic_gap(theta, ref, 2 * np.pi) < 1e-4
    assert alignment_objective(x, template_preshape, theta, delta) <= ref_val + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_solve_reparam_matches_grid_search(template, template_preshape, seed):
    x, true_theta, _ = _noisy_instance(template, seed)
    for j in range(3):
        d = solve_reparam(x.component(j), template_preshape.component(j), true_theta)
        ref, _ = grid_shift(x.coef[j, :, 1:], template_preshape.coef[j, :, 1:], true_theta)
        assert cyclic_gap(d, ref, 1.0) < 1e-4


def test_solve_reparam_on_random_components(rng):
    # unrelated random blocks: the objective can have several local minima
    for _ in range(5):
        a, b = rng.standard_normal((2, 2, 22))
        theta = rng.uniform(0, 2 * np.pi)
        d = solve_reparam(type(random_curve(rng).component(0))(np.zeros(2), a),
                          type(random_curve(rng).component(0))(np.zeros(2), b), theta)
        ref, _ = grid_shift(a, b, theta)
        assert cyclic_gap(d, ref, 1.0) < 1e-4


def test_exact_recovery_of_planted_deformation(template_preshape):
    theta0, delta0 = 2.1, np.array([0.3, 0.72, 0.05])
    x = PreShape(rotate(reparametrize(template_preshape, delta0), theta0).coef)
    assert estimate_rotation(x, template_preshape, delta0) == pytest.approx(theta0, abs=1e-12)
    for j in range(3):
        d = solve_reparam(x.component(j), template_preshape.component(j), theta0)
        assert cyclic_gap(d, delta0[j], 1.0) < 1e-10
    # ICF stops once the objective decrease drops below tol; the objective is
    # quadratic in the parameter error, so the error scales like sqrt(tol)
    res = icf_align(x, template_preshape, rng=0, tol=1e-10)
    assert cyclic_gap(res.theta, theta0, 2 * np.pi) < 1e-5
    assert np.all(cyclic_gap(res.delta, delta0, 1.0) < 1e-5)
    assert res.objective < 1e-10
    assert res.shape.allclose(template_preshape, atol=1e-5)
    tight = icf_align(x, template_preshape, rng=0, tol=1e-24)
    assert cyclic_gap(tight.theta, theta0, 2 * np.pi) < 1e-9


def test_icf_result_is_consistent(template, template_preshape):
    x, _, _ = _noisy_instance(template, 11, sigma=1.0)
    res = icf_align(x, template_preshape, n_starts=5, rng=3, template_id="mu")
    assert res.objective == pytest.approx(alignment_objective(x, template_preshape, res.theta, res.delta), abs=1e-12)
    assert np.all(np.diff(res.history) <= 1e-12)
    assert 0 <= res.theta < 2 * np.pi and np.all((0 <= res.delta) & (res.delta < 1))
    assert res.shape.template_id == "mu"
    # aligned shape is the pre-shape with the deformation undone
    back = rotate(reparametrize(res.shape, res.delta), res.theta)
    assert back.allclose(x, atol=1e-12)
    # undoing the fitted deformation brings the curve as close to the template as the objective says
    gap = np.sum((res.shape.coef - template_preshape.coef) ** 2)
    assert gap == pytest.approx(res.objective, abs=1e-12)


def test_icf_is_deterministic_given_rng(template, template_preshape):
    x, _, _ = _noisy_instance(template, 4)
    a = icf_align(x, template_preshape, rng=123)
    b = icf_align(x, template_preshape, rng=123)
    assert a.theta == b.theta and np.array_equal(a.delta, b.delta)


def test_extra_starts_only(template_preshape):
    x = PreShape(reparametrize(template_preshape, [0.1, 0.2, 0.3]).coef)
    res = icf_align(x, template_preshape, n_starts=0, extra_starts=[np.array([0.1, 0.2, 0.3])])
    assert res.objective < 1e-20
    with pytest.raises(DomainError):
        icf_align(x, template_preshape, n_starts=0)


def test_mismatched_shapes_rejected(rng):
    with pytest.raises(DomainError):
        icf_align(random_preshape(rng, 3, 22), random_preshape(rng, 2, 22))


def test_degenerate_rotation_warns(rng):
    x = random_preshape(rng, 1, 4)
    # a template orthogonal to x in every rotation sense: zero coefficients
    zero = MultiCurve(np.zeros_like(x.coef))
    with pytest.warns(AlignmentWarning):
        assert estimate_rotation(x, zero, [0.0]) == 0.0
    with pytest.warns(AlignmentWarning):
        assert solve_reparam(x.component(0), zero.component(0), 0.0) == 0.0


def test_aligned_shape_is_a_shape(rng):
    x = random_preshape(rng)
    s = aligned_shape(x, 1.0, [0.2, 0.4, 0.6], "t")
    assert isinstance(s, Shape) and abs(s.norm() - 1) < 1e-14


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), theta=st.floats(0, 2 * np.pi), d=st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_objective_invariant_under_joint_deformation(seed, theta, d):
    # deforming both curves by the same rotation leaves the objective unchanged
    rng = np.random.default_rng(seed)
    x, t = random_preshape(rng), random_preshape(rng)
    a = alignment_objective(x, t, 0.4, d)
    b = alignment_objective(rotate(x, theta), rotate(t, theta), 0.4, d)
    assert a == pytest.approx(b, abs=1e-12)
    assert 0.0 <= a <= 4.0 + 1e-12
