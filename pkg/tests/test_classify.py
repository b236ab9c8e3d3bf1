import numpy as np
import pytest

from multishape.classify import (
    ConvergenceWarning,
    TangentDesign,
    build_design,
    cross_validate,
    design_from_shapes,
    fit_group_lasso_logistic,
    fit_pcr_discriminant,
    fit_pls_discriminant,
    group_lasso_objective,
    group_lasso_path,
    lambda_grid,
    lambda_max,
    make_groups,
    pcr_path,
    pls_path,
)
from multishape.errors import DataError, DomainError
from multishape.sphere import estimate_curves
from multishape.synth import scenario2_deform, two_class_sample

from oracles import newton_logistic

P, M = 2, 4  # 20 features


def design(X, y, grouping="gl1"):
    groups, names = make_groups(P, M, grouping)
    return TangentDesign(X, y, groups, names, "multi", P, M)


@pytest.fixture
def logistic_data():
    # seed chosen so that the two classes are not linearly separable (the
    # unpenalized maximum-likelihood estimate exists)
    rng = np.random.default_rng(8)
    X = rng.standard_normal((50, 20))
    beta = 0.3 * rng.standard_normal(20)
    y = (rng.random(50) < 1 / (1 + np.exp(-(0.2 + X @ beta)))).astype(int)
    return X, y


def separable(rng, n=40):
    X = 0.1 * rng.standard_normal((n, 20))
    y = np.arange(n) % 2
    X[:, 0] += np.where(y == 1, 1.0, -1.0)
    return X, y


def test_groups_partition_features():
    for grouping, count, size in (("gl1", 2, 10), ("gl2", 4, 5)):
        groups, names = make_groups(P, M, grouping)
        assert len(groups) == count and all(len(g) == size for g in groups)
        np.testing.assert_array_equal(np.sort(np.concatenate(groups)), np.arange(20))
    assert make_groups(3, 22, "gl2")[1] == ["X1", "Y1", "X2", "Y2", "X3", "Y3"]
    with pytest.raises(DomainError):
        make_groups(P, M, "nope")


def test_design_validation(logistic_data):
    X, y = logistic_data
    with pytest.raises(DataError):
        TangentDesign(X[:, :19], y, p=P, M=M)
    with pytest.raises(DataError):
        TangentDesign(X, y + 1, p=P, M=M)
    with pytest.raises(DataError):
        TangentDesign(X, y, [np.arange(10)], ["a"], p=P, M=M)


def test_lambda_grid(logistic_data):
    d = design(*logistic_data)
    g = lambda_grid(d)
    assert len(g) == 150 and g[0] == lambda_max(d) and g[-1] == 0.0
    np.testing.assert_allclose(g[1:-1] / g[:-2], 0.96)


@pytest.mark.parametrize("grouping", ["gl1", "gl2"])
def test_lambda_max_zeroes_every_group(logistic_data, grouping):
    d = design(*logistic_data, grouping)
    lmax = lambda_max(d)
    m = fit_group_lasso_logistic(d, lmax)
    assert np.all(m.beta == 0.0) and m.active_groups() == []
    ybar = d.labels.mean()
    assert m.beta0 == pytest.approx(np.log(ybar / (1 - ybar)), abs=1e-10)
    assert fit_group_lasso_logistic(d, 0.9 * lmax).active_groups() != []


def test_zero_penalty_matches_newton_oracle(logistic_data):
    X, y = logistic_data
    b0, b, ok = newton_logistic(X, y.astype(float))
    assert ok
    # BCD converges linearly, so the coefficient error scales like the square
    # root of the objective tolerance; the default 1e-8 gives about 1e-3 here
    m = fit_group_lasso_logistic(design(X, y), 0.0, tol=1e-15)
    assert m.converged
    assert np.linalg.norm(np.append(m.beta, m.beta0) - np.append(b, b0)) < 1e-6


def test_group_lasso_kkt_conditions(logistic_data):
    X, y = logistic_data
    d = design(X, y, "gl2")
    lam = 0.3 * lambda_max(d)
    m = fit_group_lasso_logistic(d, lam, tol=1e-14)
    p = 1 / (1 + np.exp(-m.decision_function(X)))
    grad = X.T @ (p - y) / len(y)
    assert abs(np.mean(p - y)) < 1e-8
    for g in d.groups:
        w = np.sqrt(len(g))
        bg = m.beta[g]
        if np.any(bg):
            np.testing.assert_allclose(grad[g], -lam * w * bg / np.linalg.norm(bg), atol=1e-6)
        else:
            assert np.linalg.norm(grad[g]) <= lam * w + 1e-8


def test_group_lasso_objective_not_worse_than_null(logistic_data):
    d = design(*logistic_data)
    y = d.labels
    null0 = np.log(y.mean() / (1 - y.mean()))
    for lam in lambda_grid(d)[::15]:
        m = fit_group_lasso_logistic(d, lam)
        obj = group_lasso_objective(d.X, y, m.beta0, m.beta, lam, d.groups)
        assert np.isfinite(obj)
        assert obj <= group_lasso_objective(d.X, y, null0, np.zeros(20), lam, d.groups) + 1e-12


def test_group_lasso_separable_small_penalty(rng):
    X, y = separable(rng)
    m = fit_group_lasso_logistic(design(X, y), 1e-3 * lambda_max(design(X, y)))
    assert np.mean(m.predict(X) == y) == 1.0


def test_group_lasso_rejects_negative_penalty(logistic_data):
    with pytest.raises(DomainError):
        fit_group_lasso_logistic(design(*logistic_data), -1.0)


def test_group_lasso_path_saturation(rng):
    X, y = separable(rng)
    d = design(X, y)
    models = group_lasso_path(d, lambda_grid(d))
    assert len(models) == 150
    assert [m.hyper for m in models] == list(lambda_grid(d))


def test_pls_single_component_separates(rng):
    X, y = separable(rng)
    m = fit_pls_discriminant(design(X, y), 1)
    assert np.mean(m.predict(X) == y) == 1.0


def _ols_scores(X, y):
    Z = np.hstack([np.ones((len(y), 1)), X])
    coef, *_ = np.linalg.lstsq(Z, y.astype(float), rcond=None)
    return Z @ coef


@pytest.mark.parametrize("path", [pls_path, pcr_path])
def test_full_rank_matches_ols(logistic_data, path):
    X, y = logistic_data
    xmean, ymean, betas = path(X, y.astype(float), 20)
    assert len(betas) == 20
    fitted = (X - xmean) @ betas[-1] + ymean
    np.testing.assert_allclose(fitted, _ols_scores(X, y), atol=1e-8)


@pytest.mark.parametrize("fit", [fit_pls_discriminant, fit_pcr_discriminant])
def test_threshold_is_class_mean_midpoint(logistic_data, fit):
    X, y = logistic_data
    m = fit(design(X, y), 3)
    s = m.decision_function(X)
    assert s[y == 1].mean() + s[y == 0].mean() == pytest.approx(0.0, abs=1e-10)
    assert s[y == 1].mean() > 0


def test_zero_variance_columns_are_harmless(logistic_data):
    X, y = logistic_data
    X = X.copy()
    X[:, 5] = 3.0
    X[:, 7] = 0.0
    for fit in (fit_pls_discriminant, fit_pcr_discriminant):
        m = fit(design(X, y), 4)
        assert np.all(np.isfinite(m.beta)) and np.isfinite(m.beta0)


def test_component_count_truncated_with_warning(rng):
    X = np.zeros((10, 20))
    X[:, :2] = rng.standard_normal((10, 2))
    y = np.arange(10) % 2
    with pytest.warns(ConvergenceWarning):
        m = fit_pcr_discriminant(design(X, y), 5)
    assert m.hyper == 2


def test_pcr_picks_informative_high_variance_direction(rng):
    n = 200
    y = np.arange(n) % 2
    X = 0.1 * rng.standard_normal((n, 20))
    X[:, 3] += 5.0 * (2 * y - 1) + 0.1 * rng.standard_normal(n)
    m = fit_pcr_discriminant(design(X, y), 1)
    assert np.argmax(np.abs(m.beta)) == 3
    assert np.mean(m.predict(X) == y) == 1.0


def test_duplicate_rows_get_identical_scores(logistic_data):
    X, y = logistic_data
    X = np.vstack([X, X[:3]])
    y = np.append(y, y[:3])
    for fit in (fit_pls_discriminant, fit_pcr_discriminant):
        s = fit(design(X, y), 3).decision_function(X)
        np.testing.assert_array_equal(s[:3], s[-3:])


def test_constant_shift_only_moves_intercept(logistic_data):
    X, y = logistic_data
    a = fit_pls_discriminant(design(X, y), 3)
    b = fit_pls_discriminant(design(X + 7.0, y), 3)
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-10)
    np.testing.assert_array_equal(a.predict(X), b.predict(X + 7.0))


def test_discriminant_needs_both_classes(logistic_data):
    X, _ = logistic_data
    with pytest.raises(DataError):
        fit_pls_discriminant(design(X, np.zeros(50, int)), 1)
    with pytest.raises(DomainError):
        fit_pls_discriminant(design(X, np.arange(50) % 2), 0)


def test_cv_folds_partition_samples(logistic_data):
    d = design(*logistic_data)
    rep = cross_validate(d, "pls", k=5, seed=1)
    allidx = np.sort(np.concatenate(rep.test_folds))
    np.testing.assert_array_equal(allidx, np.arange(50))
    assert len(rep.fold_accuracies) == 5 and len(rep.selected) == 5
    assert rep.to_dict()["design"] == "multi"


def test_cv_chance_level_on_independent_labels():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 20))
    y = np.arange(200) % 2
    for method in ("pls", "pcr"):
        acc = cross_validate(design(X, y), method, k=10, seed=0).mean_accuracy
        assert 40.0 <= acc <= 60.0


@pytest.mark.parametrize("method", ["gl1", "gl2", "pls", "pcr"])
def test_cv_separable_design(rng, method):
    X, y = separable(rng, 40)
    rep = cross_validate(design(X, y), method, k=4, seed=0)
    assert rep.mean_accuracy == 100.0


def test_cv_is_deterministic(logistic_data):
    d = design(*logistic_data)
    a = cross_validate(d, "pcr", k=5, seed=4)
    b = cross_validate(d, "pcr", k=5, seed=4)
    assert a.fold_accuracies == b.fold_accuracies and a.selected == b.selected


def test_cv_argument_errors(logistic_data):
    d = design(*logistic_data)
    with pytest.raises(DomainError):
        cross_validate(d, "lda")
    with pytest.raises(DomainError):
        cross_validate(d, "pls", k=1)
    y = np.zeros(50, int)
    y[:3] = 1
    with pytest.raises(DataError):
        cross_validate(design(d.X, y), "pls", k=5)


def test_multi_design_is_centered_at_the_mean(template):
    curves, labels = two_class_sample(template, n=30, seed=2)
    res = estimate_curves(scenario2_deform(curves, 1), xi=1e-8, seed=0)
    d = design_from_shapes(res.shapes, res.mean.mean, labels)
    assert d.X.shape == (30, 138)
    scale = np.max(np.abs(d.X))
    assert np.max(np.abs(d.X.mean(axis=0))) < 1e-6 * scale


def test_build_design_schemes(template):
    curves, labels = two_class_sample(template, n=12, seed=2)
    raw = build_design(curves, labels, scheme="raw")
    np.testing.assert_array_equal(raw.X[0], curves[0].to_vector())
    uni = build_design(curves, labels, scheme="uni", grouping="gl2")
    assert uni.X.shape == (12, 138) and len(uni.groups) == 6
    with pytest.raises(DomainError):
        build_design(curves, labels, scheme="pixels")
