"""Binary classification of shapes from tangent-space coordinates.

Predictors are flattened coefficient vectors laid out as ``(p, 2, M + 1)``:
for every component and coordinate, the constant coefficient followed by the
``M`` Fourier coefficients. Four linear classifiers are provided:

* ``gl1`` / ``gl2`` -- group-lasso logistic regression with one group per
  component or per coordinate function, fitted by block coordinate descent;
* ``pls`` / ``pcr`` -- linear discriminants whose coefficient vector comes
  from partial least squares (NIPALS) or principal component regression of
  the 0/1 labels, thresholded at the midpoint of the two class score means.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .errors import DataError, DomainError
from .fourier import MultiCurve
from .sphere import estimate_curves, log_map

log = logging.getLogger(__name__)

SCHEMES = ("multi", "uni", "raw")
METHODS = ("gl1", "gl2", "pls", "pcr")
N_LAMBDA = 150
LAMBDA_RATIO = 0.96
SATURATION = 1e-3


class ConvergenceWarning(RuntimeWarning):
    pass


# -- designs ---------------------------------------------------------------------

def make_groups(p: int, M: int, grouping: str) -> tuple[list[np.ndarray], list[str]]:
    """Partition of the ``p * 2 * (M + 1)`` feature indices.

    ``"gl1"`` / ``"component"``: one group per component. ``"gl2"`` /
    ``"coordinate"``: one group per coordinate function.
    """
    idx = np.arange(p * 2 * (M + 1)).reshape(p, 2, M + 1)
    if grouping in ("gl1", "component"):
        return [idx[j].ravel() for j in range(p)], [f"C{j + 1}" for j in range(p)]
    if grouping in ("gl2", "coordinate"):
        return (
            [idx[j, r] for j in range(p) for r in range(2)],
            [f"{'XY'[r]}{j + 1}" for j in range(p) for r in range(2)],
        )
    raise DomainError(f"unknown grouping {grouping!r}")


@dataclass(frozen=True, eq=False)
class TangentDesign:
    X: np.ndarray
    labels: np.ndarray
    groups: list = field(default_factory=list)
    group_names: list = field(default_factory=list)
    scheme: str = "multi"
    p: int = 1
    M: int = 2

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(f"design {X.shape} does not match {y.shape[0]} labels")
        if not np.all(np.isin(y, (0, 1))):
            raise DataError("labels must be 0/1")
        if X.shape[1] != self.p * 2 * (self.M + 1):
            raise DataError(f"feature dimension {X.shape[1]} != p*(2M+2) = {self.p * 2 * (self.M + 1)}")
        groups = self.groups or make_groups(self.p, self.M, "gl1")[0]
        names = self.group_names or [f"G{k + 1}" for k in range(len(groups))]
        allidx = np.sort(np.concatenate(groups))
        if not np.array_equal(allidx, np.arange(X.shape[1])):
            raise DataError("groups must partition the feature indices")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", y.astype(int))
        object.__setattr__(self, "groups", [np.asarray(g) for g in groups])
        object.__setattr__(self, "group_names", list(names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def with_grouping(self, grouping: str) -> "TangentDesign":
        groups, names = make_groups(self.p, self.M, grouping)
        return TangentDesign(self.X, self.labels, groups, names, self.scheme, self.p, self.M)

    def subset(self, rows) -> "TangentDesign":
        return TangentDesign(
            self.X[rows], self.labels[rows], self.groups, self.group_names, self.scheme, self.p, self.M
        )


def tangent_features(shapes: Sequence[MultiCurve], mu: MultiCurve) -> np.ndarray:
    """Rows ``Vec(log_mu(shape_i))``."""
    return np.stack([log_map(s, mu).vector.to_vector() for s in shapes])


def design_from_shapes(shapes, mu, labels, grouping="gl1", scheme="multi") -> TangentDesign:
    """Design of log-mapped shapes at ``mu`` (already aligned to it)."""
    if shapes and shapes[0].coef.shape != mu.coef.shape:
        raise DataError("shape and mean have different p or M")
    groups, names = make_groups(mu.p, mu.M, grouping)
    return TangentDesign(tangent_features(shapes, mu), labels, groups, names, scheme, mu.p, mu.M)


def build_design(
    curves: Sequence[MultiCurve],
    labels,
    scheme: str = "multi",
    grouping: str = "gl1",
    xi: float = 1e-4,
    seed: int = 0,
    **align_kwargs,
) -> TangentDesign:
    """Predictor matrix for smoothed curves under one of three schemes.

    ``multi``: joint pipeline on all components, log map at the estimated
    mean. ``uni``: the pipeline run separately on each component (``p = 1``),
    the ``p`` tangent projections concatenated. ``raw``: coefficients of the
    smoothed curves as they are.
    """
    scheme = scheme.lower()
    if scheme not in SCHEMES:
        raise DomainError(f"unknown design scheme {scheme!r}")
    if not curves:
        raise DataError("no curves")
    p, M = curves[0].p, curves[0].M
    groups, names = make_groups(p, M, grouping)
    if scheme == "raw":
        X = np.stack([c.to_vector() for c in curves])
    elif scheme == "multi":
        res = estimate_curves(curves, xi=xi, seed=seed, **align_kwargs)
        X = tangent_features(res.shapes, res.mean.mean)
    else:
        blocks = []
        for j in range(p):
            res = estimate_curves([c.subcurve(j) for c in curves], xi=xi, seed=seed + j, **align_kwargs)
            blocks.append(tangent_features(res.shapes, res.mean.mean))
        X = np.hstack(blocks)
    return TangentDesign(X, labels, groups, names, scheme, p, M)


# -- models ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Linear classifier ``1[beta0 + x . beta > 0]``.

    For logistic models ``beta0 + x . beta`` is the log-odds (threshold 0.5
    on the probability); for discriminants the class-mean midpoint has been
    folded into ``beta0``.
    """

    method: str
    beta0: float
    beta: np.ndarray
    hyper: float
    groups: list = field(default_factory=list)
    converged: bool = True

    def decision_function(self, X) -> np.ndarray:
        return self.beta0 + np.asarray(X, dtype=float) @ self.beta

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0.0).astype(int)

    def active_groups(self) -> list[int]:
        return [k for k, g in enumerate(self.groups) if np.any(self.beta[g] != 0.0)]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_nll(X, y, beta0, beta) -> float:
    z = beta0 + X @ beta
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _group_weights(groups):
    return np.array([np.sqrt(len(g)) for g in groups])


def group_lasso_objective(X, y, beta0, beta, lam, groups) -> float:
    w = _group_weights(groups)
    pen = sum(wk * np.linalg.norm(beta[g]) for wk, g in zip(w, groups))
    return logistic_nll(X, y, beta0, beta) + lam * pen


def lambda_max(design: TangentDesign, groups=None) -> float:
    """Smallest penalty at which every group is zero at the optimum."""
    groups = design.groups if groups is None else groups
    X, y = design.X, design.labels.astype(float)
    grad = X.T @ (y.mean() - y) / design.n
    return float(max(np.linalg.norm(grad[g]) / np.sqrt(len(g)) for g in groups))


def lambda_grid(design: TangentDesign, groups=None) -> np.ndarray:
    """``{0.96^l lambda_max, l = 0..148} U {0}`` in decreasing order."""
    lmax = lambda_max(design, groups)
    return np.append(lmax * LAMBDA_RATIO ** np.arange(N_LAMBDA - 1), 0.0)


def _null_intercept(y):
    ybar = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
    return np.log(ybar / (1.0 - ybar))


def _secular_radius(c, lam_eig, s):
    """Root ``r > 0`` of ``sum_i c_i^2 / (lam_i r + s)^2 = 1`` (convex, decreasing)."""
    c2 = c * c
    r = 0.0
    for _ in range(100):
        d = lam_eig * r + s
        f = np.sum(c2 / (d * d)) - 1.0
        fp = -2.0 * np.sum(c2 * lam_eig / (d * d * d))
        if fp == 0.0:
            break
        step = f / fp
        r -= step
        if abs(step) <= 1e-14 * max(r, 1e-300):
            break
    return r


def _block_solve(beta_g, grad_g, eig, V, s):
    """Minimise ``grad.d + d^T H d / 2 + s ||beta + d||`` with ``H = V diag(eig) V^T``.

    Setting ``b = beta + d`` the stationarity condition reads
    ``(H + s / ||b|| I) b = H beta - grad``; in the eigenbasis the norm of
    ``b`` solves a scalar secular equation.
    """
    c = V.T @ (V @ (eig * (V.T @ beta_g)) - grad_g)
    if s == 0.0:
        return V @ (c / eig)
    # the relative slack makes lambda = lambda_max zero its maximising group
    # despite roundoff in c
    if np.linalg.norm(c) <= s * (1.0 + 1e-10):
        return np.zeros_like(beta_g)
    r = _secular_radius(c, eig, s)
    return V @ (c / (eig + s / r))


def _bcd(X, y, lam, groups, beta0, beta, tol, max_sweeps):
    n = X.shape[0]
    w = _group_weights(groups)
    Xg = [X[:, g] for g in groups]
    z = beta0 + X @ beta

    def loss(zz):
        return float(np.mean(np.logaddexp(0.0, zz) - y * zz))

    pen = [lam * w[k] * np.linalg.norm(beta[g]) for k, g in enumerate(groups)]
    obj = loss(z) + sum(pen)
    sign = 2.0 * y - 1.0
    converged = False
    for sweep in range(max_sweeps):
        # the intercept is updated jointly with every group
        for k, g in enumerate(groups):
            xg, s = Xg[k], lam * w[k]
            pr = _sigmoid(z)
            r = pr - y
            wt = np.maximum(pr * (1.0 - pr), 1e-8)
            g0, gg = r.mean(), xg.T @ r / n
            h00 = wt.mean()
            h0g = xg.T @ wt / n
            # eliminate the intercept step: Schur complement of h00
            H = (xg.T * wt) @ xg / n - np.outer(h0g, h0g) / h00
            grad = gg - h0g * (g0 / h00)
            ev, V = np.linalg.eigh(H)
            ev = np.maximum(ev, 1e-10 * max(ev[-1], 1e-300))
            bg = beta[g]
            d = _block_solve(bg, grad, ev, V, s) - bg
            d0 = -(g0 + h0g @ d) / h00
            # Armijo backtracking on the composite objective
            f0 = loss(z)
            xd = xg @ d + d0
            decrease = g0 * d0 + gg @ d + s * (np.linalg.norm(bg + d) - pen[k])
            t = 1.0
            while True:
                pt = s * np.linalg.norm(bg + t * d)
                if loss(z + t * xd) + pt <= f0 + pen[k] + 1e-4 * t * decrease or t < 1e-10:
                    break
                t *= 0.5
            beta[g] = bg + t * d
            beta0 += t * d0
            z += t * xd
            pen[k] = pt
        new_obj = loss(z) + sum(pen)
        rel = abs(obj - new_obj) / max(abs(obj), 1e-300)
        obj = new_obj
        if rel < tol:
            converged = True
            break
        if lam == 0.0 and np.all(sign * z > 0):
            # separated training data: the unpenalized loss has no minimizer
            break
    return beta0, beta, converged


def fit_group_lasso_logistic(
    design: TangentDesign,
    lam: float,
    groups=None,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
    init: Optional[tuple[float, np.ndarray]] = None,
    method: str = "gl",
) -> ClassifierModel:
    """Penalized logistic regression ``NLL/n + lam sum_g sqrt(|g|) ||beta_g||``.

    Block coordinate descent over the groups. Each block step is a proximal
    Newton step in the group coefficients and the unpenalized intercept
    together (the logistic loss replaced by its local quadratic model, the
    intercept eliminated through the Schur complement, the group-lasso
    subproblem solved exactly) followed by Armijo backtracking. Converged when a sweep changes the objective
    by less than ``tol`` relative.
    """
    if lam < 0:
        raise DomainError(f"penalty must be nonnegative, got {lam}")
    groups = design.groups if groups is None else groups
    X, y = design.X, design.labels.astype(float)
    if init is None:
        beta0, beta = _null_intercept(y), np.zeros(X.shape[1])
    else:
        beta0, beta = float(init[0]), np.array(init[1], dtype=float)
    beta0, beta, converged = _bcd(X, y, lam, groups, beta0, beta, tol, max_sweeps)
    if not converged:
        warnings.warn(f"group lasso did not converge at lambda={lam:.3g}", ConvergenceWarning)
    return ClassifierModel(method, float(beta0), beta, float(lam), list(groups), converged)


def group_lasso_path(
    design: TangentDesign, lambdas, groups=None, method="gl", saturation=SATURATION, **kw
) -> list[ClassifierModel]:
    """Warm-started fits along a decreasing penalty sequence.

    Once the training loss drops below ``saturation`` times the null loss
    the data are (nearly) separated and smaller penalties only inflate the
    coefficients, so the remaining grid points reuse the last fit with
    their own ``hyper`` recorded. Pass ``saturation=0`` to fit every point.
    """
    groups = design.groups if groups is None else groups
    y = design.labels.astype(float)
    null = logistic_nll(design.X, y, _null_intercept(y), np.zeros(design.X.shape[1]))
    models, init, last = [], None, None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for lam in lambdas:
            if last is not None:
                models.append(ClassifierModel(method, last.beta0, last.beta, float(lam), list(groups), last.converged))
                continue
            m = fit_group_lasso_logistic(design, lam, groups, init=init, method=method, **kw)
            models.append(m)
            init = (m.beta0, m.beta.copy())
            if logistic_nll(design.X, y, m.beta0, m.beta) < saturation * null:
                last = m
    return models


def _midpoint_model(method, X, y, xmean, ymean, beta, hyper):
    scores = (X - xmean) @ beta + ymean
    m1, m0 = scores[y == 1].mean(), scores[y == 0].mean()
    sign = 1.0 if m1 >= m0 else -1.0
    threshold = 0.5 * (m1 + m0)
    beta0 = sign * (ymean - xmean @ beta - threshold)
    return ClassifierModel(method, float(beta0), sign * beta, float(hyper))


def _check_rows(design):
    y = design.labels
    if design.n < 2 or y.min() == y.max():
        raise DataError("discriminant fit needs both classes in the training data")


def pls_path(X, y, max_components: int):
    """NIPALS PLS1 of centered ``y`` on centered ``X``.

    Returns the coefficient vectors for ``1..K`` components (``K`` may be
    smaller than requested when the residual covariance vanishes).
    """
    xmean, ymean = X.mean(axis=0), y.mean()
    E = X - xmean
    f = y - ymean
    W, P, q = [], [], []
    scale = max(np.linalg.norm(X.T @ (y - ymean)), 1e-300)
    for _ in range(max_components):
        w = E.T @ f
        nw = np.linalg.norm(w)
        if nw <= 1e-12 * scale:
            break
        w /= nw
        t = E @ w
        tt = t @ t
        if tt <= 1e-24:
            break
        pk = E.T @ t / tt
        qk = f @ t / tt
        E = E - np.outer(t, pk)
        f = f - qk * t
        W.append(w)
        P.append(pk)
        q.append(qk)
    if not W:
        return xmean, ymean, []
    W, P, q = np.array(W).T, np.array(P).T, np.array(q)
    betas = []
    for k in range(1, W.shape[1] + 1):
        Wk, Pk = W[:, :k], P[:, :k]
        betas.append(Wk @ np.linalg.solve(Pk.T @ Wk, q[:k]))
    return xmean, ymean, betas


def pcr_path(X, y, max_components: int):
    """Principal component regression coefficients for ``1..K`` components."""
    xmean, ymean = X.mean(axis=0), y.mean()
    U, s, Vt = np.linalg.svd(X - xmean, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    K = min(max_components, rank)
    coef = (U[:, :K].T @ (y - ymean)) / s[:K]
    betas = list(np.cumsum(Vt[:K].T * coef, axis=1).T)
    return xmean, ymean, betas


def _discriminant(method, design, n_components, path_fn):
    if n_components < 1:
        raise DomainError("n_components must be >= 1")
    _check_rows(design)
    X, y = design.X, design.labels.astype(float)
    xmean, ymean, betas = path_fn(X, y, n_components)
    if len(betas) < n_components:
        warnings.warn(
            f"{method}: only {len(betas)} components available, requested {n_components}",
            ConvergenceWarning,
        )
    beta = betas[-1] if betas else np.zeros(X.shape[1])
    return _midpoint_model(method, X, design.labels, xmean, ymean, beta, len(betas))


def fit_pls_discriminant(design: TangentDesign, n_components: int) -> ClassifierModel:
    """PLS discriminant with ``n_components`` latent components."""
    return _discriminant("pls", design, n_components, pls_path)


def fit_pcr_discriminant(design: TangentDesign, n_components: int) -> ClassifierModel:
    """PCR discriminant on the leading ``n_components`` principal components."""
    return _discriminant("pcr", design, n_components, pcr_path)


# -- cross-validation -------------------------------------------------------------

@dataclass(frozen=True)
class CVReport:
    method: str
    scheme: str
    scenario: str
    fold_accuracies: list
    selected: list
    test_folds: list

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "design": self.scheme,
            "scenario": self.scenario,
            "mean_accuracy": self.mean_accuracy,
            "fold_accuracies": [float(a) for a in self.fold_accuracies],
            "selected": [float(s) for s in self.selected],
        }


def default_hyper_grid(design: TangentDesign, method: str, n_train: Optional[int] = None):
    """Component counts ``1..min(2pM - 1, n_train - 1)`` for PLS/PCR; ``None``
    (a per-fold penalty grid) for the group-lasso methods."""
    if method in ("gl1", "gl2"):
        return None
    n_train = design.n if n_train is None else n_train
    kmax = max(1, min(2 * design.p * design.M - 1, n_train - 1, design.X.shape[1]))
    return np.arange(1, kmax + 1)


def _path_models(method, design, hyper_grid):
    """Models for every grid value (index-aligned with ``hyper_grid``)."""
    if method in ("gl1", "gl2"):
        return group_lasso_path(design, hyper_grid, method=method)
    _check_rows(design)
    path_fn = pls_path if method == "pls" else pcr_path
    X, y = design.X, design.labels.astype(float)
    xmean, ymean, betas = path_fn(X, y, int(max(hyper_grid)))
    models = []
    for k in hyper_grid:
        beta = betas[min(int(k), len(betas)) - 1] if betas else np.zeros(X.shape[1])
        models.append(_midpoint_model(method, X, design.labels, xmean, ymean, beta, k))
    return models


def _errors(models, X, y):
    return np.array([np.mean(m.predict(X) != y) for m in models])


def select_hyper(design: TangentDesign, method: str, hyper_grid, k: int, seed: int):
    """Grid value with the smallest ``k``-fold CV error (first one on ties)."""
    k = min(k, int(np.bincount(design.labels, minlength=2).min()))
    if k < 2:
        return hyper_grid[0]
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed % 2**32)
    err = np.zeros(len(hyper_grid))
    for tr, te in skf.split(design.X, design.labels):
        models = _path_models(method, design.subset(tr), hyper_grid)
        err += _errors(models, design.X[te], design.labels[te]) * len(te)
    return hyper_grid[int(np.argmin(err))]


def fit_model(design: TangentDesign, method: str, hyper) -> ClassifierModel:
    if method == "pls":
        return fit_pls_discriminant(design, int(hyper))
    if method == "pcr":
        return fit_pcr_discriminant(design, int(hyper))
    if method in ("gl1", "gl2"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            return fit_group_lasso_logistic(design, float(hyper), method=method)
    raise DomainError(f"unknown method {method!r}")


def _run_fold(design, method, hyper_grid, inner_k, seed, fold, tr, te):
    train = design.subset(tr)
    if hyper_grid is None:
        if method in ("gl1", "gl2"):
            grid = lambda_grid(train)
        else:
            inner_n = len(tr) - int(np.ceil(len(tr) / inner_k))
            grid = default_hyper_grid(train, method, inner_n)
    else:
        grid = np.asarray(hyper_grid)
    hyper = select_hyper(train, method, grid, inner_k, seed + 7919 * (fold + 1))
    model = fit_model(train, method, hyper)
    acc = 100.0 * float(np.mean(model.predict(design.X[te]) == design.labels[te]))
    log.info("%s fold %d: hyper=%s accuracy=%.2f", method, fold + 1, hyper, acc)
    return acc, float(hyper)


def cross_validate(
    design: TangentDesign,
    method: str,
    hyper_grid=None,
    k: int = 10,
    seed: int = 0,
    inner_k: int = 5,
    scenario: str = "",
    n_jobs: int = 1,
) -> CVReport:
    """Stratified ``k``-fold test accuracy with nested hyperparameter choice.

    Inside every outer training fold the hyperparameter is picked by an
    inner ``inner_k``-fold CV over ``hyper_grid`` (component counts for
    PLS/PCR, penalties for group lasso; the default penalty grid is built
    from the outer training fold), then the model is refit on the whole
    training fold and scored on the held-out fold. Folds run in
    ``n_jobs`` worker processes; the result does not depend on ``n_jobs``.
    """
    method = method.lower()
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}")
    if k < 2:
        raise DomainError("k must be >= 2")
    if method in ("gl1", "gl2"):
        design = design.with_grouping(method)
    counts = np.bincount(design.labels, minlength=2)
    if counts.min() < k:
        raise DataError(f"cannot stratify {k} folds with class counts {counts.tolist()}")
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed % 2**32)
    splits = list(skf.split(design.X, design.labels))
    jobs = [(design, method, hyper_grid, inner_k, seed, f, tr, te) for f, (tr, te) in enumerate(splits)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            out = list(pool.map(_run_fold, *zip(*jobs)))
    else:
        out = [_run_fold(*job) for job in jobs]
    return CVReport(
        method, design.scheme, scenario,
        [a for a, _ in out], [h for _, h in out], [np.sort(te) for _, te in splits],
    )
