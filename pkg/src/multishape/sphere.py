"""Geometry of the unit Hilbert sphere and the interlaced estimation pipeline.

Everything works on flattened coefficient vectors: the coefficient inner
product equals the ``H^p`` inner product, so the sphere of pre-shapes is the
ordinary unit sphere of ``R^{p (2M + 2)}`` intersected with the centered
subspace (which log/exp maps and tangent averages never leave).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .deformation import (
    AlignmentResult,
    DeformationParams,
    PreShape,
    Shape,
    center_and_scale,
    icf_align,
)
from .errors import AntipodalError, DataError, NumericalError
from .fourier import BasisSpec, MultiCurve, inner_product
from .ingest import RawMultiContour, fit_curve

log = logging.getLogger(__name__)

ANTIPODAL_LOG = 1e-6
ANTIPODAL_GUARD = 1e-3
SMALL_ANGLE = 1e-8
TANGENT_ATOL = 1e-9
ETA_MONOTONE_ATOL = 1e-10


class GeometryWarning(RuntimeWarning):
    pass


def _angle(cosw: float, perp_norm: float) -> float:
    return float(np.arctan2(perp_norm, cosw))


def geodesic_distance(f: MultiCurve, g: MultiCurve) -> float:
    """Great-circle distance ``arccos <f, g>`` of unit-norm curves.

    Evaluated as ``atan2(|f - <f, g> g|, <f, g>)``, which equals the arccos
    form on the sphere but keeps full precision for nearly equal or nearly
    antipodal curves.
    """
    c = inner_product(f, g)
    return _angle(c, float(np.linalg.norm(f.coef - c * g.coef)))


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Element of the tangent space at ``base`` (``<vector, base> = 0``)."""

    vector: MultiCurve
    base: MultiCurve

    def __post_init__(self):
        ip = inner_product(self.vector, self.base)
        if abs(ip) > TANGENT_ATOL * max(1.0, self.vector.norm()):
            raise DataError(f"vector is not tangent at its base point (<v, mu> = {ip:.3g})")

    def norm(self) -> float:
        return self.vector.norm()


def log_map(f: MultiCurve, mu: MultiCurve) -> TangentVector:
    """Riemannian logarithm ``(w / sin w) (f - cos(w) mu)`` with ``w = d(f, mu)``."""
    cosw = inner_product(f, mu)
    u = f.coef - cosw * mu.coef
    nu = float(np.sqrt(np.sum(u * u)))
    w = _angle(cosw, nu)
    if w > np.pi - ANTIPODAL_LOG:
        raise AntipodalError(f"log map undefined: point is antipodal to the base (d = {w:.9f})")
    if w < SMALL_ANGLE:
        return TangentVector(MultiCurve(np.zeros_like(mu.coef)), mu)
    # sin(w) = |f - cos(w) mu| on the unit sphere
    coef = (w / nu) * u
    # remove the roundoff component along mu
    coef -= np.sum(coef * mu.coef) * mu.coef
    return TangentVector(MultiCurve(coef), mu)


def exp_map(v: TangentVector | MultiCurve, mu: MultiCurve) -> PreShape:
    """Riemannian exponential ``cos(|v|) mu + sin(|v|) v / |v|``."""
    vec = v.vector if isinstance(v, TangentVector) else v
    nv = vec.norm()
    if nv == 0.0:
        return PreShape(mu.coef)
    coef = np.cos(nv) * mu.coef + (np.sin(nv) / nv) * vec.coef
    coef /= np.sqrt(np.sum(coef * coef))
    return PreShape(coef)


def _log_rows(X: np.ndarray, mu: np.ndarray):
    """Row-wise log map of unit vectors ``X`` at ``mu``; also returns distances."""
    cosw = X @ mu
    U = X - cosw[:, None] * mu
    nu = np.linalg.norm(U, axis=1)
    w = np.arctan2(nu, cosw)
    scale = np.zeros_like(w)
    big = w >= SMALL_ANGLE
    scale[big] = w[big] / nu[big]
    return scale[:, None] * U, w


@dataclass(frozen=True)
class FrechetMeanResult:
    mean: PreShape
    variance: float
    iterations: int
    converged: bool
    tangent_norm: float
    n_excluded: int = 0


def frechet_objective(shapes: Sequence[MultiCurve], mu: MultiCurve) -> float:
    """Mean squared geodesic distance ``(1/n) sum_i d(shape_i, mu)^2``."""
    return float(np.mean([geodesic_distance(s, mu) ** 2 for s in shapes]))


def frechet_mean(
    shapes: Sequence[MultiCurve],
    tol: float = 1e-10,
    max_iter: int = 200,
    init: Optional[MultiCurve] = None,
) -> FrechetMeanResult:
    """Intrinsic (Karcher) mean on the sphere by iterated tangent averaging.

    Each step maps the shapes to the tangent space at the current estimate,
    averages them and maps the average back with the exponential map. Stops
    when the tangent average has norm below ``tol``. Shapes within ``1e-3``
    of the antipode of the current estimate are left out of that step's
    average (with a :class:`GeometryWarning`).

    The starting point is ``init`` if given, else the normalized Euclidean
    average (or the first shape if that average vanishes).
    """
    if len(shapes) == 0:
        raise DataError("frechet_mean needs at least one shape")
    ref = shapes[0]
    X = np.stack([s.coef.ravel() for s in shapes])
    if np.all(X == X[0]):
        return FrechetMeanResult(PreShape(ref.coef), 0.0, 0, True, 0.0, 0)
    if init is not None:
        mu = np.array(init.coef, dtype=float).ravel()
    else:
        mu = X.mean(axis=0)
        nm = np.linalg.norm(mu)
        mu = mu / nm if nm > 1e-8 else X[0].copy()
    mu /= np.linalg.norm(mu)

    converged = False
    n_excluded = 0
    tnorm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        V, w = _log_rows(X, mu)
        keep = w <= np.pi - ANTIPODAL_GUARD
        n_excluded = int(np.sum(~keep))
        if n_excluded:
            warnings.warn(
                f"{n_excluded} shape(s) near the antipode of the running mean were skipped",
                GeometryWarning,
            )
        if not np.any(keep):
            raise NumericalError("every shape is antipodal to the running mean")
        v = V[keep].mean(axis=0)
        tnorm = float(np.linalg.norm(v))
        if tnorm < tol:
            converged = True
            break
        mu = np.cos(tnorm) * mu + (np.sin(tnorm) / tnorm) * v
        mu /= np.linalg.norm(mu)
    if not converged:
        V, w = _log_rows(X, mu)
        tnorm = float(np.linalg.norm(V.mean(axis=0)))
        log.warning("Karcher iteration did not converge in %d steps (|v| = %.3g)", max_iter, tnorm)
    _, w = _log_rows(X, mu)
    variance = float(np.mean(w * w))
    mean = PreShape(mu.reshape(ref.coef.shape))
    return FrechetMeanResult(mean, variance, it, converged, tnorm, n_excluded)


class AlignmentOutcome(NamedTuple):
    """Result of the interlaced alignment / mean estimation on pre-shapes."""

    shapes: list[Shape]
    mean: FrechetMeanResult
    theta: np.ndarray
    delta: np.ndarray
    objective: np.ndarray
    eta_history: list[float]
    converged: bool
    monotone: bool


def curve_rng(seed: int, *counters: int) -> np.random.Generator:
    """Independent stream for one unit of work (seed plus counters)."""
    return np.random.default_rng([int(seed) % 2**64, *counters])


def align_dataset(
    preshapes: Sequence[MultiCurve],
    xi: float = 1e-4,
    seed: int = 0,
    n_starts: int = 5,
    tol: float = 1e-10,
    max_iter: int = 100,
    max_outer: int = 50,
    karcher_tol: float = 1e-10,
    karcher_max_iter: int = 200,
) -> AlignmentOutcome:
    """Alternate ICF alignment to the running mean and Karcher averaging.

    The mean starts at a uniformly chosen pre-shape. Iteration ``t`` aligns
    every pre-shape to the mean of iteration ``t - 1`` (random starts plus the
    previous estimate as a warm start), recomputes the Karcher mean of the
    aligned shapes and the variance ``eta_t``. Stops when ``eta_t <= xi`` or
    ``|eta_t - eta_{t-1}| / max(eta_{t-1}, 1e-12) < xi``, or after
    ``max_outer`` iterations. A variance increase beyond ``1e-10`` stops the
    loop with ``monotone=False``.
    """
    n = len(preshapes)
    if n == 0:
        raise DataError("empty dataset")
    start_idx = int(curve_rng(seed).integers(n))
    mu: MultiCurve = preshapes[start_idx]
    p = mu.p
    prev: list[Optional[AlignmentResult]] = [None] * n
    eta_history: list[float] = []
    converged = False
    monotone = True
    best = None
    for outer in range(max_outer):
        template_id = f"start:{start_idx}" if outer == 0 else f"mean:{outer}"
        results = []
        for i, x in enumerate(preshapes):
            extra = () if prev[i] is None else (prev[i].delta,)
            results.append(
                icf_align(
                    x, mu, n_starts, tol, max_iter,
                    rng=curve_rng(seed, outer + 1, i),
                    extra_starts=extra,
                    template_id=template_id,
                )
            )
        fm = frechet_mean([r.shape for r in results], karcher_tol, karcher_max_iter, init=mu)
        eta = fm.variance
        log.info("outer iteration %d: eta = %.6e", outer + 1, eta)
        if eta_history and eta > eta_history[-1] + ETA_MONOTONE_ATOL:
            monotone = False
            log.warning("variance increased (%.6e -> %.6e); stopping", eta_history[-1], eta)
            eta_history.append(eta)
            break
        eta_history.append(eta)
        best = (results, fm)
        prev = results
        mu = fm.mean
        if eta <= xi:
            converged = True
            break
        if len(eta_history) > 1:
            rel = abs(eta - eta_history[-2]) / max(eta_history[-2], 1e-12)
            if rel < xi:
                converged = True
                break
    if best is None:
        raise NumericalError("alignment produced no admissible iteration")
    results, fm = best
    return AlignmentOutcome(
        shapes=[r.shape for r in results],
        mean=fm,
        theta=np.array([r.theta for r in results]),
        delta=np.array([r.delta for r in results]).reshape(n, p),
        objective=np.array([r.objective for r in results]),
        eta_history=eta_history,
        converged=converged,
        monotone=monotone,
    )


class PipelineResult(NamedTuple):
    ids: list[str]
    curves: list[MultiCurve]
    shapes: list[Shape]
    mean: FrechetMeanResult
    params: list[DeformationParams]
    objective: np.ndarray
    eta_history: list[float]
    converged: bool
    monotone: bool


def estimate_curves(
    curves: Sequence[MultiCurve],
    ids: Optional[Sequence[str]] = None,
    xi: float = 1e-4,
    seed: int = 0,
    **kwargs,
) -> PipelineResult:
    """Center, scale and jointly align already-smoothed curves."""
    ids = [str(i) for i in range(len(curves))] if ids is None else list(ids)
    pre, Ts, rhos = [], [], []
    for cid, c in zip(ids, curves):
        try:
            x, T, rho = center_and_scale(c)
        except DataError as exc:
            raise type(exc)(f"curve {cid}: {exc}") from exc
        pre.append(x)
        Ts.append(T)
        rhos.append(rho)
    out = align_dataset(pre, xi=xi, seed=seed, **kwargs)
    params = [
        DeformationParams(T, rho, th, d)
        for T, rho, th, d in zip(Ts, rhos, out.theta, out.delta)
    ]
    return PipelineResult(
        ids, list(curves), out.shapes, out.mean, params, out.objective,
        out.eta_history, out.converged, out.monotone,
    )


def estimate_pipeline(
    dataset: Sequence[RawMultiContour],
    spec: BasisSpec = BasisSpec(),
    xi: float = 1e-4,
    seed: int = 0,
    **kwargs,
) -> PipelineResult:
    """Smoothing, centering/normalizing, then interlaced alignment and mean."""
    if len(dataset) == 0:
        raise DataError("empty dataset")
    ids = [r.id if r.id is not None else str(i) for i, r in enumerate(dataset)]
    curves = [fit_curve(r, spec) for r in dataset]
    return estimate_curves(curves, ids, xi=xi, seed=seed, **kwargs)
