"""Synthetic pre-shapes, deformation metrics and the alignment study.

The bundled template is an analytic stand-in for a smoothed chest contour
triple (right lung, heart, left lung) in pixel-like units: three
non-overlapping smooth ovals with a few low-frequency harmonics, smoothed
with ``M = 22`` Fourier functions and jointly centered.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .deformation import PreShape, icf_align
from .errors import DomainError
from .fourier import BasisSpec, MultiCurve, _shift_blocks, reparametrize, rotate, rotation_matrix
from .ingest import RawContour, RawMultiContour, fit_curve
from .sphere import curve_rng

# (center x, center y, semi-axis x, semi-axis y, [(coord, kind, freq, amplitude, phase)])
_OVALS = (
    (-250.0, 0.0, 105.0, 230.0, [("x", "cos", 2, 25.0, 0.0), ("x", "sin", 3, -10.0, 0.0),
                                 ("y", "sin", 2, 20.0, 0.0), ("y", "cos", 3, 6.0, 0.5)]),
    (0.0, 170.0, 80.0, 70.0, [("x", "cos", 2, 12.0, 0.4), ("y", "sin", 3, 8.0, 0.0),
                              ("y", "cos", 2, -6.0, 0.0)]),
    (250.0, -10.0, 95.0, 215.0, [("x", "cos", 2, -22.0, 0.0), ("x", "sin", 3, 8.0, 0.0),
                                 ("y", "sin", 2, 15.0, 0.3), ("x", "cos", 4, 4.0, 1.1)]),
)


def _oval_points(cx, cy, ax, ay, harmonics, n=2000):
    s = 2.0 * np.pi * np.arange(n) / n
    x = cx + ax * np.cos(s)
    y = cy + ay * np.sin(s)
    for coord, kind, k, amp, phase in harmonics:
        wave = amp * (np.cos(k * s + phase) if kind == "cos" else np.sin(k * s + phase))
        if coord == "x":
            x = x + wave
        else:
            y = y + wave
    return np.column_stack([x, y])


@lru_cache(maxsize=8)
def _builtin(M: int) -> MultiCurve:
    rmc = RawMultiContour([RawContour(_oval_points(*o)) for o in _OVALS], id="builtin")
    c = fit_curve(rmc, BasisSpec(M))
    coef = c.coef.copy()
    coef[:, :, 0] -= coef[:, :, 0].mean(axis=0)
    return MultiCurve(coef)


def builtin_template(M: int = 22) -> MultiCurve:
    """The bundled three-component template ``c0`` (centered, not normalized)."""
    return _builtin(int(M))


def center_template(template: MultiCurve) -> MultiCurve:
    coef = template.coef.copy()
    coef[:, :, 0] -= coef[:, :, 0].mean(axis=0)
    return MultiCurve(coef)


@dataclass(frozen=True)
class SynthConfig:
    template: MultiCurve
    n: int = 500
    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


class SynthSample(NamedTuple):
    preshapes: list[PreShape]
    true_theta: np.ndarray
    true_delta: np.ndarray
    kappa: np.ndarray


def generate(config: SynthConfig) -> SynthSample:
    """Draw deformed, perturbed and normalized copies of the template.

    For curve ``i`` and component ``j``::

        c*_ij = kappa_i O_{theta_i} (b0_j + a~_ij phi o gamma_{delta_ij})

    with ``theta_i ~ U[0, 2 pi)``, ``delta_ij ~ U[0, 1)``,
    ``Vec(a~_ij) ~ N(Vec(a0_j), sigma^2 I)`` and ``kappa_i`` the inverse norm.
    The template is jointly centered first.
    """
    c0 = center_template(config.template)
    p, M = c0.p, c0.M
    b0, a0 = c0.B, c0.A
    preshapes, thetas, deltas, kappas = [], [], [], []
    for i in range(config.n):
        rng = curve_rng(config.seed, 0, i)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        delta = rng.random(p)
        a = a0 + config.sigma * rng.standard_normal((p, 2, M))
        kappa = 1.0 / np.sqrt(np.sum(b0 * b0) + np.sum(a * a))
        R = rotation_matrix(theta)
        coef = np.empty((p, 2, M + 1))
        coef[:, :, 0] = kappa * b0 @ R.T
        coef[:, :, 1:] = kappa * np.einsum("ab,jbm->jam", R, _shift_blocks(a, delta))
        coef /= np.sqrt(np.sum(coef * coef))
        preshapes.append(PreShape(coef))
        thetas.append(theta)
        deltas.append(delta)
        kappas.append(kappa)
    return SynthSample(preshapes, np.array(thetas), np.array(deltas), np.array(kappas))


def cyclic_mse_theta(true, est) -> float:
    """Mean squared distance between angles embedded on the unit circle."""
    true = np.asarray(true, dtype=float)
    est = np.asarray(est, dtype=float)
    if true.shape != est.shape:
        raise DomainError(f"length mismatch: {true.shape} vs {est.shape}")
    sq = (np.cos(true) - np.cos(est)) ** 2 + (np.sin(true) - np.sin(est)) ** 2
    return float(np.mean(sq)) if sq.ndim <= 1 else np.mean(sq, axis=0)


def cyclic_mse_delta(true, est):
    """Cyclic MSE of starting points (angles ``2 pi delta``).

    For ``(n, p)`` inputs returns one value per component.
    """
    return cyclic_mse_theta(2.0 * np.pi * np.asarray(true, float), 2.0 * np.pi * np.asarray(est, float))


def scenario2_params(n: int, p: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Rotation fractions ``zeta ~ U[0, 1)`` and shifts ``delta ~ U[0, 1)^p`` per curve."""
    zeta = np.empty(n)
    delta = np.empty((n, p))
    for i in range(n):
        rng = curve_rng(seed, 2, i)
        zeta[i] = rng.random()
        delta[i] = rng.random(p)
    return zeta, delta


def scenario2_deform(curves: Sequence[MultiCurve], seed: int, return_params: bool = False):
    """Randomly rotate (angle ``2 pi zeta``) and reparametrize every curve."""
    if not curves:
        return ([], (np.empty(0), np.empty((0, 0)))) if return_params else []
    zeta, delta = scenario2_params(len(curves), curves[0].p, seed)
    out = [rotate(reparametrize(c, d), 2.0 * np.pi * z) for c, z, d in zip(curves, zeta, delta)]
    return (out, (zeta, delta)) if return_params else out


class StudyRow(NamedTuple):
    sigma: float
    cmse_theta: float
    cmse_delta: np.ndarray
    n: int


def run_alignment_study(
    template: MultiCurve,
    sigmas: Sequence[float] = (0.1, 0.5, 1.0),
    n: int = 500,
    seed: int = 0,
    n_starts: int = 5,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> list[StudyRow]:
    """Generate ``n`` pre-shapes per noise level and align them to ``c0 / |c0|``."""
    c0 = center_template(template)
    mu = PreShape(c0.coef / c0.norm())
    rows = []
    for sigma in sigmas:
        sample = generate(SynthConfig(template, n, sigma, seed))
        theta_hat = np.empty(n)
        delta_hat = np.empty((n, c0.p))
        for i, x in enumerate(sample.preshapes):
            res = icf_align(x, mu, n_starts, tol, max_iter, rng=curve_rng(seed, 1, i))
            theta_hat[i] = res.theta
            delta_hat[i] = res.delta
        rows.append(
            StudyRow(
                float(sigma),
                cyclic_mse_theta(sample.true_theta, theta_hat),
                np.atleast_1d(cyclic_mse_delta(sample.true_delta, delta_hat)),
                n,
            )
        )
    return rows


def two_class_sample(
    template: MultiCurve,
    n: int = 200,
    sigma: float = 5.0,
    component: int = 1,
    factor: float = 1.3,
    seed: int = 0,
) -> tuple[list[MultiCurve], np.ndarray]:
    """Balanced two-class sample of curves in template units.

    Class 0 perturbs the template's Fourier coefficients with
    ``N(0, sigma^2)`` noise; class 1 additionally scales component
    ``component`` by ``factor`` about its own centroid. Every curve also
    gets a random translation (uniform in +-50) and scale (uniform in
    [0.9, 1.1]). No rotation or reparametrization is applied; use
    :func:`scenario2_deform` for that.
    """
    c0 = center_template(template)
    labels = np.arange(n) % 2
    curves = []
    for i in range(n):
        rng = curve_rng(seed, 3, i)
        coef = c0.coef.copy()
        coef[:, :, 1:] += sigma * rng.standard_normal(coef[:, :, 1:].shape)
        if labels[i]:
            coef[component, :, 1:] *= factor
        coef *= rng.uniform(0.9, 1.1)
        coef[:, :, 0] += rng.uniform(-50.0, 50.0, size=2)
        curves.append(MultiCurve(coef))
    return curves, labels
