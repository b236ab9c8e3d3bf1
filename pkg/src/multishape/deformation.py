"""Removal of translation, scale, rotation and starting-point deformations.

Translation and scale have closed forms in coefficient space. Rotation and
the per-component reparametrizations are estimated jointly by Iterative
Closest Function (ICF) alignment of a pre-shape ``C*`` onto a template
``Cbar``, which minimises::

    sum_j || O_theta Cbar_j o gamma_{delta_j} - C*_j ||^2

by alternating an exact Procrustes rotation step with ``p`` independent
one-dimensional shift problems, each solved by root bracketing of a
trigonometric polynomial. The inner loop lives in :mod:`multishape.kernels`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateInputError, DomainError
from .fourier import ComponentCoefficients, MultiCurve, reparametrize, rotate

PRESHAPE_ATOL = 1e-10
BISECT_XTOL = 1e-12

TWO_PI = 2.0 * np.pi


class AlignmentWarning(RuntimeWarning):
    """Rotation or reparametrization was indeterminate and defaulted to 0."""


def scan_size(M: int) -> int:
    """Number of scan subintervals used to bracket the shift roots."""
    return 4 * (M + 1)


@dataclass(frozen=True)
class DeformationParams:
    """Deformation ``(T, rho, theta, delta)`` of the joint model.

    Angles are stored mod ``2 pi`` and starting points mod 1.
    """

    T: np.ndarray
    rho: float
    theta: float
    delta: np.ndarray

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError(f"scale must be positive, got {self.rho}")
        object.__setattr__(self, "T", np.asarray(self.T, dtype=float).reshape(2))
        object.__setattr__(self, "theta", float(np.mod(self.theta, TWO_PI)))
        object.__setattr__(self, "delta", np.mod(np.atleast_1d(np.asarray(self.delta, float)), 1.0))

    def as_row(self) -> list[float]:
        return [float(self.T[0]), float(self.T[1]), float(self.rho), self.theta, *map(float, self.delta)]


@dataclass(frozen=True, eq=False)
class PreShape(MultiCurve):
    """A jointly centered, unit-norm :class:`MultiCurve`."""

    def __post_init__(self):
        super().__post_init__()
        norm = self.norm()
        if abs(norm - 1.0) > PRESHAPE_ATOL:
            raise DomainError(f"pre-shape must have unit norm, got {norm!r}")
        centroid = self.B.mean(axis=0)
        if np.max(np.abs(centroid)) > PRESHAPE_ATOL:
            raise DomainError(f"pre-shape must be jointly centered, centroid {centroid}")

    @classmethod
    def from_curve(cls, c: MultiCurve) -> "PreShape":
        return cls(c.coef)


@dataclass(frozen=True, eq=False)
class Shape(PreShape):
    """A pre-shape aligned to the template identified by ``template_id``."""

    template_id: str = ""


def center_and_scale(c: MultiCurve) -> tuple[PreShape, np.ndarray, float]:
    """Remove translation and scale.

    Returns the pre-shape ``(C - 1_p kron T) / rho`` together with
    ``T = mean_j B_j`` and ``rho = sqrt(||A||_F^2 + ||B - 1_p kron T||_F^2)``.
    """
    T = c.B.mean(axis=0)
    coef = c.coef.copy()
    coef[:, :, 0] -= T
    rho = float(np.sqrt(np.sum(coef * coef)))
    if not rho > 0.0:
        raise DegenerateInputError("curve has zero scale (all components constant and equal)")
    coef /= rho
    # exact renormalisation guards against roundoff in rho
    coef /= np.sqrt(np.sum(coef * coef))
    coef[:, :, 0] -= coef[:, :, 0].mean(axis=0)
    return PreShape(coef), T, rho


def _check_pair(a: MultiCurve, b: MultiCurve):
    if a.coef.shape != b.coef.shape:
        raise DomainError(f"shape mismatch: (p={a.p}, M={a.M}) vs (p={b.p}, M={b.M})")


def alignment_objective(preshape: MultiCurve, template: MultiCurve, theta: float, delta) -> float:
    """``sum_j ||O_theta Cbar_j o gamma_{delta_j} - C*_j||^2``."""
    _check_pair(preshape, template)
    diff = rotate(reparametrize(template, delta), theta).coef - preshape.coef
    return float(np.sum(diff * diff))


def estimate_rotation(preshape: MultiCurve, template: MultiCurve, delta) -> float:
    """Best rotation angle in ``[0, 2 pi)`` for fixed starting points ``delta``.

    Evaluates the objective at both roots of the tangent equation and keeps
    the smaller (ties go to the smaller angle). Warns with
    :class:`AlignmentWarning` and returns 0 when every cross term vanishes.
    """
    _check_pair(preshape, template)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (template.p,))
    theta, _, degenerate = kernels.best_rotation(template.coef, preshape.coef, np.mod(delta, 1.0))
    if degenerate:
        warnings.warn("rotation indeterminate (template orthogonal to pre-shape)", AlignmentWarning)
    return float(theta)


def solve_reparam(
    preshape_component: ComponentCoefficients,
    template_component: ComponentCoefficients,
    theta: float,
) -> float:
    """Starting point ``delta_j`` minimising ``||O_theta Abar_j P_delta - A*_j||_F``.

    The stationarity condition is a trigonometric polynomial in ``delta``
    whose coefficients come from the 2x2 diagonal blocks of
    ``(O_theta Abar_j)^T A*_j``. All sign changes are bracketed on a grid of
    ``4 (M + 1)`` subintervals, refined by bisection to ``1e-12`` and the
    objective is compared across them.
    """
    A_star = np.asarray(preshape_component.A, dtype=float)
    A_bar = np.asarray(template_component.A, dtype=float)
    if A_star.shape != A_bar.shape:
        raise DomainError(f"component shape mismatch: {A_star.shape} vs {A_bar.shape}")
    M = A_bar.shape[1]
    zeros = np.zeros((1, 2, 1))
    tmpl = np.concatenate([zeros, A_bar[None]], axis=2)
    targ = np.concatenate([zeros, A_star[None]], axis=2)
    trace, skew = kernels.shift_stats(tmpl, targ, float(theta))
    delta, _, n_minima = kernels.best_shift(trace[0], skew[0], scan_size(M), BISECT_XTOL)
    if n_minima == 0:
        warnings.warn("reparametrization objective is flat; using delta = 0", AlignmentWarning)
    return float(delta)


class AlignmentResult(NamedTuple):
    shape: Shape
    theta: float
    delta: np.ndarray
    objective: float
    n_iter: int
    history: np.ndarray
    flags: int


def aligned_shape(preshape: MultiCurve, theta: float, delta, template_id: str = "") -> Shape:
    """``(I_p kron O_theta^T) C* o gamma_{1 - delta}``: undo an estimated deformation."""
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (preshape.p,))
    out = rotate(reparametrize(preshape, np.mod(1.0 - delta, 1.0)), -theta)
    coef = out.coef.copy()
    coef /= np.sqrt(np.sum(coef * coef))
    return Shape(coef, template_id=template_id)


def icf_align(
    preshape: MultiCurve,
    template: MultiCurve,
    n_starts: int = 5,
    tol: float = 1e-10,
    max_iter: int = 100,
    rng: np.random.Generator | int | None = None,
    extra_starts: Sequence[np.ndarray] = (),
    template_id: str = "",
) -> AlignmentResult:
    """Align ``preshape`` onto ``template`` by Iterative Closest Function.

    Parameters
    ----------
    preshape, template : MultiCurve
        Unit-norm, jointly centered curves with the same ``p`` and ``M``.
    n_starts : int
        Number of random starting vectors ``delta^0 ~ U[0, 1)^p``.
    tol : float
        Stop a descent once the objective decreases by less than ``tol``.
    max_iter : int
        Cap on rotation/shift alternations per start.
    rng : Generator or int, optional
        Source of the random starts.
    extra_starts : sequence of arrays
        Additional deterministic starting vectors (e.g. a previous estimate),
        tried after the random ones.

    Returns
    -------
    AlignmentResult
        Best descent over all starts; ``shape`` is the aligned curve.
    """
    _check_pair(preshape, template)
    if n_starts < 1 and not len(extra_starts):
        raise DomainError("icf_align needs at least one start")
    rng = np.random.default_rng(rng)
    p, M = template.p, template.M
    starts = [rng.random(p) for _ in range(n_starts)]
    starts.extend(np.asarray(s, dtype=float) for s in extra_starts)
    best = None
    for d0 in starts:
        res = kernels.icf_run(
            template.coef, preshape.coef, d0, tol, max_iter, scan_size(M), BISECT_XTOL
        )
        if best is None or res[2] < best[2]:
            best = res
    theta, delta, obj, n_iter, history, flags = best
    if flags:
        warnings.warn(f"degenerate alignment step (flags={flags})", AlignmentWarning)
    theta = float(np.mod(theta, TWO_PI))
    delta = np.mod(np.asarray(delta, dtype=float), 1.0)
    shape = aligned_shape(preshape, theta, delta, template_id)
    return AlignmentResult(shape, theta, delta, float(obj), int(n_iter), np.asarray(history), int(flags))
