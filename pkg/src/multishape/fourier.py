"""Fourier representation of multivariate closed planar curves.

A curve component is ``C_j(t) = B_j + A_j phi(t)`` with ``B_j`` a 2-vector and
``A_j`` a ``2 x M`` matrix. The basis is indexed from 1 as follows::

    phi_k(t) = sqrt(2) sin((k + 1) pi t)   k odd   (k = 2l - 1)
    phi_k(t) = sqrt(2) cos(k pi t)         k even  (k = 2l)

so the basis pair ``(phi_{2l-1}, phi_{2l})`` is the (sin, cos) pair of
frequency ``l``, ``l = 1..M/2``, stored in 0-based columns ``2l-2`` and
``2l-1``. The constant function lives only in ``B``; every ``phi_k`` integrates
to zero and the family is orthonormal in ``L2[0, 1]``, so all inner products
are exact in coefficient space.

Internally a :class:`MultiCurve` keeps one array ``coef`` of shape
``(p, 2, M + 1)``: column 0 holds ``B`` and columns ``1..M`` hold ``A``.
Flattening it in C order yields, per component and per coordinate, the
constant followed by the ``M`` Fourier coefficients.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError, DomainError

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class BasisSpec:
    """Number ``M`` of Fourier functions (even, at least 2)."""

    M: int = 22

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2 or self.M % 2:
            raise DomainError(f"basis size must be a positive even integer, got {self.M}")

    @property
    def n_freq(self) -> int:
        return self.M // 2

    def frequencies(self) -> np.ndarray:
        """Frequency ``l`` of every basis column (0-based), i.e. ``1,1,2,2,...``."""
        return np.repeat(np.arange(1, self.n_freq + 1), 2)


def rotation_matrix(theta: float) -> np.ndarray:
    """The planar rotation ``O_theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def eval_basis(t, spec: BasisSpec | int) -> np.ndarray:
    """Evaluate ``(phi_1(t), ..., phi_M(t))``.

    ``t`` may be a scalar (result shape ``(M,)``) or an array of shape ``(K,)``
    (result shape ``(K, M)``).
    """
    M = spec.M if isinstance(spec, BasisSpec) else BasisSpec(spec).M
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise DomainError("basis evaluation requires 0 <= t <= 1")
    freq = np.arange(1, M // 2 + 1)
    arg = 2.0 * np.pi * t_arr[..., None] * freq
    out = np.empty(t_arr.shape + (M,))
    out[..., 0::2] = SQRT2 * np.sin(arg)
    out[..., 1::2] = SQRT2 * np.cos(arg)
    return out


def reparam_matrix(delta: float, spec: BasisSpec | int) -> np.ndarray:
    """Block-diagonal ``P_delta`` with blocks ``O_{2 pi l delta}``, ``l = 1..M/2``.

    ``A @ reparam_matrix(delta)`` are the coefficients of ``A phi o gamma_delta``
    where ``gamma_delta(t) = mod(t - delta, 1)``.
    """
    M = spec.M if isinstance(spec, BasisSpec) else BasisSpec(spec).M
    ang = 2.0 * np.pi * delta * np.arange(1, M // 2 + 1)
    c, s = np.cos(ang), np.sin(ang)
    P = np.zeros((M, M))
    i = np.arange(0, M, 2)
    P[i, i] = c
    P[i, i + 1] = -s
    P[i + 1, i] = s
    P[i + 1, i + 1] = c
    return P


def _shift_blocks(A: np.ndarray, delta) -> np.ndarray:
    """Right-multiply the trailing ``(2, M)`` blocks of ``A`` by ``P_delta``.

    ``delta`` broadcasts against the leading axes of ``A``. Works on the
    (sin, cos) column pairs directly instead of forming ``P_delta``.
    """
    M = A.shape[-1]
    delta = np.asarray(delta, dtype=float)
    ang = 2.0 * np.pi * delta[..., None] * np.arange(1, M // 2 + 1)
    c = np.cos(ang)[..., None, :]
    s = np.sin(ang)[..., None, :]
    a_sin = A[..., 0::2]
    a_cos = A[..., 1::2]
    out = np.empty_like(A)
    out[..., 0::2] = a_sin * c + a_cos * s
    out[..., 1::2] = -a_sin * s + a_cos * c
    return out


class ComponentCoefficients(NamedTuple):
    """Coefficients of one planar component: constant ``B`` and Fourier ``A``."""

    B: np.ndarray
    A: np.ndarray


@dataclass(frozen=True, eq=False)
class MultiCurve:
    """A ``p``-component closed planar curve in coefficient form.

    Use :meth:`from_blocks` to build one from ``B`` (``p x 2``) and ``A``
    (``p x 2 x M``). Instances are immutable; the coefficient array is
    flagged read-only.
    """

    coef: np.ndarray

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        if coef.ndim != 3 or coef.shape[1] != 2 or coef.shape[0] < 1:
            raise DataError(f"coefficient array must have shape (p, 2, M+1), got {coef.shape}")
        BasisSpec(coef.shape[2] - 1)
        if not np.all(np.isfinite(coef)):
            raise DataError("coefficients must be finite")
        coef.flags.writeable = False
        object.__setattr__(self, "coef", coef)

    @classmethod
    def from_blocks(cls, B, A) -> "MultiCurve":
        B = np.asarray(B, dtype=float)
        A = np.asarray(A, dtype=float)
        if A.ndim == 2:
            A = A[None]
        B = B.reshape(A.shape[0], 2)
        return cls(np.concatenate([B[:, :, None], A], axis=2))

    @classmethod
    def from_components(cls, components: Sequence[ComponentCoefficients]) -> "MultiCurve":
        return cls.from_blocks([c.B for c in components], [c.A for c in components])

    @classmethod
    def from_vector(cls, vec, p: int, M: int) -> "MultiCurve":
        return cls(np.asarray(vec, dtype=float).reshape(p, 2, M + 1))

    @property
    def p(self) -> int:
        return self.coef.shape[0]

    @property
    def M(self) -> int:
        return self.coef.shape[2] - 1

    @property
    def spec(self) -> BasisSpec:
        return BasisSpec(self.M)

    @property
    def A(self) -> np.ndarray:
        return self.coef[:, :, 1:]

    @property
    def B(self) -> np.ndarray:
        return self.coef[:, :, 0]

    @property
    def components(self) -> list[ComponentCoefficients]:
        return [self.component(j) for j in range(self.p)]

    def component(self, j: int) -> ComponentCoefficients:
        return ComponentCoefficients(self.coef[j, :, 0], self.coef[j, :, 1:])

    def subcurve(self, indices) -> "MultiCurve":
        return MultiCurve(self.coef[np.atleast_1d(indices)])

    def to_vector(self) -> np.ndarray:
        return self.coef.ravel()

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.coef * self.coef)))

    def _check_compatible(self, other: "MultiCurve"):
        if self.coef.shape != other.coef.shape:
            raise DataError(
                f"incompatible curves: (p={self.p}, M={self.M}) vs (p={other.p}, M={other.M})"
            )

    def __add__(self, other: "MultiCurve") -> "MultiCurve":
        if not isinstance(other, MultiCurve):
            return NotImplemented
        self._check_compatible(other)
        return MultiCurve(self.coef + other.coef)

    def __sub__(self, other: "MultiCurve") -> "MultiCurve":
        if not isinstance(other, MultiCurve):
            return NotImplemented
        self._check_compatible(other)
        return MultiCurve(self.coef - other.coef)

    def __mul__(self, scalar: float) -> "MultiCurve":
        return MultiCurve(self.coef * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "MultiCurve":
        return MultiCurve(self.coef / float(scalar))

    def __neg__(self) -> "MultiCurve":
        return MultiCurve(-self.coef)

    def allclose(self, other: "MultiCurve", atol: float = 1e-12) -> bool:
        return self.coef.shape == other.coef.shape and np.allclose(
            self.coef, other.coef, rtol=0.0, atol=atol
        )

    def __repr__(self):
        return f"{type(self).__name__}(p={self.p}, M={self.M}, norm={self.norm():.6g})"


def eval_curve(c: MultiCurve, t) -> np.ndarray:
    """Evaluate every component at ``t``.

    Returns the stacked ``2p``-vector ``(X_1, Y_1, ..., X_p, Y_p)`` for scalar
    ``t``, or an array of shape ``(K, 2p)`` for a vector of ``K`` points.
    """
    phi = eval_basis(t, c.M)
    vals = c.B[None] + np.einsum("jrm,km->kjr", c.A, np.atleast_2d(phi))
    vals = vals.reshape(vals.shape[0], 2 * c.p)
    return vals[0] if np.ndim(t) == 0 else vals


def inner_product(f: MultiCurve, g: MultiCurve) -> float:
    """``<f, g>`` in ``H^p``: Frobenius product of ``A`` blocks plus that of ``B``."""
    f._check_compatible(g)
    return float(np.sum(f.coef * g.coef))


def rotate(c: MultiCurve, theta: float) -> MultiCurve:
    """Apply ``(I_p kron O_theta)``: left-multiply every ``B_j`` and ``A_j``."""
    return MultiCurve(np.einsum("ab,jbm->jam", rotation_matrix(theta), c.coef))


def reparametrize(c: MultiCurve, delta) -> MultiCurve:
    """Compose each component with ``gamma_{delta_j}(t) = mod(t - delta_j, 1)``.

    Acts as ``A_j <- A_j P_{delta_j}``; ``B`` is unchanged. ``delta`` is a
    scalar (shared) or a length-``p`` vector.
    """
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (c.p,))
    coef = c.coef.copy()
    coef[:, :, 1:] = _shift_blocks(c.A, delta)
    return MultiCurve(coef)


# -- coefficient file format ---------------------------------------------------

def curve_to_dict(c: MultiCurve) -> dict:
    return {
        "p": c.p,
        "M": c.M,
        "components": [
            {"B": comp.B.tolist(), "A": comp.A.tolist()} for comp in c.components
        ],
    }


def curve_from_dict(d: dict) -> MultiCurve:
    try:
        p, M = int(d["p"]), int(d["M"])
        comps = d["components"]
        B = np.array([cc["B"] for cc in comps], dtype=float)
        A = np.array([cc["A"] for cc in comps], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed coefficient record: {exc}") from exc
    if B.shape != (p, 2) or A.shape != (p, 2, M):
        raise DataError(
            f"coefficient record declares p={p}, M={M} but holds B{B.shape}, A{A.shape}"
        )
    return MultiCurve.from_blocks(B, A)


def save_curve(c: MultiCurve, path, **extra) -> None:
    """Write a coefficient file (JSON; floats are written with ``repr``,
    i.e. the shortest string that round-trips bit-exactly)."""
    record = dict(extra)
    record.update(curve_to_dict(c))
    Path(path).write_text(json.dumps(record, indent=1) + "\n")


def load_curve(path) -> MultiCurve:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid coefficient file ({exc})") from exc
    return curve_from_dict(d)
