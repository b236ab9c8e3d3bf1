"""Raw contours to Fourier coefficients.

Contours are parametrized by normalized polygonal arc length, oriented
counter-clockwise and fitted by ordinary least squares against the design
``[1, phi_1(t), ..., phi_M(t)]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, DegenerateInputError, FitError
from .fourier import BasisSpec, MultiCurve, eval_basis

RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class RawContour:
    """Ordered ``(x, y)`` samples of one closed contour (pixel units)."""

    points: np.ndarray
    closed: bool = True

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DataError(f"contour points must have shape (K, 2), got {pts.shape}")
        if pts.shape[0] < 3:
            raise DataError(f"contour needs at least 3 points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise DataError("contour contains NaN or infinite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def cleaned(self) -> np.ndarray:
        """Points with consecutive duplicates removed (the closing edge included)."""
        pts = self.points
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
        while len(pts) > 1 and np.all(pts[-1] == pts[0]):
            pts = pts[:-1]
        return pts

    def signed_area(self) -> float:
        return _signed_area(self.points)


@dataclass(frozen=True)
class RawMultiContour:
    contours: Sequence[RawContour]
    label: Optional[int] = None
    id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(
            self,
            "contours",
            tuple(c if isinstance(c, RawContour) else RawContour(c) for c in self.contours),
        )
        if not self.contours:
            raise DataError("a multi-contour needs at least one contour")
        if self.label is not None and self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")

    @property
    def p(self) -> int:
        return len(self.contours)


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _grid(pts: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    perimeter = seg.sum()
    if not perimeter > 0.0:
        raise DegenerateInputError("contour has zero perimeter")
    return np.concatenate([[0.0], np.cumsum(seg[:-1])]) / perimeter


def arclength_grid(rc: RawContour) -> np.ndarray:
    """Normalized cumulative arc length of the closed polygon, starting at 0.

    Consecutive duplicate points are dropped first, so the grid is strictly
    increasing and has one entry per retained point.
    """
    pts = rc.cleaned()
    if len(pts) < 2:
        raise DegenerateInputError("contour has zero perimeter")
    return _grid(pts)


def oriented_points(rc: RawContour) -> np.ndarray:
    """Cleaned points traversed counter-clockwise from the same start point."""
    pts = rc.cleaned()
    if _signed_area(pts) < 0:
        pts = np.concatenate([pts[:1], pts[:0:-1]])
    return pts


def fit_component(rc: RawContour, spec: BasisSpec, name: str = "0") -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``(B, A)`` for one contour."""
    pts = oriented_points(rc)
    K = len(pts)
    if K < 2 * spec.M + 1:
        raise FitError(f"component {name}: {K} distinct points, need at least {2 * spec.M + 1}")
    try:
        t = _grid(pts)
    except DegenerateInputError as exc:
        raise FitError(f"component {name}: {exc}") from exc
    design = np.hstack([np.ones((K, 1)), eval_basis(t, spec)])
    coef, _, rank, sv = np.linalg.lstsq(design, pts, rcond=RCOND)
    if rank < design.shape[1]:
        raise FitError(f"component {name}: rank-deficient design ({rank} < {design.shape[1]})")
    return coef[0], coef[1:].T


def fit_curve(rmc: RawMultiContour, spec: BasisSpec = BasisSpec()) -> MultiCurve:
    """Smooth every contour of ``rmc`` with ``M`` Fourier functions."""
    B, A = [], []
    for j, rc in enumerate(rmc.contours):
        name = f"{j}" if rmc.id is None else f"{j} of {rmc.id}"
        b, a = fit_component(rc, spec, name)
        B.append(b)
        A.append(a)
    return MultiCurve.from_blocks(B, A)


def fit_residual(rmc: RawMultiContour, curve: MultiCurve) -> float:
    """Mean squared distance between the oriented samples and the fitted curve."""
    total, count = 0.0, 0
    for j, rc in enumerate(rmc.contours):
        pts = oriented_points(rc)
        t = _grid(pts)
        comp = curve.component(j)
        fitted = comp.B + eval_basis(t, curve.M) @ comp.A.T
        total += float(np.sum((fitted - pts) ** 2))
        count += len(pts)
    return total / count


# -- contour file format -------------------------------------------------------

def contour_from_dict(d: dict) -> RawMultiContour:
    try:
        contours = [RawContour(np.asarray(c, dtype=float)) for c in d["contours"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed contour record: {exc}") from exc
    label = d.get("label")
    return RawMultiContour(contours, None if label is None else int(label), d.get("id"))


def contour_to_dict(rmc: RawMultiContour) -> dict:
    out = {"id": rmc.id, "contours": [c.points.tolist() for c in rmc.contours]}
    if rmc.label is not None:
        out["label"] = int(rmc.label)
    return out


def load_contours(path) -> list[RawMultiContour]:
    """Read contour records from a JSON file or from every ``*.json`` in a directory.

    A file may hold one record or a list of records. Records without an
    ``id`` get one derived from the file name.
    """
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    if not files:
        raise DataError(f"no contour files found in {path}")
    out = []
    for f in files:
        try:
            data = json.loads(f.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{f}: cannot read contour file ({exc})") from exc
        records = data if isinstance(data, list) else [data]
        for k, rec in enumerate(records):
            rmc = contour_from_dict(rec)
            if rmc.id is None:
                rid = f.stem if len(records) == 1 else f"{f.stem}_{k}"
                rmc = RawMultiContour(rmc.contours, rmc.label, rid)
            out.append(rmc)
    p = {r.p for r in out}
    if len(p) != 1:
        raise DataError(f"inconsistent number of components across records: {sorted(p)}")
    return out


def save_contours(records: Sequence[RawMultiContour], path) -> None:
    Path(path).write_text(json.dumps([contour_to_dict(r) for r in records]) + "\n")


def sample_curve(curve: MultiCurve, n_points: int, label=None, id=None) -> RawMultiContour:
    """Discretize a coefficient curve on a uniform grid (test data, CLI demos)."""
    t = np.arange(n_points) / n_points
    phi = eval_basis(t, curve.M)
    contours = [RawContour(comp.B + phi @ comp.A.T) for comp in curve.components]
    return RawMultiContour(contours, label, id)
