"""Plain-text summary tables for alignment studies and classification runs.

Two layouts are produced: a noise-level table (one row per ``sigma``,
columns ``cMSE_theta`` and one ``cMSE_delta`` per component) and an
accuracy table (rows scenario x design, columns method). Both are
whitespace-aligned text that external tools can parse line by line.
"""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .classify import METHODS, SCHEMES, CVReport
from .errors import DataError
from .synth import StudyRow

SCENARIOS = ("1", "2")
_DESIGN_NAMES = {"multi": "MULTI", "uni": "UNI", "raw": "RAW"}


def _fmt_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[k]) for r in rows)) for k, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def study_table(rows: Sequence[StudyRow]) -> str:
    """``sigma | cMSE_theta | cMSE_delta_1 .. cMSE_delta_p``."""
    if not rows:
        raise DataError("no alignment study rows to report")
    p = len(np.atleast_1d(rows[0].cmse_delta))
    header = ["sigma", "cMSE_theta", *(f"cMSE_delta{j + 1}" for j in range(p))]
    body = [
        [f"{r.sigma:g}", f"{r.cmse_theta:.2e}", *(f"{v:.2e}" for v in np.atleast_1d(r.cmse_delta))]
        for r in rows
    ]
    return _fmt_table(header, body)


def _scenario_key(s) -> str:
    s = str(s).lower().removeprefix("scenario").strip(" -_")
    return s or "1"


def accuracy_table(reports: Iterable[CVReport]) -> str:
    """Mean CV accuracy for every (scenario, design) row and method column.

    All ``2 x 3 x 4`` cells are printed; cells without a report show ``-``.
    """
    reports = list(reports)
    if not reports:
        raise DataError("no classification results to report")
    cells: dict[tuple[str, str, str], float] = {}
    for r in reports:
        cells[(_scenario_key(r.scenario), r.scheme, r.method)] = r.mean_accuracy
    scenarios = list(SCENARIOS) + sorted({k[0] for k in cells} - set(SCENARIOS))
    header = ["scenario", "design", *(m.upper() for m in METHODS)]
    body = []
    for sc in scenarios:
        for design in SCHEMES:
            vals = [cells.get((sc, design, m)) for m in METHODS]
            body.append([sc, _DESIGN_NAMES[design], *("-" if v is None else f"{v:.2f}" for v in vals)])
    return _fmt_table(header, body)


def fold_table(report: CVReport) -> str:
    """Per-fold accuracy and selected hyperparameter of one CV run."""
    body = [
        [str(k + 1), f"{a:.2f}", f"{h:.6g}"]
        for k, (a, h) in enumerate(zip(report.fold_accuracies, report.selected))
    ]
    body.append(["mean", f"{report.mean_accuracy:.2f}", ""])
    return _fmt_table(["fold", "accuracy", "hyper"], body)


def emit_report(results) -> str:
    """Render study rows and/or CV reports as text tables.

    ``results`` may be a sequence of :class:`StudyRow`, a sequence of
    :class:`CVReport`, or a mapping with keys ``"study"`` and
    ``"classification"``.
    """
    if isinstance(results, Mapping):
        study = list(results.get("study", ()))
        cv = list(results.get("classification", ()))
    else:
        results = list(results)
        study = [r for r in results if isinstance(r, StudyRow)]
        cv = [r for r in results if isinstance(r, CVReport)]
    if not study and not cv:
        raise DataError("nothing to report")
    parts = []
    if study:
        parts.append("# alignment study\n" + study_table(study))
    if cv:
        parts.append("# classification accuracy (%)\n" + accuracy_table(cv))
    return "\n\n".join(parts) + "\n"
