"""``multishape`` command-line interface.

Subcommands: ``fit``, ``align``, ``pipeline``, ``classify``, ``simulate``
and ``report``. Settings come from command-line flags, then from an
optional JSON ``--config`` file with flat keys named like the flags, then
from built-in defaults. Every output is written under ``--out`` and depends
only on the inputs and ``--seed``.

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import classify as cls
from .deformation import center_and_scale, icf_align
from .errors import DataError, NumericalError
from .fourier import BasisSpec, MultiCurve, curve_from_dict, load_curve, save_curve
from .ingest import contour_from_dict, fit_curve, fit_residual
from .report import accuracy_table, emit_report, fold_table, study_table
from .sphere import curve_rng, estimate_curves
from .synth import (
    StudyRow,
    builtin_template,
    run_alignment_study,
    scenario2_deform,
    two_class_sample,
)

log = logging.getLogger("multishape")

DEFAULTS = {
    "input": None,
    "out": ".",
    "basis_size": 22,
    "seed": 0,
    "xi": 1e-4,
    "starts": 5,
    "sigma": None,
    "n": None,
    "design": "multi",
    "method": "pls",
    "folds": 10,
    "scenario": "1",
    "template": "builtin",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="JSON file with flat keys named like the flags")
    common.add_argument("--out", default=S, help="output directory (default: .)")
    common.add_argument("--seed", type=int, default=S, help="global seed (default: 0)")
    common.add_argument("--basis-size", type=int, default=S, dest="basis_size",
                        help="number M of Fourier functions, even (default: 22)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="multishape", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", parents=[common], help="smooth raw contours into coefficient files")
    f.add_argument("--input", default=S, help="contour JSON file or directory")

    a = sub.add_parser("align", parents=[common], help="align curves to a template by ICF")
    a.add_argument("--input", default=S, help="contour or coefficient JSON file or directory")
    a.add_argument("--template", default=S, help="coefficient file or 'builtin'")
    a.add_argument("--starts", type=int, default=S)

    pl = sub.add_parser("pipeline", parents=[common], help="joint alignment and mean estimation")
    pl.add_argument("--input", default=S, help="contour or coefficient JSON file or directory")
    pl.add_argument("--xi", type=float, default=S)
    pl.add_argument("--starts", type=int, default=S)

    c = sub.add_parser("classify", parents=[common], help="cross-validated classification")
    c.add_argument("--input", default=S,
                   help="labelled contour/coefficient files; synthetic two-class data if omitted")
    c.add_argument("--design", default=S, choices=[*cls.SCHEMES, "all"])
    c.add_argument("--method", default=S, choices=[*cls.METHODS, "all"])
    c.add_argument("--folds", type=int, default=S)
    c.add_argument("--scenario", default=S, choices=["1", "2"],
                   help="2: apply random rotations and starting points first")
    c.add_argument("--xi", type=float, default=S)
    c.add_argument("--starts", type=int, default=S)
    c.add_argument("--n", type=int, default=S, help="synthetic sample size (default: 200)")
    c.add_argument("--sigma", type=float, default=S, help="synthetic noise level (default: 5)")
    c.add_argument("--template", default=S)
    c.add_argument("--jobs", type=int, default=1, help="worker processes for the folds")

    s = sub.add_parser("simulate", parents=[common], help="alignment accuracy study")
    s.add_argument("--sigma", type=float, nargs="+", default=S, help="noise levels (default: 0.1 0.5 1.0)")
    s.add_argument("--n", type=int, default=S, help="pre-shapes per noise level (default: 500)")
    s.add_argument("--starts", type=int, default=S)
    s.add_argument("--template", default=S, help="coefficient file or 'builtin'")

    r = sub.add_parser("report", parents=[common], help="tables from saved study/classification results")
    r.add_argument("--input", default=S, help="result JSON file or directory")
    return p


def resolve_config(ns: argparse.Namespace) -> dict:
    """Merge flags over config-file values over defaults."""
    cfg = dict(DEFAULTS)
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config file {ns.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise DataError("config file must hold a JSON object")
        for key, value in data.items():
            k = key.replace("-", "_")
            if k not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            cfg[k] = value
    cfg.update({k: v for k, v in vars(ns).items() if k not in ("config",)})
    if int(cfg["basis_size"]) < 2 or int(cfg["basis_size"]) % 2:
        raise UsageError(f"--basis-size must be an even integer >= 2, got {cfg['basis_size']}")
    if not 0 <= int(cfg["seed"]) < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    return cfg


# -- inputs -------------------------------------------------------------------------

def _json_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(path.glob("*.json"))
    elif path.exists():
        files = [path]
    else:
        raise DataError(f"input {path} does not exist")
    if not files:
        raise DataError(f"no JSON files in {path}")
    return files


def load_inputs(path, M: int):
    """Curves from contour records (smoothed on the fly) or coefficient files.

    Returns ``(ids, curves, labels)``; ``labels`` holds ``None`` for
    unlabelled records.
    """
    if path is None:
        raise UsageError("--input is required")
    ids, curves, labels = [], [], []
    spec = BasisSpec(M)
    for f in _json_files(Path(path)):
        try:
            data = json.loads(f.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{f}: {exc}") from exc
        records = data if isinstance(data, list) else [data]
        for k, rec in enumerate(records):
            if not isinstance(rec, dict):
                raise DataError(f"{f}: record {k} is not an object")
            default_id = f.stem if len(records) == 1 else f"{f.stem}_{k}"
            if "contours" in rec:
                rmc = contour_from_dict(rec)
                curve = fit_curve(rmc, spec)
                label = rmc.label
            else:
                curve = curve_from_dict(rec)
                label = rec.get("label")
                if curve.M != M:
                    raise DataError(f"{f}: coefficient file has M={curve.M}, expected {M}")
            ids.append(str(rec.get("id") or default_id))
            curves.append(curve)
            labels.append(None if label is None else int(label))
    if len({c.p for c in curves}) != 1:
        raise DataError("inputs have differing numbers of components")
    if len(set(ids)) != len(ids):
        raise DataError("duplicate record ids in input")
    return ids, curves, labels


def load_template(spec: str, M: int) -> MultiCurve:
    if spec in (None, "builtin"):
        return builtin_template(M)
    c = load_curve(spec)
    if c.M != M:
        raise DataError(f"template has M={c.M}, expected {M}")
    return c


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=1) + "\n")


def _safe_name(s: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in s)


# -- subcommands --------------------------------------------------------------------

def cmd_fit(cfg, out: Path) -> None:
    from .ingest import load_contours

    if cfg["input"] is None:
        raise UsageError("--input is required")
    spec = BasisSpec(int(cfg["basis_size"]))
    records = load_contours(cfg["input"])
    (out / "coefficients").mkdir(parents=True, exist_ok=True)
    rows = []
    for r in records:
        c = fit_curve(r, spec)
        extra = {"id": r.id} if r.label is None else {"id": r.id, "label": r.label}
        save_curve(c, out / "coefficients" / f"{_safe_name(r.id)}.json", **extra)
        rows.append([r.id, repr(fit_residual(r, c))])
    _write_csv(out / "fit_residuals.csv", ["id", "mse"], rows)
    print(f"fitted {len(records)} record(s) with M={spec.M}")


def cmd_align(cfg, out: Path) -> None:
    M = int(cfg["basis_size"])
    ids, curves, _ = load_inputs(cfg["input"], M)
    tmpl = load_template(cfg["template"], M)
    if tmpl.p != curves[0].p:
        raise DataError(f"template has p={tmpl.p}, inputs have p={curves[0].p}")
    mu, _, _ = center_and_scale(tmpl)
    (out / "aligned").mkdir(parents=True, exist_ok=True)
    rows = []
    for i, (cid, c) in enumerate(zip(ids, curves)):
        x, _, _ = center_and_scale(c)
        res = icf_align(x, mu, int(cfg["starts"]), rng=curve_rng(int(cfg["seed"]), 1, i), template_id="template")
        save_curve(res.shape, out / "aligned" / f"{_safe_name(cid)}.json", id=cid)
        rows.append([cid, repr(res.theta), *map(repr, map(float, res.delta)), repr(res.objective)])
    p = curves[0].p
    _write_csv(out / "alignment.csv", ["id", "theta", *(f"delta_{j + 1}" for j in range(p)), "objective"], rows)
    print(f"aligned {len(ids)} curve(s)")


def cmd_pipeline(cfg, out: Path) -> None:
    M = int(cfg["basis_size"])
    ids, curves, _ = load_inputs(cfg["input"], M)
    res = estimate_curves(curves, ids, xi=float(cfg["xi"]), seed=int(cfg["seed"]), n_starts=int(cfg["starts"]))
    (out / "aligned").mkdir(parents=True, exist_ok=True)
    for cid, s in zip(ids, res.shapes):
        save_curve(s, out / "aligned" / f"{_safe_name(cid)}.json", id=cid)
    save_curve(res.mean.mean, out / "mean.json", id="mean")
    p = curves[0].p
    _write_csv(
        out / "deformations.csv",
        ["id", "T_x", "T_y", "rho", "theta", *(f"delta_{j + 1}" for j in range(p))],
        [[cid, *map(repr, prm.as_row())] for cid, prm in zip(ids, res.params)],
    )
    _write_csv(out / "iterations.csv", ["iteration", "eta"],
               [[k + 1, repr(e)] for k, e in enumerate(res.eta_history)])
    status = "converged" if res.converged else "not converged"
    print(f"pipeline {status} after {len(res.eta_history)} iteration(s); eta = {res.eta_history[-1]:.6e}")
    if not res.monotone:
        raise NumericalError("variance increased between outer iterations")


def _classification_data(cfg):
    M = int(cfg["basis_size"])
    seed = int(cfg["seed"])
    if cfg["input"] is None:
        tmpl = load_template(cfg["template"], M)
        n = 200 if cfg["n"] is None else int(cfg["n"])
        sigma = 5.0 if cfg["sigma"] is None else float(cfg["sigma"])
        curves, labels = two_class_sample(tmpl, n=n, sigma=sigma, seed=seed)
        return curves, np.asarray(labels)
    _, curves, labels = load_inputs(cfg["input"], M)
    if any(lab is None for lab in labels):
        raise DataError("classification needs a 0/1 label on every record")
    return curves, np.asarray(labels)


def cmd_classify(cfg, out: Path, jobs: int = 1) -> None:
    curves, labels = _classification_data(cfg)
    scenario = str(cfg["scenario"])
    seed = int(cfg["seed"])
    if scenario == "2":
        curves = scenario2_deform(curves, seed)
    designs = cls.SCHEMES if cfg["design"] == "all" else (cfg["design"],)
    methods = cls.METHODS if cfg["method"] == "all" else (cfg["method"],)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for design_name in designs:
        design = cls.build_design(
            curves, labels, scheme=design_name, xi=float(cfg["xi"]), seed=seed, n_starts=int(cfg["starts"])
        )
        for method in methods:
            rep = cls.cross_validate(design, method, k=int(cfg["folds"]), seed=seed, scenario=scenario, n_jobs=jobs)
            reports.append(rep)
            _write_json(out / f"cv_s{scenario}_{design_name}_{method}.json", rep.to_dict())
            print(f"scenario {scenario} {design_name.upper()} {method.upper()}: {rep.mean_accuracy:.2f}%")
            print(fold_table(rep))
    table = accuracy_table(reports)
    (out / f"classification_s{scenario}.txt").write_text(table + "\n")
    print(table)


def _study_dict(rows: Sequence[StudyRow]) -> dict:
    return {
        "study": [
            {"sigma": r.sigma, "n": r.n, "cmse_theta": r.cmse_theta,
             "cmse_delta": [float(v) for v in np.atleast_1d(r.cmse_delta)]}
            for r in rows
        ]
    }


def cmd_simulate(cfg, out: Path) -> None:
    M = int(cfg["basis_size"])
    tmpl = load_template(cfg["template"], M)
    sig = cfg["sigma"]
    sigmas = [0.1, 0.5, 1.0] if sig is None else [float(s) for s in np.atleast_1d(sig)]
    n = 500 if cfg["n"] is None else int(cfg["n"])
    rows = run_alignment_study(tmpl, sigmas, n=n, seed=int(cfg["seed"]), n_starts=int(cfg["starts"]))
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "study.json", _study_dict(rows))
    table = study_table(rows)
    (out / "study.txt").write_text(table + "\n")
    print(table)


def _load_results(path) -> dict:
    study, cv = [], []
    for f in _json_files(Path(path)):
        try:
            data = json.loads(f.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{f}: {exc}") from exc
        if isinstance(data, dict) and "study" in data:
            study += [
                StudyRow(float(r["sigma"]), float(r["cmse_theta"]), np.asarray(r["cmse_delta"], float), int(r["n"]))
                for r in data["study"]
            ]
        elif isinstance(data, dict) and "mean_accuracy" in data:
            cv.append(cls.CVReport(
                data["method"], data["design"], str(data.get("scenario", "1")),
                list(data["fold_accuracies"]), list(data.get("selected", [])), [],
            ))
    return {"study": study, "classification": cv}


def cmd_report(cfg, out: Path) -> None:
    if cfg["input"] is None:
        raise UsageError("--input is required")
    text = emit_report(_load_results(cfg["input"]))
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text)
    print(text, end="")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one subcommand; returns the process exit status."""
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(ns.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
        )
        cmd = ns.command
        jobs = getattr(ns, "jobs", 1)
        for k in ("command", "verbose", "jobs"):
            if hasattr(ns, k):
                delattr(ns, k)
        cfg = resolve_config(ns)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if cmd == "classify":
                cmd_classify(cfg, out, jobs)
            else:
                {"fit": cmd_fit, "align": cmd_align, "pipeline": cmd_pipeline,
                 "simulate": cmd_simulate, "report": cmd_report}[cmd](cfg, out)
        return 0
    except UsageError as exc:
        _error_record("usage", exc)
        return 1
    except DataError as exc:
        _error_record("data", exc)
        return 2
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        _error_record("numerical", exc)
        return 3


def _error_record(kind: str, exc: BaseException) -> None:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
