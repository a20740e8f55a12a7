"""Command-line front end: ``fit``, ``detect``, ``infer`` and ``simulate``.

Every flag can also be set through an environment variable named
``SIEVEPANEL_<FLAG>`` (upper case, dashes as underscores), e.g.
``SIEVEPANEL_SEED=3``.  Command-line values win over the environment.

Exit codes: 0 success, 2 input or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .errors import EmptyGrid, InputError, MaxIterExceeded, NumericalError, SievePanelError
from .estimator import FitResult, fit_penalized_lqa, fit_unpenalized
from .inference import Target, infer
from .panel_data import PanelSchema, ScalingMap, load_panel_csv, scale_regressors
from .penalty import ScadParams
from .pipeline import detect
from .simulation import (
    COVERAGE_POINTS,
    DgpConfig,
    coverage_table,
    detection_proportions,
    run_rmse_experiment,
    simulate_detection,
)
from .solution_path import default_lambda_grid, fit_path
from .spline_basis import BasisSpec, build_design, eval_basis, uniform_specs
from .tuning import FoldSet, TuningConfig, kfold_split, select_bandwidth_degree, select_lambda_folds

log = logging.getLogger("sievepanel")

ENV_PREFIX = "SIEVEPANEL_"
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
GRID_POINTS = 201
EXPERIMENTS = ("rmse", "detect", "coverage")
DEMO_NAME = "demo"


def demo_path() -> Path:
    """Location of the bundled demo panel (long format, raw regressor scale)."""
    return Path(__file__).resolve().parent / "data" / "demo_panel.csv"


# Artifacts ----------------------------------------------------------------


def fit_payload(fit: FitResult, scaling: ScalingMap, names, **extra) -> dict:
    """JSON-ready description of a fit, complete enough to re-evaluate it."""
    return {
        "names": list(names),
        "lambda": fit.lam,
        "linear_set": sorted(j + 1 for j in fit.linear_set),
        "linear_names": [names[j] for j in sorted(fit.linear_set)],
        "coefficients": {
            names[j]: {"linear": float(fit.v[j]), "nonlinear": fit.u[j].tolist()} for j in range(fit.p)
        },
        "basis": [s.to_dict() for s in fit.specs],
        "scaling": scaling.to_dict(),
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        **extra,
    }


def read_fit_json(path):
    """Inverse of :func:`fit_payload`: ``(fit, scaling, names, payload)``."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    names = raw["names"]
    specs = tuple(BasisSpec.from_dict(s) for s in raw["basis"])
    v = np.array([raw["coefficients"][n]["linear"] for n in names], dtype=float)
    u = [np.array(raw["coefficients"][n]["nonlinear"], dtype=float) for n in names]
    lin = frozenset(j - 1 for j in raw["linear_set"])
    fit = FitResult(v, u, lin, raw["lambda"], specs, converged=raw["converged"], n_iter=raw["n_iter"])
    return fit, ScalingMap.from_dict(raw["scaling"]), names, raw


def component_frame(fit: FitResult, scaling: ScalingMap, names, points: int = GRID_POINTS) -> pd.DataFrame:
    """Fitted components on an evenly spaced grid of each original axis."""
    z = np.linspace(0.0, 1.0, points)
    frames = []
    for j, name in enumerate(names):
        b = eval_basis(fit.specs[j], z)
        frames.append(
            pd.DataFrame(
                {
                    "j": j + 1,
                    "name": name,
                    "x": scaling.inverse(z, j),
                    "z_scaled": z,
                    "f_hat": b[:, 0] * fit.v[j] + b[:, 1:] @ fit.u[j],
                    "linear_part": b[:, 0] * fit.v[j],
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.ndarray,)):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_csv(path: Path, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.17g")


# Shared plumbing ----------------------------------------------------------


def _parse_floats(text: Optional[str]):
    if text is None:
        return None
    parts = [s for s in text.replace(";", ",").split(",") if s.strip()]
    try:
        return tuple(float(s) for s in parts)
    except ValueError:
        raise InputError(f"not a list of numbers: {text!r}") from None


def _parse_ints(text: Optional[str]):
    vals = _parse_floats(text)
    if vals is None:
        return None
    if any(v != int(v) for v in vals):
        raise InputError(f"not a list of integers: {text!r}")
    return tuple(int(v) for v in vals)


def _lambda_grid(args):
    if args.lambda_grid is None:
        return None
    grid = _parse_floats(args.lambda_grid)
    if not grid:
        raise EmptyGrid("lambda grid is empty")
    return grid


def _tuning(args) -> TuningConfig:
    base = TuningConfig.from_json(args.config).to_dict() if args.config else {}
    if args.kfolds is not None:
        base["k_folds"] = args.kfolds
    if args.seed is not None:
        base["seed"] = args.seed
    if args.degree is not None:
        base["degrees"] = _parse_ints(args.degree)
    if args.n_intervals is not None:
        base["inverse_bandwidths"] = _parse_ints(args.n_intervals)
    grid = _lambda_grid(args)
    if grid is not None:
        base["lambda_grid"] = grid
    if getattr(args, "criterion", None):
        base["criterion"] = args.criterion
    if args.no_clamp:
        base["clamp_heldout"] = False
    return TuningConfig(**base)


def _load(args):
    src = demo_path() if args.input == DEMO_NAME else Path(args.input)
    schema = PanelSchema.parse(args.schema) if args.schema else PanelSchema()
    raw = load_panel_csv(src, schema)
    d, smap = scale_regressors(raw)
    return d, smap


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory is not writable: {out}")
    return out


def _linear_set(text: Optional[str], p: int):
    if text is None:
        return None
    idx = _parse_ints(text) if text.strip() else ()
    for j in idx:
        if not 1 <= j <= p:
            raise InputError(f"linear-set index {j} outside 1..{p}")
    return frozenset(j - 1 for j in idx)


def _basis(d, tun: TuningConfig, folds):
    sel = select_bandwidth_degree(d, tun.degrees, tun.inverse_bandwidths, folds=folds, clamp=tun.clamp_heldout)
    return sel, uniform_specs(d.n_regressors, sel.degrees, sel.n_intervals)


def _basis_dict(sel) -> dict:
    return {"degrees": list(sel.degrees), "n_intervals": list(sel.n_intervals), "bandwidths": list(sel.bandwidths)}


# Commands -----------------------------------------------------------------


def cmd_fit(args) -> int:
    d, smap = _load(args)
    tun = _tuning(args)
    out = _out_dir(args)
    folds = kfold_split(d.n_individuals, tun.k_folds, tun.seed)
    sel, specs = _basis(d, tun, folds)
    fs = FoldSet(d, specs, folds, tun.clamp_heldout)
    grid = np.asarray(tun.lambda_grid if tun.lambda_grid is not None else default_lambda_grid())
    if args.lam is not None:
        if args.lam < 0:
            raise InputError(f"lambda must be >= 0, got {args.lam}")
        lam, source = float(args.lam), "user"
        init = fs.full.solve_restricted(())
        fit = fit_penalized_lqa(fs.full, params=ScadParams(lam, tun.kappa), init=init, specs=specs)
        scores = None
    else:
        lam, scores = select_lambda_folds(fs, grid, tun.kappa)
        source = "cv"
        path = fit_path(fs.full, grid=grid, kappa=tun.kappa)
        fit = path.fits[int(np.flatnonzero(np.isclose(path.grid, lam))[0])]
        if fit is None:
            fit = fit_unpenalized(fs.full, specs=specs) if lam == 0 else fit_penalized_lqa(
                fs.full, params=ScadParams(lam, tun.kappa), specs=specs
            )
    payload = fit_payload(
        fit,
        smap,
        d.names,
        lambda_source=source,
        basis_selection=_basis_dict(sel),
        cv_scores=None if scores is None else [{"lambda": k, "cv": v} for k, v in scores.items()],
        tuning=tun.to_dict(),
    )
    _write_json(out / "fit.json", payload)
    _write_csv(out / "components.csv", component_frame(fit, smap, d.names))
    log.info("fit at lambda=%g (%s); linear set %s", lam, source, payload["linear_set"])
    return EXIT_OK


def cmd_detect(args) -> int:
    d, smap = _load(args)
    tun = _tuning(args)
    out = _out_dir(args)
    det = detect(d, tun, criteria=[tun.criterion])
    rep = det.report(tun.criterion)
    _write_csv(out / "path.csv", det.path.to_frame(d.names))
    payload = {
        **rep.to_dict(d.names),
        "names": list(d.names),
        "basis_selection": _basis_dict(det.basis),
        "path_models": [sorted(j + 1 for j in m) for m in det.path.models],
        "path_intervals": [list(iv) for iv in det.path.intervals],
        "scaling": smap.to_dict(),
        "tuning": tun.to_dict(),
    }
    _write_json(out / "selection.json", payload)
    log.info("selected linear set %s by %s", payload["selected"], tun.criterion)
    return EXIT_OK


def cmd_infer(args) -> int:
    d, smap = _load(args)
    tun = _tuning(args)
    out = _out_dir(args)
    points = _parse_floats(args.points) if args.points is not None else COVERAGE_POINTS
    lin = _linear_set(args.linear_set, d.n_regressors)
    lambda_inf, criterion = None, None
    if lin is None:
        det = detect(d, tun, criteria=[tun.criterion])
        rep = det.report(tun.criterion)
        lin, lambda_inf, criterion = rep.selected, rep.lambda_inf, tun.criterion
        design, basis = det.design, det.basis
    else:
        folds = kfold_split(d.n_individuals, tun.k_folds, tun.seed)
        basis, specs = _basis(d, tun, folds)
        design = build_design(d, specs)
    fit = fit_unpenalized(design, d.y, restrict=lin)
    targets = [Target(j) for j in range(d.n_regressors)]
    targets += [Target(j, float(z0)) for j in range(d.n_regressors) for z0 in points]
    report = infer(fit, design, d.y, targets, args.level, args.lT, args.kernel, lambda_inf)
    payload = report.to_dict(d.names)
    payload.update(
        {
            "names": list(d.names),
            "criterion": criterion,
            "linear_set_source": "user" if criterion is None else "detected",
            "basis_selection": _basis_dict(basis),
            "scaling": smap.to_dict(),
            "point_axis": "scaled [0, 1]",
        }
    )
    _write_json(out / "inference.json", payload)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.experiment not in EXPERIMENTS:
        raise InputError(f"unknown experiment {args.experiment!r}; choose from {EXPERIMENTS}")
    if args.reps < 1:
        raise InputError(f"reps must be >= 1, got {args.reps}")
    out = _out_dir(args)
    tun = _tuning(args)
    seed = 0 if args.seed is None else args.seed
    ns, ts = args.N, args.T
    if len(ns) != len(ts):
        raise InputError("--N and --T need the same number of values")
    sizes = list(zip(ns, ts))
    if args.experiment == "rmse":
        res = run_rmse_experiment(sizes, args.r, args.reps, seed, tun.lambda_grid, tun, args.n_jobs)
        _write_csv(out / "rmse_reps.csv", res.reps)
        _write_csv(out / "rmse_summary.csv", res.summary())
        _write_csv(out / "rmse_curve.csv", res.curve)
        return EXIT_OK
    rows, cov = [], []
    for n, t in sizes:
        cfg = DgpConfig(n, t, args.r, seed, args.reps)
        if args.experiment == "detect":
            outcomes = simulate_detection(cfg, tun, n_jobs=args.n_jobs)
            rows.append({"n": n, "t": t, "r": args.r, "reps": args.reps, **detection_proportions(outcomes)})
        else:
            pts = _parse_floats(args.points) if args.points is not None else COVERAGE_POINTS
            outcomes = simulate_detection(cfg, tun, criteria=(tun.criterion,), points=pts, level=args.level, n_jobs=args.n_jobs)
            table = coverage_table(outcomes)
            table.insert(0, "t", t)
            table.insert(0, "n", n)
            cov.append(table)
    if args.experiment == "detect":
        _write_csv(out / "detection.csv", pd.DataFrame(rows))
    else:
        _write_csv(out / "coverage.csv", pd.concat(cov, ignore_index=True))
    return EXIT_OK


# Parser -------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        p.add_argument("--input", required=True, help=f"long-format panel CSV, or '{DEMO_NAME}' for the bundled example")
        p.add_argument("--schema", default=None, help="column names 'id,time,response[,regressor,...]'")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="seed for fold assignment and simulation")
    p.add_argument("--kfolds", type=int, default=None, help="number of CV folds (default 5)")
    p.add_argument("--degree", default=None, help="spline degree candidates, comma separated (default 3)")
    p.add_argument("--n-intervals", dest="n_intervals", default=None, help="knot-interval count candidates")
    p.add_argument("--lambda-grid", dest="lambda_grid", default=None, help="ascending lambda grid, comma separated")
    p.add_argument("--config", default=None, help="tuning configuration JSON file")
    p.add_argument("--no-clamp", dest="no_clamp", action="store_true", help="score held-out CV rows without clamping")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _criterion(p):
    p.add_argument("--criterion", choices=("cv", "aic", "bic"), type=str.lower, default=None)


def _inference(p):
    p.add_argument("--level", type=float, default=0.95, help="confidence level in (0, 1)")
    p.add_argument("--lT", dest="lT", type=int, default=None, help="HAC window (default min(T-1, ceil(T^(1/3))))")
    p.add_argument("--kernel", choices=("bartlett", "uniform"), type=str.lower, default="bartlett")
    p.add_argument("--points", default=None, help="evaluation points on the scaled axis (default 0,0.25,0.5,0.75,1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sievepanel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="SCAD-penalized sieve fit; writes fit.json and components.csv")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="penalty level (default: chosen by CV)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detect", help="solution path and model selection; writes path.csv and selection.json")
    _common(p)
    _criterion(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("infer", help="confidence intervals after detection; writes inference.json")
    _common(p)
    _criterion(p)
    _inference(p)
    p.add_argument("--linear-set", dest="linear_set", default=None, help="1-based linear components; skips detection")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("simulate", help="Monte Carlo experiments on the simulated design")
    p.add_argument("experiment", help="one of: " + ", ".join(EXPERIMENTS))
    _common(p, data=False)
    _criterion(p)
    _inference(p)
    p.add_argument("--N", dest="N", type=int, nargs="+", default=[200])
    p.add_argument("--T", dest="T", type=int, nargs="+", default=[10])
    p.add_argument("--r", dest="r", type=float, default=1.0, help="nonlinearity strength")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--n-jobs", dest="n_jobs", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    for action in sub.choices.values():
        _apply_env(action)
    return parser


def _apply_env(parser: argparse.ArgumentParser) -> None:
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help", "verbose"):
            continue
        key = ENV_PREFIX + action.option_strings[-1].lstrip("-").replace("-", "_").upper()
        if key in os.environ:
            value = os.environ[key]
            if action.nargs == "+":
                value = value.split()
                action.default = [action.type(v) if action.type else v for v in value]
            elif isinstance(action, argparse._StoreTrueAction):
                action.default = value.strip().lower() in ("1", "true", "yes", "on")
            else:
                action.default = action.type(value) if action.type else value
            action.required = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ValueError as exc:  # bad environment value
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.verbose == 0:
        warnings.simplefilter("ignore", MaxIterExceeded)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SievePanelError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
