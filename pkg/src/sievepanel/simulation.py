"""Simulated panels with two linear and two nonlinear components, plus the
Monte Carlo experiments built on them (RMSE, linearity detection, coverage).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import InputError, OutOfDomain
from .panel_data import PanelDataset, ScalingMap, scale_regressors
from .spline_basis import integrate

BETA_69_CONST = math.factorial(14) / (math.factorial(5) * math.factorial(8))
TRUE_LINEAR_SET = frozenset({0, 1})
COVERAGE_POINTS = (0.0, 0.25, 0.5, 0.75, 1.0)


def beta_density_6_9(z):
    """Density of the Beta(6, 9) distribution on [0, 1]."""
    z = np.asarray(z, dtype=float)
    if np.any((z < 0) | (z > 1)):
        raise OutOfDomain("Beta(6, 9) density is evaluated on [0, 1] only")
    out = BETA_69_CONST * z**5 * (1 - z) ** 8
    return out if out.ndim else float(out)


def _beta_69_extended(z):
    # zero outside the support; raw regressors are unbounded before scaling
    z = np.asarray(z, dtype=float)
    inside = (z >= 0) & (z <= 1)
    zc = np.clip(z, 0.0, 1.0)
    return np.where(inside, BETA_69_CONST * zc**5 * (1 - zc) ** 8, 0.0)


def true_components(r: float):
    """The four additive components on the raw regressor axis."""
    return (
        lambda z: 2.0 * np.asarray(z, dtype=float),
        lambda z: 3.0 * np.asarray(z, dtype=float),
        lambda z: np.asarray(z, dtype=float) + r * np.sin(6.0 * np.asarray(z, dtype=float)),
        lambda z: np.asarray(z, dtype=float) + r * _beta_69_extended(z),
    )


@dataclass(frozen=True)
class DgpConfig:
    n: int = 200
    t: int = 10
    r: float = 1.0
    seed: int = 0
    reps: int = 100

    def __post_init__(self):
        if self.n < 2 or self.t < 2:
            raise InputError(f"need N >= 2 and T >= 2, got N={self.n}, T={self.t}")
        if not self.r >= 0:
            raise InputError(f"nonlinearity strength r must be >= 0, got {self.r}")
        if self.reps < 1:
            raise InputError(f"reps must be >= 1, got {self.reps}")


@dataclass
class TruthBundle:
    """Everything drawn for one replication, on the raw scale."""

    r: float
    alpha: np.ndarray
    delta: np.ndarray
    eps: np.ndarray
    z_raw: np.ndarray
    scaling: ScalingMap
    functions: tuple = field(repr=False)

    def raw(self, j: int, z_scaled):
        return self.functions[j](self.scaling.inverse(z_scaled, j))

    def center(self, j: int) -> float:
        """Average of ``f_j`` over the scaled unit interval."""
        return float(integrate(lambda s: self.raw(j, s), nodes=200))

    def centered(self, j: int, z_scaled):
        """The target of ``f^_j``: ``f_j`` on the scaled axis minus its [0, 1] mean."""
        return self.raw(j, z_scaled) - self.center(j)

    def beta(self, j: int) -> float:
        """Coefficient of ``f_j`` on ``z - 1/2`` in the scaled ``L2[0, 1]``
        projection; equals :meth:`slope` for a linear component."""
        return float(12.0 * integrate(lambda s: self.raw(j, s) * (s - 0.5), nodes=200))

    def slope(self, j: int) -> float:
        """Coefficient on ``z - 1/2`` of a linear component after scaling."""
        f = self.functions[j]
        lo, hi = self.scaling.lo[j], self.scaling.hi[j]
        return float(f(hi) - f(lo))


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replication ``rep`` of a seeded experiment."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def gen_dgp(cfg: DgpConfig, rep: int = 0) -> tuple[PanelDataset, TruthBundle]:
    """Draw one panel: ``y = sum_j f_j(z_j) + alpha_i + eps_it``.

    ``z1 = u1 + alpha_i``, ``z2, z3 = u + delta_i``, ``z4 = u4`` with uniform
    ``u`` and standard normal ``alpha``, ``delta``, ``eps``.  The returned
    dataset is min-max scaled; the truth stays on the raw axis.
    """
    rng = replication_rng(cfg.seed, rep)
    n, t = cfg.n, cfg.t
    u = rng.uniform(0.0, 1.0, size=(n, t, 4))
    alpha = rng.standard_normal(n)
    delta = rng.standard_normal(n)
    eps = rng.standard_normal((n, t))
    z = u.copy()
    z[:, :, 0] += alpha[:, None]
    z[:, :, 1] += delta[:, None]
    z[:, :, 2] += delta[:, None]
    fs = true_components(cfg.r)
    y = sum(fs[j](z[:, :, j]) for j in range(4)) + alpha[:, None] + eps
    raw = PanelDataset(y=y, z=z)
    scaled, smap = scale_regressors(raw)
    return scaled, TruthBundle(cfg.r, alpha, delta, eps, z, smap, fs)


def rmse(fit, truth: TruthBundle, d: PanelDataset) -> float:
    """Root mean squared error of the fitted components against the centered truth."""
    n, t, p = d.z.shape
    total = 0.0
    for j in range(p):
        zj = d.z[:, :, j].reshape(-1)
        err = fit.component(j, zj) - truth.centered(j, zj)
        total += float(err @ err)
    return math.sqrt(total / (n * t))


def _map(fn, items, n_jobs: int):
    if n_jobs is None or n_jobs <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def _quiet():
    import warnings

    from .errors import MaxIterExceeded

    warnings.simplefilter("ignore", MaxIterExceeded)
    warnings.simplefilter("ignore", RuntimeWarning)


# RMSE experiment ------------------------------------------------------------


@dataclass(frozen=True)
class _RmseJob:
    cfg: DgpConfig
    rep: int
    grid: tuple
    tuning: object


def _rmse_rep(job: _RmseJob) -> dict:
    from .estimator import fit_unpenalized
    from .solution_path import fit_path
    from .spline_basis import uniform_specs
    from .tuning import FoldSet, kfold_split, select_bandwidth_degree, select_lambda_folds

    _quiet()
    cfg, tun = job.cfg, job.tuning
    d, truth = gen_dgp(cfg, job.rep)
    folds = kfold_split(d.n_individuals, tun.k_folds, tun.seed + job.rep)
    basis = select_bandwidth_degree(d, tun.degrees, tun.inverse_bandwidths, folds=folds, clamp=tun.clamp_heldout)
    specs = uniform_specs(d.n_regressors, basis.degrees, basis.n_intervals)
    fs = FoldSet(d, specs, folds, tun.clamp_heldout)
    unpen = fit_unpenalized(fs.full, specs=specs)
    lam_opt, _ = select_lambda_folds(fs, job.grid, tun.kappa)
    path = fit_path(fs.full, grid=job.grid, kappa=tun.kappa)
    path_rmse = [math.nan if f is None else rmse(f, truth, d) for f in path.fits]
    k_opt = int(np.flatnonzero(np.isclose(path.grid, lam_opt))[0])
    return {
        "n": cfg.n,
        "t": cfg.t,
        "rep": job.rep,
        "n_intervals": basis.n_intervals[0],
        "lambda_opt": lam_opt,
        "rmse_unpenalized": rmse(unpen, truth, d),
        "rmse_penalized": path_rmse[k_opt],
        "path_rmse": path_rmse,
    }


@dataclass
class RmseResult:
    reps: pd.DataFrame
    curve: pd.DataFrame

    def median(self, n: int, t: int, column: str = "rmse_unpenalized") -> float:
        sel = self.reps[(self.reps.n == n) & (self.reps.t == t)]
        return float(sel[column].median())

    def summary(self) -> pd.DataFrame:
        cols = ["rmse_unpenalized", "rmse_penalized"]
        return self.reps.groupby(["n", "t"])[cols].median().reset_index()


def run_rmse_experiment(
    sizes: Sequence = ((50, 3), (200, 10)),
    r: float = 1.0,
    reps: int = 50,
    seed: int = 0,
    grid=None,
    tuning=None,
    n_jobs: int = 1,
) -> RmseResult:
    """RMSE of the unpenalized fit and of the CV-tuned SCAD fit per panel size.

    The same seed is used for every size, so replications are paired.
    ``curve`` holds the mean RMSE along the lambda grid per size.
    """
    from .solution_path import default_lambda_grid
    from .tuning import TuningConfig

    grid = tuple(float(x) for x in (default_lambda_grid() if grid is None else grid))
    tuning = tuning or TuningConfig()
    jobs = [_RmseJob(DgpConfig(n, t, r, seed, reps), rep, grid, tuning) for n, t in sizes for rep in range(reps)]
    rows = _map(_rmse_rep, jobs, n_jobs)
    curve_rows = []
    for n, t in sizes:
        curves = np.array([row["path_rmse"] for row in rows if row["n"] == n and row["t"] == t])
        for lam, val in zip(grid, np.nanmean(curves, axis=0)):
            curve_rows.append({"n": n, "t": t, "lambda": lam, "log_lambda": math.log(lam), "mean_rmse": float(val)})
    table = pd.DataFrame([{k: v for k, v in row.items() if k != "path_rmse"} for row in rows])
    return RmseResult(table, pd.DataFrame(curve_rows))


# Detection and coverage -------------------------------------------------------


@dataclass(frozen=True)
class _DetectJob:
    cfg: DgpConfig
    rep: int
    tuning: object
    criteria: tuple
    points: Optional[tuple]
    level: float


def _detect_rep(job: _DetectJob) -> dict:
    from .inference import infer
    from .pipeline import all_targets, detect
    from .tuning import TuningConfig

    _quiet()
    d, truth = gen_dgp(job.cfg, job.rep)
    tun = TuningConfig(**{**job.tuning.to_dict(), "seed": job.tuning.seed + job.rep})
    det = detect(d, tun, criteria=job.criteria)
    out = {
        "rep": job.rep,
        "n_intervals": det.basis.n_intervals[0],
        "on_path": TRUE_LINEAR_SET in det.path.models,
        "selected": {c: det.reports[c].selected for c in job.criteria},
        "coverage": [],
    }
    if job.points is not None:
        crit = job.criteria[0]
        fit = det.refit(crit)
        rep = infer(fit, det.design, d.y, all_targets(d.n_regressors, job.points), job.level)
        for row in rep.rows:
            j, z0 = row.target.j, row.target.z0
            true = truth.beta(j) if z0 is None else float(truth.centered(j, z0))
            out["coverage"].append(
                {
                    "rep": job.rep,
                    "target": row.target.label,
                    "j": j + 1,
                    "z0": z0,
                    "estimate": row.estimate,
                    "truth": true,
                    "se": row.se,
                    "covered": row.covers(true),
                    "degenerate": row.degenerate,
                }
            )
    return out


def simulate_detection(
    cfg: DgpConfig, tuning=None, criteria=("cv", "aic", "bic"), points=None, level: float = 0.95, n_jobs: int = 1
) -> list:
    """Per-replication detection outcomes, plus interval rows when ``points``
    is given (intervals use the first criterion's selected model)."""
    from .tuning import TuningConfig

    tuning = tuning or TuningConfig()
    pts = None if points is None else tuple(float(z) for z in points)
    jobs = [_DetectJob(cfg, rep, tuning, tuple(criteria), pts, level) for rep in range(cfg.reps)]
    return _map(_detect_rep, jobs, n_jobs)


def detection_proportions(outcomes: list, truth=TRUE_LINEAR_SET) -> dict:
    """``SP`` and the correct-selection share of each criterion."""
    if not outcomes:
        raise InputError("no replications")
    out = {"SP": float(np.mean([o["on_path"] for o in outcomes]))}
    for crit in outcomes[0]["selected"]:
        out[crit.upper()] = float(np.mean([o["selected"][crit] == truth for o in outcomes]))
    return out


def run_detection_experiment(cfg: DgpConfig, tuning=None, n_jobs: int = 1) -> pd.DataFrame:
    """One-row table ``n, t, r, reps, SP, CV, AIC, BIC``."""
    props = detection_proportions(simulate_detection(cfg, tuning, n_jobs=n_jobs))
    return pd.DataFrame([{"n": cfg.n, "t": cfg.t, "r": cfg.r, "reps": cfg.reps, **props}])


def coverage_table(outcomes: list) -> pd.DataFrame:
    """Coverage rate per target, with mean standard error and degenerate share."""
    rows = pd.DataFrame([c for o in outcomes for c in o["coverage"]])
    if rows.empty:
        raise InputError("no interval rows recorded")
    rows["z0"] = rows["z0"].astype(object).where(rows["z0"].notna(), None)
    grouped = rows.groupby(["target", "j"], sort=False)
    table = grouped.agg(
        z0=("z0", "first"),
        coverage=("covered", "mean"),
        mean_se=("se", "mean"),
        degenerate=("degenerate", "mean"),
        reps=("covered", "size"),
    )
    return table.reset_index()


def run_coverage_experiment(
    cfg: DgpConfig, points: Sequence = COVERAGE_POINTS, level: float = 0.95, tuning=None, n_jobs: int = 1
) -> pd.DataFrame:
    """Coverage of pointwise intervals for ``f_j(z0)`` and ``beta_j`` after
    CV-based detection and an unpenalized refit."""
    outcomes = simulate_detection(cfg, tuning, criteria=("cv",), points=points, level=level, n_jobs=n_jobs)
    return coverage_table(outcomes)
