"""SCAD fits over an ascending lambda grid and the candidate linear sets they imply."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .errors import EmptyGrid, SievePanelError, UnsortedGrid
from .estimator import FitResult, WithinProblem, fit_penalized_lqa
from .penalty import DEFAULT_KAPPA, ScadParams

log = logging.getLogger(__name__)


def default_lambda_grid() -> np.ndarray:
    """``exp(-6), exp(-5.9), ..., exp(1)``: 71 values."""
    return np.exp(np.round(np.linspace(-6.0, 1.0, 71), 1))


@dataclass
class SolutionPath:
    grid: np.ndarray
    fits: list
    models: list = field(default_factory=list)
    intervals: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def to_frame(self, names=None) -> pd.DataFrame:
        """Long table ``lambda, j, group_norm, is_linear`` (``j`` is 1-based)."""
        rows = []
        for lam, fit in zip(self.grid, self.fits):
            if fit is None:
                continue
            for j, norm in enumerate(fit.group_norms):
                row = {"lambda": float(lam), "j": j + 1, "group_norm": float(norm), "is_linear": j in fit.linear_set}
                if names is not None:
                    row["name"] = names[j]
                rows.append(row)
        return pd.DataFrame(rows)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise EmptyGrid("lambda grid is empty")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise EmptyGrid("lambda grid must hold finite nonnegative values")
    if np.any(np.diff(grid) <= 0):
        raise UnsortedGrid("lambda grid must be strictly increasing")
    return grid


def fit_path(
    design,
    y=None,
    grid=None,
    kappa: float = DEFAULT_KAPPA,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> SolutionPath:
    """Fit every lambda of an ascending grid, warm-starting each fit.

    The start for ``lambda_k`` is the fit at ``lambda_{k-1}`` with any zeroed
    block put back at its unpenalized value, so a block can re-enter the model
    further along the path.
    """
    prob = design if isinstance(design, WithinProblem) else WithinProblem(design, y)
    specs = prob.design.specs if prob.design is not None else ()
    grid = _check_grid(default_lambda_grid() if grid is None else grid)
    opts = {}
    if max_iter is not None:
        opts["max_iter"] = max_iter
    if tol is not None:
        opts["tol"] = tol

    full = prob.solve_restricted(())
    start = full
    fits, failures = [], {}
    for k, lam in enumerate(grid):
        try:
            fit = fit_penalized_lqa(prob, params=ScadParams(float(lam), kappa), init=start, specs=specs, **opts)
        except SievePanelError as exc:
            log.warning("path fit failed at lambda=%g: %s", lam, exc)
            failures[k] = str(exc)
            fits.append(None)
            continue
        fits.append(fit)
        start = fit.coef()
        for j in fit.linear_set:
            s = prob.slices[j]
            start[s] = full[s]
    path = SolutionPath(grid, fits, failures=failures)
    path.models, path.intervals = _models_with_intervals(path)
    return path


def _models_with_intervals(path: SolutionPath):
    models, intervals = [], []
    for lam, fit in zip(path.grid, path.fits):
        if fit is None:
            continue
        key = frozenset(fit.linear_set)
        if key in models:
            lo, hi = intervals[models.index(key)]
            intervals[models.index(key)] = (lo, max(hi, float(lam)))
        else:
            models.append(key)
            intervals.append((float(lam), float(lam)))
    return models, intervals


def extract_models(path: SolutionPath) -> list:
    """Distinct linear sets along the path, in order of first appearance."""
    return _models_with_intervals(path)[0]
