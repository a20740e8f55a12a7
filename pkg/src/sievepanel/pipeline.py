"""End-to-end detection: basis selection, solution path, model choice, refit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimator import FitResult, WithinProblem, fit_unpenalized
from .inference import InferenceReport, Target, infer
from .solution_path import SolutionPath, default_lambda_grid, fit_path
from .spline_basis import BasisEval, build_design, uniform_specs
from .tuning import (
    BasisSelection,
    FoldSet,
    ModelSelectionReport,
    TuningConfig,
    kfold_split,
    lambda_for_inference,
    select_bandwidth_degree,
    select_model,
)


@dataclass
class Detection:
    basis: BasisSelection
    design: BasisEval
    problem: WithinProblem
    path: SolutionPath
    reports: dict
    folds: list = field(repr=False, default_factory=list)

    def report(self, criterion: str = "cv") -> ModelSelectionReport:
        return self.reports[criterion]

    def refit(self, criterion: str = "cv") -> FitResult:
        """Unpenalized fit restricted to the selected linear set."""
        return fit_unpenalized(self.problem, restrict=self.reports[criterion].selected, specs=self.design.specs)


def design_for(d, degrees, n_intervals) -> BasisEval:
    return build_design(d, uniform_specs(d.n_regressors, degrees, n_intervals))


def detect(d, config: Optional[TuningConfig] = None, criteria=None) -> Detection:
    """Run basis selection, the solution path and model selection on ``d``.

    ``criteria`` lists the selection rules to evaluate (default: the config's
    criterion); each gets its own report with ``lambda_inf`` filled in when the
    selected set lies on the path.
    """
    config = config or TuningConfig()
    criteria = [config.criterion] if criteria is None else [c.lower() for c in criteria]
    folds = kfold_split(d.n_individuals, config.k_folds, config.seed)
    basis = select_bandwidth_degree(d, config.degrees, config.inverse_bandwidths, folds=folds, clamp=config.clamp_heldout)
    design = design_for(d, basis.degrees, basis.n_intervals)
    foldset = FoldSet(d, design.specs, folds, config.clamp_heldout)
    prob = foldset.full
    grid = default_lambda_grid() if config.lambda_grid is None else np.asarray(config.lambda_grid)
    path = fit_path(prob, grid=grid, kappa=config.kappa)
    reports = {}
    for crit in criteria:
        rep = select_model(path.models, d, design.specs, crit, folds=foldset)
        rep.lambda_inf = lambda_for_inference(path, rep.selected)
        reports[crit] = rep
    return Detection(basis, design, prob, path, reports, folds)


def all_targets(p: int, points=(0.0, 0.25, 0.5, 0.75, 1.0)) -> list:
    """``beta_j`` and ``f_j(z0)`` for every component and point."""
    out = [Target(j) for j in range(p)]
    out += [Target(j, float(z0)) for j in range(p) for z0 in points]
    return out


def detect_and_infer(d, config=None, targets=None, level=0.95, l_t=None, kernel="bartlett"):
    det = detect(d, config)
    crit = next(iter(det.reports))
    fit = det.refit(crit)
    targets = all_targets(d.n_regressors) if targets is None else targets
    rep = infer(fit, det.design, d.y, targets, level, l_t, kernel, det.reports[crit].lambda_inf)
    return det, fit, rep
