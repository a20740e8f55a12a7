"""Cross-validation over individuals, and selection of basis size, lambda and
the detected linear set."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyGrid,
    EmptyModelList,
    InputError,
    ModelNotOnPath,
    NoValidCandidate,
    SievePanelError,
    TooManyFolds,
)
from .estimator import WithinProblem, fit_penalized_lqa
from .penalty import DEFAULT_KAPPA, ScadParams
from .spline_basis import build_design, uniform_specs

CRITERIA = ("cv", "aic", "bic")


@dataclass
class TuningConfig:
    k_folds: int = 5
    degrees: tuple = (3,)
    inverse_bandwidths: Optional[tuple] = None
    lambda_grid: Optional[tuple] = None
    seed: int = 0
    kappa: float = DEFAULT_KAPPA
    criterion: str = "cv"
    clamp_heldout: bool = True

    def __post_init__(self):
        if int(self.k_folds) != self.k_folds or self.k_folds < 2:
            raise InputError(f"k_folds must be an integer >= 2, got {self.k_folds}")
        self.degrees = tuple(int(r) for r in self.degrees)
        if not self.degrees:
            raise EmptyGrid("no degree candidates")
        if self.inverse_bandwidths is not None:
            self.inverse_bandwidths = tuple(int(m) for m in self.inverse_bandwidths)
            if not self.inverse_bandwidths:
                raise EmptyGrid("no bandwidth candidates")
        if self.lambda_grid is not None:
            self.lambda_grid = tuple(float(x) for x in self.lambda_grid)
            if not self.lambda_grid:
                raise EmptyGrid("lambda grid is empty")
        self.criterion = self.criterion.lower()
        if self.criterion not in CRITERIA:
            raise InputError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")

    @classmethod
    def from_json(cls, path) -> "TuningConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown tuning config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


def kfold_split(n: int, k: int, seed: int = 0) -> list:
    """Random partition of individuals ``0..n-1`` into ``k`` near-equal folds."""
    if k < 2:
        raise InputError(f"need k >= 2 folds, got {k}")
    if k > n:
        raise TooManyFolds(f"{k} folds for {n} individuals")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def default_inverse_bandwidths(nt: int) -> tuple:
    """``ceil(c * (NT)^(1/4)) + 2`` for ``c = 0.3, 0.4, ..., 2``, deduplicated."""
    base = nt**0.25
    cs = np.round(np.arange(3, 21) / 10.0, 1)
    return tuple(sorted({math.ceil(round(c * base, 10)) + 2 for c in cs}))


def _complement(n: int, fold) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[fold] = False
    return np.flatnonzero(mask)


class FoldSet:
    """Training and held-out problems for every fold, for one basis.

    With ``clamp=True`` the held-out regressors are clipped to the range seen
    in the training fold before the basis is evaluated, so a held-out
    individual beyond the training support is scored against the fit's
    boundary value instead of a polynomial extrapolation.
    """

    def __init__(self, d, specs, folds, clamp: bool = True):
        self.specs = tuple(specs)
        self.folds = [np.asarray(f, dtype=int) for f in folds]
        self.full = WithinProblem(build_design(d, self.specs), d.y)
        self.train, self.test = [], []
        n = d.n_individuals
        for fold in self.folds:
            rest = _complement(n, fold)
            self.train.append(self.full.subset(rest))
            if clamp:
                lo = d.z[rest].min(axis=(0, 1))
                hi = d.z[rest].max(axis=(0, 1))
                z = np.clip(d.z[fold], lo, hi)
                self.test.append(WithinProblem(build_design(z, self.specs), d.y[fold]))
            else:
                self.test.append(self.full.subset(fold))

    def score(self, lam: float = 0.0, kappa: float = DEFAULT_KAPPA, linear_set=()) -> float:
        """Held-out within-demeaned squared error, summed over folds.

        Each fold term is averaged over its own ``N_s * T`` cells; residuals of
        a held-out individual are centered on that individual's time mean.
        """
        total = 0.0
        for train, test in zip(self.train, self.test):
            total += test.mse(_fold_fit(train, lam, kappa, linear_set))
        return total

    def path_scores(self, grid, kappa: float = DEFAULT_KAPPA) -> dict:
        """CV value for every lambda of an ascending grid, using one
        warm-started solution path per training fold.  Lambdas whose fit
        failed in any fold are dropped."""
        from .solution_path import fit_path

        grid = np.asarray(grid, dtype=float)
        totals = np.zeros(grid.size)
        ok = np.ones(grid.size, dtype=bool)
        for train, test in zip(self.train, self.test):
            path = fit_path(train, grid=grid, kappa=kappa)
            for k, fit in enumerate(path.fits):
                if fit is None:
                    ok[k] = False
                else:
                    totals[k] += test.mse(fit.coef())
        return {float(lam): float(v) for lam, v, good in zip(grid, totals, ok) if good}


def _fold_fit(train: WithinProblem, lam: float, kappa: float, linear_set=()):
    if lam == 0.0:
        return train.solve_restricted(linear_set)
    fit = fit_penalized_lqa(train, params=ScadParams(lam, kappa))
    return fit.coef()


@dataclass(frozen=True)
class TuningPoint:
    degrees: tuple
    n_intervals: tuple
    lam: float = 0.0


def cv_score(d, theta: TuningPoint, folds, kappa: float = DEFAULT_KAPPA, clamp: bool = True) -> float:
    """Cross-validation value of a full tuning point on dataset ``d``."""
    specs = uniform_specs(d.n_regressors, theta.degrees, theta.n_intervals)
    return FoldSet(d, specs, folds, clamp).score(theta.lam, kappa)


@dataclass
class BasisSelection:
    degrees: tuple
    n_intervals: tuple
    scores: dict = field(default_factory=dict)

    @property
    def bandwidths(self) -> tuple:
        return tuple(1.0 / m for m in self.n_intervals)


def select_bandwidth_degree(
    d,
    degree_candidates: Sequence = (3,),
    interval_candidates: Optional[Sequence] = None,
    folds=None,
    k: int = 5,
    seed: int = 0,
    clamp: bool = True,
) -> BasisSelection:
    """Pick degrees and knot counts minimizing the unpenalized CV value.

    Flat candidate lists are shared across components; a list of per-component
    lists searches their product.  Ties go to the earlier (smaller) candidate.
    """
    p = d.n_regressors
    if interval_candidates is None:
        interval_candidates = default_inverse_bandwidths(d.nt)
    if len(degree_candidates) == 0 or len(interval_candidates) == 0:
        raise EmptyGrid("empty degree or bandwidth candidate grid")
    folds = kfold_split(d.n_individuals, k, seed) if folds is None else folds

    def expand(cands):
        if np.ndim(cands[0]) == 0:
            return [(int(c),) * p for c in cands]
        if len(cands) != p:
            raise InputError("per-component candidate lists must have one entry per regressor")
        return [tuple(int(c) for c in combo) for combo in itertools.product(*cands)]

    scores = {}
    best, best_score = None, math.inf
    for degrees in expand(list(degree_candidates)):
        for ms in expand(list(interval_candidates)):
            try:
                score = cv_score(d, TuningPoint(degrees, ms, 0.0), folds, clamp=clamp)
            except SievePanelError:
                continue
            scores[(degrees, ms)] = score
            if score < best_score:
                best, best_score = (degrees, ms), score
    if best is None:
        raise NoValidCandidate("every basis candidate failed")
    return BasisSelection(best[0], best[1], scores)


def select_lambda_estimation(
    d, degrees, n_intervals, grid, folds=None, kappa: float = DEFAULT_KAPPA, k: int = 5, seed: int = 0, clamp: bool = True
):
    """Lambda minimizing the penalized CV value for a fixed basis.

    Returns ``(lambda_opt, scores)`` with ``scores`` keyed by lambda; ties go
    to the smaller lambda.
    """
    grid = [float(x) for x in np.atleast_1d(np.asarray(grid, dtype=float))]
    if not grid:
        raise EmptyGrid("lambda grid is empty")
    folds = kfold_split(d.n_individuals, k, seed) if folds is None else folds
    specs = uniform_specs(d.n_regressors, degrees, n_intervals)
    return select_lambda_folds(FoldSet(d, specs, folds, clamp), grid, kappa)


def select_lambda_folds(fs: FoldSet, grid, kappa: float = DEFAULT_KAPPA):
    """Lambda minimizing the CV value over ``grid`` (ties to the smaller one).

    A strictly increasing grid is scored along warm-started fold paths;
    otherwise each lambda is fitted from a cold start.
    """
    grid = [float(x) for x in grid]
    if len(grid) > 1 and np.all(np.diff(grid) > 0):
        scores = fs.path_scores(grid, kappa)
    else:
        scores = {}
        for lam in grid:
            try:
                scores[lam] = fs.score(lam, kappa)
            except SievePanelError:
                continue
    if not scores:
        raise NoValidCandidate("every lambda candidate failed")
    best = min(scores, key=lambda lam: (scores[lam], lam))
    return best, scores


@dataclass
class ModelSelectionReport:
    models: list
    scores: list
    criterion: str
    selected: frozenset
    lambda_inf: Optional[float] = None

    def to_dict(self, names=None) -> dict:
        def label(m):
            return sorted(j + 1 for j in m)

        out = {
            "criterion": self.criterion,
            "models": [label(m) for m in self.models],
            "scores": [float(s) for s in self.scores],
            "selected": label(self.selected),
            "lambda_inf": self.lambda_inf,
        }
        if names is not None:
            out["selected_names"] = [names[j] for j in sorted(self.selected)]
        return out


def information_criterion(prob: WithinProblem, linear_set, criterion: str) -> float:
    """Gaussian-profile AIC/BIC of the unpenalized fit restricted to ``linear_set``."""
    theta = prob.solve_restricted(linear_set)
    rss = prob.mse(theta) * prob.nt
    df = prob.p + sum(s.stop - s.start for j, s in enumerate(prob.slices) if j not in linear_set)
    penalty = 2.0 if criterion == "aic" else math.log(prob.nt)
    return prob.nt * math.log(max(rss, np.finfo(float).tiny) / prob.nt) + penalty * df


def select_model(models, d, specs, criterion: str = "cv", folds=None, k: int = 5, seed: int = 0, clamp: bool = True) -> ModelSelectionReport:
    """Choose among candidate linear sets by CV of restricted unpenalized
    fits, or by AIC/BIC of the full-sample restricted fit.

    ``folds`` may be a list of index arrays or a prebuilt :class:`FoldSet`.

    Ties go to the model with more linear components, then to the earlier one.
    """
    models = [frozenset(m) for m in models]
    if not models:
        raise EmptyModelList("no candidate models")
    criterion = criterion.lower()
    if criterion not in CRITERIA:
        raise InputError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    if criterion == "cv":
        if not isinstance(folds, FoldSet):
            folds = kfold_split(d.n_individuals, k, seed) if folds is None else folds
            folds = FoldSet(d, specs, folds, clamp)
        scores = [folds.score(0.0, linear_set=m) for m in models]
    else:
        prob = folds.full if isinstance(folds, FoldSet) else WithinProblem(build_design(d, specs), d.y)
        scores = [information_criterion(prob, m, criterion) for m in models]
    best = min(scores)
    tol = 1e-12 * max(1.0, abs(best))
    tied = [i for i, s in enumerate(scores) if s <= best + tol]
    pick = min(tied, key=lambda i: (-len(models[i]), i))
    return ModelSelectionReport(models, scores, criterion, models[pick])


def lambda_for_inference(path, linear_set) -> float:
    """Smallest grid lambda whose fit declares exactly ``linear_set`` linear."""
    target = frozenset(linear_set)
    for lam, fit in zip(path.grid, path.fits):
        if fit is not None and fit.linear_set == target:
            return float(lam)
    raise ModelNotOnPath(f"linear set {sorted(target)} does not occur on the path")
