"""Within-transformed sieve least squares and the SCAD-penalized LQA solver.

All solves work on the within-demeaned design ``X~ = M_H [B_-, B_{1,~}, ...]``;
fixed effects never enter.  Coefficients are stored as ``theta = (v, u_1, ..., u_p)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy import linalg

from .errors import BelowThreshold, MaxIterExceeded, ShapeMismatch, SingularDesign
from .panel_data import within_demean
from .penalty import ScadParams, lqa_weight, scad_value
from .spline_basis import BasisEval, eval_basis

JITTER = 1e-10
ZERO_TOL = 1e-6
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200


@dataclass
class FitResult:
    """Coefficients of a fitted additive model on the centralized basis.

    ``f_j(z) = v[j] * psi_1(z) + u[j] @ Psi_~(z)``; components in
    ``linear_set`` have ``u[j]`` identically zero.  Component indices are
    0-based.
    """

    v: np.ndarray
    u: list
    linear_set: frozenset
    lam: float
    specs: tuple
    objective_trace: list = field(default_factory=list)
    converged: bool = True
    n_iter: int = 0
    group_norms: Optional[np.ndarray] = None

    @property
    def p(self) -> int:
        return self.v.size

    def coef(self) -> np.ndarray:
        return np.concatenate([self.v, *self.u])

    def component(self, j: int, z) -> np.ndarray:
        """Fitted ``f_j`` at scaled points ``z``."""
        b = eval_basis(self.specs[j], np.atleast_1d(z))
        return b[:, 0] * self.v[j] + b[:, 1:] @ self.u[j]

    def nonlinear_part(self, j: int, z) -> np.ndarray:
        b = eval_basis(self.specs[j], np.atleast_1d(z))
        return b[:, 1:] @ self.u[j]

    def fitted(self, design: BasisEval) -> np.ndarray:
        """``f(Z_it)`` for every row of ``design``, shape ``(N, T)``."""
        f = design.linear @ self.v
        for bj, uj in zip(design.nonlinear, self.u):
            f = f + bj @ uj
        return f.reshape(design.n, design.t)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "v": self.v.tolist(),
            "u": [uj.tolist() for uj in self.u],
            "linear_set": sorted(self.linear_set),
            "converged": self.converged,
            "n_iter": self.n_iter,
            "specs": [s.to_dict() for s in self.specs],
        }


def _as_matrix(y) -> np.ndarray:
    return np.asarray(getattr(y, "y", y), dtype=float)


def nt_inner(g_vals, f_vals) -> float:
    """``<g, f>_NT``: mean over individuals of the within-period covariance."""
    g = np.asarray(g_vals, dtype=float)
    f = np.asarray(f_vals, dtype=float)
    if g.shape != f.shape or g.ndim != 2:
        raise ShapeMismatch(f"expected two (N, T) arrays, got {g.shape} and {f.shape}")
    return float(np.sum(within_demean(g) * within_demean(f)) / g.size)


def nt_norm(g_vals) -> float:
    return math.sqrt(max(nt_inner(g_vals, g_vals), 0.0))


def solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric PSD system by equilibrated Cholesky.

    Columns are scaled to unit diagonal first; if the factorization fails a
    jitter of ``1e-10 * trace / dim`` is added.
    """
    dim = gram.shape[0]
    if dim == 0:
        return np.zeros((0,) + rhs.shape[1:])
    diag = np.diag(gram).copy()
    ok = diag > 1e-300
    s = np.where(ok, 1.0 / np.sqrt(np.where(ok, diag, 1.0)), 1.0)
    a = gram * s[:, None] * s[None, :]
    b = rhs * (s if rhs.ndim == 1 else s[:, None])
    jitter = JITTER * np.trace(a) / dim
    for attempt in range(2):
        try:
            factor = linalg.cho_factor(a, lower=True, check_finite=False)
            x = linalg.cho_solve(factor, b, check_finite=False)
        except linalg.LinAlgError:
            x = None
        if x is not None and np.all(np.isfinite(x)):
            return x * (s if rhs.ndim == 1 else s[:, None])
        if attempt == 0:
            if not (jitter > 0 and np.isfinite(jitter)):
                break
            a = a + jitter * np.eye(dim)
    raise SingularDesign("design Gram matrix is singular even after jitter")


class WithinProblem:
    """Demeaned design, response and Gram matrices for one sample."""

    def __init__(self, design: BasisEval, y):
        y = _as_matrix(y)
        if y.shape != (design.n, design.t):
            raise ShapeMismatch(f"response shape {y.shape} != design panel ({design.n}, {design.t})")
        self.design = design
        self.n, self.t = design.n, design.t
        self.nt = design.nt
        self.p = design.p
        self.slices = design.block_slices()
        x = design.full()
        self.xd = within_demean(x.reshape(self.n, self.t, -1)).reshape(self.nt, -1)
        self.yd = within_demean(y).reshape(-1)
        self.gram = self.xd.T @ self.xd
        self.xty = self.xd.T @ self.yd
        self.y_scale = math.sqrt(self.yd @ self.yd / self.nt)

    @property
    def dim(self) -> int:
        return self.xd.shape[1]

    def subset(self, individuals) -> "WithinProblem":
        idx = np.asarray(individuals, dtype=int)
        sub = object.__new__(WithinProblem)
        rows = (idx[:, None] * self.t + np.arange(self.t)).reshape(-1)
        sub.design = None
        sub.n, sub.t = idx.size, self.t
        sub.nt = sub.n * sub.t
        sub.p = self.p
        sub.slices = self.slices
        sub.xd = self.xd[rows]
        sub.yd = self.yd[rows]
        sub.gram = sub.xd.T @ sub.xd
        sub.xty = sub.xd.T @ sub.yd
        sub.y_scale = math.sqrt(sub.yd @ sub.yd / sub.nt)
        return sub

    def active_columns(self, linear_set: Iterable[int]) -> np.ndarray:
        keep = np.ones(self.dim, dtype=bool)
        for j in linear_set:
            keep[self.slices[j]] = False
        return np.flatnonzero(keep)

    def block_norms(self, theta: np.ndarray) -> np.ndarray:
        """``||f_{j,~}||_NT`` for every block."""
        out = np.empty(self.p)
        for j, s in enumerate(self.slices):
            g = self.xd[:, s] @ theta[s]
            out[j] = math.sqrt(g @ g / self.nt)
        return out

    def component_change(self, step: np.ndarray) -> float:
        """Largest ``||Delta f_j||_NT`` over components for a coefficient step."""
        if not self.dim:
            return 0.0
        out = 0.0
        for j, s in enumerate(self.slices):
            g = self.xd[:, j] * step[j] + self.xd[:, s] @ step[s]
            out = max(out, math.sqrt(g @ g / self.nt))
        return out

    def mse(self, theta: np.ndarray) -> float:
        r = self.yd - self.xd @ theta
        return float(r @ r / self.nt)

    def objective(self, theta: np.ndarray, params: ScadParams) -> float:
        pen = 0.0
        if params.lam > 0:
            pen = float(np.sum(scad_value(self.block_norms(theta), params)))
        return self.mse(theta) + pen

    def unpack(self, theta: np.ndarray, specs, lam: float, **kw) -> FitResult:
        v = theta[: self.p].copy()
        u = [theta[s].copy() for s in self.slices]
        lin = frozenset(j for j, uj in enumerate(u) if not np.any(uj))
        return FitResult(v, u, lin, lam, tuple(specs), group_norms=self.block_norms(theta), **kw)

    def solve_restricted(self, linear_set=()) -> np.ndarray:
        cols = self.active_columns(linear_set)
        theta = np.zeros(self.dim)
        theta[cols] = solve_gram(self.gram[np.ix_(cols, cols)], self.xty[cols])
        return theta


def _problem(design, y) -> WithinProblem:
    return design if isinstance(design, WithinProblem) else WithinProblem(design, y)


def _specs(prob: WithinProblem, specs):
    if specs is not None:
        return tuple(specs)
    return prob.design.specs if prob.design is not None else ()


def objective(design: BasisEval, y, v, u, params: ScadParams) -> float:
    """Penalized criterion ``l_NT``: within-demeaned mean squared residual
    plus ``sum_j p_lambda(||f_{j,~}||_NT)``."""
    y = _as_matrix(y)
    v = np.asarray(v, dtype=float)
    if y.shape != (design.n, design.t) or v.shape != (design.p,) or len(u) != design.p:
        raise ShapeMismatch("coefficients or response do not match the design")
    f = design.linear @ v
    norms = []
    for bj, uj in zip(design.nonlinear, u):
        uj = np.asarray(uj, dtype=float)
        if uj.shape != (bj.shape[1],):
            raise ShapeMismatch(f"block of length {uj.shape} for {bj.shape[1]} columns")
        g = (bj @ uj).reshape(design.n, design.t)
        f = f + g.reshape(-1)
        norms.append(nt_norm(g))
    resid = y - f.reshape(design.n, design.t)
    fid = float(np.mean(within_demean(resid) ** 2))
    pen = float(np.sum(scad_value(np.array(norms), params))) if params.lam > 0 else 0.0
    return fid + pen


def fit_unpenalized(design, y=None, restrict: Iterable[int] = (), specs=None) -> FitResult:
    """Within least squares on ``[B_-, B_{j,~} for j not in restrict]``.

    ``u_j`` is exactly zero for ``j`` in ``restrict``; ``restrict`` equal to
    all components gives the plain within-OLS on the ``p`` linear columns.
    """
    prob = _problem(design, y)
    restrict = frozenset(int(j) for j in restrict)
    theta = prob.solve_restricted(restrict)
    fit = prob.unpack(theta, _specs(prob, specs), 0.0, objective_trace=[prob.mse(theta)])
    fit.linear_set = fit.linear_set | restrict
    return fit


def fit_penalized_lqa(
    design,
    y=None,
    params: ScadParams = ScadParams(0.0),
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    init: Optional[np.ndarray] = None,
    zero_tol: float = ZERO_TOL,
    specs=None,
) -> FitResult:
    """Minimize ``l_NT`` by local quadratic approximation.

    Each iteration replaces every active penalty term by its majorizing
    quadratic at the current iterate and solves the resulting ridge system
    jointly over all active blocks.  Iteration stops once no component's
    fitted function moves by more than ``tol * ||Y||_NT`` in ``||.||_NT``
    (coefficients of the truncated-power basis are too ill-conditioned for an
    absolute coefficient test).  A block whose ``||f_{j,~}||_NT`` drops to
    ``zero_tol * ||Y||_NT`` or below is set to zero and stays zero.  ``init``
    is a full ``theta`` vector; by default the unpenalized fit is used.
    """
    prob = _problem(design, y)
    specs = _specs(prob, specs)
    theta = prob.solve_restricted(()) if init is None else np.array(init, dtype=float)
    if theta.shape != (prob.dim,):
        raise ShapeMismatch(f"init has shape {theta.shape}, expected ({prob.dim},)")
    if params.lam == 0.0:
        theta = prob.solve_restricted(())
        return prob.unpack(theta, specs, 0.0, objective_trace=[prob.mse(theta)], n_iter=1)

    scale = prob.y_scale if prob.y_scale > 0 else 1.0
    q_threshold = prob.nt * (zero_tol * scale) ** 2
    zeroed = set()
    trace = [prob.objective(theta, params)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        weights = {}
        for j, s in enumerate(prob.slices):
            if j in zeroed:
                continue
            g = prob.xd[:, s] @ theta[s]
            try:
                weights[j] = lqa_weight(float(g @ g), prob.nt, params, q_threshold)
            except BelowThreshold:
                zeroed.add(j)
                theta[s] = 0.0
        cols = prob.active_columns(zeroed)
        a = prob.gram.copy()
        for j, w in weights.items():
            if w:
                s = prob.slices[j]
                a[s, s] += 0.5 * w * prob.gram[s, s]
        new = np.zeros(prob.dim)
        new[cols] = solve_gram(a[np.ix_(cols, cols)], prob.xty[cols])
        delta = prob.component_change(new - theta) / scale
        theta = new
        trace.append(prob.objective(theta, params))
        if delta < tol:
            converged = True
            break
    late = [
        j
        for j, s in enumerate(prob.slices)
        if j not in zeroed and np.any(theta[s]) and float(np.sum((prob.xd[:, s] @ theta[s]) ** 2)) <= q_threshold
    ]
    if late:
        for j in late:
            theta[prob.slices[j]] = 0.0
        trace.append(prob.objective(theta, params))
    if not converged:
        warnings.warn(
            f"LQA did not converge in {max_iter} iterations (lambda={params.lam:g})",
            MaxIterExceeded,
            stacklevel=2,
        )
    fit = prob.unpack(theta, specs, params.lam, objective_trace=trace, converged=converged, n_iter=it)
    return fit
