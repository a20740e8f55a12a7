"""Riesz representers, HAC variance and confidence intervals for a fitted
model restricted to a detected linear set.

Targets are linear coefficients ``beta_j`` (``z0=None``) or point values
``f_j(z0)``.  For a target with representer ``v*``, the standard error is
``sqrt(<v*, v*>_sd_hat / NT)`` where the sd inner product is estimated by a
kernel-weighted sum of within-individual autocovariances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InputError, MissingEvaluationPoint, NumericalError, ShapeMismatch, SingularVNT, WindowTooLarge
from .estimator import FitResult, solve_gram
from .panel_data import within_demean
from .spline_basis import BasisEval, eval_basis

KERNELS = ("bartlett", "uniform")


@dataclass
class RestrictedBasis:
    """Design of the model whose components in ``linear_set`` are linear.

    Column order: ``psi_{j,1}`` for every linear ``j`` (ascending), then the
    full ``Psi_j = [psi_{j,1}, Psi_{j,~}]`` for every other ``j``.
    ``linear_col[j]`` locates ``psi_{j,1}`` for every ``j``; ``blocks[j]`` is
    the column slice of ``Psi_j`` for nonlinear ``j``.
    """

    x: np.ndarray
    xd: np.ndarray
    linear_set: frozenset
    linear_col: dict
    blocks: dict
    specs: tuple
    n: int
    t: int

    @classmethod
    def build(cls, design: BasisEval, linear_set) -> "RestrictedBasis":
        lin = frozenset(int(j) for j in linear_set)
        cols, linear_col, blocks = [], {}, {}
        pos = 0
        for j in sorted(lin):
            cols.append(design.linear[:, [j]])
            linear_col[j] = pos
            pos += 1
        for j in range(design.p):
            if j in lin:
                continue
            width = 1 + design.nonlinear[j].shape[1]
            cols.append(design.linear[:, [j]])
            cols.append(design.nonlinear[j])
            linear_col[j] = pos
            blocks[j] = slice(pos, pos + width)
            pos += width
        x = np.hstack(cols)
        xd = within_demean(x.reshape(design.n, design.t, -1)).reshape(design.nt, -1)
        return cls(x, xd, lin, linear_col, blocks, design.specs, design.n, design.t)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def nt(self) -> int:
        return self.n * self.t

    def coefficients(self, fit: FitResult) -> np.ndarray:
        """``fit`` expressed in this basis; requires ``u_j = 0`` on the linear set."""
        out = np.empty(self.dim)
        for j in range(fit.p):
            if j in self.linear_set:
                if np.any(fit.u[j]):
                    raise InputError(f"component {j} is declared linear but the fit has a nonlinear part")
                out[self.linear_col[j]] = fit.v[j]
            else:
                s = self.blocks[j]
                out[s.start] = fit.v[j]
                out[s.start + 1 : s.stop] = fit.u[j]
        return out

    def target_vector(self, j: int, z0: Optional[float] = None) -> np.ndarray:
        """``c*`` such that ``c*' coef`` is ``beta_j`` or ``f_j(z0)``."""
        c = np.zeros(self.dim)
        if z0 is None:
            c[self.linear_col[j]] = 1.0
            return c
        if not 0.0 <= z0 <= 1.0:
            raise MissingEvaluationPoint(f"evaluation point must lie in [0, 1], got {z0}")
        if j in self.linear_set:
            c[self.linear_col[j]] = z0 - 0.5
        else:
            c[self.blocks[j]] = eval_basis(self.specs[j], float(z0))
        return c


def build_V_NT(rb: RestrictedBasis) -> np.ndarray:
    """``(NT)^-1`` times the Gram matrix of the within-demeaned restricted design."""
    v = rb.xd.T @ rb.xd / rb.nt
    return 0.5 * (v + v.T)


def riesz_representer(rb: RestrictedBasis, v_nt: np.ndarray, j: int, z0: Optional[float] = None):
    """Return ``(c*, V_NT^-1 c*)``; the representer is ``Psi0(z)' V_NT^-1 c*``.

    With ``z0=None`` the target is the coefficient on ``psi_{j,1}``, which is
    defined for nonlinear components too.
    """
    if j not in rb.linear_col:
        raise InputError(f"no component {j}")
    c = rb.target_vector(j, z0)
    try:
        a = solve_gram(v_nt, c)
    except NumericalError as exc:
        raise SingularVNT(str(exc)) from None
    return c, a


def residuals(fit: FitResult, design: BasisEval, y) -> np.ndarray:
    """``H (Y_i - f^_i)`` for every individual, shape ``(N, T)``."""
    y = np.asarray(getattr(y, "y", y), dtype=float)
    return within_demean(y - fit.fitted(design))


def kernel_weights(l_t: int, kernel: str = "bartlett") -> np.ndarray:
    kernel = kernel.lower()
    if kernel not in KERNELS:
        raise InputError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    lags = np.arange(1, l_t + 1)
    if kernel == "bartlett":
        return 1.0 - lags / (l_t + 1.0)
    return np.ones(l_t)


def default_window(t: int) -> int:
    return min(t - 1, math.ceil(round(t ** (1.0 / 3.0), 10)))


def hac_sd_inner(u_vals, v_vals, eps, l_t: int, weights=None, kernel: str = "bartlett") -> float:
    """Estimate of ``<u, v>_sd``: ``N^-1 sum_i S_i`` with
    ``S_i = S_i0 + 2 sum_{j<=l_T} k_j S_ij`` and
    ``S_ij = T^-1 sum_{t>j} u_it v_i,t-j e_it e_i,t-j``.
    """
    u = np.asarray(u_vals, dtype=float)
    v = np.asarray(v_vals, dtype=float)
    e = np.asarray(eps, dtype=float)
    if not (u.shape == v.shape == e.shape) or u.ndim != 2:
        raise ShapeMismatch("u, v and residuals must share one (N, T) shape")
    n, t = u.shape
    if l_t < 0 or l_t >= t:
        raise WindowTooLarge(f"window {l_t} must satisfy 0 <= l_T < T={t}")
    k = kernel_weights(l_t, kernel) if weights is None else np.asarray(weights, dtype=float)
    if k.shape != (l_t,):
        raise InputError(f"need {l_t} kernel weights, got {k.shape}")
    a = u * e
    b = v * e
    s = np.sum(a * b, axis=1) / t
    for lag in range(1, l_t + 1):
        s = s + 2.0 * k[lag - 1] * np.sum(a[:, lag:] * b[:, :-lag], axis=1) / t
    return float(np.mean(s))


def hac_matrix(values: np.ndarray, eps: np.ndarray, l_t: int, weights) -> np.ndarray:
    """All pairwise :func:`hac_sd_inner` values for representer columns.

    ``values`` has shape ``(N, T, K)``; entry ``[a, b]`` uses column ``a`` as
    ``u`` and column ``b`` as ``v``.
    """
    n, t, _ = values.shape
    w = values * eps[:, :, None]
    out = np.einsum("ita,itb->ab", w, w) / t
    for lag in range(1, l_t + 1):
        out += 2.0 * weights[lag - 1] * np.einsum("ita,itb->ab", w[:, lag:], w[:, :-lag]) / t
    return out / n


@dataclass
class Target:
    j: int
    z0: Optional[float] = None

    @property
    def label(self) -> str:
        return f"beta_{self.j + 1}" if self.z0 is None else f"f_{self.j + 1}({self.z0:g})"


@dataclass
class InferenceRow:
    target: Target
    estimate: float
    se: float
    lower: float
    upper: float

    @property
    def degenerate(self) -> bool:
        return self.se == 0.0

    def covers(self, truth: float, slack: float = 1e-10) -> bool:
        return self.lower - slack <= truth <= self.upper + slack

    def to_dict(self, names=None) -> dict:
        out = {
            "target": self.target.label,
            "j": self.target.j + 1,
            "z0": self.target.z0,
            "estimate": self.estimate,
            "se": self.se,
            "lower": self.lower,
            "upper": self.upper,
            "degenerate": self.degenerate,
        }
        if names is not None:
            out["name"] = names[self.target.j]
        return out


@dataclass
class InferenceReport:
    rows: list
    sigma: np.ndarray
    level: float
    linear_set: frozenset
    l_t: int
    kernel: str
    lambda_inf: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def to_dict(self, names=None) -> dict:
        return {
            "level": self.level,
            "linear_set": sorted(j + 1 for j in self.linear_set),
            "lambda_inf": self.lambda_inf,
            "l_T": self.l_t,
            "kernel": self.kernel,
            "targets": [r.to_dict(names) for r in self.rows],
            "sigma_hat": self.sigma.tolist(),
            **self.meta,
        }


def _targets(targets) -> list:
    out = []
    for tgt in targets:
        out.append(tgt if isinstance(tgt, Target) else Target(int(tgt[0]), None if tgt[1] is None else float(tgt[1])))
    return out


def _check_level(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise InputError(f"confidence level must lie in (0, 1), got {level}")
    return float(level)


def infer(
    fit: FitResult,
    design: BasisEval,
    y,
    targets: Sequence,
    level: float = 0.95,
    l_t: Optional[int] = None,
    kernel: str = "bartlett",
    lambda_inf: Optional[float] = None,
) -> InferenceReport:
    """Point estimates, standard errors, intervals and joint covariance.

    ``fit`` should be the unpenalized refit restricted to the detected linear
    set; its ``linear_set`` defines the restricted basis.
    """
    level = _check_level(level)
    targets = _targets(targets)
    if not targets:
        raise InputError("no inference targets")
    t = design.t
    l_t = default_window(t) if l_t is None else int(l_t)
    if l_t < 0 or l_t >= t:
        raise WindowTooLarge(f"window {l_t} must satisfy 0 <= l_T < T={t}")
    weights = kernel_weights(l_t, kernel)

    rb = RestrictedBasis.build(design, fit.linear_set)
    coef = rb.coefficients(fit)
    v_nt = build_V_NT(rb)
    cs = np.column_stack([rb.target_vector(tg.j, tg.z0) for tg in targets])
    try:
        reps = solve_gram(v_nt, cs)
    except NumericalError as exc:
        raise SingularVNT(str(exc)) from None
    eps = residuals(fit, design, y)
    vals = (rb.xd @ reps).reshape(design.n, t, -1)
    sigma = hac_matrix(vals, eps, l_t, weights) / design.nt
    sigma = 0.5 * (sigma + sigma.T)

    zq = stats.norm.ppf(0.5 + level / 2.0)
    rows = []
    for a, tg in enumerate(targets):
        est = float(cs[:, a] @ coef)
        se = math.sqrt(max(sigma[a, a], 0.0))
        rows.append(InferenceRow(tg, est, se, est - zq * se, est + zq * se))
    return InferenceReport(rows, sigma, level, fit.linear_set, l_t, kernel.lower(), lambda_inf)


def pointwise_ci(fit, design, y, j: int, z0: Optional[float] = None, level: float = 0.95, **kw) -> InferenceRow:
    """Confidence interval for ``beta_j`` (``z0=None``) or ``f_j(z0)``."""
    return infer(fit, design, y, [Target(j, z0)], level, **kw).rows[0]


def joint_cov(fit, design, y, targets, **kw) -> np.ndarray:
    """Estimated covariance of the stacked target estimators."""
    return infer(fit, design, y, targets, **kw).sigma
