"""Centralized spline basis on [0, 1].

Every basis function integrates to zero over [0, 1], and every function other
than ``psi_1(z) = z - 1/2`` is L2-orthogonal to ``psi_1``.  A fitted component
therefore splits uniquely into a linear part ``v * psi_1`` and a nonlinear part
spanned by ``[psi_2, ..., psi_r, psi~_1, ..., psi~_{M-1}]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidKnotCount, InvalidKnots, PanelShapeError, ShapeMismatch


def make_uniform_knots(m: int) -> np.ndarray:
    """Knots ``0, 1/M, ..., 1`` (endpoints exact)."""
    if int(m) != m or m < 1:
        raise InvalidKnotCount(f"number of intervals must be an integer >= 1, got {m}")
    knots = np.arange(m + 1, dtype=float) / m
    knots[0], knots[-1] = 0.0, 1.0
    return knots


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Degree and knot sequence of one component's centralized spline space."""

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise InvalidKnots(f"degree must be an integer >= 1, got {self.degree}")
        knots = np.asarray(self.knots, dtype=float).reshape(-1)
        if knots.size < 2:
            raise InvalidKnotCount("need at least the two boundary knots")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise InvalidKnots("boundary knots must be exactly 0 and 1")
        if np.any(np.diff(knots) <= 0):
            raise InvalidKnots("knots must be strictly increasing")
        knots.setflags(write=False)
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "knots", knots)

    def __eq__(self, other):
        if not isinstance(other, BasisSpec):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))

    @classmethod
    def uniform(cls, degree: int, m: int) -> "BasisSpec":
        return cls(degree, make_uniform_knots(m))

    @property
    def n_intervals(self) -> int:
        return self.knots.size - 1

    @property
    def bandwidth(self) -> float:
        """Largest gap between successive knots."""
        return float(np.max(np.diff(self.knots)))

    @property
    def dim(self) -> int:
        """Dimension of the full space, ``M + r - 1``."""
        return self.n_intervals + self.degree - 1

    @property
    def nonlinear_dim(self) -> int:
        return self.n_intervals + self.degree - 2

    def to_dict(self) -> dict:
        return {"degree": self.degree, "knots": self.knots.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        return cls(int(d["degree"]), np.array(d["knots"], dtype=float))


def psi_poly(k: int, z):
    """Centered, linear-orthogonalized monomial of degree ``k``."""
    z = np.asarray(z, dtype=float)
    if k == 1:
        return z - 0.5
    return (z**k - 1.0 / (k + 1)) - 6.0 * k / ((k + 1) * (k + 2)) * (z - 0.5)


def psi_trunc(k: int, r: int, knots, z):
    """Centered, linear-orthogonalized truncated power ``(z - t_k)_+^r``."""
    z = np.asarray(z, dtype=float)
    tk = float(np.asarray(knots)[k])
    s = 1.0 - tk
    slope = 6.0 * s ** (r + 1) / (r + 1) - 12.0 * s ** (r + 2) / ((r + 1) * (r + 2))
    return (np.maximum(z - tk, 0.0) ** r - s ** (r + 1) / (r + 1)) - slope * (z - 0.5)


def _clamp(z):
    z = np.asarray(z, dtype=float)
    if np.any((z < 0.0) | (z > 1.0)):
        warnings.warn("basis evaluated outside [0, 1]; values clamped", RuntimeWarning, stacklevel=3)
        z = np.clip(z, 0.0, 1.0)
    return z


def eval_basis(spec: BasisSpec, z) -> np.ndarray:
    """Evaluate ``[psi_1, psi_2..psi_r, psi~_1..psi~_{M-1}]`` at ``z``.

    Scalar ``z`` gives a vector of length ``M + r - 1``; an array gives one row
    per point.
    """
    scalar = np.ndim(z) == 0
    z = _clamp(np.atleast_1d(z)).reshape(-1)
    r = spec.degree
    cols = [psi_poly(k, z) for k in range(1, r + 1)]
    cols += [psi_trunc(k, r, spec.knots, z) for k in range(1, spec.n_intervals)]
    out = np.column_stack(cols)
    return out[0] if scalar else out


def eval_nonlinear(spec: BasisSpec, z) -> np.ndarray:
    """Nonlinear block ``Psi_~(z)``, shape ``(len(z), M + r - 2)``."""
    return eval_basis(spec, np.atleast_1d(z))[:, 1:]


@dataclass(frozen=True)
class BasisEval:
    """Evaluated design blocks for a panel.

    ``linear`` is ``B_-`` with shape ``(NT, p)``; ``nonlinear[j]`` is
    ``B_{j,~}`` with shape ``(NT, M_j + r_j - 2)``.  Rows follow the panel's
    individual-then-time order.
    """

    linear: np.ndarray
    nonlinear: tuple
    specs: tuple
    n: int
    t: int

    @property
    def p(self) -> int:
        return self.linear.shape[1]

    @property
    def nt(self) -> int:
        return self.n * self.t

    def block_slices(self) -> list:
        """Column slices of each ``u_j`` inside :meth:`full`."""
        out, start = [], self.p
        for b in self.nonlinear:
            out.append(slice(start, start + b.shape[1]))
            start += b.shape[1]
        return out

    def full(self) -> np.ndarray:
        """``[B_-, B_{1,~}, ..., B_{p,~}]`` as one ``(NT, D)`` matrix."""
        return np.hstack([self.linear, *self.nonlinear])

    def rows(self, individuals) -> "BasisEval":
        """Design restricted to a subset of individuals."""
        idx = np.asarray(individuals, dtype=int)
        rows = (idx[:, None] * self.t + np.arange(self.t)).reshape(-1)
        return BasisEval(
            self.linear[rows],
            tuple(b[rows] for b in self.nonlinear),
            self.specs,
            idx.size,
            self.t,
        )


def build_design(d, specs: Sequence[BasisSpec]) -> BasisEval:
    """Evaluate every component's basis at the panel's (scaled) regressors.

    ``d`` is a :class:`~sievepanel.panel_data.PanelDataset` or a raw array of
    shape ``(N, T, p)``.
    """
    z = d.z if hasattr(d, "z") else np.asarray(d, dtype=float)
    if z.ndim != 3:
        raise PanelShapeError(f"regressors must have shape (N, T, p), got {z.shape}")
    n, t, p = z.shape
    specs = tuple(specs)
    if len(specs) != p:
        raise ShapeMismatch(f"{len(specs)} basis specs for p={p} regressors")
    flat = z.reshape(n * t, p)
    linear = np.empty((n * t, p))
    nonlinear = []
    for j, spec in enumerate(specs):
        full = eval_basis(spec, flat[:, j])
        linear[:, j] = full[:, 0]
        nonlinear.append(full[:, 1:])
    return BasisEval(linear, tuple(nonlinear), specs, n, t)


def uniform_specs(p: int, degree, n_intervals) -> tuple:
    """One uniform-knot spec per component; scalars are shared across ``j``."""
    degrees = np.broadcast_to(np.asarray(degree), (p,))
    ms = np.broadcast_to(np.asarray(n_intervals), (p,))
    return tuple(BasisSpec.uniform(int(r), int(m)) for r, m in zip(degrees, ms))


def integrate(fn, knots=(0.0, 1.0), nodes: int = 64) -> np.ndarray:
    """Gauss-Legendre quadrature of ``fn`` over [0, 1], split at ``knots``.

    ``fn`` maps an array of points to an array (or matrix, one row per point);
    the result has ``fn``'s trailing shape.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.unique(np.concatenate([[0.0, 1.0], np.asarray(knots, dtype=float)]))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        pts = 0.5 * (b - a) * x + 0.5 * (a + b)
        vals = np.asarray(fn(pts))
        total = total + 0.5 * (b - a) * np.tensordot(w, vals, axes=(0, 0))
    return total
