"""SCAD penalty and the local quadratic approximation weight."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BelowThreshold, InputError, NegativeArgument

DEFAULT_KAPPA = 3.7


@dataclass(frozen=True)
class ScadParams:
    lam: float
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise InputError(f"lambda must be finite and >= 0, got {self.lam}")
        if not self.kappa > 2:
            raise InputError(f"kappa must exceed 2, got {self.kappa}")


def _check(z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise NegativeArgument("SCAD is defined for nonnegative arguments")
    return z


def scad_deriv(z, params: ScadParams):
    """``p'(z)``: ``lam`` up to ``lam``, then ``(kappa*lam - z)_+ / (kappa - 1)``."""
    z = _check(z)
    lam, kappa = params.lam, params.kappa
    out = np.where(z <= lam, lam, np.maximum(kappa * lam - z, 0.0) / (kappa - 1.0))
    return out if out.ndim else float(out)


def scad_value(z, params: ScadParams):
    """``p(z)``, the integral of :func:`scad_deriv` from 0."""
    z = _check(z)
    lam, kappa = params.lam, params.kappa
    mid = lam**2 + (kappa * lam * (z - lam) - 0.5 * (z**2 - lam**2)) / (kappa - 1.0)
    out = np.where(z <= lam, lam * z, np.where(z <= kappa * lam, mid, 0.5 * (kappa + 1.0) * lam**2))
    return out if out.ndim else float(out)


def lqa_weight(q: float, nt: int, params: ScadParams, threshold: float = 0.0) -> float:
    """``D_j = sqrt(NT) * p'(sqrt(q / NT)) / sqrt(q)`` for a block with
    quadratic form ``q = u' B' M_H B u``.

    Raises :class:`BelowThreshold` when ``q`` is at or below ``threshold``
    (and the penalty is active), in which case the block must be hard-zeroed.
    The majorizing quadratic of ``NT * p(sqrt(q / NT))`` at ``q0`` has slope
    ``D_j / 2`` in ``q``.
    """
    if params.lam == 0.0:
        return 0.0
    if not q > threshold or q <= 0.0:
        raise BelowThreshold(f"block quadratic form {q:.3g} at or below threshold {threshold:.3g}")
    norm = math.sqrt(q / nt)
    d = scad_deriv(norm, params)
    if d == 0.0:
        return 0.0
    return math.sqrt(nt) * d / math.sqrt(q)
