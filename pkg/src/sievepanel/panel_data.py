"""Balanced panel container, CSV ingestion, [0, 1] scaling and the within transform."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import (
    ConstantRegressor,
    DuplicateCell,
    MissingCell,
    NonNumeric,
    PanelShapeError,
    SchemaError,
)


@dataclass(frozen=True)
class ScalingMap:
    """Per-regressor affine maps ``z = (x - lo) / (hi - lo)``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise PanelShapeError("lo and hi must have the same length")
        bad = np.flatnonzero(~(hi > lo))
        if bad.size:
            raise ConstantRegressor(int(bad[0]))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def p(self) -> int:
        return self.lo.size

    def forward(self, x, j: int):
        """Map original-axis values of regressor ``j`` onto [0, 1]."""
        return (np.asarray(x, dtype=float) - self.lo[j]) / (self.hi[j] - self.lo[j])

    def inverse(self, z, j: int):
        """Map scaled values of regressor ``j`` back to the original axis."""
        return self.lo[j] + np.asarray(z, dtype=float) * (self.hi[j] - self.lo[j])

    @classmethod
    def identity(cls, p: int) -> "ScalingMap":
        return cls(np.zeros(p), np.ones(p))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingMap":
        return cls(np.array(d["lo"], dtype=float), np.array(d["hi"], dtype=float))


@dataclass(frozen=True)
class PanelDataset:
    """A balanced panel of ``N`` individuals observed over ``T`` periods.

    ``y`` has shape ``(N, T)`` and ``z`` shape ``(N, T, p)``; rows are ordered
    by individual, then time.  ``scaling`` is ``None`` until
    :func:`scale_regressors` has been applied.
    """

    y: np.ndarray
    z: np.ndarray
    ids: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    names: Optional[tuple] = None
    scaling: Optional[ScalingMap] = field(default=None)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 2:
            z = z[:, :, None]
        if y.ndim != 2 or z.ndim != 3 or z.shape[:2] != y.shape:
            raise PanelShapeError(
                f"expected y (N, T) and z (N, T, p); got {y.shape} and {z.shape}"
            )
        n, t = y.shape
        if n < 2 or t < 2:
            raise PanelShapeError(f"need N >= 2 and T >= 2, got N={n}, T={t}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise MissingCell("panel contains missing or non-finite values")
        y.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        ids = np.arange(n) if self.ids is None else np.asarray(self.ids)
        times = np.arange(t) if self.times is None else np.asarray(self.times)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "times", times)
        p = z.shape[2]
        names = tuple(f"z{j + 1}" for j in range(p)) if self.names is None else tuple(self.names)
        if len(names) != p:
            raise PanelShapeError(f"{len(names)} regressor names for p={p}")
        object.__setattr__(self, "names", names)

    @property
    def n_individuals(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.z.shape[2]

    @property
    def nt(self) -> int:
        return self.y.size

    def subset(self, individuals) -> "PanelDataset":
        """Dataset restricted to the given individual positions (scaling kept)."""
        idx = np.asarray(individuals, dtype=int)
        return replace(self, y=self.y[idx], z=self.z[idx], ids=self.ids[idx])

    def to_frame(self, id_col="id", time_col="time", y_col="y") -> pd.DataFrame:
        """Long-format frame on the original regressor axis."""
        n, t, p = self.z.shape
        z = self.z
        if self.scaling is not None:
            z = np.stack([self.scaling.inverse(z[:, :, j], j) for j in range(p)], axis=2)
        out = pd.DataFrame(
            {
                id_col: np.repeat(self.ids, t),
                time_col: np.tile(self.times, n),
                y_col: self.y.reshape(-1),
            }
        )
        for j, name in enumerate(self.names):
            out[name] = z[:, :, j].reshape(-1)
        return out


@dataclass(frozen=True)
class PanelSchema:
    """Column names of a long-format panel CSV.  ``regressors=None`` means
    every column other than id/time/response."""

    id: str = "id"
    time: str = "time"
    response: str = "y"
    regressors: Optional[Sequence[str]] = None

    @classmethod
    def parse(cls, text: str) -> "PanelSchema":
        """Parse ``"id,time,y[,z1,...]"``."""
        parts = [s.strip() for s in text.split(",") if s.strip()]
        if len(parts) < 3:
            raise SchemaError("schema needs at least id,time,response column names")
        return cls(parts[0], parts[1], parts[2], tuple(parts[3:]) or None)


def load_panel_csv(path, schema: Optional[PanelSchema] = None) -> PanelDataset:
    """Read a long-format CSV (one row per individual-period) into a panel.

    Regressors are returned on their original axis; call
    :func:`scale_regressors` before building a basis.
    """
    schema = schema or PanelSchema()
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    df = pd.read_csv(path, encoding="utf-8")
    return panel_from_frame(df, schema)


def panel_from_frame(df: pd.DataFrame, schema: Optional[PanelSchema] = None) -> PanelDataset:
    schema = schema or PanelSchema()
    key = [schema.id, schema.time, schema.response]
    regs = list(schema.regressors) if schema.regressors else [c for c in df.columns if c not in key]
    missing = [c for c in key + regs if c not in df.columns]
    if missing:
        raise SchemaError(f"columns not found in input: {missing}")
    if not regs:
        raise SchemaError("no regressor columns")

    values = df[[schema.response] + regs]
    try:
        values = values.apply(pd.to_numeric, errors="raise").astype(float)
    except (ValueError, TypeError) as exc:
        raise NonNumeric(str(exc)) from None

    if df.duplicated(subset=[schema.id, schema.time]).any():
        row = df[df.duplicated(subset=[schema.id, schema.time], keep=False)].iloc[0]
        raise DuplicateCell(f"duplicate cell (id={row[schema.id]!r}, time={row[schema.time]!r})")

    ids = pd.unique(df[schema.id])
    times = pd.unique(df[schema.time])
    ids = np.sort(ids)
    times = np.sort(times)
    if len(df) != len(ids) * len(times):
        full = pd.MultiIndex.from_product([ids, times])
        present = pd.MultiIndex.from_frame(df[[schema.id, schema.time]])
        gap = full.difference(present)[0]
        raise MissingCell(f"unbalanced panel: missing cell (id={gap[0]!r}, time={gap[1]!r})")
    if values.isna().any().any():
        raise MissingCell("missing values in response or regressors")

    order = df.assign(_v=np.arange(len(df))).sort_values([schema.id, schema.time])["_v"].to_numpy()
    arr = values.to_numpy()[order]
    n, t = len(ids), len(times)
    y = arr[:, 0].reshape(n, t)
    z = arr[:, 1:].reshape(n, t, len(regs))
    return PanelDataset(y=y, z=z, ids=ids, times=times, names=tuple(regs))


def scale_regressors(d: PanelDataset) -> tuple[PanelDataset, ScalingMap]:
    """Min-max map every regressor column onto [0, 1] over the full sample."""
    z = d.z
    lo = z.min(axis=(0, 1))
    hi = z.max(axis=(0, 1))
    for j in range(z.shape[2]):
        if not hi[j] > lo[j]:
            raise ConstantRegressor(j, d.names[j])
    smap = ScalingMap(lo, hi)
    zs = (z - lo) / (hi - lo)
    # pin the extremes exactly
    zs = np.clip(zs, 0.0, 1.0)
    return replace(d, z=zs, scaling=smap), smap


def within_demean(x, axis: int = 1) -> np.ndarray:
    """Subtract each individual's time mean (``H = I_T - 11'/T`` per row).

    ``x`` is ``(N, T)`` or ``(N, T, ...)``; time runs along ``axis``.
    """
    x = np.asarray(x, dtype=float)
    return x - x.mean(axis=axis, keepdims=True)
