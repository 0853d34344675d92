"""Stream preprocessing: outlier clipping, missing-value filling, and scalers
whose parameters can be updated when the stream drifts.

Fitted scalers are immutable; `partial_update` returns a new version so model
and scaler versions can stay aligned. Missing values are NaN.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, FitError, ImputeError, OrderingError, ShapeError


def _as_columns(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError("columnar data must be 1D or 2D")
    return arr


def _column_name(names, j: int) -> str:
    return names[j] if names is not None and j < len(names) else f"column {j}"


def _feature_names(names, width: int) -> tuple[str, ...]:
    if names is None:
        return tuple(f"x{i}" for i in range(width))
    return tuple(names)


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature min/max mapping observed min -> 0 and max -> 1."""

    mins: np.ndarray
    maxs: np.ndarray
    names: tuple[str, ...] | None = None

    @classmethod
    def fit(cls, data, names: Sequence[str] | None = None) -> "MinMaxScaler":
        arr = _as_columns(data)
        if arr.shape[0] == 0:
            raise FitError("cannot fit a scaler on zero rows")
        for j in range(arr.shape[1]):
            if np.all(np.isnan(arr[:, j])):
                raise FitError(f"all values missing in {_column_name(names, j)}")
        with np.errstate(all="ignore"):
            mins = np.nanmin(arr, axis=0)
            maxs = np.nanmax(arr, axis=0)
        return cls(mins, maxs, _feature_names(names, arr.shape[1]))

    def partial_update(self, batch) -> "MinMaxScaler":
        arr = _as_columns(batch)
        if arr.shape[1] != self.mins.shape[0]:
            raise ShapeError(f"expected {self.mins.shape[0]} features, got {arr.shape[1]}")
        if arr.shape[0] == 0:
            return self
        with np.errstate(all="ignore"):
            mins = np.fmin(self.mins, np.nanmin(arr, axis=0))
            maxs = np.fmax(self.maxs, np.nanmax(arr, axis=0))
        return MinMaxScaler(mins, maxs, self.names)

    def transform(self, data) -> np.ndarray:
        arr = _as_columns(data)
        span = self.maxs - self.mins
        out = np.zeros_like(arr)
        np.divide(arr - self.mins, span, out=out, where=span > 0)
        return out

    def inverse_transform(self, data) -> np.ndarray:
        arr = _as_columns(data)
        return arr * (self.maxs - self.mins) + self.mins

    def to_record(self) -> dict:
        """Versioned record, one entry per feature: name, type, parameters."""
        names = _feature_names(self.names, self.mins.shape[0])
        return {"type": "minmax", "version": 1, "features": [
            {"name": n, "min": float(lo), "max": float(hi)}
            for n, lo, hi in zip(names, self.mins, self.maxs)]}

    @classmethod
    def from_record(cls, rec: dict) -> "MinMaxScaler":
        feats = rec["features"]
        return cls(np.array([f["min"] for f in feats], dtype=np.float64),
                   np.array([f["max"] for f in feats], dtype=np.float64),
                   tuple(f["name"] for f in feats))


@dataclass(frozen=True)
class StandardScaler:
    """Per-feature mean/variance scaler with exact streaming moment merges."""

    means: np.ndarray
    variances: np.ndarray
    counts: np.ndarray  # per-feature observation counts (missing cells excluded)
    names: tuple[str, ...] | None = None

    @classmethod
    def fit(cls, data, names: Sequence[str] | None = None) -> "StandardScaler":
        arr = _as_columns(data)
        if arr.shape[0] == 0:
            raise FitError("cannot fit a scaler on zero rows")
        counts = np.sum(~np.isnan(arr), axis=0).astype(np.int64)
        for j in range(arr.shape[1]):
            if counts[j] == 0:
                raise FitError(f"all values missing in {_column_name(names, j)}")
        with np.errstate(all="ignore"):
            means = np.nanmean(arr, axis=0)
            variances = np.nanvar(arr, axis=0)
        return cls(means, variances, counts, _feature_names(names, arr.shape[1]))

    def partial_update(self, batch) -> "StandardScaler":
        """Merge batch moments so the result equals a refit on the union."""
        arr = _as_columns(batch)
        if arr.shape[1] != self.means.shape[0]:
            raise ShapeError(f"expected {self.means.shape[0]} features, got {arr.shape[1]}")
        m = np.sum(~np.isnan(arr), axis=0).astype(np.int64)
        if np.all(m == 0):
            return self
        bmean = np.zeros_like(self.means)
        bm2 = np.zeros_like(self.means)
        for j in range(arr.shape[1]):
            col = arr[:, j]
            col = col[~np.isnan(col)]
            if col.size:
                bmean[j] = col.mean()
                bm2[j] = np.sum((col - bmean[j]) ** 2)
        n = self.counts.astype(np.float64)
        total = n + m
        safe_total = np.where(total > 0, total, 1.0)
        delta = bmean - self.means
        means = self.means + delta * (m / safe_total)
        m2 = self.variances * n + bm2 + delta * delta * (n * m / safe_total)
        variances = np.where(total > 0, m2 / safe_total, 0.0)
        return StandardScaler(means, np.maximum(variances, 0.0),
                              total.astype(np.int64), self.names)

    def transform(self, data) -> np.ndarray:
        arr = _as_columns(data)
        std = np.sqrt(self.variances)
        out = np.zeros_like(arr)
        np.divide(arr - self.means, std, out=out, where=std > 0)
        return out

    def inverse_transform(self, data) -> np.ndarray:
        arr = _as_columns(data)
        return arr * np.sqrt(self.variances) + self.means

    def to_record(self) -> dict:
        """Versioned record, one entry per feature: name, type, parameters."""
        names = _feature_names(self.names, self.means.shape[0])
        return {"type": "standard", "version": 1, "features": [
            {"name": n, "mean": float(mu), "variance": float(var), "count": int(c)}
            for n, mu, var, c in zip(names, self.means, self.variances, self.counts)]}

    @classmethod
    def from_record(cls, rec: dict) -> "StandardScaler":
        feats = rec["features"]
        return cls(np.array([f["mean"] for f in feats], dtype=np.float64),
                   np.array([f["variance"] for f in feats], dtype=np.float64),
                   np.array([f["count"] for f in feats], dtype=np.int64),
                   tuple(f["name"] for f in feats))


def scaler_from_record(rec: dict):
    kinds = {"minmax": MinMaxScaler, "standard": StandardScaler}
    if rec.get("type") not in kinds:
        raise ArgumentError(f"unknown scaler record type {rec.get('type')!r}")
    return kinds[rec["type"]].from_record(rec)


# --- missing values -------------------------------------------------------------

STRATEGIES = ("linear_interpolate", "forward_fill", "drop_row")


@dataclass(frozen=True)
class ImputeRule:
    strategy: str = "linear_interpolate"
    # leading gaps are always backfilled from the first valid value

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ArgumentError(f"unknown impute strategy {self.strategy!r}")


def fill_missing(series, rule: ImputeRule) -> np.ndarray:
    """Fill NaNs in a 1D series. Never alters values that are present."""
    arr = np.asarray(series, dtype=np.float64).copy()
    if arr.ndim != 1:
        raise ShapeError("fill_missing expects a 1D series")
    missing = np.isnan(arr)
    if not missing.any():
        return arr
    if rule.strategy == "drop_row":
        return arr[~missing]
    valid = np.flatnonzero(~missing)
    if valid.size == 0:
        raise ImputeError("series has no observed values to fill from")
    first, last = valid[0], valid[-1]
    arr[:first] = arr[first]  # backfill_first_valid
    if rule.strategy == "forward_fill":
        for i in range(first + 1, arr.size):
            if np.isnan(arr[i]):
                arr[i] = arr[i - 1]
    else:
        idx = np.arange(arr.size, dtype=np.float64)
        arr[first:last + 1] = np.interp(idx[first:last + 1], idx[valid], arr[valid])
        arr[last:] = arr[last]  # trailing gap holds the last observation
    return arr


def clip_unit_interval(values) -> np.ndarray:
    """Outlier rule for capacity-normalized power: clip into [0, 1]."""
    return np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)


# --- malfunction filter ------------------------------------------------------------

def filter_malfunction(timestamps, production, zero_run_hours: float = 24.0) -> np.ndarray:
    """Keep-mask dropping maximal zero-production runs longer than the limit.

    A run's duration is `run length x sampling period`; runs of exactly the
    limit are kept (the rule is strictly "longer than"). The period is the
    median spacing of the timestamps.
    """
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    prod = np.asarray(production, dtype=np.float64)
    if ts.shape[0] != prod.shape[0]:
        raise ShapeError("timestamps and production must have equal length")
    keep = np.ones(prod.shape[0], dtype=bool)
    if prod.shape[0] < 2:
        return keep
    deltas = np.diff(ts).astype("timedelta64[s]").astype(np.int64)
    if np.any(deltas < 0):
        raise OrderingError("timestamps must be non-decreasing")
    period_hours = float(np.median(deltas)) / 3600.0
    if period_hours <= 0:
        return keep
    i = 0
    n = prod.shape[0]
    while i < n:
        if prod[i] == 0.0:
            j = i
            while j < n and prod[j] == 0.0:
                j += 1
            if (j - i) * period_hours > zero_run_hours:
                keep[i:j] = False
            i = j
        else:
            i += 1
    return keep
