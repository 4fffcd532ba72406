"""Convergence checks on scalar parameter traces.

geweke_z compares the means of an early and a late window of a trace,
standardized by window variances estimated with non-overlapping batch
means (about sqrt(n) batches per window), which absorbs autocorrelation
without spectral estimation. autocorrelation is the standard biased
estimator normalized by lag zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class TraceSeries:
    """A named post-burn-in scalar trace."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()


@dataclass
class GewekeResult:
    z: float
    undefined: bool

    @property
    def converged(self) -> bool:
        return not self.undefined and abs(self.z) < 2.0


def _batch_mean_variance(window: np.ndarray) -> tuple[float, float]:
    """Mean of the window and the batch-means variance of that mean."""
    n = len(window)
    n_batches = max(2, int(math.isqrt(n)))
    batch = n // n_batches
    trimmed = window[: n_batches * batch]
    means = trimmed.reshape(n_batches, batch).mean(axis=1)
    var_of_mean = float(means.var(ddof=1)) / n_batches
    return float(window.mean()), var_of_mean


def geweke_z(
    series: np.ndarray, frac_first: float = 0.1, frac_last: float = 0.5
) -> GewekeResult:
    """Window-mean comparison z-score for one trace.

    Returns the z-score together with an undefined flag raised when the
    series is (numerically) constant so no variance scale exists.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    if not 0 < frac_first < 1 or not 0 < frac_last < 1 or frac_first + frac_last > 1:
        raise ConfigError("window fractions must be positive and sum to at most 1")
    n = len(x)
    n_first = int(frac_first * n)
    n_last = int(frac_last * n)
    if n_first < 10 or n_last < 10:
        raise ConfigError(
            f"series of length {n} leaves a window under 10 points"
        )
    first = x[:n_first]
    last = x[n - n_last :]
    m1, v1 = _batch_mean_variance(first)
    m2, v2 = _batch_mean_variance(last)
    denom = v1 + v2
    if denom <= 0.0:
        if m1 == m2:
            return GewekeResult(z=math.nan, undefined=True)
        return GewekeResult(z=math.inf if m1 > m2 else -math.inf, undefined=False)
    return GewekeResult(z=(m1 - m2) / math.sqrt(denom), undefined=False)


def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimates for lags 0..max_lag."""
    x = np.asarray(series, dtype=np.float64).ravel()
    n = len(x)
    if max_lag < 0 or max_lag >= n / 2:
        raise ConfigError("max_lag must be nonnegative and below half the length")
    centered = x - x.mean()
    c0 = float(centered @ centered) / n
    if c0 == 0.0:
        raise ConfigError("autocorrelation undefined for a constant series")
    out = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        out[lag] = float(centered[: n - lag] @ centered[lag:]) / n / c0
    return out


def summarize_traces(
    traces: dict[str, np.ndarray],
    *,
    acf_lags: int = 20,
    frac_first: float = 0.1,
    frac_last: float = 0.5,
) -> dict[str, dict]:
    """Per-parameter diagnostic report, JSON-serializable.

    Parameters whose traces are too short or constant are reported with
    the undefined flag rather than dropped.
    """
    report = {}
    for name, values in sorted(traces.items()):
        values = np.asarray(values, dtype=np.float64).ravel()
        entry: dict = {"n": int(len(values))}
        try:
            g = geweke_z(values, frac_first=frac_first, frac_last=frac_last)
            entry["geweke_z"] = None if math.isnan(g.z) else round(float(g.z), 6)
            entry["undefined"] = g.undefined
            entry["pass"] = g.converged
        except ConfigError as exc:
            entry["geweke_z"] = None
            entry["undefined"] = True
            entry["pass"] = False
            entry["note"] = str(exc)
        lags = min(acf_lags, max(0, (len(values) - 1) // 2))
        try:
            acf = autocorrelation(values, lags)
            entry["acf"] = [round(float(v), 6) for v in acf]
        except ConfigError:
            entry["acf"] = None
        report[name] = entry
    return report
