"""Multiple-imputation inference over posterior linkage samples.

Each emitted linkage sample is treated as one completed data set: the
downstream analysis (a correlation, a regression) runs on the linked
pairs only, and the M per-sample results are pooled with the standard
combining rules: pooled estimate = mean, total variance = within +
(1 + 1/M) between, and a Student-t interval whose degrees of freedom
shrink as the between-imputation share grows.

Correlations are pooled on the Fisher z scale, where the sampling
variance is the exact 1/(n_m - 3), and the point and interval are
mapped back through tanh, which also keeps intervals inside (-1, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.special import betaincinv, ndtri

from .errors import ConfigError, DataError
from .model import LinkageState


@dataclass
class MIEstimate:
    """Pooled estimate with its variance decomposition and interval."""

    estimate: float
    within: float
    between: float
    total: float
    dof: float
    level: float
    interval: tuple[float, float]
    m: int
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "within_variance": self.within,
            "between_variance": self.between,
            "total_variance": self.total,
            "dof": self.dof,
            "level": self.level,
            "interval": list(self.interval),
            "m": self.m,
            "flags": list(self.flags),
        }


def t_quantile(p: float, df: float) -> float:
    """Student-t quantile via the incomplete beta inverse.

    Accurate to about 1e-8 over the df and p ranges used here; df = inf
    falls back to the normal quantile.
    """
    if not 0.0 < p < 1.0:
        raise ConfigError("quantile probability must be inside (0, 1)")
    if df <= 0:
        raise ConfigError("degrees of freedom must be positive")
    if math.isinf(df):
        return float(ndtri(p))
    if p == 0.5:
        return 0.0
    tail = 2.0 * min(p, 1.0 - p)
    x = float(betaincinv(df / 2.0, 0.5, tail))
    t = math.sqrt(df * (1.0 - x) / x)
    return t if p > 0.5 else -t


def combine_mi(
    estimates: Iterable[tuple[float, float]], level: float = 0.95
) -> MIEstimate:
    """Pool per-imputation (estimate, sampling variance) pairs.

    math.fsum keeps every reduction exact, so the result is bit-identical
    under permutation of the inputs.
    """
    pairs = [(float(e), float(u)) for e, u in estimates]
    m = len(pairs)
    if m < 2:
        raise ConfigError("multiple-imputation pooling needs at least 2 estimates")
    if not 0.0 < level < 1.0:
        raise ConfigError("confidence level must be inside (0, 1)")
    if any(u < 0 for _, u in pairs):
        raise ConfigError("sampling variances must be nonnegative")
    est = math.fsum(e for e, _ in pairs) / m
    within = math.fsum(u for _, u in pairs) / m
    between = math.fsum((e - est) ** 2 for e, _ in pairs) / (m - 1)
    total = within + (1.0 + 1.0 / m) * between
    flags: list[str] = []
    if between == 0.0:
        # no between-imputation spread: the t limit is the plain
        # single-imputation normal interval on the within variance
        dof = math.inf
    elif within == 0.0:
        flags.append("within-variance-zero")
        dof = float(m - 1)
    else:
        r = (1.0 + 1.0 / m) * between / within
        dof = (m - 1) * (1.0 + 1.0 / r) ** 2
    half = t_quantile(1.0 - (1.0 - level) / 2.0, dof) * math.sqrt(total)
    return MIEstimate(
        estimate=est,
        within=within,
        between=between,
        total=total,
        dof=dof,
        level=level,
        interval=(est - half, est + half),
        m=m,
        flags=tuple(flags),
    )


class CorrelationEstimate(NamedTuple):
    """One completed data set's correlation and its z-scale variance."""

    rho: float
    z_variance: float
    degenerate: bool


def correlation_per_sample(
    x_a: np.ndarray, x_b_column: np.ndarray, state: LinkageState
) -> CorrelationEstimate:
    """Pearson correlation over the linked pairs of one sample.

    The sampling variance is carried on the Fisher z scale, where it is
    1/(n_m - 3) regardless of the correlation's value.
    """
    pairs = state.pairs()
    n_m = len(pairs)
    if n_m < 4:
        raise DataError(f"correlation needs at least 4 linked pairs, got {n_m}")
    y = np.asarray(x_a, dtype=np.float64).ravel()[pairs[:, 0]]
    x = np.asarray(x_b_column, dtype=np.float64).ravel()[pairs[:, 1]]
    sy = float(np.std(y))
    sx = float(np.std(x))
    if sy == 0.0 or sx == 0.0:
        raise DataError("correlation undefined: a variable is constant on the links")
    rho = float(np.corrcoef(y, x)[0, 1])
    rho = max(-1.0, min(1.0, rho))
    return CorrelationEstimate(
        rho=rho,
        z_variance=1.0 / (n_m - 3),
        degenerate=abs(rho) >= 1.0 - 1e-12,
    )


def combine_correlations(
    samples: Sequence[CorrelationEstimate], level: float = 0.95
) -> tuple[float, tuple[float, float], MIEstimate]:
    """Pool per-sample correlations on the z scale, back-transform at the end.

    Returns (pooled rho, interval on the rho scale, the z-scale MIEstimate).
    """
    clamp = 1.0 - 1e-15
    z_pairs = [
        (math.atanh(max(-clamp, min(clamp, s.rho))), s.z_variance) for s in samples
    ]
    z = combine_mi(z_pairs, level=level)
    rho = math.tanh(z.estimate)
    interval = (math.tanh(z.interval[0]), math.tanh(z.interval[1]))
    return rho, interval, z


class RegressionEstimate(NamedTuple):
    """OLS coefficients and classical variances from one sample's links."""

    coef: np.ndarray
    variance: np.ndarray
    names: tuple[str, ...]


def regress_per_sample(
    x_a: np.ndarray,
    x_b: np.ndarray | None,
    state: LinkageState,
    *,
    names: tuple[str, ...] | None = None,
) -> RegressionEstimate:
    """OLS of the A outcome on the linked B covariates, intercept first.

    x_b = None (or zero columns) fits the intercept-only model. Classical
    variances are sigma2_hat (X'X)^-1 diagonals with sigma2_hat =
    RSS/(n - p).
    """
    pairs = state.pairs()
    n_m = len(pairs)
    y = np.asarray(x_a, dtype=np.float64).ravel()[pairs[:, 0]]
    if x_b is None:
        d = np.ones((n_m, 1))
    else:
        x_b = np.asarray(x_b, dtype=np.float64)
        if x_b.ndim == 1:
            x_b = x_b[:, None]
        d = np.column_stack([np.ones(n_m), x_b[pairs[:, 1]]])
    p = d.shape[1]
    if n_m <= p:
        raise DataError(f"regression needs more than {p} linked pairs, got {n_m}")
    coef, _, rank, _ = np.linalg.lstsq(d, y, rcond=None)
    if rank < p:
        raise DataError("regression design is rank deficient on the links")
    resid = y - d @ coef
    sigma2 = float(resid @ resid) / (n_m - p)
    xtx_inv = np.linalg.inv(d.T @ d)
    variance = sigma2 * np.diag(xtx_inv)
    if names is None:
        names = ("intercept",) + tuple(f"x{i + 1}" for i in range(p - 1))
    return RegressionEstimate(coef=coef, variance=variance, names=tuple(names))
