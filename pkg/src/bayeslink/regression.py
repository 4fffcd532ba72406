"""Regressions tying the file-exclusive variables to the linkage.

File A carries a scalar outcome x_A, file B a covariate vector x_B. On
matched pairs x_A follows a linear model in [1, x_B] with coefficients
beta_M and noise variance sigma2_M; on nonmatched (but materialized)
pairs it follows either a second linear model in x_B (variant "brlvof")
or a free normal that ignores x_B (variant "brlvof_ind"). These densities
enter each pair's likelihood ratio, so the linkage update is informed by
how well the exclusive variables line up.

Under flat priors p(beta, sigma^2) proportional to 1/sigma^2, the Gibbs
update for each arm draws sigma^2 from an Inverse-Gamma with shape n/2
and scale half the residual sum of squares at the OLS fit, then beta from
Normal(OLS estimate, sigma^2 (X'X)^-1). The nonmatch arm of brlvof_ind is
the intercept-only special case: Normal(sample mean, sigma2_U / n_U).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .comparison import ComparisonTable
from .errors import ConfigError, DegeneratePosteriorError
from .model import LinkageState

_VARIANTS = ("brlvof", "brlvof_ind")
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class RegressionParams:
    """Current draw of both regression arms.

    beta vectors start with the intercept. For variant "brlvof_ind",
    beta_u has a single entry (the free nonmatch mean).
    """

    variant: str
    beta_m: np.ndarray
    sigma2_m: float
    beta_u: np.ndarray
    sigma2_u: float

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ConfigError(f"unknown regression variant {self.variant!r}")
        self.beta_m = np.atleast_1d(np.asarray(self.beta_m, dtype=np.float64))
        self.beta_u = np.atleast_1d(np.asarray(self.beta_u, dtype=np.float64))
        if self.variant == "brlvof" and len(self.beta_u) != len(self.beta_m):
            raise ConfigError("brlvof: beta_u must have the same length as beta_m")
        if self.variant == "brlvof_ind" and len(self.beta_u) != 1:
            raise ConfigError("brlvof_ind: beta_u is a single mean")
        if self.sigma2_m <= 0 or self.sigma2_u <= 0:
            raise ConfigError("residual variances must be positive")

    @property
    def n_covariates(self) -> int:
        return len(self.beta_m) - 1


def design_matrix(x_b: np.ndarray) -> np.ndarray:
    """Covariate rows with a leading intercept column."""
    x_b = np.asarray(x_b, dtype=np.float64)
    if x_b.ndim == 1:
        x_b = x_b[:, None]
    return np.column_stack([np.ones(len(x_b)), x_b])


def _check_dim(x_b: np.ndarray, p: int, what: str) -> np.ndarray:
    x_b = np.atleast_1d(np.asarray(x_b, dtype=np.float64))
    if len(x_b) != p - 1:
        raise ConfigError(
            f"{what}: expected {p - 1} covariates, got {len(x_b)}"
        )
    return x_b


def _normal_logpdf(x: float, mean: float, var: float) -> float:
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * (x - mean) ** 2 / var


def eval_match_logdensity(x_a: float, x_b: np.ndarray, p: RegressionParams) -> float:
    """Log density of the outcome on a matched pair."""
    x_b = _check_dim(x_b, len(p.beta_m), "match arm")
    mean = p.beta_m[0] + float(p.beta_m[1:] @ x_b)
    return float(_normal_logpdf(float(x_a), mean, p.sigma2_m))


def eval_nonmatch_logdensity(x_a: float, x_b: np.ndarray, p: RegressionParams) -> float:
    """Log density of the outcome on a materialized nonmatch pair."""
    if p.variant == "brlvof":
        x_b = _check_dim(x_b, len(p.beta_u), "nonmatch arm")
        mean = p.beta_u[0] + float(p.beta_u[1:] @ x_b)
    else:
        mean = float(p.beta_u[0])
    return float(_normal_logpdf(float(x_a), mean, p.sigma2_u))


def conditional_means(design: np.ndarray, p: RegressionParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-B-record outcome means under each arm, for vectorized sweeps."""
    mu_m = design @ p.beta_m
    if p.variant == "brlvof":
        mu_u = design @ p.beta_u
    else:
        mu_u = np.full(len(design), float(p.beta_u[0]))
    return mu_m, mu_u


def _solve_spd(xtx: np.ndarray, arm: str, n: int) -> np.ndarray:
    """Cholesky factor of X'X, retrying once with a diagonal jitter."""
    try:
        return np.linalg.cholesky(xtx)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(xtx + 1e-10 * np.eye(len(xtx)))
    except np.linalg.LinAlgError:
        raise DegeneratePosteriorError(arm, n, "rank-deficient design") from None


def _draw_arm(
    xtx: np.ndarray,
    xty: np.ndarray,
    yty: float,
    n: int,
    rng: np.random.Generator,
    arm: str,
) -> tuple[np.ndarray, float]:
    """Conjugate draw of (beta, sigma^2) from sufficient statistics."""
    p = len(xty)
    if n < p + 1:
        raise DegeneratePosteriorError(arm, n)
    chol = _solve_spd(xtx, arm, n)
    w = np.linalg.solve(chol, xty)
    beta_ols = np.linalg.solve(chol.T, w)
    rss = max(float(yty - beta_ols @ xty), 1e-300)
    sigma2 = (rss / 2.0) / rng.gamma(n / 2.0)
    z = rng.standard_normal(p)
    beta = beta_ols + np.sqrt(sigma2) * np.linalg.solve(chol.T, z)
    return beta, float(sigma2)


class PairSufficientStats:
    """Totals over all materialized pairs, fixed for the life of a chain.

    Per-iteration sampling only accumulates the matched pairs' statistics
    and takes the nonmatch arm's by subtraction, so the cost per draw is
    O(n_m p^2) regardless of how many pairs are materialized.
    """

    def __init__(
        self,
        x_a: np.ndarray,
        x_b: np.ndarray,
        table: ComparisonTable | None = None,
    ):
        self.x_a = np.asarray(x_a, dtype=np.float64).ravel()
        self.design = design_matrix(x_b)
        n_a = len(self.x_a)
        n_b = len(self.design)
        p = self.design.shape[1]
        xtx = np.zeros((p, p))
        xty = np.zeros(p)
        yty = 0.0
        s1 = 0.0
        n_pairs = 0
        if table is None:
            groups = [(np.arange(n_a), np.arange(n_b))]
        else:
            if table.n_a != n_a or table.n_b != n_b:
                raise ConfigError("exclusive columns do not match the table sizes")
            groups = [(blk.a_idx, blk.b_idx) for blk in table.blocks]
        for a_idx, b_idx in groups:
            d = self.design[b_idx]
            ya = self.x_a[a_idx]
            xtx += len(a_idx) * (d.T @ d)
            xty += d.sum(axis=0) * float(ya.sum())
            yty += len(b_idx) * float(ya @ ya)
            s1 += len(b_idx) * float(ya.sum())
            n_pairs += len(a_idx) * len(b_idx)
        self.xtx_all = xtx
        self.xty_all = xty
        # sum of y^2 over pairs doubles as the ind arm's second moment
        self.yty_all = yty
        self.s1_all = s1
        self.n_pairs = n_pairs
        self.p = p

    def sample(
        self, state: LinkageState, rng: np.random.Generator, variant: str
    ) -> RegressionParams:
        if variant not in _VARIANTS:
            raise ConfigError(f"unknown regression variant {variant!r}")
        pairs = state.pairs()
        n_m = len(pairs)
        a_idx = pairs[:, 0] if n_m else np.empty(0, dtype=np.int64)
        b_idx = pairs[:, 1] if n_m else np.empty(0, dtype=np.int64)
        dm = self.design[b_idx]
        ym = self.x_a[a_idx]
        xtx_m = dm.T @ dm
        xty_m = dm.T @ ym
        yty_m = float(ym @ ym)
        beta_m, sigma2_m = _draw_arm(xtx_m, xty_m, yty_m, n_m, rng, "match")

        n_u = self.n_pairs - n_m
        if variant == "brlvof":
            beta_u, sigma2_u = _draw_arm(
                self.xtx_all - xtx_m,
                self.xty_all - xty_m,
                self.yty_all - yty_m,
                n_u,
                rng,
                "nonmatch",
            )
        else:
            if n_u < 2:
                raise DegeneratePosteriorError("nonmatch", n_u)
            s1_u = self.s1_all - float(ym.sum())
            s2_u = self.yty_all - yty_m
            mean_u = s1_u / n_u
            rss_u = max(s2_u - n_u * mean_u**2, 1e-300)
            sigma2_u = (rss_u / 2.0) / rng.gamma(n_u / 2.0)
            beta_u = np.array([mean_u + np.sqrt(sigma2_u / n_u) * rng.standard_normal()])
        return RegressionParams(
            variant=variant,
            beta_m=beta_m,
            sigma2_m=sigma2_m,
            beta_u=beta_u,
            sigma2_u=sigma2_u,
        )


def sample_regression_posterior(
    x_a: np.ndarray,
    x_b: np.ndarray,
    state: LinkageState,
    rng: np.random.Generator,
    *,
    variant: str = "brlvof",
    table: ComparisonTable | None = None,
) -> RegressionParams:
    """One conjugate draw of both regression arms given the linkage.

    The nonmatch arm conditions on every materialized nonmatch pair: all
    n_A n_B - n_m cross pairs without blocking, the within-block pairs
    otherwise (pass the comparison table to restrict).
    """
    return PairSufficientStats(x_a, x_b, table).sample(state, rng, variant)
