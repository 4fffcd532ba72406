"""Mixture model over comparison patterns and the one-to-one linkage prior.

Each materialized pair is either a match or a nonmatch. Conditional on
that, the K field agreement levels are independent categorical draws with
per-level probabilities theta_M (matches) or theta_U (nonmatches). The
linkage structure C is a bipartite matching between the two files;
matching is one-to-one globally and pairs can only form within blocks.

The default prior on C is uniform over matchings of a given size n_m,
with n_m given a beta-binomial weight: every record of the smaller file
is matched independently with probability pi, pi ~ Beta(alpha_pi,
beta_pi), and pi is integrated out. Blocking does not change this prior;
it only restricts which matchings are admissible. The alternative
"uniform" prior weights every admissible matching equally, dropping the
shrinkage toward smaller linkages.

Blocking also rules pairs out by fiat: records disagreeing on the
blocking key are non-links, full stop. Their comparison levels are
therefore a sample from the nonmatch class observed before any linkage
is drawn, and PriorConfig.blocked folds those counts into the nonmatch
Dirichlet weights. Without that evidence a small-block problem leaves
theta_U estimable only from the handful of within-block nonmatch pairs,
which is both noisy and, early in a chain, dominated by whichever true
pairs are still unlinked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .comparison import ComparisonTable
from .errors import ConfigError, InvariantViolation

# floor for log of a categorical probability; Dirichlet draws can hit 0.0
_LOG_FLOOR = 1e-300


_LINK_PRIORS = ("beta-binomial", "uniform")


@dataclass
class PriorConfig:
    """Hyperparameters for the mixture and the linkage size.

    alpha_m[k], alpha_u[k] are Dirichlet weights over field k's levels for
    the match and nonmatch classes. alpha_pi, beta_pi parametrize the
    beta-binomial weight on the number of linked pairs; beta_pi >= 1 keeps
    every sweep's no-link weight well defined. link_prior selects between
    that weight and a flat weight over admissible matchings ("uniform"),
    under which alpha_pi and beta_pi are ignored.
    """

    alpha_m: list[np.ndarray]
    alpha_u: list[np.ndarray]
    alpha_pi: float = 1.0
    beta_pi: float = 1.0
    link_prior: str = "beta-binomial"

    def __post_init__(self):
        self.alpha_m = [np.asarray(a, dtype=np.float64) for a in self.alpha_m]
        self.alpha_u = [np.asarray(a, dtype=np.float64) for a in self.alpha_u]
        if len(self.alpha_m) != len(self.alpha_u):
            raise ConfigError("alpha_m and alpha_u must cover the same fields")
        for a in self.alpha_m + self.alpha_u:
            if a.ndim != 1 or (a <= 0).any():
                raise ConfigError("Dirichlet weights must be positive vectors")
        if self.alpha_pi <= 0:
            raise ConfigError("alpha_pi must be positive")
        if self.beta_pi < 1:
            raise ConfigError("beta_pi must be at least 1")
        if self.link_prior not in _LINK_PRIORS:
            raise ConfigError(
                f"link_prior must be one of {_LINK_PRIORS}, got {self.link_prior!r}"
            )

    @classmethod
    def flat(cls, table: ComparisonTable, weight: float = 1.0) -> "PriorConfig":
        """Dirichlet(weight, ..., weight) on every field, Beta(1, 1) on pi."""
        return cls(
            alpha_m=[np.full(s.levels, weight) for s in table.specs],
            alpha_u=[np.full(s.levels, weight) for s in table.specs],
        )

    @classmethod
    def blocked(cls, table: ComparisonTable, weight: float = 1.0) -> "PriorConfig":
        """Flat prior plus the ruled-out pairs' evidence on the nonmatch class.

        The level counts of every pair excluded by blocking are added to
        the nonmatch Dirichlet weights: those pairs are non-links by
        construction, so their comparison levels pin down theta_U exactly
        as observed nonmatches would. Identical to :meth:`flat` when no
        pair is ruled out.
        """
        return cls(
            alpha_m=[np.full(s.levels, weight) for s in table.specs],
            alpha_u=[
                np.full(s.levels, weight) + counts
                for s, counts in zip(table.specs, table.background_level_counts)
            ],
        )


@dataclass
class MixtureParams:
    """Per-field level probabilities for the match and nonmatch classes."""

    theta_m: list[np.ndarray]
    theta_u: list[np.ndarray]

    def __post_init__(self):
        self.theta_m = [np.asarray(t, dtype=np.float64) for t in self.theta_m]
        self.theta_u = [np.asarray(t, dtype=np.float64) for t in self.theta_u]
        for t in self.theta_m + self.theta_u:
            if t.ndim != 1 or (t < 0).any() or abs(t.sum() - 1.0) > 1e-9:
                raise ConfigError("theta vectors must lie on the simplex")


@dataclass
class LinkageState:
    """A bipartite matching, kept as mutually inverse index maps.

    a_to_b[i] is the B index linked to A record i, -1 if unlinked;
    b_to_a is the inverse. n_m tracks the number of linked pairs.
    """

    a_to_b: np.ndarray
    b_to_a: np.ndarray
    n_m: int = field(init=False)

    def __post_init__(self):
        self.a_to_b = np.asarray(self.a_to_b, dtype=np.int64)
        self.b_to_a = np.asarray(self.b_to_a, dtype=np.int64)
        self.n_m = int((self.a_to_b >= 0).sum())
        self.validate()

    @classmethod
    def empty(cls, n_a: int, n_b: int) -> "LinkageState":
        return cls(
            a_to_b=np.full(n_a, -1, dtype=np.int64),
            b_to_a=np.full(n_b, -1, dtype=np.int64),
        )

    @property
    def n_a(self) -> int:
        return len(self.a_to_b)

    @property
    def n_b(self) -> int:
        return len(self.b_to_a)

    def link(self, i: int, j: int) -> None:
        if self.a_to_b[i] >= 0 or self.b_to_a[j] >= 0:
            raise InvariantViolation(f"link({i}, {j}): an endpoint is already linked")
        self.a_to_b[i] = j
        self.b_to_a[j] = i
        self.n_m += 1

    def unlink(self, i: int) -> int:
        j = int(self.a_to_b[i])
        if j < 0:
            raise InvariantViolation(f"unlink({i}): record is not linked")
        self.a_to_b[i] = -1
        self.b_to_a[j] = -1
        self.n_m -= 1
        return j

    def pairs(self) -> np.ndarray:
        """Linked pairs as an (n_m, 2) array of (A index, B index), A-sorted."""
        a = np.nonzero(self.a_to_b >= 0)[0]
        return np.column_stack([a, self.a_to_b[a]])

    def copy(self) -> "LinkageState":
        return LinkageState(self.a_to_b.copy(), self.b_to_a.copy())

    def validate(self) -> None:
        linked = self.a_to_b >= 0
        if linked.sum() != self.n_m or (self.b_to_a >= 0).sum() != self.n_m:
            raise InvariantViolation("link count out of sync")
        a = np.nonzero(linked)[0]
        b = self.a_to_b[a]
        if len(np.unique(b)) != len(b):
            raise InvariantViolation("a B record is linked twice")
        if not np.array_equal(self.b_to_a[b], a):
            raise InvariantViolation("forward and reverse maps disagree")


def log_prior_linkage(n_m: int, n_a: int, n_b: int, prior: PriorConfig) -> float:
    """Log prior weight of any one matching with n_m linked pairs.

    This is the weight of a single matching, not of the size n_m: the
    number of matchings of size n_m multiplies in separately. Summing
    exp(log_prior) over all admissible matchings of two files gives 1.

    Under link_prior="uniform" every matching has the same weight and the
    value is the unnormalized constant 0; the matching count that would
    normalize it depends on the block structure and cancels from every
    ratio the samplers take.
    """
    nmin, nmax = min(n_a, n_b), max(n_a, n_b)
    if not 0 <= n_m <= nmin:
        raise InvariantViolation(f"n_m={n_m} outside [0, {nmin}]")
    if prior.link_prior == "uniform":
        return 0.0
    ap, bp = prior.alpha_pi, prior.beta_pi
    return float(
        gammaln(nmax - n_m + 1)
        - gammaln(nmax + 1)
        + gammaln(n_m + ap)
        + gammaln(nmin - n_m + bp)
        - gammaln(nmin + ap + bp)
        - (gammaln(ap) + gammaln(bp) - gammaln(ap + bp))
    )


def pattern_log_densities(
    table: ComparisonTable, params: MixtureParams
) -> tuple[np.ndarray, np.ndarray]:
    """Log density of every comparison pattern under each class.

    Returns (log_m, log_u), each of length table.n_patterns. Pattern p's
    entry is the sum over fields of log theta[level of field k in p].
    """
    log_m = np.zeros(table.n_patterns)
    log_u = np.zeros(table.n_patterns)
    for k in range(table.n_fields):
        lv = table.level_maps[k] - 1
        log_m += np.log(np.maximum(params.theta_m[k], _LOG_FLOOR))[lv]
        log_u += np.log(np.maximum(params.theta_u[k], _LOG_FLOOR))[lv]
    return log_m, log_u


def pair_log_density(gamma: np.ndarray, params: MixtureParams, match: bool) -> float:
    """Log density of one pair's agreement levels under one class."""
    theta = params.theta_m if match else params.theta_u
    out = 0.0
    for k, lvl in enumerate(gamma):
        out += float(np.log(max(theta[k][int(lvl) - 1], _LOG_FLOOR)))
    return out


def pair_log_lr(
    gamma: np.ndarray,
    params: MixtureParams,
    *,
    regression=None,
    x_a: float | None = None,
    x_b: np.ndarray | None = None,
) -> float:
    """Log likelihood ratio (match over nonmatch) of one pair.

    With a regression component, the exclusive-variable densities of the
    pair are folded in on top of the comparison-pattern ratio.
    """
    out = pair_log_density(gamma, params, True) - pair_log_density(
        gamma, params, False
    )
    if regression is not None:
        from .regression import eval_match_logdensity, eval_nonmatch_logdensity

        if x_a is None or x_b is None:
            raise ConfigError("regression log ratio needs x_a and x_b")
        out += eval_match_logdensity(x_a, x_b, regression)
        out -= eval_nonmatch_logdensity(x_a, x_b, regression)
    return float(out)


def log_likelihood_full(
    state: LinkageState,
    table: ComparisonTable,
    params: MixtureParams,
    *,
    regression=None,
    x_a: np.ndarray | None = None,
    x_b: np.ndarray | None = None,
) -> float:
    """Joint log likelihood of all materialized comparisons given C.

    Every materialized pair contributes its class-conditional pattern
    density; with a regression component, matched pairs contribute the
    match-arm density of (x_a | x_b) and every other materialized pair
    the nonmatch-arm density.
    """
    for i, j in state.pairs():
        if not table.eligible(int(i), int(j)):
            raise InvariantViolation(f"linked pair ({i}, {j}) is not materialized")
    log_m, log_u = pattern_log_densities(table, params)
    total = 0.0
    for blk in table.blocks:
        counts = np.bincount(blk.patterns.ravel(), minlength=table.n_patterns)
        total += float(counts @ log_u)
    pairs = state.pairs()
    for i, j in pairs:
        code = table.pattern_of(int(i), int(j))
        total += float(log_m[code] - log_u[code])
    if regression is not None:
        from .regression import eval_match_logdensity, eval_nonmatch_logdensity

        if x_a is None or x_b is None:
            raise ConfigError("regression likelihood needs x_a and x_b")
        linked_b = state.a_to_b
        for blk in table.blocks:
            for i in blk.a_idx:
                for j in blk.b_idx:
                    total += eval_nonmatch_logdensity(
                        float(x_a[i]), x_b[j], regression
                    )
        for i, j in pairs:
            total += eval_match_logdensity(float(x_a[i]), x_b[j], regression)
            total -= eval_nonmatch_logdensity(float(x_a[i]), x_b[j], regression)
    return total


def log_posterior_unnormalized(
    state: LinkageState,
    table: ComparisonTable,
    params: MixtureParams,
    prior: PriorConfig,
    **kwargs,
) -> float:
    """Linkage prior plus full likelihood; usable for exact small-case checks."""
    return log_prior_linkage(
        state.n_m, table.n_a, table.n_b, prior
    ) + log_likelihood_full(state, table, params, **kwargs)
