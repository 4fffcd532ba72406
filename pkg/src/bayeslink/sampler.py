"""MCMC over the linkage structure and the model parameters.

One iteration of the chain is a three-step data augmentation scan:

1. theta update: given the current linkage, the per-field level
   probabilities of each class are conjugate Dirichlet draws from the
   prior weights plus the observed level counts (linked pairs for the
   match class, every other materialized pair for the nonmatch class).
2. regression update: given the linkage, both regression arms are
   conjugate draws (skipped entirely for method "brl").
3. linkage update: a sweep over the records of file A with one of two
   interchangeable kernels.

The metropolis-hastings kernel proposes one move per A record. An
unlinked record proposes adding a link to a uniformly chosen unlinked
B record of its block. A linked record selects uniformly among its
block's currently linked pairs: selecting its own pair proposes dropping
it, selecting another proposes swapping the two pairs' B sides. With the
uniform selection, the add/drop acceptance ratios reduce to the familiar
(n_B - n_m)/(n_m + 1) transition asymmetry without blocking, and swaps
are symmetric so only the four pair likelihood ratios enter.

The adaptive-multinomial kernel is a sequential Gibbs scan: each A
record's designation is removed and redrawn from its exact conditional,
a categorical over {no link} and {link to j} for every currently
unlinked eligible j, with the no-link weight
(max(nA,nB) - n_m)(min(nA,nB) - n_m + beta_pi - 1)/(n_m + alpha_pi)
and link weights equal to the pair likelihood ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .comparison import ComparisonTable
from .errors import ConfigError, DegeneratePosteriorError
from .model import (
    LinkageState,
    MixtureParams,
    PriorConfig,
    pattern_log_densities,
)
from .regression import (
    PairSufficientStats,
    RegressionParams,
    conditional_means,
)

_KERNELS = ("metropolis-hastings", "adaptive-multinomial")
_METHODS = ("brl", "brlvof", "brlvof_ind")


@dataclass
class ChainConfig:
    """Run-length and kernel/method selection for one chain."""

    iterations: int = 1000
    burn_in: int = 100
    thinning: int = 1
    kernel: str = "adaptive-multinomial"
    method: str = "brl"
    seed: int | None = None
    init: str = "empty"

    def __post_init__(self):
        if self.kernel not in _KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.method not in _METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.iterations < 1:
            raise ConfigError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn-in must be smaller than iterations")
        if self.thinning < 1:
            raise ConfigError("thinning must be at least 1")
        if self.init not in ("empty", "random"):
            raise ConfigError("init must be 'empty' or 'random'")


@dataclass
class LinkageData:
    """Everything a chain conditions on: comparisons plus exclusive columns."""

    table: ComparisonTable
    x_a: np.ndarray | None = None
    x_b: np.ndarray | None = None

    def __post_init__(self):
        if self.x_a is not None:
            self.x_a = np.asarray(self.x_a, dtype=np.float64).ravel()
            if len(self.x_a) != self.table.n_a:
                raise ConfigError("x_a length does not match file A")
        if self.x_b is not None:
            self.x_b = np.asarray(self.x_b, dtype=np.float64)
            if self.x_b.ndim == 1:
                self.x_b = self.x_b[:, None]
            if len(self.x_b) != self.table.n_b:
                raise ConfigError("x_b length does not match file B")


@dataclass
class PosteriorSample:
    """One emitted state: linked pairs plus the parameter draws."""

    iteration: int
    pairs: np.ndarray
    params: MixtureParams
    regression: RegressionParams | None = None

    @property
    def n_m(self) -> int:
        return len(self.pairs)


@dataclass
class MoveStats:
    """Per-sweep proposal accounting for the metropolis-hastings kernel."""

    add_proposed: int = 0
    add_accepted: int = 0
    drop_proposed: int = 0
    drop_accepted: int = 0
    swap_proposed: int = 0
    swap_accepted: int = 0
    skipped: int = 0

    def __iadd__(self, other: "MoveStats") -> "MoveStats":
        for f in (
            "add_proposed",
            "add_accepted",
            "drop_proposed",
            "drop_accepted",
            "swap_proposed",
            "swap_accepted",
            "skipped",
        ):
            setattr(self, f, getattr(self, f) + getattr(other, f))
        return self


def update_theta(
    table: ComparisonTable,
    state: LinkageState,
    prior: PriorConfig,
    rng: np.random.Generator,
) -> MixtureParams:
    """Conjugate Dirichlet draw of both classes' level probabilities.

    Nonmatch counts are the total materialized level counts minus the
    linked pairs' counts, so the two classes always partition the table.
    """
    if len(prior.alpha_m) != table.n_fields:
        raise ConfigError("prior does not cover the table's fields")
    pairs = state.pairs()
    codes = np.array(
        [table.pattern_of(int(i), int(j)) for i, j in pairs], dtype=np.int64
    )
    theta_m, theta_u = [], []
    for k in range(table.n_fields):
        levels = table.specs[k].levels
        m_counts = np.zeros(levels, dtype=np.int64)
        if len(codes):
            np.add.at(m_counts, table.level_maps[k][codes] - 1, 1)
        u_counts = table.total_level_counts[k] - m_counts
        theta_m.append(rng.dirichlet(prior.alpha_m[k] + m_counts))
        theta_u.append(rng.dirichlet(prior.alpha_u[k] + u_counts))
    return MixtureParams(theta_m=theta_m, theta_u=theta_u)


class _SweepWorkspace:
    """Per-sweep precomputation shared by both kernels.

    Holds the per-pattern comparison log likelihood ratio and, when a
    regression draw is active, the per-B-record conditional means of the
    outcome under each arm.
    """

    def __init__(
        self,
        table: ComparisonTable,
        params: MixtureParams,
        regression: RegressionParams | None,
        x_a: np.ndarray | None,
        x_b: np.ndarray | None,
    ):
        log_m, log_u = pattern_log_densities(table, params)
        self.table = table
        self.loglr_pattern = log_m - log_u
        self.regression = regression
        if regression is not None:
            if x_a is None or x_b is None:
                raise ConfigError("regression sweeps need x_a and x_b")
            from .regression import design_matrix

            self.x_a = np.asarray(x_a, dtype=np.float64).ravel()
            mu_m, mu_u = conditional_means(design_matrix(x_b), regression)
            self.mu_m = mu_m
            self.mu_u = mu_u
            self.s2m = regression.sigma2_m
            self.s2u = regression.sigma2_u
            self.log_sd_ratio = -0.5 * math.log(self.s2m / self.s2u)

    def loglr_row(self, i: int, b_idx: np.ndarray, patt_row: np.ndarray) -> np.ndarray:
        """Log LR of record i against a set of B records (vectorized)."""
        out = self.loglr_pattern[patt_row]
        if self.regression is not None:
            x = self.x_a[i]
            out = out + (
                self.log_sd_ratio
                + (x - self.mu_u[b_idx]) ** 2 / (2.0 * self.s2u)
                - (x - self.mu_m[b_idx]) ** 2 / (2.0 * self.s2m)
            )
        return out

    def loglr_one(self, i: int, j: int) -> float:
        blk = self.table.blocks[self.table.block_of_a[i]]
        code = blk.patterns[blk.a_pos(i), blk.b_pos(j)]
        out = float(self.loglr_pattern[code])
        if self.regression is not None:
            x = self.x_a[i]
            out += (
                self.log_sd_ratio
                + (x - self.mu_u[j]) ** 2 / (2.0 * self.s2u)
                - (x - self.mu_m[j]) ** 2 / (2.0 * self.s2m)
            )
        return out


def mh_sweep(
    state: LinkageState,
    table: ComparisonTable,
    params: MixtureParams,
    regression: RegressionParams | None,
    prior: PriorConfig,
    rng: np.random.Generator,
    *,
    x_a: np.ndarray | None = None,
    x_b: np.ndarray | None = None,
) -> MoveStats:
    """One Metropolis-Hastings pass over the records of file A."""
    ws = _SweepWorkspace(table, params, regression, x_a, x_b)
    stats = MoveStats()
    nmin, nmax = table.min_size, table.max_size
    ap, bp = prior.alpha_pi, prior.beta_pi
    for i in range(table.n_a):
        bi = table.block_of_a[i]
        if bi < 0:
            stats.skipped += 1
            continue
        blk = table.blocks[bi]
        j0 = int(state.a_to_b[i])
        if j0 < 0:
            unlinked = blk.b_idx[state.b_to_a[blk.b_idx] < 0]
            u = len(unlinked)
            if u == 0:
                stats.skipped += 1
                continue
            j = int(unlinked[rng.integers(u)])
            linked_in_block = int((state.a_to_b[blk.a_idx] >= 0).sum())
            n_m = state.n_m
            log_acc = (
                math.log(u)
                - math.log(linked_in_block + 1)
                + ws.loglr_one(i, j)
            )
            if prior.link_prior != "uniform":
                log_acc += (
                    math.log(n_m + ap)
                    - math.log(nmax - n_m)
                    - math.log(nmin - n_m + bp - 1)
                )
            stats.add_proposed += 1
            if log_acc >= 0 or math.log(rng.random()) < log_acc:
                state.link(i, j)
                stats.add_accepted += 1
        else:
            linked_a = blk.a_idx[state.a_to_b[blk.a_idx] >= 0]
            pick = int(linked_a[rng.integers(len(linked_a))])
            if pick == i:
                u_after = int((state.b_to_a[blk.b_idx] < 0).sum()) + 1
                n_m = state.n_m
                log_acc = (
                    math.log(len(linked_a))
                    - math.log(u_after)
                    - ws.loglr_one(i, j0)
                )
                if prior.link_prior != "uniform":
                    log_acc += (
                        math.log(nmax - n_m + 1)
                        + math.log(nmin - n_m + bp)
                        - math.log(n_m + ap - 1)
                    )
                stats.drop_proposed += 1
                if log_acc >= 0 or math.log(rng.random()) < log_acc:
                    state.unlink(i)
                    stats.drop_accepted += 1
            else:
                r = pick
                s = int(state.a_to_b[r])
                log_acc = (
                    ws.loglr_one(i, s)
                    + ws.loglr_one(r, j0)
                    - ws.loglr_one(i, j0)
                    - ws.loglr_one(r, s)
                )
                stats.swap_proposed += 1
                if log_acc >= 0 or math.log(rng.random()) < log_acc:
                    state.unlink(i)
                    state.unlink(r)
                    state.link(i, s)
                    state.link(r, j0)
                    stats.swap_accepted += 1
    return stats


def multinomial_sweep(
    state: LinkageState,
    table: ComparisonTable,
    params: MixtureParams,
    regression: RegressionParams | None,
    prior: PriorConfig,
    rng: np.random.Generator,
    *,
    x_a: np.ndarray | None = None,
    x_b: np.ndarray | None = None,
) -> None:
    """One sequential Gibbs pass redrawing each A record's designation."""
    ws = _SweepWorkspace(table, params, regression, x_a, x_b)
    nmin, nmax = table.min_size, table.max_size
    ap, bp = prior.alpha_pi, prior.beta_pi
    for i in range(table.n_a):
        bi = table.block_of_a[i]
        if bi < 0:
            continue
        blk = table.blocks[bi]
        if state.a_to_b[i] >= 0:
            state.unlink(i)
        n_m = state.n_m
        mask = state.b_to_a[blk.b_idx] < 0
        if not mask.any():
            continue
        candidates = blk.b_idx[mask]
        pos_i = blk.a_pos(i)
        logw = ws.loglr_row(i, candidates, blk.patterns[pos_i][mask])
        # no-link weight from the linkage prior's size ratio; a uniform
        # matching prior weighs staying unlinked like any single candidate
        if prior.link_prior == "uniform":
            log_nolink = 0.0
        else:
            log_nolink = (
                math.log(nmax - n_m)
                + math.log(nmin - n_m + bp - 1)
                - math.log(n_m + ap)
            )
        all_logw = np.append(logw, log_nolink)
        all_logw -= all_logw.max()
        w = np.exp(all_logw)
        w_sum = w.cumsum()
        pick = int(np.searchsorted(w_sum, rng.random() * w_sum[-1], side="right"))
        if pick < len(candidates):
            state.link(i, int(candidates[pick]))


def random_initial_state(
    table: ComparisonTable, prior: PriorConfig, rng: np.random.Generator
) -> LinkageState:
    """A random linkage to start a chain from.

    Draws a link proportion from the prior Beta, then walks file A linking
    each record with that probability to a uniformly chosen eligible,
    still-unlinked B record. Arbitrary but reproducible; burn-in removes
    its influence.
    """
    state = LinkageState.empty(table.n_a, table.n_b)
    pi = rng.beta(prior.alpha_pi, prior.beta_pi)
    for i in range(table.n_a):
        b = table.block_of_a[i]
        if b < 0 or rng.random() >= pi:
            continue
        blk = table.blocks[b]
        mask = state.b_to_a[blk.b_idx] < 0
        if not mask.any():
            continue
        candidates = blk.b_idx[mask]
        state.link(i, int(candidates[rng.integers(len(candidates))]))
    return state


def run_chain(
    config: ChainConfig, data: LinkageData, prior: PriorConfig
) -> Iterator[PosteriorSample]:
    """Run one chain, yielding post-burn-in thinned posterior samples.

    Deterministic given config.seed. With init="empty" the regression
    methods start with comparison-only linkage sweeps; the regression
    component joins the likelihood ratio from the first iteration whose
    linkage supports a conjugate draw (n_m large enough for the match
    design), which is the exact Gibbs conditional from then on. With
    init="random" the chain starts from a random linkage, so the
    regression conditionals are usually available immediately.
    """
    table = data.table
    if config.method != "brl" and (data.x_a is None or data.x_b is None):
        raise ConfigError(f"method {config.method!r} needs exclusive columns")
    rng = np.random.default_rng(config.seed)
    if config.init == "random":
        state = random_initial_state(table, prior, rng)
    else:
        state = LinkageState.empty(table.n_a, table.n_b)
    engine = None
    if config.method != "brl":
        engine = PairSufficientStats(data.x_a, data.x_b, table)
    sweep = mh_sweep if config.kernel == "metropolis-hastings" else multinomial_sweep
    regression = None
    for t in range(1, config.iterations + 1):
        params = update_theta(table, state, prior, rng)
        if engine is not None:
            try:
                regression = engine.sample(state, rng, config.method)
            except DegeneratePosteriorError:
                regression = None
        sweep(
            state,
            table,
            params,
            regression,
            prior,
            rng,
            x_a=data.x_a,
            x_b=data.x_b,
        )
        if t > config.burn_in and (t - config.burn_in - 1) % config.thinning == 0:
            yield PosteriorSample(
                iteration=t,
                pairs=state.pairs(),
                params=params,
                regression=regression,
            )


def traces_from_samples(
    samples: list[PosteriorSample], table: ComparisonTable
) -> dict[str, np.ndarray]:
    """Scalar parameter traces keyed by name, one value per emitted sample."""
    if not samples:
        return {}
    traces: dict[str, list[float]] = {"n_m": []}
    for s in samples:
        traces["n_m"].append(float(s.n_m))
        for k, spec in enumerate(table.specs):
            for lvl in range(spec.levels):
                traces.setdefault(f"theta_m[{spec.name}][{lvl + 1}]", []).append(
                    float(s.params.theta_m[k][lvl])
                )
                traces.setdefault(f"theta_u[{spec.name}][{lvl + 1}]", []).append(
                    float(s.params.theta_u[k][lvl])
                )
        if s.regression is not None:
            for c, v in enumerate(s.regression.beta_m):
                traces.setdefault(f"beta_m[{c}]", []).append(float(v))
            traces.setdefault("sigma2_m", []).append(float(s.regression.sigma2_m))
            for c, v in enumerate(s.regression.beta_u):
                traces.setdefault(f"beta_u[{c}]", []).append(float(v))
            traces.setdefault("sigma2_u", []).append(float(s.regression.sigma2_u))
    # a regression series shorter than the sample count would misalign
    # with the iteration axis; only emit complete series
    n = len(samples)
    return {k: np.array(v) for k, v in traces.items() if len(v) == n}
