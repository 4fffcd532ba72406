"""Synthetic linked-file generation and the factorial study harness.

Files are generated with three linking fields (a binary gender, a
three-digit ZIP code whose digits have supports of size 3, 4, and 5, and
a date of birth derived from an age distribution), plus exclusive
columns: covariates X_B ~ N_P(1, 4I) in file B and a scalar outcome X_A
in file A whose conditional mean depends on whether the record is a
match. Matched records replicate their linking fields into file B;
linking-field errors are then injected into file B by resampling ZIP
digits and date components with per-component probability eps/3.

The harness runs chains over a factorial design, averages linkage
metrics over emitted samples, pools the per-sample correlations by
multiple imputation, and scores bias/RMSE/coverage against the
generating correlation, which has a closed form for all three outcome
settings (verified against Monte Carlo oracles in the test suite).
"""

from __future__ import annotations

import calendar
import datetime
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .comparison import FieldSpec, RecordFile, build_comparison_table
from .errors import ConfigError, DataError, InvariantViolation
from .inference import combine_correlations, correlation_per_sample
from .model import PriorConfig
from .sampler import ChainConfig, LinkageData, run_chain

_MODELS = ("linear", "linear-with-w", "nonlinear")

# Table-style linking fields shared by every scenario
SIM_FIELD_SPECS = [
    FieldSpec("gender", "exact-categorical"),
    FieldSpec("zip", "digit-prefix", digits=3),
    FieldSpec("dob", "date-ymd"),
]

# per-digit supports of the ZIP code, sizes 3, 4, 5
_ZIP_SUPPORTS = (3, 4, 5)

# age ~ N(50, 5^2) against a fixed 2010-01-01 reference, truncated at
# +-6 sigma so the induced birth-year range is [1930, 1990]
_REFERENCE_YEAR = 2010
_AGE_MEAN, _AGE_SD = 50.0, 5.0
_AGE_LO, _AGE_HI = 20.0, 80.0
_YEAR_LO, _YEAR_HI = 1930, 1990


@dataclass(frozen=True)
class SimulationFactors:
    """One cell of the factorial design."""

    n_a: int = 500
    n_b: int = 1000
    n_m: int = 300
    p: int = 1
    sigma: float = 0.1
    beta_m: float = 0.5
    beta_u: float = 0.05
    eps: float = 0.0
    model: str = "linear"

    def __post_init__(self):
        if self.n_m > min(self.n_a, self.n_b):
            raise ConfigError("n_m cannot exceed the smaller file")
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigError("error rate must lie in [0, 1]")
        if self.model not in _MODELS:
            raise ConfigError(f"unknown outcome model {self.model!r}")
        if self.p < 1 or self.sigma <= 0:
            raise ConfigError("need at least one covariate and positive noise")


@dataclass
class LinkageTruth:
    """The generating match set, plus generation-side nuisance variables."""

    pairs: np.ndarray
    w_a: np.ndarray | None = None

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        for col in (0, 1):
            if len(np.unique(self.pairs[:, col])) != len(self.pairs):
                raise InvariantViolation("truth pairs are not one-to-one")

    @property
    def n_m(self) -> int:
        return len(self.pairs)

    def pair_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.pairs}


def _draw_gender(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.where(rng.random(n) < 0.5, "F", "M").astype(object)


def _draw_zip_digits(rng: np.random.Generator, n: int) -> np.ndarray:
    cols = [rng.integers(0, hi, size=n) for hi in _ZIP_SUPPORTS]
    return np.stack(cols, axis=1)


def _zip_strings(digits: np.ndarray) -> np.ndarray:
    return np.array(
        ["".join(str(d) for d in row) for row in digits], dtype=object
    )


def _days_in_year(year: int) -> int:
    return 366 if calendar.isleap(year) else 365


def _draw_dob(rng: np.random.Generator, n: int) -> np.ndarray:
    ages = np.clip(rng.normal(_AGE_MEAN, _AGE_SD, size=n), _AGE_LO, _AGE_HI)
    years = (_REFERENCE_YEAR - np.floor(ages)).astype(int)
    out = np.empty(n, dtype=object)
    for i in range(n):
        y = int(years[i])
        day = datetime.date(y, 1, 1) + datetime.timedelta(
            days=int(rng.integers(_days_in_year(y)))
        )
        out[i] = day.isoformat()
    return out


def _outcome_mean(
    x_b_rows: np.ndarray, beta: float, intercept: float, quad: float, model: str,
    w: np.ndarray | None,
) -> np.ndarray:
    mean = intercept + beta * x_b_rows.sum(axis=1)
    if model == "linear-with-w":
        mean = mean + 0.1 * w
    elif model == "nonlinear":
        mean = mean + quad * (x_b_rows**2).sum(axis=1)
    return mean


def generate_files(
    factors: SimulationFactors, rng: np.random.Generator
) -> tuple[RecordFile, RecordFile, LinkageTruth]:
    """Generate one clean replication (error injection is separate).

    Matched A records replicate their linking fields into their file B
    partner. Every A record gets an outcome: matched records through the
    match model at their true partner's covariates, unmatched records
    through the nonmatch model at a distinct unmatched B record's
    covariates (their shadow partner).
    """
    f = factors
    gender_a = _draw_gender(rng, f.n_a)
    zip_a = _draw_zip_digits(rng, f.n_a)
    dob_a = _draw_dob(rng, f.n_a)
    gender_b = _draw_gender(rng, f.n_b)
    zip_b = _draw_zip_digits(rng, f.n_b)
    dob_b = _draw_dob(rng, f.n_b)

    a_matched = rng.permutation(f.n_a)[: f.n_m]
    b_matched = rng.permutation(f.n_b)[: f.n_m]
    truth_pairs = np.column_stack([a_matched, b_matched])
    gender_b[b_matched] = gender_a[a_matched]
    zip_b[b_matched] = zip_a[a_matched]
    dob_b[b_matched] = dob_a[a_matched]

    x_b = rng.normal(1.0, 2.0, size=(f.n_b, f.p))
    w = rng.normal(1.0, 2.0, size=f.n_a) if f.model == "linear-with-w" else None

    # covariate rows driving each A record's outcome: the true partner
    # for matches, a distinct unmatched B record otherwise
    partner = np.empty(f.n_a, dtype=np.int64)
    partner[a_matched] = b_matched
    a_unmatched = np.setdiff1d(np.arange(f.n_a), a_matched)
    b_unmatched = np.setdiff1d(np.arange(f.n_b), b_matched)
    shadow = rng.choice(b_unmatched, size=len(a_unmatched), replace=False)
    partner[a_unmatched] = shadow

    is_match = np.zeros(f.n_a, dtype=bool)
    is_match[a_matched] = True
    rows = x_b[partner]
    mean = np.where(
        is_match,
        _outcome_mean(rows, f.beta_m, 10.0, 0.1, f.model, w),
        _outcome_mean(rows, f.beta_u, 5.0, 0.03, f.model, w),
    )
    x_a = rng.normal(mean, f.sigma)

    file_a = RecordFile(
        ids=np.array([f"a{i}" for i in range(f.n_a)], dtype=object),
        fields={"gender": gender_a, "zip": _zip_strings(zip_a), "dob": dob_a},
        x=x_a,
        x_names=("x_a",),
        name="file-a",
    )
    file_b = RecordFile(
        ids=np.array([f"b{j}" for j in range(f.n_b)], dtype=object),
        fields={"gender": gender_b, "zip": _zip_strings(zip_b), "dob": dob_b},
        x=x_b,
        x_names=tuple(f"x_b{k + 1}" for k in range(f.p)),
        name="file-b",
    )
    return file_a, file_b, LinkageTruth(pairs=truth_pairs, w_a=w)


def inject_errors(
    file_b: RecordFile, eps: float, rng: np.random.Generator
) -> RecordFile:
    """Perturb file B's ZIP digits and date components, each w.p. eps/3.

    A resample may coincide with the original value. Gender is never
    touched. Returns a new RecordFile; the input is left intact.
    """
    if not 0.0 <= eps <= 1.0:
        raise ConfigError("error rate must lie in [0, 1]")
    n = file_b.n
    p = eps / 3.0
    fields = {k: v.copy() for k, v in file_b.fields.items()}

    if "zip" in fields:
        digits = np.array(
            [[int(c) for c in str(v)] for v in fields["zip"]], dtype=np.int64
        )
        mask = rng.random((n, 3)) < p
        for d, hi in enumerate(_ZIP_SUPPORTS):
            redraw = rng.integers(0, hi, size=n)
            digits[mask[:, d], d] = redraw[mask[:, d]]
        fields["zip"] = _zip_strings(digits)

    if "dob" in fields:
        mask = rng.random((n, 3)) < p  # year, month, day
        new_years = rng.integers(_YEAR_LO, _YEAR_HI + 1, size=n)
        new_months = rng.integers(1, 13, size=n)
        day_u = rng.random(n)
        out = fields["dob"]
        for i in range(n):
            if not mask[i].any():
                continue
            d = datetime.date.fromisoformat(str(out[i]))
            year = int(new_years[i]) if mask[i, 0] else d.year
            month = int(new_months[i]) if mask[i, 1] else d.month
            month_len = calendar.monthrange(year, month)[1]
            if mask[i, 2]:
                day = 1 + int(day_u[i] * month_len)
            else:
                # a year/month resample can invalidate the original day
                day = min(d.day, month_len)
            out[i] = datetime.date(year, month, day).isoformat()

    return RecordFile(
        ids=file_b.ids.copy(),
        fields=fields,
        x=None if file_b.x is None else file_b.x.copy(),
        x_names=file_b.x_names,
        block=None if file_b.block is None else file_b.block.copy(),
        name=file_b.name,
    )


class LinkageMetrics(NamedTuple):
    tpr: float
    ppv: float
    f1: float
    n_m: float


def compute_metrics(estimated, truth: LinkageTruth) -> LinkageMetrics:
    """Score an estimated linkage against the generating match set.

    Accepts a LinkageState or a plain (n, 2) array of pairs. PPV (and
    then F1) is 0 by convention when nothing is linked.
    """
    if hasattr(estimated, "pairs") and callable(estimated.pairs):
        est_pairs = estimated.pairs()
    else:
        est_pairs = np.asarray(estimated, dtype=np.int64).reshape(-1, 2)
    est = {(int(i), int(j)) for i, j in est_pairs}
    true = truth.pair_set()
    correct = len(est & true)
    tpr = correct / len(true) if true else 0.0
    ppv = correct / len(est) if est else 0.0
    f1 = 2 * tpr * ppv / (tpr + ppv) if tpr + ppv > 0 else 0.0
    return LinkageMetrics(tpr=tpr, ppv=ppv, f1=f1, n_m=len(est))


def kl_bivariate_normal(rho_m: float, rho_u: float) -> float:
    """KL divergence between unit-variance bivariate normals that differ
    only in correlation."""
    if abs(rho_m) >= 1.0 or abs(rho_u) >= 1.0:
        raise ConfigError("correlations must lie strictly inside (-1, 1)")
    return (
        (1.0 - rho_m * rho_u) / (1.0 - rho_u**2)
        - 0.5 * math.log((1.0 - rho_m**2) / (1.0 - rho_u**2))
        - 1.0
    )


# the correlation grid used in the reference divergence table: steps of
# 0.1 from -0.95 to -0.15, then from 0.05 to 0.95
KL_GRID = tuple(
    round(-0.95 + 0.1 * i, 2) for i in range(9)
) + tuple(round(0.05 + 0.1 * i, 2) for i in range(10))


def kl_table(grid: Sequence[float] = KL_GRID) -> np.ndarray:
    """Divergence matrix over a correlation grid: rows rho_M, cols rho_U."""
    out = np.empty((len(grid), len(grid)))
    for r, rm in enumerate(grid):
        for c, ru in enumerate(grid):
            out[r, c] = kl_bivariate_normal(rm, ru)
    return out


def true_correlation(factors: SimulationFactors) -> float:
    """Generating corr(X_A, X_B1) on matched pairs, in closed form.

    With X_B ~ N_P(1, 4I): the linear setting has cov(X_A, X_B1) =
    4 beta_M and var(X_A) = 4 P beta_M^2 + sigma^2; the W term only adds
    0.1^2 var(W) = 0.04 to var(X_A); the quadratic term adds, per
    component, cov(X^2, X) = 8 to the covariance (once, via X_B1) and
    0.01 var(X^2) + 2(0.1) beta_M cov(X, X^2) per component to the
    variance, with var(X^2) = 48 for X ~ N(1, 4).
    """
    b, s2, p = factors.beta_m, factors.sigma**2, factors.p
    if factors.model == "linear":
        cov = 4.0 * b
        var_a = 4.0 * p * b**2 + s2
    elif factors.model == "linear-with-w":
        cov = 4.0 * b
        var_a = 4.0 * p * b**2 + 0.01 * 4.0 + s2
    else:
        q = 0.1
        cov = 4.0 * b + q * 8.0
        var_a = p * (4.0 * b**2 + q**2 * 48.0 + 2.0 * q * b * 8.0) + s2
    return cov / (2.0 * math.sqrt(var_a))


BLOCKED_N_BLOCKS = 250
BLOCKED_BETA_M = 6.0
BLOCKED_BETA_U = 0.5
BLOCKED_RESIDUAL_VAR = 0.1


def true_correlation_blocked() -> float:
    """Generating correlation of the blocked scenario's match model."""
    var_a = BLOCKED_BETA_M**2 * 1.0 + BLOCKED_RESIDUAL_VAR
    return BLOCKED_BETA_M / math.sqrt(var_a)


def generate_blocked_scenario(
    rng: np.random.Generator, *, eps: float = 0.0
) -> tuple[RecordFile, RecordFile, np.ndarray, LinkageTruth]:
    """250 blocks of 2 A-records and 4 B-records, one true link per block.

    X_B is -1 + (link indicator) + N(0, 1): the block's true-link B record
    centers at 0 and the other three center at -1, tying X_B to link
    status. X_A follows steep match and flat nonmatch lines with small
    residual variance. Returns the two files, the block keys, and the
    truth.
    """
    s = BLOCKED_N_BLOCKS
    n_a, n_b = 2 * s, 4 * s
    keys = np.array([f"b{q:03d}" for q in range(s)], dtype=object)
    block_a = np.repeat(keys, 2)
    block_b = np.repeat(keys, 4)

    gender_a = _draw_gender(rng, n_a)
    zip_a = _draw_zip_digits(rng, n_a)
    dob_a = _draw_dob(rng, n_a)
    gender_b = _draw_gender(rng, n_b)
    zip_b = _draw_zip_digits(rng, n_b)
    dob_b = _draw_dob(rng, n_b)

    # one true link per block: a random A slot to a random B slot
    a_slot = rng.integers(0, 2, size=s)
    b_slot = rng.integers(0, 4, size=s)
    a_matched = 2 * np.arange(s) + a_slot
    b_matched = 4 * np.arange(s) + b_slot
    truth_pairs = np.column_stack([a_matched, b_matched])
    gender_b[b_matched] = gender_a[a_matched]
    zip_b[b_matched] = zip_a[a_matched]
    dob_b[b_matched] = dob_a[a_matched]

    is_match_b = np.zeros(n_b, dtype=bool)
    is_match_b[b_matched] = True
    x_b = -1.0 + is_match_b + rng.normal(0.0, 1.0, size=n_b)

    partner = np.empty(n_a, dtype=np.int64)
    partner[a_matched] = b_matched
    is_match = np.zeros(n_a, dtype=bool)
    is_match[a_matched] = True
    for q in range(s):
        i = 2 * q + (1 - a_slot[q])  # the block's unmatched A record
        unmatched_b = [4 * q + t for t in range(4) if t != b_slot[q]]
        partner[i] = unmatched_b[int(rng.integers(3))]
    mean = np.where(
        is_match,
        10.0 + BLOCKED_BETA_M * x_b[partner],
        5.0 + BLOCKED_BETA_U * x_b[partner],
    )
    x_a = rng.normal(mean, math.sqrt(BLOCKED_RESIDUAL_VAR))

    file_a = RecordFile(
        ids=np.array([f"a{i}" for i in range(n_a)], dtype=object),
        fields={"gender": gender_a, "zip": _zip_strings(zip_a), "dob": dob_a},
        x=x_a,
        x_names=("x_a",),
        block=block_a,
        name="file-a",
    )
    file_b = RecordFile(
        ids=np.array([f"b{j}" for j in range(n_b)], dtype=object),
        fields={"gender": gender_b, "zip": _zip_strings(zip_b), "dob": dob_b},
        x=x_b,
        x_names=("x_b1",),
        block=block_b,
        name="file-b",
    )
    if eps > 0.0:
        file_b = inject_errors(file_b, eps, rng)
    return file_a, file_b, keys, LinkageTruth(pairs=truth_pairs)


@dataclass
class CellResult:
    """Aggregated results of one (factors, method) cell."""

    factors: SimulationFactors
    method: str
    replications: int
    n_m_mean: float
    n_m_sd: float
    tpr_mean: float
    tpr_sd: float
    ppv_mean: float
    ppv_sd: float
    f1_mean: float
    f1_sd: float
    rho_true: float
    bias: float
    rmse: float
    coverage: float

    def to_row(self) -> dict:
        return {
            "epsilon": self.factors.eps,
            "method": self.method,
            "P": self.factors.p,
            "beta_M": self.factors.beta_m,
            "n_m": self.n_m_mean,
            "TPR": self.tpr_mean,
            "PPV": self.ppv_mean,
            "F1": self.f1_mean,
            "bias": self.bias,
            "RMSE": self.rmse,
            "coverage": self.coverage,
            "n_m_sd": self.n_m_sd,
            "TPR_sd": self.tpr_sd,
            "PPV_sd": self.ppv_sd,
            "F1_sd": self.f1_sd,
            "sigma": self.factors.sigma,
            "model": self.factors.model,
            "rho_true": self.rho_true,
            "replications": self.replications,
        }


RESULT_COLUMNS = [
    "epsilon",
    "method",
    "P",
    "beta_M",
    "n_m",
    "TPR",
    "PPV",
    "F1",
    "bias",
    "RMSE",
    "coverage",
    "n_m_sd",
    "TPR_sd",
    "PPV_sd",
    "F1_sd",
    "sigma",
    "model",
    "rho_true",
    "replications",
]


class _RepOutcome(NamedTuple):
    """One replication's per-method summaries."""

    metrics: dict[str, LinkageMetrics]
    rho: dict[str, float]
    covered: dict[str, float]


def _run_replication(
    factors: SimulationFactors,
    seed_seq: np.random.SeedSequence,
    methods: Sequence[str],
    chain: ChainConfig,
    rho_true: float,
) -> _RepOutcome:
    data_seq, *chain_seqs = seed_seq.spawn(1 + len(methods))
    rng = np.random.default_rng(data_seq)
    file_a, file_b, truth = generate_files(factors, rng)
    file_b = inject_errors(file_b, factors.eps, rng)
    table = build_comparison_table(file_a, file_b, SIM_FIELD_SPECS)
    data = LinkageData(table=table, x_a=file_a.x, x_b=file_b.x)
    return _score_methods(
        data, truth, methods, chain, chain_seqs, rho_true
    )


def _score_methods(
    data: LinkageData,
    truth: LinkageTruth,
    methods: Sequence[str],
    chain: ChainConfig,
    chain_seqs: Sequence[np.random.SeedSequence],
    rho_true: float,
    blocked_prior: bool = False,
) -> _RepOutcome:
    metrics: dict[str, LinkageMetrics] = {}
    rhos: dict[str, float] = {}
    covered: dict[str, float] = {}
    build_prior = PriorConfig.blocked if blocked_prior else PriorConfig.flat
    prior = build_prior(data.table)
    for method, seq in zip(methods, chain_seqs):
        cfg = replace(
            chain,
            method=method,
            seed=int(seq.generate_state(1)[0]),
        )
        samples = list(run_chain(cfg, data, prior))
        per_sample = [compute_metrics(s.pairs, truth) for s in samples]
        metrics[method] = LinkageMetrics(
            tpr=float(np.mean([m.tpr for m in per_sample])),
            ppv=float(np.mean([m.ppv for m in per_sample])),
            f1=float(np.mean([m.f1 for m in per_sample])),
            n_m=float(np.mean([m.n_m for m in per_sample])),
        )
        cors = []
        for s in samples:
            if len(s.pairs) < 4:
                continue
            st = _state_from_pairs(s.pairs, data.table.n_a, data.table.n_b)
            try:
                cors.append(
                    correlation_per_sample(data.x_a, data.x_b[:, 0], st)
                )
            except DataError:
                continue
        # pooling needs at least 2 usable samples; short or cold chains
        # may not provide them, in which case the correlation summary for
        # this replication is undefined
        if len(cors) >= 2:
            rho, interval, _ = combine_correlations(cors)
            rhos[method] = rho
            covered[method] = float(interval[0] <= rho_true <= interval[1])
        else:
            rhos[method] = math.nan
            covered[method] = math.nan
    return _RepOutcome(metrics=metrics, rho=rhos, covered=covered)


def _state_from_pairs(pairs: np.ndarray, n_a: int, n_b: int):
    from .model import LinkageState

    a_to_b = np.full(n_a, -1, dtype=np.int64)
    b_to_a = np.full(n_b, -1, dtype=np.int64)
    for i, j in pairs:
        a_to_b[int(i)] = int(j)
        b_to_a[int(j)] = int(i)
    return LinkageState(a_to_b=a_to_b, b_to_a=b_to_a)


def run_factorial(
    design: Sequence[SimulationFactors],
    replications: int,
    methods: Sequence[str],
    chain: ChainConfig,
    *,
    root_seed: int = 0,
    threads: int = 1,
) -> list[CellResult]:
    """Run every (cell, replication) job and aggregate per cell and method.

    Replication seeds are spawned from the root seed, so results do not
    depend on the execution order or the number of worker processes.
    """
    if replications < 1:
        raise ConfigError("need at least one replication")
    if not methods:
        raise ConfigError("need at least one method")
    root = np.random.SeedSequence(root_seed)
    cell_seqs = root.spawn(len(design))
    jobs = []
    for c, factors in enumerate(design):
        rho_true = true_correlation(factors)
        for r, rep_seq in enumerate(cell_seqs[c].spawn(replications)):
            jobs.append((c, r, factors, rep_seq, rho_true))

    outcomes: dict[tuple[int, int], _RepOutcome] = {}
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {
                (c, r): pool.submit(
                    _run_replication, factors, rep_seq, list(methods), chain, rho_true
                )
                for (c, r, factors, rep_seq, rho_true) in jobs
            }
            for key, fut in futures.items():
                outcomes[key] = fut.result()
    else:
        for c, r, factors, rep_seq, rho_true in jobs:
            outcomes[(c, r)] = _run_replication(
                factors, rep_seq, list(methods), chain, rho_true
            )

    results = []
    for c, factors in enumerate(design):
        rho_true = true_correlation(factors)
        reps = [outcomes[(c, r)] for r in range(replications)]
        for method in methods:
            results.append(
                _aggregate_cell(factors, method, reps, rho_true, replications)
            )
    return results


def _aggregate_cell(
    factors: SimulationFactors,
    method: str,
    reps: Sequence[_RepOutcome],
    rho_true: float,
    replications: int,
) -> CellResult:
    tpr = np.array([r.metrics[method].tpr for r in reps])
    ppv = np.array([r.metrics[method].ppv for r in reps])
    f1 = np.array([r.metrics[method].f1 for r in reps])
    n_m = np.array([r.metrics[method].n_m for r in reps])
    rho = np.array([r.rho[method] for r in reps], dtype=float)
    cov = np.array([r.covered[method] for r in reps], dtype=float)
    # replications whose correlation summary is undefined are left out of
    # the bias/RMSE/coverage columns
    ok = np.isfinite(rho)
    if ok.any():
        bias = float((rho[ok] - rho_true).mean())
        rmse = float(np.sqrt(((rho[ok] - rho_true) ** 2).mean()))
        coverage = float(cov[ok].mean())
    else:
        bias = rmse = coverage = math.nan
    sd = lambda v: float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return CellResult(
        factors=factors,
        method=method,
        replications=replications,
        n_m_mean=float(n_m.mean()),
        n_m_sd=sd(n_m),
        tpr_mean=float(tpr.mean()),
        tpr_sd=sd(tpr),
        ppv_mean=float(ppv.mean()),
        ppv_sd=sd(ppv),
        f1_mean=float(f1.mean()),
        f1_sd=sd(f1),
        rho_true=rho_true,
        bias=bias,
        rmse=rmse,
        coverage=coverage,
    )


def run_blocked_study(
    replications: int,
    methods: Sequence[str],
    chain: ChainConfig,
    *,
    eps: float = 0.0,
    root_seed: int = 0,
) -> list[CellResult]:
    """The built-in blocked scenario, aggregated like a factorial cell."""
    rho_true = true_correlation_blocked()
    root = np.random.SeedSequence(root_seed)
    reps = []
    factors = SimulationFactors(
        n_a=2 * BLOCKED_N_BLOCKS,
        n_b=4 * BLOCKED_N_BLOCKS,
        n_m=BLOCKED_N_BLOCKS,
        p=1,
        sigma=math.sqrt(BLOCKED_RESIDUAL_VAR),
        beta_m=BLOCKED_BETA_M,
        beta_u=BLOCKED_BETA_U,
        eps=eps,
        model="linear",
    )
    for rep_seq in root.spawn(replications):
        data_seq, *chain_seqs = rep_seq.spawn(1 + len(methods))
        rng = np.random.default_rng(data_seq)
        file_a, file_b, _, truth = generate_blocked_scenario(rng, eps=eps)
        table = build_comparison_table(file_a, file_b, SIM_FIELD_SPECS)
        data = LinkageData(table=table, x_a=file_a.x, x_b=file_b.x)
        # with four candidates per block, an eighth of the within-block pairs
        # are true links, so theta_U is unidentified from materialized pairs
        # alone; the ruled-out cross-block pairs pin it down
        reps.append(
            _score_methods(
                data,
                truth,
                methods,
                chain,
                chain_seqs,
                rho_true,
                blocked_prior=True,
            )
        )
    return [
        _aggregate_cell(factors, method, reps, rho_true, replications)
        for method in methods
    ]
