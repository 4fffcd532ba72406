"""Command-line interface.

Four subcommands cover the workflow: ``link`` samples linkage structures
for a pair of record files and writes the posterior artifacts, ``analyze``
pools a downstream estimate over those samples, ``simulate`` runs the
factorial study harness, and ``diagnose`` turns a trace file into a
convergence report with figures.

Configuration files are TOML (JSON is accepted when the file ends in
``.json``). Every run writes a manifest carrying the resolved
configuration, the seed, and the package version, which is enough to
reproduce it exactly. Exit codes: 0 success, 1 runtime failure, 2
user or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .comparison import FieldSpec, build_comparison_table, load_record_file
from .diagnostics import summarize_traces
from .errors import BayeslinkError, ConfigError, DataError
from .inference import (
    combine_correlations,
    combine_mi,
    correlation_per_sample,
    regress_per_sample,
)
from .model import LinkageState, PriorConfig
from .sampler import ChainConfig, LinkageData, run_chain, traces_from_samples
from .simulation import (
    KL_GRID,
    RESULT_COLUMNS,
    SimulationFactors,
    kl_table,
    run_blocked_study,
    run_factorial,
)

_REQUIRED = object()


def _load_mapping(path: Path) -> dict:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            mapping = json.loads(raw.decode("utf-8"))
        else:
            mapping = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(mapping, dict):
        raise ConfigError(f"config {path} must hold a table at the top level")
    return mapping


def _want(mapping: dict, key: str, kind, default=_REQUIRED, where: str = ""):
    label = f"{where}.{key}" if where else key
    if key not in mapping:
        if default is _REQUIRED:
            raise ConfigError(f"missing config key: {label}")
        return default
    value = mapping[key]
    if isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"config key {label} has the wrong type")
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"config key {label} has the wrong type")
    return value


def _string_list(mapping: dict, key: str, default=_REQUIRED, where: str = ""):
    value = _want(mapping, key, list, default=default, where=where)
    if isinstance(value, list):
        if not all(isinstance(v, str) for v in value):
            label = f"{where}.{key}" if where else key
            raise ConfigError(f"config key {label} must list strings")
        return list(value)
    return value


def _field_specs(mapping: dict) -> list[FieldSpec]:
    entries = _want(mapping, "fields", list)
    if not entries:
        raise ConfigError("config must declare at least one linking field")
    specs = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ConfigError(f"fields[{i}] must be a table")
        where = f"fields[{i}]"
        name = _want(entry, "name", str, where=where)
        kind = _want(entry, "kind", str, where=where)
        digits = _want(entry, "digits", int, default=None, where=where)
        specs.append(FieldSpec(name=name, kind=kind, digits=digits))
    return specs


def _chain_config(mapping: dict, *, method: str, seed: int) -> ChainConfig:
    return ChainConfig(
        iterations=_want(mapping, "iterations", int, default=1000, where="model"),
        burn_in=_want(mapping, "burn_in", int, default=100, where="model"),
        thinning=_want(mapping, "thinning", int, default=1, where="model"),
        kernel=_want(
            mapping, "kernel", str, default="adaptive-multinomial", where="model"
        ),
        init=_want(mapping, "init", str, default="empty", where="model"),
        method=method,
        seed=seed,
    )


def _resolve_seed(args, mapping: dict) -> int:
    if args.seed is not None:
        return args.seed
    seed = _want(mapping, "seed", int, default=None)
    if seed is None:
        # no seed given anywhere: draw one so the manifest can still
        # reproduce the run
        seed = int(np.random.SeedSequence().generate_state(1)[0])
    return seed


def _resolve_output(args, mapping: dict, base: Path) -> Path:
    if args.output is not None:
        out = Path(args.output)
    else:
        section = _want(mapping, "output", dict, default={})
        out = Path(_want(section, "directory", str, default="out", where="output"))
    if not out.is_absolute():
        out = base / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _jsonable(value):
    # keep artifacts strict JSON: NaN becomes null (the surrounding flags
    # carry the semantics), infinities become signed strings
    if isinstance(value, float) and not math.isfinite(value):
        if math.isnan(value):
            return None
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_manifest(
    path: Path, command: str, config: dict, seed: int, artifacts: list[str]
) -> None:
    _write_json(
        path,
        {
            "command": command,
            "version": __version__,
            "seed": seed,
            "config": config,
            "artifacts": sorted(artifacts),
        },
    )


def _fmt(value: float) -> str:
    return repr(float(value))


# --- link ---------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one ``link`` run."""

    file_a: Path
    file_b: Path
    id_column: str
    block_column: str | None
    x_a_columns: list[str]
    x_b_columns: list[str]
    specs: list[FieldSpec]
    method: str
    chain: ChainConfig
    prior_weights: tuple[float, float]
    pi_prior: tuple[float, float]
    link_prior: str
    nonmatch_prior: str
    output: Path
    seed: int

    def resolved_mapping(self) -> dict:
        return {
            "files": {
                "a": str(self.file_a),
                "b": str(self.file_b),
                "id_column": self.id_column,
                "block_column": self.block_column,
                "x_a": self.x_a_columns,
                "x_b": self.x_b_columns,
            },
            "fields": [
                {"name": s.name, "kind": s.kind, "digits": s.digits}
                for s in self.specs
            ],
            "model": {
                "method": self.method,
                "kernel": self.chain.kernel,
                "iterations": self.chain.iterations,
                "burn_in": self.chain.burn_in,
                "thinning": self.chain.thinning,
                "init": self.chain.init,
            },
            "prior": {
                "alpha_m": self.prior_weights[0],
                "alpha_u": self.prior_weights[1],
                "alpha_pi": self.pi_prior[0],
                "beta_pi": self.pi_prior[1],
                "link_prior": self.link_prior,
                "nonmatch_prior": self.nonmatch_prior,
            },
            "output": {"directory": str(self.output)},
        }


def parse_run_config(args, mapping: dict, base: Path) -> RunConfig:
    files = _want(mapping, "files", dict)
    model = _want(mapping, "model", dict)
    prior = _want(mapping, "prior", dict, default={})
    nonmatch_prior = _want(prior, "nonmatch_prior", str, default="flat", where="prior")
    if nonmatch_prior not in ("flat", "cross-block"):
        raise ConfigError(
            "prior.nonmatch_prior must be 'flat' or 'cross-block', "
            f"got {nonmatch_prior!r}"
        )
    method = _want(model, "method", str, default="brl", where="model")
    x_a = _string_list(files, "x_a", default=[], where="files")
    x_b = _string_list(files, "x_b", default=[], where="files")
    if method != "brl":
        if len(x_a) != 1:
            raise ConfigError(
                f"method {method} needs exactly one files.x_a outcome column"
            )
        if not x_b:
            raise ConfigError(f"method {method} needs files.x_b covariate columns")
    seed = _resolve_seed(args, mapping)
    chain = _chain_config(model, method=method, seed=seed)

    def _path(key: str) -> Path:
        p = Path(_want(files, key, str, where="files"))
        return p if p.is_absolute() else base / p

    return RunConfig(
        file_a=_path("a"),
        file_b=_path("b"),
        id_column=_want(files, "id_column", str, default="id", where="files"),
        block_column=_want(files, "block_column", str, default=None, where="files"),
        x_a_columns=x_a,
        x_b_columns=x_b,
        specs=_field_specs(mapping),
        method=method,
        chain=chain,
        prior_weights=(
            _want(prior, "alpha_m", float, default=1.0, where="prior"),
            _want(prior, "alpha_u", float, default=1.0, where="prior"),
        ),
        pi_prior=(
            _want(prior, "alpha_pi", float, default=1.0, where="prior"),
            _want(prior, "beta_pi", float, default=1.0, where="prior"),
        ),
        link_prior=_want(
            prior, "link_prior", str, default="beta-binomial", where="prior"
        ),
        nonmatch_prior=nonmatch_prior,
        output=_resolve_output(args, mapping, base),
        seed=seed,
    )


def cmd_link(args) -> int:
    config_path = Path(args.config)
    mapping = _load_mapping(config_path)
    cfg = parse_run_config(args, mapping, config_path.parent.resolve())

    file_a = load_record_file(
        str(cfg.file_a),
        cfg.specs,
        id_column=cfg.id_column,
        x_columns=cfg.x_a_columns or None,
        block_column=cfg.block_column,
    )
    file_b = load_record_file(
        str(cfg.file_b),
        cfg.specs,
        id_column=cfg.id_column,
        x_columns=cfg.x_b_columns or None,
        block_column=cfg.block_column,
    )
    table = build_comparison_table(file_a, file_b, cfg.specs)
    alpha_u = [
        np.full(s.levels, cfg.prior_weights[1], dtype=np.float64)
        for s in cfg.specs
    ]
    if cfg.nonmatch_prior == "cross-block":
        # pairs ruled out by blocking are non-links by construction; their
        # comparison levels are nonmatch evidence observed up front
        for k, counts in enumerate(table.background_level_counts):
            alpha_u[k] = alpha_u[k] + counts
    prior = PriorConfig(
        alpha_m=[np.full(s.levels, cfg.prior_weights[0]) for s in cfg.specs],
        alpha_u=alpha_u,
        alpha_pi=cfg.pi_prior[0],
        beta_pi=cfg.pi_prior[1],
        link_prior=cfg.link_prior,
    )
    data = LinkageData(
        table=table,
        x_a=file_a.x[:, 0] if cfg.method != "brl" else None,
        x_b=file_b.x if cfg.method != "brl" else None,
    )
    samples = list(run_chain(cfg.chain, data, prior))

    links_path = cfg.output / "links.csv"
    with open(links_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "id_a", "id_b"])
        for s in samples:
            for i, j in s.pairs:
                writer.writerow([s.iteration, file_a.ids[i], file_b.ids[j]])

    traces = traces_from_samples(samples, table)
    iterations = [s.iteration for s in samples]
    trace_path = cfg.output / "trace.csv"
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "parameter", "value"])
        for name, values in traces.items():
            for it, v in zip(iterations, values):
                writer.writerow([it, name, _fmt(v)])

    diag_path = cfg.output / "diagnostics.json"
    _write_json(diag_path, summarize_traces(traces))

    manifest_path = cfg.output / "manifest.json"
    artifacts = [links_path.name, trace_path.name, diag_path.name]
    _write_manifest(
        manifest_path, "link", cfg.resolved_mapping(), cfg.seed, artifacts
    )
    for p in (links_path, trace_path, diag_path, manifest_path):
        print(f"wrote {p}")
    return 0


# --- analyze ------------------------------------------------------------


def _read_link_samples(path: Path) -> list[list[tuple[str, str]]]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read link samples: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        needed = {"iteration", "id_a", "id_b"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise DataError(
                "link sample file needs iteration,id_a,id_b columns",
                file=str(path),
            )
        by_iteration: dict[str, list[tuple[str, str]]] = {}
        for row in reader:
            by_iteration.setdefault(row["iteration"], []).append(
                (row["id_a"], row["id_b"])
            )
    return list(by_iteration.values())


def _states_from_ids(
    samples: list[list[tuple[str, str]]], ids_a: np.ndarray, ids_b: np.ndarray
) -> list[LinkageState]:
    index_a = {str(v): k for k, v in enumerate(ids_a)}
    index_b = {str(v): k for k, v in enumerate(ids_b)}
    states = []
    for pairs in samples:
        a_to_b = np.full(len(ids_a), -1, dtype=np.int64)
        b_to_a = np.full(len(ids_b), -1, dtype=np.int64)
        for id_a, id_b in pairs:
            if id_a not in index_a or id_b not in index_b:
                raise DataError(
                    f"link sample references unknown record {id_a!r}/{id_b!r}"
                )
            a_to_b[index_a[id_a]] = index_b[id_b]
            b_to_a[index_b[id_b]] = index_a[id_a]
        states.append(LinkageState(a_to_b=a_to_b, b_to_a=b_to_a))
    return states


def cmd_analyze(args) -> int:
    config_path = Path(args.config)
    mapping = _load_mapping(config_path)
    base = config_path.parent.resolve()
    files = _want(mapping, "files", dict)
    analysis = _want(mapping, "analysis", dict)
    kind = _want(analysis, "kind", str, where="analysis")
    if kind not in ("correlation", "slope"):
        raise ConfigError("analysis.kind must be 'correlation' or 'slope'")
    level = _want(analysis, "level", float, default=0.95, where="analysis")
    a_column = _want(analysis, "a_column", str, where="analysis")
    b_columns = _string_list(analysis, "b_columns", where="analysis")
    if kind == "correlation" and len(b_columns) != 1:
        raise ConfigError("correlation analysis needs exactly one b column")

    links = _want(mapping, "input", dict)
    links_path = Path(_want(links, "links", str, where="input"))
    if not links_path.is_absolute():
        links_path = base / links_path

    def _path(key: str) -> Path:
        p = Path(_want(files, key, str, where="files"))
        return p if p.is_absolute() else base / p

    id_column = _want(files, "id_column", str, default="id", where="files")
    file_a = load_record_file(
        str(_path("a")), [], id_column=id_column, x_columns=[a_column]
    )
    file_b = load_record_file(
        str(_path("b")), [], id_column=id_column, x_columns=b_columns
    )
    raw_samples = _read_link_samples(links_path)
    states = _states_from_ids(raw_samples, file_a.ids, file_b.ids)

    names = ("intercept",) + tuple(b_columns)
    coef = _want(analysis, "coefficient", str, default=b_columns[0], where="analysis")
    if coef not in names:
        raise ConfigError(f"analysis.coefficient {coef!r} not among {list(names)}")

    x_a = file_a.x[:, 0]
    estimates = []
    skipped = 0
    for state in states:
        try:
            if kind == "correlation":
                estimates.append(correlation_per_sample(x_a, file_b.x[:, 0], state))
            else:
                fit = regress_per_sample(x_a, file_b.x, state, names=names)
                k = fit.names.index(coef)
                estimates.append((fit.coef[k], fit.variance[k]))
        except DataError:
            skipped += 1
    if len(estimates) < 2:
        raise DataError(
            f"fewer than 2 usable samples ({len(estimates)} usable, "
            f"{skipped} skipped)"
        )

    if kind == "correlation":
        rho, interval, pooled = combine_correlations(estimates, level=level)
        payload = {
            "kind": kind,
            "estimate": rho,
            "interval": list(interval),
            "level": level,
            "samples_used": len(estimates),
            "samples_skipped": skipped,
            "z_scale": pooled.to_dict(),
        }
    else:
        pooled = combine_mi(estimates, level=level)
        payload = {
            "kind": kind,
            "coefficient": coef,
            "samples_used": len(estimates),
            "samples_skipped": skipped,
            **pooled.to_dict(),
        }

    out = _resolve_output(args, mapping, base)
    path = out / "analysis.json"
    _write_json(path, payload)
    print(f"wrote {path}")
    return 0


# --- simulate -----------------------------------------------------------


def _design_cells(mapping: dict) -> list[SimulationFactors]:
    entries = _want(mapping, "cells", list)
    if not entries:
        raise ConfigError("design must declare at least one cell")
    cells = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ConfigError(f"cells[{i}] must be a table")
        where = f"cells[{i}]"
        cells.append(
            SimulationFactors(
                n_a=_want(entry, "n_a", int, default=500, where=where),
                n_b=_want(entry, "n_b", int, default=1000, where=where),
                n_m=_want(entry, "n_m", int, default=300, where=where),
                p=_want(entry, "p", int, default=1, where=where),
                sigma=_want(entry, "sigma", float, default=0.1, where=where),
                beta_m=_want(entry, "beta_m", float, default=0.5, where=where),
                beta_u=_want(entry, "beta_u", float, default=0.05, where=where),
                eps=_want(entry, "epsilon", float, default=0.0, where=where),
                model=_want(entry, "model", str, default="linear", where=where),
            )
        )
    return cells


def _write_results_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    k: (_fmt(v) if isinstance(v, float) else v)
                    for k, v in row.items()
                }
            )


def _render_results_figure(path: Path, rows: list[dict]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [
        f"{r['method']}\neps={r['epsilon']} bM={r['beta_M']}" for r in rows
    ]
    x = np.arange(len(rows))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6.0, 1.5 * len(rows)), 4.0))
    for offset, metric in zip((-1, 0, 1), ("TPR", "PPV", "F1")):
        ax.bar(x + offset * width, [r[metric] for r in rows], width, label=metric)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mean over replications")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_simulate(args) -> int:
    if args.kl_table:
        out = Path(args.output) if args.output else Path("out")
        out.mkdir(parents=True, exist_ok=True)
        table = kl_table()
        path = out / "kl_table.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rho_m"] + [_fmt(r) for r in KL_GRID])
            for rho_m, row in zip(KL_GRID, table):
                writer.writerow([_fmt(rho_m)] + [_fmt(v) for v in row])
        print(f"wrote {path}")
        return 0

    if not args.config:
        raise ConfigError("simulate needs --config (or --kl-table)")
    config_path = Path(args.config)
    mapping = _load_mapping(config_path)
    base = config_path.parent.resolve()
    seed = _resolve_seed(args, mapping)
    replications = _want(mapping, "replications", int, default=10)
    methods = _string_list(mapping, "methods", default=["brl"])
    chain_section = _want(mapping, "chain", dict, default={})
    chain = ChainConfig(
        iterations=_want(chain_section, "iterations", int, default=1000, where="chain"),
        burn_in=_want(chain_section, "burn_in", int, default=100, where="chain"),
        thinning=_want(chain_section, "thinning", int, default=1, where="chain"),
        kernel=_want(
            chain_section,
            "kernel",
            str,
            default="adaptive-multinomial",
            where="chain",
        ),
    )
    threads = args.threads or 1

    if args.blocked:
        eps = _want(mapping, "epsilon", float, default=0.0)
        results = run_blocked_study(
            replications, methods, chain, eps=eps, root_seed=seed
        )
        design_mapping = {"blocked": True, "epsilon": eps}
    else:
        cells = _design_cells(mapping)
        results = run_factorial(
            cells, replications, methods, chain, root_seed=seed, threads=threads
        )
        design_mapping = {"blocked": False, "cells": len(cells)}

    rows = [r.to_row() for r in results]
    out = _resolve_output(args, mapping, base)
    csv_path = out / "results.csv"
    _write_results_csv(csv_path, rows)
    fig_path = out / "results.png"
    _render_results_figure(fig_path, rows)
    manifest_path = out / "manifest.json"
    _write_manifest(
        manifest_path,
        "simulate",
        {
            **design_mapping,
            "replications": replications,
            "methods": methods,
            "chain": {
                "iterations": chain.iterations,
                "burn_in": chain.burn_in,
                "thinning": chain.thinning,
                "kernel": chain.kernel,
            },
            "threads": threads,
        },
        seed,
        [csv_path.name, fig_path.name],
    )
    for p in (csv_path, fig_path, manifest_path):
        print(f"wrote {p}")
    return 0


# --- diagnose -----------------------------------------------------------


def _read_trace_csv(path: Path) -> dict[str, np.ndarray]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read trace file: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        needed = {"iteration", "parameter", "value"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise DataError(
                "trace file needs iteration,parameter,value columns",
                file=str(path),
            )
        series: dict[str, list[float]] = {}
        for row in reader:
            try:
                value = float(row["value"])
            except ValueError as exc:
                raise DataError(f"non-numeric trace value: {exc}") from exc
            series.setdefault(row["parameter"], []).append(value)
    if not series:
        raise DataError("trace file holds no rows", file=str(path))
    return {k: np.asarray(v) for k, v in series.items()}


def _safe_name(name: str, seen: set[str]) -> str:
    base = re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "parameter"
    candidate, k = base, 2
    while candidate in seen:
        candidate, k = f"{base}_{k}", k + 1
    seen.add(candidate)
    return candidate


def _render_trace_figure(
    path: Path, name: str, values: np.ndarray, acf: list[float] | None
) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.2))
    axes[0].plot(values, linewidth=0.8)
    axes[0].set_title(f"trace: {name}", fontsize=9)
    axes[0].set_xlabel("sample")
    if acf is not None:
        axes[1].bar(range(len(acf)), acf, width=0.6)
        axes[1].axhline(0.0, color="black", linewidth=0.6)
    axes[1].set_title("autocorrelation", fontsize=9)
    axes[1].set_xlabel("lag")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_diagnose(args) -> int:
    traces = _read_trace_csv(Path(args.input))
    out = Path(args.output) if args.output else Path("out")
    out.mkdir(parents=True, exist_ok=True)
    report = summarize_traces(traces, acf_lags=args.acf_lags)
    diag_path = out / "diagnostics.json"
    _write_json(diag_path, report)
    written = [diag_path]
    seen: set[str] = set()
    for name, values in traces.items():
        fig_path = out / f"trace_{_safe_name(name, seen)}.png"
        _render_trace_figure(fig_path, name, values, report[name].get("acf"))
        written.append(fig_path)
    for p in written:
        print(f"wrote {p}")
    return 0


# --- entry point --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayeslink",
        description="Bayesian record linkage: sample, pool, simulate, diagnose.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    link = sub.add_parser("link", help="sample linkage structures for two files")
    link.add_argument("--config", required=True, help="TOML or JSON run config")
    link.add_argument("--seed", type=int, help="override the config seed")
    link.add_argument("--output", help="override the output directory")
    link.set_defaults(func=cmd_link)

    analyze = sub.add_parser("analyze", help="pool an estimate over link samples")
    analyze.add_argument("--config", required=True)
    analyze.add_argument("--output", help="override the output directory")
    analyze.set_defaults(func=cmd_analyze)

    simulate = sub.add_parser("simulate", help="run the factorial study harness")
    simulate.add_argument("--config", help="TOML or JSON design file")
    simulate.add_argument("--seed", type=int, help="override the design seed")
    simulate.add_argument("--threads", type=int, help="worker processes")
    simulate.add_argument("--output", help="override the output directory")
    simulate.add_argument(
        "--kl-table",
        action="store_true",
        help="write the discrimination-gain grid instead of running a design",
    )
    simulate.add_argument(
        "--blocked",
        action="store_true",
        help="run the blocked scenario instead of a factorial design",
    )
    simulate.set_defaults(func=cmd_simulate)

    diagnose = sub.add_parser("diagnose", help="convergence report for a trace file")
    diagnose.add_argument("--input", required=True, help="trace CSV from a link run")
    diagnose.add_argument("--output", help="directory for the report and figures")
    diagnose.add_argument("--acf-lags", type=int, default=20)
    diagnose.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BayeslinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
