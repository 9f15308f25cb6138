"""Command-line entry point.

Three subcommands: ``simulate`` drives the Monte Carlo grids from a JSON
config, ``analyze`` runs the multiverse pipeline on a real edge list, and
``report`` turns a results file into plot-ready tidy CSVs plus a summary.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
Set ``NETSMOOTH_LOG`` to a level name (DEBUG, INFO, ...) for verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import harness
from .exceptions import ConfigError, NetsmoothError
from .harness import ExperimentConfig, run_experiment, run_multiverse, summarize

logger = logging.getLogger("netsmooth")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class CliError(Exception):
    """Fatal CLI problem with an explicit exit code."""

    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_schema() -> dict:
    with resources.files("netsmooth.schemas").joinpath("experiment.schema.json").open() as fh:
        return json.load(fh)


def load_config(path: str, seed_override: int | None = None) -> ExperimentConfig:
    """Parse and validate a simulation config file."""
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as err:
        raise CliError(f"cannot read config: {err}", EXIT_CONFIG) from err
    except json.JSONDecodeError as err:
        raise CliError(
            f"config is not valid JSON (line {err.lineno}, column {err.colno}): {err.msg}",
            EXIT_CONFIG,
        ) from err
    try:
        jsonschema.validate(raw, _load_schema())
    except jsonschema.ValidationError as err:
        where = "/".join(str(part) for part in err.absolute_path) or "<root>"
        raise CliError(f"config field {where}: {err.message}", EXIT_CONFIG) from err
    if seed_override is not None:
        raw["base_seed"] = seed_override
    try:
        return ExperimentConfig.from_dict(raw)
    except (ConfigError, NetsmoothError) as err:
        raise CliError(f"config rejected: {err}", EXIT_CONFIG) from err


def _cmd_simulate(args) -> int:
    config = load_config(args.config, args.seed)
    if args.full_grid:
        config = ExperimentConfig.from_dict(
            config.to_dict() | {"n_grid": list(harness.FULL_N_GRID), "reps": 100}
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(config, parallelism=args.workers)
    harness.write_results_csv(rows, out / "results.csv")
    summary = summarize(rows)
    with open(out / "summary.json", "w", encoding="utf-8") as handle:
        json.dump(summary.to_dict(), handle, indent=2)
        handle.write("\n")
    logger.info("wrote %s and %s", out / "results.csv", out / "summary.json")
    return EXIT_OK


def _read_edge_list(path: str):
    """Edge list CSV ``src,dst[,weight]`` with arbitrary string node ids."""
    edges = []
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or len(header) < 2:
                raise CliError("edge list needs a src,dst[,weight] header", EXIT_CONFIG)
            for record in reader:
                if not record:
                    continue
                weight = float(record[2]) if len(record) > 2 and record[2] != "" else 1.0
                edges.append((record[0], record[1], weight))
    except OSError as err:
        raise CliError(f"cannot read edge list: {err}", EXIT_CONFIG) from err
    return edges


def _read_covariates(path: str, outcome_col: str):
    """Covariate table keyed by its first column; returns (ids, W, y, names)."""
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or len(header) < 2:
                raise CliError("covariates file needs an id column plus data", EXIT_CONFIG)
            if outcome_col not in header[1:]:
                raise CliError(
                    f"outcome column {outcome_col!r} not in covariates header", EXIT_CONFIG
                )
            records = list(reader)
    except OSError as err:
        raise CliError(f"cannot read covariates: {err}", EXIT_CONFIG) from err

    outcome_idx = header.index(outcome_col)
    covariate_idx = [i for i in range(1, len(header)) if i != outcome_idx]
    table = {}
    dropped = 0
    for record in records:
        if not record:
            continue
        try:
            values = [float(record[i]) for i in range(1, len(header))]
        except (ValueError, IndexError):
            dropped += 1
            continue
        table[record[0]] = (
            [values[i - 1] for i in covariate_idx],
            values[outcome_idx - 1],
        )
    names = [header[i] for i in covariate_idx]
    return table, dropped, names


def _cmd_analyze(args) -> int:
    edges = _read_edge_list(args.edges)
    table, dropped_incomplete, _ = _read_covariates(args.covariates, args.outcome)

    edge_nodes = sorted({node for src, dst, _ in edges for node in (src, dst)})
    kept = [node for node in edge_nodes if node in table]
    dropped_missing = len(edge_nodes) - len(kept)
    if dropped_incomplete or dropped_missing:
        logger.warning(
            "dropped %d incomplete covariate rows and %d nodes without covariates",
            dropped_incomplete,
            dropped_missing,
        )
    if not kept:
        raise CliError("no nodes shared between edge list and covariates", EXIT_RUNTIME)

    index = {node: i for i, node in enumerate(kept)}
    n = len(kept)
    adjacency = np.zeros((n, n))
    for src, dst, weight in edges:
        if src in index and dst in index and src != dst:
            adjacency[index[src], index[dst]] += weight
            if not args.directed:
                adjacency[index[dst], index[src]] += weight

    covariates = np.array([table[node][0] for node in kept])
    outcome = np.array([table[node][1] for node in kept])

    variants = tuple(args.variants.split(",")) if args.variants else harness.MULTIVERSE_VARIANTS
    records = run_multiverse(
        adjacency,
        covariates,
        outcome,
        d_min=args.d_min,
        d_max=args.d_max,
        variants=variants,
        directed=args.directed,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_multiverse_csv(records, out / "multiverse.csv")
    with open(out / "nodes.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["node", "index"])
        for node in kept:
            writer.writerow([node, index[node]])
    logger.info("wrote %s (%d rows) and %s", out / "multiverse.csv", len(records), out / "nodes.csv")
    return EXIT_OK


def _cmd_report(args) -> int:
    path = Path(args.results)
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            header_line = handle.readline().rstrip("\n")
    except OSError as err:
        raise CliError(f"cannot read results: {err}", EXIT_CONFIG) from err

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if header_line == harness.MULTIVERSE_HEADER:
        with open(path, encoding="utf-8", newline="") as handle:
            records = list(csv.DictReader(handle))
        if not records:
            raise CliError("results file has no rows", EXIT_CONFIG)
        with open(out / "multiverse_ci.csv", "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["d", "variant", "estimate", "ci_lower", "ci_upper"])
            for r in records:
                if r["failed"] == "true":
                    continue
                writer.writerow(
                    [r["d"], r["variant"], r["estimate"], r["ci_lower"], r["ci_upper"]]
                )
        logger.info("wrote %s", out / "multiverse_ci.csv")
        return EXIT_OK

    if header_line != harness.RESULTS_HEADER:
        raise CliError("results header does not match any known schema", EXIT_CONFIG)
    try:
        rows = harness.read_results_csv(path)
    except (ConfigError, ValueError) as err:
        raise CliError(f"cannot parse results: {err}", EXIT_CONFIG) from err
    if not rows:
        raise CliError("results file has no rows", EXIT_CONFIG)

    summary = summarize(rows)
    with open(out / "summary.json", "w", encoding="utf-8") as handle:
        json.dump(summary.to_dict(), handle, indent=2)
        handle.write("\n")
    with open(out / "mse_by_n.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["dgp", "estimator", "corruption", "coefficient", "n", "mse", "num_failed"]
        )
        for r in summary.mse_table:
            writer.writerow(
                [r["dgp"], r["estimator"], r["corruption"], r["coefficient"], r["n"],
                 repr(r["mse"]), r["num_failed"]]
            )
    with open(out / "coverage.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["dgp", "estimator", "corruption", "coefficient", "n", "coverage"])
        for r in summary.coverage_table:
            writer.writerow(
                [r["dgp"], r["estimator"], r["corruption"], r["coefficient"], r["n"],
                 repr(r["coverage"])]
            )
    logger.info("wrote summary.json, mse_by_n.csv, coverage.csv under %s", out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netsmooth",
        description="Peer-effect estimation in noisy low-rank networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo grid from a JSON config")
    sim.add_argument("--config", required=True, help="experiment config JSON")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--workers", type=int, default=1, help="parallel worker count")
    sim.add_argument("--seed", type=int, default=None, help="override base_seed")
    sim.add_argument(
        "--full-grid",
        action="store_true",
        help="use the full reference grid (8 node counts, 100 reps)",
    )
    sim.set_defaults(func=_cmd_simulate)

    ana = sub.add_parser("analyze", help="multiverse analysis of an observed network")
    ana.add_argument("--edges", required=True, help="edge list CSV: src,dst[,weight]")
    ana.add_argument("--covariates", required=True, help="covariates CSV keyed by node id")
    ana.add_argument("--outcome", required=True, help="outcome column name")
    ana.add_argument("--out", required=True, help="output directory")
    ana.add_argument("--d-min", type=int, default=2, help="smallest embedding dimension")
    ana.add_argument("--d-max", type=int, default=25, help="largest embedding dimension")
    ana.add_argument("--directed", action="store_true", help="treat edges as directed")
    ana.add_argument(
        "--variants",
        default=None,
        help="comma-separated subset of " + ",".join(harness.MULTIVERSE_VARIANTS),
    )
    ana.set_defaults(func=_cmd_analyze)

    rep = sub.add_parser("report", help="tidy CSVs and summary from a results file")
    rep.add_argument("--results", required=True, help="results CSV from simulate/analyze")
    rep.add_argument("--out", required=True, help="output directory")
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("NETSMOOTH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"netsmooth: {err}", file=sys.stderr)
        return err.code
    except (ConfigError,) as err:
        print(f"netsmooth: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NetsmoothError as err:
        print(f"netsmooth: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as err:
        print(f"netsmooth: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
