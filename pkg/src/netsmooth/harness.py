"""Monte Carlo experiment driver and the multiverse analysis pipeline.

Runs (DGP x estimator x corruption x n x replication) grids with
coordinate-derived seeds so any worker count produces byte-identical output,
accumulates squared errors and interval coverage, fits log-log convergence
slopes, and reads/writes the tidy result files consumed by the reporting
and plotting tools.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contagion import ContagionDesign, generate_outcomes
from .corruption import CorruptionSpec, corrupt, recover_subspace, stabilized_operator
from .estimators import (
    FitResult,
    Z_95,
    build_design,
    latent_block_rotation,
    tsls_fit,
)
from .exceptions import ConfigError, NetsmoothError
from .linalg import numerical_rank, top_positive_eigenpairs
from .netgen import (
    Sparsity,
    SubgammaSpec,
    paper_dcsbm_params,
    realize_network,
    row_normalize,
    sample_dcsbm_latents,
)
from .rng import derive_seed, stream

logger = logging.getLogger("netsmooth")

RESULTS_HEADER = (
    "dgp,estimator,corruption,n,rep,coefficient,estimate,truth,"
    "squared_error,ci_lower,ci_upper,covered,failed,seed"
)

MULTIVERSE_HEADER = "d,variant,estimate,ci_lower,ci_upper,failed"

ESTIMATORS = ("peer-tsls", "latent-tsls", "oracle-peer", "oracle-latent")

#: Corruption kinds that still yield a dense network for the peer estimator.
_PEER_COMPATIBLE = ("baseline", "gaussian", "degree_capped", "edge_flipped")

MULTIVERSE_VARIANTS = ("peer-no-x", "peer-x", "latent-no-x", "latent-x")

#: Node counts used in the reference simulations (log-spaced).
FULL_N_GRID = (100, 163, 264, 430, 698, 1135, 1845, 3000)
DESK_N_GRID = FULL_N_GRID[:5]

_RATE_FIT_MIN_POINTS = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation study: grid, truth, corruption and estimator lists."""

    n_grid: tuple[int, ...] = DESK_N_GRID
    reps: int = 50
    dgp: str = "latent"
    density: Sparsity = field(default_factory=lambda: Sparsity(degree_exponent=0.75))
    corruptions: tuple[CorruptionSpec, ...] = (CorruptionSpec.baseline(),)
    estimators: tuple[str, ...] = ("latent-tsls",)
    intercept: float = 0.0
    covariate_coefs: tuple[float, ...] = (5.0, 5.0, 5.0)
    latent_coefs: tuple[float, ...] = (2.0, 2.0, 2.0, 2.0, 2.0)
    contagion_coef: float = 0.2
    error_sd: float = 1.0
    num_blocks: int = 5
    embed_rank: int | None = None
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "corruptions", tuple(self.corruptions))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "covariate_coefs", tuple(self.covariate_coefs))
        object.__setattr__(self, "latent_coefs", tuple(self.latent_coefs))
        if not self.n_grid or any(
            b <= a for a, b in zip(self.n_grid, self.n_grid[1:])
        ):
            raise ConfigError("n_grid must be non-empty and strictly increasing")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.dgp not in ("peer", "latent"):
            raise ConfigError(f"dgp must be 'peer' or 'latent', got {self.dgp!r}")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")
        if not self.estimators:
            raise ConfigError("at least one estimator required")
        if len(self.latent_coefs) != self.num_blocks:
            raise ConfigError(
                f"{len(self.latent_coefs)} latent coefficients vs {self.num_blocks} blocks"
            )
        if "peer-tsls" in self.estimators:
            for spec in self.corruptions:
                if spec.kind not in _PEER_COMPATIBLE:
                    raise ConfigError(
                        f"peer-tsls needs a dense network view; incompatible with "
                        f"{spec.kind!r} corruption"
                    )

    @property
    def rank(self) -> int:
        return self.num_blocks if self.embed_rank is None else self.embed_rank

    def to_dict(self) -> dict:
        density: dict[str, float] = {}
        if self.density.rho is not None:
            density["rho"] = self.density.rho
        if self.density.mean_degree is not None:
            density["mean_degree"] = self.density.mean_degree
        if self.density.degree_exponent is not None:
            density["exponent"] = self.density.degree_exponent
        out = {
            "n_grid": list(self.n_grid),
            "reps": self.reps,
            "dgp": self.dgp,
            "density": density,
            "corruptions": [
                {"kind": c.kind} | ({} if c.param is None else {"param": c.param})
                for c in self.corruptions
            ],
            "estimators": list(self.estimators),
            "coefficients": {
                "intercept": self.intercept,
                "covariates": list(self.covariate_coefs),
                "latents": list(self.latent_coefs),
                "contagion": self.contagion_coef,
            },
            "error_sd": self.error_sd,
            "num_blocks": self.num_blocks,
            "base_seed": self.base_seed,
        }
        if self.embed_rank is not None:
            out["embed_rank"] = self.embed_rank
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        kwargs: dict = {}
        if "n_grid" in data:
            kwargs["n_grid"] = tuple(data["n_grid"])
        for key in ("reps", "dgp", "error_sd", "num_blocks", "embed_rank", "base_seed"):
            if key in data:
                kwargs[key] = data[key]
        if "density" in data:
            d = data["density"]
            kwargs["density"] = Sparsity(
                rho=d.get("rho"),
                mean_degree=d.get("mean_degree"),
                degree_exponent=d.get("exponent"),
            )
        if "corruptions" in data:
            kwargs["corruptions"] = tuple(
                CorruptionSpec(c["kind"], c.get("param")) for c in data["corruptions"]
            )
        if "estimators" in data:
            kwargs["estimators"] = tuple(data["estimators"])
        coefs = data.get("coefficients", {})
        if "intercept" in coefs:
            kwargs["intercept"] = coefs["intercept"]
        if "covariates" in coefs:
            kwargs["covariate_coefs"] = tuple(coefs["covariates"])
        if "latents" in coefs:
            kwargs["latent_coefs"] = tuple(coefs["latents"])
        if "contagion" in coefs:
            kwargs["contagion_coef"] = coefs["contagion"]
        return cls(**kwargs)


@dataclass(frozen=True)
class CellResult:
    """One coefficient estimate from one replication of one grid cell."""

    dgp: str
    estimator: str
    corruption: str
    n: int
    rep: int
    coefficient: str
    estimate: float
    truth: float
    squared_error: float
    ci_lower: float
    ci_upper: float
    covered: bool
    failed: bool
    seed: int
    coef_index: int = 0
    diagnostics: dict | None = None

    @property
    def sort_key(self):
        return (
            self.dgp,
            self.estimator,
            self.corruption,
            self.n,
            self.rep,
            self.coef_index,
        )


@dataclass(frozen=True)
class RateFit:
    """Least-squares line of log(MSE) on log(n) for one coefficient series."""

    dgp: str
    estimator: str
    corruption: str
    coefficient: str
    slope: float
    intercept: float
    r_squared: float
    num_points: int


@dataclass(frozen=True)
class Summary:
    mse_table: list[dict]
    coverage_table: list[dict]
    rate_fits: list[RateFit]

    def to_dict(self) -> dict:
        return {
            "mse_table": self.mse_table,
            "coverage_table": self.coverage_table,
            "rate_fits": [vars(fit) for fit in self.rate_fits],
        }


def _truth_map(config: ExperimentConfig) -> dict[str, float]:
    truths = {"intercept": config.intercept, "contagion": config.contagion_coef}
    for j, value in enumerate(config.covariate_coefs):
        truths[f"w{j + 1}"] = float(value)
    for j, value in enumerate(config.latent_coefs):
        truths[f"x{j + 1}"] = float(value)
    return truths


def _canonical_terms(config: ExperimentConfig) -> tuple[str, ...]:
    return (
        "intercept",
        *(f"w{j + 1}" for j in range(len(config.covariate_coefs))),
        *(f"x{j + 1}" for j in range(len(config.latent_coefs))),
        "contagion",
    )


def _failure_rows(
    config: ExperimentConfig, estimator: str, corruption: str, n: int, rep: int, seed: int
) -> list[CellResult]:
    truths = _truth_map(config)
    nan = float("nan")
    return [
        CellResult(
            dgp=config.dgp,
            estimator=estimator,
            corruption=corruption,
            n=n,
            rep=rep,
            coefficient=term,
            estimate=nan,
            truth=truths[term],
            squared_error=nan,
            ci_lower=nan,
            ci_upper=nan,
            covered=False,
            failed=True,
            seed=seed,
            coef_index=idx,
        )
        for idx, term in enumerate(_canonical_terms(config))
    ]


def _aligned_estimates(fit: FitResult, rotation: np.ndarray | None):
    """Rotate the latent coefficient block (and its covariance) if needed."""
    coef = fit.coefficients.copy()
    cov = fit.covariance
    if rotation is not None:
        x_idx = [i for i, t in enumerate(fit.terms) if t.startswith("x")]
        if x_idx:
            transform = np.eye(len(coef))
            transform[np.ix_(x_idx, x_idx)] = rotation.T
            coef = transform @ coef
            cov = transform @ cov @ transform.T
    half = Z_95 * np.sqrt(np.maximum(np.diagonal(cov), 0.0))
    return coef, coef - half, coef + half


def _fit_rows(
    config: ExperimentConfig,
    estimator: str,
    corruption: str,
    n: int,
    rep: int,
    seed: int,
    fit: FitResult,
    rotation: np.ndarray | None,
) -> list[CellResult]:
    truths = _truth_map(config)
    order = {term: i for i, term in enumerate(_canonical_terms(config))}
    coef, lower, upper = _aligned_estimates(fit, rotation)
    rows = []
    for i, term in enumerate(fit.terms):
        truth = truths[term]
        estimate = float(coef[i])
        rows.append(
            CellResult(
                dgp=config.dgp,
                estimator=estimator,
                corruption=corruption,
                n=n,
                rep=rep,
                coefficient=term,
                estimate=estimate,
                truth=truth,
                squared_error=(estimate - truth) ** 2,
                ci_lower=float(lower[i]),
                ci_upper=float(upper[i]),
                covered=bool(lower[i] <= truth <= upper[i]),
                failed=False,
                seed=seed,
                coef_index=order[term],
                diagnostics=fit.diagnostics,
            )
        )
    return rows


def run_cell(
    config: ExperimentConfig, corruption: CorruptionSpec, n: int, rep: int
) -> list[CellResult]:
    """Generate, corrupt, recover, and fit one replication; emit its rows."""
    seed = derive_seed(config.base_seed, config.dgp, corruption.label, n, rep)
    params = paper_dcsbm_params(
        n, config.density, stream(seed, "block-matrix"), num_blocks=config.num_blocks
    )
    latent = sample_dcsbm_latents(params, derive_seed(seed, "latents"))
    observed = realize_network(latent, SubgammaSpec.poisson(), derive_seed(seed, "edges"))
    x = latent.latent_positions

    covariates = stream(seed, "covariates").standard_normal(
        (n, len(config.covariate_coefs))
    )
    design = ContagionDesign(
        intercept=config.intercept,
        covariate_coefs=np.array(config.covariate_coefs),
        latent_coefs=np.array(config.latent_coefs),
        contagion_coef=config.contagion_coef,
        covariates=covariates,
        error_sd=config.error_sd,
        flavor=config.dgp,
    )
    dgp_operator = observed.operator if config.dgp == "peer" else latent.latent_operator
    outcomes = generate_outcomes(
        design, dgp_operator, x, derive_seed(seed, "outcomes")
    ).responses

    feasible = [e for e in config.estimators if not e.startswith("oracle")]
    subspace = None
    view = None
    recovery_error: NetsmoothError | None = None
    if feasible:
        try:
            view = corrupt(
                observed, corruption, aux_latents=x, rng_seed=derive_seed(seed, "corrupt")
            )
            subspace = recover_subspace(view, config.rank)
        except NetsmoothError as err:
            recovery_error = err

    rows: list[CellResult] = []
    for estimator in config.estimators:
        oracle = estimator.startswith("oracle")
        if not oracle and recovery_error is not None:
            logger.warning("recovery failed at %s n=%d rep=%d: %s",
                           corruption.label, n, rep, recovery_error)
            rows.extend(_failure_rows(config, estimator, corruption.label, n, rep, seed))
            continue
        try:
            if estimator == "latent-tsls":
                embedding, operator = subspace.embedding, subspace.smoothed_operator
            elif estimator == "peer-tsls":
                embedding, operator = subspace.embedding, row_normalize(view.matrix)
            elif estimator == "oracle-latent":
                embedding, operator = x, latent.latent_operator
            else:  # oracle-peer
                embedding, operator = x, observed.operator
            kind = "peer" if estimator.endswith("peer") or estimator == "peer-tsls" else "latent"
            bundle = build_design(
                outcomes, covariates, embedding, operator, operator_kind=kind
            )
            fit = tsls_fit(bundle, outcomes)
            rotation = None if oracle else latent_block_rotation(embedding, x)
            rows.extend(
                _fit_rows(config, estimator, corruption.label, n, rep, seed, fit, rotation)
            )
        except NetsmoothError as err:
            logger.warning("%s failed at %s n=%d rep=%d: %s",
                           estimator, corruption.label, n, rep, err)
            rows.extend(_failure_rows(config, estimator, corruption.label, n, rep, seed))
    return rows


def _run_cell_task(args) -> list[CellResult]:
    return run_cell(*args)


def run_experiment(config: ExperimentConfig, parallelism: int = 1) -> list[CellResult]:
    """Run the full grid and return rows in deterministic sorted order.

    Cell seeds derive from cell coordinates, and rows are sorted before
    returning, so the output is identical for any ``parallelism``.
    """
    cells = [
        (config, corruption, n, rep)
        for corruption in config.corruptions
        for n in config.n_grid
        for rep in range(config.reps)
    ]
    logger.info("running %d cells (%d estimators each)", len(cells), len(config.estimators))
    if parallelism > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            per_cell = list(pool.map(_run_cell_task, cells, chunksize=1))
    else:
        per_cell = [run_cell(*cell) for cell in cells]
    rows = [row for cell_rows in per_cell for row in cell_rows]
    rows.sort(key=lambda r: r.sort_key)
    return rows


def _format_float(value: float) -> str:
    return repr(float(value))


def _format_bool(value: bool) -> str:
    return "true" if value else "false"


def write_results_csv(rows: list[CellResult], path) -> None:
    """Write rows with full float round-trip precision and LF endings."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULTS_HEADER.split(","))
        for r in rows:
            writer.writerow(
                [
                    r.dgp,
                    r.estimator,
                    r.corruption,
                    r.n,
                    r.rep,
                    r.coefficient,
                    _format_float(r.estimate),
                    _format_float(r.truth),
                    _format_float(r.squared_error),
                    _format_float(r.ci_lower),
                    _format_float(r.ci_upper),
                    _format_bool(r.covered),
                    _format_bool(r.failed),
                    r.seed,
                ]
            )


def read_results_csv(path) -> list[CellResult]:
    """Parse a results file written by :func:`write_results_csv`."""
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != RESULTS_HEADER.split(","):
            raise ConfigError(f"unexpected results header: {header}")
        rows = []
        for record in reader:
            (dgp, estimator, corruption, n, rep, coefficient, estimate, truth,
             squared_error, ci_lower, ci_upper, covered, failed, seed) = record
            rows.append(
                CellResult(
                    dgp=dgp,
                    estimator=estimator,
                    corruption=corruption,
                    n=int(n),
                    rep=int(rep),
                    coefficient=coefficient,
                    estimate=float(estimate),
                    truth=float(truth),
                    squared_error=float(squared_error),
                    ci_lower=float(ci_lower),
                    ci_upper=float(ci_upper),
                    covered=covered == "true",
                    failed=failed == "true",
                    seed=int(seed),
                )
            )
    return rows


def summarize(rows: list[CellResult]) -> Summary:
    """Aggregate rows into MSE and coverage tables plus rate fits."""
    if not rows:
        raise ConfigError("no result rows to summarize")
    groups: dict[tuple, list[CellResult]] = {}
    for row in rows:
        key = (row.dgp, row.estimator, row.corruption, row.coefficient, row.n)
        groups.setdefault(key, []).append(row)

    mse_table, coverage_table = [], []
    series: dict[tuple, list[tuple[int, float]]] = {}
    for key in sorted(groups):
        dgp, estimator, corruption, coefficient, n = key
        cell_rows = groups[key]
        ok = [r for r in cell_rows if not r.failed]
        num_failed = len(cell_rows) - len(ok)
        mse = float(np.mean([r.squared_error for r in ok])) if ok else float("nan")
        coverage = float(np.mean([r.covered for r in ok])) if ok else float("nan")
        mse_table.append(
            {
                "dgp": dgp,
                "estimator": estimator,
                "corruption": corruption,
                "coefficient": coefficient,
                "n": n,
                "mse": mse,
                "num_reps": len(cell_rows),
                "num_failed": num_failed,
            }
        )
        coverage_table.append(
            {
                "dgp": dgp,
                "estimator": estimator,
                "corruption": corruption,
                "coefficient": coefficient,
                "n": n,
                "coverage": coverage,
            }
        )
        if ok and np.isfinite(mse) and mse > 0:
            series.setdefault(key[:4], []).append((n, mse))

    rate_fits = []
    for key in sorted(series):
        points = series[key]
        if len(points) < _RATE_FIT_MIN_POINTS:
            continue
        log_n = np.log([p[0] for p in points])
        log_mse = np.log([p[1] for p in points])
        slope, intercept = np.polyfit(log_n, log_mse, deg=1)
        fitted = slope * log_n + intercept
        ss_res = float(np.sum((log_mse - fitted) ** 2))
        ss_tot = float(np.sum((log_mse - log_mse.mean()) ** 2))
        r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
        rate_fits.append(
            RateFit(
                dgp=key[0],
                estimator=key[1],
                corruption=key[2],
                coefficient=key[3],
                slope=float(slope),
                intercept=float(intercept),
                r_squared=r_squared,
                num_points=len(points),
            )
        )
    return Summary(mse_table=mse_table, coverage_table=coverage_table, rate_fits=rate_fits)


def _multiverse_embeddings(adjacency: np.ndarray, d_values, directed: bool):
    """Per-dimension embeddings: right co-embedding if directed, else the
    positive-spectrum symmetric embedding with floored eigenvalues."""
    d_max = max(d_values)
    if directed:
        _, s, vt = np.linalg.svd(adjacency)
        return {
            d: vt[:d].T * np.sqrt(s[:d])
            for d in d_values
        }
    spectrum, basis = top_positive_eigenpairs(adjacency, d_max)
    out = {}
    for d in d_values:
        spec_d = np.maximum(spectrum[:d], 1e-12)
        out[d] = basis[:, :d] * np.sqrt(spec_d)
    return out


def run_multiverse(
    adjacency,
    covariates,
    outcome,
    d_min: int = 2,
    d_max: int = 25,
    variants: tuple[str, ...] = MULTIVERSE_VARIANTS,
    directed: bool = False,
) -> list[dict]:
    """Contagion estimates across embedding dimensions and model variants.

    Each variant is a peer or latent working model, with or without the
    estimated latent positions as covariates.  Returns one record per
    (d, variant) with the contagion estimate and its 95% interval.
    """
    a = np.asarray(adjacency, dtype=float)
    w = np.asarray(covariates, dtype=float)
    y = np.asarray(outcome, dtype=float).ravel()
    for variant in variants:
        if variant not in MULTIVERSE_VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
    if d_min < 1 or d_max < d_min:
        raise ConfigError(f"bad dimension range [{d_min}, {d_max}]")
    rank_cap = min(numerical_rank(a), a.shape[0] - 1)
    if d_max > rank_cap:
        logger.warning("d range truncated at matrix rank %d", rank_cap)
        d_max = rank_cap
    if d_max < d_min:
        raise ConfigError(f"matrix rank {rank_cap} below d_min={d_min}")

    d_values = list(range(d_min, d_max + 1))
    embeddings = _multiverse_embeddings(a, d_values, directed)
    peer_operator = row_normalize(a)

    records = []
    for d in d_values:
        embedding = embeddings[d]
        latent_operator = stabilized_operator(embedding @ embedding.T)
        for variant in variants:
            operator_kind = "peer" if variant.startswith("peer") else "latent"
            operator = peer_operator if operator_kind == "peer" else latent_operator
            include_latents = variant.endswith("-x") and not variant.endswith("no-x")
            try:
                bundle = build_design(
                    y,
                    w,
                    embedding if include_latents else None,
                    operator,
                    include_latents=include_latents,
                    operator_kind=operator_kind,
                )
                fit = tsls_fit(bundle, y)
                idx = fit.terms.index("contagion")
                records.append(
                    {
                        "d": d,
                        "variant": variant,
                        "estimate": float(fit.coefficients[idx]),
                        "ci_lower": float(fit.ci_lower[idx]),
                        "ci_upper": float(fit.ci_upper[idx]),
                        "failed": False,
                    }
                )
            except NetsmoothError as err:
                logger.warning("multiverse fit failed at d=%d %s: %s", d, variant, err)
                records.append(
                    {
                        "d": d,
                        "variant": variant,
                        "estimate": float("nan"),
                        "ci_lower": float("nan"),
                        "ci_upper": float("nan"),
                        "failed": True,
                    }
                )
    records.sort(key=lambda r: (r["d"], r["variant"]))
    return records


def write_multiverse_csv(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(MULTIVERSE_HEADER.split(","))
        for r in records:
            writer.writerow(
                [
                    r["d"],
                    r["variant"],
                    _format_float(r["estimate"]),
                    _format_float(r["ci_lower"]),
                    _format_float(r["ci_upper"]),
                    _format_bool(r["failed"]),
                ]
            )
