"""Network corruption processes and matching subspace estimators.

Seven observation regimes: clean (baseline), additive gaussian noise,
missing edges, aggregated relational data (trait-aggregated edge counts),
egocentric sampling, per-node degree caps, and random edge-value swaps.
Each regime gets the principal-subspace estimator suited to what survives
of the network: truncated SVD for dense views, iterative SVD imputation for
missing data, a moment estimator for aggregated data, and block pseudoinverse
completion for egocentric samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, NumericalError, ValidationError
from .linalg import top_positive_eigenpairs, truncated_svd
from .netgen import ObservedNetwork, row_normalize
from .rng import stream

CORRUPTION_KINDS = (
    "baseline",
    "gaussian",
    "missing",
    "ard",
    "egocentric",
    "degree_capped",
    "edge_flipped",
)

_DENSE_KINDS = ("baseline", "gaussian", "degree_capped", "edge_flipped")

#: Nonpositive recovered eigenvalues are floored here so embeddings stay real.
SPECTRUM_FLOOR = 1e-12

#: Relative cutoff for the egocentric block pseudoinverse.
PINV_RTOL = 1e-8

IMPUTE_TOL = 1e-6
IMPUTE_MAXITER = 200

#: Fixed refinement passes replacing the structurally-missing diagonal of an
#: observed network with its rank-k reconstruction before the final
#: eigendecomposition.  A no-op on matrices whose diagonal already agrees
#: with their rank-k structure.
DIAG_REFINE_PASSES = 3

#: Rows of the smoothed operator whose estimated degree falls below this
#: fraction of the median positive degree are treated as isolated (zeroed),
#: extending the isolated-node convention to estimated degrees.  Heavy
#: additive noise can push low-degree estimates to zero or below, and
#: dividing by them would let single rows dominate every downstream fit.
DEGREE_FLOOR_FRACTION = 0.05

_FLIP_RETRIES = 100


@dataclass(frozen=True)
class CorruptionSpec:
    """One corruption process: a kind plus its single scalar parameter.

    gaussian: noise sd; missing: missing fraction; ard: trait correlation;
    egocentric: ego fraction; degree_capped: max incident edges;
    edge_flipped: fraction of edges swapped.  baseline takes no parameter.
    """

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValidationError(
                f"unknown corruption kind {self.kind!r}; expected one of {CORRUPTION_KINDS}"
            )
        if self.kind == "baseline":
            if self.param is not None:
                raise ValidationError("baseline takes no parameter")
            return
        if self.param is None:
            raise ValidationError(f"{self.kind} requires a parameter")
        if self.kind == "gaussian" and not self.param > 0:
            raise ValidationError(f"gaussian sd must be > 0, got {self.param}")
        if self.kind in ("missing", "egocentric", "edge_flipped", "ard") and not (
            0.0 <= self.param <= 1.0
        ):
            raise ValidationError(f"{self.kind} fraction must be in [0, 1], got {self.param}")
        if self.kind == "degree_capped":
            if self.param < 1 or self.param != int(self.param):
                raise ValidationError(f"degree cap must be an integer >= 1, got {self.param}")

    @property
    def label(self) -> str:
        """Stable string key used in result tables and configs."""
        if self.kind == "baseline":
            return "baseline"
        return f"{self.kind}({self.param:g})"

    @classmethod
    def baseline(cls):
        return cls("baseline")

    @classmethod
    def gaussian(cls, sd: float):
        return cls("gaussian", sd)

    @classmethod
    def missing(cls, fraction: float):
        return cls("missing", fraction)

    @classmethod
    def ard(cls, trait_correlation: float = 0.8):
        return cls("ard", trait_correlation)

    @classmethod
    def egocentric(cls, ego_fraction: float = 0.5):
        return cls("egocentric", ego_fraction)

    @classmethod
    def degree_capped(cls, max_degree: int = 20):
        return cls("degree_capped", float(max_degree))

    @classmethod
    def edge_flipped(cls, fraction: float = 0.15):
        return cls("edge_flipped", fraction)


@dataclass(frozen=True)
class CorruptedView:
    """What the analyst gets to see after corruption.

    Payload by kind: dense ``matrix`` for baseline/gaussian/degree_capped/
    edge_flipped; ``matrix`` with NaN holes plus boolean ``mask`` (True =
    observed) for missing; ``aggregate`` = A @ traits plus ``traits`` for
    ard; ``ego_block``/``cross_block`` plus sorted ``ego_nodes`` for
    egocentric.
    """

    spec: CorruptionSpec
    n: int
    matrix: np.ndarray | None = None
    mask: np.ndarray | None = None
    aggregate: np.ndarray | None = None
    traits: np.ndarray | None = None
    ego_nodes: np.ndarray | None = None
    ego_block: np.ndarray | None = None
    cross_block: np.ndarray | None = None

    def __post_init__(self):
        kind = self.spec.kind
        if kind == "missing":
            ok = (
                self.matrix is not None
                and self.mask is not None
                and self.mask.shape == self.matrix.shape == (self.n, self.n)
            )
        elif kind == "ard":
            ok = (
                self.aggregate is not None
                and self.traits is not None
                and self.aggregate.shape == self.traits.shape
                and self.aggregate.shape[0] == self.n
            )
        elif kind == "egocentric":
            m = 0 if self.ego_nodes is None else len(self.ego_nodes)
            ok = (
                self.ego_nodes is not None
                and self.ego_block is not None
                and self.cross_block is not None
                and self.ego_block.shape == (m, m)
                and self.cross_block.shape == (m, self.n - m)
            )
        else:
            ok = self.matrix is not None and self.matrix.shape == (self.n, self.n)
        if not ok:
            raise ValidationError(f"payload inconsistent with corruption kind {kind!r}")


@dataclass(frozen=True)
class SubspaceEstimate:
    """Recovered principal subspace and the smoothed quantities built on it.

    ``spectrum`` holds the (floored) recovered eigenvalues as a 1-D vector;
    ``embedding = basis * sqrt(spectrum)``; ``smoothed_adjacency`` is the
    rank-k reconstruction and ``smoothed_operator`` its row normalization.
    """

    basis: np.ndarray
    spectrum: np.ndarray
    embedding: np.ndarray
    smoothed_adjacency: np.ndarray
    smoothed_operator: np.ndarray
    num_floored: int = 0
    converged: bool = True

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def corrupt(
    network: ObservedNetwork,
    spec: CorruptionSpec,
    aux_latents=None,
    rng_seed: int = 0,
) -> CorruptedView:
    """Apply one corruption process to an observed network.

    ``aux_latents`` (the true positions) are required for the ard kind,
    where traits correlated with each latent column are synthesized.
    """
    a = network.adjacency
    n = a.shape[0]
    rng = stream(rng_seed, "corrupt", spec.label)

    if spec.kind == "baseline":
        return CorruptedView(spec=spec, n=n, matrix=a.copy())

    if spec.kind == "gaussian":
        iu = np.triu_indices(n, k=1)
        noise = np.zeros((n, n))
        noise[iu] = rng.normal(0.0, spec.param, size=len(iu[0]))
        noise += noise.T
        return CorruptedView(spec=spec, n=n, matrix=a + noise)

    if spec.kind == "missing":
        iu = np.triu_indices(n, k=1)
        dropped = rng.random(len(iu[0])) < spec.param
        mask = np.ones((n, n), dtype=bool)
        rows, cols = iu[0][dropped], iu[1][dropped]
        mask[rows, cols] = False
        mask[cols, rows] = False
        holey = a.copy()
        holey[~mask] = np.nan
        return CorruptedView(spec=spec, n=n, matrix=holey, mask=mask)

    if spec.kind == "ard":
        if aux_latents is None:
            raise ValidationError("ard corruption requires the latent positions")
        x = np.asarray(aux_latents, dtype=float)
        rho = spec.param
        sd = x.std(axis=0)
        if np.any(sd <= 0):
            raise ValidationError("latent columns must be non-constant for trait synthesis")
        standardized = (x - x.mean(axis=0)) / sd
        traits = rho * standardized + np.sqrt(1.0 - rho**2) * rng.standard_normal(x.shape)
        return CorruptedView(spec=spec, n=n, aggregate=a @ traits, traits=traits)

    if spec.kind == "egocentric":
        num_ego = int(round(spec.param * n))
        if num_ego < 1 or num_ego >= n:
            raise ValidationError(f"ego fraction {spec.param} leaves no usable split at n={n}")
        ego = np.sort(rng.choice(n, size=num_ego, replace=False))
        nonego = np.setdiff1d(np.arange(n), ego)
        return CorruptedView(
            spec=spec,
            n=n,
            ego_nodes=ego,
            ego_block=a[np.ix_(ego, ego)],
            cross_block=a[np.ix_(ego, nonego)],
        )

    if spec.kind == "degree_capped":
        cap = int(spec.param)
        removed = np.zeros((n, n), dtype=bool)
        support = a != 0
        np.fill_diagonal(support, False)
        counts = support.sum(axis=1)
        for i in np.nonzero(counts > cap)[0]:
            incident = np.nonzero(support[i])[0]
            drop = rng.choice(incident, size=counts[i] - cap, replace=False)
            removed[i, drop] = True
        # an edge survives only if neither endpoint removed it
        keep = ~(removed | removed.T)
        return CorruptedView(spec=spec, n=n, matrix=np.where(keep, a, 0.0))

    # edge_flipped: a fraction of the unordered slots each swap values with
    # a random different-valued slot, so edges relocate while the multiset
    # of slot values is preserved exactly.
    iu = np.triu_indices(n, k=1)
    values = a[iu].copy()
    num_slots = values.shape[0]
    num_swaps = int(round(spec.param * num_slots))
    if num_swaps > 0 and np.unique(values).size > 1:
        chosen = rng.choice(num_slots, size=num_swaps, replace=False)
        for slot in chosen:
            for _ in range(_FLIP_RETRIES):
                partner = int(rng.integers(num_slots))
                if values[partner] != values[slot]:
                    values[slot], values[partner] = values[partner], values[slot]
                    break
    flipped = np.zeros((n, n))
    flipped[iu] = values
    flipped += flipped.T
    return CorruptedView(spec=spec, n=n, matrix=flipped)


def stabilized_operator(smoothed: np.ndarray) -> np.ndarray:
    """Averaging operator from a smoothed adjacency estimate.

    The estimand is an entrywise-nonnegative matrix, so negative entries of
    the estimate are noise and are clipped before row normalization.  Rows
    whose estimated degree falls below ``DEGREE_FLOOR_FRACTION`` of the
    median positive degree count as isolated (zeroed): their true degree is
    not reliably distinguishable from zero, and dividing by it would let a
    handful of rows dominate every downstream fit.  Both guards are no-ops
    on exact nonnegative low-rank input.
    """
    clipped = np.maximum(smoothed, 0.0)
    operator = row_normalize(clipped)
    np.fill_diagonal(clipped, 0.0)
    degrees = clipped.sum(axis=1)
    positive = degrees[degrees > 0]
    if positive.size:
        operator[degrees < DEGREE_FLOOR_FRACTION * np.median(positive)] = 0.0
    return operator


def _estimate_from_eigenpairs(
    basis: np.ndarray, spectrum: np.ndarray, converged: bool = True
) -> SubspaceEstimate:
    """Floor the spectrum, build the embedding and smoothed operator."""
    floored = np.count_nonzero(spectrum < SPECTRUM_FLOOR)
    spectrum = np.maximum(spectrum, SPECTRUM_FLOOR)
    order = np.argsort(-spectrum, kind="stable")
    basis = basis[:, order]
    spectrum = spectrum[order]
    embedding = basis * np.sqrt(spectrum)
    smoothed = embedding @ embedding.T
    return SubspaceEstimate(
        basis=basis,
        spectrum=spectrum,
        embedding=embedding,
        smoothed_adjacency=smoothed,
        smoothed_operator=stabilized_operator(smoothed),
        num_floored=int(floored),
        converged=converged,
    )


def _dense_estimate(matrix: np.ndarray, rank: int, converged: bool = True) -> SubspaceEstimate:
    # The estimand is PSD, so embed with the algebraically largest
    # eigenvalues; ranking by magnitude can promote a large negative noise
    # eigenvalue over real structure in small noisy networks.
    spectrum, basis = top_positive_eigenpairs(matrix, rank)
    # Self-edges are never observed, so the diagonal is a missing entry in
    # disguise: impute it from the reconstruction, as for missing edges.
    work = np.asarray(matrix, dtype=float)
    for _ in range(DIAG_REFINE_PASSES - 1):
        recon_diag = np.einsum("ij,j,ij->i", basis, np.maximum(spectrum, 0.0), basis)
        work = work.copy()
        np.fill_diagonal(work, recon_diag)
        spectrum, basis = top_positive_eigenpairs(work, rank)
    return _estimate_from_eigenpairs(basis, spectrum, converged)


def _recover_missing(view: CorruptedView, rank: int) -> SubspaceEstimate:
    """Iterative rank-k SVD imputation.

    Missing entries start at the mean of observed entries; each sweep
    replaces them with the rank-k reconstruction until the relative change
    drops below ``IMPUTE_TOL``.  A structurally zero diagonal (no observed
    self-edges) is treated as missing as well.  Non-convergence is flagged,
    not fatal.
    """
    imputable = ~view.mask
    if not np.any(np.diagonal(view.matrix)):
        imputable = imputable | np.eye(view.n, dtype=bool)
    current = view.matrix.copy()
    fill = current[view.mask].mean()
    current[imputable] = fill
    converged = False
    for _ in range(IMPUTE_MAXITER):
        reconstruction = truncated_svd(current, rank).reconstruct()
        updated = current.copy()
        updated[imputable] = reconstruction[imputable]
        denom = max(float(np.linalg.norm(current)), SPECTRUM_FLOOR)
        change = float(np.linalg.norm(updated - current)) / denom
        current = updated
        if change < IMPUTE_TOL:
            converged = True
            break
    return _dense_estimate(current, rank, converged=converged)


def _recover_ard(view: CorruptedView, rank: int) -> SubspaceEstimate:
    """Moment estimator from aggregated relational data.

    The basis comes from the left singular vectors of the aggregate; the
    spectrum solves the moment identity against the trait second moments,
    then is symmetrized and rediagonalized so the estimate fits the
    orthonormal-basis-plus-diagonal contract.
    """
    aggregate, traits = view.aggregate, view.traits
    if rank > aggregate.shape[1]:
        raise DimensionError(
            f"rank {rank} exceeds the {aggregate.shape[1]} aggregated columns"
        )
    u_bar = np.linalg.svd(aggregate, full_matrices=False)[0][:, :rank]
    tu = traits.T @ u_bar
    denominator = tu.T @ tu
    numerator = (u_bar.T @ aggregate) @ tu
    cond = np.linalg.cond(denominator)
    if not np.isfinite(cond) or cond > 1.0 / PINV_RTOL:
        raise NumericalError(
            f"ard trait moment matrix is numerically singular (cond {cond:.3e})"
        )
    s_raw = np.linalg.solve(denominator.T, numerator.T).T
    s_sym = 0.5 * (s_raw + s_raw.T)
    eigvals, eigvecs = np.linalg.eigh(s_sym)
    return _estimate_from_eigenpairs(u_bar @ eigvecs, eigvals)


def _recover_egocentric(view: CorruptedView, rank: int) -> SubspaceEstimate:
    """Block completion from an egocentric sample.

    The unobserved block is ``A12ᵀ pinv(rank-k A11) A12``; the observed
    blocks are refit by a rank-k approximation of ``[A11 A12]``; the
    assembled matrix is symmetrized and eigendecomposed.
    """
    ego, a11, a12 = view.ego_nodes, view.ego_block, view.cross_block
    m = len(ego)
    if rank > m:
        raise DimensionError(f"rank {rank} exceeds the {m} sampled ego nodes")

    fact11 = truncated_svd(a11, rank)
    spectrum11 = fact11.signed_spectrum()
    keep = np.abs(spectrum11) > PINV_RTOL * np.abs(spectrum11).max(initial=0.0)
    inv_spec = np.zeros_like(spectrum11)
    inv_spec[keep] = 1.0 / spectrum11[keep]
    pinv11 = (fact11.left_vectors * inv_spec) @ fact11.left_vectors.T
    nonego_block = a12.T @ pinv11 @ a12

    observed = np.hstack([a11, a12])
    u, s, vt = np.linalg.svd(observed, full_matrices=False)
    lowrank = (u[:, :rank] * s[:rank]) @ vt[:rank]
    ego_hat, cross_hat = lowrank[:, :m], lowrank[:, m:]

    permuted = np.block([[ego_hat, cross_hat], [cross_hat.T, nonego_block]])
    permuted = 0.5 * (permuted + permuted.T)

    order = np.concatenate([ego, np.setdiff1d(np.arange(view.n), ego)])
    assembled = np.empty((view.n, view.n))
    assembled[np.ix_(order, order)] = permuted
    return _dense_estimate(assembled, rank)


def recover_subspace(
    view: CorruptedView, rank: int, outcome_hint=None
) -> SubspaceEstimate:
    """Estimate the principal subspace appropriate to the corruption kind.

    ``outcome_hint`` is accepted for interface stability with aggregated
    relational data variants that regress on responses; the implemented
    moment estimator works from the aggregate itself and ignores it.
    """
    if rank < 1:
        raise DimensionError(f"rank must be >= 1, got {rank}")
    kind = view.spec.kind
    if kind in _DENSE_KINDS:
        if rank > view.n:
            raise DimensionError(f"rank {rank} exceeds matrix dimension {view.n}")
        return _dense_estimate(view.matrix, rank)
    if kind == "missing":
        return _recover_missing(view, rank)
    if kind == "ard":
        return _recover_ard(view, rank)
    return _recover_egocentric(view, rank)
