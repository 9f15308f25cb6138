"""Latent network generation.

Degree-corrected stochastic blockmodel parameters, the latent structure they
induce (positions, expected adjacency, averaging operator), and realized
networks under sub-gamma edge noise.

Diagonal convention: degrees are off-diagonal row sums and averaging
operators are formed from diagonal-zeroed matrices, so every non-isolated row
of an operator sums to exactly 1.  This matches the ``j != i`` summation in
the outcome models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, ValidationError
from .linalg import truncated_svd
from .rng import stream

_SIMPLEX_ATOL = 1e-12
_PSD_ATOL = 1e-10
_MAX_RESAMPLE = 100
_BISECT_STEPS = 20
_MEAN_DEGREE_RTOL = 0.01

SUBGAMMA_FAMILIES = ("poisson", "gaussian", "centered-exponential", "none")


@dataclass(frozen=True)
class SubgammaSpec:
    """Edge-noise family for network realization.

    ``sd`` applies to the gaussian family, ``rate`` to centered-exponential.
    All families are mean-zero around the expected adjacency; ``none`` returns
    the expectation itself.
    """

    family: str
    sd: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.family not in SUBGAMMA_FAMILIES:
            raise ValidationError(
                f"unknown noise family {self.family!r}; expected one of {SUBGAMMA_FAMILIES}"
            )
        if self.family == "gaussian" and not self.sd > 0:
            raise ValidationError(f"gaussian sd must be > 0, got {self.sd}")
        if self.family == "centered-exponential" and not self.rate > 0:
            raise ValidationError(f"exponential rate must be > 0, got {self.rate}")

    @classmethod
    def poisson(cls) -> "SubgammaSpec":
        return cls("poisson")

    @classmethod
    def gaussian(cls, sd: float) -> "SubgammaSpec":
        return cls("gaussian", sd=sd)

    @classmethod
    def centered_exponential(cls, rate: float) -> "SubgammaSpec":
        return cls("centered-exponential", rate=rate)

    @classmethod
    def none(cls) -> "SubgammaSpec":
        return cls("none")


@dataclass(frozen=True)
class ExponentialDegreeCorrection:
    """Sampler spec: ``xi_i ~ Exponential(rate) + shift``, i.i.d. per node.

    ``rate`` is the exponential rate (mean ``1/rate``).  The positive shift
    keeps propensities away from zero, limiting isolated nodes.
    """

    rate: float = 1.0 / 3.0
    shift: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError(f"rate must be > 0, got {self.rate}")
        if self.shift < 0:
            raise ValidationError(f"shift must be >= 0, got {self.shift}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.exponential(scale=1.0 / self.rate, size=n) + self.shift


@dataclass(frozen=True)
class Sparsity:
    """Sparsity specification: an explicit scale or a target mean degree.

    Exactly one of ``rho`` (explicit scaling in [0, 1]), ``mean_degree``
    (explicit target), or ``degree_exponent`` (target ``n**exponent``) must
    be set.
    """

    rho: float | None = None
    mean_degree: float | None = None
    degree_exponent: float | None = None

    def __post_init__(self):
        given = [v is not None for v in (self.rho, self.mean_degree, self.degree_exponent)]
        if sum(given) != 1:
            raise ValidationError("exactly one of rho/mean_degree/degree_exponent required")
        if self.rho is not None and not 0.0 <= self.rho <= 1.0:
            raise ValidationError(f"rho must be in [0, 1], got {self.rho}")
        if self.mean_degree is not None and not self.mean_degree > 0:
            raise ValidationError("mean_degree must be positive")
        if self.degree_exponent is not None and not 0 < self.degree_exponent <= 1:
            raise ValidationError("degree_exponent must be in (0, 1]")

    def target_for(self, n: int) -> float | None:
        """Target mean expected degree, or None when rho is explicit."""
        if self.rho is not None:
            return None
        if self.mean_degree is not None:
            return float(self.mean_degree)
        return float(n**self.degree_exponent)


@dataclass(frozen=True)
class DcsbmParams:
    """Poisson degree-corrected stochastic blockmodel parameters.

    ``block_probs`` is a probability simplex over blocks; ``block_matrix`` is
    symmetric PSD with entries in [0, 1]; ``degree_correction`` is either a
    length-n vector of positive propensities or a sampler spec.
    """

    n: int
    num_blocks: int
    block_probs: np.ndarray
    block_matrix: np.ndarray
    degree_correction: np.ndarray | ExponentialDegreeCorrection
    sparsity: Sparsity

    def __post_init__(self):
        object.__setattr__(self, "block_probs", np.asarray(self.block_probs, dtype=float))
        object.__setattr__(self, "block_matrix", np.asarray(self.block_matrix, dtype=float))
        if self.n < 2:
            raise ValidationError(f"need at least 2 nodes, got {self.n}")
        pi, b = self.block_probs, self.block_matrix
        if pi.shape != (self.num_blocks,):
            raise DimensionError(f"block_probs must have shape ({self.num_blocks},)")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > _SIMPLEX_ATOL:
            raise ValidationError("block_probs must be a probability simplex")
        if b.shape != (self.num_blocks, self.num_blocks):
            raise DimensionError("block_matrix shape must match num_blocks")
        if np.max(np.abs(b - b.T)) > _PSD_ATOL:
            raise ValidationError("block_matrix must be symmetric")
        if np.any(b < 0) or np.any(b > 1):
            raise ValidationError("block_matrix entries must lie in [0, 1]")
        if np.linalg.eigvalsh(b).min() < -_PSD_ATOL:
            raise ValidationError("block_matrix must be positive semi-definite")
        if isinstance(self.degree_correction, np.ndarray):
            xi = np.asarray(self.degree_correction, dtype=float)
            if xi.shape != (self.n,):
                raise DimensionError(f"degree_correction must have shape ({self.n},)")
            if np.any(xi <= 0):
                raise ValidationError("degree corrections must be strictly positive")
            object.__setattr__(self, "degree_correction", xi)


@dataclass(frozen=True)
class LatentNetwork:
    """Latent structure: positions X, expectation XXᵀ, and its operator.

    ``expected_degrees`` are off-diagonal row sums of ``expected_adjacency``;
    ``latent_operator`` has zero diagonal and rows summing to exactly 1.
    """

    latent_positions: np.ndarray
    expected_adjacency: np.ndarray
    expected_degrees: np.ndarray
    latent_operator: np.ndarray
    block_assignments: np.ndarray | None = None
    degree_corrections: np.ndarray | None = None
    rho: float | None = None

    @property
    def n(self) -> int:
        return self.latent_positions.shape[0]

    @property
    def rank(self) -> int:
        return self.latent_positions.shape[1]


@dataclass(frozen=True)
class ObservedNetwork:
    """Realized symmetric network with degrees and averaging operator.

    Isolated nodes (zero degree) get an all-zero operator row.
    """

    adjacency: np.ndarray
    degrees: np.ndarray
    operator: np.ndarray
    noise: SubgammaSpec | None = None

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]


def row_normalize(adjacency) -> np.ndarray:
    """Degree-normalize a matrix into an averaging operator.

    Off-diagonal entries are divided by the off-diagonal row sum; the
    diagonal is zero; rows with nonpositive sum (isolated nodes) are zero.
    """
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {a.shape}")
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    degrees = off.sum(axis=1)
    safe = np.where(degrees > 0, degrees, 1.0)
    out = off / safe[:, None]
    out[degrees <= 0] = 0.0
    return out


def _expected_adjacency_base(
    z: np.ndarray, xi: np.ndarray, block_matrix: np.ndarray
) -> np.ndarray:
    """Expected adjacency at rho = 1: ``xi_i B[z_i, z_j] xi_j``."""
    return np.outer(xi, xi) * block_matrix[np.ix_(z, z)]


def _offdiag_degrees(matrix: np.ndarray) -> np.ndarray:
    return matrix.sum(axis=1) - np.diagonal(matrix)


def _calibrate_rho(base: np.ndarray, target: float) -> float:
    """Bisection for rho in [0, 1] hitting the target mean expected degree.

    The mean degree is linear in rho, so 20 halvings land well inside the
    1% tolerance; bisection keeps the interface uniform if the generator
    ever grows nonlinear sparsity controls.
    """
    mean_at_one = _offdiag_degrees(base).mean()
    if mean_at_one <= 0:
        raise ValidationError("expected adjacency is identically zero; cannot calibrate")
    if target > mean_at_one * (1 + _MEAN_DEGREE_RTOL):
        raise ValidationError(
            f"target mean degree {target:.3g} unreachable with rho <= 1 "
            f"(max attainable {mean_at_one:.3g})"
        )
    lo, hi = 0.0, 1.0
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if mid * mean_at_one < target:
            lo = mid
        else:
            hi = mid
    rho = 0.5 * (lo + hi)
    achieved = rho * mean_at_one
    if abs(achieved - target) > _MEAN_DEGREE_RTOL * target:
        raise ValidationError(
            f"rho calibration missed target {target:.6g} (achieved {achieved:.6g})"
        )
    return rho


def sample_dcsbm_latents(params: DcsbmParams, rng_seed: int) -> LatentNetwork:
    """Draw DCSBM structure and return the induced latent network.

    Blocks are categorical on ``block_probs``; degree corrections come from
    the explicit vector or the sampler spec; positions are ``U S^{1/2}`` from
    the rank-d eigendecomposition of the expected adjacency.  Configurations
    with a zero expected degree trigger a degree-correction resample (bounded)
    before erroring out.
    """
    rng = stream(rng_seed, "dcsbm")
    n, d = params.n, params.num_blocks
    z = rng.choice(d, size=n, p=params.block_probs)

    fixed_xi = isinstance(params.degree_correction, np.ndarray)
    for attempt in range(_MAX_RESAMPLE + 1):
        if fixed_xi:
            xi = params.degree_correction
        else:
            xi = params.degree_correction.sample(n, rng)
        base = _expected_adjacency_base(z, xi, params.block_matrix)
        if np.all(_offdiag_degrees(base) > 0):
            break
        if fixed_xi:
            raise ValidationError("explicit degree corrections yield a zero expected degree")
    else:
        raise ValidationError(
            f"zero expected degree persisted after {_MAX_RESAMPLE} degree-correction resamples"
        )

    target = params.sparsity.target_for(n)
    rho = params.sparsity.rho if target is None else _calibrate_rho(base, target)
    expected = rho * base

    fact = truncated_svd(expected, d)
    # PSD by construction; clip the floating-point dust below zero.
    spectrum = np.clip(fact.signed_spectrum(), 0.0, None)
    positions = fact.left_vectors * np.sqrt(spectrum)

    degrees = _offdiag_degrees(expected)
    return LatentNetwork(
        latent_positions=positions,
        expected_adjacency=expected,
        expected_degrees=degrees,
        latent_operator=row_normalize(expected),
        block_assignments=z,
        degree_corrections=np.asarray(xi, dtype=float),
        rho=float(rho),
    )


def realize_network(
    latent: LatentNetwork, noise: SubgammaSpec, rng_seed: int
) -> ObservedNetwork:
    """Draw a symmetric network around the expected adjacency.

    The upper triangle is sampled independently per the noise family and
    symmetrized with a zero diagonal.  The ``none`` family returns the
    expected adjacency itself (diagonal included), so the induced operator
    equals the latent operator exactly.
    """
    expected = latent.expected_adjacency
    n = expected.shape[0]

    if noise.family == "none":
        adjacency = expected.copy()
    else:
        rng = stream(rng_seed, "edges", noise.family)
        iu = np.triu_indices(n, k=1)
        means = expected[iu]
        if noise.family == "poisson":
            if np.any(means < 0):
                raise ValidationError("negative Poisson rate in expected adjacency")
            draws = rng.poisson(means).astype(float)
        elif noise.family == "gaussian":
            draws = means + rng.normal(0.0, noise.sd, size=means.shape)
        else:  # centered-exponential
            draws = means + rng.exponential(1.0 / noise.rate, size=means.shape) - 1.0 / noise.rate
        adjacency = np.zeros((n, n))
        adjacency[iu] = draws
        adjacency += adjacency.T

    return ObservedNetwork(
        adjacency=adjacency,
        degrees=_offdiag_degrees(adjacency),
        operator=row_normalize(adjacency),
        noise=noise,
    )


def sample_block_matrix(
    num_blocks: int,
    rng: np.random.Generator,
    diag_range: tuple[float, float] = (0.75, 0.85),
    offdiag_range: tuple[float, float] = (0.01, 0.05),
    max_tries: int = _MAX_RESAMPLE,
) -> np.ndarray:
    """Assortative block matrix with uniform diagonal and off-diagonal entries.

    Rejects and resamples draws that are not PSD (rare at the default
    strongly assortative ranges).
    """
    d = num_blocks
    for _ in range(max_tries):
        b = np.empty((d, d))
        iu = np.triu_indices(d, k=1)
        off = rng.uniform(*offdiag_range, size=len(iu[0]))
        b[iu] = off
        b.T[iu] = off
        b[np.diag_indices(d)] = rng.uniform(*diag_range, size=d)
        if np.linalg.eigvalsh(b).min() >= -_PSD_ATOL:
            return b
    raise ValidationError(f"no PSD block matrix found in {max_tries} draws")


def paper_dcsbm_params(
    n: int,
    sparsity: Sparsity,
    rng: np.random.Generator,
    num_blocks: int = 5,
) -> DcsbmParams:
    """Default simulation parameters: equal blocks, assortative B, shifted-
    exponential degree corrections."""
    return DcsbmParams(
        n=n,
        num_blocks=num_blocks,
        block_probs=np.full(num_blocks, 1.0 / num_blocks),
        block_matrix=sample_block_matrix(num_blocks, rng),
        degree_correction=ExponentialDegreeCorrection(),
        sparsity=sparsity,
    )
