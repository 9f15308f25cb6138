"""Outcome generation under the peer and latent contagion models.

Outcomes solve ``(I - b * Op) Y = intercept + W @ bw + X @ bx + eps`` where
``Op`` is the realized averaging operator (peer flavor) or the latent one
(latent flavor).  Also provides the identification diagnostic based on the
rank condition for instrumented autoregressive models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, NumericalError, ValidationError
from .linalg import RANK_RTOL, numerical_rank
from .netgen import row_normalize
from .rng import stream

FLAVORS = ("peer", "latent")


@dataclass(frozen=True)
class ContagionDesign:
    """Coefficients, covariates, and noise scale for one outcome process.

    ``contagion_coef`` must lie in (-1, 1) so the autoregressive system is
    invertible.  ``error_sd`` of zero gives deterministic outcomes.
    """

    intercept: float
    covariate_coefs: np.ndarray
    latent_coefs: np.ndarray
    contagion_coef: float
    covariates: np.ndarray
    error_sd: float
    flavor: str

    def __post_init__(self):
        object.__setattr__(
            self, "covariate_coefs", np.atleast_1d(np.asarray(self.covariate_coefs, float))
        )
        object.__setattr__(
            self, "latent_coefs", np.atleast_1d(np.asarray(self.latent_coefs, float))
        )
        object.__setattr__(self, "covariates", np.asarray(self.covariates, float))
        if self.flavor not in FLAVORS:
            raise ValidationError(f"flavor must be one of {FLAVORS}, got {self.flavor!r}")
        if not abs(self.contagion_coef) < 1:
            raise ValidationError(
                f"contagion coefficient must be in (-1, 1), got {self.contagion_coef}"
            )
        if self.error_sd < 0:
            raise ValidationError(f"error_sd must be >= 0, got {self.error_sd}")
        if self.covariates.ndim != 2:
            raise DimensionError("covariates must be a 2-D array (n, p)")
        if not np.isfinite(self.covariates).all():
            raise ValidationError("covariates contain non-finite entries")
        if self.covariates.shape[1] != self.covariate_coefs.shape[0]:
            raise DimensionError(
                f"{self.covariates.shape[1]} covariate columns vs "
                f"{self.covariate_coefs.shape[0]} coefficients"
            )

    @property
    def num_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def num_latents(self) -> int:
        return self.latent_coefs.shape[0]


@dataclass(frozen=True)
class OutcomeDraw:
    """Responses and the error vector that generated them (kept for oracles)."""

    responses: np.ndarray
    errors: np.ndarray


def generate_outcomes(
    design: ContagionDesign, operator, latents, rng_seed: int
) -> OutcomeDraw:
    """Draw one outcome vector from the autoregressive model.

    ``operator`` is the averaging matrix the spillover runs over (realized or
    latent); ``latents`` are the positions entering the mean, with columns
    matching ``design.latent_coefs``.  Errors are i.i.d. normal scaled by
    ``design.error_sd``.
    """
    op = np.asarray(operator, dtype=float)
    x = np.asarray(latents, dtype=float)
    n = op.shape[0]
    if op.shape != (n, n):
        raise DimensionError(f"operator must be square, got {op.shape}")
    if x.shape[0] != n or design.covariates.shape[0] != n:
        raise DimensionError("operator, latents, and covariates disagree on n")
    if x.shape[1] != design.num_latents:
        raise DimensionError(
            f"{x.shape[1]} latent columns vs {design.num_latents} coefficients"
        )

    if design.error_sd > 0:
        errors = design.error_sd * stream(rng_seed, "outcome-errors").standard_normal(n)
    else:
        errors = np.zeros(n)

    rhs = design.intercept + design.covariates @ design.covariate_coefs + errors
    if design.num_latents:
        rhs = rhs + x @ design.latent_coefs
    system = np.eye(n) - design.contagion_coef * op
    try:
        responses = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as err:  # unreachable for |coef| < 1, row-stochastic op
        raise NumericalError("autoregressive solve failed") from err
    return OutcomeDraw(responses=responses, errors=errors)


def cosine_influence_weights(latents) -> np.ndarray:
    """Interpretable form of the latent operator: row-normalized ``X Xᵀ``.

    Influence between nodes is proportional to the inner product of their
    positions, normalized per row.  Degenerate rows (nonpositive off-diagonal
    mass) are an error here, unlike ``row_normalize`` which zeroes them.
    """
    x = np.asarray(latents, dtype=float)
    if x.ndim != 2:
        raise DimensionError("latents must be a 2-D array (n, d)")
    gram = x @ x.T
    off_degrees = gram.sum(axis=1) - np.diagonal(gram)
    if np.any(off_degrees <= 0):
        raise ValidationError("nonpositive off-diagonal row sum in latent similarities")
    return row_normalize(gram)


@dataclass(frozen=True)
class IdentificationReport:
    identified: bool
    rank_full: int
    rank_base: int


def identification_check(
    covariates, latents, operator, tolerance: float = RANK_RTOL
) -> IdentificationReport:
    """Rank condition for identification of the contagion coefficient.

    Identified iff appending the operator-mixed regressors strictly raises
    the numerical rank of ``[1 W X]``.
    """
    op = np.asarray(operator, dtype=float)
    n = op.shape[0]
    blocks = [np.ones((n, 1))]
    mixed = []
    for block in (covariates, latents):
        if block is None:
            continue
        arr = np.asarray(block, dtype=float)
        if arr.size == 0:
            continue
        blocks.append(arr)
        mixed.append(op @ arr)
    base = np.column_stack(blocks)
    full = np.column_stack(blocks + mixed) if mixed else base
    rank_base = numerical_rank(base, tolerance)
    rank_full = numerical_rank(full, tolerance)
    return IdentificationReport(
        identified=rank_full > rank_base, rank_full=rank_full, rank_base=rank_base
    )
