"""Two-stage least squares estimators for peer and latent contagion.

Design and instrument construction with collinearity pruning, the TSLS fit
with asymptotic covariance and 95% intervals, oracle variants using true
latent structure, Procrustes alignment of latent-coefficient blocks, and
Monte Carlo estimation of population projection parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contagion import ContagionDesign, generate_outcomes
from .exceptions import (
    DegenerateDesignError,
    DimensionError,
    IdentificationError,
    NumericalError,
    ValidationError,
)
from .linalg import numerical_rank, procrustes_align
from .netgen import LatentNetwork, SubgammaSpec, realize_network, row_normalize
from .rng import derive_seed, stream

#: Two-sided 95% normal quantile.
Z_95 = 1.959963984540054

#: Relative singular-value cutoff below which the projected design counts as
#: numerically singular.  Looser than the rank tolerance on purpose: badly
#: scaled but solvable designs (condition numbers ~1e8) still carry several
#: accurate digits through the orthogonal solve path.
TSLS_SINGULAR_RTOL = 1e-12

OPERATOR_KINDS = ("peer", "latent")


@dataclass(frozen=True)
class DesignBundle:
    """Design matrix, pruned instruments, and the bookkeeping between them.

    ``terms`` names the design columns in order (intercept, covariates,
    latent block, contagion term); ``pruned_columns`` records instrument
    columns dropped for collinearity.
    """

    design: np.ndarray
    instruments: np.ndarray
    operator_kind: str
    terms: tuple[str, ...]
    instrument_names: tuple[str, ...]
    pruned_columns: tuple[str, ...]
    num_covariates: int
    num_latents: int
    intercept_dropped: bool = False


@dataclass(frozen=True)
class FitResult:
    """Coefficients, covariance, 95% intervals, and fit diagnostics."""

    coefficients: np.ndarray
    covariance: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    sigma_eps_hat: float
    terms: tuple[str, ...]
    diagnostics: dict

    def to_dict(self) -> dict:
        """JSON-ready representation with plain lists and scalars."""
        return {
            "terms": list(self.terms),
            "coefficients": self.coefficients.tolist(),
            "covariance": self.covariance.tolist(),
            "ci_lower": self.ci_lower.tolist(),
            "ci_upper": self.ci_upper.tolist(),
            "sigma_eps_hat": self.sigma_eps_hat,
            "diagnostics": {
                k: (list(v) if isinstance(v, tuple) else v)
                for k, v in self.diagnostics.items()
            },
        }


def _column_block(arr, n: int, prefix: str) -> tuple[np.ndarray, list[str]]:
    if arr is None:
        return np.empty((n, 0)), []
    block = np.asarray(arr, dtype=float)
    if block.ndim == 1:
        block = block[:, None]
    if block.shape[0] != n:
        raise DimensionError(f"{prefix} block has {block.shape[0]} rows, expected {n}")
    names = [f"{prefix}{j + 1}" for j in range(block.shape[1])]
    return block, names


def build_design(
    outcomes,
    covariates,
    embedding,
    operator,
    include_latents: bool = True,
    operator_kind: str = "latent",
) -> DesignBundle:
    """Assemble the TSLS design ``[1 W X OpY]`` and pruned instruments.

    Instruments start from ``[W X OpW OpX Op²W Op²X]`` and are pruned
    greedily left to right: a column is kept only if it raises the numerical
    rank of the columns kept so far.  The covariate and latent blocks come
    first, so they are always retained (up to internal collinearity).  With
    ``include_latents=False`` the latent block is dropped from both the
    design and the instruments.

    Raises ``IdentificationError`` if the surviving instruments have rank
    below ``p + d + 1`` (the identification threshold), and
    ``ValidationError`` for a design with an all-zero column.
    """
    if operator_kind not in OPERATOR_KINDS:
        raise ValidationError(f"operator_kind must be one of {OPERATOR_KINDS}")
    y = np.asarray(outcomes, dtype=float).ravel()
    op = np.asarray(operator, dtype=float)
    n = y.shape[0]
    if op.shape != (n, n):
        raise DimensionError(f"operator shape {op.shape} incompatible with n={n}")

    w, w_names = _column_block(covariates, n, "w")
    if include_latents:
        x, x_names = _column_block(embedding, n, "x")
    else:
        x, x_names = np.empty((n, 0)), []
    p, d = w.shape[1], x.shape[1]

    # Drop the intercept when the constant vector already lies in the
    # latent column span (up to numerical rank).
    intercept_dropped = False
    if d:
        with_ones = np.column_stack([x, np.ones(n)])
        intercept_dropped = numerical_rank(with_ones) == numerical_rank(x)

    spill = op @ y
    design_cols = [w, x, spill[:, None]]
    terms = [*w_names, *x_names, "contagion"]
    if not intercept_dropped:
        design_cols.insert(0, np.ones((n, 1)))
        terms.insert(0, "intercept")
    design = np.column_stack(design_cols)
    if np.any(np.all(design == 0, axis=0)):
        raise ValidationError("design matrix contains an all-zero column")

    blocks = [w, x, op @ w, op @ x, op @ (op @ w), op @ (op @ x)]
    prefixes = ["", "", "Op*", "Op*", "Op2*", "Op2*"]
    base_names = [w_names, x_names, w_names, x_names, w_names, x_names]
    candidates, cand_names = [], []
    for block, prefix, names in zip(blocks, prefixes, base_names):
        for j in range(block.shape[1]):
            candidates.append(block[:, j])
            cand_names.append(f"{prefix}{names[j]}")

    kept: list[np.ndarray] = []
    kept_names: list[str] = []
    pruned: list[str] = []
    for col, name in zip(candidates, cand_names):
        trial = np.column_stack(kept + [col]) if kept else col[:, None]
        if numerical_rank(trial) == len(kept) + 1:
            kept.append(col)
            kept_names.append(name)
        else:
            pruned.append(name)

    required = p + d + 1
    if len(kept) < required:
        raise IdentificationError(
            f"instrument rank {len(kept)} below identification threshold {required}"
        )
    return DesignBundle(
        design=design,
        instruments=np.column_stack(kept),
        operator_kind=operator_kind,
        terms=tuple(terms),
        instrument_names=tuple(kept_names),
        pruned_columns=tuple(pruned),
        num_covariates=p,
        num_latents=d,
        intercept_dropped=intercept_dropped,
    )


def tsls_fit(bundle: DesignBundle, outcomes) -> FitResult:
    """Two-stage least squares through orthogonal decompositions.

    The design is projected onto the instrument span via QR, the projected
    system is solved by least squares, and the covariance is
    ``sigma² (Zᵀ M Z)⁻¹`` with sigma² from second-stage residuals against
    the original design (denominator ``n - k``).
    """
    y = np.asarray(outcomes, dtype=float).ravel()
    z, h = bundle.design, bundle.instruments
    n, k = z.shape
    if y.shape[0] != n:
        raise DimensionError(f"outcomes length {y.shape[0]} != design rows {n}")

    q_h = np.linalg.qr(h)[0]
    zq = q_h.T @ z
    yq = q_h.T @ y

    singular_values = np.linalg.svd(zq, compute_uv=False)
    if (
        singular_values.size < k
        or singular_values[-1] <= TSLS_SINGULAR_RTOL * singular_values[0]
    ):
        cond = float("inf") if singular_values.size < k or singular_values[-1] == 0 else float(
            singular_values[0] / singular_values[-1]
        )
        raise DegenerateDesignError(
            "projected design ZᵀMZ is numerically singular", condition_number=cond
        )
    condition_number = float(singular_values[0] / singular_values[-1])

    coef, *_ = np.linalg.lstsq(zq, yq, rcond=None)

    residuals = y - z @ coef
    dof = n - k
    if dof <= 0:
        raise DimensionError(f"no residual degrees of freedom (n={n}, k={k})")
    sigma2 = float(residuals @ residuals) / dof

    r_factor = np.linalg.qr(zq)[1]
    r_inv = np.linalg.inv(r_factor)
    covariance = sigma2 * (r_inv @ r_inv.T)
    covariance = 0.5 * (covariance + covariance.T)

    half_width = Z_95 * np.sqrt(np.diagonal(covariance))
    return FitResult(
        coefficients=coef,
        covariance=covariance,
        ci_lower=coef - half_width,
        ci_upper=coef + half_width,
        sigma_eps_hat=float(np.sqrt(sigma2)),
        terms=bundle.terms,
        diagnostics={
            "instrument_rank": h.shape[1],
            "design_condition_number": condition_number,
            "pruned_columns": bundle.pruned_columns,
            "intercept_dropped": bundle.intercept_dropped,
            "identified": True,
            "operator_kind": bundle.operator_kind,
        },
    )


def oracle_fit(
    outcomes,
    covariates,
    true_latents,
    true_operator,
    operator_kind: str = "latent",
    include_latents: bool = True,
) -> FitResult:
    """TSLS with the true latent positions and operator plugged in."""
    bundle = build_design(
        outcomes,
        covariates,
        true_latents,
        true_operator,
        include_latents=include_latents,
        operator_kind=operator_kind,
    )
    return tsls_fit(bundle, outcomes)


def latent_block_rotation(embedding, true_latents) -> np.ndarray:
    """Procrustes rotation aligning the embedding onto the true positions."""
    return procrustes_align(embedding, true_latents).rotation


def align_latent_coefs(fit: FitResult, embedding, true_latents) -> np.ndarray:
    """Coefficients with the latent block expressed in the true basis.

    The latent block is only identified up to rotation; with
    ``Q = argmin ‖X̂Q − X‖_F`` the fitted block transforms as ``Qᵀ b_x``.
    Non-latent entries pass through unchanged.
    """
    x_idx = [i for i, t in enumerate(fit.terms) if t.startswith("x")]
    if not x_idx:
        return fit.coefficients.copy()
    rotation = latent_block_rotation(embedding, true_latents)
    aligned = fit.coefficients.copy()
    aligned[x_idx] = rotation.T @ fit.coefficients[x_idx]
    return aligned


def estimate_projection_params(
    latents,
    covariates,
    design: ContagionDesign,
    operator_choice: str,
    num_draws: int,
    rng_seed: int,
    noise: SubgammaSpec | None = None,
) -> np.ndarray:
    """Monte Carlo estimate of the population projection coefficients.

    Averages ``ZᵀZ`` and ``ZᵀY`` over ``num_draws`` independent draws of
    the error vector and (for the peer operator or peer flavor) the network,
    holding the latent positions fixed, then solves the averaged normal
    system.  The operator entering ``Z`` is the realized one for
    ``operator_choice="peer"`` and the latent one for ``"latent"``.

    Draw-level seeds derive from ``rng_seed`` and the draw index, and the
    moment sums accumulate in draw order, so results are reproducible
    regardless of where the draws run.
    """
    if operator_choice not in OPERATOR_KINDS:
        raise ValidationError(f"operator_choice must be one of {OPERATOR_KINDS}")
    if num_draws < 100:
        raise ValidationError(f"need at least 100 outcome draws, got {num_draws}")
    x = np.asarray(latents, dtype=float)
    w = np.asarray(covariates, dtype=float)
    n = x.shape[0]
    if noise is None:
        noise = SubgammaSpec.poisson()

    expected = x @ x.T
    latent_net = LatentNetwork(
        latent_positions=x,
        expected_adjacency=expected,
        expected_degrees=expected.sum(axis=1) - np.diagonal(expected),
        latent_operator=row_normalize(expected),
    )
    needs_network = operator_choice == "peer" or design.flavor == "peer"

    k = 1 + w.shape[1] + x.shape[1] + 1
    moment_zz = np.zeros((k, k))
    moment_zy = np.zeros(k)
    for draw in range(num_draws):
        draw_seed = derive_seed(rng_seed, "projection", draw)
        realized_op = None
        if needs_network:
            realized_op = realize_network(
                latent_net, noise, derive_seed(draw_seed, "edges")
            ).operator
        dgp_op = realized_op if design.flavor == "peer" else latent_net.latent_operator
        y = generate_outcomes(design, dgp_op, x, derive_seed(draw_seed, "errors")).responses
        z_op = realized_op if operator_choice == "peer" else latent_net.latent_operator
        z = np.column_stack([np.ones(n), w, x, z_op @ y])
        moment_zz += z.T @ z
        moment_zy += z.T @ y

    moment_zz /= num_draws
    moment_zy /= num_draws
    try:
        return np.linalg.solve(moment_zz, moment_zy)
    except np.linalg.LinAlgError as err:
        raise NumericalError("averaged moment matrix is singular") from err
