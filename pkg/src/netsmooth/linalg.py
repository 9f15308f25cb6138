"""Dense numerical kernels shared by every other module.

Symmetric truncated SVD with a deterministic sign convention, orthogonal
Procrustes alignment, least-squares solves via orthogonal decompositions,
and tolerance-based numerical rank.  All routines are pure functions of
their inputs and safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .exceptions import DimensionError, NumericalError, RankError, ValidationError

#: Max-norm tolerance for declaring an input matrix symmetric.
SYMMETRY_ATOL = 1e-10

#: Relative singular-value threshold for numerical rank.  Matches the
#: backward error of double-precision SVD at the problem sizes in play.
RANK_RTOL = 1e-8

#: Above this dimension the full symmetric eigendecomposition gives way to
#: an iterative block (Lanczos) method.
DENSE_EIG_MAX_N = 2000

LANCZOS_TOL = 1e-10
LANCZOS_MAXITER = 1000


@dataclass(frozen=True)
class TruncatedFactorization:
    """Rank-k truncated SVD ``U diag(s) Vᵀ`` of a symmetric matrix.

    ``left_vectors`` and ``right_vectors`` have orthonormal columns;
    ``singular_values`` is nonincreasing and nonnegative.  For symmetric
    input the right vectors are the left vectors flipped by eigenvalue sign,
    so the signed spectrum is recoverable (see :meth:`signed_spectrum`).
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def signed_spectrum(self) -> np.ndarray:
        """Eigenvalues of the symmetric input, ordered by magnitude.

        Uses the identity ``u_iᵀ v_i = sign(λ_i)`` for symmetric matrices.
        """
        signs = np.sign(np.einsum("ij,ij->j", self.left_vectors, self.right_vectors))
        signs[signs == 0] = 1.0
        return self.singular_values * signs

    def reconstruct(self) -> np.ndarray:
        """Best rank-k approximation ``U diag(s) Vᵀ`` of the input."""
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


@dataclass(frozen=True)
class ProcrustesResult:
    """Orthogonal alignment ``Q`` and the Frobenius residual it achieves."""

    rotation: np.ndarray
    residual: float


def _as_2d(matrix, name: str) -> np.ndarray:
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D array, got ndim={arr.ndim}")
    return arr


def _fix_signs(vectors: np.ndarray, partners: np.ndarray | None = None) -> None:
    """Flip columns in place so each column's largest-magnitude entry is positive.

    Partner columns, when given, are flipped together to preserve the
    factorization.
    """
    for j in range(vectors.shape[1]):
        pivot = np.argmax(np.abs(vectors[:, j]))
        if vectors[pivot, j] < 0:
            vectors[:, j] = -vectors[:, j]
            if partners is not None:
                partners[:, j] = -partners[:, j]


def truncated_svd(matrix, rank: int) -> TruncatedFactorization:
    """Top-``rank`` singular triplets of a symmetric real matrix.

    Parameters
    ----------
    matrix : (n, n) array_like
        Symmetric matrix (checked to ``SYMMETRY_ATOL`` in the max norm).
    rank : int
        Number of triplets to keep, ``1 <= rank <= n``.

    Returns
    -------
    TruncatedFactorization
        Factors sorted by singular value (eigenvalue magnitude), with the
        deterministic sign convention that the largest-magnitude entry of
        each left singular vector is positive.

    Raises
    ------
    ValidationError
        If the input is not symmetric.
    DimensionError
        If ``rank`` is out of range or the matrix is not square.
    NumericalError
        If the iterative eigensolver fails to converge (large ``n`` only).
    """
    a = _as_2d(matrix, "matrix")
    n, m = a.shape
    if n != m:
        raise DimensionError(f"matrix must be square, got shape {a.shape}")
    if not (1 <= rank <= n):
        raise DimensionError(f"rank must satisfy 1 <= rank <= {n}, got {rank}")
    if not np.isfinite(a).all():
        raise ValidationError("matrix contains non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_ATOL:
        raise ValidationError(
            f"matrix is not symmetric within {SYMMETRY_ATOL:g} in the max norm"
        )

    if n <= DENSE_EIG_MAX_N or rank >= n - 1:
        eigvals, eigvecs = np.linalg.eigh(a)
    else:
        # Deterministic start vector keeps repeated runs bit-identical.
        v0 = stream_free_start(n)
        try:
            eigvals, eigvecs = scipy.sparse.linalg.eigsh(
                a, k=rank, which="LM", tol=LANCZOS_TOL, maxiter=LANCZOS_MAXITER, v0=v0
            )
        except scipy.sparse.linalg.ArpackNoConvergence as err:
            raise NumericalError(
                f"Lanczos eigensolver did not converge for n={n}, k={rank}",
                iterations=LANCZOS_MAXITER,
            ) from err

    order = np.argsort(-np.abs(eigvals), kind="stable")[:rank]
    top = eigvals[order]
    left = eigvecs[:, order].copy()
    signs = np.where(top < 0, -1.0, 1.0)
    right = left * signs
    _fix_signs(left, right)
    return TruncatedFactorization(
        left_vectors=left, singular_values=np.abs(top), right_vectors=right
    )


def stream_free_start(n: int) -> np.ndarray:
    """Fixed unit start vector for the iterative eigensolver (no global RNG)."""
    v0 = np.random.Generator(np.random.Philox(seed=0x5EED)).standard_normal(n)
    return v0 / np.linalg.norm(v0)


def top_positive_eigenpairs(matrix, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """Algebraically largest ``rank`` eigenpairs of a symmetric matrix.

    This is the selection rule for spectral embeddings of matrices whose
    estimand is positive semi-definite: the negative spectral mass of a noisy
    observation is noise, so ranking by magnitude can let a large negative
    eigenvalue displace genuine structure.  Returns ``(eigenvalues,
    eigenvectors)`` sorted descending, with the same sign convention and
    backend switching as :func:`truncated_svd`.
    """
    a = _as_2d(matrix, "matrix")
    n, m = a.shape
    if n != m:
        raise DimensionError(f"matrix must be square, got shape {a.shape}")
    if not (1 <= rank <= n):
        raise DimensionError(f"rank must satisfy 1 <= rank <= {n}, got {rank}")
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_ATOL:
        raise ValidationError(
            f"matrix is not symmetric within {SYMMETRY_ATOL:g} in the max norm"
        )
    if n <= DENSE_EIG_MAX_N or rank >= n - 1:
        eigvals, eigvecs = np.linalg.eigh(a)
        top = eigvals[::-1][:rank].copy()
        vectors = eigvecs[:, ::-1][:, :rank].copy()
    else:
        try:
            eigvals, eigvecs = scipy.sparse.linalg.eigsh(
                a,
                k=rank,
                which="LA",
                tol=LANCZOS_TOL,
                maxiter=LANCZOS_MAXITER,
                v0=stream_free_start(n),
            )
        except scipy.sparse.linalg.ArpackNoConvergence as err:
            raise NumericalError(
                f"Lanczos eigensolver did not converge for n={n}, k={rank}",
                iterations=LANCZOS_MAXITER,
            ) from err
        order = np.argsort(-eigvals, kind="stable")
        top = eigvals[order]
        vectors = eigvecs[:, order].copy()
    _fix_signs(vectors)
    return top, vectors


def procrustes_align(source, target) -> ProcrustesResult:
    """Orthogonal ``Q`` minimizing ``‖source @ Q − target‖_F``.

    Solved via the SVD of ``sourceᵀ target``; allows reflections.
    """
    src = _as_2d(source, "source")
    tgt = _as_2d(target, "target")
    if src.shape != tgt.shape:
        raise DimensionError(f"shape mismatch: {src.shape} vs {tgt.shape}")
    if src.shape[1] < 1:
        raise DimensionError("alignment needs at least one column")
    u, _, vt = np.linalg.svd(src.T @ tgt)
    rotation = u @ vt
    residual = float(np.linalg.norm(src @ rotation - tgt))
    return ProcrustesResult(rotation=rotation, residual=residual)


def solve_least_squares(design, response) -> np.ndarray:
    """``argmin_b ‖design @ b − response‖₂`` via SVD (never normal equations).

    Raises
    ------
    RankError
        If the design is numerically rank deficient at ``RANK_RTOL``.
    DimensionError
        On shape mismatch or an underdetermined system (n < k).
    """
    a = _as_2d(design, "design")
    y = np.asarray(response, dtype=float)
    n, k = a.shape
    if y.shape[0] != n:
        raise DimensionError(f"response length {y.shape[0]} != design rows {n}")
    if n < k:
        raise DimensionError(f"underdetermined system: {n} rows < {k} columns")
    detected = numerical_rank(a, RANK_RTOL)
    if detected < k:
        raise RankError("design matrix is rank deficient", detected_rank=detected)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return coef


def numerical_rank(matrix, tolerance: float = RANK_RTOL) -> int:
    """Count of singular values above ``tolerance`` times the largest one."""
    a = _as_2d(matrix, "matrix")
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s > tolerance * s[0]))
