"""Tests for the dense numerical kernels."""

import numpy as np
import pytest

from netsmooth.exceptions import DimensionError, RankError, ValidationError
from netsmooth.linalg import (
    numerical_rank,
    procrustes_align,
    solve_least_squares,
    top_positive_eigenpairs,
    truncated_svd,
)

RNG = np.random.default_rng(20260810)


class TestTruncatedSvd:
    def test_hand_2x2(self):
        # eigenvalues of [[2,1],[1,2]] are 3 and 1 with leading vector (1,1)/sqrt(2)
        fact = truncated_svd([[2.0, 1.0], [1.0, 2.0]], 1)
        assert fact.singular_values == pytest.approx([3.0], abs=1e-12)
        assert fact.left_vectors[:, 0] == pytest.approx(
            [1 / np.sqrt(2), 1 / np.sqrt(2)], abs=1e-12
        )

    def test_identity(self):
        fact = truncated_svd(np.eye(3), 3)
        assert fact.singular_values == pytest.approx([1.0, 1.0, 1.0], abs=1e-14)

    def test_known_gram_structure(self):
        # X with orthogonal columns of norms 3, 2, 1: singular values of XXᵀ
        # are the squared column norms.
        q = np.linalg.qr(RNG.standard_normal((20, 3)))[0]
        x = q * np.array([3.0, 2.0, 1.0])
        fact = truncated_svd(x @ x.T, 3)
        assert fact.singular_values == pytest.approx([9.0, 4.0, 1.0], abs=1e-10)

    def test_signed_spectrum_indefinite(self):
        # [[0,1],[1,0]] has eigenvalues +1 and -1
        fact = truncated_svd([[0.0, 1.0], [1.0, 0.0]], 2)
        assert fact.singular_values == pytest.approx([1.0, 1.0], abs=1e-14)
        assert sorted(fact.signed_spectrum()) == pytest.approx([-1.0, 1.0], abs=1e-14)

    def test_best_rank_k_of_psd(self):
        x = RNG.standard_normal((30, 4))
        m = x @ x.T
        fact = truncated_svd(m, 4)
        rel = np.linalg.norm(fact.reconstruct() - m) / np.linalg.norm(m)
        assert rel < 1e-8

    def test_orthonormal_columns(self):
        a = RNG.standard_normal((15, 15))
        fact = truncated_svd(a + a.T, 6)
        for block in (fact.left_vectors, fact.right_vectors):
            gram = block.T @ block
            assert np.max(np.abs(gram - np.eye(6))) < 1e-10

    def test_nonincreasing_and_nonnegative(self):
        a = RNG.standard_normal((12, 12))
        fact = truncated_svd(a + a.T, 12)
        s = fact.singular_values
        assert np.all(s >= 0)
        assert np.all(np.diff(s) <= 1e-12)

    def test_deterministic(self):
        a = RNG.standard_normal((10, 10))
        m = a + a.T
        one = truncated_svd(m, 3)
        two = truncated_svd(m.copy(), 3)
        assert np.array_equal(one.left_vectors, two.left_vectors)
        assert np.array_equal(one.singular_values, two.singular_values)

    def test_sign_convention(self):
        a = RNG.standard_normal((8, 8))
        fact = truncated_svd(a + a.T, 8)
        for j in range(8):
            col = fact.left_vectors[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValidationError):
            truncated_svd([[1.0, 2.0], [0.0, 1.0]], 1)

    def test_rejects_bad_rank(self):
        m = np.eye(3)
        with pytest.raises(DimensionError):
            truncated_svd(m, 4)
        with pytest.raises(DimensionError):
            truncated_svd(m, 0)

    def test_large_n_iterative_branch(self):
        # n just above the dense cutoff exercises the Lanczos path
        n = 2050
        x = RNG.standard_normal((n, 3))
        m = x @ x.T
        fact = truncated_svd(m, 3)
        rel = np.linalg.norm(fact.reconstruct() - m) / np.linalg.norm(m)
        assert rel < 1e-8
        again = truncated_svd(m, 3)
        assert np.array_equal(fact.left_vectors, again.left_vectors)


class TestTopPositiveEigenpairs:
    def test_prefers_positive_over_larger_negative(self):
        # eigenvalues 2, -5: magnitude ranking would pick -5 first
        q = np.linalg.qr(RNG.standard_normal((6, 6)))[0]
        m = (q[:, :1] * 2.0) @ q[:, :1].T + (q[:, 1:2] * -5.0) @ q[:, 1:2].T
        spectrum, basis = top_positive_eigenpairs(m, 1)
        assert spectrum[0] == pytest.approx(2.0, abs=1e-10)
        align = abs(float(basis[:, 0] @ q[:, 0]))
        assert align == pytest.approx(1.0, abs=1e-10)

    def test_descending_order(self):
        a = RNG.standard_normal((9, 9))
        spectrum, _ = top_positive_eigenpairs(a + a.T, 5)
        assert np.all(np.diff(spectrum) <= 1e-12)


class TestProcrustes:
    def test_identity(self):
        x = RNG.standard_normal((7, 3))
        result = procrustes_align(x, x)
        assert result.rotation == pytest.approx(np.eye(3), abs=1e-12)
        assert result.residual == pytest.approx(0.0, abs=1e-10)

    def test_exact_rotation_recovery(self):
        x = RNG.standard_normal((9, 3))
        rotation = np.linalg.qr(RNG.standard_normal((3, 3)))[0]
        result = procrustes_align(x @ rotation.T, x)
        assert result.rotation == pytest.approx(rotation, abs=1e-8)
        assert result.residual < 1e-8

    def test_noisy_alignment_vs_angle_grid(self):
        # independent oracle: direct minimization over rotation angles,
        # including reflections
        source = RNG.standard_normal((10, 2))
        angle = 0.7
        rotation = np.array(
            [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
        )
        noise = 0.01 * RNG.standard_normal((10, 2))
        target = source @ rotation + noise

        best = np.inf
        for theta in np.linspace(0, 2 * np.pi, 20001):
            c, s = np.cos(theta), np.sin(theta)
            for flip in (1.0, -1.0):
                q = np.array([[c, -s * flip], [s, c * flip]])
                best = min(best, np.linalg.norm(source @ q - target))

        result = procrustes_align(source, target)
        assert result.residual <= best + 1e-6
        noise_norm = np.linalg.norm(noise)
        assert result.residual < 2 * noise_norm
        assert result.residual > noise_norm / 2

    def test_rotation_inverse_property(self):
        x = RNG.standard_normal((12, 4))
        q = np.linalg.qr(RNG.standard_normal((4, 4)))[0]
        result = procrustes_align(x @ q, x)
        assert result.rotation == pytest.approx(q.T, abs=1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            procrustes_align(np.ones((3, 2)), np.ones((4, 2)))


class TestSolveLeastSquares:
    def test_identity_design(self):
        coef = solve_least_squares(np.eye(3), [1.0, 2.0, 3.0])
        assert coef == pytest.approx([1.0, 2.0, 3.0], abs=1e-14)

    def test_consistent_overdetermined(self):
        design = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]])
        truth = np.array([1.5, -2.0])
        coef = solve_least_squares(design, design @ truth)
        assert coef == pytest.approx(truth, abs=1e-12)

    def test_matches_normal_equations_oracle(self):
        # independent oracle: explicit (XᵀX)⁻¹Xᵀy in extended precision
        design = RNG.standard_normal((50, 3))
        response = RNG.standard_normal(50)
        xl = design.astype(np.longdouble)
        yl = response.astype(np.longdouble)
        oracle = np.linalg.inv((xl.T @ xl).astype(float)) @ (xl.T @ yl).astype(float)
        coef = solve_least_squares(design, response)
        assert coef == pytest.approx(oracle, abs=1e-8)

    def test_residual_orthogonal_to_columns(self):
        design = RNG.standard_normal((40, 4))
        response = RNG.standard_normal(40)
        coef = solve_least_squares(design, response)
        residual = response - design @ coef
        assert np.max(np.abs(design.T @ residual)) < 1e-8

    def test_rank_deficient_raises(self):
        base = RNG.standard_normal((20, 2))
        design = np.column_stack([base, base @ [1.0, -2.0]])
        with pytest.raises(RankError) as excinfo:
            solve_least_squares(design, np.zeros(20))
        assert excinfo.value.detected_rank == 2

    def test_underdetermined_raises(self):
        with pytest.raises(DimensionError):
            solve_least_squares(np.ones((2, 3)), [1.0, 2.0])


class TestNumericalRank:
    def test_identity(self):
        assert numerical_rank(np.eye(3)) == 3

    def test_duplicated_column(self):
        assert numerical_rank([[1.0, 1.0], [1.0, 1.0]]) == 1

    def test_constructed_collinearity(self):
        w = RNG.standard_normal((30, 4))
        stacked = np.column_stack([w, w @ RNG.standard_normal(4)])
        assert numerical_rank(stacked) == numerical_rank(w) == 4

    def test_zero_matrix(self):
        assert numerical_rank(np.zeros((5, 3))) == 0
