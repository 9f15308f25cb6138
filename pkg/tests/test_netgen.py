"""Tests for DCSBM generation and network realization."""

import numpy as np
import pytest

from netsmooth.exceptions import DimensionError, ValidationError
from netsmooth.netgen import (
    DcsbmParams,
    ExponentialDegreeCorrection,
    Sparsity,
    SubgammaSpec,
    paper_dcsbm_params,
    realize_network,
    row_normalize,
    sample_block_matrix,
    sample_dcsbm_latents,
)
from netsmooth.rng import stream

RNG = np.random.default_rng(7)


class TestRowNormalize:
    def test_two_node(self):
        out = row_normalize([[0.0, 2.0], [2.0, 0.0]])
        assert np.array_equal(out, [[0.0, 1.0], [1.0, 0.0]])

    def test_isolated_row_zeroed(self):
        a = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        out = row_normalize(a)
        assert np.array_equal(out[0], [0.0, 0.0, 0.0])
        assert out[1].sum() == pytest.approx(1.0, abs=1e-15)

    def test_rows_sum_to_one_exactly(self):
        # degrees 3, 4, 5
        a = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
        out = row_normalize(a)
        assert out.sum(axis=1) == pytest.approx([1.0, 1.0, 1.0], abs=1e-15)

    def test_diagonal_ignored(self):
        a = np.array([[5.0, 1.0], [1.0, 5.0]])
        out = row_normalize(a)
        assert np.array_equal(out, [[0.0, 1.0], [1.0, 0.0]])

    def test_spectral_radius_at_most_one(self):
        for _ in range(10):
            a = np.abs(RNG.standard_normal((12, 12)))
            a = a + a.T
            out = row_normalize(a)
            assert np.max(np.abs(np.linalg.eigvals(out))) <= 1 + 1e-10


class TestDcsbmParams:
    def test_rejects_non_simplex(self):
        with pytest.raises(ValidationError):
            DcsbmParams(
                n=10,
                num_blocks=2,
                block_probs=[0.6, 0.6],
                block_matrix=np.eye(2) * 0.5,
                degree_correction=ExponentialDegreeCorrection(),
                sparsity=Sparsity(rho=0.5),
            )

    def test_rejects_non_psd_block_matrix(self):
        with pytest.raises(ValidationError):
            DcsbmParams(
                n=10,
                num_blocks=2,
                block_probs=[0.5, 0.5],
                block_matrix=[[0.1, 0.9], [0.9, 0.1]],
                degree_correction=ExponentialDegreeCorrection(),
                sparsity=Sparsity(rho=0.5),
            )

    def test_rejects_nonpositive_degree_correction(self):
        with pytest.raises(ValidationError):
            DcsbmParams(
                n=3,
                num_blocks=1,
                block_probs=[1.0],
                block_matrix=[[0.5]],
                degree_correction=np.array([1.0, 0.0, 1.0]),
                sparsity=Sparsity(rho=0.5),
            )

    def test_sparsity_exactly_one_field(self):
        with pytest.raises(ValidationError):
            Sparsity(rho=0.5, mean_degree=10.0)
        with pytest.raises(ValidationError):
            Sparsity()


class TestSampleDcsbmLatents:
    def test_homogeneous_expected_degree(self):
        # single block, xi = 1, entries arranged to lam / n
        lam, n = 3.0, 10
        params = DcsbmParams(
            n=n,
            num_blocks=1,
            block_probs=[1.0],
            block_matrix=[[lam / n]],
            degree_correction=np.ones(n),
            sparsity=Sparsity(rho=1.0),
        )
        latent = sample_dcsbm_latents(params, rng_seed=1)
        expected = lam * (n - 1) / n
        assert latent.expected_degrees == pytest.approx(
            np.full(n, expected), abs=1e-12
        )

    def test_hand_computed_expected_adjacency(self):
        # single block forces deterministic assignments; entries are
        # rho * xi_i * b * xi_j
        xi = np.array([1.0, 2.0, 1.5, 0.5])
        params = DcsbmParams(
            n=4,
            num_blocks=1,
            block_probs=[1.0],
            block_matrix=[[0.8]],
            degree_correction=xi,
            sparsity=Sparsity(rho=0.5),
        )
        latent = sample_dcsbm_latents(params, rng_seed=3)
        hand = 0.5 * 0.8 * np.outer(xi, xi)
        assert latent.expected_adjacency == pytest.approx(hand, abs=1e-12)

    def test_paper_defaults(self):
        n = 300
        params = paper_dcsbm_params(n, Sparsity(degree_exponent=0.75), stream(5, "bm"))
        b = params.block_matrix
        diag = np.diagonal(b)
        off = b[~np.eye(5, dtype=bool)]
        assert np.all((diag >= 0.75) & (diag <= 0.85))
        assert np.all((off >= 0.01) & (off <= 0.05))
        assert params.block_probs == pytest.approx(np.full(5, 0.2))
        latent = sample_dcsbm_latents(params, rng_seed=5)
        target = n**0.75
        assert abs(latent.expected_degrees.mean() - target) <= 0.01 * target
        assert np.all(latent.degree_corrections >= 1.0)

    def test_positions_reproduce_expectation(self):
        params = paper_dcsbm_params(150, Sparsity(degree_exponent=0.75), stream(6, "bm"))
        latent = sample_dcsbm_latents(params, rng_seed=6)
        x = latent.latent_positions
        rel = np.linalg.norm(x @ x.T - latent.expected_adjacency) / np.linalg.norm(
            latent.expected_adjacency
        )
        assert rel < 1e-8

    def test_latent_operator_row_stochastic(self):
        params = paper_dcsbm_params(80, Sparsity(degree_exponent=0.75), stream(8, "bm"))
        latent = sample_dcsbm_latents(params, rng_seed=8)
        assert latent.latent_operator.sum(axis=1) == pytest.approx(
            np.ones(80), abs=1e-10
        )
        assert np.all(np.diagonal(latent.latent_operator) == 0)

    def test_seed_reproducibility(self):
        params = paper_dcsbm_params(60, Sparsity(degree_exponent=0.5), stream(9, "bm"))
        one = sample_dcsbm_latents(params, rng_seed=11)
        two = sample_dcsbm_latents(params, rng_seed=11)
        assert np.array_equal(one.latent_positions, two.latent_positions)
        assert np.array_equal(one.expected_adjacency, two.expected_adjacency)

    def test_unreachable_density_errors(self):
        params = DcsbmParams(
            n=50,
            num_blocks=1,
            block_probs=[1.0],
            block_matrix=[[0.01]],
            degree_correction=np.ones(50),
            sparsity=Sparsity(mean_degree=40.0),
        )
        with pytest.raises(ValidationError):
            sample_dcsbm_latents(params, rng_seed=1)


class TestRealizeNetwork:
    @pytest.fixture(scope="class")
    def latent(self):
        params = paper_dcsbm_params(80, Sparsity(degree_exponent=0.75), stream(13, "bm"))
        return sample_dcsbm_latents(params, rng_seed=13)

    def test_none_family_returns_expectation(self, latent):
        obs = realize_network(latent, SubgammaSpec.none(), rng_seed=1)
        assert np.array_equal(obs.adjacency, latent.expected_adjacency)
        assert np.array_equal(obs.operator, latent.latent_operator)

    def test_poisson_moments(self):
        # fixed 5x5 expectation; empirical means within 3 standard errors
        xi = np.array([1.0, 1.5, 2.0, 0.8, 1.2])
        params = DcsbmParams(
            n=5,
            num_blocks=1,
            block_probs=[1.0],
            block_matrix=[[0.9]],
            degree_correction=xi,
            sparsity=Sparsity(rho=1.0),
        )
        latent = sample_dcsbm_latents(params, rng_seed=2)
        reps = 10_000
        iu = np.triu_indices(5, k=1)
        total = np.zeros(len(iu[0]))
        for rep in range(reps):
            total += realize_network(latent, SubgammaSpec.poisson(), rng_seed=rep).adjacency[iu]
        means = total / reps
        truth = latent.expected_adjacency[iu]
        se = np.sqrt(truth / reps)
        assert np.all(np.abs(means - truth) <= 3 * se)

    def test_gaussian_variance(self, latent):
        reps = 10_000
        draws = np.empty(reps)
        spec = SubgammaSpec.gaussian(1.0)
        for rep in range(reps):
            draws[rep] = realize_network(latent, spec, rng_seed=rep).adjacency[0, 1]
        centered = draws - latent.expected_adjacency[0, 1]
        assert abs(centered.var() - 1.0) < 0.05

    def test_centered_exponential_mean_zero(self, latent):
        reps = 4000
        spec = SubgammaSpec.centered_exponential(rate=2.0)
        draws = np.empty(reps)
        for rep in range(reps):
            draws[rep] = realize_network(latent, spec, rng_seed=rep).adjacency[1, 2]
        centered = draws - latent.expected_adjacency[1, 2]
        # mean-zero noise with sd 1/rate
        assert abs(centered.mean()) < 4 * 0.5 / np.sqrt(reps)

    def test_negative_rate_rejected(self):
        fake = sample_dcsbm_latents(
            DcsbmParams(
                n=4,
                num_blocks=1,
                block_probs=[1.0],
                block_matrix=[[0.5]],
                degree_correction=np.ones(4),
                sparsity=Sparsity(rho=1.0),
            ),
            rng_seed=3,
        )
        poisoned = fake.expected_adjacency.copy()
        poisoned[0, 1] = poisoned[1, 0] = -0.5
        bad = type(fake)(
            latent_positions=fake.latent_positions,
            expected_adjacency=poisoned,
            expected_degrees=fake.expected_degrees,
            latent_operator=fake.latent_operator,
        )
        with pytest.raises(ValidationError):
            realize_network(bad, SubgammaSpec.poisson(), rng_seed=0)

    def test_symmetric_zero_diagonal_row_stochastic(self, latent):
        obs = realize_network(latent, SubgammaSpec.poisson(), rng_seed=17)
        a = obs.adjacency
        assert np.array_equal(a, a.T)
        assert np.all(np.diagonal(a) == 0)
        live = obs.degrees > 0
        assert obs.operator[live].sum(axis=1) == pytest.approx(
            np.ones(live.sum()), abs=1e-10
        )
        assert np.all(obs.operator[~live] == 0)

    def test_identical_seeds_bit_identical(self, latent):
        one = realize_network(latent, SubgammaSpec.poisson(), rng_seed=23)
        two = realize_network(latent, SubgammaSpec.poisson(), rng_seed=23)
        assert np.array_equal(one.adjacency, two.adjacency)

    def test_contagion_system_eigenvalue_band(self, latent):
        # eigenvalues of I - b*G stay within (1-|b|, 1+|b|)
        for seed in range(5):
            obs = realize_network(latent, SubgammaSpec.poisson(), rng_seed=seed)
            for beta in (-0.9, 0.5, 0.9):
                eigs = np.linalg.eigvals(np.eye(80) - beta * obs.operator)
                assert np.all(eigs.real >= 1 - abs(beta) - 1e-10)
                assert np.all(eigs.real <= 1 + abs(beta) + 1e-10)


class TestSampleBlockMatrix:
    def test_ranges_and_psd(self):
        for seed in range(20):
            b = sample_block_matrix(5, stream(seed, "b"))
            assert np.all(np.linalg.eigvalsh(b) >= -1e-10)
            assert np.array_equal(b, b.T)
