"""Tests for the particle-filter posterior tracking."""

import numpy as np
import pytest

from triphase.angles import wrap_pi
from triphase.interferometer import (
    InterferometerSpec,
    PhasePair,
    likelihood,
    likelihood_many,
    sample_outcome,
)
from triphase.particle_filter import (
    DegeneratePosteriorError,
    ParticleSet,
    ResampleParams,
    UndefinedMeanError,
    bayes_update,
    circular_covariance,
    circular_mean,
    ess,
    export_trajectory,
    init_particles,
    liu_west_resample,
    run_estimation,
    summarize,
)
from triphase.priors import gaussian_prior, density

MU = np.array([1.1, 2.0])
PRIOR = gaussian_prior(MU, 0.25, 0.0)


def uniform_set(positions):
    positions = np.atleast_2d(positions)
    m = positions.shape[0]
    return ParticleSet(positions, np.full(m, 1.0 / m))


class TestParticleSet:
    def test_weights_must_normalize(self):
        with pytest.raises(ValueError, match="sum to 1"):
            ParticleSet(np.zeros((3, 2)), np.array([0.5, 0.2, 0.2]))

    def test_weights_must_be_nonnegative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            ParticleSet(np.zeros((3, 2)), np.array([1.5, -0.3, -0.2]))

    def test_positions_wrapped(self):
        ps = uniform_set([[-0.5, 7.0]])
        assert 0 <= ps.positions[0, 0] < 2 * np.pi
        assert 0 <= ps.positions[0, 1] < 2 * np.pi


class TestInitParticles:
    def test_uniform_weights_and_full_ess(self):
        ps = init_particles(PRIOR, 400, np.random.default_rng(0))
        np.testing.assert_allclose(ps.weights, 1 / 400)
        np.testing.assert_allclose(ess(ps), 400)

    def test_sample_covariance_tracks_prior(self):
        """Sampling-error oracle: m = 1600 keeps the empirical covariance near gamma."""
        ps = init_particles(PRIOR, 1600, np.random.default_rng(1))
        emp = np.cov(ps.positions.T, ddof=1)
        err = np.linalg.norm(emp - PRIOR.gamma) / np.linalg.norm(PRIOR.gamma)
        assert err < 0.15

    def test_minimum_count(self):
        with pytest.raises(ValueError, match="2 particles"):
            init_particles(PRIOR, 1, np.random.default_rng(0))


class TestBayesUpdate:
    def test_constant_likelihood_keeps_weights(self, flat_spec):
        ps = init_particles(PRIOR, 64, np.random.default_rng(2))
        updated = bayes_update(ps, 0, flat_spec)
        np.testing.assert_allclose(updated.weights, ps.weights)

    def test_zero_likelihood_particle_gets_zero_weight(self):
        # Mach-Zehnder on the first two arms: outcome 1 has exactly zero
        # probability at phi1 = 0 but not at phi1 = pi.
        r = 1 / np.sqrt(2)
        h = np.array([[r, r, 0], [r, -r, 0], [0, 0, 1.0]])
        mz = InterferometerSpec(u_a=h, u_b=h, input_port=0)
        ps = uniform_set([[0.0, 0.0], [np.pi, 0.0]])
        assert likelihood_many(mz, ps.positions)[0, 1] == 0.0
        updated = bayes_update(ps, 1, mz)
        assert updated.weights[0] == 0.0
        np.testing.assert_allclose(updated.weights[1], 1.0)

    def test_all_zero_weights_raise(self, flat_spec):
        ps = init_particles(PRIOR, 16, np.random.default_rng(3))
        with pytest.raises(DegeneratePosteriorError):
            bayes_update(ps, 2, flat_spec)

    def test_sequential_equals_batch(self, dft_spec):
        """20 sequential renormalized updates equal one product-form update."""
        rng = np.random.default_rng(4)
        ps = init_particles(PRIOR, 256, rng)
        outcomes = rng.integers(0, 3, size=20)
        seq = ps
        for x in outcomes:
            seq = bayes_update(seq, int(x), dft_spec)
        probs = likelihood_many(dft_spec, ps.positions)
        batch = ps.weights * np.prod(probs[:, outcomes], axis=1)
        batch /= batch.sum()
        np.testing.assert_allclose(seq.weights, batch, rtol=1e-10, atol=1e-300)


class TestEss:
    def test_uniform(self):
        assert ess(uniform_set(np.zeros((10, 2)))) == pytest.approx(10)

    def test_one_hot(self):
        w = np.zeros(8)
        w[3] = 1.0
        assert ess(ParticleSet(np.zeros((8, 2)), w)) == pytest.approx(1.0)

    def test_direct_arithmetic(self):
        w = np.array([0.5, 0.25, 0.25, 0, 0, 0])
        assert ess(ParticleSet(np.zeros((6, 2)), w)) == pytest.approx(8 / 3)


class TestCircularStatistics:
    def test_mean_of_point_mass(self):
        ps = uniform_set(np.tile([1.1, 2.0], (5, 1)))
        np.testing.assert_allclose(circular_mean(ps), [1.1, 2.0], atol=1e-12)

    def test_mean_across_wrap(self):
        ps = uniform_set([[0.1, 1.0], [2 * np.pi - 0.1, 1.0]])
        mean = circular_mean(ps)
        np.testing.assert_allclose(mean[0], 0.0, atol=1e-12)

    def test_tight_cluster_matches_linear_statistics(self):
        rng = np.random.default_rng(5)
        pos = rng.normal([3.0, 3.5], 0.01, size=(500, 2))
        ps = uniform_set(pos)
        np.testing.assert_allclose(circular_mean(ps), pos.mean(axis=0), atol=1e-6)
        lin_cov = np.cov(pos.T, ddof=0)
        np.testing.assert_allclose(circular_covariance(ps), lin_cov, atol=1e-9)

    def test_spread_particles_have_no_mean(self):
        ps = uniform_set([[0.0, 1.0], [np.pi, 1.0]])
        with pytest.raises(UndefinedMeanError):
            circular_mean(ps)

    def test_covariance_of_point_mass_is_zero(self):
        ps = uniform_set(np.tile([0.3, 5.9], (4, 1)))
        np.testing.assert_allclose(circular_covariance(ps), np.zeros((2, 2)), atol=1e-20)

    def test_covariance_symmetric_psd(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            pos = rng.uniform(2.0, 3.0, size=(50, 2))
            w = rng.random(50)
            ps = ParticleSet(pos, w / w.sum())
            cov = circular_covariance(ps)
            assert cov[0, 1] == cov[1, 0]
            assert np.linalg.eigvalsh(cov).min() >= -1e-10


class TestLiuWestResample:
    def test_resets_to_uniform_weights(self):
        rng = np.random.default_rng(7)
        ps = init_particles(PRIOR, 300, rng)
        w = np.exp(-np.arange(300) / 40.0)
        ps = ParticleSet(ps.positions, w / w.sum())
        out = liu_west_resample(ps, ResampleParams(), rng)
        np.testing.assert_allclose(ess(out), 300)

    def test_a_equal_one_is_pure_bootstrap(self):
        rng = np.random.default_rng(8)
        ps = init_particles(PRIOR, 200, rng)
        out = liu_west_resample(ps, ResampleParams(a=1.0), rng)
        src = {tuple(np.round(row, 12)) for row in ps.positions}
        assert all(tuple(np.round(row, 12)) in src for row in out.positions)

    def test_moments_preserved_on_average(self):
        """Shrinkage construction preserves the first two moments in expectation."""
        rng = np.random.default_rng(9)
        ps = init_particles(PRIOR, 800, rng)
        w = np.exp(-0.5 * np.sum((ps.positions - MU) ** 2, axis=1) / 0.02)
        ps = ParticleSet(ps.positions, w / w.sum())
        mean0 = circular_mean(ps)
        cov0 = circular_covariance(ps)
        means, covs = [], []
        for _ in range(100):
            out = liu_west_resample(ps, ResampleParams(), rng)
            means.append(circular_mean(out))
            covs.append(circular_covariance(out))
        mean_err = np.linalg.norm(np.mean(means, axis=0) - mean0)
        cov_err = np.linalg.norm(np.mean(covs, axis=0) - cov0) / np.linalg.norm(cov0)
        assert mean_err < 0.05 * np.sqrt(np.trace(cov0))
        assert cov_err < 0.05

    def test_degenerate_cloud_gets_jitter(self):
        rng = np.random.default_rng(10)
        ps = uniform_set(np.tile([1.0, 2.0], (50, 1)))
        out = liu_west_resample(ps, ResampleParams(), rng)
        assert np.all(np.isfinite(out.positions))
        spread = out.positions.std(axis=0)
        assert np.all(spread < 1e-5)  # jitter floor is 1e-12 variance

    def test_params_validated(self):
        with pytest.raises(ValueError, match="a must"):
            ResampleParams(a=1.5)
        with pytest.raises(ValueError, match="threshold_fraction"):
            ResampleParams(threshold_fraction=0.0)


class TestRunEstimation:
    def test_zero_probes_summarizes_prior(self, dft_spec):
        rng = np.random.default_rng(11)
        out = run_estimation(dft_spec, PRIOR, PhasePair(*MU), 0, rng)
        assert len(out) == 1
        assert out[0].total_variance == pytest.approx(2 * 0.25**2, rel=0.10)

    def test_fixed_seed_reproducible(self, dft_spec):
        t1 = run_estimation(dft_spec, PRIOR, PhasePair(*MU), 30, np.random.default_rng(12))
        t2 = run_estimation(dft_spec, PRIOR, PhasePair(*MU), 30, np.random.default_rng(12))
        for a, b in zip(t1, t2):
            np.testing.assert_array_equal(a.phi_hat, b.phi_hat)
            np.testing.assert_array_equal(a.sigma, b.sigma)
            assert a.ess == b.ess

    def test_summary_count_and_ess_range(self, dft_spec):
        m = 256
        out = run_estimation(dft_spec, PRIOR, PhasePair(*MU), 40,
                             np.random.default_rng(13), m=m)
        assert len(out) == 41
        for s in out:
            assert 1.0 - 1e-9 <= s.ess <= m + 1e-9

    def test_posterior_contraction(self, dft_spec):
        """Mean total variance at N = 50 is below the value at N = 5 (100 runs)."""
        v5, v50 = [], []
        for r in range(100):
            rng = np.random.default_rng(140_000 + r)
            truth = PhasePair(*np.random.default_rng(150_000 + r).normal(MU, 0.25))
            traj = run_estimation(dft_spec, PRIOR, truth, 50, rng, m=400)
            v5.append(traj[5].total_variance)
            v50.append(traj[50].total_variance)
        assert np.mean(v50) < np.mean(v5)

    def test_matches_dense_grid_posterior(self, dft_spec):
        """Grid-posterior oracle: 400x400 Bayes update on the same outcome stream."""
        rng = np.random.default_rng(14)
        m = 1600
        params = ResampleParams()
        ps = init_particles(PRIOR, m, rng)

        half = 5 * 0.25
        g1 = np.linspace(MU[0] - half, MU[0] + half, 400)
        g2 = np.linspace(MU[1] - half, MU[1] + half, 400)
        gx, gy = np.meshgrid(g1, g2, indexing="ij")
        grid = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        post = np.asarray(density(PRIOR, grid))
        post /= post.sum()
        grid_p = likelihood_many(dft_spec, grid)

        truth = PhasePair(*MU)
        true_dist = likelihood(dft_spec, truth)
        from triphase.particle_filter import bayes_update as bu, ess as ess_fn
        for _ in range(20):
            x = sample_outcome(true_dist, rng)
            ps = bu(ps, x, dft_spec)
            if ess_fn(ps) < 0.5 * m:
                ps = liu_west_resample(ps, params, rng)
            post = post * grid_p[:, x]
            post /= post.sum()

        pf = summarize(ps)
        grid_mean = post @ grid
        dev = grid - grid_mean
        grid_cov = (post[:, None] * dev).T @ dev
        assert np.max(np.abs(wrap_pi(pf.phi_hat - grid_mean))) < 0.02
        assert abs(pf.total_variance - np.trace(grid_cov)) < 0.10 * np.trace(grid_cov)

    def test_negative_probe_count_rejected(self, dft_spec):
        with pytest.raises(ValueError, match=">= 0"):
            run_estimation(dft_spec, PRIOR, PhasePair(*MU), -1, np.random.default_rng(0))


class TestTrajectoryExport:
    def test_round_trip(self, dft_spec, tmp_path):
        out = run_estimation(dft_spec, PRIOR, PhasePair(*MU), 5, np.random.default_rng(15))
        path = tmp_path / "traj.csv"
        export_trajectory(out, path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "k,phi1_hat,phi2_hat,sigma11,sigma12,sigma22,ess"
        assert len(rows) == len(out) + 1
        got = [float(v) for v in rows[3].split(",")]
        assert got[0] == 2
        assert got[1] == out[2].phi_hat[0]
        assert got[4] == out[2].sigma[0, 1]
        assert got[6] == out[2].ess
