import math
import time

import numpy as np
import pytest

import handover as h
from handover.spgp import FlowBank, inducing_indices

from .conftest import TEST_KERNEL, random_walk_trajectory
from .oracles import naive_gp_predict


class TestFiniteDifferences:
    def test_stationary_is_zero(self):
        poses = np.tile([1.0, 2.0], (20, 1))
        v = h.finite_difference_velocities(poses, 30.0)
        np.testing.assert_allclose(v, 0.0)

    def test_uniform_motion_exact(self):
        t = np.arange(40) / 30.0
        poses = np.stack([0.7 * t, np.zeros_like(t)], axis=1)
        v = h.finite_difference_velocities(poses, 30.0)
        np.testing.assert_allclose(v[:, 0], 0.7, atol=1e-9)
        np.testing.assert_allclose(v[:, 1], 0.0, atol=1e-9)

    def test_sinusoid_second_order(self):
        # central differences: error <= (dt^2 / 6) * max|f'''|
        rate = 30.0
        t = np.arange(150) / rate
        omega = 2 * np.pi * 0.8
        poses = np.stack([np.sin(omega * t), np.zeros_like(t)], axis=1)
        v = h.finite_difference_velocities(poses, rate)
        truth = omega * np.cos(omega * t)
        bound = (1.0 / rate) ** 2 / 6.0 * omega ** 3 * 1.05
        interior_err = np.max(np.abs(v[1:-1, 0] - truth[1:-1]))
        assert interior_err <= bound

    def test_length_checked(self):
        with pytest.raises(ValueError):
            h.finite_difference_velocities(np.zeros((1, 2)), 30.0)


class TestInducingSelection:
    def test_ratio_04_on_100(self):
        idx = inducing_indices(100, 0.4)
        assert len(idx) == 40
        assert idx[0] == 0 and idx[-1] == 99
        # second index sits near 2.5 (time-uniform spread over [0, 99])
        assert idx[1] in (2, 3)

    def test_ratio_one_takes_all(self):
        idx = inducing_indices(57, 1.0)
        np.testing.assert_array_equal(idx, np.arange(57))

    def test_minimum_two(self):
        assert len(inducing_indices(50, 0.001)) == 2

    def test_invalid_ratio(self):
        with pytest.raises(ValueError):
            inducing_indices(50, 0.0)
        with pytest.raises(ValueError):
            inducing_indices(50, 1.2)


class TestKernelParams:
    def test_positive_required(self):
        with pytest.raises(ValueError):
            h.KernelParams((0.0, 1.0), 1.0, 1e-4)
        with pytest.raises(ValueError):
            h.KernelParams((1.0, 1.0), -1.0, 1e-4)


class TestFitAndPredict:
    def test_interpolates_training_velocities(self):
        # well-spaced samples keep the kernel matrix sane as noise -> 0
        rng = np.random.default_rng(0)
        dense = random_walk_trajectory(rng, length=52)
        poses = dense.poses[::4]
        kp = h.KernelParams((0.15, 0.15), 1.0, 1e-10)
        model = h.fit_flow(poses, 1.0, kp, sample_rate_hz=30.0 / 4)
        vels = h.finite_difference_velocities(poses, 30.0 / 4)
        for i in (0, 5, 9, 12):
            mean, var = model.predict(poses[i])
            np.testing.assert_allclose(mean, vels[i], atol=1e-6)

    def test_prior_reversion_far_away(self):
        rng = np.random.default_rng(1)
        traj = random_walk_trajectory(rng, length=60)
        model = h.fit_flow(traj, 0.4, TEST_KERNEL)
        far = traj.poses[0] + np.array([30.0, -25.0])
        mean, var = model.predict(far)
        assert abs(var - TEST_KERNEL.signal_variance) < 0.01 * TEST_KERNEL.signal_variance
        np.testing.assert_allclose(mean, 0.0, atol=1e-6)

    def test_oracle_equivalence_ratio_one(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            traj = random_walk_trajectory(rng, length=int(rng.integers(30, 70)))
            kp = h.KernelParams((rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)),
                                rng.uniform(0.3, 2.0), rng.uniform(1e-4, 1e-2))
            model = h.fit_flow(traj, 1.0, kp)
            queries = np.vstack([traj.poses[::5],
                                 traj.poses[:4] + rng.normal(0, 0.3, (4, 2))])
            mean_o, var_o = naive_gp_predict(traj.poses,
                                             h.finite_difference_velocities(traj),
                                             kp.lengthscales, kp.signal_variance,
                                             kp.noise_variance, queries)
            mean_s, var_s = model.predict_batch(queries)
            assert np.max(np.abs(mean_s - mean_o) / (1 + np.abs(mean_o))) <= 1e-8
            assert np.max(np.abs(var_s - np.maximum(var_o, 0)) / (1 + np.abs(var_o))) <= 1e-8

    def test_variance_nonnegative_many_queries(self):
        rng = np.random.default_rng(3)
        traj = random_walk_trajectory(rng, length=80)
        model = h.fit_flow(traj, 0.3, TEST_KERNEL)
        qs = rng.uniform(-6, 6, size=(200_000, 2))
        _, var = model.predict_batch(qs)
        assert np.all(var >= 0.0)

    def test_fit_deterministic(self):
        rng = np.random.default_rng(4)
        traj = random_walk_trajectory(rng, length=64)
        m1 = h.fit_flow(traj, 0.4, TEST_KERNEL)
        m2 = h.fit_flow(traj, 0.4, TEST_KERNEL)
        np.testing.assert_array_equal(m1.inducing_idx, m2.inducing_idx)
        q = np.array([[0.3, -0.2]])
        np.testing.assert_array_equal(m1.predict_batch(q)[0], m2.predict_batch(q)[0])

    def test_duplicate_poses_survive_fitting(self):
        # a pause duplicates poses; jitter must keep the fit finite
        t = np.arange(60) / 30.0
        poses = np.concatenate([np.tile([0.5, 0.5], (30, 1)),
                                np.stack([np.linspace(0.5, 1.5, 30),
                                          np.full(30, 0.5)], axis=1)])
        traj = h.Trajectory(t, poses, 30.0)
        model = h.fit_flow(traj, 0.5, TEST_KERNEL)
        mean, var = model.predict(np.array([0.5, 0.5]))
        assert np.all(np.isfinite(mean)) and math.isfinite(var)

    def test_invalid_ratio_rejected(self):
        rng = np.random.default_rng(5)
        traj = random_walk_trajectory(rng)
        with pytest.raises(ValueError):
            h.fit_flow(traj, 0.0, TEST_KERNEL)

    def test_prediction_cost_increases_with_ratio(self):
        rng = np.random.default_rng(6)
        trajs = [random_walk_trajectory(rng, length=120) for _ in range(6)]
        queries = rng.uniform(-2, 2, size=(1500, 2))
        medians = []
        for ratio in (0.1, 0.2, 0.4, 0.7, 1.0):
            models = [h.fit_flow(t, ratio, TEST_KERNEL) for t in trajs]
            start = time.perf_counter()
            for m in models:
                m.predict_batch(queries)
            medians.append(time.perf_counter() - start)
        # trend: strictly cheaper at the sparse end, tolerate one local inversion
        assert medians[-1] > medians[0]
        inversions = sum(1 for a, b in zip(medians, medians[1:]) if b < a * 0.9)
        assert inversions <= 1


class TestFlowBank:
    def test_matches_single_model_predictions(self, small_context):
        rng = np.random.default_rng(7)
        for _ in range(5):
            q = rng.uniform(-2, 3, 2)
            means, variances = small_context.bank.predict_all(q)
            i = int(rng.integers(len(small_context.flow_models)))
            mean_i, var_i = small_context.flow_models[i].predict(q)
            np.testing.assert_allclose(means[i], mean_i, atol=1e-10)
            assert abs(variances[i] - var_i) <= 1e-10

    def test_requires_shared_kernel(self):
        rng = np.random.default_rng(8)
        t1, t2 = (random_walk_trajectory(rng) for _ in range(2))
        m1 = h.fit_flow(t1, 0.4, TEST_KERNEL)
        other = h.KernelParams((0.2, 0.2), 0.5, 1e-3)
        m2 = h.fit_flow(t2, 0.4, other)
        with pytest.raises(ValueError):
            FlowBank([m1, m2])


class TestKernelFit:
    def test_recovers_sane_hyperparameters(self, small_dataset):
        kp = h.fit_kernel_params([p.receiver for p in small_dataset.pairs], seed=0)
        assert 0.05 <= kp.lengthscales[0] <= 5.0
        assert 0.05 <= kp.lengthscales[1] <= 5.0
        assert kp.signal_variance > 0 and kp.noise_variance > 0
        # data is ~1 m/s walking: signal variance within an order of magnitude
        assert 0.05 < kp.signal_variance < 10.0
