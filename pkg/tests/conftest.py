import numpy as np
import pytest

import handover as h

TEST_KERNEL = h.KernelParams(lengthscales=(0.35, 0.2), signal_variance=0.8,
                             noise_variance=2e-3)


@pytest.fixture(scope="session")
def small_dataset():
    return h.generate_synthetic(h.GeneratorConfig(n_id=36, n_ood=8), seed=7)


@pytest.fixture(scope="session")
def small_context(small_dataset):
    return h.fit_context(small_dataset, inducing_ratio=0.4, kernel=TEST_KERNEL)


@pytest.fixture(scope="session")
def rollout_context():
    ds = h.generate_synthetic(h.GeneratorConfig(n_id=60, n_ood=8), seed=11)
    return h.fit_context(ds, inducing_ratio=0.4, kernel=TEST_KERNEL)


def random_walk_trajectory(rng, length=60, rate=30.0):
    """Smooth 2D path with gentle curvature, for GP fitting tests."""
    t = np.arange(length) / rate
    speed = rng.uniform(0.6, 1.3)
    heading = rng.uniform(0, 2 * np.pi)
    curve = rng.uniform(-0.8, 0.8)
    angles = heading + curve * t + 0.1 * np.sin(2 * np.pi * rng.uniform(0.2, 0.5) * t)
    steps = np.stack([np.cos(angles), np.sin(angles)], axis=1) * (speed / rate)
    poses = np.cumsum(steps, axis=0) + rng.uniform(-2, 2, size=2)
    return h.Trajectory(t, poses, rate)
