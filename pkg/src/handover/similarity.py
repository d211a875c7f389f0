"""Distance and similarity between an observed receiver path and stored flows.

For each stored trajectory's flow model, the distance averages a per-sample
mix of two terms along the observation: the cosine distance between the
observed velocity and the model's predicted velocity (direction agreement,
weighted by kappa) plus the model's predictive variance (position novelty).
Similarity is exp(-distance), in (0, 1].

A sliding window caps how much history each evaluation touches; window=None
evaluates the full observation.  `StreamingDistance` keeps per-sample model
predictions cached across ticks so a live observation pays one batched GP
query per new sample instead of re-querying its whole history.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dataset import Trajectory
from .spgp import FlowBank, FlowModel, finite_difference_velocities


@dataclass(frozen=True)
class SimilarityConfig:
    """kappa weights the cosine term against the variance term; velocities
    shorter than min_speed give no directional evidence and score the
    neutral cosine distance 1."""

    kappa: float = 1.0
    min_speed: float = 0.05
    window: int | None = 90

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        if self.min_speed <= 0:
            raise ValueError(f"min_speed must be positive, got {self.min_speed}")
        if self.window is not None and self.window < 1:
            raise ValueError(f"window must be positive or None, got {self.window}")


@dataclass(frozen=True)
class ObservedTrajectory:
    """Receiver poses seen so far plus matching finite-difference velocities."""

    poses: np.ndarray
    velocities: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        poses = np.ascontiguousarray(np.asarray(self.poses, dtype=np.float64))
        vels = np.ascontiguousarray(np.asarray(self.velocities, dtype=np.float64))
        poses.setflags(write=False)
        vels.setflags(write=False)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "velocities", vels)
        if len(poses) == 0:
            raise ValueError("observation is empty")
        if poses.shape != vels.shape:
            raise ValueError("poses and velocities must have matching shapes")

    @classmethod
    def from_poses(cls, poses, sample_rate_hz: float) -> "ObservedTrajectory":
        poses = np.asarray(poses, dtype=np.float64)
        if len(poses) < 2:
            raise ValueError("need at least 2 observed samples")
        return cls(poses, finite_difference_velocities(poses, sample_rate_hz),
                   sample_rate_hz)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, upto: int | None = None) -> "ObservedTrajectory":
        poses = traj.poses if upto is None else traj.poses[:upto]
        return cls.from_poses(poses, traj.sample_rate_hz)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def current_pose(self) -> np.ndarray:
        return self.poses[-1]


def cosine_distance(a, b, min_speed: float = 1e-12) -> float:
    """1 - cos(angle between a and b), in [0, 2]; 1 if either norm < min_speed."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < min_speed or nb < min_speed:
        return 1.0
    return float(np.clip(1.0 - float(a @ b) / (na * nb), 0.0, 2.0))


def _cosine_terms(obs_vel: np.ndarray, pred_mean: np.ndarray, min_speed: float) -> np.ndarray:
    """Vectorized cosine distances: obs_vel (T, d) against pred_mean (..., T, d)."""
    na = np.linalg.norm(obs_vel, axis=-1)
    nb = np.linalg.norm(pred_mean, axis=-1)
    dot = np.sum(obs_vel * pred_mean, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.clip(1.0 - dot / (na * nb), 0.0, 2.0)
    return np.where((na < min_speed) | (nb < min_speed), 1.0, cos)


def _window_slice(length: int, window: int | None) -> slice:
    if window is None:
        return slice(0, length)
    return slice(max(0, length - window), length)


def trajectory_distance(obs: ObservedTrajectory, model: FlowModel,
                        config: SimilarityConfig) -> float:
    """Mean per-sample (kappa * cosine + variance) along the observation."""
    sl = _window_slice(len(obs), config.window)
    poses, vels = obs.poses[sl], obs.velocities[sl]
    mean, var = model.predict_batch(poses)
    terms = config.kappa * _cosine_terms(vels, mean, config.min_speed) + var
    return float(np.mean(terms))


def similarity(obs: ObservedTrajectory, model: FlowModel,
               config: SimilarityConfig) -> float:
    """exp(-distance): 1 iff the distance is 0, strictly decreasing in it."""
    return float(np.exp(-trajectory_distance(obs, model, config)))


def rank_all(obs: ObservedTrajectory, models, config: SimilarityConfig,
             latency_log: list | None = None):
    """Similarity of the observation to every model, sorted descending.

    Ties keep the lower model index first.  If latency_log is a list, the
    wall-clock seconds for the full ranking are appended to it.
    """
    models = list(models)
    if not models:
        raise ValueError("rank_all needs at least one model")
    start = time.perf_counter()
    sims = [similarity(obs, m, config) for m in models]
    order = sorted(range(len(models)), key=lambda i: (-sims[i], i))
    ranked = [(i, sims[i]) for i in order]
    if latency_log is not None:
        latency_log.append(time.perf_counter() - start)
    return ranked


class StreamingDistance:
    """Incremental trajectory distances for a growing observation.

    Push one receiver pose per tick; each pose costs one batched GP query
    across all models in the bank.  A sample's per-model term is frozen once
    its central-difference velocity is final (one tick after arrival) and
    folded into a running sum; only the newest sample's term, whose velocity
    is still one-sided, is recomputed per query.  distances() therefore
    matches trajectory_distance applied to the equivalent ObservedTrajectory
    up to floating-point summation order.
    """

    def __init__(self, bank: FlowBank, config: SimilarityConfig, sample_rate_hz: float):
        self.bank = bank
        self.config = config
        self.rate = sample_rate_hz
        self._n = 0                      # samples pushed so far
        self._oldest_settled = 0         # global index of first retained term row
        self._terms: list[np.ndarray] = []   # settled term rows (N,), aligned at oldest
        self._settled_sum = np.zeros(len(bank))
        self._last: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []  # (pose, mean, var) of newest 2
        self._prev_prev: np.ndarray | None = None  # pose two behind the newest

    def __len__(self) -> int:
        return self._n

    def _term(self, vel: np.ndarray, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
        cos = _cosine_terms(vel, mean, self.config.min_speed)
        return self.config.kappa * cos + var

    def push(self, pose) -> None:
        pose = np.asarray(pose, dtype=np.float64)
        mean, var = self.bank.predict_all(pose)
        self._last.append((pose, mean, var))
        self._n += 1
        if self._n >= 2:
            # the previous sample's velocity is now final; settle its term
            (p_prev, m_prev, v_prev) = self._last[-2]
            if self._n == 2:
                vel = (pose - p_prev) * self.rate            # first sample: forward
            else:
                p_before = self._prev_prev
                vel = (pose - p_before) * (self.rate / 2.0)  # interior: central
            row = self._term(vel, m_prev, v_prev)
            self._terms.append(row)
            self._settled_sum += row
        self._prev_prev = self._last[-2][0] if len(self._last) >= 2 else None
        if len(self._last) > 2:
            self._last.pop(0)
        if self.config.window is not None:
            start = self._n - self.config.window
            while self._oldest_settled < start and self._terms:
                self._settled_sum -= self._terms.pop(0)
                self._oldest_settled += 1

    def current_pose(self) -> np.ndarray:
        return self._last[-1][0]

    def distances(self) -> np.ndarray:
        """Per-model distance over the configured window, shape (N,)."""
        if self._n < 2:
            raise ValueError("need at least 2 pushed samples")
        pose, mean, var = self._last[-1]
        vel = (pose - self._last[-2][0]) * self.rate          # newest: backward
        last_term = self._term(vel, mean, var)
        count = self._n if self.config.window is None else min(self._n, self.config.window)
        return (self._settled_sum + last_term) / count

    def similarities(self) -> np.ndarray:
        return np.exp(-self.distances())
