"""Giver-trajectory prediction from the most similar stored handovers.

Every observation tick, the observed receiver path is scored against all
stored flow models; the top-k pairs are time-aligned at the stored sample
closest to the current receiver pose, and their giver segments are blended
with normalized-similarity weights into one predicted wrist trajectory that
starts at the current time and runs as far as every selected segment allows.
Successive predictions can be smoothed by an exponentially decaying
temporal ensemble before the controller reads its target from them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import GiverPose, HandoverDataset, Trajectory
from .similarity import (ObservedTrajectory, SimilarityConfig, StreamingDistance,
                         _cosine_terms, _window_slice)
from .spgp import FlowBank, FlowModel, KernelParams, fit_flow, fit_kernel_params


class HandoverComplete(Exception):
    """Every selected source is aligned at its final sample: nothing left to predict."""


@dataclass(frozen=True)
class PredictionContext:
    """Fitted dataset bundle: one flow model per stored pair plus scoring config.

    Immutable after construction; predictions are pure functions of
    (context, observation) and safe to run concurrently.
    """

    dataset: HandoverDataset
    flow_models: tuple[FlowModel, ...]
    sim_config: SimilarityConfig = SimilarityConfig()
    k_neighbors: int = 10
    bank: FlowBank = None

    def __post_init__(self):
        object.__setattr__(self, "flow_models", tuple(self.flow_models))
        if len(self.flow_models) != self.dataset.n:
            raise ValueError("need exactly one flow model per dataset pair")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")
        if self.bank is None:
            object.__setattr__(self, "bank", FlowBank(self.flow_models))

    @property
    def sample_rate_hz(self) -> float:
        return self.dataset.pairs[0].receiver.sample_rate_hz


def fit_context(dataset: HandoverDataset, inducing_ratio: float = 0.4,
                kernel: KernelParams | None = None,
                sim_config: SimilarityConfig = SimilarityConfig(),
                k_neighbors: int = 10, kernel_seed: int = 0) -> PredictionContext:
    """Fit flow models for every pair; kernel=None triggers the shared
    marginal-likelihood fit on a trajectory subsample."""
    if dataset.n == 0:
        raise ValueError("cannot fit a context on an empty dataset")
    if kernel is None:
        kernel = fit_kernel_params([p.receiver for p in dataset.pairs], seed=kernel_seed)
    models = tuple(fit_flow(p.receiver, inducing_ratio, kernel) for p in dataset.pairs)
    return PredictionContext(dataset=dataset, flow_models=models,
                             sim_config=sim_config, k_neighbors=k_neighbors)


@dataclass(frozen=True)
class PredictedTrajectory:
    """Blended future giver poses from the current tick onward.

    poses[i] is the target i observation samples into the future (index 0 is
    the current-time target).  weights maps each selected pair index to its
    normalized similarity weight; alignments maps it to the stored time
    index the segment was extracted from.
    """

    poses: np.ndarray
    sample_rate_hz: float
    weights: dict[int, float]
    alignments: dict[int, int]

    def __post_init__(self):
        poses = np.ascontiguousarray(np.asarray(self.poses, dtype=np.float64))
        poses.setflags(write=False)
        object.__setattr__(self, "poses", poses)
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total!r}")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be non-negative")

    @property
    def horizon(self) -> int:
        return len(self.poses)

    def pose_at(self, offset: int) -> np.ndarray:
        """Pose at a sample offset, clamped to the final available sample."""
        return self.poses[min(max(offset, 0), self.horizon - 1)]


def align_time(obs_current_pose, stored: Trajectory) -> int:
    """Index of the stored receiver sample closest to the current pose (ties: earliest)."""
    q = obs_current_pose.as_array() if hasattr(obs_current_pose, "as_array") \
        else np.asarray(obs_current_pose, dtype=np.float64)
    d = np.linalg.norm(stored.poses - q, axis=1)
    return int(np.argmin(d))


def _stable_weights(distances: np.ndarray) -> np.ndarray:
    """Normalized exp(-d) weights computed via a max-shift so extreme
    distances cannot underflow the normalization."""
    shifted = np.exp(-(distances - distances.min()))
    return shifted / shifted.sum()


def _select_top_k(distances: np.ndarray, k: int, exclude=()) -> np.ndarray:
    order = np.argsort(distances, kind="stable")   # ties keep the lower index
    if exclude:
        order = order[~np.isin(order, list(exclude))]
    if len(order) == 0:
        raise ValueError("no candidate trajectories left after exclusions")
    return order[: min(k, len(order))]


def _blend(ctx: PredictionContext, distances: np.ndarray, current_pose: np.ndarray,
           exclude=()) -> PredictedTrajectory:
    selected = _select_top_k(distances, ctx.k_neighbors, exclude)
    weights = _stable_weights(distances[selected])

    alignments, remaining = [], []
    for idx in selected:
        receiver = ctx.dataset.pairs[idx].receiver
        t_k = align_time(current_pose, receiver)
        alignments.append(t_k)
        remaining.append(len(receiver) - t_k)
    horizon = int(min(remaining))
    if all(r == 1 for r in remaining):
        raise HandoverComplete("all aligned samples are at their trajectory ends")

    blended = np.zeros((horizon, 3))
    for w, idx, t_k in zip(weights, selected, alignments):
        blended += w * ctx.dataset.pairs[idx].giver.poses[t_k:t_k + horizon]
    return PredictedTrajectory(
        poses=blended,
        sample_rate_hz=ctx.sample_rate_hz,
        weights={int(i): float(w) for i, w in zip(selected, weights)},
        alignments={int(i): int(t) for i, t in zip(selected, alignments)},
    )


def predict_trajectory(ctx: PredictionContext, obs: ObservedTrajectory,
                       exclude=()) -> PredictedTrajectory:
    """Score, select, align, and blend: one full prediction for an observation.

    exclude removes pair indices from selection (used when replaying a
    pair against a context that contains it).
    """
    sl = _window_slice(len(obs), ctx.sim_config.window)
    poses, vels = obs.poses[sl], obs.velocities[sl]
    n = len(ctx.flow_models)
    terms = np.empty((n, len(poses)))
    for t, pose in enumerate(poses):
        mean, var = ctx.bank.predict_all(pose)
        terms[:, t] = ctx.sim_config.kappa * _cosine_terms(vels[t], mean,
                                                           ctx.sim_config.min_speed) + var
    distances = terms.mean(axis=1)
    return _blend(ctx, distances, obs.current_pose, exclude)


class EnsembleBuffer:
    """Temporal ensemble over recent predictions.

    Predictions issued on successive ticks overlap in absolute target time;
    a query averages them at the same target time with weights decay^age
    (age in ticks), normalized.  At most chunk_size predictions are kept.
    Single-writer: push and query from one control thread per session.
    """

    def __init__(self, chunk_size: int = 30, decay: float = 0.8):
        if chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if not (0.0 < decay <= 1.0):
            raise ValueError("decay must be in (0, 1]")
        self.chunk_size = chunk_size
        self.decay = decay
        self._entries: list[tuple[int, PredictedTrajectory]] = []
        self._tick = -1

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, pred: PredictedTrajectory) -> int:
        self._tick += 1
        self._entries.append((self._tick, pred))
        if len(self._entries) > self.chunk_size:
            self._entries.pop(0)
        return self._tick

    def query(self, offset: int) -> np.ndarray:
        """Weighted average pose at `offset` samples past the newest tick."""
        if not self._entries:
            raise ValueError("ensemble buffer is empty")
        target = self._tick + max(offset, 0)
        acc = np.zeros(3)
        total = 0.0
        for issued, pred in self._entries:
            w = self.decay ** (self._tick - issued)
            acc += w * pred.pose_at(target - issued)
            total += w
        return acc / total


def ensemble_push_and_query(buf: EnsembleBuffer, pred: PredictedTrajectory,
                            query_offset: int) -> GiverPose:
    """Insert a fresh prediction and read the smoothed pose at an offset."""
    buf.push(pred)
    x, y, z = buf.query(query_offset)
    return GiverPose(x, y, max(z, 0.0))


def forecast_pose(source, t_f: float, sample_rate_hz: float) -> GiverPose:
    """Target pose t_f seconds ahead, clamped to the available horizon.

    source is a PredictedTrajectory or an EnsembleBuffer.
    """
    if t_f < 0:
        raise ValueError("forecast time must be non-negative")
    offset = int(round(t_f * sample_rate_hz))
    if isinstance(source, EnsembleBuffer):
        x, y, z = source.query(offset)
    else:
        x, y, z = source.pose_at(offset)
    return GiverPose(float(x), float(y), float(max(z, 0.0)))


class StreamingPredictor:
    """Tick-by-tick replay helper: one batched GP query per new sample.

    Produces the same predictions as predict_trajectory on the growing
    observation, at a per-tick cost independent of the history length.
    """

    def __init__(self, ctx: PredictionContext):
        self.ctx = ctx
        self.stream = StreamingDistance(ctx.bank, ctx.sim_config, ctx.sample_rate_hz)

    def push(self, pose) -> None:
        self.stream.push(pose)

    def ready(self) -> bool:
        return len(self.stream) >= 2

    def predict(self, exclude=()) -> PredictedTrajectory:
        distances = self.stream.distances()
        return _blend(self.ctx, distances, self.stream.current_pose(), exclude)
