"""Trajectory data types, synthetic handover pairs, persistence, and folds.

A handover pair couples the receiver's 2D base path with the giver's 3D
wrist path on a shared, uniformly sampled time grid.  The synthetic
generator produces in-distribution pairs (receiver walks roughly straight
in, giver performs a minimum-jerk reach toward an interception point) and
out-of-distribution pairs (the receiver wanders off the direct path and/or
pauses mid-approach).  Datasets round-trip losslessly through a JSONL file,
and `stratified_kfold` provides label-balanced splits for evaluation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LABEL_ID = "ID"
LABEL_OOD = "OOD"
LABELS = (LABEL_ID, LABEL_OOD)

POSITION_BOUND_M = 100.0
SPACING_TOL_S = 1e-9
PAUSE_SPEED_M_S = 0.05
WANDER_HEADING_DEG = 60.0

_SCHEMA = "handover-dataset-v1"


class DatasetError(ValueError):
    """Invalid trajectory data or dataset file contents."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ReceiverPose:
    """Receiver base position (m) in the global frame."""

    x: float
    y: float

    def __post_init__(self):
        for v in (self.x, self.y):
            if not math.isfinite(v):
                raise DatasetError(f"non-finite receiver pose component: {v!r}")
            if abs(v) > POSITION_BOUND_M:
                raise DatasetError(f"receiver pose component out of range: {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class GiverPose:
    """Giver wrist position (m) in the global frame; the floor is z = 0."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise DatasetError(f"non-finite giver pose component: {v!r}")
        if self.z < 0.0:
            raise DatasetError(f"giver wrist below the floor: z={self.z!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled pose sequence.

    `poses` is (L, 2) for receiver base positions or (L, 3) for giver wrist
    positions; `times` is the matching (L,) timestamp vector in seconds.
    Timestamps must be strictly increasing and uniformly spaced to within
    1e-9 s of 1 / sample_rate_hz.
    """

    times: np.ndarray
    poses: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        times = _freeze(self.times)
        poses = _freeze(self.poses)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "poses", poses)
        if self.sample_rate_hz <= 0 or not math.isfinite(self.sample_rate_hz):
            raise DatasetError(f"sample rate must be positive: {self.sample_rate_hz!r}")
        if times.ndim != 1 or poses.ndim != 2 or len(times) != len(poses):
            raise DatasetError("times and poses must be (L,) and (L, d) with equal L")
        if len(times) < 2:
            raise DatasetError("trajectory needs at least 2 samples")
        if poses.shape[1] not in (2, 3):
            raise DatasetError(f"pose dimension must be 2 or 3, got {poses.shape[1]}")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(poses)):
            raise DatasetError("trajectory contains non-finite values")
        dt = np.diff(times)
        if np.any(dt <= 0):
            raise DatasetError("timestamps must be strictly increasing")
        if np.any(np.abs(dt - 1.0 / self.sample_rate_hz) > SPACING_TOL_S):
            raise DatasetError("timestamps are not uniformly spaced at the sample rate")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.poses.shape[1]

    @property
    def duration_s(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.poses, other.poses)
        )


@dataclass(frozen=True)
class HandoverPair:
    """One receiver/giver demonstration on a shared time grid."""

    id: str
    label: str
    receiver: Trajectory
    giver: Trajectory

    def __post_init__(self):
        if self.label not in LABELS:
            raise DatasetError(f"pair {self.id}: unknown label {self.label!r}")
        if self.receiver.dim != 2 or self.giver.dim != 3:
            raise DatasetError(f"pair {self.id}: receiver must be 2D and giver 3D")
        if len(self.receiver) != len(self.giver):
            raise DatasetError(f"pair {self.id}: receiver/giver lengths differ")
        if np.any(np.abs(self.receiver.times - self.giver.times) > SPACING_TOL_S):
            raise DatasetError(f"pair {self.id}: receiver/giver timestamps not aligned")
        if np.any(np.abs(self.receiver.poses) > POSITION_BOUND_M):
            raise DatasetError(f"pair {self.id}: receiver positions out of range")
        if np.any(self.giver.poses[:, 2] < 0.0):
            raise DatasetError(f"pair {self.id}: giver wrist below the floor")

    def __eq__(self, other) -> bool:
        if not isinstance(other, HandoverPair):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and self.receiver == other.receiver
            and self.giver == other.giver
        )


@dataclass(frozen=True)
class HandoverDataset:
    """Immutable collection of handover pairs with unique ids."""

    pairs: tuple[HandoverPair, ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate pair ids in dataset")

    @property
    def n(self) -> int:
        return len(self.pairs)

    def labels(self) -> list[str]:
        return [p.label for p in self.pairs]

    def by_id(self, pair_id: str) -> HandoverPair:
        for p in self.pairs:
            if p.id == pair_id:
                return p
        raise KeyError(pair_id)

    def subset(self, ids) -> "HandoverDataset":
        wanted = set(ids)
        return HandoverDataset(tuple(p for p in self.pairs if p.id in wanted))

    def __eq__(self, other) -> bool:
        if not isinstance(other, HandoverDataset):
            return NotImplemented
        return self.pairs == other.pairs


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    """Scene geometry and motion ranges for the synthetic generator.

    Distances are meters, speeds m/s, durations seconds.  Ranges are
    (low, high) and sampled uniformly per pair.
    """

    n_id: int = 900
    n_ood: int = 100
    sample_rate_hz: float = 30.0
    giver_location: tuple[float, float] = (0.0, 0.0)
    start_distance: tuple[float, float] = (2.8, 4.2)
    start_angle_deg: tuple[float, float] = (-50.0, 50.0)
    walk_speed: tuple[float, float] = (0.8, 1.4)
    stop_distance: tuple[float, float] = (0.44, 0.495)
    reach_margin: tuple[float, float] = (0.02, 0.04)
    sway_amplitude: tuple[float, float] = (0.02, 0.08)
    sway_frequency: tuple[float, float] = (0.25, 0.6)
    measurement_noise_std: float = 0.002
    noise_smooth_window: int = 7
    accel_time_s: float = 0.4
    pause_duration: tuple[float, float] = (0.5, 2.0)
    detour_distance: tuple[float, float] = (0.5, 0.9)
    detour_angle_deg: tuple[float, float] = (80.0, 115.0)
    wrist_rest_offset: float = 0.12
    wrist_rest_height: tuple[float, float] = (0.82, 0.95)
    handoff_height: tuple[float, float] = (0.95, 1.15)
    reach_trigger_distance: float = 1.9


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _smooth(x: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return x
    kernel = np.ones(window) / window
    out = np.empty_like(x)
    for j in range(x.shape[1]):
        out[:, j] = np.convolve(np.pad(x[:, j], window // 2, mode="edge"), kernel, mode="valid")[: len(x)]
    return out


def _min_jerk(tau: np.ndarray) -> np.ndarray:
    tau = np.clip(tau, 0.0, 1.0)
    return 10 * tau**3 - 15 * tau**4 + 6 * tau**5


def _polyline_at(waypoints: np.ndarray, arclen: np.ndarray) -> np.ndarray:
    seg = np.diff(waypoints, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = np.clip(arclen, 0.0, cum[-1])
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / np.where(seg_len[idx] > 0, seg_len[idx], 1.0)
    return waypoints[idx] + frac[:, None] * seg[idx]


def _speed_schedule(rng: np.random.Generator, cfg: GeneratorConfig, path_len: float,
                    speed: float) -> np.ndarray:
    """Arc-length progress per 30 Hz sample: trapezoid ramp-cruise-ramp."""
    dt = 1.0 / cfg.sample_rate_hz
    t_ramp = cfg.accel_time_s
    s, t, out = 0.0, 0.0, [0.0]
    # crude time horizon estimate, refined by integrating until the end
    while s < path_len and t < 120.0:
        v = speed * min(1.0, t / t_ramp if t_ramp > 0 else 1.0)
        remaining = path_len - s
        # decelerate over the same ramp length near the goal
        v = min(v, max(0.12, speed * remaining / max(speed * t_ramp, 1e-6)))
        s = min(path_len, s + v * dt)
        t += dt
        out.append(s)
    out[-1] = path_len
    return np.asarray(out)


def _receiver_geometry(rng: np.random.Generator, cfg: GeneratorConfig):
    giver = np.asarray(cfg.giver_location, dtype=float)
    angle = math.radians(rng.uniform(*cfg.start_angle_deg))
    heading = np.array([math.cos(angle), math.sin(angle)])
    start = giver + rng.uniform(*cfg.start_distance) * heading
    stop_angle = angle + math.radians(rng.uniform(-8.0, 8.0))
    stop_dir = np.array([math.cos(stop_angle), math.sin(stop_angle)])
    stop = giver + rng.uniform(*cfg.stop_distance) * stop_dir
    return giver, start, stop


def _apply_sway_and_noise(rng, cfg, times, base):
    amp = rng.uniform(*cfg.sway_amplitude)
    freq = rng.uniform(*cfg.sway_frequency)
    phase = rng.uniform(0, 2 * math.pi)
    vel = np.gradient(base, axis=0)
    tangent = np.where(np.linalg.norm(vel, axis=1, keepdims=True) > 1e-9,
                       vel / np.maximum(np.linalg.norm(vel, axis=1, keepdims=True), 1e-9),
                       np.array([1.0, 0.0]))
    normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
    total = times[-1] - times[0]
    taper = np.minimum(1.0, np.minimum(times / 0.8, np.maximum(total - times, 0.0) / 0.8))
    sway = (amp * np.sin(2 * math.pi * freq * times + phase) * taper)[:, None] * normal
    noise = _smooth(rng.normal(0.0, cfg.measurement_noise_std, size=base.shape),
                    cfg.noise_smooth_window)
    return base + sway + noise


def _receiver_id_path(rng, cfg):
    giver, start, stop = _receiver_geometry(rng, cfg)
    waypoints = np.stack([start, stop])
    path_len = float(np.linalg.norm(stop - start))
    speed = rng.uniform(*cfg.walk_speed)
    progress = _speed_schedule(rng, cfg, path_len, speed)
    times = np.arange(len(progress)) / cfg.sample_rate_hz
    base = _polyline_at(waypoints, progress)
    return giver, times, _apply_sway_and_noise(rng, cfg, times, base)


def _receiver_ood_path(rng, cfg):
    giver, start, stop = _receiver_geometry(rng, cfg)
    mode = rng.choice(["pause", "wander", "both"])
    waypoints = [start]
    if mode in ("wander", "both"):
        frac = rng.uniform(0.3, 0.6)
        mid = start + frac * (stop - start)
        heading = _unit(stop - start)
        turn = math.radians(rng.uniform(*cfg.detour_angle_deg)) * rng.choice([-1.0, 1.0])
        c, s = math.cos(turn), math.sin(turn)
        detour_dir = np.array([c * heading[0] - s * heading[1],
                               s * heading[0] + c * heading[1]])
        waypoints.append(mid)
        waypoints.append(mid + rng.uniform(*cfg.detour_distance) * detour_dir)
    waypoints.append(stop)
    waypoints = np.stack(waypoints)

    seg_len = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
    path_len = float(seg_len.sum())
    speed = rng.uniform(*cfg.walk_speed)
    progress = _speed_schedule(rng, cfg, path_len, speed)

    if mode in ("pause", "both"):
        dur = rng.uniform(*cfg.pause_duration)
        hold = int(round(dur * cfg.sample_rate_hz))
        at = rng.integers(int(0.25 * len(progress)), int(0.7 * len(progress)))
        progress = np.concatenate([progress[:at], np.full(hold, progress[at]), progress[at:]])

    times = np.arange(len(progress)) / cfg.sample_rate_hz
    base = _polyline_at(waypoints, progress)
    return giver, times, _apply_sway_and_noise(rng, cfg, times, base)


def _giver_path(rng, cfg, giver_xy, times, receiver):
    rest_dir = _unit(receiver[0] - giver_xy)
    rest = np.array([*(giver_xy + cfg.wrist_rest_offset * rest_dir),
                     rng.uniform(*cfg.wrist_rest_height)])
    stop = receiver[-1]
    reach = np.linalg.norm(stop - giver_xy) - rng.uniform(*cfg.reach_margin)
    intercept = np.array([*(giver_xy + reach * _unit(stop - giver_xy)),
                          rng.uniform(*cfg.handoff_height)])
    dist = np.linalg.norm(receiver - giver_xy, axis=1)
    near = np.nonzero(dist < cfg.reach_trigger_distance)[0]
    t_start = times[near[0]] if len(near) else times[int(0.4 * len(times))]
    span = max(times[-1] - t_start, 1.0 / cfg.sample_rate_hz)
    tau = (times - t_start) / span
    wrist = rest[None, :] + _min_jerk(tau)[:, None] * (intercept - rest)[None, :]
    noise = _smooth(rng.normal(0.0, 0.001, size=wrist.shape), cfg.noise_smooth_window)
    wrist = wrist + noise
    wrist[:, 2] = np.maximum(wrist[:, 2], 0.0)
    return wrist


def generate_synthetic(config: GeneratorConfig, seed: int) -> HandoverDataset:
    """Generate a labeled synthetic dataset; identical seeds give identical bytes."""
    if config.n_id < 0 or config.n_ood < 0 or config.n_id + config.n_ood == 0:
        raise DatasetError("pair counts must be non-negative and sum to at least 1")
    if config.sample_rate_hz <= 0:
        raise DatasetError("sample rate must be positive")
    seeds = np.random.SeedSequence(seed).spawn(config.n_id + config.n_ood)
    pairs = []
    for i in range(config.n_id + config.n_ood):
        rng = np.random.default_rng(seeds[i])
        ood = i >= config.n_id
        giver_xy, times, receiver = (_receiver_ood_path if ood else _receiver_id_path)(rng, config)
        wrist = _giver_path(rng, config, giver_xy, times, receiver)
        label = LABEL_OOD if ood else LABEL_ID
        idx = i - config.n_id if ood else i
        pairs.append(HandoverPair(
            id=f"{label.lower()}-{idx:04d}",
            label=label,
            receiver=Trajectory(times, receiver, config.sample_rate_hz),
            giver=Trajectory(times, wrist, config.sample_rate_hz),
        ))
    return HandoverDataset(tuple(pairs))


# ---------------------------------------------------------------------------
# Persistence (JSONL: one header line, then one pair per line)
# ---------------------------------------------------------------------------

def save(dataset: HandoverDataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": _SCHEMA, "n_pairs": dataset.n}) + "\n")
        for p in dataset.pairs:
            rec = {
                "id": p.id,
                "label": p.label,
                "rate_hz": p.receiver.sample_rate_hz,
                "receiver": [[t, x, y] for t, (x, y) in zip(p.receiver.times.tolist(),
                                                            p.receiver.poses.tolist())],
                "giver": [[t, x, y, z] for t, (x, y, z) in zip(p.giver.times.tolist(),
                                                               p.giver.poses.tolist())],
            }
            fh.write(json.dumps(rec) + "\n")


def load(path) -> HandoverDataset:
    path = Path(path)
    pairs = []
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise DatasetError(f"{path}:1: malformed header: {e}") from e
        if header.get("schema") != _SCHEMA:
            raise DatasetError(f"{path}:1: unexpected schema {header.get('schema')!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: malformed record: {e}") from e
            try:
                rate = rec["rate_hz"]
                recv = np.asarray(rec["receiver"], dtype=np.float64)
                giv = np.asarray(rec["giver"], dtype=np.float64)
                pair = HandoverPair(
                    id=rec["id"],
                    label=rec["label"],
                    receiver=Trajectory(recv[:, 0], recv[:, 1:], rate),
                    giver=Trajectory(giv[:, 0], giv[:, 1:], rate),
                )
            except (KeyError, IndexError) as e:
                raise DatasetError(f"{path}:{lineno}: missing field {e}") from e
            except DatasetError as e:
                raise DatasetError(
                    f"{path}:{lineno}: invalid pair {rec.get('id', '?')!r}: {e}") from e
            pairs.append(pair)
    ds = HandoverDataset(tuple(pairs))
    if header.get("n_pairs") != ds.n:
        raise DatasetError(f"{path}: header says {header.get('n_pairs')} pairs, found {ds.n}")
    return ds


# ---------------------------------------------------------------------------
# Stratified folds
# ---------------------------------------------------------------------------

def stratified_kfold(dataset: HandoverDataset, k: int, seed: int):
    """Split pair ids into k label-balanced folds.

    Returns a list of (train_ids, test_ids) tuples; every id appears in
    exactly one test set, and each fold's label mix is within one item of
    the global ratio.
    """
    if k < 2:
        raise DatasetError(f"k must be at least 2, got {k}")
    rng = np.random.default_rng(seed)
    test_sets: list[list[str]] = [[] for _ in range(k)]
    for label in LABELS:
        ids = [p.id for p in dataset.pairs if p.label == label]
        if not ids:
            continue
        if len(ids) < k:
            raise DatasetError(f"stratum {label} has {len(ids)} pairs, fewer than k={k}")
        ids = [ids[j] for j in rng.permutation(len(ids))]
        for pos, pid in enumerate(ids):
            test_sets[pos % k].append(pid)
    all_ids = {p.id for p in dataset.pairs}
    folds = []
    for test in test_sets:
        test_set = set(test)
        train = [p.id for p in dataset.pairs if p.id not in test_set]
        folds.append((train, sorted(test_set)))
    assert set().union(*(set(t) for _, t in folds)) == all_ids
    return folds


# ---------------------------------------------------------------------------
# Scan helpers for generated-path properties
# ---------------------------------------------------------------------------

def speeds(traj: Trajectory) -> np.ndarray:
    """Per-sample speed (m/s) from central differences."""
    v = np.gradient(traj.poses, axis=0) * traj.sample_rate_hz
    return np.linalg.norm(v, axis=1)


def has_pause(traj: Trajectory, speed_threshold: float = PAUSE_SPEED_M_S,
              min_samples: int = 5) -> bool:
    slow = speeds(traj) < speed_threshold
    run = 0
    for s in slow:
        run = run + 1 if s else 0
        if run >= min_samples:
            return True
    return False


def max_heading_change_deg(traj: Trajectory, window_s: float = 0.5,
                           min_speed: float = 0.1) -> float:
    """Largest heading change (deg) across a sliding time window."""
    v = np.gradient(traj.poses, axis=0) * traj.sample_rate_hz
    speed = np.linalg.norm(v, axis=1)
    ok = speed > min_speed
    headings = np.arctan2(v[:, 1], v[:, 0])
    lag = max(1, int(round(window_s * traj.sample_rate_hz)))
    best = 0.0
    for i in range(len(headings) - lag):
        if ok[i] and ok[i + lag]:
            d = abs(headings[i + lag] - headings[i])
            d = min(d, 2 * math.pi - d)
            best = max(best, math.degrees(d))
    return best
