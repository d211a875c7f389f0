"""Cartesian impedance rollouts of a point end-effector toward the receiver.

The controller renders a virtual spring-damper on the translational axes:

    F = M (a_d - a) + B (v_d - v) + K (x_d - x)

with constant virtual inertia M.  The acceleration reference `a` is the
desired acceleration commanded on the previous control tick (no
acceleration sensing is modeled), so pure regulation reduces to the
spring-damper law.  The plant is a point mass integrated with semi-implicit
Euler at 200 Hz while perception updates the target at 30 Hz; between
perception ticks the target is held.

A rollout closes the loop: receiver observations feed the trajectory
predictor, a temporal ensemble smooths the prediction, the controller
tracks the forecast target, and the gripper releases once the receiver's
pull exceeds the release threshold.  Release is latched: once open, the
handover is over.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .dataset import GeneratorConfig, Trajectory, _receiver_id_path, _receiver_ood_path
from .prediction import (EnsembleBuffer, HandoverComplete, PredictionContext,
                         StreamingPredictor, forecast_pose)

CONTROL_HZ = 200.0
PERCEPTION_HZ = 30.0
DEFAULT_MASS_KG = 2.0
DEFAULT_TIMEOUT_S = 15.0
WARMUP_S = 0.5


class Gripper(enum.Enum):
    HOLDING = "HOLDING"
    RELEASED = "RELEASED"


class ReleaseError(RuntimeError):
    """Release checked after the gripper already opened."""


@dataclass(frozen=True)
class ImpedanceGains:
    """Virtual inertia (kg), damping (N·s/m) and stiffness (N/m), scalar per axis."""

    mass: float = DEFAULT_MASS_KG
    damping: float = 15.0
    stiffness: float = 110.0

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.damping < 0 or self.stiffness < 0:
            raise ValueError("damping and stiffness must be non-negative")


PARAM_RANGES = {
    "stiffness": (80.0, 140.0),
    "damping": (10.0, 20.0),
    "forecast_time": (0.0, 1.0),
    "release_force": (5.0, 20.0),
}


@dataclass(frozen=True)
class HandoverParams:
    """The four jointly tuned handover parameters, each bound to its range."""

    stiffness: float
    damping: float
    forecast_time: float
    release_force: float

    def __post_init__(self):
        for name, (lo, hi) in PARAM_RANGES.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in PARAM_RANGES}


LEARNED_PARAMS = HandoverParams(stiffness=114.3, damping=17.1,
                                forecast_time=0.14, release_force=7.1)


@dataclass(frozen=True)
class EndEffectorState:
    """Translational end-effector state; f_ext is the force currently applied
    to the end-effector by the receiver."""

    x: np.ndarray
    v: np.ndarray
    f_ext: np.ndarray
    gripper: Gripper = Gripper.HOLDING

    def __post_init__(self):
        for name in ("x", "v", "f_ext"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            if a.shape != (3,) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be a finite 3-vector")
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def resting_state(position) -> EndEffectorState:
    return EndEffectorState(x=np.asarray(position, dtype=np.float64),
                            v=np.zeros(3), f_ext=np.zeros(3))


def impedance_force(gains: ImpedanceGains, target, state: EndEffectorState,
                    accel=None) -> np.ndarray:
    """Spring-damper force law on position/velocity/acceleration errors.

    target is (x_d, v_d, a_d); accel is the end-effector acceleration
    reference for the inertia term (defaults to zero).
    """
    x_d, v_d, a_d = (np.asarray(t, dtype=np.float64) for t in target)
    a = np.zeros(3) if accel is None else np.asarray(accel, dtype=np.float64)
    return (gains.mass * (a_d - a)
            + gains.damping * (v_d - state.v)
            + gains.stiffness * (x_d - state.x))


def integrate_point_mass(x, v, force, dt: float, mass: float):
    """Semi-implicit Euler step; broadcasts over leading batch dimensions."""
    v_new = v + (dt / mass) * force
    x_new = x + dt * v_new
    return x_new, v_new


def step(state: EndEffectorState, f_commanded, f_ext, dt: float,
         mass: float = DEFAULT_MASS_KG) -> EndEffectorState:
    """Advance the point-mass plant one control tick under commanded + external force."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    f_cmd = np.asarray(f_commanded, dtype=np.float64)
    f_ext = np.asarray(f_ext, dtype=np.float64)
    if not (np.all(np.isfinite(f_cmd)) and np.all(np.isfinite(f_ext))):
        raise ValueError("forces must be finite")
    x, v = integrate_point_mass(state.x, state.v, f_cmd + f_ext, dt, mass)
    return EndEffectorState(x=x, v=v, f_ext=f_ext, gripper=state.gripper)


def check_release(state: EndEffectorState, release_force: float) -> bool:
    """True once the external force magnitude strictly exceeds the threshold."""
    if state.gripper is Gripper.RELEASED:
        raise ReleaseError("gripper already released")
    return bool(np.linalg.norm(state.f_ext) > release_force)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReceiverScenario:
    """Receiver motion plus the grasp interaction profile for a rollout.

    Once the end-effector stays within grasp_radius of the receiver's hand
    for grasp_dwell_s, the receiver pulls with a force ramping from 0 to
    grasp_force_n over grasp_ramp_s, directed from the giver's base toward
    the receiver (the object is drawn away from the robot).  The receiver
    holds its final pose after the trajectory ends.
    """

    name: str
    receiver: Trajectory
    giver_location: tuple[float, float] = (0.0, 0.0)
    robot_home: tuple[float, float, float] = (0.0, 0.12, 0.9)
    hand_reach: float = 0.04
    hand_height: float = 1.05
    grasp_radius: float = 0.15
    grasp_dwell_s: float = 0.2
    grasp_ramp_s: float = 0.3
    grasp_force_n: float = 20.0
    timeout_s: float = DEFAULT_TIMEOUT_S

    def receiver_pose_at(self, t: float) -> np.ndarray:
        """Receiver base pose at control time t (held past the end)."""
        idx = int(t * self.receiver.sample_rate_hz)
        idx = min(idx, len(self.receiver) - 1)
        return self.receiver.poses[idx]

    def hand_at(self, t: float) -> np.ndarray:
        base = self.receiver_pose_at(t)
        giver = np.asarray(self.giver_location)
        d = giver - base
        n = np.linalg.norm(d)
        off = (self.hand_reach / n) * d if n > 1e-9 else np.zeros(2)
        return np.array([base[0] + off[0], base[1] + off[1], self.hand_height])

    def pull_direction(self, t: float) -> np.ndarray:
        base = self.receiver_pose_at(t)
        giver = np.asarray(self.giver_location)
        d = np.array([base[0] - giver[0], base[1] - giver[1], 0.0])
        n = np.linalg.norm(d)
        return d / n if n > 1e-9 else np.array([1.0, 0.0, 0.0])


def _hold_tail(times: np.ndarray, poses: np.ndarray, rate: float, total_s: float):
    """Extend a path by holding its last pose until total_s."""
    n_total = int(round(total_s * rate)) + 1
    if n_total <= len(times):
        return times, poses
    extra = n_total - len(times)
    tail_t = times[-1] + (np.arange(1, extra + 1)) / rate
    tail_p = np.repeat(poses[-1][None, :], extra, axis=0)
    return np.concatenate([times, tail_t]), np.concatenate([poses, tail_p])


def scenario_static(seed: int = 0, distance: float = 0.46,
                    duration_s: float = 12.0) -> ReceiverScenario:
    """Receiver already standing at the handoff point."""
    rng = np.random.default_rng(seed)
    angle = rng.uniform(-0.6, 0.6)
    pose = distance * np.array([math.cos(angle), math.sin(angle)])
    rate = PERCEPTION_HZ
    n = int(round(duration_s * rate)) + 1
    times = np.arange(n) / rate
    poses = np.repeat(pose[None, :], n, axis=0)
    return ReceiverScenario(name="static", receiver=Trajectory(times, poses, rate))


def scenario_id(seed: int = 0, config: GeneratorConfig | None = None) -> ReceiverScenario:
    """Receiver walks in like an in-distribution training pair, then waits."""
    cfg = config or GeneratorConfig()
    rng = np.random.default_rng(np.random.SeedSequence([987, seed]))
    _, times, poses = _receiver_id_path(rng, cfg)
    times, poses = _hold_tail(times, poses, cfg.sample_rate_hz, times[-1] + 6.0)
    return ReceiverScenario(name="id", receiver=Trajectory(times, poses, cfg.sample_rate_hz),
                            giver_location=cfg.giver_location)


def scenario_ood(seed: int = 0, config: GeneratorConfig | None = None) -> ReceiverScenario:
    """Receiver wanders or pauses on the way in, then waits."""
    cfg = config or GeneratorConfig()
    rng = np.random.default_rng(np.random.SeedSequence([988, seed]))
    _, times, poses = _receiver_ood_path(rng, cfg)
    times, poses = _hold_tail(times, poses, cfg.sample_rate_hz, times[-1] + 6.0)
    return ReceiverScenario(name="ood", receiver=Trajectory(times, poses, cfg.sample_rate_hz),
                            giver_location=cfg.giver_location)


def scenario_away(seed: int = 0, duration_s: float = DEFAULT_TIMEOUT_S) -> ReceiverScenario:
    """Receiver stays far away; the handover can never complete."""
    rng = np.random.default_rng(seed)
    pose = np.array([4.0 + rng.uniform(0, 0.5), rng.uniform(-1.0, 1.0)])
    rate = PERCEPTION_HZ
    n = int(round(duration_s * rate)) + 1
    times = np.arange(n) / rate
    poses = np.repeat(pose[None, :], n, axis=0)
    return ReceiverScenario(name="away", receiver=Trajectory(times, poses, rate))


# ---------------------------------------------------------------------------
# Rollout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RolloutResult:
    """Full closed-loop trace at the control rate plus summary metrics."""

    times: np.ndarray            # (S,)
    targets: np.ndarray          # (S, 3) held forecast target
    ee_positions: np.ndarray     # (S, 3)
    commanded_forces: np.ndarray  # (S, 3)
    external_forces: np.ndarray  # (S, 3)
    gripper: np.ndarray          # (S,) 0 holding / 1 released
    receiver_times: np.ndarray   # (R,)
    receiver: np.ndarray         # (R, 2)
    released: bool
    handover_time: float | None
    tracking_rmse: float
    max_force: float
    params: HandoverParams
    scenario: str

    def __post_init__(self):
        if self.released != (self.handover_time is not None):
            raise ValueError("handover_time must be set exactly when released")


class _GraspModel:
    def __init__(self, scenario: ReceiverScenario):
        self.sc = scenario
        self.dwell_start: float | None = None
        self.ramp_start: float | None = None

    def force(self, t: float, ee_pos: np.ndarray) -> np.ndarray:
        sc = self.sc
        if self.ramp_start is None:
            near = np.linalg.norm(ee_pos - sc.hand_at(t)) < sc.grasp_radius
            if not near:
                self.dwell_start = None
                return np.zeros(3)
            if self.dwell_start is None:
                self.dwell_start = t
            if t - self.dwell_start >= sc.grasp_dwell_s:
                self.ramp_start = t
        if self.ramp_start is None:
            return np.zeros(3)
        level = min(1.0, (t - self.ramp_start) / sc.grasp_ramp_s)
        return level * sc.grasp_force_n * sc.pull_direction(t)


def rollout(ctx: PredictionContext, params: HandoverParams,
            scenario: ReceiverScenario, seed: int = 0,
            mass: float = DEFAULT_MASS_KG,
            obs_noise_std: float = 0.0,
            ensemble_chunk: int = 30, ensemble_decay: float = 0.8) -> RolloutResult:
    """Simulate one handover attempt; deterministic for fixed arguments."""
    rng = np.random.default_rng(np.random.SeedSequence([271, seed]))
    gains = ImpedanceGains(mass=mass, damping=params.damping, stiffness=params.stiffness)
    dt = 1.0 / CONTROL_HZ
    perception_dt = 1.0 / PERCEPTION_HZ
    warmup_samples = int(round(WARMUP_S * PERCEPTION_HZ))
    rate = scenario.receiver.sample_rate_hz

    home = np.asarray(scenario.robot_home, dtype=np.float64)
    state = resting_state(home)
    predictor = StreamingPredictor(ctx)
    ensemble = EnsembleBuffer(chunk_size=ensemble_chunk, decay=ensemble_decay)
    grasp = _GraspModel(scenario)

    n_steps = int(round(scenario.timeout_s * CONTROL_HZ))
    times = np.empty(n_steps)
    targets = np.empty((n_steps, 3))
    ee = np.empty((n_steps, 3))
    f_cmds = np.empty((n_steps, 3))
    f_exts = np.empty((n_steps, 3))
    grip = np.zeros(n_steps, dtype=np.int8)
    obs_times, obs_poses = [], []

    next_perception = 0.0
    prev_desired_accel = np.zeros(3)
    have_prediction = False
    target = home.copy()
    v_d = np.zeros(3)
    a_d = np.zeros(3)
    released = False
    handover_time = None
    steps_used = n_steps

    for i in range(n_steps):
        t = i * dt
        if t + 1e-9 >= next_perception:
            pose = scenario.receiver_pose_at(next_perception).copy()
            if obs_noise_std > 0:
                pose = pose + rng.normal(0.0, obs_noise_std, size=2)
            obs_times.append(next_perception)
            obs_poses.append(pose)
            predictor.push(pose)
            if len(obs_poses) >= max(warmup_samples, 2):
                try:
                    pred = predictor.predict()
                    ensemble.push(pred)
                    have_prediction = True
                except HandoverComplete:
                    pass
            if have_prediction:
                offset = int(round(params.forecast_time * rate))
                p0 = ensemble.query(offset)
                pm = ensemble.query(max(offset - 1, 0))
                pp = ensemble.query(offset + 1)
                target = p0
                v_d = (pp - pm) * (rate / 2.0)
                a_d = (pp - 2.0 * p0 + pm) * (rate * rate)
            next_perception += perception_dt

        f_cmd = impedance_force(gains, (target, v_d, a_d), state,
                                accel=prev_desired_accel)
        prev_desired_accel = a_d
        f_ext = grasp.force(t, state.x) if state.gripper is Gripper.HOLDING else np.zeros(3)
        state = step(state, f_cmd, f_ext, dt, mass)

        times[i] = t
        targets[i] = target
        ee[i] = state.x
        f_cmds[i] = f_cmd
        f_exts[i] = f_ext
        if check_release(state, params.release_force):
            # latched: the handover terminates on release
            state = replace(state, gripper=Gripper.RELEASED)
            released = True
            handover_time = t
            grip[i] = 1
            steps_used = i + 1
            break

    sl = slice(0, steps_used)
    err = np.linalg.norm(targets[sl] - ee[sl], axis=1)
    return RolloutResult(
        times=times[sl].copy(), targets=targets[sl].copy(), ee_positions=ee[sl].copy(),
        commanded_forces=f_cmds[sl].copy(), external_forces=f_exts[sl].copy(),
        gripper=grip[sl].copy(),
        receiver_times=np.asarray(obs_times), receiver=np.asarray(obs_poses),
        released=released, handover_time=handover_time,
        tracking_rmse=float(np.sqrt(np.mean(err ** 2))),
        max_force=float(np.max(np.linalg.norm(f_cmds[sl], axis=1))),
        params=params, scenario=scenario.name,
    )


def rollout_to_dict(result: RolloutResult) -> dict:
    """JSON-ready rollout trace for the preference service and browser UI."""
    return {
        "t": result.times.tolist(),
        "target": result.targets.tolist(),
        "ee": result.ee_positions.tolist(),
        "receiver": result.receiver.tolist(),
        "receiver_t": result.receiver_times.tolist(),
        "release_t": result.handover_time,
        "released": result.released,
        "tracking_rmse": result.tracking_rmse,
        "max_force": result.max_force,
        "scenario": result.scenario,
        "params": result.params.as_dict(),
    }
