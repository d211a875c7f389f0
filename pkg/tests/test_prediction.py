import numpy as np
import pytest

import handover as h
from handover.dataset import HandoverDataset, HandoverPair, Trajectory
from handover.prediction import StreamingPredictor, _stable_weights

from .oracles import brute_force_align

RATE = 30.0


def _line_pair(pid, start, direction, speed=1.0, dur=3.0, z=1.0, label="ID"):
    n = int(dur * RATE) + 1
    t = np.arange(n) / RATE
    d = np.asarray(direction, dtype=float)
    d /= np.linalg.norm(d)
    xy = np.asarray(start, dtype=float) + (speed * t)[:, None] * d
    giver = np.concatenate([xy, np.full((n, 1), z)], axis=1)
    return HandoverPair(pid, label, Trajectory(t, xy, RATE), Trajectory(t, giver, RATE))


@pytest.fixture(scope="module")
def separated_ctx():
    # three well-separated straight-line flows
    pairs = (
        _line_pair("east", (-2.0, 0.0), (1.0, 0.0)),
        _line_pair("north", (0.0, -4.0), (0.0, 1.0)),
        _line_pair("west", (4.0, 2.0), (-1.0, 0.0)),
    )
    kp = h.KernelParams((0.5, 0.5), 1.0, 1e-6)
    # large kappa: direction mismatch swamps everything else, isolating each flow
    return h.fit_context(HandoverDataset(pairs), inducing_ratio=1.0, kernel=kp,
                         k_neighbors=2,
                         sim_config=h.SimilarityConfig(kappa=20.0, min_speed=1e-4,
                                                       window=None))


class TestAlignTime:
    def test_exact_match(self, separated_ctx):
        stored = separated_ctx.dataset.pairs[0].receiver
        assert h.align_time(stored.poses[17], stored) == 17

    def test_tie_break_earliest(self):
        t = np.arange(12) / RATE
        poses = np.zeros((12, 2))
        poses[3] = poses[9] = [1.0, 0.0]
        stored = Trajectory(t, poses, RATE)
        assert h.align_time(np.array([1.0, 0.05]), stored) == 3

    def test_matches_brute_force(self, small_dataset):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pair = small_dataset.pairs[int(rng.integers(small_dataset.n))]
            q = rng.uniform(-4, 4, 2)
            assert h.align_time(q, pair.receiver) == \
                brute_force_align(q, pair.receiver.poses)


class TestStableWeights:
    def test_sum_to_one(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            w = _stable_weights(rng.uniform(0, 5, size=8))
            assert abs(w.sum() - 1.0) <= 1e-12
            assert np.all(w >= 0)

    def test_extreme_distances_no_underflow(self):
        w = _stable_weights(np.array([1000.0, 1001.0, 5000.0]))
        assert abs(w.sum() - 1.0) <= 1e-12
        assert w[0] > w[1] > w[2]


class TestPredictTrajectory:
    def test_single_neighbor_returns_source_segment(self, separated_ctx):
        ctx = h.PredictionContext(dataset=separated_ctx.dataset,
                                  flow_models=separated_ctx.flow_models,
                                  sim_config=separated_ctx.sim_config, k_neighbors=1)
        pair = ctx.dataset.pairs[0]
        obs = h.ObservedTrajectory.from_poses(pair.receiver.poses[:31], RATE)
        pred = h.predict_trajectory(ctx, obs)
        assert list(pred.weights) == [0]
        t_k = pred.alignments[0]
        np.testing.assert_allclose(pred.poses,
                                   pair.giver.poses[t_k:t_k + pred.horizon])

    def test_isolated_trajectory_recovers_suffix(self, separated_ctx):
        pair = separated_ctx.dataset.pairs[1]
        obs = h.ObservedTrajectory.from_poses(pair.receiver.poses[:40], RATE)
        pred = h.predict_trajectory(separated_ctx, obs)
        assert pred.weights[1] >= 0.99
        t_k = pred.alignments[1]
        np.testing.assert_allclose(
            pred.poses, pair.giver.poses[t_k:t_k + pred.horizon], atol=1e-6)

    def test_equal_sources_convexity(self):
        a = _line_pair("a", (-2.0, 0.0), (1.0, 0.0))
        b = _line_pair("b", (-2.0, 0.0), (1.0, 0.0))
        kp = h.KernelParams((0.5, 0.5), 1.0, 1e-6)
        ctx = h.fit_context(HandoverDataset((a, b)), inducing_ratio=1.0, kernel=kp,
                            k_neighbors=2)
        obs = h.ObservedTrajectory.from_poses(a.receiver.poses[:25], RATE)
        pred = h.predict_trajectory(ctx, obs)
        t_k = pred.alignments[0]
        np.testing.assert_allclose(pred.poses,
                                   a.giver.poses[t_k:t_k + pred.horizon], atol=1e-12)

    def test_weights_normalized_and_ordered(self, small_context, small_dataset):
        pair = small_dataset.pairs[7]
        obs = h.ObservedTrajectory.from_poses(pair.receiver.poses[:40], RATE)
        pred = h.predict_trajectory(small_context, obs)
        w = np.array(list(pred.weights.values()))
        assert abs(w.sum() - 1.0) <= 1e-12
        assert np.all(w >= 0)
        assert len(pred.weights) == small_context.k_neighbors

    def test_convex_hull_componentwise(self, small_context, small_dataset):
        pair = small_dataset.pairs[9]
        obs = h.ObservedTrajectory.from_poses(pair.receiver.poses[:45], RATE)
        pred = h.predict_trajectory(small_context, obs)
        for off in range(0, pred.horizon, max(1, pred.horizon // 7)):
            stack = np.stack([small_dataset.pairs[k].giver.poses[t + off]
                              for k, t in pred.alignments.items()])
            assert np.all(pred.poses[off] >= stack.min(axis=0) - 1e-12)
            assert np.all(pred.poses[off] <= stack.max(axis=0) + 1e-12)

    def test_pure_function_of_inputs(self, small_context, small_dataset):
        pair = small_dataset.pairs[2]
        obs = h.ObservedTrajectory.from_poses(pair.receiver.poses[:35], RATE)
        p1 = h.predict_trajectory(small_context, obs)
        p2 = h.predict_trajectory(small_context, obs)
        np.testing.assert_array_equal(p1.poses, p2.poses)
        assert p1.weights == p2.weights

    def test_handover_complete_at_trajectory_ends(self, separated_ctx):
        ctx = h.PredictionContext(dataset=separated_ctx.dataset,
                                  flow_models=separated_ctx.flow_models,
                                  sim_config=separated_ctx.sim_config, k_neighbors=1)
        pair = ctx.dataset.pairs[0]
        obs = h.ObservedTrajectory.from_poses(pair.receiver.poses, RATE)
        with pytest.raises(h.HandoverComplete):
            h.predict_trajectory(ctx, obs)

    def test_streaming_predictor_equivalent(self, small_context, small_dataset):
        pair = small_dataset.pairs[11]
        sp = StreamingPredictor(small_context)
        for j in range(44):
            sp.push(pair.receiver.poses[j])
        obs = h.ObservedTrajectory.from_poses(pair.receiver.poses[:44], RATE)
        direct = h.predict_trajectory(small_context, obs)
        streamed = sp.predict()
        assert streamed.weights.keys() == direct.weights.keys()
        np.testing.assert_allclose(streamed.poses, direct.poses, atol=1e-10)


class TestEnsembleBuffer:
    def _pred(self, const, horizon=12):
        poses = np.tile(np.asarray(const, dtype=float), (horizon, 1))
        return h.PredictedTrajectory(poses=poses, sample_rate_hz=RATE,
                                     weights={0: 1.0}, alignments={0: 0})

    def _ramp(self, start, step, horizon=12):
        poses = np.asarray(start) + step * np.arange(horizon)[:, None]
        return h.PredictedTrajectory(poses=poses, sample_rate_hz=RATE,
                                     weights={0: 1.0}, alignments={0: 0})

    def test_single_prediction_passthrough(self):
        buf = h.EnsembleBuffer(chunk_size=5, decay=0.8)
        pose = h.ensemble_push_and_query(buf, self._ramp([0, 0, 1], 0.1), 3)
        np.testing.assert_allclose(pose.as_array(), [0.3, 0.3, 1.3])

    def test_two_predictions_decay_one_mean(self):
        buf = h.EnsembleBuffer(chunk_size=5, decay=1.0)
        buf.push(self._ramp([0.0, 0.0, 1.0], 0.1))
        buf.push(self._ramp([1.0, 1.0, 2.0], 0.1))
        # at the same absolute time: first prediction is one tick older
        out = buf.query(0)
        expected = 0.5 * (np.array([0.1, 0.1, 1.1]) + np.array([1.0, 1.0, 2.0]))
        np.testing.assert_allclose(out, expected)

    def test_identical_predictions_fixed_point(self):
        for decay in (0.5, 0.8, 1.0):
            buf = h.EnsembleBuffer(chunk_size=4, decay=decay)
            for _ in range(6):
                buf.push(self._pred([2.0, -1.0, 1.5]))
            np.testing.assert_allclose(buf.query(2), [2.0, -1.0, 1.5])

    def test_buffer_trimmed_to_chunk(self):
        buf = h.EnsembleBuffer(chunk_size=3, decay=0.8)
        for i in range(10):
            buf.push(self._pred([float(i), 0.0, 1.0]))
        assert len(buf) == 3

    def test_empty_query_rejected(self):
        with pytest.raises(ValueError):
            h.EnsembleBuffer().query(0)


class TestForecastPose:
    def _ramp_pred(self):
        poses = np.stack([np.linspace(0, 1, 31), np.zeros(31), np.ones(31)], axis=1)
        return h.PredictedTrajectory(poses=poses, sample_rate_hz=RATE,
                                     weights={0: 1.0}, alignments={0: 0})

    def test_zero_forecast_is_current(self):
        pose = h.forecast_pose(self._ramp_pred(), 0.0, RATE)
        np.testing.assert_allclose(pose.as_array(), [0.0, 0.0, 1.0])

    def test_learned_forecast_offset(self):
        # 0.14 s at 30 Hz rounds to 4 samples ahead
        pred = self._ramp_pred()
        pose = h.forecast_pose(pred, 0.14, RATE)
        np.testing.assert_allclose(pose.as_array(), pred.poses[4])

    def test_beyond_horizon_clamps(self):
        pred = self._ramp_pred()
        pose = h.forecast_pose(pred, 100.0, RATE)
        np.testing.assert_allclose(pose.as_array(), pred.poses[-1])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            h.forecast_pose(self._ramp_pred(), -0.1, RATE)
