"""Predict the giver's future wrist path from a partial receiver observation.

Replays one held-out pair tick by tick and reports how the blended
prediction compares to the ground-truth giver trajectory as the
observation grows.
"""
import numpy as np

import handover as h

if __name__ == "__main__":
    dataset = h.generate_synthetic(h.GeneratorConfig(n_id=80, n_ood=10), seed=9)
    train = h.HandoverDataset(dataset.pairs[:72] + dataset.pairs[80:88])
    held_out = dataset.pairs[75]

    ctx = h.fit_context(train, inducing_ratio=0.4)
    print(f"context: {train.n} stored pairs, k={ctx.k_neighbors} neighbors")
    print(f"held-out pair {held_out.id} with {len(held_out.receiver)} samples\n")

    truth = held_out.giver.poses
    for upto in (20, 40, 60, 80):
        if upto >= len(held_out.receiver):
            break
        obs = h.ObservedTrajectory.from_trajectory(held_out.receiver, upto=upto)
        pred = h.predict_trajectory(ctx, obs)
        overlap = min(pred.horizon, len(truth) - upto)
        rms = h.rms_error(pred.poses[:overlap], truth[upto:upto + overlap])
        top_idx, top_w = max(pred.weights.items(), key=lambda kv: kv[1])
        print(f"after {upto:3d} samples: horizon {pred.horizon:3d}, "
              f"rms {rms:6.1f} mm, top source {train.pairs[top_idx].id} "
              f"(w={top_w:.2f})")

    obs = h.ObservedTrajectory.from_trajectory(held_out.receiver, upto=45)
    pred = h.predict_trajectory(ctx, obs)
    buf = h.EnsembleBuffer(chunk_size=30, decay=0.8)
    pose = h.ensemble_push_and_query(buf, pred, query_offset=0)
    ahead = h.forecast_pose(buf, 0.14, held_out.receiver.sample_rate_hz)
    print(f"\ncurrent target pose    : {np.round(pose.as_array(), 3)}")
    print(f"forecast 0.14 s ahead  : {np.round(ahead.as_array(), 3)}")
