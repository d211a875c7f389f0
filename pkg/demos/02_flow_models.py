"""Fit sparse GP flow models and rank stored trajectories by similarity.

Shows the accuracy/cost lever: the same trajectory fit at several inducing
ratios, compared against the exact GP, then the similarity ranking of a
live observation against the whole dataset.
"""
import time

import numpy as np

import handover as h

if __name__ == "__main__":
    dataset = h.generate_synthetic(h.GeneratorConfig(n_id=40, n_ood=5), seed=3)
    kernel = h.fit_kernel_params([p.receiver for p in dataset.pairs], seed=3)
    print(f"shared kernel from marginal likelihood: {kernel}")

    traj = dataset.pairs[0].receiver
    exact = h.fit_flow(traj, 1.0, kernel)
    queries = traj.poses[::3]
    print(f"\ntrajectory of {len(traj)} samples; inducing-ratio sweep:")
    for ratio in (0.1, 0.2, 0.4, 1.0):
        model = h.fit_flow(traj, ratio, kernel)
        mean, _ = model.predict_batch(queries)
        ref, _ = exact.predict_batch(queries)
        err = np.max(np.abs(mean - ref))
        start = time.perf_counter()
        for q in queries:
            model.predict(q)
        per_query = (time.perf_counter() - start) / len(queries)
        print(f"  ratio {ratio:>4}: m={model.n_inducing:3d}  "
              f"max |mean - exact| = {err:.2e} m/s  "
              f"({1e6 * per_query:.0f} us/query)")

    ctx = h.fit_context(dataset, inducing_ratio=0.4, kernel=kernel)
    pair = dataset.pairs[7]
    obs = h.ObservedTrajectory.from_trajectory(pair.receiver, upto=40)
    ranked = h.rank_all(obs, ctx.flow_models, ctx.sim_config)
    print(f"\nobserving the first 40 samples of {pair.id}; top matches:")
    for idx, sim in ranked[:5]:
        print(f"  {dataset.pairs[idx].id}: similarity {sim:.3f}")
