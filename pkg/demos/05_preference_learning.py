"""Tune the four handover parameters from pairwise preferences.

A synthetic rater with a hidden utility peak answers A/B queries; the
GP preference learner localizes the peak on the action grid within a
20-comparison budget.
"""
import numpy as np

import handover as h
from handover.service import simulate_sessions

if __name__ == "__main__":
    grid = h.ActionGrid.default()
    print(f"action grid: {grid.size} candidates over "
          f"K x B x t_f x f_r")

    hidden_peak = np.array([114.3, 17.1, 0.14, 7.1])
    lo = grid.actions.min(axis=0)
    span = grid.actions.max(axis=0) - lo
    peak_n = (hidden_peak - lo) / span

    def utility(action):
        z = (action - lo) / span - peak_n
        return float(np.exp(-0.5 * np.sum((z / 0.35) ** 2)))

    report = simulate_sessions(grid, utility, iterations=20, seeds=range(10),
                               sigma=0.2, oracle_sigma=0.05)
    print(f"\n10 sessions x 20 comparisons: "
          f"{100 * report['success_rate']:.0f}% land in the top decile")
    best = max(report["runs"], key=lambda r: r["incumbent_utility"])
    k, b, tf, fr = grid.actions[best["incumbent_index"]]
    print(f"best run's learned parameters: K={k:.1f}  B={b:.1f}  "
          f"t_f={tf:.2f}  f_r={fr:.1f}")
    print(f"hidden peak:                   K={hidden_peak[0]}  B={hidden_peak[1]}  "
          f"t_f={hidden_peak[2]}  f_r={hidden_peak[3]}")

    # one posterior up close: the learner's mean utility over the grid
    post = h.laplace_posterior((), grid)
    a, b_idx = h.select_query(post, rng_seed=1)
    rec = h.synthetic_oracle(a, b_idx, grid, utility, sigma=0.05, seed=1)
    post = h.update(post, rec)
    print(f"\nafter one comparison (winner {rec.winner}, loser {rec.loser}): "
          f"posterior mean spans [{post.mean.min():.3f}, {post.mean.max():.3f}]")
