"""Small-scale run of the replay evaluations (full scale lives in the CLI).

Ten-fold RMS with ID/OOD columns, the training-set-size sweep, and the
inducing-ratio accuracy/latency tradeoff, on a 120-pair dataset so the
whole script finishes in about a minute.
"""
import handover as h
from handover.evaluation import run_kfold_eval, run_sample_efficiency, run_tradeoff

if __name__ == "__main__":
    dataset = h.generate_synthetic(h.GeneratorConfig(n_id=108, n_ood=12), seed=7)
    kernel = h.fit_kernel_params([p.receiver for p in dataset.pairs], seed=7)

    rep = run_kfold_eval(dataset, k=4, seed=7, kernel=kernel)
    print("stratified k-fold replay:")
    print(f"  overall {rep.mean_rms:.1f} ± {rep.std_rms:.1f} mm   "
          f"ID {rep.mean_id_rms:.1f} mm   OOD {rep.mean_ood_rms:.1f} mm")

    se = run_sample_efficiency(dataset, ratios=(0.25, 0.5, 1.0), seed=7, k=4,
                               kernel=kernel)
    print("\ntraining-set-size sweep:")
    for ratio, mean, std in se.sample_efficiency:
        print(f"  {100 * ratio:4.0f}% of training data -> {mean:.1f} ± {std:.1f} mm")

    tr = run_tradeoff(dataset, inducing_ratios=(0.2, 0.4, 1.0), seed=7,
                      kernel=kernel, max_test_pairs=12, min_ticks=300)
    print("\ninducing-ratio tradeoff (1.0 = exact GP reference):")
    for ratio, rms, lat in tr.tradeoff:
        print(f"  ratio {ratio:>3}: {rms:.1f} mm at {1e3 * lat:.2f} ms/tick")
