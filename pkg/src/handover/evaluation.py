"""Replay-based evaluation: k-fold RMS error, data-size sweeps, and the
inducing-ratio accuracy/latency tradeoff.

Each held-out pair is replayed tick by tick: after a short warm-up the
predictor re-predicts the giver's future from the receiver observations so
far, and the predicted horizon is compared against the ground-truth giver
segment from the same tick onward.  Per-tick RMS errors are averaged over
ticks, then pairs, then folds; fold spreads use the sample standard
deviation.  Prediction latency is wall-clock per tick on the replay path
that a live controller would use.
"""
from __future__ import annotations

import json
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import LABEL_ID, LABEL_OOD, HandoverDataset, stratified_kfold
from .prediction import (HandoverComplete, PredictionContext, StreamingPredictor,
                         fit_context)
from .similarity import SimilarityConfig
from .spgp import KernelParams, fit_kernel_params

TRADEOFF_RMS_TOLERANCE = 1.10
DEFAULT_WARMUP_S = 0.5


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("HANDOVER_THREADS", "1")))
    except ValueError:
        return 1


def rms_error(pred: np.ndarray, truth: np.ndarray) -> float:
    """Root-mean-square 3D distance between aligned segments, in millimeters."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    n = min(len(pred), len(truth))
    if n == 0:
        raise ValueError("empty overlap between prediction and ground truth")
    d = pred[:n] - truth[:n]
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1))) * 1000.0)


def replay_pair_rms(ctx: PredictionContext, pair, warmup_s: float = DEFAULT_WARMUP_S,
                    exclude_self: bool = False,
                    latency_log: list | None = None) -> float:
    """Mean per-tick RMS (mm) of re-predictions along one pair's replay."""
    predictor = StreamingPredictor(ctx)
    exclude = ()
    if exclude_self:
        exclude = tuple(i for i, p in enumerate(ctx.dataset.pairs) if p.id == pair.id)
    warmup = max(2, int(round(warmup_s * pair.receiver.sample_rate_hz)))
    truth = pair.giver.poses
    length = len(pair.receiver)
    tick_rms = []
    for j in range(length):
        start = time.perf_counter()
        predictor.push(pair.receiver.poses[j])
        if j + 1 < warmup:
            continue
        try:
            pred = predictor.predict(exclude=exclude)
        except HandoverComplete:
            continue
        if latency_log is not None:
            latency_log.append(time.perf_counter() - start)
        overlap = min(pred.horizon, length - j)
        if overlap > 0:
            tick_rms.append(rms_error(pred.poses[:overlap], truth[j:j + overlap]))
    if not tick_rms:
        raise ValueError(f"pair {pair.id}: no evaluable ticks (trajectory too short?)")
    return float(np.mean(tick_rms))


@dataclass(frozen=True)
class FoldResult:
    fold: int
    id_rms: float
    ood_rms: float
    overall_rms: float
    n_test: int


@dataclass(frozen=True)
class EvalReport:
    """Evaluation outputs plus enough metadata to reproduce them."""

    kind: str
    folds: tuple[FoldResult, ...] = ()
    sample_efficiency: tuple[tuple[float, float, float], ...] = ()  # (ratio, mean, std)
    tradeoff: tuple[tuple[float, float, float], ...] = ()  # (inducing, rms, latency_s)
    config: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    @property
    def mean_rms(self) -> float:
        return float(np.mean([f.overall_rms for f in self.folds]))

    @property
    def std_rms(self) -> float:
        vals = [f.overall_rms for f in self.folds]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    @property
    def mean_id_rms(self) -> float:
        return float(np.mean([f.id_rms for f in self.folds if not np.isnan(f.id_rms)]))

    @property
    def mean_ood_rms(self) -> float:
        return float(np.mean([f.ood_rms for f in self.folds if not np.isnan(f.ood_rms)]))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "folds": [vars(f) for f in self.folds],
            "summary": {
                "mean_rms_mm": self.mean_rms if self.folds else None,
                "std_rms_mm": self.std_rms if self.folds else None,
                "mean_id_rms_mm": self.mean_id_rms if self.folds else None,
                "mean_ood_rms_mm": self.mean_ood_rms if self.folds else None,
            },
            "sample_efficiency": [
                {"data_ratio": r, "rms_mm": m, "rms_std_mm": s}
                for r, m, s in self.sample_efficiency
            ],
            "tradeoff": [
                {"inducing_ratio": r, "rms_mm": m, "median_tick_latency_s": t}
                for r, m, t in self.tradeoff
            ],
            "config": self.config,
            "environment": self.environment,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _environment() -> dict:
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": _max_workers(),
    }


def _fold_rms(dataset, train_ids, test_ids, fold_idx, kernel, inducing_ratio,
              sim_config, k_neighbors, warmup_s, latency_log=None,
              max_test_pairs=None):
    train = dataset.subset(train_ids)
    ctx = fit_context(train, inducing_ratio=inducing_ratio, kernel=kernel,
                      sim_config=sim_config, k_neighbors=k_neighbors)
    test_pairs = [dataset.by_id(i) for i in test_ids]
    if max_test_pairs is not None:
        test_pairs = test_pairs[:max_test_pairs]
    per_label = {LABEL_ID: [], LABEL_OOD: []}
    for pair in test_pairs:
        rms = replay_pair_rms(ctx, pair, warmup_s=warmup_s, latency_log=latency_log)
        per_label[pair.label].append(rms)
    id_vals, ood_vals = per_label[LABEL_ID], per_label[LABEL_OOD]
    all_vals = id_vals + ood_vals
    return FoldResult(
        fold=fold_idx,
        id_rms=float(np.mean(id_vals)) if id_vals else float("nan"),
        ood_rms=float(np.mean(ood_vals)) if ood_vals else float("nan"),
        overall_rms=float(np.mean(all_vals)),
        n_test=len(test_pairs),
    )


def run_kfold_eval(dataset: HandoverDataset, k: int = 10, seed: int = 7,
                   inducing_ratio: float = 0.4,
                   sim_config: SimilarityConfig = SimilarityConfig(),
                   k_neighbors: int = 10, kernel: KernelParams | None = None,
                   warmup_s: float = DEFAULT_WARMUP_S) -> EvalReport:
    """Stratified k-fold replay evaluation with ID/OOD columns per fold."""
    if kernel is None:
        kernel = fit_kernel_params([p.receiver for p in dataset.pairs], seed=seed)
    folds = stratified_kfold(dataset, k, seed)
    jobs = [(i, train, test) for i, (train, test) in enumerate(folds)]

    def work(job):
        i, train, test = job
        return _fold_rms(dataset, train, test, i, kernel, inducing_ratio,
                         sim_config, k_neighbors, warmup_s)

    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    return EvalReport(
        kind="kfold",
        folds=tuple(results),
        config={"k": k, "seed": seed, "inducing_ratio": inducing_ratio,
                "kappa": sim_config.kappa, "window": sim_config.window,
                "k_neighbors": k_neighbors, "warmup_s": warmup_s,
                "kernel": {"lengthscales": list(kernel.lengthscales),
                           "signal_variance": kernel.signal_variance,
                           "noise_variance": kernel.noise_variance},
                "n_pairs": dataset.n},
        environment=_environment(),
    )


def _stratified_subsample(dataset, ids, ratio, rng):
    if not (0.0 < ratio <= 1.0):
        raise ValueError(f"data ratio must be in (0, 1], got {ratio}")
    if ratio == 1.0:
        return list(ids)
    keep = []
    for label in (LABEL_ID, LABEL_OOD):
        lab_ids = [i for i in ids if dataset.by_id(i).label == label]
        if not lab_ids:
            continue
        n_keep = max(1, int(round(ratio * len(lab_ids))))
        picks = rng.choice(len(lab_ids), size=n_keep, replace=False)
        keep.extend(lab_ids[p] for p in sorted(picks))
    return keep


def run_sample_efficiency(dataset: HandoverDataset, ratios=(0.1, 0.25, 0.5, 1.0),
                          seed: int = 7, k: int = 10, inducing_ratio: float = 0.4,
                          sim_config: SimilarityConfig = SimilarityConfig(),
                          k_neighbors: int = 10,
                          kernel: KernelParams | None = None,
                          warmup_s: float = DEFAULT_WARMUP_S) -> EvalReport:
    """RMS against shrinking training sets: the k-fold protocol with each
    fold's training split stratified-subsampled to the given ratio."""
    if kernel is None:
        kernel = fit_kernel_params([p.receiver for p in dataset.pairs], seed=seed)
    folds = stratified_kfold(dataset, k, seed)
    points = []
    for ratio in ratios:
        fold_vals = []
        for i, (train, test) in enumerate(folds):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, int(ratio * 1000)]))
            sub = _stratified_subsample(dataset, train, ratio, rng)
            if len(sub) < k_neighbors:
                raise ValueError(f"ratio {ratio} leaves {len(sub)} trajectories, "
                                 f"fewer than k_neighbors={k_neighbors}")
            res = _fold_rms(dataset, sub, test, i, kernel, inducing_ratio,
                            sim_config, k_neighbors, warmup_s)
            fold_vals.append(res.overall_rms)
        points.append((float(ratio), float(np.mean(fold_vals)),
                       float(np.std(fold_vals, ddof=1))))
    return EvalReport(
        kind="sample-efficiency",
        sample_efficiency=tuple(points),
        config={"ratios": list(map(float, ratios)), "k": k, "seed": seed,
                "inducing_ratio": inducing_ratio, "n_pairs": dataset.n},
        environment=_environment(),
    )


def run_tradeoff(dataset: HandoverDataset, inducing_ratios=(0.1, 0.2, 0.4, 0.7, 1.0),
                 seed: int = 7, sim_config: SimilarityConfig = SimilarityConfig(),
                 k_neighbors: int = 10, kernel: KernelParams | None = None,
                 warmup_s: float = DEFAULT_WARMUP_S,
                 max_test_pairs: int = 40, min_ticks: int = 1000) -> EvalReport:
    """Accuracy vs prediction latency across inducing ratios on one stratified
    split; ratio 1.0 is the exact-GP reference point."""
    if kernel is None:
        kernel = fit_kernel_params([p.receiver for p in dataset.pairs], seed=seed)
    smallest_stratum = min(c for c in
                           (sum(1 for p in dataset.pairs if p.label == lab)
                            for lab in (LABEL_ID, LABEL_OOD)) if c > 0)
    split_k = max(2, min(10, smallest_stratum))
    train, test = stratified_kfold(dataset, split_k, seed)[0]
    points = []
    for ratio in inducing_ratios:
        latencies: list[float] = []
        res = _fold_rms(dataset, train, test, 0, kernel, ratio, sim_config,
                        k_neighbors, warmup_s, latency_log=latencies,
                        max_test_pairs=max_test_pairs)
        if len(latencies) < min_ticks:
            raise ValueError(f"only {len(latencies)} timed ticks; "
                             f"need at least {min_ticks}")
        points.append((float(ratio), res.overall_rms, float(np.median(latencies))))
    return EvalReport(
        kind="tradeoff",
        tradeoff=tuple(points),
        config={"inducing_ratios": list(map(float, inducing_ratios)), "seed": seed,
                "max_test_pairs": max_test_pairs, "n_pairs": dataset.n},
        environment=_environment(),
    )


def estimate_tracking_lag(reference: np.ndarray, actual: np.ndarray, dt: float,
                          max_shift_s: float = 1.0) -> float:
    """Time shift (s) minimizing the mean squared error between a reference
    path and the path that tracked it; positive means the tracker lags."""
    ref = np.asarray(reference, dtype=np.float64)
    act = np.asarray(actual, dtype=np.float64)
    n = min(len(ref), len(act))
    ref, act = ref[:n], act[:n]
    max_shift = int(round(max_shift_s / dt))
    best_err, best_shift = np.inf, 0
    for shift in range(-max_shift, max_shift + 1):
        if shift >= 0:
            r, a = ref[: n - shift], act[shift:]
        else:
            r, a = ref[-shift:], act[: n + shift]
        if len(r) < 10:
            continue
        err = float(np.mean(np.sum((r - a) ** 2, axis=1)))
        if err < best_err:
            best_err, best_shift = err, shift
    return best_shift * dt
