"""Sparse pseudo-input Gaussian process flow models.

Each stored receiver trajectory gets a flow model: a GP regression from 2D
base pose to 2D base velocity, with one independent output GP per velocity
component sharing a squared-exponential kernel and a common inducing set.
Inducing points are a time-uniform subset of the training samples, sized by
an inducing ratio in (0, 1]; a ratio of 1 makes the model an exact GP.

For m inducing points out of n training samples the sparse predictive
equations follow the standard pseudo-input construction with the diagonal
train-conditional correction:

    lam   = diag(K_nn) - diag(K_nm K_mm^-1 K_mn)
    Gamma = lam + noise
    Q     = K_mm + K_mn Gamma^-1 K_nm
    mean* = k_m*^T Q^-1 K_mn Gamma^-1 y
    var*  = k** - k_m*^T (K_mm^-1 - Q^-1) k_m*

Fits cache the factorizations so a predictive query costs O(m^2).  The
reported variance is the latent-function variance (no observation noise)
averaged over output dimensions; with a shared kernel the per-dimension
variances coincide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .dataset import Trajectory

JITTER_FRACTION = 1e-8


class FitError(RuntimeError):
    """Kernel matrix could not be factorized even with escalated jitter."""


class VarianceError(RuntimeError):
    """Predictive variance came out negative beyond numerical tolerance."""


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel hyperparameters.

    lengthscales are per input dimension (m); signal and noise variances
    are in (m/s)^2.
    """

    lengthscales: tuple[float, float]
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", tuple(float(l) for l in self.lengthscales))
        vals = (*self.lengthscales, self.signal_variance, self.noise_variance)
        if any((not math.isfinite(v)) or v <= 0 for v in vals):
            raise ValueError(f"kernel hyperparameters must be strictly positive: {self}")


DEFAULT_KERNEL = KernelParams(lengthscales=(0.4, 0.4), signal_variance=0.5,
                              noise_variance=5e-3)


def _se_cross(a: np.ndarray, b: np.ndarray, kp: KernelParams) -> np.ndarray:
    ls = np.asarray(kp.lengthscales)
    d = (a[:, None, :] - b[None, :, :]) / ls
    return kp.signal_variance * np.exp(-0.5 * np.sum(d * d, axis=-1))


def _chol_with_jitter(mat: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky with escalating diagonal jitter; raises FitError if hopeless."""
    jitter = JITTER_FRACTION * scale
    eye = np.eye(len(mat))
    for _ in range(8):
        try:
            return cholesky(mat + jitter * eye, lower=True), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FitError(f"kernel matrix singular even with jitter {jitter:.3g}")


def finite_difference_velocities(traj, sample_rate_hz: float | None = None) -> np.ndarray:
    """Velocity estimates (m/s): central differences inside, one-sided at the ends.

    Accepts a Trajectory or an (L, d) pose array plus sample_rate_hz.
    """
    if isinstance(traj, Trajectory):
        poses, rate = traj.poses, traj.sample_rate_hz
    else:
        poses = np.asarray(traj, dtype=np.float64)
        if sample_rate_hz is None:
            raise ValueError("sample_rate_hz is required for raw pose arrays")
        rate = sample_rate_hz
    if len(poses) < 2:
        raise ValueError("need at least 2 samples to estimate velocities")
    v = np.empty_like(poses)
    v[1:-1] = (poses[2:] - poses[:-2]) * (rate / 2.0)
    v[0] = (poses[1] - poses[0]) * rate
    v[-1] = (poses[-1] - poses[-2]) * rate
    return v


def inducing_indices(n: int, ratio: float) -> np.ndarray:
    """Time-uniform inducing indices: max(2, round(ratio * n)) of [0, n)."""
    if not (0.0 < ratio <= 1.0):
        raise ValueError(f"inducing ratio must be in (0, 1], got {ratio}")
    m = min(n, max(2, int(ratio * n + 0.5)))
    return np.unique(np.round(np.linspace(0, n - 1, m)).astype(int))


@dataclass(frozen=True)
class FlowModel:
    """Fitted pose -> velocity GP with cached predictive factorizations.

    mean_weights (m, d) and var_matrix (m, m) reduce prediction to one
    kernel vector, a dot product, and a quadratic form:

        mean(q) = k(Z, q)^T mean_weights
        var(q)  = signal_variance - k(Z, q)^T var_matrix k(Z, q)
    """

    inputs: np.ndarray
    targets: np.ndarray
    inducing_idx: np.ndarray
    inducing_ratio: float
    kernel: KernelParams
    mean_weights: np.ndarray
    var_matrix: np.ndarray

    def __post_init__(self):
        for name in ("inputs", "targets", "inducing_idx", "mean_weights", "var_matrix"):
            a = np.asarray(getattr(self, name))
            a = np.ascontiguousarray(a)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def inducing_points(self) -> np.ndarray:
        return self.inputs[self.inducing_idx]

    @property
    def n_inducing(self) -> int:
        return len(self.inducing_idx)

    def predict(self, query) -> tuple[np.ndarray, float]:
        """Predictive velocity mean (d,) and scalar latent variance at one pose."""
        q = np.asarray(query, dtype=np.float64).reshape(1, -1)
        mean, var = self.predict_batch(q)
        return mean[0], float(var[0])

    def predict_batch(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized predict over (Q, d) query poses -> ((Q, d), (Q,))."""
        q = np.asarray(queries, dtype=np.float64)
        k_star = _se_cross(q, self.inducing_points, self.kernel)
        mean = k_star @ self.mean_weights
        var = self.kernel.signal_variance - np.einsum(
            "qm,mk,qk->q", k_star, self.var_matrix, k_star)
        return mean, _clamp_variance(var, self.kernel.signal_variance)


def _clamp_variance(var: np.ndarray, signal_variance: float) -> np.ndarray:
    floor = -1e-10 * max(1.0, signal_variance)
    if np.any(var < floor):
        raise VarianceError(f"predictive variance {var.min():.3e} below tolerance {floor:.3e}")
    return np.maximum(var, 0.0)


def fit_flow(traj, inducing_ratio: float, kernel: KernelParams = DEFAULT_KERNEL,
             sample_rate_hz: float | None = None) -> FlowModel:
    """Fit one flow model to a receiver trajectory.

    The inducing set is a deterministic time-uniform subset of the samples,
    so refits are bit-reproducible.  With inducing_ratio = 1 the fit reduces
    to an exact GP on all samples.
    """
    if isinstance(traj, Trajectory):
        poses, rate = traj.poses, traj.sample_rate_hz
    else:
        poses = np.asarray(traj, dtype=np.float64)
        rate = sample_rate_hz
        if rate is None:
            raise ValueError("sample_rate_hz is required for raw pose arrays")
    vels = finite_difference_velocities(poses, rate)
    idx = inducing_indices(len(poses), inducing_ratio)
    n, m = len(poses), len(idx)
    z = poses[idx]
    s2, noise = kernel.signal_variance, kernel.noise_variance

    if m == n:
        # exact GP: var_matrix = (K + noise I)^-1
        K = _se_cross(poses, poses, kernel) + noise * np.eye(n)
        try:
            L = cholesky(K, lower=True)
        except np.linalg.LinAlgError:
            L, _ = _chol_with_jitter(K, s2)
        li = solve_triangular(L, np.eye(n), lower=True)
        var_matrix = li.T @ li
        mean_weights = cho_solve((L, True), vels)
    else:
        K_mm = _se_cross(z, z, kernel)
        L, _ = _chol_with_jitter(K_mm, s2)
        K_mn = _se_cross(z, poses, kernel)
        V = solve_triangular(L, K_mn, lower=True)                   # (m, n)
        lam = np.maximum(s2 - np.sum(V * V, axis=0), 0.0)
        gamma = lam + noise
        Vs = V / np.sqrt(gamma)
        A = np.eye(m) + Vs @ Vs.T
        La = cholesky(A, lower=True)
        t = V @ (vels / gamma[:, None])                             # (m, d)
        t = cho_solve((La, True), t)
        mean_weights = solve_triangular(L.T, t, lower=False)
        li = solve_triangular(L, np.eye(m), lower=True)
        g = solve_triangular(La, li, lower=True)                    # (LLa)^-1
        var_matrix = li.T @ li - g.T @ g
    var_matrix = 0.5 * (var_matrix + var_matrix.T)
    return FlowModel(inputs=poses, targets=vels, inducing_idx=idx,
                     inducing_ratio=inducing_ratio, kernel=kernel,
                     mean_weights=mean_weights, var_matrix=var_matrix)


class FlowBank:
    """Batched predictive queries across many flow models.

    Models are grouped by inducing count, padded up to a multiple of 16 so a
    handful of einsums serves the whole bank; padded slots carry zero weight
    rows and columns, so results are exactly the per-model predictions.
    Read-only after construction and safe to share across threads.
    """

    _PAD = 16

    def __init__(self, models):
        self.models = tuple(models)
        if not self.models:
            raise ValueError("FlowBank needs at least one model")
        kernels = {m.kernel for m in self.models}
        if len(kernels) != 1:
            raise ValueError("FlowBank requires a shared kernel across models")
        self.kernel = self.models[0].kernel
        self._groups = []
        by_bucket: dict[int, list[int]] = {}
        for i, m in enumerate(self.models):
            bucket = -(-m.n_inducing // self._PAD) * self._PAD
            by_bucket.setdefault(bucket, []).append(i)
        d_out = self.models[0].mean_weights.shape[1]
        ls = np.asarray(self.kernel.lengthscales)
        for bucket, idxs in sorted(by_bucket.items()):
            z = np.zeros((len(idxs), bucket, self.models[idxs[0]].inputs.shape[1]))
            w = np.zeros((len(idxs), bucket, d_out))
            v = np.zeros((len(idxs), bucket, bucket))
            for row, i in enumerate(idxs):
                model = self.models[i]
                m_i = model.n_inducing
                z[row, :m_i] = model.inducing_points
                z[row, m_i:] = model.inducing_points[0]  # inert: weights stay zero
                w[row, :m_i] = model.mean_weights
                v[row, :m_i, :m_i] = model.var_matrix
            z_scaled = z / ls
            z_sq = np.sum(z_scaled * z_scaled, axis=-1)
            self._groups.append((np.asarray(idxs), z_scaled, z_sq, w, v))

    def __len__(self) -> int:
        return len(self.models)

    def predict_all(self, query) -> tuple[np.ndarray, np.ndarray]:
        """Mean (N, d) and latent variance (N,) of every model at one pose."""
        q = np.asarray(query, dtype=np.float64)
        ls = np.asarray(self.kernel.lengthscales)
        s2 = self.kernel.signal_variance
        q_scaled = q / ls
        q_sq = float(q_scaled @ q_scaled)
        d_out = self.models[0].mean_weights.shape[1]
        means = np.empty((len(self.models), d_out))
        variances = np.empty(len(self.models))
        for idxs, z_scaled, z_sq, w, v in self._groups:
            expo = np.maximum(z_sq - 2.0 * (z_scaled @ q_scaled) + q_sq, 0.0)
            k_star = s2 * np.exp(-0.5 * expo)
            k_row = k_star[:, None, :]                              # (g, 1, m)
            means[idxs] = (k_row @ w)[:, 0, :]
            variances[idxs] = s2 - np.sum((k_row @ v)[:, 0, :] * k_star, axis=1)
        return means, _clamp_variance(variances, s2)


# ---------------------------------------------------------------------------
# Shared hyperparameter fit
# ---------------------------------------------------------------------------

def _log_marginal_likelihood(poses, vels, kp: KernelParams) -> float:
    n = len(poses)
    K = _se_cross(poses, poses, kp) + kp.noise_variance * np.eye(n)
    try:
        c = cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf
    alpha = cho_solve(c, vels)
    logdet = 2.0 * np.sum(np.log(np.diag(c[0])))
    d = vels.shape[1]
    quad = float(np.sum(vels * alpha))
    return -0.5 * quad - 0.5 * d * logdet - 0.5 * d * n * math.log(2 * math.pi)


def fit_kernel_params(trajectories, seed: int = 0, max_trajectories: int = 32,
                      max_samples: int = 120) -> KernelParams:
    """Maximize the summed exact-GP marginal likelihood on a trajectory subsample.

    One shared kernel serves every flow model of a dataset; per-trajectory
    tuning would dominate fit time without a defined benefit here.
    """
    rng = np.random.default_rng(seed)
    trajectories = list(trajectories)
    if len(trajectories) > max_trajectories:
        pick = rng.choice(len(trajectories), size=max_trajectories, replace=False)
        trajectories = [trajectories[i] for i in sorted(pick)]
    chunks = []
    for traj in trajectories:
        poses, rate = (traj.poses, traj.sample_rate_hz) if isinstance(traj, Trajectory) else traj
        vels = finite_difference_velocities(poses, rate)
        if len(poses) > max_samples:
            keep = np.round(np.linspace(0, len(poses) - 1, max_samples)).astype(int)
            poses, vels = poses[keep], vels[keep]
        chunks.append((poses, vels))

    v_all = np.concatenate([v for _, v in chunks])
    v_scale = max(float(np.var(v_all)), 1e-4)
    x0 = np.log([0.5, 0.5, v_scale, 0.01 * v_scale])
    bounds = [(math.log(0.05), math.log(5.0))] * 2 + \
             [(math.log(1e-4), math.log(25.0)), (math.log(1e-8), math.log(1.0))]

    def objective(logp):
        kp = KernelParams((math.exp(logp[0]), math.exp(logp[1])),
                          math.exp(logp[2]), math.exp(logp[3]))
        return -sum(_log_marginal_likelihood(p, v, kp) for p, v in chunks)

    res = minimize(objective, x0, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": 60})
    lx, ly, s2, noise = np.exp(res.x)
    return KernelParams((float(lx), float(ly)), float(s2), float(noise))
