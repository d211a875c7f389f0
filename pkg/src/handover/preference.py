"""Gaussian-process preference learning over the handover parameter grid.

Pairwise A/B feedback is modeled with a probit likelihood: the probability
of preferring action a over b is Phi((f(a) - f(b)) / (sqrt(2) * sigma)) for
a latent utility f with a squared-exponential GP prior over the normalized
parameter coordinates.  The posterior over utilities on the finite action
grid is fit with a damped-Newton Laplace approximation; queries are picked
self-sparring style, as the argmaxes of two independent posterior samples.

The Newton solve runs in the subspace of grid points that appear in at
least one comparison (the likelihood gradient vanishes elsewhere), then the
mode and covariance are extended to the full grid through the prior.  That
keeps a 20-comparison fit fast even on grids of a few thousand actions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular
from scipy.special import erf, log_ndtr

from .impedance import PARAM_RANGES

SQRT2 = math.sqrt(2.0)
PRIOR_JITTER = 1e-8


class LaplaceError(RuntimeError):
    """Newton iteration failed to converge or the system was singular."""


@dataclass(frozen=True)
class PreferenceKernel:
    """Squared-exponential prior over [0, 1]-normalized parameter coordinates."""

    lengthscale: float = 0.3
    signal_variance: float = 1.0

    def __post_init__(self):
        if self.lengthscale <= 0 or self.signal_variance <= 0:
            raise ValueError("kernel hyperparameters must be positive")

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = (a[:, None, :] - b[None, :, :]) / self.lengthscale
        return self.signal_variance * np.exp(-0.5 * np.sum(d * d, axis=-1))


DEFAULT_GRID_SHAPE = (7, 6, 6, 7)


@dataclass(frozen=True, eq=False)
class ActionGrid:
    """Finite candidate set: the Cartesian product of per-parameter axes.

    actions holds physical values (stiffness, damping, forecast_time,
    release_force per row); normalized holds the same points scaled to
    [0, 1] per dimension for the prior kernel.
    """

    actions: np.ndarray
    normalized: np.ndarray
    axes: tuple[tuple[float, ...], ...]
    _prior_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("actions", "normalized"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if len(self.actions) < 1:
            raise ValueError("grid must contain at least one action")

    @classmethod
    def default(cls, shape: tuple[int, int, int, int] = DEFAULT_GRID_SHAPE) -> "ActionGrid":
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in
                zip(PARAM_RANGES.values(), shape)]
        return cls.from_axes(axes)

    @classmethod
    def from_axes(cls, axes) -> "ActionGrid":
        axes = [np.asarray(a, dtype=np.float64) for a in axes]
        mesh = np.meshgrid(*axes, indexing="ij")
        actions = np.stack([m.ravel() for m in mesh], axis=1)
        lo = actions.min(axis=0)
        span = np.where(actions.max(axis=0) - lo > 0, actions.max(axis=0) - lo, 1.0)
        return cls(actions=actions, normalized=(actions - lo) / span,
                   axes=tuple(tuple(map(float, a)) for a in axes))

    @property
    def size(self) -> int:
        return len(self.actions)

    def prior(self, kernel: PreferenceKernel):
        """Cached (covariance, lower Cholesky) of the prior over the grid."""
        if kernel not in self._prior_cache:
            cov = kernel.matrix(self.normalized, self.normalized)
            chol = cholesky(cov + PRIOR_JITTER * np.eye(self.size), lower=True)
            self._prior_cache[kernel] = (cov, chol)
        return self._prior_cache[kernel]


@dataclass(frozen=True)
class PreferenceRecord:
    """One observed comparison: grid index `winner` beat grid index `loser`."""

    winner: int
    loser: int

    def __post_init__(self):
        if self.winner == self.loser:
            raise ValueError("winner and loser must differ")
        if self.winner < 0 or self.loser < 0:
            raise ValueError("indices must be non-negative")


def preference_likelihood(f_winner: float, f_loser: float, sigma: float) -> float:
    """Probit comparison probability Phi((f_winner - f_loser) / (sqrt(2) sigma)).

    Implemented through erf so that swapping the arguments complements the
    probability exactly in floating point.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    z = (f_winner - f_loser) / (SQRT2 * sigma)
    return 0.5 * (1.0 + float(erf(z / SQRT2)))


def log_likelihood(records, f: np.ndarray, sigma: float) -> float:
    """Sum of log comparison probabilities; stable far into the losing tail."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    f = np.asarray(f, dtype=np.float64)
    if not records:
        return 0.0
    w = np.array([r.winner for r in records])
    l = np.array([r.loser for r in records])
    z = (f[w] - f[l]) / (SQRT2 * sigma)
    return float(np.sum(log_ndtr(z)))


def _probit_moments(z: np.ndarray):
    """r = pdf/cdf of the standard normal and the curvature r * (z + r)."""
    log_pdf = -0.5 * z * z - 0.5 * math.log(2 * math.pi)
    r = np.exp(log_pdf - log_ndtr(z))
    return r, r * (z + r)


@dataclass(frozen=True, eq=False)
class PreferencePosterior:
    """Laplace posterior over grid utilities.

    mean is the MAP utility vector; covariance (lazy, A x A) is the inverse
    negative Hessian at the mode, symmetrized.  Factors for low-rank
    posterior sampling are kept so queries never form the full covariance.
    """

    grid: ActionGrid
    kernel: PreferenceKernel
    sigma: float
    records: tuple[PreferenceRecord, ...]
    mean: np.ndarray
    support: np.ndarray          # involved grid indices (u,)
    _w_root: np.ndarray          # (u, u) likelihood-curvature square root
    _gain: np.ndarray            # (A, u) prior columns times w_root
    _corr_chol: np.ndarray       # (u, u) lower Cholesky of I + R^T Sigma_UU R
    grad_norm: float = 0.0       # objective gradient inf-norm at the mode

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.mean, dtype=np.float64))
        m.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def incumbent(self) -> int:
        """Grid index with the highest posterior-mean utility."""
        return int(np.argmax(self.mean))

    @cached_property
    def covariance(self) -> np.ndarray:
        cov, _ = self.grid.prior(self.kernel)
        if len(self.support) == 0:
            out = cov.copy()
        else:
            half = solve_triangular(self._corr_chol, self._gain.T, lower=True)
            out = cov - half.T @ half
        return 0.5 * (out + out.T)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One posterior utility sample over the whole grid (Matheron update)."""
        _, prior_chol = self.grid.prior(self.kernel)
        s0 = prior_chol @ rng.standard_normal(self.grid.size)
        if len(self.support) == 0:
            return self.mean + s0
        resid = self._w_root.T @ s0[self.support] + rng.standard_normal(len(self.support))
        corr = cho_solve((self._corr_chol, True), resid)
        return self.mean + s0 - self._gain @ corr


def laplace_posterior(records, grid: ActionGrid,
                      kernel: PreferenceKernel = PreferenceKernel(),
                      sigma: float = 0.2, max_iter: int = 100,
                      grad_tol: float = 1e-8) -> PreferencePosterior:
    """Fit the Laplace approximation of the utility posterior.

    Newton iterations run on the involved-action subspace with step halving
    whenever the objective would decrease; convergence requires the
    objective gradient's infinity norm to drop below grad_tol.
    """
    records = tuple(records)
    cov, _ = grid.prior(kernel)
    a_count = grid.size
    if not records:
        empty = np.zeros((0, 0))
        return PreferencePosterior(grid=grid, kernel=kernel, sigma=sigma, records=(),
                                   mean=np.zeros(a_count), support=np.zeros(0, dtype=int),
                                   _w_root=empty, _gain=np.zeros((a_count, 0)),
                                   _corr_chol=empty)
    for r in records:
        if r.winner >= a_count or r.loser >= a_count:
            raise ValueError(f"record {r} outside grid of size {a_count}")

    support = np.unique([i for r in records for i in (r.winner, r.loser)])
    pos = {int(g): j for j, g in enumerate(support)}
    w_idx = np.array([pos[r.winner] for r in records])
    l_idx = np.array([pos[r.loser] for r in records])
    u = len(support)
    sig_uu = cov[np.ix_(support, support)]
    try:
        sig_fac = cho_factor(sig_uu + PRIOR_JITTER * np.eye(u), lower=True)
    except np.linalg.LinAlgError as e:
        raise LaplaceError(f"prior marginal not factorizable: {e}") from e

    def grad_hess(f_u):
        z = (f_u[w_idx] - f_u[l_idx]) / (SQRT2 * sigma)
        r, c = _probit_moments(z)
        g = np.zeros(u)
        np.add.at(g, w_idx, r / (SQRT2 * sigma))
        np.add.at(g, l_idx, -r / (SQRT2 * sigma))
        w = np.zeros((u, u))
        cc = c / (2.0 * sigma * sigma)
        np.add.at(w, (w_idx, w_idx), cc)
        np.add.at(w, (l_idx, l_idx), cc)
        np.add.at(w, (w_idx, l_idx), -cc)
        np.add.at(w, (l_idx, w_idx), -cc)
        return g, w

    def objective(f_u):
        z = (f_u[w_idx] - f_u[l_idx]) / (SQRT2 * sigma)
        return float(np.sum(log_ndtr(z))) - 0.5 * float(f_u @ cho_solve(sig_fac, f_u))

    f_u = np.zeros(u)
    achieved = np.inf
    for _ in range(max_iter):
        g, w = grad_hess(f_u)
        grad = g - cho_solve(sig_fac, f_u)
        achieved = float(np.max(np.abs(grad)))
        if achieved < grad_tol:
            break
        h = w + cho_solve(sig_fac, np.eye(u))
        try:
            delta = np.linalg.solve(h + 1e-12 * np.eye(u), grad)
        except np.linalg.LinAlgError as e:
            raise LaplaceError(f"singular Newton system: {e}") from e
        base = objective(f_u)
        scale = 1.0
        for _ in range(20):
            cand = f_u + scale * delta
            if objective(cand) >= base:
                break
            scale *= 0.5
        f_u = f_u + scale * delta
    else:
        g, _ = grad_hess(f_u)
        achieved = float(np.max(np.abs(g - cho_solve(sig_fac, f_u))))
        if achieved >= grad_tol:
            raise LaplaceError(
                f"Newton did not converge in {max_iter} iterations; "
                f"gradient inf-norm {achieved:.3e}")

    alpha = cho_solve(sig_fac, f_u)
    mean = cov[:, support] @ alpha
    _, w = grad_hess(f_u)
    evals, evecs = np.linalg.eigh(w)
    w_root = evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0))) @ evecs.T
    gain = cov[:, support] @ w_root
    corr = np.eye(u) + w_root @ sig_uu @ w_root
    try:
        corr_chol = cholesky(corr, lower=True)
    except np.linalg.LinAlgError as e:
        raise LaplaceError(f"posterior correction not factorizable: {e}") from e
    return PreferencePosterior(grid=grid, kernel=kernel, sigma=sigma, records=records,
                               mean=mean, support=support, _w_root=w_root,
                               _gain=gain, _corr_chol=corr_chol, grad_norm=achieved)


def update(posterior: PreferencePosterior, record: PreferenceRecord) -> PreferencePosterior:
    """Append one comparison and refit from scratch (grids are small)."""
    return laplace_posterior(posterior.records + (record,), posterior.grid,
                             posterior.kernel, posterior.sigma)


def select_query(posterior: PreferencePosterior, rng_seed: int,
                 max_attempts: int = 16) -> tuple[int, int]:
    """Two distinct candidate actions: argmaxes of two posterior samples.

    Coinciding argmaxes are resampled; if they still coincide the second
    proposal falls back to the runner-up of the last sample.
    """
    if posterior.grid.size < 2:
        raise ValueError("query selection needs a grid of at least 2 actions")
    rng = np.random.default_rng(rng_seed)
    b_sample = None
    for _ in range(max_attempts):
        a = int(np.argmax(posterior.sample(rng)))
        b_sample = posterior.sample(rng)
        b = int(np.argmax(b_sample))
        if a != b:
            return a, b
    order = np.argsort(b_sample)
    return a, int(order[-2] if order[-1] == a else order[-1])


def synthetic_oracle(index_a: int, index_b: int, grid: ActionGrid, true_utility,
                     sigma: float, seed: int) -> PreferenceRecord:
    """Simulated human: prefers a with the probit probability implied by the
    true utilities; stands in for live feedback in closed-loop tests."""
    u_a = float(true_utility(grid.actions[index_a]))
    u_b = float(true_utility(grid.actions[index_b]))
    p_a = preference_likelihood(u_a, u_b, sigma)
    rng = np.random.default_rng(np.random.SeedSequence([613, seed]))
    if rng.random() < p_a:
        return PreferenceRecord(winner=index_a, loser=index_b)
    return PreferenceRecord(winner=index_b, loser=index_a)
