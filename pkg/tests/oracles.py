"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (direct solves, brute-force scans,
closed forms) and shares no code with the package under test.
"""
import math

import numpy as np


def naive_gp_predict(train_x, train_y, lengthscales, signal_variance, noise_variance,
                     queries):
    """Textbook GP regression via a direct O(n^3) solve with np.linalg.inv."""
    ls = np.asarray(lengthscales, dtype=np.float64)

    def k(a, b):
        d = (a[:, None, :] - b[None, :, :]) / ls
        return signal_variance * np.exp(-0.5 * np.sum(d * d, axis=-1))

    K = k(train_x, train_x) + noise_variance * np.eye(len(train_x))
    K_inv = np.linalg.inv(K)
    ks = k(queries, train_x)
    mean = ks @ K_inv @ train_y
    var = signal_variance - np.einsum("qn,nm,qm->q", ks, K_inv, ks)
    return mean, var


def direct_product_log_likelihood(pairs, f, sigma):
    """log of the plain product of per-comparison probit probabilities."""
    prod = 1.0
    for winner, loser in pairs:
        z = (f[winner] - f[loser]) / (math.sqrt(2.0) * sigma)
        prod *= 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    return math.log(prod)


def brute_force_map_3(pairs, prior_cov, sigma, lo=-1.5, hi=1.5, step=0.01):
    """Exhaustive grid search of the 3-utility MAP (chunked over one axis)."""
    from scipy.special import erf as _erf  # vectorized; algorithm stays exhaustive

    axis = np.arange(lo, hi + step / 2, step)
    prior_inv = np.linalg.inv(prior_cov)
    best_val, best_f = -np.inf, None
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    flat1, flat2 = g1.ravel(), g2.ravel()
    for f0 in axis:
        f = np.stack([np.full_like(flat1, f0), flat1, flat2], axis=1)
        z = np.zeros(len(f))
        for winner, loser in pairs:
            arg = (f[:, winner] - f[:, loser]) / (math.sqrt(2.0) * sigma)
            z += np.log(0.5 * (1.0 + _erf(arg / math.sqrt(2.0))))
        quad = -0.5 * np.einsum("ni,ij,nj->n", f, prior_inv, f)
        vals = z + quad
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_f = float(vals[i]), f[i].copy()
    return best_f


def damped_oscillator_position(x0, v0, k, b, m, t):
    """Closed-form 1D damped oscillator x(t) for x'' = -(k x + b x')/m."""
    w0 = math.sqrt(k / m)
    zeta = b / (2.0 * math.sqrt(k * m))
    if zeta < 1.0:
        wd = w0 * math.sqrt(1.0 - zeta * zeta)
        a = x0
        c = (v0 + zeta * w0 * x0) / wd
        return math.exp(-zeta * w0 * t) * (a * math.cos(wd * t) + c * math.sin(wd * t))
    if abs(zeta - 1.0) < 1e-12:
        return (x0 + (v0 + w0 * x0) * t) * math.exp(-w0 * t)
    r1 = -w0 * (zeta - math.sqrt(zeta * zeta - 1.0))
    r2 = -w0 * (zeta + math.sqrt(zeta * zeta - 1.0))
    c2 = (v0 - r1 * x0) / (r2 - r1)
    c1 = x0 - c2
    return c1 * math.exp(r1 * t) + c2 * math.exp(r2 * t)


def reference_rms_mm(pred, truth):
    """Two-line RMS reference in millimeters."""
    d = np.asarray(pred) - np.asarray(truth)
    return float(np.sqrt((d ** 2).sum(axis=1).mean()) * 1000.0)


def brute_force_align(query, stored_poses):
    """Scan every index for the nearest stored pose; first minimum wins."""
    best, best_d = 0, float("inf")
    for i, p in enumerate(stored_poses):
        d = float(np.hypot(*(np.asarray(p) - np.asarray(query))))
        if d < best_d - 1e-15:
            best, best_d = i, d
    return best
