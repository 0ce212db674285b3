"""NumPy implementation of the fused Gaussian-preset sweeps.

This is the fallback backend selected at import time when the compiled
extension is unavailable (and the reference the extension is tested
against).  All randomness is pre-drawn by the caller in a fixed order, so
both backends consume the RNG stream identically.  Model family: initial
density N(0, v1), unit-variance random-walk transitions and potentials
N(y_t; x_t, r), all replicated over D dimensions.
"""

import numpy as np

from ..selection import (
    boltzmann,
    index_from_uniform,
    rosenbluth_teller,
    softmax_log_weights,
)

_LOG_2PI = float(np.log(2.0 * np.pi))


def _log_g_rows(z, y_t, r):
    """Summed log potential of each particle row; z is (n, D)."""
    d = z.shape[-1]
    return -0.5 * d * (_LOG_2PI + np.log(r)) - np.square(y_t - z).sum(-1) / (2.0 * r)


def _log_m_rows(z_prev, z_t):
    """Summed transition log density between paired rows."""
    d = z_prev.shape[-1]
    return -0.5 * d * _LOG_2PI - 0.5 * np.square(z_t - z_prev).sum(-1)


def _log_m1_rows(z, v1):
    d = z.shape[-1]
    return -0.5 * d * (_LOG_2PI + np.log(v1)) - np.square(z).sum(-1) / (2.0 * v1)


def _draw(probs, u):
    cdf = np.cumsum(probs)
    cdf[-1] = max(cdf[-1], 1.0)
    return np.searchsorted(cdf, u, side="right")


def icsmc_sweep(x, y, v1, r, eps, u_anc, u_as, u_fin, u_bw, forced_move):
    T, N, D = eps.shape
    z = np.empty((T, N + 1, D))
    anc = np.zeros((max(T - 1, 0), N + 1), dtype=np.int64)
    lw = np.empty((T, N + 1))

    z[0, 0] = x[0]
    z[0, 1:] = np.sqrt(v1) * eps[0]
    lw[0] = _log_g_rows(z[0], y[0], r)
    for t in range(1, T):
        probs = softmax_log_weights(lw[t - 1])
        if u_as is not None:
            bw = lw[t - 1] + _log_m_rows(z[t - 1], x[t])
            anc[t - 1, 0] = _draw(softmax_log_weights(bw), u_as[t - 1])
        anc[t - 1, 1:] = _draw(probs, u_anc[t - 1])
        z[t, 0] = x[t]
        z[t, 1:] = z[t - 1, anc[t - 1, 1:]] + eps[t]
        lw[t] = _log_g_rows(z[t], y[t], r)

    k, bw_dists = _select(z, anc, lw, None, u_fin, u_bw, forced_move, with_m=False)
    return z, anc, k, lw, bw_dists


def rwcsmc_sweep(x, y, v1, r, ell, eps_centre, eps, u_anc, u_as, u_fin, u_bw, forced_move):
    T, N, D = eps.shape
    scale = np.sqrt(ell / (2.0 * D))[:, None, None]
    z = np.empty((T, N + 1, D))
    z[:, 0, :] = x
    z[:, 1:, :] = x[:, None, :] + scale * (eps_centre + eps)

    anc = np.zeros((max(T - 1, 0), N + 1), dtype=np.int64)
    omega = np.empty((T, N + 1))
    omega[0] = _log_m1_rows(z[0], v1) + _log_g_rows(z[0], y[0], r)
    for t in range(1, T):
        probs = softmax_log_weights(omega[t - 1])
        if u_as is not None:
            bw = omega[t - 1] + _log_m_rows(z[t - 1], x[t])
            anc[t - 1, 0] = _draw(softmax_log_weights(bw), u_as[t - 1])
        anc[t - 1, 1:] = _draw(probs, u_anc[t - 1])
        parents = z[t - 1, anc[t - 1]]
        omega[t] = _log_m_rows(parents, z[t]) + _log_g_rows(z[t], y[t], r)

    k, bw_dists = _select(z, anc, omega, None, u_fin, u_bw, forced_move, with_m=True)
    return z, anc, k, omega, bw_dists


def _select(z, anc, lw, model, u_fin, u_bw, forced_move, with_m):
    T, n_tot = lw.shape
    k = np.empty(T, dtype=np.int64)
    h = lw[T - 1, 1:] - lw[T - 1, 0]
    final = rosenbluth_teller(h) if forced_move else boltzmann(h)
    k[T - 1] = index_from_uniform(final, u_fin)
    bw_dists = None
    if u_bw is not None:
        bw_dists = np.empty((T - 1, n_tot))
        for t in range(T - 2, -1, -1):
            bw = lw[t] + _log_m_rows(z[t], z[t + 1, k[t + 1]])
            dist = softmax_log_weights(bw)
            bw_dists[t] = dist
            k[t] = index_from_uniform(dist, u_bw[t])
    else:
        for t in range(T - 2, -1, -1):
            k[t] = anc[t, k[t + 1]]
    return k, bw_dists


def rwehmm_sweep(x, y, v1, r, ell, eps_centre, eps, u_bw):
    T, N, D = eps.shape
    scale = np.sqrt(ell / (2.0 * D))[:, None, None]
    z = np.empty((T, N + 1, D))
    z[:, 0, :] = x
    z[:, 1:, :] = x[:, None, :] + scale * (eps_centre + eps)

    n_tot = N + 1
    lw = np.empty((T, n_tot))
    trans = np.empty((max(T - 1, 0), n_tot, n_tot))
    lw[0] = _log_m1_rows(z[0], v1) + _log_g_rows(z[0], y[0], r)
    lw[0] -= _logsumexp(lw[0])
    for t in range(1, T):
        trans[t - 1] = _log_m_rows(z[t - 1][:, None, :], z[t][None, :, :])
        lw[t] = _logsumexp_cols(lw[t - 1][:, None] + trans[t - 1])
        lw[t] += _log_g_rows(z[t], y[t], r)
        lw[t] -= _logsumexp(lw[t])

    k = np.empty(T, dtype=np.int64)
    bw_dists = np.empty((T, n_tot))
    dist = softmax_log_weights(lw[T - 1])
    bw_dists[T - 1] = dist
    k[T - 1] = _draw(dist, u_bw[T - 1])
    for t in range(T - 2, -1, -1):
        dist = softmax_log_weights(lw[t] + trans[t][:, k[t + 1]])
        bw_dists[t] = dist
        k[t] = _draw(dist, u_bw[t])
    return z, k, lw, bw_dists


def _logsumexp(v):
    m = v.max()
    return m + np.log(np.exp(v - m).sum())


def _logsumexp_cols(m):
    mx = m.max(axis=0)
    return mx + np.log(np.exp(m - mx).sum(axis=0))
