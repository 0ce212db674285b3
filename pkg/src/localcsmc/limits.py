"""Large-dimension limiting genealogy laws, moment inputs and bounds.

As the spatial dimension grows, the log-weight differences that drive
every selection step in the local kernels converge to Gaussian vectors
whose means and covariances are expectations of derivative functionals
of the per-dimension smoothing law.  This module estimates those moments
by Monte Carlo over exact smoothing draws, simulates the limiting
genealogy process they define, and evaluates the closed-form acceptance
bounds used as reference values by the validation suites.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .kernels.base import KernelConfig
from .model import ConfigError
from .selection import boltzmann_batch, rosenbluth_teller_batch

__all__ = [
    "LimitMoments",
    "estimate_limit_moments",
    "pool_limit_moments",
    "simulate_limit_genealogy",
    "simulate_limit_indices",
    "limit_acceptance_rate",
    "limit_acceptance_rates",
    "analytic_bounds",
]

_FD_STEP = 1e-4


@dataclass
class LimitMoments:
    """Per-time moment inputs of the limiting genealogy laws.

    With g_t the summed log transition-plus-potential term of one
    dimension (gbar_t = log m_t + log G_t, zero beyond the horizon):
    ``v2[t]`` is the smoothing expectation of (d/dx_t gbar_t)^2, ``w2[t]``
    of (d/dx_t gbar_{t+1})^2, ``cross[t]`` their product moment, and
    ``mv``/``mw`` the expectations of the second derivatives.  ``i_t`` is
    the Fisher-type information v2 + 2 cross + w2, which also equals
    -(mv + mw) by integration by parts; both versions are kept so the
    identity can be checked.  Standard errors accompany every entry.
    """

    ell: np.ndarray
    v2: np.ndarray
    w2: np.ndarray
    cross: np.ndarray
    mv: np.ndarray
    mw: np.ndarray
    se_v2: np.ndarray
    se_w2: np.ndarray
    se_cross: np.ndarray
    se_mv: np.ndarray
    se_mw: np.ndarray
    se_i: np.ndarray
    n_draws: int

    @property
    def T(self):
        return self.v2.shape[0]

    @property
    def i_t(self):
        return self.v2 + 2.0 * self.cross + self.w2

    @property
    def i_t_curvature(self):
        return -(self.mv + self.mw)


def _derivative_funcs(model):
    """First/second partials of gbar_t and gbar_{t+1} w.r.t. x_t,
    falling back to central finite differences with step
    1e-4 * (1 + |x|) when analytic callbacks are missing."""
    c = model.components

    def fd1(f, x):
        h = _FD_STEP * (1.0 + np.abs(x))
        return (f(x + h) - f(x - h)) / (2.0 * h)

    def fd2(f, x):
        h = _FD_STEP * (1.0 + np.abs(x))
        return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)

    def d1_g(t, x):
        if c.d1_log_g is not None:
            return c.d1_log_g(t, x)
        return fd1(lambda v: c.log_g(t, v), x)

    def d2_g(t, x):
        if c.d2_log_g is not None:
            return c.d2_log_g(t, x)
        return fd2(lambda v: c.log_g(t, v), x)

    def d1_m_curr(t, xp, x):
        if c.d1_log_m is not None:
            return c.d1_log_m(t, xp, x)[1]
        return fd1(lambda v: c.log_m(t, xp, v), x)

    def d2_m_curr(t, xp, x):
        if c.d2_log_m is not None:
            return c.d2_log_m(t, xp, x)[1]
        return fd2(lambda v: c.log_m(t, xp, v), x)

    def d1_m_prev(t, xp, x):
        if c.d1_log_m is not None:
            return c.d1_log_m(t, xp, x)[0]
        return fd1(lambda v: c.log_m(t, v, x), xp)

    def d2_m_prev(t, xp, x):
        if c.d2_log_m is not None:
            return c.d2_log_m(t, xp, x)[0]
        return fd2(lambda v: c.log_m(t, v, x), xp)

    def d1_m1(x):
        if c.d1_log_m1 is not None:
            return c.d1_log_m1(x)
        return fd1(c.log_m1, x)

    def d2_m1(x):
        if c.d2_log_m1 is not None:
            return c.d2_log_m1(x)
        return fd2(c.log_m1, x)

    return d1_g, d2_g, d1_m_curr, d2_m_curr, d1_m_prev, d2_m_prev, d1_m1, d2_m1


def _moment_samples(model, paths):
    """Per-draw functional values; ``paths`` is (M, T).  Returns dict of
    (T, M) arrays for the five moment families."""
    d1_g, d2_g, d1_mc, d2_mc, d1_mp, d2_mp, d1_m1, d2_m1 = _derivative_funcs(model)
    T = model.T
    x = np.asarray(paths, dtype=np.float64)
    M = x.shape[0]
    out = {key: np.empty((T, M)) for key in ("dv", "dw", "d2v", "d2w")}
    for t in range(T):
        xt = x[:, t]
        if t == 0:
            dv = d1_m1(xt) + d1_g(1, xt)
            d2v = d2_m1(xt) + d2_g(1, xt)
        else:
            xp = x[:, t - 1]
            dv = d1_mc(t + 1, xp, xt) + d1_g(t + 1, xt)
            d2v = d2_mc(t + 1, xp, xt) + d2_g(t + 1, xt)
        if t < T - 1:
            xn = x[:, t + 1]
            dw = d1_mp(t + 2, xt, xn)
            d2w = d2_mp(t + 2, xt, xn)
        else:
            dw = np.zeros(M)
            d2w = np.zeros(M)
        out["dv"][t] = dv
        out["dw"][t] = dw
        out["d2v"][t] = d2v
        out["d2w"][t] = d2w
    return out


def _moments_from_samples(samples, ell, T):
    def mean_se(arr):
        m = arr.mean(axis=1)
        se = arr.std(axis=1, ddof=1) / np.sqrt(arr.shape[1])
        return m, se

    dv, dw = samples["dv"], samples["dw"]
    v2, se_v2 = mean_se(dv * dv)
    w2, se_w2 = mean_se(dw * dw)
    cross, se_cross = mean_se(dv * dw)
    mv, se_mv = mean_se(samples["d2v"])
    mw, se_mw = mean_se(samples["d2w"])
    score = dv + dw
    _, se_i = mean_se(score * score)
    return LimitMoments(
        ell=np.asarray(ell, dtype=np.float64),
        v2=v2,
        w2=w2,
        cross=cross,
        mv=mv,
        mw=mw,
        se_v2=se_v2,
        se_w2=se_w2,
        se_cross=se_cross,
        se_mv=se_mv,
        se_mw=se_mw,
        se_i=se_i,
        n_draws=dv.shape[1],
    )


def estimate_limit_moments(model, exact_sampler, n_draws, rng, ell=1.0):
    """Monte Carlo moment estimates over exact smoothing draws.

    ``exact_sampler(M, rng)`` must return an (M, T) array of independent
    draws from the per-dimension smoothing law.  Derivatives come from
    the model's callbacks or finite differences.
    """
    if n_draws < 2:
        raise ConfigError("need at least two draws")
    paths = np.asarray(exact_sampler(n_draws, rng), dtype=np.float64)
    if paths.shape != (n_draws, model.T):
        raise ConfigError(f"sampler returned shape {paths.shape}")
    samples = _moment_samples(model, paths)
    ell_arr = KernelConfig(n_particles=1, ell=ell).ell_for(model.T)
    return _moments_from_samples(samples, ell_arr, model.T)


def pool_limit_moments(models_and_samplers, n_draws_each, rng, ell=1.0):
    """Moments averaged over several (model, sampler) pairs.

    Used when the experiment redraws the observation sequence per run:
    each pair contributes draws from one observation sequence and the
    pooled estimate targets the jointly averaged moments.
    """
    all_samples = None
    T = None
    for model, sampler in models_and_samplers:
        paths = np.asarray(sampler(n_draws_each, rng), dtype=np.float64)
        samples = _moment_samples(model, paths)
        T = model.T
        if all_samples is None:
            all_samples = samples
        else:
            all_samples = {
                key: np.concatenate([all_samples[key], samples[key]], axis=1)
                for key in all_samples
            }
    ell_arr = KernelConfig(n_particles=1, ell=ell).ell_for(T)
    return _moments_from_samples(all_samples, ell_arr, T)


def _chol2(v2, cross, w2):
    """Cholesky factor of the 2x2 moment matrix, tolerant of the
    semidefinite boundary (w2 = cross = 0 beyond the horizon)."""
    a = np.sqrt(max(v2, 0.0))
    if a == 0.0:
        return np.zeros((2, 2))
    b = cross / a
    c2 = w2 - b * b
    return np.array([[a, 0.0], [b, np.sqrt(max(c2, 0.0))]])


def _draw_vw(moments, t, n_particles, n_rows, rng):
    """(V, W) rows for one time step: shape (n_rows, N) each.

    Uses the shared-centre construction matching the (I + 11')/2
    correlation: eta_n = (e_0 + e_n)/sqrt(2) with iid 2-vectors e.
    """
    ell = moments.ell[t]
    B = _chol2(moments.v2[t], moments.cross[t], moments.w2[t])
    shared = rng.standard_normal((n_rows, 1, 2))
    own = rng.standard_normal((n_rows, n_particles, 2))
    eta = (shared + own) / np.sqrt(2.0)
    vw = np.sqrt(ell) * (eta @ B.T)
    v = vw[:, :, 0] + 0.5 * ell * moments.mv[t]
    w = vw[:, :, 1] + 0.5 * ell * moments.mw[t]
    return v, w


def _rows_categorical(probs, u):
    """Vectorised inverse-CDF draws: probs (M, n), u (M,) or (M, k)."""
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = np.maximum(cdf[:, -1], 1.0)
    if u.ndim == 1:
        u = u[:, None]
    idx = (u[:, :, None] >= cdf[:, None, :]).sum(axis=2)
    return idx


def _simulate_block(moments, n_particles, cfg, M, rng, return_ancestors):
    T = moments.T
    N = n_particles
    v = np.empty((T, M, N))
    w = np.empty((T, M, N))
    for t in range(T):
        v[t], w[t] = _draw_vw(moments, t, N, M, rng)

    anc = np.zeros((max(T - 1, 0), M, N + 1), dtype=np.int64)
    w_prev_sel = np.zeros((M, N))  # w_{t-1} at the sampled ancestors, ref 0
    rows = np.arange(M)
    for t in range(1, T):
        h = v[t - 1] + w_prev_sel if t >= 2 else v[t - 1]
        probs = boltzmann_batch(h)
        u = rng.random((M, N))
        anc[t - 1, :, 1:] = _rows_categorical(probs, u)
        w_ext = np.concatenate([np.zeros((M, 1)), w[t - 1]], axis=1)
        w_prev_sel = w_ext[rows[:, None], anc[t - 1, :, 1:]]

    h_final = v[T - 1] + w_prev_sel if T >= 2 else v[T - 1]
    if cfg.forced_move:
        final = rosenbluth_teller_batch(h_final)
    else:
        final = boltzmann_batch(h_final)
    k = np.empty((M, T), dtype=np.int64)
    k[:, T - 1] = _rows_categorical(final, rng.random(M))[:, 0]

    if cfg.backward_sampling:
        for t in range(T - 2, -1, -1):
            w_prev = np.zeros((M, N))
            if t >= 1:
                w_ext = np.concatenate([np.zeros((M, 1)), w[t - 1]], axis=1)
                w_prev = w_ext[rows[:, None], anc[t - 1, :, 1:]]
            h = v[t] + w[t] + w_prev
            probs = boltzmann_batch(h)
            k[:, t] = _rows_categorical(probs, rng.random(M))[:, 0]
    else:
        for t in range(T - 2, -1, -1):
            k[:, t] = anc[t][rows, k[:, t + 1]]
    if return_ancestors:
        return k, anc
    return k, None


def simulate_limit_indices(
    moments, n_particles, cfg, n_reps, rng, return_ancestors=False, block=4096
):
    """Batch simulation of the limiting genealogy; returns selected index
    paths of shape (n_reps, T) (plus ancestors when requested).

    Follows the limiting law of the local-CSMC kernel: per-time Gaussian
    weight perturbations (V, W), resampling through the Boltzmann rule on
    v_t + w_{t-1} at the sampled ancestor, final-time selection with the
    configured variant, then trace or backward selection on
    v_t + w_t + w_{t-1}.  With the time-factorised moments (w identically
    zero) and backward sampling this is also the limiting law of the
    embedded-HMM kernel.  Simulated in blocks to bound memory.
    """
    if cfg.ancestor_sampling:
        raise ConfigError("limit simulation supports trace and backward sampling")
    ks, ancs = [], []
    left = n_reps
    while left > 0:
        m = min(left, block)
        k, anc = _simulate_block(moments, n_particles, cfg, m, rng, return_ancestors)
        ks.append(k)
        if return_ancestors:
            ancs.append(anc)
        left -= m
    k = np.concatenate(ks, axis=0)
    if return_ancestors:
        return k, np.concatenate(ancs, axis=1)
    return k


def simulate_limit_genealogy(moments, n_particles, cfg, rng):
    """One draw from the limiting genealogy as a GenealogyRecord."""
    from .kernels.base import GenealogyRecord

    k, anc = simulate_limit_indices(
        moments, n_particles, cfg, 1, rng, return_ancestors=True
    )
    return GenealogyRecord(
        ancestors=anc[:, 0, :], selected=k[0], accepted=k[0] != 0
    )


def limit_acceptance_rates(moments, n_particles, cfg, n_reps, rng):
    """Limiting acceptance-rate estimates at every time, with standard
    errors; one simulation serves all T entries."""
    k = simulate_limit_indices(moments, n_particles, cfg, n_reps, rng)
    p = (k != 0).mean(axis=0)
    se = np.sqrt(p * (1.0 - p) / n_reps)
    return p, se


def limit_acceptance_rate(moments, n_particles, t, cfg, n_reps, rng):
    """Monte Carlo estimate (and standard error) of the limiting
    acceptance rate P(K_t != 0) at 1-based time t."""
    p, se = limit_acceptance_rates(moments, n_particles, cfg, n_reps, rng)
    return float(p[t - 1]), float(se[t - 1])


def analytic_bounds(ell_t, i_t, n_particles, c_growth=None):
    """Closed-form reference rates for scale ell_t and information i_t.

    ``bs_bound`` (equal to the embedded-HMM bound) lower-bounds the
    limiting acceptance rate with backward sampling; ``no_bs_bound``
    requires the particles-per-horizon growth constant; ``rwmh_rate`` is
    the forced-move single-proposal limit 2 Phi(-sqrt(ell I)/2).
    """
    if ell_t <= 0 or i_t <= 0 or n_particles < 1:
        raise ConfigError("inputs must be positive")
    expo = np.exp(ell_t * i_t)
    bound = 1.0 / (1.0 + expo / n_particles)
    out = {
        "ehmm_bound": float(bound),
        "bs_bound": float(bound),
        "rwmh_rate": float(2.0 * norm.cdf(-np.sqrt(ell_t * i_t) / 2.0)),
    }
    out["no_bs_bound"] = float(np.exp(-expo / c_growth)) if c_growth else None
    return out
