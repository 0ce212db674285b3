"""Conditional SMC with local random-walk scattering (the O(NT) kernel).

Per time step the update first resamples ancestors with probabilities
proportional to the joint lineage weights m_t * G_t (reference ancestor
pinned), then scatters the time-t cloud around the reference state with
the same correlated Gaussian proposal as the embedded-HMM kernel.  The
new path is selected by a final-time draw followed by ancestral trace,
backward sampling, or ancestor sampling.  The induced kernel leaves the
joint smoothing distribution invariant for any N, T, D, and its
acceptance rates and expected squared jumping distances remain stable as
the spatial dimension grows.

No unconditional SMC counterpart of the underlying conditional sweep
exists (the would-be joint law of particles and ancestors is not a finite
measure), so unlike the classical kernel it cannot be paired with an
unconditional normalising-constant estimator; this is documented here and
deliberately not implemented.
"""

import itertools

import numpy as np

from ..model import ConfigError, ModelError
from ..selection import (
    boltzmann,
    index_from_uniform,
    rosenbluth_teller,
    rosenbluth_teller_at,
    softmax_log_weights,
)
from .base import GenealogyRecord
from .rwehmm import DiscreteTarget, scatter_cloud

__all__ = [
    "rwcsmc_update",
    "rwcsmc_forward_pass",
    "index_transition_matrix",
    "expected_evaluations",
]


def rwcsmc_update(model, path, cfg, rng):
    """One local-CSMC update of ``path``; returns (new_path, record)."""
    from . import _dispatch

    x = model.validate_path(path)
    T, D, N = model.T, model.D, cfg.n_particles
    ell = cfg.ell_for(T)

    eps_centre = rng.standard_normal((T, 1, D))
    eps = rng.standard_normal((T, N, D))
    u_anc = rng.random((max(T - 1, 0), N))
    u_as = rng.random(T - 1) if cfg.ancestor_sampling else None
    u_fin = rng.random()
    u_bw = rng.random(T - 1) if cfg.backward_sampling else None

    fused = _dispatch.fused_module(model)
    if fused is not None:
        g = model.gauss
        z, anc, k, omega, bw_dists = fused.rwcsmc_sweep(
            x,
            g.y,
            g.initial_variance,
            g.obs_variance,
            ell,
            eps_centre,
            eps,
            u_anc,
            u_as,
            u_fin,
            u_bw,
            cfg.forced_move,
        )
        if model.counter is not None:
            model.counter.g_evals += T * (N + 1)
            m = T * (N + 1)
            if cfg.backward_sampling or cfg.ancestor_sampling:
                m += (T - 1) * (N + 1)
            model.counter.m_evals += m
    else:
        z = scatter_cloud(x, ell, N, rng, eps_centre=eps_centre, eps=eps)
        anc, omega = rwcsmc_forward_pass(model, z, cfg, u_anc, u_as)
        k, bw_dists = _rwcsmc_select(model, z, anc, omega, cfg, u_fin, u_bw)

    record = GenealogyRecord(
        ancestors=anc,
        selected=k,
        accepted=k != 0,
        resample_weights=softmax_log_weights(omega, axis=1),
        backward_weights=bw_dists,
    )
    return z[np.arange(T), k].copy(), record


def rwcsmc_forward_pass(model, cloud, cfg, u_anc, u_as=None, pinned=True):
    """Conditional resampling pass over a fixed cloud.

    Returns (ancestors, omega) where omega[t, n] is the joint lineage log
    weight log m_t + log G_t of particle n at time t given its sampled
    ancestor.  With ``pinned`` the reference ancestor column is fixed to 0
    (or redrawn from the backward-type weights under ancestor sampling);
    without it all N+1 ancestors are drawn freely, which is the proposal
    used by the all-particle parameter updates.
    """
    z = np.asarray(cloud, dtype=np.float64)
    T, n_tot = z.shape[0], z.shape[1]
    anc = np.zeros((max(T - 1, 0), n_tot), dtype=np.int64)
    omega = np.empty((T, n_tot))
    omega[0] = model.log_m1_sum(z[0]) + model.log_g_sum(1, z[0])
    if pinned and not np.isfinite(omega[0, 0]):
        raise ModelError("reference lineage has zero density at t=1")
    for t in range(1, T):
        probs = softmax_log_weights(omega[t - 1])
        lo = 0
        if pinned:
            lo = 1
            if cfg is not None and cfg.ancestor_sampling:
                bw = omega[t - 1] + model.log_m_sum(t + 1, z[t - 1], z[t, 0][None, :])
                anc[t - 1, 0] = index_from_uniform(softmax_log_weights(bw), u_as[t - 1])
        for n in range(lo, n_tot):
            anc[t - 1, n] = index_from_uniform(probs, u_anc[t - 1, n - lo])
        parents = z[t - 1, anc[t - 1]]
        omega[t] = model.log_m_sum(t + 1, parents, z[t]) + model.log_g_sum(t + 1, z[t])
        if pinned and not np.isfinite(omega[t, 0]):
            raise ModelError(f"reference lineage has zero density at t={t + 1}")
    return anc, omega


def _rwcsmc_select(model, cloud, anc, omega, cfg, u_fin, u_bw):
    z = np.asarray(cloud, dtype=np.float64)
    T, n_tot = omega.shape
    k = np.empty(T, dtype=np.int64)
    h_final = omega[T - 1, 1:] - omega[T - 1, 0]
    final = rosenbluth_teller(h_final) if cfg.forced_move else boltzmann(h_final)
    k[T - 1] = index_from_uniform(final, u_fin)

    bw_dists = None
    if cfg.backward_sampling:
        bw_dists = np.empty((T - 1, n_tot))
        for t in range(T - 2, -1, -1):
            bw = omega[t] + model.log_m_sum(t + 2, z[t], z[t + 1, k[t + 1]][None, :])
            dist = softmax_log_weights(bw)
            bw_dists[t] = dist
            k[t] = index_from_uniform(dist, u_bw[t])
    else:
        for t in range(T - 2, -1, -1):
            k[t] = anc[t, k[t + 1]]
    return k, bw_dists


def index_transition_matrix(cloud, model, cfg, ref_indices, max_outcomes=200_000, target=None):
    """Exact law of the selected index vector given fixed cloud values.

    The reference path is placed at ``ref_indices`` (pinning the ancestor
    links between consecutive reference positions); all other ancestors
    are marginalised by exhaustive enumeration.  Returns an array of
    shape (N+1,)*T, one probability per index vector.  Supports the
    forced-move and backward-sampling variants; intended for tiny N, T.
    A precomputed ``target`` (the cloud's density tables) may be passed
    when evaluating many reference placements on one cloud.
    """
    z = np.asarray(cloud, dtype=np.float64)
    T, n_tot = z.shape[0], z.shape[1]
    j = np.asarray(ref_indices, dtype=np.int64)
    if j.shape != (T,):
        raise ConfigError("ref_indices must have length T")
    if cfg.ancestor_sampling:
        raise ConfigError("enumeration supports ancestral trace and backward sampling")

    n_free = (n_tot - 1) * max(T - 1, 0)
    if (n_tot**n_free) * (n_tot**T) > max_outcomes:
        raise ConfigError("instance too large to enumerate")

    if target is None:
        target = DiscreteTarget.from_cloud(z, model)
    omega0 = target.log_init + target.log_pot[0]

    out = np.zeros((n_tot,) * T)
    # configs: (probability, ancestor rows so far, per-time lineage weights)
    configs = [(1.0, [], [omega0])]
    for t in range(1, T):
        new = []
        free = [n for n in range(n_tot) if n != j[t]]
        for p, rows, omegas in configs:
            probs = softmax_log_weights(omegas[t - 1])
            for assign in itertools.product(range(n_tot), repeat=len(free)):
                a = np.empty(n_tot, dtype=np.int64)
                a[j[t]] = j[t - 1]
                pa = p
                for n, an in zip(free, assign):
                    a[n] = an
                    pa *= probs[an]
                omega_t = target.log_trans[t][a, np.arange(n_tot)] + target.log_pot[t]
                new.append((pa, rows + [a], omegas + [omega_t]))
        configs = new

    for p, rows, omegas in configs:
        if cfg.forced_move:
            final = rosenbluth_teller_at(omegas[T - 1], int(j[T - 1]))
        else:
            final = softmax_log_weights(omegas[T - 1])
        if not cfg.backward_sampling:
            for k_last in range(n_tot):
                k = np.empty(T, dtype=np.int64)
                k[T - 1] = k_last
                for t in range(T - 2, -1, -1):
                    k[t] = rows[t][k[t + 1]]
                out[tuple(k)] += p * final[k_last]
        else:
            partial = [(final[k_last], (k_last,)) for k_last in range(n_tot)]
            for t in range(T - 2, -1, -1):
                new_partial = []
                for pk, tail in partial:
                    bw = omegas[t] + target.log_trans[t + 1][:, tail[0]]
                    dist = softmax_log_weights(bw)
                    for kt in range(n_tot):
                        new_partial.append((pk * dist[kt], (kt,) + tail))
                partial = new_partial
            for pk, kvec in partial:
                out[kvec] += p * pk
    return out


def expected_evaluations(kernel, T, N, cfg):
    """Documented closed-form density-evaluation counts per update.

    Counts are per-particle vector evaluations.  Audited once by hand:
    the local kernel costs Theta(NT) while the embedded-HMM kernel costs
    Theta(N^2 T) through its transition tables.
    """
    extra = cfg.backward_sampling or cfg.ancestor_sampling
    if kernel == "rwcsmc":
        m = T * (N + 1) + (T - 1) * (N + 1) * int(extra)
        g = T * (N + 1)
    elif kernel == "rwehmm":
        m = (N + 1) + (T - 1) * (N + 1) ** 2
        g = T * (N + 1)
    elif kernel == "icsmc":
        m = (T - 1) * (N + 1) * int(extra)
        g = T * (N + 1)
    else:
        raise ConfigError(f"unknown kernel {kernel!r}")
    return {"m_evals": m, "g_evals": g}
