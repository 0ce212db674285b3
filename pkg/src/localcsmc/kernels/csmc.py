"""Conditional SMC update with prior mutations (the global-proposal kernel).

One update pins the reference path at particle index 0, propagates N free
particles through the model dynamics with conditional multinomial
resampling on the potentials, and selects the new path by a final-time
draw followed by an ancestral trace, backward sampling, or ancestor
sampling.  Leaves the joint smoothing distribution invariant for any
N, T, D.  In high spatial dimension the free lineages coalesce with the
reference and all acceptance rates collapse unless N grows exponentially
with D.
"""

import itertools

import numpy as np

from ..model import ModelError
from ..selection import (
    boltzmann,
    index_from_uniform,
    rosenbluth_teller,
    rosenbluth_teller_at,
    softmax_log_weights,
)
from .base import GenealogyRecord

__all__ = ["icsmc_update", "icsmc_index_distribution", "csmc_acceptance_profile"]


def icsmc_update(model, path, cfg, rng):
    """One conditional-SMC update of ``path``; returns (new_path, record)."""
    from . import _dispatch

    fused = _dispatch.fused_module(model)
    if fused is not None:
        return _fused_icsmc_update(model, path, cfg, rng, fused)
    return _generic_icsmc_update(model, path, cfg, rng)


def _generic_icsmc_update(model, path, cfg, rng):
    x = model.validate_path(path)
    T, D, N = model.T, model.D, cfg.n_particles

    z = np.empty((T, N + 1, D))
    anc = np.zeros((max(T - 1, 0), N + 1), dtype=np.int64)
    lw = np.empty((T, N + 1))

    z[0, 0] = x[0]
    if N:
        z[0, 1:] = model.sample_initial(N, rng)
    lw[0] = model.log_g_sum(1, z[0])
    if not np.isfinite(lw[0, 0]):
        raise ModelError("reference path has zero potential at t=1")

    for t in range(1, T):
        probs = softmax_log_weights(lw[t - 1])
        if cfg.ancestor_sampling:
            bw = lw[t - 1] + model.log_m_sum(t + 1, z[t - 1], x[t][None, :])
            anc[t - 1, 0] = index_from_uniform(softmax_log_weights(bw), rng.random())
        for n in range(1, N + 1):
            anc[t - 1, n] = index_from_uniform(probs, rng.random())
        z[t, 0] = x[t]
        z[t, 1:] = model.sample_transition(t + 1, z[t - 1, anc[t - 1, 1:]], rng)
        lw[t] = model.log_g_sum(t + 1, z[t])
        if not np.isfinite(lw[t, 0]):
            raise ModelError(f"reference path has zero potential at t={t + 1}")

    return _select_and_trace(model, x, z, anc, lw, cfg, rng)


def _select_and_trace(model, x, z, anc, lw, cfg, rng):
    """Final selection plus index trace shared by the generic kernels with
    potential-only weights."""
    T, N = lw.shape[0], lw.shape[1] - 1
    k = np.empty(T, dtype=np.int64)
    h_final = lw[T - 1, 1:] - lw[T - 1, 0]
    final_dist = rosenbluth_teller(h_final) if cfg.forced_move else boltzmann(h_final)
    k[T - 1] = index_from_uniform(final_dist, rng.random())

    backward_weights = None
    if cfg.backward_sampling:
        backward_weights = np.empty((T - 1, N + 1))
        for t in range(T - 2, -1, -1):
            bw = lw[t] + model.log_m_sum(t + 2, z[t], z[t + 1, k[t + 1]][None, :])
            dist = softmax_log_weights(bw)
            backward_weights[t] = dist
            k[t] = index_from_uniform(dist, rng.random())
    else:
        for t in range(T - 2, -1, -1):
            k[t] = anc[t, k[t + 1]]

    new_path = z[np.arange(T), k].copy()
    record = GenealogyRecord(
        ancestors=anc,
        selected=k,
        accepted=k != 0,
        resample_weights=softmax_log_weights(lw, axis=1),
        backward_weights=backward_weights,
    )
    return new_path, record


def _fused_icsmc_update(model, path, cfg, rng, fused):
    """Gaussian-preset path: pre-draws all randomness in a fixed order and
    hands the sweep to the active backend."""
    x = model.validate_path(path)
    T, D, N = model.T, model.D, cfg.n_particles
    g = model.gauss

    eps = rng.standard_normal((T, N, D))
    u_anc = rng.random((max(T - 1, 0), N))
    u_as = rng.random(T - 1) if cfg.ancestor_sampling else None
    u_fin = rng.random()
    u_bw = rng.random(T - 1) if cfg.backward_sampling else None

    z, anc, k, lw, bw_dists = fused.icsmc_sweep(
        x,
        g.y,
        g.initial_variance,
        g.obs_variance,
        eps,
        u_anc,
        u_as,
        u_fin,
        u_bw,
        cfg.forced_move,
    )
    if model.counter is not None:
        model.counter.g_evals += T * (N + 1)
        if cfg.backward_sampling or cfg.ancestor_sampling:
            model.counter.m_evals += (T - 1) * (N + 1)
    record = GenealogyRecord(
        ancestors=anc,
        selected=k,
        accepted=k != 0,
        resample_weights=softmax_log_weights(lw, axis=1),
        backward_weights=bw_dists,
    )
    return z[np.arange(T), k].copy(), record


def icsmc_index_distribution(cloud, model, cfg, ref_indices=None):
    """Exact conditional law of (A, K) given fixed particle values.

    ``cloud`` has shape (T, N+1, D) with the reference lineage sitting at
    ``ref_indices`` (default all zeros).  Returns a dict mapping
    (ancestor tuples, k tuple) -> probability.  Because the resampling
    weights depend only on the potentials, ancestor draws are independent
    across time, which keeps the enumeration cheap; intended for tiny N
    and T.
    """
    z = np.asarray(cloud, dtype=np.float64)
    T, n_tot = z.shape[0], z.shape[1]
    N = n_tot - 1
    j = np.zeros(T, dtype=np.int64) if ref_indices is None else np.asarray(ref_indices)

    n_free = N * max(T - 1, 0)
    if (n_tot**n_free) * (n_tot**T) > 2e6:
        raise ValueError("instance too large to enumerate")

    lw = np.stack([model.log_g_sum(t + 1, z[t]) for t in range(T)])
    probs = [softmax_log_weights(lw[t]) for t in range(T)]

    out = {}
    free_slots = [(t, n) for t in range(1, T) for n in range(n_tot) if n != j[t]]
    for assignment in itertools.product(range(n_tot), repeat=len(free_slots)):
        anc = np.zeros((max(T - 1, 0), n_tot), dtype=np.int64)
        p_anc = 1.0
        for (t, n), a in zip(free_slots, assignment):
            anc[t - 1, n] = a
            p_anc *= probs[t - 1][a]
        for t in range(1, T):
            anc[t - 1, j[t]] = j[t - 1]
        if cfg.forced_move:
            final = rosenbluth_teller_at(lw[T - 1], int(j[T - 1]))
        else:
            final = softmax_log_weights(lw[T - 1])
        for k_last in range(n_tot):
            p_sel = p_anc * final[k_last]
            if cfg.backward_sampling:
                _accumulate_backward(
                    out, anc, k_last, p_sel, lw, z, model, T, n_tot
                )
            else:
                k = np.empty(T, dtype=np.int64)
                k[T - 1] = k_last
                for t in range(T - 2, -1, -1):
                    k[t] = anc[t, k[t + 1]]
                key = (_key(anc), tuple(k))
                out[key] = out.get(key, 0.0) + p_sel
    return out


def _accumulate_backward(out, anc, k_last, p_sel, lw, z, model, T, n_tot):
    partial = [(p_sel, (k_last,))]
    for t in range(T - 2, -1, -1):
        new = []
        for p, tail in partial:
            bw = lw[t] + model.log_m_sum(t + 2, z[t], z[t + 1, tail[0]][None, :])
            dist = softmax_log_weights(bw)
            for kt in range(n_tot):
                new.append((p * dist[kt], (kt,) + tail))
        partial = new
    for p, k in partial:
        key = (_key(anc), k)
        out[key] = out.get(key, 0.0) + p


def _key(anc):
    return tuple(tuple(row) for row in anc)


def csmc_acceptance_profile(model, cfg, chain_length, replicates, rng, initial_sampler):
    """Per-time acceptance rates averaged over ``replicates`` chains of
    ``chain_length`` updates, each started from an exact stationary draw
    supplied by ``initial_sampler(rng)``."""
    accept = np.zeros(model.T)
    streams = rng.spawn(replicates)
    for child in streams:
        x = initial_sampler(child)
        for _ in range(chain_length):
            x, rec = icsmc_update(model, x, cfg, child)
            accept += rec.accepted
    return accept / (chain_length * replicates)
