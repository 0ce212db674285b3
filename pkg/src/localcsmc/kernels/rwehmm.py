"""Embedded-HMM style kernel with local Gaussian scattering.

The update scatters N particles per time step around the reference path
with correlated Gaussian noise of per-dimension variance ell_t / D and
then draws the new index path exactly from the induced discrete target
over index vectors, using forward filtering backward sampling in
O(N^2 T) density evaluations.  No resampling is involved, so the
genealogy record carries no ancestors.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp

from ..selection import index_from_uniform, softmax_log_weights
from .base import GenealogyRecord

__all__ = [
    "scatter_cloud",
    "DiscreteTarget",
    "ffbs_index_sample",
    "rwehmm_update",
]


def scatter_cloud(path, ell, N, rng, eps_centre=None, eps=None):
    """Scatter N particles around each reference state.

    Per (t, d): a centre is drawn as N(x_{t,d}, ell_t / (2D)) and the N
    particles as independent N(centre, ell_t / (2D)), which realises the
    joint normal with covariance (ell_t / D) * (I + 11')/2 without any
    N x N factorisation.  Returns an array of shape (T, N+1, D) with the
    reference copied at index 0.  Pre-drawn standard normals may be
    supplied to share a draw protocol with the compiled backend.
    """
    x = np.asarray(path, dtype=np.float64)
    T, D = x.shape
    ell = np.asarray(ell, dtype=np.float64)
    if eps_centre is None:
        eps_centre = rng.standard_normal((T, 1, D))
    if eps is None:
        eps = rng.standard_normal((T, N, D))
    scale = np.sqrt(ell / (2.0 * D))[:, None, None]
    z = np.empty((T, N + 1, D))
    z[:, 0, :] = x
    z[:, 1:, :] = x[:, None, :] + scale * (eps_centre + eps)
    return z


@dataclass
class DiscreteTarget:
    """The discrete target over index vectors induced by a fixed cloud.

    Holds the per-time summed log-density tables: ``log_init`` (N+1,) for
    the initial density, ``log_pot`` a list of (N+1,) potentials and
    ``log_trans`` a list of (N+1, N+1) transition tables (entry [m, n] is
    the summed transition log density from particle m at t-1 to particle
    n at t).  The forward pass normalises per step; the running sum of
    log normalisers equals the log of the target's normalising constant.
    """

    log_init: np.ndarray
    log_pot: List[np.ndarray]
    log_trans: List[Optional[np.ndarray]]

    @classmethod
    def from_cloud(cls, cloud, model):
        z = np.asarray(cloud, dtype=np.float64)
        T = z.shape[0]
        log_init = model.log_m1_sum(z[0])
        log_pot = [model.log_g_sum(t + 1, z[t]) for t in range(T)]
        log_trans = [None] + [
            model.log_m_pair_table(t + 1, z[t - 1], z[t]) for t in range(1, T)
        ]
        return cls(log_init=log_init, log_pot=log_pot, log_trans=log_trans)

    @property
    def T(self):
        return len(self.log_pot)

    def log_xi_unnormalised(self, k):
        """Unnormalised log target of one index vector."""
        total = self.log_init[k[0]] + self.log_pot[0][k[0]]
        for t in range(1, self.T):
            total += self.log_trans[t][k[t - 1], k[t]] + self.log_pot[t][k[t]]
        return float(total)

    def forward(self):
        """Per-step normalised forward log weights and log normalisers."""
        T = self.T
        lw = np.empty((T, self.log_init.shape[0]))
        log_norms = np.empty(T)
        lw[0] = self.log_init + self.log_pot[0]
        log_norms[0] = logsumexp(lw[0])
        lw[0] -= log_norms[0]
        for t in range(1, T):
            lw[t] = logsumexp(lw[t - 1][:, None] + self.log_trans[t], axis=0)
            lw[t] += self.log_pot[t]
            log_norms[t] = logsumexp(lw[t])
            lw[t] -= log_norms[t]
        return lw, log_norms

    def log_normaliser(self):
        """log of the sum of the unnormalised target over all index
        vectors, via the telescoping forward normalisers."""
        _, log_norms = self.forward()
        return float(log_norms.sum())

    def backward_sample(self, lw, uniforms):
        """Draw an index vector given forward weights; one uniform per t."""
        T = self.T
        k = np.empty(T, dtype=np.int64)
        bw_dists = np.empty_like(lw)
        dist = softmax_log_weights(lw[T - 1])
        bw_dists[T - 1] = dist
        k[T - 1] = index_from_uniform(dist, uniforms[T - 1])
        for t in range(T - 2, -1, -1):
            dist = softmax_log_weights(lw[t] + self.log_trans[t + 1][:, k[t + 1]])
            bw_dists[t] = dist
            k[t] = index_from_uniform(dist, uniforms[t])
        return k, bw_dists

    def exact_joint(self):
        """Exact joint law of the index vector as a (N+1,)*T array,
        assembled from the backward conditionals without sampling.
        Intended for tiny instances."""
        T = self.T
        lw, _ = self.forward()
        n_tot = lw.shape[1]
        joint = softmax_log_weights(lw[T - 1])  # over k_{T}
        for t in range(T - 2, -1, -1):
            # cond[k_t, k_{t+1}] = P(k_t | k_{t+1})
            cond = softmax_log_weights(
                lw[t][:, None] + self.log_trans[t + 1], axis=0
            )
            joint = cond[(...,) + (None,) * (T - 2 - t)] * joint[None, ...]
        return joint


def ffbs_index_sample(cloud, model, rng, uniforms=None):
    """Exact draw of the index vector from the cloud's discrete target.

    Costs Theta(N^2 T D) density evaluations (the transition tables).
    Returns (k, forward_weights, backward_dists, log_normaliser).
    """
    target = DiscreteTarget.from_cloud(cloud, model)
    lw, log_norms = target.forward()
    if uniforms is None:
        uniforms = rng.random(target.T)
    k, bw_dists = target.backward_sample(lw, uniforms)
    return k, lw, bw_dists, float(log_norms.sum())


def rwehmm_update(model, path, cfg, rng):
    """One embedded-HMM update; returns (new_path, record)."""
    from . import _dispatch

    x = model.validate_path(path)
    T, D, N = model.T, model.D, cfg.n_particles
    ell = cfg.ell_for(T)

    eps_centre = rng.standard_normal((T, 1, D))
    eps = rng.standard_normal((T, N, D))
    u_bw = rng.random(T)

    fused = _dispatch.fused_module(model)
    if fused is not None:
        g = model.gauss
        z, k, lw, bw_dists = fused.rwehmm_sweep(
            x, g.y, g.initial_variance, g.obs_variance, ell, eps_centre, eps, u_bw
        )
        if model.counter is not None:
            model.counter.g_evals += T * (N + 1)
            model.counter.m_evals += (N + 1) + (T - 1) * (N + 1) ** 2
    else:
        z = scatter_cloud(x, ell, N, rng, eps_centre=eps_centre, eps=eps)
        k, lw, bw_dists, _ = ffbs_index_sample(z, model, rng, uniforms=u_bw)

    record = GenealogyRecord(
        ancestors=np.zeros((0, N + 1), dtype=np.int64),
        selected=k,
        accepted=k != 0,
        resample_weights=softmax_log_weights(lw, axis=1),
        backward_weights=bw_dists[:-1] if T > 1 else np.zeros((0, N + 1)),
    )
    return z[np.arange(T), k].copy(), record
