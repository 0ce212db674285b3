"""Static-parameter samplers targeting the joint posterior of (theta, x).

Three samplers are provided: a Gibbs-style sweep that alternates a
theta update given the path with any of the smoothing kernels given
theta, and two all-particle alternatives in which the theta acceptance
ratio pools information across the whole scattered cloud: one based on
the embedded-HMM discrete target (quadratic in N), one based on the
local-CSMC lineage weights (linear in N).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .kernels import kernel_update
from .kernels.base import KernelConfig
from .kernels.rwcsmc import rwcsmc_forward_pass
from .kernels.rwehmm import DiscreteTarget, scatter_cloud
from .model import ConfigError
from .selection import index_from_uniform, softmax_log_weights

__all__ = [
    "ThetaModel",
    "make_rw_theta_kernel",
    "particle_gibbs_step",
    "rwehmm_param_step",
    "rwcsmc_param_step",
    "run_param_chain",
]


@dataclass(frozen=True)
class ThetaModel:
    """Parametrised model family plus prior and proposal.

    ``propose(theta, context, rng)`` returns (theta', log q(theta->theta'),
    log q(theta'->theta)); ``context`` may carry the current cloud and
    ancestors (the all-particle samplers permit proposals that use them;
    the default proposals ignore it).
    """

    theta_dim: int
    log_prior: Callable
    build_model: Callable
    propose: Callable


def make_rw_theta_kernel(tm: ThetaModel, scale: float):
    """Random-walk Metropolis-Hastings on log(theta), invariant for the
    conditional posterior of theta given the path.

    The Jacobian of the log transform contributes a theta'/theta factor.
    Suitable for positive scalar parameters.
    """

    def kernel(theta, path, rng):
        log_theta = np.log(theta)
        theta_new = float(np.exp(log_theta + scale * rng.standard_normal()))
        model_old = tm.build_model(theta)
        model_new = tm.build_model(theta_new)
        log_ratio = (
            tm.log_prior(theta_new)
            - tm.log_prior(theta)
            + model_new.log_gamma(path)
            - model_old.log_gamma(path)
            + np.log(theta_new)
            - np.log(theta)
        )
        if np.log(rng.random()) < log_ratio:
            return theta_new, True
        return theta, False

    return kernel


def particle_gibbs_step(tm, theta, path, cfg, theta_kernel, rng, algorithm="rwcsmc"):
    """One Gibbs sweep: theta given the path, then the path given theta.

    ``theta_kernel(theta, path, rng) -> (theta', accepted)`` must leave
    the conditional posterior of theta invariant (caller contract).  Any
    smoothing kernel may update the path.
    """
    theta_new, accepted = theta_kernel(theta, path, rng)
    model = tm.build_model(theta_new)
    new_path, _ = kernel_update(algorithm)(model, path, cfg, rng)
    return theta_new, new_path, accepted


def rwehmm_param_step(tm, theta, path, cfg, rng):
    """All-particle theta update through the embedded-HMM discrete target.

    Scatters one cloud, accepts theta' with the ratio of the summed
    discrete targets under theta' and theta (each computed as a product
    of forward normalising constants), then draws the new index path
    exactly under the retained parameter.  Theta(N^2 T) evaluations.
    """
    model = tm.build_model(theta)
    x = model.validate_path(path)
    T, D, N = model.T, model.D, cfg.n_particles
    ell = cfg.ell_for(T)

    cloud = scatter_cloud(x, ell, N, rng)
    target_old = DiscreteTarget.from_cloud(cloud, model)
    theta_new, lq_fwd, lq_rev = tm.propose(theta, {"cloud": cloud}, rng)
    model_new = tm.build_model(theta_new)
    target_new = DiscreteTarget.from_cloud(cloud, model_new)

    log_r = (
        lq_rev
        - lq_fwd
        + tm.log_prior(theta_new)
        - tm.log_prior(theta)
        + target_new.log_normaliser()
        - target_old.log_normaliser()
    )
    accepted = np.log(rng.random()) < log_r
    kept_theta = theta_new if accepted else theta
    kept_target = target_new if accepted else target_old
    lw, _ = kept_target.forward()
    k, _ = kept_target.backward_sample(lw, rng.random(T))
    return kept_theta, cloud[np.arange(T), k].copy(), bool(accepted)


def rwcsmc_param_step(tm, theta, path, cfg, rng):
    """All-particle theta update through the local-CSMC lineage weights.

    Runs the conditional resampling pass under theta (reference pinned),
    proposes theta' together with a fresh, unpinned set of ancestors
    drawn under theta', and accepts with the ratio of the per-time summed
    lineage weights of (theta', fresh ancestors) against those of
    (theta, conditional ancestors).  On acceptance the new path is the
    ancestral trace under theta'; on rejection it is drawn by backward
    sampling under theta, so the path always moves.  Theta(N T)
    evaluations; the stated version uses backward sampling without the
    forced move.
    """
    if not cfg.backward_sampling:
        raise ConfigError("the all-particle local-CSMC update requires backward sampling")
    model = tm.build_model(theta)
    x = model.validate_path(path)
    T, D, N = model.T, model.D, cfg.n_particles
    ell = cfg.ell_for(T)

    cloud = scatter_cloud(x, ell, N, rng)
    u_anc = rng.random((max(T - 1, 0), N))
    u_as = rng.random(T - 1) if cfg.ancestor_sampling else None
    anc, omega = rwcsmc_forward_pass(model, cloud, cfg, u_anc, u_as)
    log_w_old = float(logsumexp(omega, axis=1).sum())

    theta_new, lq_fwd, lq_rev = tm.propose(theta, {"cloud": cloud, "ancestors": anc}, rng)
    model_new = tm.build_model(theta_new)
    u_anc_free = rng.random((max(T - 1, 0), N + 1))
    anc_new, omega_new = rwcsmc_forward_pass(
        model_new, cloud, None, u_anc_free, pinned=False
    )
    log_w_new = float(logsumexp(omega_new, axis=1).sum())

    log_r = (
        lq_rev
        - lq_fwd
        + tm.log_prior(theta_new)
        - tm.log_prior(theta)
        + log_w_new
        - log_w_old
    )
    accepted = np.log(rng.random()) < log_r

    k = np.empty(T, dtype=np.int64)
    if accepted:
        k[T - 1] = index_from_uniform(
            softmax_log_weights(omega_new[T - 1]), rng.random()
        )
        for t in range(T - 2, -1, -1):
            k[t] = anc_new[t, k[t + 1]]
        return theta_new, cloud[np.arange(T), k].copy(), True

    k[T - 1] = index_from_uniform(softmax_log_weights(omega[T - 1]), rng.random())
    for t in range(T - 2, -1, -1):
        bw = omega[t] + model.log_m_sum(t + 2, cloud[t], cloud[t + 1, k[t + 1]][None, :])
        k[t] = index_from_uniform(softmax_log_weights(bw), rng.random())
    return theta, cloud[np.arange(T), k].copy(), False


def run_param_chain(
    tm,
    theta0,
    path0,
    cfg,
    sweeps,
    rng,
    sampler="pg",
    algorithm="rwcsmc",
    theta_scale=0.5,
    callback=None,
):
    """Run a parameter-estimation chain; returns (thetas, accept_flags).

    ``sampler`` is one of "pg" (Gibbs sweep with ``algorithm`` as the
    path kernel), "ehmm-alt" or "rwcsmc-alt".
    """
    theta, path = float(theta0), np.array(path0, dtype=np.float64)
    thetas = np.empty(sweeps)
    accepts = np.zeros(sweeps, dtype=bool)
    theta_kernel = make_rw_theta_kernel(tm, theta_scale) if sampler == "pg" else None
    for i in range(sweeps):
        if sampler == "pg":
            theta, path, acc = particle_gibbs_step(
                tm, theta, path, cfg, theta_kernel, rng, algorithm=algorithm
            )
        elif sampler == "ehmm-alt":
            theta, path, acc = rwehmm_param_step(tm, theta, path, cfg, rng)
        elif sampler == "rwcsmc-alt":
            theta, path, acc = rwcsmc_param_step(tm, theta, path, cfg, rng)
        else:
            raise ConfigError(f"unknown sampler {sampler!r}")
        thetas[i] = theta
        accepts[i] = acc
        if callback is not None:
            callback(i, theta, path)
    return thetas, accepts
