"""Shared fixtures and independent test oracles."""

import itertools

import numpy as np
import pytest

from localcsmc.model import UnivariateComponents, build_product_model

_LOG_2PI = float(np.log(2.0 * np.pi))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_rng(seed):
    return np.random.default_rng(seed)


def brute_force_xi_oracle(cloud, log_m1, log_m, log_g):
    """Independent enumeration of the discrete cloud target.

    Works directly from scalar density callbacks (1-based t), not from
    any library machinery.  ``cloud`` is (T, N+1, D).
    """
    z = np.asarray(cloud, dtype=np.float64)
    T, n_tot, D = z.shape
    probs = np.zeros((n_tot,) * T)
    for kvec in itertools.product(range(n_tot), repeat=T):
        log_dens = 0.0
        for d in range(D):
            log_dens += log_m1(z[0, kvec[0], d]) + log_g(1, z[0, kvec[0], d])
            for t in range(1, T):
                log_dens += log_m(t + 1, z[t - 1, kvec[t - 1], d], z[t, kvec[t], d])
                log_dens += log_g(t + 1, z[t, kvec[t], d])
        probs[kvec] = np.exp(log_dens)
    return probs / probs.sum()


def gauss_scalar_densities(y, initial_variance=1.0, obs_variance=1.0):
    """Scalar log densities of the Gaussian random-walk model, coded
    independently of the package for use as oracles."""
    y = np.atleast_2d(y)

    def log_m1(x):
        return -0.5 * (_LOG_2PI + np.log(initial_variance)) - x * x / (
            2 * initial_variance
        )

    def log_m(t, xp, x):
        return -0.5 * _LOG_2PI - 0.5 * (x - xp) ** 2

    def log_g(t, x):
        return -0.5 * (_LOG_2PI + np.log(obs_variance)) - (y[t - 1, 0] - x) ** 2 / (
            2 * obs_variance
        )

    return log_m1, log_m, log_g


def discrete_three_point_model(T, seed=3):
    """Product model on a three-point state space {-1, 0, 1} with random
    strictly positive transition tables; D = 1.

    Exercises the generic callback path with a model whose smoothing law
    can be enumerated exactly.
    """
    rng = np.random.default_rng(seed)
    support = np.array([-1.0, 0.0, 1.0])
    init = rng.uniform(0.2, 1.0, size=3)
    init /= init.sum()
    trans = rng.uniform(0.2, 1.0, size=(T, 3, 3))
    trans /= trans.sum(axis=2, keepdims=True)
    pot = rng.uniform(0.3, 1.5, size=(T, 3))

    def idx(x):
        return np.rint(np.asarray(x) + 1.0).astype(np.int64)

    def log_m1(x):
        return np.log(init[idx(x)])

    def sample_m1(shape, rng_):
        return support[rng_.choice(3, size=shape, p=init)]

    def log_m(t, xp, x):
        xp_i, x_i = np.broadcast_arrays(idx(xp), idx(x))
        return np.log(trans[t - 1][xp_i, x_i])

    def sample_m(t, xp, rng_):
        xp = np.asarray(xp, dtype=np.float64)
        out = np.empty_like(xp)
        flat_prev = idx(xp).ravel()
        flat_out = out.ravel()
        for i, p in enumerate(flat_prev):
            flat_out[i] = support[rng_.choice(3, p=trans[t - 1][p])]
        return out

    def log_g(t, x):
        return np.log(pot[t - 1][idx(x)])

    comps = UnivariateComponents(
        log_m1=log_m1, sample_m1=sample_m1, log_m=log_m, sample_m=sample_m, log_g=log_g
    )
    model = build_product_model(comps, T, 1)
    tables = {"support": support, "init": init, "trans": trans, "pot": pot}
    return model, tables


def enumerate_discrete_paths(tables, T):
    """All paths of the three-point model with their target probabilities."""
    support = tables["support"]
    paths = list(itertools.product(range(3), repeat=T))
    weights = []
    for p in paths:
        w = tables["init"][p[0]] * tables["pot"][0][p[0]]
        for t in range(1, T):
            # the 1-based transition m_{t+1} reads table row t
            w *= tables["trans"][t][p[t - 1], p[t]] * tables["pot"][t][p[t]]
        weights.append(w)
    weights = np.array(weights)
    return [support[list(p)] for p in paths], weights / weights.sum()


def batch_mean_se(samples, n_batches=100):
    """Batch-means standard error for a (possibly autocorrelated) chain."""
    samples = np.asarray(samples, dtype=np.float64)
    usable = (samples.shape[0] // n_batches) * n_batches
    batches = samples[:usable].reshape(n_batches, -1).mean(axis=1)
    return batches.std(ddof=1) / np.sqrt(n_batches)
