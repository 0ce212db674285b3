"""Log-domain selection functions and categorical index sampling.

Both selection functions map a vector of N log weights ``h`` (relative to
an implicit reference weight ``h0 = 0``) to a probability vector over the
N+1 indices ``0..N``.  Index 0 is the reference.  Entries of ``h`` may be
``-inf`` (an underflowed weight), which maps to probability zero.
"""

import numpy as np

__all__ = [
    "boltzmann",
    "rosenbluth_teller",
    "boltzmann_batch",
    "rosenbluth_teller_batch",
    "softmax_log_weights",
    "sample_index",
    "index_from_uniform",
    "rosenbluth_teller_at",
]


def _as_h(h):
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1:
        raise ValueError("log-weight vector must be one-dimensional")
    if np.any(np.isnan(h)) or np.any(h == np.inf):
        raise ValueError("log weights must be finite or -inf")
    return h


def boltzmann(h):
    """Multi-proposal generalisation of Barker's acceptance function.

    p_n = exp(h_n) / (1 + sum_m exp(h_m)) for n >= 1, with the reference
    mass p_0 = 1 / (1 + sum_m exp(h_m)).  Computed with a max shift so
    entries anywhere in the finite double range are safe.
    """
    h = _as_h(h)
    hh = np.concatenate(([0.0], h))
    shift = hh.max()
    w = np.exp(hh - shift)
    return w / w.sum()


def rosenbluth_teller(h):
    """Multi-proposal generalisation of the Metropolis-Hastings function.

    p_n = exp(h_n) / (1 - min(1, exp(h_n)) + sum_m exp(h_m)) for n >= 1;
    p_0 is the complement, clamped to [0, 1] against rounding.  The shift
    used internally is exact: dividing numerator and denominator by
    exp(c) turns the absolute term min(1, exp(h_n)) into
    min(exp(-c), exp(h_n - c)).
    """
    h = _as_h(h)
    shift = max(0.0, float(h.max(initial=0.0)))
    e = np.exp(h - shift)
    e0 = np.exp(-shift)
    total = e0 + e.sum()
    p = np.empty(h.shape[0] + 1)
    # rounding guard: each entry is <= 1 analytically
    p[1:] = np.minimum(e / (total - np.minimum(e, e0)), 1.0)
    p[0] = min(max(1.0 - p[1:].sum(), 0.0), 1.0)
    return p


def boltzmann_batch(h):
    """Row-wise :func:`boltzmann`; ``h`` has shape (M, N)."""
    h = np.asarray(h, dtype=np.float64)
    hh = np.concatenate([np.zeros((h.shape[0], 1)), h], axis=1)
    shift = hh.max(axis=1, keepdims=True)
    w = np.exp(hh - shift)
    return w / w.sum(axis=1, keepdims=True)


def rosenbluth_teller_batch(h):
    """Row-wise :func:`rosenbluth_teller`; ``h`` has shape (M, N)."""
    h = np.asarray(h, dtype=np.float64)
    shift = np.maximum(h.max(axis=1, keepdims=True), 0.0)
    e = np.exp(h - shift)
    e0 = np.exp(-shift)
    total = e0 + e.sum(axis=1, keepdims=True)
    p = np.empty((h.shape[0], h.shape[1] + 1))
    p[:, 1:] = np.minimum(e / (total - np.minimum(e, e0)), 1.0)
    p[:, 0] = np.clip(1.0 - p[:, 1:].sum(axis=1), 0.0, 1.0)
    return p


def softmax_log_weights(lw, axis=-1):
    """Normalised weights from raw log weights (no implicit reference).

    Equal to ``boltzmann(lw[1:] - lw[0])`` when ``lw[0]`` is finite, but
    accepts the raw vector directly.
    """
    lw = np.asarray(lw, dtype=np.float64)
    shift = lw.max(axis=axis, keepdims=True)
    w = np.exp(lw - shift)
    return w / w.sum(axis=axis, keepdims=True)


def index_from_uniform(p, u):
    """Inverse-CDF categorical draw over indices 0..N in ascending order."""
    cdf = np.cumsum(p)
    # guard against cdf[-1] = 1 - eps swallowing u ~ 1
    cdf[-1] = max(cdf[-1], 1.0)
    return int(np.searchsorted(cdf, u, side="right"))


def sample_index(p, rng):
    """Draw an index from a selection distribution ``p`` over 0..N."""
    return index_from_uniform(np.asarray(p, dtype=np.float64), rng.random())


def rosenbluth_teller_at(lw, ref):
    """Rosenbluth-Teller selection from raw log weights with the reference
    particle sitting at position ``ref`` instead of 0.

    Used by the enumeration utilities, where the reference path may be
    placed at an arbitrary index vector.
    """
    lw = np.asarray(lw, dtype=np.float64)
    n_total = lw.shape[0]
    others = [n for n in range(n_total) if n != ref]
    h = lw[others] - lw[ref]
    p_perm = rosenbluth_teller(h)
    p = np.empty(n_total)
    p[ref] = p_perm[0]
    p[others] = p_perm[1:]
    return p
