"""Streaming per-time chain diagnostics.

Tracks, per time step: acceptance counts, expected squared jumping
distance (running sum of ||x_t[l+1] - x_t[l]||^2), effective sample
sizes of the resampling and backward weight families, and the lag-k
autocorrelation of the first spatial coordinate.  One ChainStats per
chain (single writer); replicate chains are merged associatively at the
end.
"""

import numpy as np

from .model import DiagnosticsError

__all__ = ["ChainStats", "record_update", "merge_stats", "finalize"]

_WEIGHT_SUM_TOL = 1e-8


class ChainStats:
    """Accumulators for one chain.

    ``lag`` is the autocorrelation lag of the monitored scalar x_{t,1};
    the autocovariance uses the biased (1/L) normalisation, which is
    stable for short runs.
    """

    def __init__(self, T, lag):
        if lag < 1:
            raise DiagnosticsError("lag must be >= 1")
        self.T = T
        self.lag = lag
        self.update_count = 0
        self.accept_count = np.zeros(T, dtype=np.int64)
        self.esjd_sum = np.zeros(T)
        self.ess_sum_resample = np.zeros(T)
        self.ess_count_resample = np.zeros(T, dtype=np.int64)
        self.ess_sum_backward = np.zeros(T)
        self.ess_count_backward = np.zeros(T, dtype=np.int64)
        # streaming autocovariance state for the monitored scalar
        self.ring = np.zeros((T, lag))
        self.n_scalar = 0
        self.sum_x = np.zeros(T)
        self.sum_x2 = np.zeros(T)
        self.sum_head = np.zeros(T)  # sum of x_l over pairs (l, l+lag)
        self.sum_tail = np.zeros(T)  # sum of x_{l+lag} over pairs
        self.sum_prod = np.zeros(T)
        self.n_pairs = 0

    def push_scalar(self, values):
        """Append the monitored scalar of every time step (shape (T,))."""
        values = np.asarray(values, dtype=np.float64)
        pos = self.n_scalar % self.lag
        if self.n_scalar >= self.lag:
            old = self.ring[:, pos]
            self.sum_head += old
            self.sum_tail += values
            self.sum_prod += old * values
            self.n_pairs += 1
        self.ring[:, pos] = values
        self.n_scalar += 1
        self.sum_x += values
        self.sum_x2 += values * values


def _ess(weights):
    w = np.asarray(weights, dtype=np.float64)
    sums = w.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > _WEIGHT_SUM_TOL):
        raise DiagnosticsError("weight vectors must be self-normalised")
    return 1.0 / np.square(w).sum(axis=-1)


def record_update(stats, record, old_path, new_path):
    """Fold one kernel update into the accumulators.

    The weight families come from the genealogy record: the per-time
    resampling distributions actually used, and the backward
    distributions at the realised next index when backward sampling ran.
    """
    old_path = np.asarray(old_path, dtype=np.float64)
    new_path = np.asarray(new_path, dtype=np.float64)
    if old_path.shape != new_path.shape or old_path.shape[0] != stats.T:
        raise DiagnosticsError("path shapes do not match the accumulator")
    stats.update_count += 1
    stats.accept_count += record.accepted
    stats.esjd_sum += np.square(new_path - old_path).sum(axis=1)
    if record.resample_weights is not None and record.resample_weights.size:
        stats.ess_sum_resample += _ess(record.resample_weights)
        stats.ess_count_resample += 1
    if record.backward_weights is not None and record.backward_weights.size:
        ess = _ess(record.backward_weights)
        stats.ess_sum_backward[: ess.shape[0]] += ess
        stats.ess_count_backward[: ess.shape[0]] += 1
    stats.push_scalar(new_path[:, 0])


def merge_stats(parts):
    """Associative merge of replicate accumulators.

    Ring-buffer state is per-chain and cannot be concatenated across
    chains; the merged autocorrelation pools the pair/moment sums, which
    is exact because replicates are independent chains of equal length.
    """
    parts = list(parts)
    out = ChainStats(parts[0].T, parts[0].lag)
    for p in parts:
        if (p.T, p.lag) != (out.T, out.lag):
            raise DiagnosticsError("cannot merge accumulators of different shape")
        out.update_count += p.update_count
        out.accept_count += p.accept_count
        out.esjd_sum += p.esjd_sum
        out.ess_sum_resample += p.ess_sum_resample
        out.ess_count_resample += p.ess_count_resample
        out.ess_sum_backward += p.ess_sum_backward
        out.ess_count_backward += p.ess_count_backward
        out.n_scalar += p.n_scalar
        out.sum_x += p.sum_x
        out.sum_x2 += p.sum_x2
        out.sum_head += p.sum_head
        out.sum_tail += p.sum_tail
        out.sum_prod += p.sum_prod
        out.n_pairs += p.n_pairs
    return out


def finalize(stats):
    """Per-time summary rows; missing quantities are None, never zero."""
    rows = []
    L = stats.update_count
    n = stats.n_scalar
    for t in range(stats.T):
        row = {
            "t": t + 1,
            "updates": L,
            "accept_rate": stats.accept_count[t] / L if L else None,
            "esjd": stats.esjd_sum[t] / L if L else None,
            "ess_resample": (
                stats.ess_sum_resample[t] / stats.ess_count_resample[t]
                if stats.ess_count_resample[t]
                else None
            ),
            "ess_backward": (
                stats.ess_sum_backward[t] / stats.ess_count_backward[t]
                if stats.ess_count_backward[t]
                else None
            ),
            "autocorr_lag": stats.lag,
            "autocorr": None,
        }
        if stats.n_pairs > 0 and n > stats.lag:
            mean = stats.sum_x[t] / n
            var = stats.sum_x2[t] / n - mean * mean
            if var > 0:
                cov = (
                    stats.sum_prod[t]
                    - mean * (stats.sum_head[t] + stats.sum_tail[t])
                    + stats.n_pairs * mean * mean
                ) / n
                row["autocorr"] = cov / var
        rows.append(row)
    return rows
