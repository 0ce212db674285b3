"""Smoothing kernels: conditional SMC, embedded-HMM and local CSMC."""

from .base import (
    ANCESTOR_SAMPLING,
    ANCESTRAL_TRACE,
    BACKWARD_SAMPLING,
    BOLTZMANN,
    FORCED_MOVE,
    GenealogyRecord,
    KernelConfig,
)
from .csmc import csmc_acceptance_profile, icsmc_index_distribution, icsmc_update
from .rwcsmc import (
    expected_evaluations,
    index_transition_matrix,
    rwcsmc_forward_pass,
    rwcsmc_update,
)
from .rwehmm import DiscreteTarget, ffbs_index_sample, rwehmm_update, scatter_cloud
from ._dispatch import HAVE_CORE, backend_name, force_backend

UPDATES = {
    "icsmc": icsmc_update,
    "rwehmm": rwehmm_update,
    "rwcsmc": rwcsmc_update,
}


def kernel_update(algorithm):
    """Look up an update function by algorithm name."""
    try:
        return UPDATES[algorithm]
    except KeyError:
        from ..model import ConfigError

        raise ConfigError(
            f"unknown algorithm {algorithm!r}; choose from {sorted(UPDATES)}"
        ) from None


__all__ = [
    "ANCESTOR_SAMPLING",
    "ANCESTRAL_TRACE",
    "BACKWARD_SAMPLING",
    "BOLTZMANN",
    "FORCED_MOVE",
    "GenealogyRecord",
    "KernelConfig",
    "csmc_acceptance_profile",
    "icsmc_index_distribution",
    "icsmc_update",
    "expected_evaluations",
    "index_transition_matrix",
    "rwcsmc_forward_pass",
    "rwcsmc_update",
    "DiscreteTarget",
    "ffbs_index_sample",
    "rwehmm_update",
    "scatter_cloud",
    "HAVE_CORE",
    "backend_name",
    "force_backend",
    "kernel_update",
    "UPDATES",
]
