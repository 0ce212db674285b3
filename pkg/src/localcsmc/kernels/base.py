"""Shared configuration and genealogy types for the smoothing kernels."""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..model import ConfigError

__all__ = [
    "BOLTZMANN",
    "FORCED_MOVE",
    "ANCESTRAL_TRACE",
    "BACKWARD_SAMPLING",
    "ANCESTOR_SAMPLING",
    "KernelConfig",
    "GenealogyRecord",
]

BOLTZMANN = "boltzmann"
FORCED_MOVE = "forced_move"
ANCESTRAL_TRACE = "ancestral_trace"
BACKWARD_SAMPLING = "backward_sampling"
ANCESTOR_SAMPLING = "ancestor_sampling"

_SELECTION_VARIANTS = (BOLTZMANN, FORCED_MOVE)
_INDEX_SELECTIONS = (ANCESTRAL_TRACE, BACKWARD_SAMPLING, ANCESTOR_SAMPLING)


@dataclass(frozen=True)
class KernelConfig:
    """Configuration shared by all kernels.

    ``n_particles`` is the number N of free particles (the cloud size is
    N+1 with the reference at index 0).  ``ell`` holds the per-time
    random-walk scale factors; it is ignored by the plain conditional
    kernel, which mutates from the model dynamics.
    """

    n_particles: int
    selection_variant: str = BOLTZMANN
    index_selection: str = ANCESTRAL_TRACE
    ell: Union[float, np.ndarray] = 1.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        if self.selection_variant not in _SELECTION_VARIANTS:
            raise ConfigError(f"unknown selection_variant {self.selection_variant!r}")
        if self.index_selection not in _INDEX_SELECTIONS:
            raise ConfigError(f"unknown index_selection {self.index_selection!r}")
        ell = np.atleast_1d(np.asarray(self.ell, dtype=np.float64))
        if np.any(ell <= 0):
            raise ConfigError("ell entries must be positive")

    def ell_for(self, T: int) -> np.ndarray:
        """Resolve ``ell`` to a length-T array."""
        ell = np.atleast_1d(np.asarray(self.ell, dtype=np.float64))
        if ell.size == 1:
            return np.full(T, float(ell[0]))
        if ell.size != T:
            raise ConfigError(f"ell has length {ell.size}, expected {T}")
        return ell.copy()

    @property
    def forced_move(self) -> bool:
        return self.selection_variant == FORCED_MOVE

    @property
    def backward_sampling(self) -> bool:
        return self.index_selection == BACKWARD_SAMPLING

    @property
    def ancestor_sampling(self) -> bool:
        return self.index_selection == ANCESTOR_SAMPLING


@dataclass
class GenealogyRecord:
    """Indices produced by one kernel update.

    ``ancestors`` has shape (T-1, N+1) with the reference column pinned to
    0 (unless ancestor sampling redraws it); for the no-resampling kernel
    it is empty with shape (0, N+1).  ``selected`` holds K_1..K_T and
    ``accepted`` the per-time flags K_t != 0.  The realised selection
    distributions are carried along for diagnostics: ``resample_weights``
    are the normalised time-t weights (one row per t) and
    ``backward_weights`` the realised backward distributions when
    backward sampling was used.
    """

    ancestors: np.ndarray
    selected: np.ndarray
    accepted: np.ndarray
    resample_weights: Optional[np.ndarray] = field(default=None, repr=False)
    backward_weights: Optional[np.ndarray] = field(default=None, repr=False)
