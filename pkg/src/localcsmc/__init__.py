"""Conditional SMC smoothing kernels with local random-walk proposals.

Implements three joint-smoothing Markov kernels for product-form
state-space models: the classical conditional-SMC kernel (which breaks
down as the spatial dimension grows), an embedded-HMM kernel with local
Gaussian scattering, and a local conditional-SMC kernel combining the
scattering with resampling (linear cost in the particle count).  Comes
with exact Kalman oracles, large-dimension limiting laws, streaming
chain diagnostics, static-parameter samplers and an experiment harness.
"""

from .kalman import (
    KalmanResult,
    LgssmSpec,
    ffbs_exact_sample,
    kalman_smooth,
    lgssm_assumption_quantities,
    smoother_covariance_matrix,
)
from .kernels import (
    GenealogyRecord,
    KernelConfig,
    icsmc_update,
    rwcsmc_update,
    rwehmm_update,
    scatter_cloud,
)
from .model import (
    ConfigError,
    DiagnosticsError,
    ModelError,
    ProductModel,
    UnivariateComponents,
    build_gauss_rw_model,
    build_product_model,
    preset_model,
    simulate_observations,
)

__version__ = "0.1.0"

__all__ = [
    "KalmanResult",
    "LgssmSpec",
    "ffbs_exact_sample",
    "kalman_smooth",
    "lgssm_assumption_quantities",
    "smoother_covariance_matrix",
    "GenealogyRecord",
    "KernelConfig",
    "icsmc_update",
    "rwcsmc_update",
    "rwehmm_update",
    "scatter_cloud",
    "ConfigError",
    "DiagnosticsError",
    "ModelError",
    "ProductModel",
    "UnivariateComponents",
    "build_gauss_rw_model",
    "build_product_model",
    "preset_model",
    "simulate_observations",
    "__version__",
]
