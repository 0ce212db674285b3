"""Model abstraction: univariate components replicated over D dimensions.

A model is a sequence of mutation densities m_t and strictly positive
potentials G_t on the real line, replicated independently over D spatial
dimensions, so every joint log density is an exact sum of univariate
terms.  All densities are evaluated and stored in the log domain: the
joint potential is a product of D factors and would underflow for
D of a few hundred otherwise.

Component callbacks are vectorised: they accept numpy arrays of any shape
and evaluate elementwise.  Time indices are 1-based (t in 1..T), matching
the usual state-space notation; array storage elsewhere is 0-based.
"""

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ModelError",
    "ConfigError",
    "DiagnosticsError",
    "EvalCounter",
    "UnivariateComponents",
    "ProductModel",
    "GaussParams",
    "build_product_model",
    "gauss_rw_components",
    "build_gauss_rw_model",
    "preset_model",
    "simulate_observations",
    "load_observations_csv",
    "PHI2",
]

# Fixed point of the filter-variance recursion for the unit-noise
# random-walk model: s = (s + 1) / (s + 2), i.e. the golden-ratio
# conjugate.
PHI2 = (np.sqrt(5.0) - 1.0) / 2.0


class ModelError(Exception):
    """The model violates a contract (e.g. zero density at the reference)."""


class ConfigError(Exception):
    """Invalid configuration values."""


class DiagnosticsError(Exception):
    """Invalid input fed to the diagnostics accumulators."""


@dataclass
class EvalCounter:
    """Tally of per-particle density evaluations (one count per row of D
    components passed to a density call)."""

    m_evals: int = 0
    g_evals: int = 0

    def reset(self):
        self.m_evals = 0
        self.g_evals = 0


@dataclass(frozen=True)
class UnivariateComponents:
    """Univariate building blocks of a product model.

    ``log_m1(x)`` / ``sample_m1(shape, rng)`` describe the initial
    density; ``log_m(t, x_prev, x)`` / ``sample_m(t, x_prev, rng)`` the
    transition for t >= 2; ``log_g(t, x)`` the log potential.  Derivative
    callbacks are optional; when absent, central finite differences with
    step 1e-4 * (1 + |x|) are used by the limit-moment estimator.
    ``d1_log_m``/``d2_log_m`` return a pair of arrays (derivative w.r.t.
    x_prev, derivative w.r.t. x).
    """

    log_m1: Callable
    sample_m1: Callable
    log_m: Callable
    sample_m: Callable
    log_g: Callable
    d1_log_g: Optional[Callable] = None
    d2_log_g: Optional[Callable] = None
    d1_log_m: Optional[Callable] = None
    d2_log_m: Optional[Callable] = None
    d1_log_m1: Optional[Callable] = None
    d2_log_m1: Optional[Callable] = None

    @property
    def has_derivatives(self):
        return None not in (
            self.d1_log_g,
            self.d2_log_g,
            self.d1_log_m,
            self.d2_log_m,
            self.d1_log_m1,
            self.d2_log_m1,
        )


@dataclass(frozen=True)
class GaussParams:
    """Parameters of the Gaussian random-walk preset family.

    Transitions are unit-variance random walks, the initial density is a
    centred normal with variance ``initial_variance`` and the potential
    at time t is a normal density in y_t - x_t with variance
    ``obs_variance``.  Presence of this block enables the fused sweeps.
    """

    y: np.ndarray  # (T, D)
    initial_variance: float = 1.0
    obs_variance: float = 1.0


@dataclass
class ProductModel:
    """A product model: ``components`` replicated over ``D`` dimensions
    for ``T`` time steps.

    Instances are immutable in spirit (nothing mutates them after
    construction) and safe to share across threads; samplers take the
    caller's RNG.  The optional ``counter`` is a test/diagnostic hook and
    is not thread-safe.
    """

    components: UnivariateComponents
    T: int
    D: int
    gauss: Optional[GaussParams] = None
    counter: Optional[EvalCounter] = field(default=None, repr=False)

    def __post_init__(self):
        if self.T < 1 or self.D < 1:
            raise ConfigError(f"T and D must be >= 1, got T={self.T}, D={self.D}")

    # -- joint (summed over d) evaluations -------------------------------

    def _rows(self, x):
        return int(np.prod(x.shape[:-1], dtype=np.int64)) if x.ndim > 1 else 1

    def log_g_sum(self, t, x):
        """Sum over d of log G_t, for x of shape (..., D)."""
        if self.counter is not None:
            self.counter.g_evals += self._rows(np.asarray(x))
        return np.sum(self.components.log_g(t, x), axis=-1)

    def log_m_sum(self, t, x_prev, x):
        """Sum over d of log m_t (t >= 2), broadcasting x_prev against x."""
        x = np.asarray(x)
        if self.counter is not None:
            self.counter.m_evals += self._rows(np.broadcast(np.asarray(x_prev), x))
        return np.sum(self.components.log_m(t, x_prev, x), axis=-1)

    def log_m1_sum(self, x):
        """Sum over d of the initial log density."""
        if self.counter is not None:
            self.counter.m_evals += self._rows(np.asarray(x))
        return np.sum(self.components.log_m1(x), axis=-1)

    def log_m_pair_table(self, t, x_prev, x):
        """(N+1, N+1) table of summed transition log densities between two
        particle blocks of shape (N+1, D)."""
        return self.log_m_sum(t, x_prev[:, None, :], x[None, :, :])

    def log_gamma(self, path):
        """Unnormalised joint log density of a (T, D) path."""
        path = np.asarray(path, dtype=np.float64)
        total = self.log_m1_sum(path[0]) + self.log_g_sum(1, path[0])
        for t in range(1, self.T):
            total += self.log_m_sum(t + 1, path[t - 1], path[t])
            total += self.log_g_sum(t + 1, path[t])
        return float(total)

    # -- sampling ---------------------------------------------------------

    def sample_initial(self, n, rng):
        """Draw n particles from the initial density; shape (n, D)."""
        return self.components.sample_m1((n, self.D), rng)

    def sample_transition(self, t, x_prev, rng):
        """Draw from m_t given parents x_prev of shape (..., D)."""
        return self.components.sample_m(t, x_prev, rng)

    def validate_path(self, path):
        path = np.asarray(path, dtype=np.float64)
        if path.shape != (self.T, self.D):
            raise ConfigError(
                f"path shape {path.shape} does not match model ({self.T}, {self.D})"
            )
        if not np.all(np.isfinite(path)):
            raise ModelError("path contains non-finite entries")
        return path


def build_product_model(components, T, D):
    """Assemble a :class:`ProductModel`; rejects T < 1 or D < 1."""
    if T < 1 or D < 1:
        raise ConfigError(f"T and D must be >= 1, got T={T}, D={D}")
    return ProductModel(components=components, T=T, D=D)


# -- Gaussian random-walk presets ------------------------------------------

_LOG_2PI = float(np.log(2.0 * np.pi))


def gauss_rw_components(y, initial_variance=1.0, obs_variance=1.0):
    """Components of the Gaussian random-walk state-space model.

    m_1 = N(0, initial_variance), m_t(x', x) = N(x; x', 1) and
    G_t(x) = N(y_t; x, obs_variance), with y of shape (T, D).
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    v1 = float(initial_variance)
    r = float(obs_variance)
    if v1 <= 0 or r <= 0:
        raise ConfigError("variances must be positive")

    def log_m1(x):
        return -0.5 * (_LOG_2PI + np.log(v1)) - np.square(x) / (2.0 * v1)

    def sample_m1(shape, rng):
        return np.sqrt(v1) * rng.standard_normal(shape)

    def log_m(t, xp, x):
        return -0.5 * _LOG_2PI - 0.5 * np.square(x - xp)

    def sample_m(t, xp, rng):
        xp = np.asarray(xp, dtype=np.float64)
        return xp + rng.standard_normal(xp.shape)

    def log_g(t, x):
        return -0.5 * (_LOG_2PI + np.log(r)) - np.square(y[t - 1] - x) / (2.0 * r)

    def d1_log_g(t, x):
        return (y[t - 1] - x) / r

    def d2_log_g(t, x):
        return np.full_like(np.asarray(x, dtype=np.float64), -1.0 / r)

    def d1_log_m(t, xp, x):
        diff = np.asarray(x, dtype=np.float64) - xp
        return diff, -diff

    def d2_log_m(t, xp, x):
        out = np.full(np.broadcast(xp, x).shape, -1.0)
        return out, out.copy()

    def d1_log_m1(x):
        return -np.asarray(x, dtype=np.float64) / v1

    def d2_log_m1(x):
        return np.full_like(np.asarray(x, dtype=np.float64), -1.0 / v1)

    return UnivariateComponents(
        log_m1=log_m1,
        sample_m1=sample_m1,
        log_m=log_m,
        sample_m=sample_m,
        log_g=log_g,
        d1_log_g=d1_log_g,
        d2_log_g=d2_log_g,
        d1_log_m=d1_log_m,
        d2_log_m=d2_log_m,
        d1_log_m1=d1_log_m1,
        d2_log_m1=d2_log_m1,
    )


def build_gauss_rw_model(y, initial_variance=1.0, obs_variance=1.0):
    """Gaussian random-walk model with the fused fast path enabled."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    T, D = y.shape
    comps = gauss_rw_components(
        y, initial_variance=initial_variance, obs_variance=obs_variance
    )
    model = build_product_model(comps, T, D)
    model.gauss = GaussParams(
        y=y, initial_variance=float(initial_variance), obs_variance=float(obs_variance)
    )
    return model


PRESETS = {
    # experiment model: standard-normal initial density
    "gauss-rw": 1.0,
    # oracle-verification model: stationary initial variance
    "gauss-rw-a3": PHI2 + 1.0,
}


def preset_model(name, y):
    """Build a named preset model from observations y of shape (T, D)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown model preset {name!r}; choose from {sorted(PRESETS)}")
    return build_gauss_rw_model(y, initial_variance=PRESETS[name])


def simulate_observations(name, T, D, rng):
    """Simulate observations y (T, D) from a preset's generative model."""
    if name not in PRESETS:
        raise ConfigError(f"unknown model preset {name!r}; choose from {sorted(PRESETS)}")
    v1 = PRESETS[name]
    x = np.empty((T, D))
    x[0] = np.sqrt(v1) * rng.standard_normal(D)
    for t in range(1, T):
        x[t] = x[t - 1] + rng.standard_normal(D)
    return x + rng.standard_normal((T, D))


def load_observations_csv(path):
    """Load observations from a CSV with header t,d,value (1-based t, d)."""
    cells = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != [
            "t",
            "d",
            "value",
        ]:
            raise ConfigError(f"{path}: expected header t,d,value")
        for row in reader:
            cells[(int(row["t"]), int(row["d"]))] = float(row["value"])
    if not cells:
        raise ConfigError(f"{path}: no observation rows")
    T = max(t for t, _ in cells)
    D = max(d for _, d in cells)
    y = np.full((T, D), np.nan)
    for (t, d), v in cells.items():
        y[t - 1, d - 1] = v
    if not np.all(np.isfinite(y)):
        raise ConfigError(f"{path}: observation grid has missing entries")
    return y
