"""Named validation suites behind the command-line interface.

Each check returns rows of measured-versus-expected values; a suite
passes when every row does.  The same quantities are asserted by the
test suite; the CLI form exists so a built artifact can be checked
without a test runner.
"""

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .kalman import (
    LgssmSpec,
    kalman_smooth,
    lgssm_assumption_quantities,
    smoother_covariance_matrix,
    stationary_sigma2,
)
from .kernels import (
    DiscreteTarget,
    KernelConfig,
    index_transition_matrix,
    scatter_cloud,
)
from .limits import analytic_bounds, estimate_limit_moments
from .model import ConfigError, build_gauss_rw_model, build_product_model, preset_model
from .params import ThetaModel, run_param_chain
from .selection import boltzmann, rosenbluth_teller
from .experiments import substream

__all__ = ["run_suite", "SUITES", "CheckRow"]


@dataclass
class CheckRow:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool

    @classmethod
    def within(cls, name, measured, expected, tolerance):
        ok = abs(measured - expected) <= tolerance
        return cls(name, float(measured), float(expected), float(tolerance), bool(ok))

    @classmethod
    def at_most(cls, name, measured, bound):
        return cls(name, float(measured), float(bound), 0.0, bool(measured <= bound))

    @classmethod
    def at_least(cls, name, measured, bound):
        return cls(name, float(measured), float(bound), 0.0, bool(measured >= bound))


def brute_force_xi(cloud, model):
    """Direct enumeration of the discrete cloud target: unnormalised
    joint density of every index vector, normalised at the end."""
    z = np.asarray(cloud, dtype=np.float64)
    T, n_tot = z.shape[0], z.shape[1]
    out = np.zeros((n_tot,) * T)
    for kvec in itertools.product(range(n_tot), repeat=T):
        lg = model.log_m1_sum(z[0, kvec[0]]) + model.log_g_sum(1, z[0, kvec[0]])
        for t in range(1, T):
            lg += model.log_m_sum(t + 1, z[t - 1, kvec[t - 1]], z[t, kvec[t]])
            lg += model.log_g_sum(t + 1, z[t, kvec[t]])
        out[kvec] = np.exp(lg)
    return out / out.sum()


def suite_selection(rng=None):
    rng = rng or substream(7, "validate-selection")
    worst_norm = 0.0
    peskun_violations = 0
    worst_reduction = 0.0
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        h = rng.uniform(-700.0, 50.0, size=n)
        pb = boltzmann(h)
        pr = rosenbluth_teller(h)
        worst_norm = max(worst_norm, abs(pb.sum() - 1.0), abs(pr.sum() - 1.0))
        if pb[0] < pr[0] - 1e-15:
            peskun_violations += 1
        h1 = h[:1]
        barker = np.exp(h1[0]) / (1.0 + np.exp(h1[0])) if h1[0] < 0 else 1.0 / (
            1.0 + np.exp(-h1[0])
        )
        mh = min(1.0, np.exp(h1[0]))
        worst_reduction = max(
            worst_reduction,
            abs(boltzmann(h1)[1] - barker),
            abs(rosenbluth_teller(h1)[1] - mh),
        )
    return [
        CheckRow.at_most("selection normalisation error", worst_norm, 1e-12),
        CheckRow.at_most("Peskun violations", peskun_violations, 0),
        CheckRow.at_most("N=1 reduction error", worst_reduction, 1e-12),
    ]


def _random_cloud(T, N, rng, d=1):
    path = rng.standard_normal((T, d))
    return scatter_cloud(path, np.full(T, 1.0), N, rng)


def suite_ffbs(rng=None):
    rng = rng or substream(7, "validate-ffbs")
    y = rng.standard_normal((3, 1))
    model = build_gauss_rw_model(y)
    cloud = _random_cloud(3, 2, rng)
    target = DiscreteTarget.from_cloud(cloud, model)
    exact = target.exact_joint()
    brute = brute_force_xi(cloud, model)
    dev = float(np.abs(exact - brute).max())
    return [CheckRow.at_most("FFBS joint law vs brute force", dev, 1e-12)]


def suite_invariance(rng=None):
    rng = rng or substream(7, "validate-invariance")
    rows = []
    worst = 0.0
    for N, T in ((1, 2), (2, 2), (1, 3)):
        y = rng.standard_normal((T, 1))
        model = build_gauss_rw_model(y)
        for _ in range(20):
            cloud = _random_cloud(T, N, rng)
            xi = brute_force_xi(cloud, model)
            target = DiscreteTarget.from_cloud(cloud, model)
            for fm in (False, True):
                for bs in (False, True):
                    cfg = KernelConfig(
                        n_particles=N,
                        selection_variant="forced_move" if fm else "boltzmann",
                        index_selection="backward_sampling" if bs else "ancestral_trace",
                    )
                    dev = _xi_invariance_deviation(cloud, model, cfg, xi, target)
                    worst = max(worst, dev)
    rows.append(CheckRow.at_most("xi-invariance max |xi P - xi|", worst, 1e-10))

    # kernel equality under factorisation over time, N=2, T=2
    model_f = _time_factorised_model(rng)
    cloud = _random_cloud(2, 2, rng)
    cfg = KernelConfig(n_particles=2, index_selection="backward_sampling")
    law = index_transition_matrix(cloud, model_f, cfg, np.zeros(2, dtype=int))
    xi = brute_force_xi(cloud, model_f)
    rows.append(
        CheckRow.at_most(
            "time-factorised kernel equals cloud target",
            float(np.abs(law - xi).max()),
            1e-12,
        )
    )
    return rows


def _xi_invariance_deviation(cloud, model, cfg, xi, target=None):
    T = cloud.shape[0]
    n_tot = cloud.shape[1]
    if target is None:
        target = DiscreteTarget.from_cloud(cloud, model)
    out = np.zeros_like(xi)
    for j in itertools.product(range(n_tot), repeat=T):
        law = index_transition_matrix(cloud, model, cfg, np.array(j), target=target)
        out += xi[j] * law
    return float(np.abs(out - xi).max())


def _time_factorised_model(rng):
    """Gaussian model whose transitions ignore the previous state."""
    from .model import UnivariateComponents

    y = rng.standard_normal((2, 1))
    base = build_gauss_rw_model(y)
    c = base.components

    comps = UnivariateComponents(
        log_m1=c.log_m1,
        sample_m1=c.sample_m1,
        log_m=lambda t, xp, x: np.broadcast_to(
            -0.5 * np.log(2 * np.pi) - 0.5 * np.square(x), np.broadcast(xp, x).shape
        ),
        sample_m=lambda t, xp, rng_: rng_.standard_normal(np.shape(xp)),
        log_g=c.log_g,
    )
    return build_product_model(comps, 2, 1)


def suite_bounds():
    rows = []
    q1 = lgssm_assumption_quantities(1)
    q2 = lgssm_assumption_quantities(2)
    rows.append(CheckRow.within("r at horizon 1", q1["r_T"], 0.172195, 1e-6))
    rows.append(CheckRow.within("r at horizon > 1", q2["r_T"], 0.155590, 1e-6))
    rows.append(CheckRow.at_least("r(1) above threshold", q1["r_T"], 0.15))
    rows.append(CheckRow.at_least("r(T>1) above threshold", q2["r_T"], 0.15))

    T = 5
    s2 = stationary_sigma2
    u = s2 / (s2 + 1.0)
    spec = LgssmSpec(T=T, D=1, y=np.zeros((T, 1)), initial_variance=s2 + 1.0)
    res = kalman_smooth(spec)
    rows.append(
        CheckRow.at_most(
            "stationary filter variance deviation",
            float(np.abs(res.filter_variances - s2).max()),
            1e-12,
        )
    )
    cov = smoother_covariance_matrix(spec)
    sig = np.array(
        [
            u * (1 - (u * u) ** (T - 1 - t)) / (1 - u * u) * (t < T - 1)
            + (u * u) ** (T - 1 - t) * s2
            for t in range(T)
        ]
    )
    closed = np.array(
        [[u ** abs(t - s) * sig[max(s, t)] for t in range(T)] for s in range(T)]
    )
    rows.append(
        CheckRow.at_most(
            "smoother covariance vs closed form",
            float(np.abs(cov - closed).max()),
            1e-10,
        )
    )

    b = analytic_bounds(1.0, 2.0, 31)
    rows.append(CheckRow.within("backward-sampling bound example", b["bs_bound"], 0.807521, 1e-6))
    rows.append(CheckRow.within("random-walk MH rate example", b["rwmh_rate"], 0.479500, 1e-6))
    return rows


def suite_limits(rng=None, n_draws=100_000):
    from .kalman import spec_for_model

    rng = rng or substream(7, "validate-limits")
    rows = []
    T = 5
    y = rng.standard_normal((T, 1))
    model = preset_model("gauss-rw", y)
    spec = spec_for_model(model)

    # vectorised sampler: dimensions of one wide FFBS draw are iid paths
    def sampler_fast(m, r):
        from .kalman import ffbs_exact_sample

        wide = LgssmSpec(
            T=T,
            D=m,
            y=np.repeat(y, m, axis=1),
            initial_variance=spec.initial_variance,
        )
        return ffbs_exact_sample(wide, r).T

    moments = estimate_limit_moments(model, sampler_fast, n_draws, rng)
    gap = np.abs(moments.i_t - moments.i_t_curvature)
    limit = 4.0 * np.sqrt(moments.se_i**2 + moments.se_mv**2 + moments.se_mw**2)
    rows.append(
        CheckRow.at_most(
            "integration-by-parts residual (units of 4 se)",
            float((gap / np.maximum(limit, 1e-12)).max()),
            1.0,
        )
    )
    expected_i = np.array([3.0] * (T - 1) + [2.0])
    rows.append(
        CheckRow.at_most(
            "information vs tridiagonal precision (units of 4 se)",
            float(
                (np.abs(moments.i_t - expected_i) / np.maximum(4 * moments.se_i, 1e-12)).max()
            ),
            1.0,
        )
    )
    return rows


def _theta_test_model(y):
    """Observation-scale parameter with a log-normal prior."""

    def log_prior(theta):
        lt = np.log(theta)
        return -0.5 * lt * lt - lt - 0.5 * np.log(2 * np.pi)

    def build(theta):
        return build_gauss_rw_model(y, obs_variance=float(theta) ** 2)

    def propose(theta, context, rng):
        new = float(np.exp(np.log(theta) + 0.6 * rng.standard_normal()))
        # symmetric on the log scale; Jacobian enters through the densities
        return new, -np.log(new), -np.log(theta)

    return ThetaModel(theta_dim=1, log_prior=log_prior, build_model=build, propose=propose)


def quadrature_posterior(y, grid):
    """Posterior of the observation scale by quadrature over a grid."""
    from .kalman import kalman_smooth as ks

    log_post = np.empty(grid.shape[0])
    for i, theta in enumerate(grid):
        spec = LgssmSpec(
            T=y.shape[0], D=y.shape[1], y=y, obs_variance=float(theta) ** 2
        )
        lt = np.log(theta)
        log_prior = -0.5 * lt * lt - lt - 0.5 * np.log(2 * np.pi)
        log_post[i] = log_prior + ks(spec).log_marginal_likelihood
    w = np.exp(log_post - log_post.max())
    w /= np.trapezoid(w, grid)
    return w


def suite_params(rng=None, sweeps=200_000):
    rng = rng or substream(7, "validate-params")
    y = substream(7, "validate-params-obs").standard_normal((3, 1)) * 1.3
    tm = _theta_test_model(y)
    grid = np.linspace(0.05, 8.0, 400)
    dens = quadrature_posterior(y, grid)
    post_mean = np.trapezoid(grid * dens, grid)

    cfg = KernelConfig(n_particles=7, index_selection="backward_sampling", ell=1.0)
    rows = []
    for sampler in ("pg", "ehmm-alt", "rwcsmc-alt"):
        thetas, _ = run_param_chain(
            tm, 1.0, np.zeros((3, 1)), cfg, sweeps, rng, sampler=sampler
        )
        est = thetas.mean()
        se = _batch_se(thetas)
        rows.append(
            CheckRow.within(
                f"{sampler} posterior mean (3 se = {3 * se:.4f})",
                est,
                post_mean,
                3.0 * se,
            )
        )
        rows.append(
            CheckRow.at_most(
                f"{sampler} KS distance to quadrature",
                _ks_distance(thetas, grid, dens),
                0.02,
            )
        )
    return rows


def _batch_se(samples, n_batches=100):
    usable = (samples.shape[0] // n_batches) * n_batches
    batches = samples[:usable].reshape(n_batches, -1).mean(axis=1)
    return batches.std(ddof=1) / np.sqrt(n_batches)


def _ks_distance(samples, grid, dens):
    cdf_grid = np.concatenate([[0.0], np.cumsum(np.diff(grid) * 0.5 * (dens[1:] + dens[:-1]))])
    cdf_grid /= cdf_grid[-1]
    xs = np.sort(samples)
    theo = np.interp(xs, grid, cdf_grid)
    n = xs.shape[0]
    emp_hi = np.arange(1, n + 1) / n
    emp_lo = np.arange(0, n) / n
    return float(max(np.abs(emp_hi - theo).max(), np.abs(emp_lo - theo).max()))


SUITES = {
    "selection": lambda: suite_selection(),
    "ffbs": lambda: suite_ffbs(),
    "invariance": lambda: suite_invariance(),
    "bounds": lambda: suite_bounds(),
    "limits": lambda: suite_limits(),
    "params": lambda: suite_params(),
}


def run_suite(name, stream=None):
    """Run one suite (or "all"); prints a table, returns overall success."""
    import sys

    stream = stream or sys.stdout
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise ConfigError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")

    ok = True
    for suite_name in names:
        start = time.time()
        rows = SUITES[suite_name]()
        elapsed = time.time() - start
        stream.write(f"[{suite_name}] ({elapsed:.1f} s)\n")
        for row in rows:
            status = "PASS" if row.passed else "FAIL"
            stream.write(
                f"  {status}  {row.name}: measured={row.measured:.6g} "
                f"expected={row.expected:.6g} tol={row.tolerance:.3g}\n"
            )
            ok = ok and row.passed
    return ok
