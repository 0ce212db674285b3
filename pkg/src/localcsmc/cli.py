"""Command-line interface.

Subcommands: ``run`` (experiment sweep from a config file), ``validate``
(named check suites), ``plot`` (SVG panels from diagnostics CSVs),
``param`` (static-parameter chains with CSV trace) and ``limits``
(per-time limiting rates, bounds and standard errors as CSV).

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

import argparse
import csv
import sys

import numpy as np

from .experiments import ExperimentConfig, parse_config_file, run_experiment, substream
from .kalman import LgssmSpec, ffbs_exact_sample, spec_for_model
from .kernels import KernelConfig
from .limits import analytic_bounds, estimate_limit_moments, limit_acceptance_rates
from .model import ConfigError, load_observations_csv, preset_model, simulate_observations
from .plotting import plot_csv

__all__ = ["main"]


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="localcsmc",
        description="Conditional SMC smoothing kernels with local proposals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment sweep")
    p_run.add_argument("--config", required=True, help="key=value config file")
    p_run.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="override a config entry (repeatable)",
    )
    p_run.add_argument("--plots", action="store_true", help="also render SVG panels")

    p_val = sub.add_parser("validate", help="run a validation suite")
    p_val.add_argument(
        "suite",
        help="selection | invariance | ffbs | limits | bounds | params | all",
    )

    p_plot = sub.add_parser("plot", help="render SVG panels from CSVs")
    p_plot.add_argument("csvs", nargs="+", help="diagnostics CSV files")
    p_plot.add_argument("--output-dir", default="plots")

    p_par = sub.add_parser("param", help="static-parameter estimation chain")
    p_par.add_argument("--sampler", choices=["pg", "ehmm-alt", "rwcsmc-alt"], default="pg")
    p_par.add_argument("--algorithm", choices=["icsmc", "rwehmm", "rwcsmc"], default="rwcsmc")
    p_par.add_argument("--sweeps", type=int, default=20_000)
    p_par.add_argument("--t-steps", type=int, default=3)
    p_par.add_argument("--dim", type=int, default=1)
    p_par.add_argument("--n-particles", type=int, default=7)
    p_par.add_argument("--ell", type=float, default=1.0)
    p_par.add_argument("--prior-scale", type=float, default=1.0)
    p_par.add_argument("--proposal-scale", type=float, default=0.6)
    p_par.add_argument("--theta0", type=float, default=1.0)
    p_par.add_argument("--seed", type=int, default=1)
    p_par.add_argument("--out", default="param_trace.csv")

    p_lim = sub.add_parser("limits", help="limiting rates, bounds and errors")
    p_lim.add_argument("--model", default="gauss-rw")
    p_lim.add_argument("--t-steps", type=int, default=25)
    p_lim.add_argument("--n-particles", type=int, default=31)
    p_lim.add_argument("--ell", type=float, default=1.0)
    p_lim.add_argument("--draws", type=int, default=100_000)
    p_lim.add_argument("--reps", type=int, default=100_000)
    p_lim.add_argument("--forced-move", action="store_true")
    p_lim.add_argument(
        "--index-selection",
        choices=["ancestral_trace", "backward_sampling"],
        default="backward_sampling",
    )
    p_lim.add_argument("--observations", default=None, help="CSV t,d,value; default simulated")
    p_lim.add_argument("--seed", type=int, default=1)
    p_lim.add_argument("--out", default="limits.csv")
    return parser


def _cmd_run(args):
    cfg = parse_config_file(args.config, args.override)
    path = run_experiment(cfg)
    print(f"wrote {path}")
    if args.plots:
        for svg in plot_csv(path, cfg.output_dir):
            print(f"wrote {svg}")
    return 0


def _cmd_validate(args):
    from .validate import run_suite

    return 0 if run_suite(args.suite) else 1


def _cmd_plot(args):
    for path in args.csvs:
        for svg in plot_csv(path, args.output_dir):
            print(f"wrote {svg}")
    return 0


def _cmd_param(args):
    from .params import ThetaModel, run_param_chain
    from .model import build_gauss_rw_model

    rng = substream(args.seed, "param-chain")
    y = simulate_observations("gauss-rw", args.t_steps, args.dim,
                              substream(args.seed, "param-obs"))
    ps = args.prior_scale

    def log_prior(theta):
        lt = np.log(theta)
        return -0.5 * (lt / ps) ** 2 - lt - np.log(ps) - 0.5 * np.log(2 * np.pi)

    def build(theta):
        return build_gauss_rw_model(y, obs_variance=float(theta) ** 2)

    def propose(theta, context, rng_):
        new = float(np.exp(np.log(theta) + args.proposal_scale * rng_.standard_normal()))
        return new, -np.log(new), -np.log(theta)

    tm = ThetaModel(theta_dim=1, log_prior=log_prior, build_model=build, propose=propose)
    cfg = KernelConfig(
        n_particles=args.n_particles,
        index_selection="backward_sampling",
        ell=args.ell,
    )
    model0 = build(args.theta0)
    path0 = ffbs_exact_sample(spec_for_model(model0), rng)
    thetas, accepts = run_param_chain(
        tm, args.theta0, path0, cfg, args.sweeps, rng,
        sampler=args.sampler, algorithm=args.algorithm,
        theta_scale=args.proposal_scale,
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "iteration", "accepted"])
        for i, (theta, acc) in enumerate(zip(thetas, accepts), start=1):
            writer.writerow([format(theta, ".10g"), i, int(acc)])
    print(f"wrote {args.out} (acceptance {accepts.mean():.3f})")
    return 0


def _cmd_limits(args):
    rng = substream(args.seed, "limits")
    if args.observations:
        y = load_observations_csv(args.observations)
        if y.shape[0] != args.t_steps:
            raise ConfigError("observation horizon does not match --t-steps")
    else:
        y = simulate_observations(args.model, args.t_steps, 1, substream(args.seed, "limits-obs"))
    model = preset_model(args.model, y)
    spec = spec_for_model(model)

    def sampler(m, r):
        wide = LgssmSpec(
            T=args.t_steps, D=m, y=np.repeat(y[:, :1], m, axis=1),
            initial_variance=spec.initial_variance,
        )
        return ffbs_exact_sample(wide, r).T

    moments = estimate_limit_moments(model, sampler, args.draws, rng, ell=args.ell)
    cfg = KernelConfig(
        n_particles=args.n_particles,
        selection_variant="forced_move" if args.forced_move else "boltzmann",
        index_selection=args.index_selection,
        ell=args.ell,
    )
    rates, ses = limit_acceptance_rates(moments, args.n_particles, cfg, args.reps, rng)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "ell", "information", "information_se", "limit_rate", "limit_rate_se",
             "bs_bound", "rwmh_rate"]
        )
        for t in range(args.t_steps):
            bounds = analytic_bounds(moments.ell[t], max(moments.i_t[t], 1e-12),
                                     args.n_particles)
            writer.writerow(
                [t + 1, format(moments.ell[t], ".6g"), format(moments.i_t[t], ".8g"),
                 format(moments.se_i[t], ".3g"), format(rates[t], ".6g"),
                 format(ses[t], ".3g"), format(bounds["bs_bound"], ".6g"),
                 format(bounds["rwmh_rate"], ".6g")]
            )
    print(f"wrote {args.out}")
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "plot": _cmd_plot,
        "param": _cmd_param,
        "limits": _cmd_limits,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
