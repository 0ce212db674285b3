"""Experiment orchestration: configs, seeding, replicate execution, CSV.

Chains start at stationarity (the initial path is an exact smoothing
draw), so the default burn-in is zero.  Every random stream is derived
from the root seed through a keyed counter-based generator, so results
are identical regardless of worker count or scheduling.
"""

import csv
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import diagnostics
from .kalman import ffbs_exact_sample, spec_for_model
from .kernels import KernelConfig, kernel_update
from .model import ConfigError, load_observations_csv, preset_model, simulate_observations

__all__ = [
    "ExperimentConfig",
    "substream",
    "run_experiment",
    "run_single_chain",
    "stationary_path",
    "parse_config_file",
    "CSV_COLUMNS",
    "THREADS_ENV_VAR",
]

THREADS_ENV_VAR = "LOCALCSMC_THREADS"

CSV_COLUMNS = [
    "algorithm",
    "variant",
    "T",
    "D",
    "N",
    "ell",
    "t",
    "accept_rate",
    "esjd",
    "ess_resample",
    "ess_backward",
    "autocorr_lag",
    "autocorr",
    "replicates",
    "seed",
]


def substream(root_seed, tag, *indices):
    """Independent generator keyed by (root seed, purpose tag, indices).

    The key schema is normative for reproducibility: the tag string is
    hashed with crc32 and the tuple seeds a counter-based Philox stream,
    so any (replicate, dimension, ...) job owns its stream regardless of
    scheduling.
    """
    key = (int(root_seed), zlib.crc32(tag.encode()), *[int(i) for i in indices])
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration of one experiment sweep (one CSV)."""

    algorithm: str = "rwcsmc"
    selection_variant: str = "boltzmann"
    index_selection: str = "backward_sampling"
    model: str = "gauss-rw"
    observations: Optional[str] = None  # CSV path; None simulates per replicate
    T: int = 25
    d_values: tuple = (2, 16, 64, 256)
    n_particles: int = 31
    ell: float = 1.0
    iterations: int = 5000
    replicates: int = 20
    burn_in: int = 0
    autocorr_lag: Optional[int] = None  # None: lag = D
    seed: int = 1
    output_dir: str = "results"
    threads: int = 1

    def __post_init__(self):
        if self.T < 1 or self.n_particles < 1 or self.iterations < 1 or self.replicates < 1:
            raise ConfigError("sizes must be positive")
        if not self.d_values:
            raise ConfigError("d_values must be nonempty")
        if self.burn_in < 0 or self.burn_in >= self.iterations:
            raise ConfigError("burn_in must be in [0, iterations)")

    def kernel_config(self):
        return KernelConfig(
            n_particles=self.n_particles,
            selection_variant=self.selection_variant,
            index_selection=self.index_selection,
            ell=self.ell,
        )

    @property
    def variant(self):
        return f"{self.selection_variant}+{self.index_selection}"


def stationary_path(model, rng):
    """Exact stationary start for a Gaussian-preset model."""
    return ffbs_exact_sample(spec_for_model(model), rng)


def _observations_for(cfg, d, replicate):
    if cfg.observations is not None:
        y = load_observations_csv(cfg.observations)
        if y.shape != (cfg.T, d):
            raise ConfigError(
                f"observation file shape {y.shape} does not match (T={cfg.T}, D={d})"
            )
        return y
    rng = substream(cfg.seed, "obs", replicate, d)
    return simulate_observations(cfg.model, cfg.T, d, rng)


def run_single_chain(cfg, d, replicate):
    """One replicate chain; returns its diagnostics accumulator."""
    y = _observations_for(cfg, d, replicate)
    model = preset_model(cfg.model, y)
    kcfg = cfg.kernel_config()
    update = kernel_update(cfg.algorithm)

    init_rng = substream(cfg.seed, "init", replicate, d)
    x = stationary_path(model, init_rng)
    chain_rng = substream(cfg.seed, "chain", replicate, d)

    lag = cfg.autocorr_lag if cfg.autocorr_lag is not None else d
    stats = diagnostics.ChainStats(cfg.T, lag)
    for i in range(cfg.iterations):
        x_new, record = update(model, x, kcfg, chain_rng)
        if i >= cfg.burn_in:
            diagnostics.record_update(stats, record, x, x_new)
        x = x_new
    return stats


def _job(args):
    cfg_dict, d, replicate = args
    cfg = ExperimentConfig(**cfg_dict)
    return d, replicate, run_single_chain(cfg, d, replicate)


def run_experiment(cfg, csv_name=None):
    """Run the configured sweep and write one CSV; returns its path.

    Jobs are (D, replicate) pairs executed on a process pool when
    ``cfg.threads`` (or the environment override) exceeds one; results
    are merged in sorted order so the output is scheduling-independent.
    """
    threads = int(os.environ.get(THREADS_ENV_VAR, cfg.threads))
    jobs = [(d, r) for d in cfg.d_values for r in range(cfg.replicates)]
    results = {}
    if threads > 1:
        cfg_dict = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for d, r, stats in pool.map(
                _job, [(cfg_dict, d, r) for d, r in jobs], chunksize=1
            ):
                results[(d, r)] = stats
    else:
        for d, r in jobs:
            results[(d, r)] = run_single_chain(cfg, d, r)

    os.makedirs(cfg.output_dir, exist_ok=True)
    if csv_name is None:
        csv_name = f"{cfg.algorithm}_{cfg.variant}_seed{cfg.seed}.csv"
    out_path = os.path.join(cfg.output_dir, csv_name)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for d in sorted(cfg.d_values):
            merged = diagnostics.merge_stats(
                results[(d, r)] for r in range(cfg.replicates)
            )
            for row in diagnostics.finalize(merged):
                writer.writerow(
                    [
                        cfg.algorithm,
                        cfg.variant,
                        cfg.T,
                        d,
                        cfg.n_particles,
                        _fmt(cfg.ell),
                        row["t"],
                        _fmt(row["accept_rate"]),
                        _fmt(row["esjd"]),
                        _fmt(row["ess_resample"]),
                        _fmt(row["ess_backward"]),
                        row["autocorr_lag"],
                        _fmt(row["autocorr"]),
                        cfg.replicates,
                        cfg.seed,
                    ]
                )
    return out_path


def _fmt(value):
    if value is None:
        return ""
    return format(float(value), ".10g")


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _coerce(name, value):
    if name == "d_values":
        return tuple(int(v) for v in value.split(",") if v.strip())
    if name in ("T", "n_particles", "iterations", "replicates", "burn_in", "seed", "threads"):
        return int(value)
    if name == "autocorr_lag":
        return None if value.lower() in ("", "none", "auto") else int(value)
    if name == "ell":
        return float(value)
    if name == "observations":
        return None if value.lower() in ("", "none") else value
    return value


def parse_config_file(path, overrides=()):
    """Flat key=value config file plus command-line overrides."""
    values = {}
    names = {f.name for f in fields(ExperimentConfig)}
    with open(path) as fh:
        lines = fh.readlines()
    for raw in lines + [o for o in overrides]:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in names:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value)
    return ExperimentConfig(**values)
