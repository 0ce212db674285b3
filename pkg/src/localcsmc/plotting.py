"""SVG panels from diagnostics CSVs: one quantity vs t, one curve per D."""

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .model import ConfigError

__all__ = ["plot_csv"]

QUANTITIES = ["accept_rate", "esjd", "ess_resample", "ess_backward", "autocorr"]

LABELS = {
    "accept_rate": "acceptance rate",
    "esjd": "expected squared jumping distance",
    "ess_resample": "ESS (resampling weights)",
    "ess_backward": "ESS (backward weights)",
    "autocorr": "autocorrelation",
}


def _read_rows(csv_path):
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if reader.fieldnames is None or not rows:
        raise ConfigError(f"{csv_path}: empty or headerless CSV")
    return rows


def plot_csv(csv_path, output_dir):
    """Render one SVG per available quantity; returns the written paths.

    Curves are keyed and legend-ordered by D (ascending); panels are a
    pure function of the CSV contents.
    """
    rows = _read_rows(csv_path)
    os.makedirs(output_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    groups = {}
    for row in rows:
        key = (row["algorithm"], row["variant"])
        groups.setdefault(key, []).append(row)

    written = []
    for (algorithm, variant), group in sorted(groups.items()):
        for quantity in QUANTITIES:
            series = {}
            for row in group:
                if row[quantity] == "":
                    continue
                d = int(row["D"])
                series.setdefault(d, []).append((int(row["t"]), float(row[quantity])))
            if not series:
                continue
            fig, ax = plt.subplots(figsize=(5.0, 3.4))
            for d in sorted(series):
                pts = sorted(series[d])
                ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                        markersize=2.5, label=f"D = {d}")
            ax.set_xlabel("time index t")
            ax.set_ylabel(LABELS[quantity])
            ax.set_title(f"{algorithm} ({variant})")
            ax.legend(fontsize=8)
            fig.tight_layout()
            name = f"{stem}_{algorithm}_{variant}_{quantity}.svg".replace("+", "-")
            path = os.path.join(output_dir, name)
            fig.savefig(path)
            plt.close(fig)
            written.append(path)
    return written
