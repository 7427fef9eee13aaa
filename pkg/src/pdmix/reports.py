"""CSV tables, SVG plots, and config echoes emitted by the CLI."""

from __future__ import annotations

import csv
import subprocess
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import yaml  # noqa: E402

from ._version import __version__  # noqa: E402


def version_string() -> str:
    """Git-described version when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True,
            text=True,
            cwd=Path(__file__).parent,
            timeout=10,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+git.{out.stdout.strip()}"
    except OSError:
        pass
    return __version__


def write_table(path, header: list[str], rows: list[list]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def echo_config(path, resolved: dict):
    """Write the fully resolved configuration plus the version string."""
    payload = dict(resolved)
    payload["version"] = version_string()
    with open(path, "w") as fh:
        yaml.safe_dump(payload, fh, sort_keys=True)


def _save(fig, path, deterministic: bool):
    metadata = {"Date": None} if deterministic else None
    fig.savefig(path, format="svg", metadata=metadata)
    plt.close(fig)


def plot_predictive(path, dataset, curves: dict, deterministic: bool = False):
    """Histograms per group with predictive (and true, when known) overlays.

    ``curves`` maps a label to a DensityGrid holding one row per group.
    """
    plt.rcParams["svg.hashsalt"] = "pdmix"
    m = dataset.m
    fig, axes = plt.subplots(m, 1, figsize=(7.5, 2.6 * m), squeeze=False)
    styles = ["-", "--", "-."]
    for j in range(m):
        ax = axes[j, 0]
        ax.hist(dataset.groups[j], bins=40, density=True, color="0.85", edgecolor="0.6")
        for (label, grid), style in zip(curves.items(), styles):
            ax.plot(grid.x, grid.values[j], style, color="black", lw=1.2, label=label)
        if dataset.true is not None:
            xs = next(iter(curves.values())).x
            ax.plot(xs, dataset.true[j].pdf(xs), color="red", lw=1.0, label="true")
        ax.set_ylabel(f"group {j + 1}")
        if j == 0:
            ax.legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("x")
    fig.tight_layout()
    _save(fig, path, deterministic)


def plot_met_curve(path, ms: list[int], met_by_model: dict, deterministic: bool = False):
    """Mean execution time per 1e3 sweeps as a function of the group count."""
    plt.rcParams["svg.hashsalt"] = "pdmix"
    fig, ax = plt.subplots(figsize=(6, 4))
    markers = {"pdgsbp": "o", "rpddp": "s"}
    for model, mets in met_by_model.items():
        ax.plot(ms, mets, marker=markers.get(model, "x"), label=model)
    ax.set_xlabel("number of groups m")
    ax.set_ylabel("seconds per 1000 iterations")
    ax.set_xticks(ms)
    ax.legend()
    fig.tight_layout()
    _save(fig, path, deterministic)
