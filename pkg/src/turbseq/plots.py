"""Figure rendering for the CLI report paths.

Figures accompany the CSV outputs as a quick visual check; the CSVs remain
the canonical, byte-reproducible record.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = [
    "save_curve_figure",
    "save_energy_figure",
    "save_report_figure",
]


def save_curve_figure(path, curves, labels=None, title="Pseudo-MTF curves", average=None):
    """Plot gain-vs-frequency curves, optionally overlaying their average."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, curve in enumerate(curves):
        label = labels[i] if labels else None
        ax.plot(curve.frequencies, curve.delta_s, marker="o", markersize=3,
                linewidth=1, alpha=0.6 if average is not None else 1.0, label=label)
    if average is not None:
        ax.plot(average.frequencies, average.delta_s, marker="s", color="black",
                linewidth=2, label="average")
    ax.set_xlabel("spatial frequency (cycles/pixel)")
    ax.set_ylabel("average gain")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if labels or average is not None:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.fspath(path), dpi=150)
    plt.close(fig)


def save_energy_figure(path, traces, labels=None, title="Registration energy"):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, trace in enumerate(traces):
        label = labels[i] if labels else None
        ax.plot(range(len(trace)), trace, linewidth=1, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("energy")
    if any(v > 0 for trace in traces for v in trace):
        ax.set_yscale("log")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if labels:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.fspath(path), dpi=150)
    plt.close(fig)


def save_report_figure(path, curves_by_method, rmse_by_method):
    """Two-panel pipeline report: pseudo-MTF per method and RMSE bars."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.5))
    for method, curve in curves_by_method.items():
        ax1.plot(curve.frequencies, curve.delta_s, marker="o", markersize=3,
                 linewidth=1.2, label=method)
    ax1.set_xlabel("spatial frequency (cycles/pixel)")
    ax1.set_ylabel("average gain")
    ax1.set_title("Pseudo-MTF by method")
    ax1.grid(True, alpha=0.3)
    ax1.legend(fontsize=8)

    methods = list(rmse_by_method)
    ax2.bar(methods, [rmse_by_method[m] for m in methods], color="steelblue")
    ax2.set_ylabel("RMSE to clean")
    ax2.set_title("Restoration error")
    ax2.tick_params(axis="x", rotation=20)
    ax2.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.fspath(path), dpi=150)
    plt.close(fig)
