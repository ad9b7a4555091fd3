"""Delimited summaries and figures rendered next to the JSON reports."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# Fixed PNG metadata keeps repeated runs byte-identical.
_SAVEFIG_KWARGS = {"dpi": 100, "metadata": {"Software": "mouthwarp"}}

ENERGY_COLUMNS = [
    "window", "start", "retrieved_index", "retrieved_distance",
    "init_e_f", "init_e_b", "init_e_t", "init_l_tw",
    "final_e_f", "final_e_b", "final_e_t", "final_l_tw",
    "iterations", "converged", "error",
]


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _energy_rows(report: dict) -> list:
    rows = []
    for entry in report["windows"]:
        if entry.get("error"):
            rows.append([entry["index"], entry["start"], "", "", *[""] * 8, "", "", entry["error"]])
            continue
        init = entry["init"]
        final = entry["final"]
        rows.append([
            entry["index"], entry["start"],
            entry["retrieved_index"], entry["retrieved_distance"],
            init["e_f"], init["e_b"], init["e_t"], init["l_tw"],
            final["e_f"], final["e_b"], final["e_t"], final["l_tw"],
            entry["iterations"], entry["converged"], "",
        ])
    return rows


def write_energy_outputs(out_dir, report: dict) -> None:
    """energies.csv plus an init-versus-final figure for a warp run."""
    out_dir = Path(out_dir)
    write_csv(out_dir / "energies.csv", ENERGY_COLUMNS, _energy_rows(report))

    good = [e for e in report["windows"] if not e.get("error")]
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.4))
    if good:
        idx = [e["index"] for e in good]
        axes[0].plot(idx, [e["init"]["e_t"] for e in good], "o-", ms=3, label="initial")
        axes[0].plot(idx, [e["final"]["e_t"] for e in good], "s-", ms=3, label="optimized")
        axes[1].plot(idx, [e["init"]["l_tw"] for e in good], "o-", ms=3, label="initial")
        axes[1].plot(idx, [e["final"]["l_tw"] for e in good], "s-", ms=3, label="optimized")
    axes[0].set_xlabel("window")
    axes[0].set_ylabel("temporal energy")
    axes[1].set_xlabel("window")
    axes[1].set_ylabel("total objective")
    for ax in axes:
        ax.legend(loc="best", fontsize=8)
    fig.suptitle(f"warp energies ({report['mode']} mode)")
    fig.tight_layout()
    fig.savefig(out_dir / "energies.png", **_SAVEFIG_KWARGS)
    plt.close(fig)


def write_metric_outputs(out_dir, summary: dict, curves=None, distance_map=None) -> None:
    """metrics.csv plus aperture-curve / error-map panels."""
    out_dir = Path(out_dir)
    rows = [[key, value] for key, value in sorted(summary.items())]
    write_csv(out_dir / "metrics.csv", ["metric", "value"], rows)

    panels = int(curves is not None) + int(distance_map is not None)
    if panels == 0:
        return
    fig, axes = plt.subplots(1, panels, figsize=(4.8 * panels, 3.4))
    axes = np.atleast_1d(axes)
    col = 0
    if curves is not None:
        ax = axes[col]
        col += 1
        for label, curve in curves:
            ax.plot(np.arange(curve.length) / curve.fps, curve.samples, label=label)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("lip aperture [px]")
        ax.legend(loc="best", fontsize=8)
    if distance_map is not None:
        ax = axes[col]
        image = ax.imshow(distance_map, cmap="magma")
        fig.colorbar(image, ax=ax, fraction=0.046)
        ax.set_title("mean photometric error")
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(out_dir / "metrics.png", **_SAVEFIG_KWARGS)
    plt.close(fig)
