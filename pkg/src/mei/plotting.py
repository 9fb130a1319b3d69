"""Figures for the CLI reports. Uses the non-interactive Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import CATEGORIES, ErrorCounts, VaryingKReport  # noqa: E402
from .metrics import Report  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_entity_f1(report: Report, path: str | Path) -> Path:
    labels = [f"{d}:{p}" for d, _, p, _ in report.rows]
    values = [s.f1 for *_, s in report.rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.4 * len(labels) + 1), 3.5))
    ax.bar(range(len(values)), values, color="tab:blue")
    ax.set_xticks(range(len(labels)), labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F1")
    ax.set_title(f"macro {report.macro:.3f}  micro {report.micro:.3f}")
    return _save(fig, path)


def plot_error_counts(counts: ErrorCounts, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(range(len(CATEGORIES)), counts.as_tuple(), color="tab:red")
    ax.set_xticks(range(len(CATEGORIES)), [c.replace("_", "\n") for c in CATEGORIES], fontsize=8)
    ax.set_ylabel("count")
    return _save(fig, path)


def plot_varying_k(report: VaryingKReport, path: str | Path) -> Path:
    data = np.array([[np.nan if v is None else v for v in row] for row in report.cells], dtype=float)
    if data.size == 0:
        data = np.full((1, report.k_max + 1), np.nan)
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * (report.k_max + 1), 1.0 + 0.4 * max(1, len(report.cells))))
    im = ax.imshow(np.ma.masked_invalid(data), vmin=0, vmax=1, cmap="viridis", aspect="auto")
    ax.set_xticks(range(report.k_max + 1), ["sole"] + [str(k) for k in range(1, report.k_max + 1)])
    ax.set_yticks(range(len(report.phrases)), report.phrases, fontsize=8)
    ax.set_xlabel("number of target entities")
    fig.colorbar(im, ax=ax, label="F1")
    return _save(fig, path)
