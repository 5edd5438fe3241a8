"""SVG line charts from run CSVs."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Preferred y columns, in order, when none is named explicitly.
DEFAULT_Y = ("mean_reward_selected", "diverse_actives", "scaffolds_cum", "n_scaffolds")


def read_columns(path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise ValueError(f"{path}: no header row")
        cols: dict[str, list[str]] = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                cols[name].append(row[name])
    return cols


def _infer_y(cols, x: str) -> str:
    for name in DEFAULT_Y:
        if name in cols:
            return name
    others = [c for c in cols if c != x]
    if not others:
        raise ValueError("no column to plot")
    return others[0]


def plot_csvs(paths, out, x: str = "step", y: str | None = None, labels=None) -> Path:
    """One line per CSV; axis labels are the column names."""
    paths = [Path(p) for p in paths]
    if labels is not None and len(labels) != len(paths):
        raise ValueError(f"{len(labels)} labels for {len(paths)} inputs")
    tables = [read_columns(p) for p in paths]
    y = y or _infer_y(tables[0], x)
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        for i, (path, cols) in enumerate(zip(paths, tables)):
            for name in (x, y):
                if name not in cols:
                    raise ValueError(f"{path}: missing column {name!r}")
            label = labels[i] if labels else (path.parent.name or path.stem)
            ax.plot([float(v) for v in cols[x]], [float(v) for v in cols[y]], label=label)
        ax.set_xlabel(x)
        ax.set_ylabel(y)
        if len(paths) > 1:
            ax.legend()
        fig.tight_layout()
        out = Path(out)
        fig.savefig(out, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return out
