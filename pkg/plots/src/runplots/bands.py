"""CSV loading, cross-seed alignment, and the two figure styles.

A "label" is one experimental condition backed by >= 1 metrics files (seeds).
Series are aligned on the time steps all seeds share: warm-up length varies
with episode boundaries, so the first reported bin can differ between seeds.
Quantiles are numpy's linear-interpolation kind; with a single seed the 20-80
band therefore collapses onto the mean curve exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import reduce

import matplotlib

matplotlib.use("Agg")  # file output only, no display server
import matplotlib.pyplot as plt
import numpy as np


@dataclass
class RunSet:
    """Plot job: label -> metrics files, plus output and styling options."""

    labels: dict = field(default_factory=dict)
    out: str = "plot.png"
    smooth: int = 1
    log_y: bool = False

    def validate(self):
        if not self.labels:
            raise ValueError("no labels given")
        for name, paths in self.labels.items():
            if not paths:
                raise ValueError(f"label {name!r} matched no metrics files")
        if self.smooth < 1:
            raise ValueError("smoothing window must be >= 1")


def load_metrics(path) -> dict:
    """Read one metrics CSV into {column: float array}. A file without data
    rows is an error: there is nothing to plot."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = [r for r in reader if r]
    if header is None or not rows:
        raise ValueError(f"{path}: no data rows")
    cols = {}
    for i, name in enumerate(header):
        cols[name] = np.array([float(r[i]) for r in rows])
    return cols


def _column(run: dict, name: str, path) -> np.ndarray:
    if name not in run:
        raise ValueError(f"{path}: missing column {name!r}")
    return run[name]


def label_series(runs, paths, column):
    """Align one label's seeds on shared time steps.

    Returns (time_steps, mean, p20, p80) where the statistics are taken
    across seeds at each time step.
    """
    steps = [_column(r, "time_step", p) for r, p in zip(runs, paths)]
    common = reduce(np.intersect1d, steps)
    if common.size == 0:
        raise ValueError("runs share no time steps; were they logged with the same bin width?")
    rows = []
    for run, t, path in zip(runs, steps, paths):
        rows.append(_column(run, column, path)[np.isin(t, common)])
    y = np.stack(rows)
    p20, p80 = np.quantile(y, [0.2, 0.8], axis=0)
    return common, y.mean(axis=0), p20, p80


def moving_average(y, w: int) -> np.ndarray:
    """Trailing mean over the last w points; shorter windows at the start so
    the output length matches the input."""
    y = np.asarray(y, dtype=np.float64)
    if w <= 1:
        return y.copy()
    c = np.concatenate([[0.0], np.cumsum(y)])
    hi = np.arange(1, y.size + 1)
    lo = np.maximum(0, hi - w)
    return (c[hi] - c[lo]) / (hi - lo)


def _gather(runset: RunSet, column: str):
    """Load and align every label before any drawing, so a bad input never
    leaves a partial image behind."""
    runset.validate()
    out = []
    for name, paths in runset.labels.items():
        runs = [load_metrics(p) for p in paths]
        out.append((name, label_series(runs, paths, column)))
    return out


def plot_returns(runset: RunSet) -> str:
    """Mean-return curves with shaded 20-80 percentile bands across seeds."""
    gathered = _gather(runset, "mean_return")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, (t, mean, lo, hi) in gathered:
        (line,) = ax.plot(t, moving_average(mean, runset.smooth), label=name)
        ax.fill_between(t, moving_average(lo, runset.smooth),
                        moving_average(hi, runset.smooth),
                        color=line.get_color(), alpha=0.25, linewidth=0)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("mean return")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(runset.out, dpi=120)
    plt.close(fig)
    return runset.out


def plot_dkl(runset: RunSet) -> str:
    """Average divergence between replayed behaviors and the current policy,
    one trace per label (mean across seeds)."""
    gathered = _gather(runset, "avg_dkl")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, (t, mean, _, _) in gathered:
        ax.plot(t, moving_average(mean, runset.smooth), label=name)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("average KL divergence")
    if runset.log_y:
        ax.set_yscale("log")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(runset.out, dpi=120)
    plt.close(fig)
    return runset.out
