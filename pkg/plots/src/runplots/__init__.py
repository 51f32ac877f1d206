"""Plot training metrics CSVs: return curves with cross-seed percentile bands
and average-divergence traces.

All statistics use linear-interpolation quantiles (numpy's default), so bands
are reproducible from the numbers alone. Seeds of one label are aligned on the
time steps they all share; a label with a single run has a band of zero width.
"""

from .bands import RunSet, label_series, load_metrics, moving_average, plot_dkl, plot_returns

__all__ = [
    "RunSet",
    "label_series",
    "load_metrics",
    "moving_average",
    "plot_dkl",
    "plot_returns",
]
