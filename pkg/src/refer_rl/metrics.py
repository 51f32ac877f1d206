"""Training metrics: one CSV row per time-step bin.

Return statistics summarize the episodes that finished inside the bin; a bin
with no finished episode carries the previous statistics forward (seeded from
the warm-up episodes). Floats are written with repr so identical runs yield
identical bytes.
"""

from __future__ import annotations

import numpy as np

HEADER = (
    "time_step",
    "grad_step",
    "beta",
    "c_max",
    "eta",
    "far_fraction",
    "avg_dkl",
    "mean_return",
    "return_p20",
    "return_p80",
    "sigma_r",
    "wall_seconds",
)


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("no boolean metrics")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def return_stats(returns):
    r = np.asarray(returns, dtype=np.float64)
    p20, p80 = np.quantile(r, [0.2, 0.8])  # linear interpolation
    return float(r.mean()), float(p20), float(p80)


class MetricsLog:
    """Streaming CSV writer with carry-forward return statistics."""

    def __init__(self, path, bin_width):
        self.path = str(path)
        self.bin_width = int(bin_width)
        self.next_bin = self.bin_width
        self.rows_written = 0
        self.pending = []  # returns of episodes finished in the open bin
        self.carry = (float("nan"), float("nan"), float("nan"))
        self._fh = None

    # ---- lifecycle -----------------------------------------------------------

    def open_fresh(self):
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._fh.write(",".join(HEADER) + "\n")
        self._fh.flush()

    def open_resume(self):
        """Reopen an existing file, truncated to the rows recorded in state, so
        a resumed run appends exactly after the checkpointed row."""
        with open(self.path, "r", encoding="utf-8", newline="") as fh:
            lines = fh.readlines()
        if not lines or lines[0].rstrip("\n") != ",".join(HEADER):
            raise RuntimeError(f"{self.path} is not a metrics file")
        keep = lines[: 1 + self.rows_written]
        if len(keep) < 1 + self.rows_written:
            raise RuntimeError(f"{self.path} has fewer rows than the checkpoint recorded")
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._fh.writelines(keep)
        self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # ---- accumulation ----------------------------------------------------------

    def note_return(self, ret: float):
        self.pending.append(float(ret))

    def seed_returns(self, returns):
        """Prime the carry-forward statistics (from warm-up episodes)."""
        if len(returns):
            self.carry = return_stats(returns)

    def due(self, t: int) -> bool:
        return t >= self.next_bin

    def advance_past(self, t: int):
        """Move the first bin boundary beyond t without writing rows (bins
        during warm-up are not reported)."""
        while self.next_bin <= t:
            self.next_bin += self.bin_width

    def emit(self, *, time_step, grad_step, beta, c_max, eta, far_fraction, avg_dkl,
             sigma_r, wall_seconds):
        if self.pending:
            self.carry = return_stats(self.pending)
            self.pending.clear()
        mean_ret, p20, p80 = self.carry
        row = (
            int(time_step), int(grad_step), beta, c_max, eta, far_fraction,
            avg_dkl, mean_ret, p20, p80, sigma_r, wall_seconds,
        )
        self._fh.write(",".join(format_value(v) for v in row) + "\n")
        self._fh.flush()
        self.rows_written += 1
        self.next_bin += self.bin_width

    # ---- checkpoint state ------------------------------------------------------

    def state(self) -> dict:
        return {
            "next_bin": self.next_bin,
            "rows_written": self.rows_written,
            "pending": list(self.pending),
            "carry": list(self.carry),
        }

    def load_state(self, st: dict):
        self.next_bin = int(st["next_bin"])
        self.rows_written = int(st["rows_written"])
        self.pending = [float(x) for x in st["pending"]]
        self.carry = tuple(float(x) for x in st["carry"])
