"""Simulated path ensembles and their CSV export."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .scheme import SampleGrid


@dataclass
class PathEnsemble:
    """``values[r, i]`` is replica ``r`` at ``times[i]``; replica ``r`` used stream ``first_stream + r``."""

    values: np.ndarray
    times: np.ndarray
    grid: SampleGrid
    seed: int
    first_stream: int = 0
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def replicas(self) -> int:
        return self.values.shape[0]

    def column(self, t) -> np.ndarray:
        """Values at time ``t`` across replicas."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise KeyError(f"time {t} not in ensemble")
        return self.values[:, i]

    def same_noise(self, other: "PathEnsemble") -> bool:
        return (self.seed == other.seed and self.first_stream == other.first_stream
                and self.replicas == other.replicas and self.grid == other.grid)

    def to_csv(self, path=None) -> str:
        """``t,rep_0,...,rep_{R-1}`` with one row per time, 17 significant digits."""
        text = paths_to_csv(self.times, self.values)
        if path is not None:
            Path(path).write_text(text)
        return text


def paths_to_csv(times, values) -> str:
    values = np.atleast_2d(values)
    buf = io.StringIO()
    header = ",".join(["t"] + [f"rep_{r}" for r in range(values.shape[0])])
    np.savetxt(buf, np.column_stack([times, values.T]), fmt="%.17g", delimiter=",",
               header=header, comments="")
    return buf.getvalue()


def paths_to_gnuplot(times, values) -> str:
    """Two-column blocks ``t value``, one block per replica separated by blank lines."""
    values = np.atleast_2d(values)
    blocks = []
    for row in values:
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([times, row]), fmt="%.17g", delimiter=" ")
        blocks.append(buf.getvalue())
    return "\n".join(blocks)


def read_paths_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`paths_to_csv`: ``(times, values[replica, time])``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:].T
