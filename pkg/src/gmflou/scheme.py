"""Riemann–Stieltjes discretisation engine.

Every process in this package is a linear functional of one realisation of the
driving Lévy noise ``L``.  A realisation is a vector of independent increments
over two families of cells:

* *uniform* cells ``[k/n, (k+1)/n)`` for ``k = -a_n, ..., floor(nT) - 1``, on
  which the fractional Lévy process and everything built from it are formed by
  the usual left-point Riemann–Stieltjes sums;
* *far* cells reaching from ``-a_n/n`` back to ``-far_horizon``, with widths
  growing geometrically from ``1/n``.  On them the contribution of the remote
  past is carried by the exact (Riemann–Liouville composed) kernel of the
  process with respect to ``dL``, averaged over each cell.

Setting ``far_horizon=0`` removes the far cells and gives the plain truncated
scheme with ``a_n`` uniform cells of history.

A :class:`Functional` stores, for each requested output time, the weight of
every noise cell.  :func:`simulate` draws the noise replica by replica (replica
``r`` uses stream ``first_stream + r``) and applies all functionals to the same
draw, which is how several processes are coupled through one noise path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma as gamma_fn

from .errors import ParameterError
from .levy import LevySpec, SeedLineage

__all__ = [
    "SampleGrid",
    "NoiseLayout",
    "Functional",
    "fractional_increment_weights",
    "functional_from_cell_weights",
    "simulate",
    "draw_noise",
    "scheme_covariance",
]

BLOCK = 64
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class SampleGrid:
    """Uniform time grid ``k/n`` on ``[0, T]`` plus the history behind ``t = 0``.

    ``trunc`` is the number of uniform cells of history ``a_n`` (default ``n**2``).
    """

    n: int
    horizon: float = 1.0
    trunc: int | None = None
    far_horizon: float = 1e12
    far_ratio: float = 1.05

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("grid density n must be an integer >= 1")
        if not self.horizon > 0:
            raise ParameterError("horizon T must be positive")
        if self.trunc is not None and self.trunc < 1:
            raise ParameterError("truncation index a_n must be >= 1")
        if self.far_horizon < 0:
            raise ParameterError("far_horizon must be >= 0")
        if not self.far_ratio > 1:
            raise ParameterError("far_ratio must exceed 1")

    @classmethod
    def with_optimal_trunc(cls, n, d, **kw):
        """Use ``a_n = n**((2-d)/(1-d))`` instead of ``n**2``."""
        return cls(n, trunc=int(math.ceil(n ** ((2.0 - d) / (1.0 - d)))), **kw)

    @property
    def a_n(self) -> int:
        return int(self.trunc) if self.trunc is not None else int(self.n) ** 2

    @property
    def steps(self) -> int:
        return int(math.floor(self.n * self.horizon + 1e-9))

    @property
    def dt(self) -> float:
        return 1.0 / self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) / self.n

    def index_of(self, t) -> np.ndarray:
        """Grid indices of the given times (which must lie on the grid)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.rint(t * self.n).astype(int)
        if np.any(np.abs(idx / self.n - t) > 1e-9) or np.any(idx < 0) or np.any(idx > self.steps):
            raise ParameterError(f"times {t} are not points of the grid")
        return idx

    def to_dict(self):
        return {"n": self.n, "horizon": self.horizon, "trunc": self.trunc,
                "far_horizon": self.far_horizon, "far_ratio": self.far_ratio}


@dataclass(frozen=True)
class NoiseLayout:
    """Cell geometry implied by a grid (derived, cached on first use)."""

    grid: SampleGrid
    uniform_left: np.ndarray = field(init=False, repr=False)
    far_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.grid
        object.__setattr__(self, "uniform_left", np.arange(-g.a_n, g.steps) / g.n)
        start = g.a_n / g.n
        if g.far_horizon <= start:
            edges = np.array([start])
        else:
            # widths (1/n) r^k until the cumulated distance passes far_horizon
            r = g.far_ratio
            count = int(math.ceil(math.log1p((g.far_horizon - start) * g.n * (r - 1.0) / r) / math.log(r)))
            widths = (r ** np.arange(1, count + 1)) / g.n
            edges = start + np.concatenate(([0.0], np.cumsum(widths)))
        object.__setattr__(self, "far_edges", edges)

    @property
    def n_uniform(self) -> int:
        return self.uniform_left.size

    @property
    def n_far(self) -> int:
        return self.far_edges.size - 1

    @property
    def far_widths(self) -> np.ndarray:
        return np.diff(self.far_edges)

    @property
    def widths(self) -> np.ndarray:
        """Widths of all noise cells in draw order: far cells, then uniform cells."""
        return np.concatenate((self.far_widths, np.full(self.n_uniform, self.grid.dt)))

    def far_average(self, kernel: Callable[[np.ndarray, np.ndarray], np.ndarray],
                    times: np.ndarray) -> np.ndarray:
        """Cell averages of ``kernel(t, x)`` over the far cells, ``x`` = distance before 0."""
        if self.n_far == 0:
            return np.zeros((times.size, 0))
        lo, hi = self.far_edges[:-1], self.far_edges[1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        out = np.empty((times.size, lo.size))
        for i, t in enumerate(times):
            out[i] = 0.5 * (kernel(t, x) @ _GL_WEIGHTS)
        return out


@dataclass
class Functional:
    """Noise-cell weights of a process at a set of output times."""

    name: str
    times: np.ndarray
    uniform: np.ndarray
    far: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.uniform.shape[0] != self.times.size or self.far.shape[0] != self.times.size:
            raise ValueError("weight rows must match output times")

    def __add__(self, other):
        return Functional(f"{self.name}+{other.name}", self.times,
                          self.uniform + other.uniform, self.far + other.far)

    def __sub__(self, other):
        return Functional(f"{self.name}-{other.name}", self.times,
                          self.uniform - other.uniform, self.far - other.far)

    def scaled(self, c, name=None):
        return Functional(name or self.name, self.times, c * self.uniform, c * self.far)

    def combine(self, coeffs, time, name=None):
        """One-row functional ``sum_i coeffs[i] * self[i]``."""
        coeffs = np.asarray(coeffs, dtype=float)
        return Functional(name or self.name, np.array([time]),
                          (coeffs @ self.uniform)[None, :], (coeffs @ self.far)[None, :])

    def rows(self, idx, name=None):
        idx = np.atleast_1d(idx)
        return Functional(name or self.name, self.times[idx], self.uniform[idx], self.far[idx])


def fractional_increment_weights(size: int, n: int, d: float) -> np.ndarray:
    """Weight of noise cell ``k - p`` in the fLp increment over cell ``k``.

    ``b[p] = ((p+1)^d - p^d) / (Gamma(d+1) n^d)``; this is the difference of two
    consecutive left-point kernel sums, so summing increments reproduces the
    direct two-sum approximation of ``L^d(t)``.
    """
    p = np.arange(size, dtype=float)
    return ((p + 1.0) ** d - p ** d) / (gamma_fn(d + 1.0) * float(n) ** d)


def functional_from_cell_weights(name, grid: SampleGrid, d: float, indices, weights: np.ndarray,
                                 far_kernel, layout: NoiseLayout | None = None) -> Functional:
    """Compose weights on fLp-increment cells with the fLp increment map.

    ``weights[i, k]`` multiplies ``L^d(u_{k+1}) - L^d(u_k)`` in the output at
    grid index ``indices[i]``; ``far_kernel(t, x)`` is the process kernel with
    respect to ``dL`` at distance ``x`` before the origin.
    """
    layout = layout or NoiseLayout(grid)
    idx = np.atleast_1d(indices)
    times = idx / grid.n
    N = layout.n_uniform
    b = fractional_increment_weights(N, grid.n, d)
    uniform = np.empty((idx.size, N))
    for lo in range(0, idx.size, 8):
        chunk = weights[lo:lo + 8, ::-1]
        conv = fftconvolve(chunk, b[None, :], axes=1)[:, :N]
        uniform[lo:lo + 8] = conv[:, ::-1]
    # causal: cells at or after the output time carry no weight
    uniform[(layout.uniform_left[None, :] * grid.n) >= idx[:, None]] = 0.0
    far = layout.far_average(far_kernel, times)
    return Functional(name, times, uniform, far)


def draw_noise(spec: LevySpec, grid: SampleGrid, lineage: SeedLineage,
               layout: NoiseLayout | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Noise of one replica as ``(far_increments, uniform_increments)``."""
    layout = layout or NoiseLayout(grid)
    incr = spec.draw(lineage.generator(), layout.widths)
    return incr[:layout.n_far], incr[layout.n_far:]


def simulate(spec: LevySpec, grid: SampleGrid, functionals: Sequence[Functional], seed: int,
             replicas: int, threads: int = 1, first_stream: int = 0,
             layout: NoiseLayout | None = None) -> list[np.ndarray]:
    """Evaluate all functionals on ``replicas`` independent noise draws.

    Returns one ``replicas x len(times)`` array per functional.  Rows are
    computed in fixed blocks, so the result is the same for any ``threads``.
    """
    if replicas < 1:
        raise ParameterError("replicas must be >= 1")
    layout = layout or NoiseLayout(grid)
    widths = layout.widths
    n_far = layout.n_far
    uni = np.ascontiguousarray(np.vstack([f.uniform for f in functionals]).T)
    far = np.ascontiguousarray(np.vstack([f.far for f in functionals]).T)
    out = np.empty((replicas, uni.shape[1]))

    def run_block(lo):
        hi = min(lo + BLOCK, replicas)
        noise = np.empty((hi - lo, widths.size))
        for r in range(lo, hi):
            rng = SeedLineage(seed, first_stream + r).generator()
            noise[r - lo] = spec.draw(rng, widths)
        out[lo:hi] = noise[:, n_far:] @ uni + noise[:, :n_far] @ far

    starts = range(0, replicas, BLOCK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, starts))
    else:
        for lo in starts:
            run_block(lo)

    result, col = [], 0
    for f in functionals:
        result.append(out[:, col:col + f.times.size])
        col += f.times.size
    return result


def scheme_covariance(m2: float, grid: SampleGrid, f1: Functional, f2: Functional | None = None,
                      layout: NoiseLayout | None = None) -> np.ndarray:
    """Exact covariance matrix of the *discretised* processes (no Monte Carlo)."""
    layout = layout or NoiseLayout(grid)
    f2 = f1 if f2 is None else f2
    cov = grid.dt * (f1.uniform @ f2.uniform.T)
    if layout.n_far:
        cov += (f1.far * layout.far_widths) @ f2.far.T
    return m2 * cov
