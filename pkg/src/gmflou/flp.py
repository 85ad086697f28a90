"""Fractional Lévy process: closed forms and path simulation.

``L^d(t) = int f_t(s) dL(s)`` with the Mandelbrot–Van Ness type kernel
``f_t(s) = ((t-s)_+^d - (-s)_+^d) / Gamma(d+1)``, ``0 < d < 1/2``.

Covariance convention
---------------------
``vd_squared`` returns ``E[L_1^2] / (2 Gamma(2d+2) sin(pi(d+1/2)))``.  With this
constant the process satisfies

    Cov(L^d(s), L^d(t)) = V_d^2 (|t|^{2d+1} + |s|^{2d+1} - |t-s|^{2d+1}),

so ``Var L^d(1) = 2 V_d^2 = C_d / (d(2d+1))`` and the increment covariance at
lag ``n`` is ``V_d^2 h^{2d+1} ((n+1)^{2d+1} + (n-1)^{2d+1} - 2 n^{2d+1})``.
All three forms agree with the isometry constant ``C_d``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import DomainError, ParameterError
from .levy import LevySpec
from .scheme import Functional, NoiseLayout, SampleGrid, functional_from_cell_weights, simulate
from .ensemble import PathEnsemble

__all__ = [
    "FlpParams",
    "SampleGrid",
    "kernel_f",
    "vd_squared",
    "cd_constant",
    "flp_covariance",
    "increment_covariance_delta",
    "flp_functional",
    "flp_increment_functional",
    "simulate_flp",
    "simulate_flp_direct",
]


def _check_d(d):
    if not 0.0 < d < 0.5:
        raise ParameterError(f"memory parameter d must lie in (0, 1/2), got {d!r}")


@dataclass(frozen=True)
class FlpParams:
    d: float
    spec: LevySpec

    def __post_init__(self):
        _check_d(self.d)


def kernel_f(d, t, s):
    """``((t-s)_+^d - (-s)_+^d) / Gamma(d+1)``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    out = (np.maximum(t - s, 0.0) ** d - np.maximum(-s, 0.0) ** d) / gamma_fn(d + 1.0)
    return out[()] if out.ndim == 0 else out


def vd_squared(d, m2):
    return m2 / (2.0 * gamma_fn(2.0 * d + 2.0) * np.sin(np.pi * (d + 0.5)))


def cd_constant(d, m2):
    """Isometry constant ``Gamma(1-2d) m2 / (Gamma(d) Gamma(1-d))``."""
    if not 0.0 < d < 0.5:
        raise DomainError(f"C_d needs 0 < d < 1/2 (Gamma(1-2d) has a pole at d = 1/2), got {d!r}")
    return gamma_fn(1.0 - 2.0 * d) * m2 / (gamma_fn(d) * gamma_fn(1.0 - d))


def flp_covariance(d, s, t, m2):
    p = 2.0 * d + 1.0
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = vd_squared(d, m2) * (np.abs(t) ** p + np.abs(s) ** p - np.abs(t - s) ** p)
    return out[()] if out.ndim == 0 else out


def increment_covariance_delta(d, n_lag, hstep, m2):
    """Covariance of two fLp increments of length ``hstep`` that are ``n_lag`` steps apart."""
    n = np.asarray(n_lag, dtype=float)
    if np.any(n < 1):
        raise ParameterError("lag must be >= 1")
    p = 2.0 * d + 1.0
    out = vd_squared(d, m2) * hstep ** p * ((n + 1.0) ** p + (n - 1.0) ** p - 2.0 * n ** p)
    return out[()] if out.ndim == 0 else out


def flp_functional(grid: SampleGrid, d: float, indices=None, layout=None, name="flp") -> Functional:
    """Noise weights of ``L^d`` at grid indices: the two left-point sums plus the far tail."""
    _check_d(d)
    layout = layout or NoiseLayout(grid)
    idx = np.arange(grid.steps + 1) if indices is None else np.atleast_1d(indices)
    times = idx / grid.n
    u = layout.uniform_left
    uniform = kernel_f(d, times[:, None], u[None, :])
    c = 1.0 / gamma_fn(d + 1.0)
    far = layout.far_average(lambda t, x: c * ((t + x) ** d - x ** d), times)
    return Functional(name, times, np.atleast_2d(uniform), far)


def flp_increment_functional(grid: SampleGrid, d: float, cells, layout=None) -> Functional:
    """Weights of ``L^d(u_{k+1}) - L^d(u_k)`` for uniform cell indices ``k`` (may be negative)."""
    layout = layout or NoiseLayout(grid)
    cells = np.atleast_1d(cells)
    u = layout.uniform_left
    lo = kernel_f(d, cells[:, None] / grid.n, u[None, :])
    hi = kernel_f(d, (cells[:, None] + 1) / grid.n, u[None, :])
    c = 1.0 / gamma_fn(d + 1.0)
    far_hi = layout.far_average(lambda t, x: c * ((t + x) ** d - x ** d), (cells + 1) / grid.n)
    far_lo = layout.far_average(lambda t, x: c * ((t + x) ** d - x ** d), cells / grid.n)
    return Functional("dflp", cells / grid.n, hi - lo, far_hi - far_lo)


def simulate_flp(params: FlpParams, grid: SampleGrid, seed: int, replicas: int = 1,
                 threads: int = 1, first_stream: int = 0) -> PathEnsemble:
    """Simulate ``replicas`` paths of ``L^d`` on the grid; row ``r`` uses stream ``first_stream + r``."""
    layout = NoiseLayout(grid)
    f = flp_functional(grid, params.d, layout=layout)
    (values,) = simulate(params.spec, grid, [f], seed, replicas, threads, first_stream, layout)
    return PathEnsemble(values, f.times, grid, seed, first_stream,
                        {"process": "flp", "d": params.d, "levy": params.spec.to_dict()})


def simulate_flp_direct(d: float, grid: SampleGrid, uniform_noise: np.ndarray) -> np.ndarray:
    """Reference O(n * a_n) evaluation of the two displayed sums (no far tail).

    ``uniform_noise[j + a_n]`` is the increment over ``[j/n, (j+1)/n)``.
    """
    n, a_n = grid.n, grid.a_n
    c = 1.0 / gamma_fn(d + 1.0)
    path = np.zeros(grid.steps + 1)
    for i in range(grid.steps + 1):
        t = i / n
        total = 0.0
        for k in range(-a_n, 0):
            total += ((t - k / n) ** d - (-k / n) ** d) * uniform_noise[k + a_n]
        for k in range(0, i):
            total += (t - k / n) ** d * uniform_noise[k + a_n]
        path[i] = c * total
    return path


def flp_via_increments(grid: SampleGrid, d: float, indices, layout=None) -> Functional:
    """``L^d`` assembled as cumulative sums of fLp increments (same weights, other route)."""
    layout = layout or NoiseLayout(grid)
    idx = np.atleast_1d(indices)
    k = np.rint(layout.uniform_left * grid.n).astype(int)
    W = ((k[None, :] >= 0) & (k[None, :] < idx[:, None])).astype(float)
    c = 1.0 / gamma_fn(d + 1.0)
    return functional_from_cell_weights("flp", grid, d, idx, W,
                                        lambda t, x: c * ((t + x) ** d - x ** d), layout)
