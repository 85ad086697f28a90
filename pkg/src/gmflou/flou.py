"""Fractional Lévy Ornstein–Uhlenbeck processes with fixed and Gamma-random rates.

``V(t) = int_{-inf}^t exp(lam (t-u)) dL^d(u)`` with ``lam < 0``, and the aggregate
``Z_m(t) = (1/m) sum_k V_k(t)`` in which every coordinate is driven by the *same*
``L^d`` and ``-lam_k`` are i.i.d. ``Gamma(shape=1-h, rate=alpha)``.

The rate convention is the one under which the mixing Laplace transform is
``E exp(lam s) = (alpha / (alpha + s))^(1-h)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma as gamma_fn, hyp1f1

from .ensemble import PathEnsemble
from .errors import DomainError, ParameterError
from .flp import _check_d, cd_constant
from .levy import LAMBDA_DOMAIN, LevySpec, SeedLineage
from .scheme import Functional, NoiseLayout, SampleGrid, functional_from_cell_weights, simulate

log = logging.getLogger(__name__)

__all__ = [
    "MixingParams",
    "LambdaSample",
    "sample_lambda",
    "variance_flou",
    "variance_aggregated",
    "aggregated_term",
    "mixture_kernel",
    "ou_kernel",
    "flou_functional",
    "default_warmup",
    "simulate_flou_fixed",
    "simulate_aggregated",
]

LAMBDA_FLOOR = 1e-6
WARMUP_CAP = 200.0


@dataclass(frozen=True)
class MixingParams:
    h: float
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.h < 1.0:
            raise ParameterError(f"h must lie in (0, 1), got {self.h!r}")
        if not self.alpha > 0.0:
            raise ParameterError(f"alpha must be positive, got {self.alpha!r}")

    def check_with(self, d):
        """Square-integrability of the limit process requires h + d < 1/2."""
        if not self.h + d < 0.5:
            raise DomainError(f"h + d must be < 1/2 (got h={self.h}, d={d})")


@dataclass(frozen=True)
class LambdaSample:
    values: np.ndarray
    h: float
    alpha: float
    seed: int | None = None
    resampled: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ParameterError("lambda sample must be a non-empty vector")
        if np.any(vals >= 0):
            raise DomainError("all mean-reversion coefficients must be negative")
        object.__setattr__(self, "values", vals)

    @property
    def m(self):
        return self.values.size

    def head(self, m):
        """The first ``m`` coefficients (nested aggregates share their prefix)."""
        return LambdaSample(self.values[:m], self.h, self.alpha, self.seed, self.resampled)

    def to_csv(self) -> str:
        return "lambda\n" + "".join(f"{v!r}\n" for v in self.values.tolist())


def sample_lambda(mix: MixingParams, m: int, lineage: SeedLineage, floor: float = LAMBDA_FLOOR) -> LambdaSample:
    """Draw ``m`` coefficients with ``-lam ~ Gamma(1-h, rate alpha)``.

    Draws with ``-lam < floor`` are redrawn; the number of redraws is recorded.
    """
    if m < 1:
        raise ParameterError("m must be >= 1")
    rng = SeedLineage(lineage.root_seed, lineage.stream_index, LAMBDA_DOMAIN).generator()
    x = rng.gamma(1.0 - mix.h, 1.0 / mix.alpha, size=int(m))
    redraws = 0
    bad = x < floor
    while bad.any():
        redraws += int(bad.sum())
        x[bad] = rng.gamma(1.0 - mix.h, 1.0 / mix.alpha, size=int(bad.sum()))
        bad = x < floor
    if redraws:
        log.info("redrew %d mixing coefficients below the floor %g", redraws, floor)
    return LambdaSample(-x, mix.h, mix.alpha, lineage.root_seed, redraws)


def _rates(lam):
    lam = np.atleast_1d(np.asarray(getattr(lam, "values", lam), dtype=float))
    if np.any(lam >= 0):
        raise DomainError("mean-reversion coefficient must be negative (stationary solution)")
    return -lam


def variance_flou(lam, d, m2):
    """``C_d Gamma(2d) / (-lam)^(2d+1)``."""
    (a,) = _rates(lam)
    return cd_constant(d, m2) * gamma_fn(2.0 * d) / a ** (2.0 * d + 1.0)


def aggregated_term(lk, lj, d, m2):
    """``C_d int int e^{lk u + lj v} |u-v|^{2d-1}`` over the positive quadrant."""
    ak, aj = _rates(lk), _rates(lj)
    out = (cd_constant(d, m2) * gamma_fn(2.0 * d)
           * (ak ** (-2.0 * d) + aj ** (-2.0 * d)) / (ak + aj))
    return float(out[0]) if np.ndim(lk) == 0 and np.ndim(lj) == 0 else out


def variance_aggregated(lambdas, d, m2):
    """Stationary variance of ``Z_m`` for a fixed coefficient vector (O(m^2) double sum)."""
    a = _rates(lambdas)
    pair = 1.0 / ((a[:, None] + a[None, :]) * a[:, None] ** (2.0 * d))
    return cd_constant(d, m2) * 2.0 * gamma_fn(2.0 * d) * pair.sum() / a.size**2


def mixture_kernel(s, lambdas=None, mix: MixingParams | None = None):
    """Empirical ``mean_k exp(lam_k s)`` or, given ``mix``, its limit ``(alpha/(alpha+s))^(1-h)``."""
    s = np.asarray(s, dtype=float)
    if lambdas is not None:
        lam = -_rates(lambdas)
        out = np.exp(np.multiply.outer(s, lam)).mean(axis=-1)
    elif mix is not None:
        out = (mix.alpha / (mix.alpha + s)) ** (1.0 - mix.h)
    else:
        raise ParameterError("give either lambdas or mixing parameters")
    return out[()] if np.ndim(out) == 0 else out


def ou_kernel(x, lam, d):
    """Kernel of ``V`` with respect to ``dL``: ``x^d E_{1,1+d}(lam x) / Gamma(d+1)``-type closed form."""
    x = np.asarray(x, dtype=float)
    return x**d / gamma_fn(d + 1.0) * hyp1f1(1.0, 1.0 + d, lam * x)


def _mixture_ou_kernel(lam, d):
    """Callable ``K(t, x)`` averaging ``ou_kernel`` over ``lam``; spline in log-log for large work."""
    lam = np.asarray(lam, dtype=float)

    def direct(z):
        out = np.zeros_like(z)
        for chunk in np.array_split(lam, max(1, lam.size // 64)):
            out += ou_kernel(z[..., None], chunk, d).sum(axis=-1)
        return out / lam.size

    cache = {}

    def kernel(t, x):
        z = t + x
        if z.size * lam.size <= 400_000:
            return direct(z)
        if "spline" not in cache:
            lo, hi = np.log(x.min()) - 0.1, np.log(z.max()) + 2.0
            grid = np.linspace(lo, hi, int((hi - lo) * 40) + 8)
            cache["spline"] = CubicSpline(grid, np.log(direct(np.exp(grid))))
        return np.exp(cache["spline"](np.log(z)))

    return kernel


def flou_functional(grid: SampleGrid, lam, d, indices=None, layout=None, name="flou") -> Functional:
    """Noise weights of ``(1/m) sum_k V_k`` at grid indices (``m = 1`` for a fixed rate)."""
    _check_d(d)
    lam = -_rates(lam)
    layout = layout or NoiseLayout(grid)
    idx = np.arange(grid.steps + 1) if indices is None else np.atleast_1d(indices)
    N = layout.n_uniform
    q = np.arange(N + grid.steps + 1) / grid.n
    w = np.zeros_like(q)
    for chunk in np.array_split(lam, max(1, lam.size // 64)):
        w += np.exp(np.multiply.outer(q, chunk)).sum(axis=1)
    w /= lam.size
    w[0] = 0.0
    k = np.rint(layout.uniform_left * grid.n).astype(int)
    lag = idx[:, None] - k[None, :]
    W = np.where(lag > 0, w[np.clip(lag, 0, None)], 0.0)
    return functional_from_cell_weights(name, grid, d, idx, W, _mixture_ou_kernel(lam, d), layout)


def default_warmup(lam) -> float:
    """``max(20, 12/|lam|)`` using the slowest rate, capped at ``WARMUP_CAP`` time units."""
    slowest = float(_rates(lam).min())
    M = max(20.0, 12.0 / slowest)
    if M > WARMUP_CAP:
        log.warning("warm-up %.3g for slowest rate %.3g capped at %g; the far tail covers the rest",
                    M, slowest, WARMUP_CAP)
        M = WARMUP_CAP
    return M


def _warm_grid(grid: SampleGrid, lam, warmup_M) -> SampleGrid:
    M = default_warmup(lam) if warmup_M is None else float(warmup_M)
    if not M > 0:
        raise ParameterError("warm-up length must be positive")
    return SampleGrid(grid.n, grid.horizon, int(math.ceil(M * grid.n)), grid.far_horizon, grid.far_ratio)


def simulate_flou_fixed(lam: float, d: float, spec: LevySpec, grid: SampleGrid, seed: int,
                        replicas: int = 1, warmup_M: float | None = None, threads: int = 1,
                        first_stream: int = 0) -> PathEnsemble:
    """Stationary fLOU paths with a fixed rate ``lam < 0``.

    ``warmup_M`` is the length of finely resolved history (``a_n = ceil(M n)``).
    """
    _rates(lam)
    g = _warm_grid(grid, lam, warmup_M)
    layout = NoiseLayout(g)
    f = flou_functional(g, lam, d, layout=layout)
    (values,) = simulate(spec, g, [f], seed, replicas, threads, first_stream, layout)
    return PathEnsemble(values, f.times, g, seed, first_stream,
                        {"process": "flou", "lambda": float(lam), "d": d, "levy": spec.to_dict()})


def simulate_aggregated(lambdas: LambdaSample, d: float, spec: LevySpec, grid: SampleGrid, seed: int,
                        replicas: int = 1, warmup_M: float | None = None, threads: int = 1,
                        first_stream: int = 0) -> tuple[PathEnsemble, LambdaSample]:
    """Paths of ``Z_m`` for a fixed coefficient vector; all coordinates share one ``L^d``."""
    g = _warm_grid(grid, lambdas, warmup_M)
    layout = NoiseLayout(g)
    f = flou_functional(g, lambdas, d, layout=layout, name="Zm")
    (values,) = simulate(spec, g, [f], seed, replicas, threads, first_stream, layout)
    params = {"process": "Zm", "m": lambdas.m, "h": lambdas.h, "alpha": lambdas.alpha, "d": d,
              "levy": spec.to_dict()}
    return PathEnsemble(values, f.times, g, seed, first_stream, params), lambdas
