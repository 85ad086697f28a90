"""The limit process of the aggregated fLOU model and its two degenerate limits.

``Z(t) = int_{-inf}^t g(t-u) dL^d(u)`` with ``g(x) = (alpha/(alpha+x))^(1-h)``,
the Laplace transform of the Gamma mixing law.  Its kernel with respect to
``dL`` is the Riemann–Liouville composition

    K(x) = (1/Gamma(d)) int_0^x g(y) (x-y)^(d-1) dy
         = x^d / Gamma(d+1) * 2F1(1-h, 1; 1+d; -x/alpha),

so ``Z(t) = int K(t-s) dL(s)``.  As ``alpha -> inf``, ``Z(t) - Z(0)`` tends to
``L^d(t)``; as ``alpha -> 0``, ``alpha^(h-1) int_0^t Z`` tends to

    Y(t) = int_{-inf}^t m_t(u) dL^d(u),   m_t(u) = ((t-u)_+^h - (-u)_+^h) / h.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn, gamma as gamma_fn, hyp2f1

from .ensemble import PathEnsemble
from .errors import DomainError, ParameterError, QuadratureError
from .flp import _check_d, cd_constant, flp_functional, vd_squared
from .flou import LambdaSample, MixingParams, _warm_grid, flou_functional, sample_lambda
from .levy import LevySpec, SeedLineage
from .scheme import Functional, NoiseLayout, SampleGrid, functional_from_cell_weights, simulate
from .stats import ConvergenceTable, second_moment_estimate

__all__ = [
    "GmflouParams",
    "kernel_g",
    "rl_kernel",
    "f_tilde",
    "variance_Z",
    "covariance_Z",
    "covariance_Z_kernel",
    "variance_Y",
    "tail_exponent",
    "char_function_Z",
    "z_functional",
    "z_integral_functional",
    "y_functional",
    "simulate_Z",
    "simulate_Y",
    "limit_residual_alpha_inf",
    "limit_residual_alpha_zero",
    "aggregation_residual",
]


@dataclass(frozen=True)
class GmflouParams:
    d: float
    h: float
    alpha: float
    spec: LevySpec

    def __post_init__(self):
        _check_d(self.d)
        if not 0.0 < self.h < 1.0:
            raise ParameterError(f"h must lie in (0, 1), got {self.h!r}")
        if not self.alpha > 0.0:
            raise ParameterError(f"alpha must be positive, got {self.alpha!r}")
        if not self.h + self.d < 0.5:
            raise DomainError(
                f"h + d = {self.h + self.d:.6g} >= 1/2: the limit process is not square integrable")

    @property
    def m2(self):
        return self.spec.m2

    def to_dict(self):
        return {"d": self.d, "h": self.h, "alpha": self.alpha, "levy": self.spec.to_dict()}


def kernel_g(x, alpha, h):
    x = np.asarray(x, dtype=float)
    return (alpha / (alpha + x)) ** (1.0 - h)


def rl_kernel(x, alpha, h, d, scale=1.0):
    """Closed form of ``K`` (zero for ``x <= 0``); ``scale`` multiplies ``g``."""
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    out = scale * xp**d / gamma_fn(d + 1.0) * hyp2f1(1.0 - h, 1.0, 1.0 + d, -xp / alpha)
    out = np.where(x > 0, out, 0.0)
    return out[()] if out.ndim == 0 else out


def variance_Z(alpha, h, d, m2):
    """``2 C_d alpha^(2d+1) B(1-h-2d, 2d) / (1 - 2(h+d))``."""
    if not h + d < 0.5:
        raise DomainError("variance of Z is infinite for h + d >= 1/2")
    return (2.0 * cd_constant(d, m2) * alpha ** (2.0 * d + 1.0)
            * beta_fn(1.0 - h - 2.0 * d, 2.0 * d) / (1.0 - 2.0 * (h + d)))


def variance_Y(t, h, d, m2):
    """``Var Y(t) = 2 Gamma(h)^2 V_{h+d}^2 |t|^(2h+2d+1)``.

    The kernel of ``Y`` with respect to ``dL`` is ``Gamma(h)`` times the fLp
    kernel with memory ``h + d``, whence the fLp variance formula.
    """
    if not h + d < 0.5:
        raise DomainError("Y needs h + d < 1/2")
    return 2.0 * gamma_fn(h) ** 2 * vd_squared(h + d, m2) * np.abs(t) ** (2.0 * (h + d) + 1.0)


def tail_exponent(h, d):
    """Power of the covariance decay ``rho(t) ~ t^(2h+2d-1)``."""
    return 2.0 * h + 2.0 * d - 1.0


# Outer integrals stop at FAR_CUT * max(1, alpha, t) and add a power-law tail.
# The kernel approaches its power law with relative corrections ~ x^(-h), so the
# cut has to be far out for the tail formula to be accurate.
FAR_CUT = 1e16


def _quad(f, a, b, what, epsabs=0.0, epsrel=1e-10, limit=200, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, **kw)
        except integrate.IntegrationWarning as exc:
            val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, **kw)
            if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300) + epsabs:
                raise QuadratureError(f"{what}: {exc}", {"interval": (a, b), "value": val,
                                                         "abserr": err}) from None
    if not np.isfinite(val):
        raise QuadratureError(f"{what}: non-finite value", {"interval": (a, b)})
    return val, err


def _log_tail(f, z0, z1, rate, what):
    """``int_{z0}^inf f`` where ``f(z) ~ f(z1) exp(-rate (z - z1))`` beyond ``z1``."""
    body, _ = _quad(f, z0, z1, what)
    return body + f(z1) / rate


def _f_tilde_scalar(x, alpha, h, d):
    # K(x) Gamma(d) = int_0^x g(y) (x-y)^(d-1) dy, split at x/2.
    #   [0, x/2]: y = alpha (e^z - 1) absorbs the scale of g near 0
    #   [x/2, x]: x - y = w^(1/d) removes the endpoint singularity
    if x <= 0.0:
        return 0.0
    half = 0.5 * x
    zmax = math.log1p(half / alpha)

    def near(z):
        y = alpha * math.expm1(z)
        return alpha * math.exp(z * h) * (x - y) ** (d - 1.0)

    def far(w):
        return kernel_g(x - w ** (1.0 / d), alpha, h) / d

    a, _ = _quad(near, 0.0, zmax, "kernel quadrature (near part)")
    b, _ = _quad(far, 0.0, half**d, "kernel quadrature (singular part)")
    return (a + b) / gamma_fn(d)


def f_tilde(x, alpha, h, d, normalization="gamma"):
    """``K`` by quadrature.

    ``normalization="gamma"`` uses ``1/Gamma(d)`` in front of the Riemann–Liouville
    integral (the kernel of ``Z`` with respect to ``dL``).  ``normalization="d"``
    uses the bare factor ``d`` instead, i.e. returns ``Gamma(d+1)`` times that.
    """
    if normalization not in ("gamma", "d"):
        raise ParameterError("normalization must be 'gamma' or 'd'")
    factor = 1.0 if normalization == "gamma" else gamma_fn(d + 1.0)
    x = np.asarray(x, dtype=float)
    out = np.vectorize(lambda v: _f_tilde_scalar(float(v), alpha, h, d))(x) * factor
    return out[()] if out.ndim == 0 else out


def _inner_I(c, alpha, h, d):
    """``int_0^inf g(x) |c - x|^(2d-1) dx`` for ``c >= 0``."""
    q = 2.0 * d
    if c <= 0.0:
        # x^(2d-1) g(x): x = w^(1/(2d)) on [0, 1], then log scale
        a, _ = _quad(lambda w: kernel_g(w ** (1.0 / q), alpha, h) / q, 0.0, 1.0, "I(0) head")
        f = lambda z: math.exp(q * z) * kernel_g(math.exp(z), alpha, h)
        return a + _log_tail(f, 0.0, math.log(1e8 * max(1.0, alpha)), 1.0 - h - q, "I(0) tail")
    half = 0.5 * c
    zmax = math.log1p(half / alpha)

    def p1(z):
        y = alpha * math.expm1(z)
        return alpha * math.exp(z * h) * (c - y) ** (q - 1.0)

    p2 = lambda w: kernel_g(c - w ** (1.0 / q), alpha, h) / q
    p3 = lambda w: kernel_g(c + w ** (1.0 / q), alpha, h) / q

    def p4(z):
        x = 2.0 * c * math.exp(z)
        return x * kernel_g(x, alpha, h) * (x - c) ** (q - 1.0)

    z_hi = math.log(1e8) + max(0.0, math.log(max(1.0, alpha) / c))
    parts = (_quad(p1, 0.0, zmax, "I near")[0], _quad(p2, 0.0, half**q, "I left")[0],
             _quad(p3, 0.0, c**q, "I right")[0], _log_tail(p4, 0.0, z_hi, 1.0 - h - q, "I tail"))
    return sum(parts)


def covariance_Z(t, params: GmflouParams, z_lo=-40.0):
    """``rho(t) = C_d int_0^inf int_0^inf g(x) g(y) |t+y-x|^(2d-1) dx dy`` by nested quadrature.

    The outer integral runs over ``y = e^z``; beyond ``z_hi`` the integrand is a
    pure power of ``y`` and is added in closed form.
    """
    t = abs(float(t))
    a, h, d = params.alpha, params.h, params.d
    p = tail_exponent(h, d)
    z_hi = math.log(FAR_CUT * max(1.0, a, t))

    def outer(z):
        y = math.exp(z)
        return y * kernel_g(y, a, h) * _inner_I(t + y, a, h, d)

    body, err = _quad(outer, z_lo, z_hi, "covariance outer integral", epsrel=1e-9)
    tail = outer(z_hi) / (-p)
    return cd_constant(d, params.m2) * (body + tail)


def covariance_Z_kernel(t, params: GmflouParams):
    """``m2 int_0^inf K(x) K(x+t) dx`` from the closed-form kernel (independent route)."""
    t = abs(float(t))
    a, h, d = params.alpha, params.h, params.d
    K = lambda x: float(rl_kernel(x, a, h, d))
    z_hi = math.log(FAR_CUT * max(1.0, a, t))
    f = lambda z: math.exp(z) * K(math.exp(z)) * K(math.exp(z) + t)
    body, _ = _quad(f, -60.0, z_hi, "kernel covariance", epsrel=1e-10)
    tail = f(z_hi) / (-tail_exponent(h, d))
    return params.m2 * (body + tail)


def char_function_Z(thetas, times, params: GmflouParams, normalization="gamma", method="quadrature"):
    """``E exp(i sum_j theta_j Z(t_j)) = exp(int psi(sum_j theta_j K(t_j - s)) ds)``.

    ``thetas`` has shape ``(J,)`` or ``(K, J)``; returns one complex value per row.
    ``method="quadrature"`` computes ``K`` by nested quadrature, ``"closed"`` by the
    hypergeometric form.  The outer integral is split where a new time becomes
    active and uses a logarithmic substitution on every piece.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    th = np.asarray(thetas, dtype=float)
    th = th[None, :] if th.ndim == 1 else th
    if th.ndim == 0 or th.shape[1] != times.size:
        raise ParameterError("thetas must have one column per time")
    a, h, d = params.alpha, params.h, params.d
    if method == "closed":
        factor = 1.0 if normalization == "gamma" else gamma_fn(d + 1.0)
        kern = lambda x: factor * float(rl_kernel(x, a, h, d))
    elif method == "quadrature":
        kern = lru_cache(maxsize=None)(lambda x: float(f_tilde(x, a, h, d, normalization)))
    else:
        raise ParameterError("method must be 'quadrature' or 'closed'")
    psi = params.spec.psi
    tmax = times.max()
    starts = np.unique(tmax - times)
    ends = np.append(starts[1:], np.inf)
    p = tail_exponent(h, d)
    out = np.empty(th.shape[0], dtype=complex)
    for r, theta in enumerate(th):
        def arg(x):
            lag = x - (tmax - times)
            return sum(th_j * kern(l) for th_j, l in zip(theta, lag) if l > 0)

        total = 0.0 + 0.0j
        for lo, hi in zip(starts, ends):
            span_hi = math.log(hi - lo) if np.isfinite(hi) else math.log(FAR_CUT * max(1.0, a, tmax))
            f = lambda z: math.exp(z) * complex(psi(arg(lo + math.exp(z))))
            re, _ = _quad(lambda z: f(z).real, -40.0, span_hi, "characteristic function (real)",
                          epsabs=1e-12, epsrel=1e-8)
            im, _ = _quad(lambda z: f(z).imag, -40.0, span_hi, "characteristic function (imag)",
                          epsabs=1e-12, epsrel=1e-8)
            total += re + 1j * im
            if not np.isfinite(hi):
                total += f(span_hi) / (-p)
        out[r] = np.exp(total)
    return out


def z_functional(grid: SampleGrid, alpha, h, d, indices=None, layout=None, scale=1.0, name="Z") -> Functional:
    """Noise weights of ``scale * Z`` at grid indices.

    Left-point sum of ``g(t_i - u_k)`` against fLp increments over the uniform
    cells; closed-form kernel on the far cells.  ``scale * g`` is evaluated as
    ``scale * alpha^(1-h) (alpha + x)^(h-1)`` so that ``scale = alpha^(h-1)`` stays
    finite for tiny ``alpha``.
    """
    _check_d(d)
    layout = layout or NoiseLayout(grid)
    idx = np.arange(grid.steps + 1) if indices is None else np.atleast_1d(indices)
    N = layout.n_uniform
    q = np.arange(N + grid.steps + 1) / grid.n
    log_pref = math.log(scale) + (1.0 - h) * math.log(alpha)
    w = np.exp(log_pref + (h - 1.0) * np.log(alpha + q))
    w[0] = 0.0
    k = np.rint(layout.uniform_left * grid.n).astype(int)
    lag = idx[:, None] - k[None, :]
    W = np.where(lag > 0, w[np.clip(lag, 0, None)], 0.0)
    far = lambda t, x: rl_kernel(t + x, alpha, h, d, scale)
    return functional_from_cell_weights(name, grid, d, idx, W, far, layout)


def z_integral_functional(grid: SampleGrid, alpha, h, d, t_indices, layout=None) -> Functional:
    """``alpha^(h-1) int_0^t Z(s) ds`` by the trapezoidal rule on the grid, one row per ``t``."""
    layout = layout or NoiseLayout(grid)
    t_indices = np.atleast_1d(t_indices)
    top = int(t_indices.max())
    Zs = z_functional(grid, alpha, h, d, np.arange(top + 1), layout, scale=alpha ** (h - 1.0),
                      name="Zscaled")
    rows_u, rows_f = [], []
    for i in t_indices:
        c = np.zeros(top + 1)
        if i > 0:
            c[: i + 1] = grid.dt
            c[0] = c[i] = 0.5 * grid.dt
        one = Zs.combine(c, i / grid.n)
        rows_u.append(one.uniform[0])
        rows_f.append(one.far[0])
    return Functional("Ztilde", t_indices / grid.n, np.array(rows_u), np.array(rows_f))


def _y_far_kernel(h, d):
    c = gamma_fn(h) / gamma_fn(h + d + 1.0)
    e = h + d
    return lambda t, x: c * ((t + x) ** e - x**e)


def y_functional(grid: SampleGrid, h, d, indices=None, layout=None, name="Y") -> Functional:
    """Noise weights of ``Y``: left-point sum of ``m_t(u_k)`` against fLp increments."""
    _check_d(d)
    if not 0.0 < h < 1.0:
        raise ParameterError("h must lie in (0, 1)")
    layout = layout or NoiseLayout(grid)
    idx = np.arange(grid.steps + 1) if indices is None else np.atleast_1d(indices)
    u = layout.uniform_left
    t = idx / grid.n
    W = (np.maximum(t[:, None] - u[None, :], 0.0) ** h - np.maximum(-u[None, :], 0.0) ** h) / h
    W[u[None, :] >= t[:, None]] = 0.0
    return functional_from_cell_weights(name, grid, d, idx, W, _y_far_kernel(h, d), layout)


def simulate_Z(params: GmflouParams, grid: SampleGrid, seed: int, replicas: int = 1,
               threads: int = 1, first_stream: int = 0) -> PathEnsemble:
    layout = NoiseLayout(grid)
    f = z_functional(grid, params.alpha, params.h, params.d, layout=layout)
    (values,) = simulate(params.spec, grid, [f], seed, replicas, threads, first_stream, layout)
    return PathEnsemble(values, f.times, grid, seed, first_stream, {"process": "Z", **params.to_dict()})


def simulate_Y(d: float, h: float, spec: LevySpec, grid: SampleGrid, seed: int, replicas: int = 1,
               threads: int = 1, first_stream: int = 0) -> PathEnsemble:
    if not h + d < 0.5:
        raise DomainError("h + d must be < 1/2")
    layout = NoiseLayout(grid)
    f = y_functional(grid, h, d, layout=layout)
    (values,) = simulate(spec, grid, [f], seed, replicas, threads, first_stream, layout)
    return PathEnsemble(values, f.times, grid, seed, first_stream,
                        {"process": "Y", "d": d, "h": h, "levy": spec.to_dict()})


def _alpha_inf_functional(grid, alpha, h, d, i_t, layout):
    Zf = z_functional(grid, alpha, h, d, [0, i_t], layout)
    L = flp_functional(grid, d, [i_t], layout)
    return Functional(f"alpha={alpha:g}", L.times, Zf.uniform[1:] - Zf.uniform[:1] - L.uniform,
                      Zf.far[1:] - Zf.far[:1] - L.far)


def _alpha_zero_functional(grid, alpha, h, d, i_t, layout):
    Zt = z_integral_functional(grid, alpha, h, d, [i_t], layout)
    Y = y_functional(grid, h, d, [i_t], layout)
    return (Zt - Y).scaled(1.0, f"alpha={alpha:g}")


def _residual_table(builder, axis_name, alphas, t, d, h, spec, grid, seed, replicas, threads):
    for a in alphas:
        GmflouParams(d, h, a, spec)
    layout = NoiseLayout(grid)
    (i_t,) = grid.index_of(t)
    fs = [builder(grid, a, h, d, int(i_t), layout) for a in alphas]
    vals = simulate(spec, grid, fs, seed, replicas, threads, 0, layout)
    est = [second_moment_estimate(v[:, 0]) for v in vals]
    return ConvergenceTable(axis_name, [float(a) for a in alphas], [e[0] for e in est],
                            [e[1] for e in est],
                            {"t": t, "d": d, "h": h, "n": grid.n, "replicas": replicas, "seed": seed})


def limit_residual_alpha_inf(alphas, t, d, h, spec: LevySpec, grid: SampleGrid, seed: int,
                             replicas: int, threads: int = 1) -> ConvergenceTable:
    """``E[(Z(t) - Z(0) - L^d(t))^2]`` for each ``alpha``, all driven by one noise."""
    return _residual_table(_alpha_inf_functional, "alpha", alphas, t, d, h, spec, grid, seed,
                           replicas, threads)


def limit_residual_alpha_zero(alphas, t, d, h, spec: LevySpec, grid: SampleGrid, seed: int,
                              replicas: int, threads: int = 1) -> ConvergenceTable:
    """``E[(alpha^(h-1) int_0^t Z - Y(t))^2]`` for each ``alpha``, all driven by one noise."""
    return _residual_table(_alpha_zero_functional, "alpha", alphas, t, d, h, spec, grid, seed,
                           replicas, threads)


def aggregation_residual(ms, t, params: GmflouParams, grid: SampleGrid, seed: int, replicas: int,
                         threads: int = 1, lambdas: LambdaSample | None = None,
                         warmup_M: float | None = None) -> tuple[ConvergenceTable, LambdaSample]:
    """``E[(Z_m(t) - Z(t))^2]`` for nested prefixes of one coefficient sample.

    The coefficients are drawn once (``max(ms)`` of them, from the lambda stream
    of ``seed``) and ``Z_m`` uses the first ``m``.  Every ``Z_m`` and ``Z`` is
    driven by the same noise, on a grid whose history covers the warm-up of the
    slowest coefficient.
    """
    ms = [int(m) for m in ms]
    if lambdas is None:
        lambdas = sample_lambda(MixingParams(params.h, params.alpha), max(ms), SeedLineage(seed))
    elif lambdas.m < max(ms):
        raise ParameterError("coefficient sample shorter than the largest m")
    g = _warm_grid(grid, lambdas.head(max(ms)), warmup_M)
    layout = NoiseLayout(g)
    (i_t,) = g.index_of(t)
    Z = z_functional(g, params.alpha, params.h, params.d, [int(i_t)], layout)
    fs = [flou_functional(g, lambdas.head(m), params.d, [int(i_t)], layout, f"m={m}") - Z for m in ms]
    vals = simulate(params.spec, g, fs, seed, replicas, threads, 0, layout)
    est = [second_moment_estimate(v[:, 0]) for v in vals]
    table = ConvergenceTable("m", [float(m) for m in ms], [e[0] for e in est], [e[1] for e in est],
                             {"t": t, **params.to_dict(), "n": grid.n, "replicas": replicas,
                              "seed": seed, "lambda_resampled": lambdas.resampled,
                              "warmup_cells": g.a_n})
    return table, lambdas
