"""Monte Carlo estimators and the pass/fail bookkeeping of the verification suite.

All estimators reduce across replicas (axis 0) and are invariant under
reordering of the replicas.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .ensemble import PathEnsemble
from .errors import CouplingError, FitError, ParameterError, StatisticsError

__all__ = [
    "MIN_REPLICAS",
    "MomentReport",
    "ConvergenceTable",
    "ensemble_moment",
    "second_moment_estimate",
    "covariance_estimate",
    "empirical_autocovariance",
    "fit_tail_exponent",
    "empirical_char_function",
    "coupled_l2_error",
    "increment_bound_check",
    "discretization_allowance",
]

MIN_REPLICAS = 30


@dataclass
class MomentReport:
    """One closed-form check.  Passes iff ``|estimate - target| <= k*stderr + allowance*|target|``."""

    quantity: str
    mc_estimate: float
    stderr: float
    target: float
    params: dict[str, Any] = field(default_factory=dict)
    k_sigma: float = 4.0
    allowance: float = 0.05

    @property
    def tolerance(self) -> float:
        return self.k_sigma * self.stderr + self.allowance * abs(self.target)

    @property
    def passed(self) -> bool:
        return bool(abs(self.mc_estimate - self.target) <= self.tolerance)

    def to_record(self) -> dict[str, Any]:
        rec = asdict(self)
        rec.update(tolerance=self.tolerance, **{"pass": self.passed})
        return rec

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} {self.quantity}: estimate={self.mc_estimate:.6g} "
                f"target={self.target:.6g} tol={self.tolerance:.3g}")


@dataclass
class ConvergenceTable:
    """Residuals along an axis; ``monotone`` iff strictly decreasing in the given order."""

    axis_name: str
    axis: list[float]
    residuals: list[float]
    stderrs: list[float] = field(default_factory=list)
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.axis) != len(self.residuals):
            raise ValueError("axis and residuals differ in length")
        if any(r < 0 for r in self.residuals):
            raise ValueError("residuals must be non-negative")

    @property
    def monotone(self) -> bool:
        r = self.residuals
        return all(b < a for a, b in zip(r, r[1:]))

    def to_record(self) -> dict[str, Any]:
        rec = asdict(self)
        rec["monotone"] = self.monotone
        return rec


def discretization_allowance(n: int, base: float = 0.05, n_ref: int = 128) -> float:
    """Relative bias allowance: ``base`` at ``n_ref`` points per unit time, halving per doubling of ``n``."""
    return base * n_ref / n


def _values(ens):
    return ens.values if isinstance(ens, PathEnsemble) else np.asarray(ens, dtype=float)


def _need(R, minimum=MIN_REPLICAS):
    if R < minimum:
        raise StatisticsError(f"need at least {minimum} replicas, got {R}")


def second_moment_estimate(x) -> tuple[float, float]:
    """Mean of ``x**2`` with its plain standard error."""
    x = np.asarray(x, dtype=float)
    _need(x.size)
    sq = x * x
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(x.size))


def covariance_estimate(x, y) -> tuple[float, float]:
    """Centred cross-replica covariance and a delta-method standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _need(x.size)
    prod = (x - x.mean()) * (y - y.mean())
    return float(prod.sum() / (x.size - 1)), float(prod.std(ddof=1) / math.sqrt(x.size))


def ensemble_moment(ens, t_index: int, order: int) -> tuple[float, float]:
    """Sample mean (``order=1``) or raw second moment (``order=2``) at one time."""
    col = _values(ens)[:, t_index]
    _need(col.size)
    if order == 1:
        return float(col.mean()), float(col.std(ddof=1) / math.sqrt(col.size))
    if order == 2:
        return second_moment_estimate(col)
    raise ParameterError("order must be 1 or 2")


def empirical_autocovariance(ens, lag_indices, base_indices=None) -> tuple[np.ndarray, np.ndarray]:
    """Cross-replica ``Cov(X(b), X(b + lag))``, averaged over base indices.

    Returns ``(cov, stderr)``.  The standard error pools the per-replica products
    averaged over bases, so it accounts for their dependence.
    """
    v = _values(ens)
    _need(v.shape[0])
    lags = np.atleast_1d(lag_indices).astype(int)
    bases = np.array([0]) if base_indices is None else np.atleast_1d(base_indices).astype(int)
    if np.any(lags < 0) or bases.max() + lags.max() >= v.shape[1] or bases.min() < 0:
        raise IndexError("lag beyond the end of the grid")
    c = v - v.mean(axis=0)
    cov, err = np.empty(lags.size), np.empty(lags.size)
    R = v.shape[0]
    for i, lag in enumerate(lags):
        per_rep = (c[:, bases] * c[:, bases + lag]).mean(axis=1)
        cov[i] = per_rep.sum() / (R - 1)
        err[i] = per_rep.std(ddof=1) / math.sqrt(R)
    return cov, err


def fit_tail_exponent(lags, cov) -> tuple[float, float, float]:
    """Least-squares line through ``(log lag, log cov)``: ``(slope, intercept, r2)``."""
    lags = np.asarray(lags, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if lags.size < 2 or lags.size != cov.size:
        raise FitError("need at least two (lag, covariance) pairs")
    if np.any(cov <= 0) or np.any(lags <= 0):
        bad = np.flatnonzero((cov <= 0) | (lags <= 0)).tolist()
        raise FitError(f"non-positive entries at positions {bad}; log-log fit impossible")
    x, y = np.log(lags), np.log(cov)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / sst if sst > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def empirical_char_function(values, thetas) -> tuple[np.ndarray, np.ndarray]:
    """``mean_r exp(i sum_j theta_j x_j^(r))`` per theta vector, with complex standard errors.

    ``values`` is ``R x J`` (J fixed times); ``thetas`` is ``K x J`` (or length-K for J=1).
    The standard error is ``se(cos) + i se(sin)``.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    th = np.asarray(thetas, dtype=float)
    if th.ndim == 0:
        th = th[None, None]
    elif th.ndim == 1:
        th = th[:, None] if v.shape[1] == 1 else th[None, :]
    phase = v @ th.T
    R = v.shape[0]
    cos, sin = np.cos(phase), np.sin(phase)
    est = cos.mean(axis=0) + 1j * sin.mean(axis=0)
    if R > 1:
        err = (cos.std(axis=0, ddof=1) + 1j * sin.std(axis=0, ddof=1)) / math.sqrt(R)
    else:
        err = np.zeros(th.shape[0], dtype=complex)
    return est, err


def coupled_l2_error(ens_a, ens_b, t_index: int) -> tuple[float, float]:
    """``E[(A(t) - B(t))^2]`` for two ensembles driven by the same noise."""
    if isinstance(ens_a, PathEnsemble) and isinstance(ens_b, PathEnsemble):
        if not ens_a.same_noise(ens_b):
            raise CouplingError("ensembles were not generated from the same noise lineage/grid")
    a, b = _values(ens_a), _values(ens_b)
    if a.shape != b.shape:
        raise CouplingError("ensembles have different shapes")
    return second_moment_estimate(a[:, t_index] - b[:, t_index])


def increment_bound_check(ens, d: float, times: Sequence[float] | None = None,
                          levels: Sequence[int] | None = None) -> tuple[float, dict[int, float]]:
    """Largest ``E[(X(t)-X(s))^2] / (t-s)^(1+2d)`` over dyadic pairs of ``[0, 1]``.

    Pairs ``(k 2^-l, (k+1) 2^-l)`` on one level share their length, and the
    process has stationary increments, so the expectation on a level is
    estimated from all its pairs pooled.  Returns the maximum and the per-level
    ratios.
    """
    v = _values(ens)
    t = np.asarray(ens.times if times is None else times, dtype=float)
    _need(v.shape[0])
    n = int(round(1.0 / (t[1] - t[0])))
    top = int(round(math.log2(n)))
    if 2**top != n:
        raise ParameterError("dyadic check needs a grid with 2^k points per unit time")
    levels = range(0, top + 1) if levels is None else levels
    ratios = {}
    for lev in levels:
        step = n >> lev
        idx = np.arange(0, n + 1, step)
        inc = v[:, idx[1:]] - v[:, idx[:-1]]
        ratios[int(lev)] = float(np.mean(inc**2) / (step / n) ** (1.0 + 2.0 * d))
    return max(ratios.values()), ratios
