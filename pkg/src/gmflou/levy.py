"""Zero-mean driving Lévy noise: increments, cumulant function and second moment.

Two families are supported, both without Gaussian part:

* :class:`CompensatedGamma` -- a Gamma subordinator minus its mean.  The
  parameterisation is **(shape a per unit time, rate b)**, so that the
  increment over a cell of length ``dt`` is ``Gamma(shape=a*dt, rate=b) - a*dt/b``.
  Figure parameters quoted as ``a=5, b=15`` are read in this convention.
* :class:`CompoundPoisson` -- compound Poisson jumps, compensated exactly by
  ``rate * E[J] * dt``.

Random streams are addressed by :class:`SeedLineage`; a replica is identified by
its ``stream_index`` so results do not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from .errors import ParameterError

__all__ = [
    "SeedLineage",
    "LevySpec",
    "CompensatedGamma",
    "CompoundPoisson",
    "NormalJumps",
    "ExponentialJumps",
    "sample_increments",
    "cumulant_psi",
    "second_moment",
    "levy_from_dict",
]

# spawn-key namespaces, so that noise and mixing coefficients never share a stream
NOISE_DOMAIN = 0
LAMBDA_DOMAIN = 1


@dataclass(frozen=True)
class SeedLineage:
    """Root seed plus the index of an independent substream."""

    root_seed: int
    stream_index: int = 0
    domain: int = NOISE_DOMAIN

    def __post_init__(self):
        if not 0 <= int(self.root_seed) < 2**64:
            raise ParameterError("root_seed must be an unsigned 64-bit integer")
        if self.stream_index < 0:
            raise ParameterError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.root_seed),
                                    spawn_key=(int(self.domain), int(self.stream_index)))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_index: int) -> "SeedLineage":
        return SeedLineage(self.root_seed, stream_index, self.domain)


def _positive(name, value):
    if not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be positive and finite, got {value!r}")


class LevySpec:
    """Common interface of the driving noise families."""

    kind: ClassVar[str] = ""

    @property
    def m2(self) -> float:
        """E[L(1)^2]."""
        raise NotImplementedError

    def psi(self, u):
        """Lévy–Khintchine exponent, ``E exp(iuL(1)) = exp(psi(u))``."""
        raise NotImplementedError

    def draw(self, rng: np.random.Generator, widths: np.ndarray) -> np.ndarray:
        """Independent increments over consecutive cells of the given widths."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class CompensatedGamma(LevySpec):
    a: float
    b: float
    kind: ClassVar[str] = "CompensatedGamma"

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)

    @property
    def m2(self) -> float:
        return self.a / self.b**2

    def psi(self, u):
        u = np.asarray(u, dtype=float)
        x = u / self.b
        # -a log(1 - i u/b) - i u a/b, split to avoid cancellation near u = 0
        real = -0.5 * self.a * np.log1p(x * x)
        imag = self.a * (np.arctan(x) - x)
        return real + 1j * imag

    def draw(self, rng, widths):
        widths = np.asarray(widths, dtype=float)
        shape = self.a * widths
        return rng.gamma(shape, 1.0 / self.b) - shape / self.b

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class NormalJumps:
    mean: float = 0.0
    sd: float = 1.0
    kind: ClassVar[str] = "Normal"

    def __post_init__(self):
        if not np.isfinite(self.mean):
            raise ParameterError("jump mean must be finite")
        _positive("jump sd", self.sd)

    @property
    def first(self):
        return self.mean

    @property
    def second(self):
        return self.mean**2 + self.sd**2

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.mean - 0.5 * (self.sd * u) ** 2)

    def sum_of(self, rng, counts):
        return counts * self.mean + np.sqrt(counts) * self.sd * rng.standard_normal(counts.shape)

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class ExponentialJumps:
    rate: float = 1.0
    kind: ClassVar[str] = "Exponential"

    def __post_init__(self):
        _positive("jump rate", self.rate)

    @property
    def first(self):
        return 1.0 / self.rate

    @property
    def second(self):
        return 2.0 / self.rate**2

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        return self.rate / (self.rate - 1j * u)

    def sum_of(self, rng, counts):
        # a sum of k Exp(rate) variables is Gamma(k, rate); shape 0 gives 0
        return rng.gamma(counts.astype(float), 1.0 / self.rate)

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class CompoundPoisson(LevySpec):
    rate: float
    jumps: NormalJumps | ExponentialJumps = NormalJumps()
    kind: ClassVar[str] = "CompoundPoissonCompensated"

    def __post_init__(self):
        _positive("rate", self.rate)

    @property
    def m2(self) -> float:
        return self.rate * self.jumps.second

    def psi(self, u):
        u = np.asarray(u, dtype=float)
        return self.rate * (self.jumps.cf(u) - 1.0 - 1j * u * self.jumps.first)

    def draw(self, rng, widths):
        widths = np.asarray(widths, dtype=float)
        counts = rng.poisson(self.rate * widths)
        return self.jumps.sum_of(rng, counts) - self.rate * self.jumps.first * widths

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate, "jump_dist": self.jumps.to_dict()}


def levy_from_dict(cfg: dict[str, Any]) -> LevySpec:
    """Inverse of ``LevySpec.to_dict`` (keys ``kind, a, b, rate, jump_dist``)."""
    kind = cfg.get("kind", "CompensatedGamma")
    if kind in ("CompensatedGamma", "gamma"):
        return CompensatedGamma(float(cfg["a"]), float(cfg["b"]))
    if kind in ("CompoundPoissonCompensated", "compound_poisson"):
        jd = dict(cfg.get("jump_dist", {"kind": "Normal"}))
        jkind = jd.pop("kind", "Normal")
        if jkind == "Normal":
            jumps = NormalJumps(float(jd.get("mean", 0.0)), float(jd.get("sd", 1.0)))
        elif jkind == "Exponential":
            jumps = ExponentialJumps(float(jd.get("rate", 1.0)))
        else:
            raise ParameterError(f"unknown jump distribution {jkind!r}")
        return CompoundPoisson(float(cfg["rate"]), jumps)
    raise ParameterError(f"unknown Lévy kind {kind!r}")


def sample_increments(spec: LevySpec, lineage: SeedLineage, n: int, dt: float) -> np.ndarray:
    """``n`` increments ``L((k+1)dt) - L(k dt)`` from the stream of ``lineage``."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    _positive("dt", dt)
    return spec.draw(lineage.generator(), np.full(int(n), float(dt)))


def cumulant_psi(spec: LevySpec, u):
    return spec.psi(u)


def second_moment(spec: LevySpec) -> float:
    return spec.m2
