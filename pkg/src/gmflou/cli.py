"""Command-line front end: ``gmflou {simulate,verify,converge,cf}``.

Exit codes: 0 success, 1 a verification verdict failed, 2 usage or validation
error, 3 numerical (quadrature) failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .ensemble import paths_to_gnuplot
from .errors import GmflouError, ParameterError, QuadratureError, StatisticsError
from .flou import MixingParams, sample_lambda, simulate_aggregated, simulate_flou_fixed, variance_aggregated, variance_flou
from .flp import FlpParams, flp_covariance, simulate_flp
from .levy import LevySpec, SeedLineage, levy_from_dict
from .limit import (GmflouParams, aggregation_residual, char_function_Z, limit_residual_alpha_inf,
                    limit_residual_alpha_zero, simulate_Y, simulate_Z, variance_Y, variance_Z, z_functional)
from .scheme import NoiseLayout, SampleGrid, scheme_covariance, simulate
from .stats import (MIN_REPLICAS, ConvergenceTable, MomentReport, covariance_estimate,
                    discretization_allowance, empirical_char_function, ensemble_moment)

log = logging.getLogger("gmflou")

PROCESSES = ("flp", "flou", "Zm", "Z", "Y")
AXES = ("m", "alpha_up", "alpha_down", "n")


@dataclass
class RunConfig:
    """Everything a run depends on.  File keys match the field names."""

    process: str = "Z"
    d: float = 0.2
    h: float = 0.12
    alpha: float = 1.0
    lam: float = -1.0
    m: int = 200
    levy: dict[str, Any] = field(default_factory=lambda: {"kind": "CompensatedGamma", "a": 1.0, "b": 2.0})
    n: int = 128
    horizon: float = 1.0
    trunc: int | None = None
    optimal_trunc: bool = False
    warmup: float | None = None
    replicas: int = 2000
    seed: int = 1
    threads: int = 1
    out: str = "."
    k_sigma: float = 4.0
    allowance: float = 0.05
    target_scale: float = 1.0
    gnuplot: bool = False
    thetas: list | None = None
    times: list = field(default_factory=lambda: [1.0])
    axes: list = field(default_factory=lambda: list(AXES))
    m_values: list = field(default_factory=lambda: [10, 100, 1000])
    alphas_up: list = field(default_factory=lambda: [1e2, 1e3, 1e4])
    alphas_down: list = field(default_factory=lambda: [1.0, 0.1, 0.01])
    n_values: list = field(default_factory=lambda: [32, 64, 128])

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "RunConfig":
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]  # a sidecar written by `simulate`
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParameterError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    def spec(self) -> LevySpec:
        return levy_from_dict(self.levy)

    def grid(self, horizon: float | None = None) -> SampleGrid:
        T = self.horizon if horizon is None else horizon
        if self.optimal_trunc and self.trunc is None:
            return SampleGrid.with_optimal_trunc(int(self.n), self.d, horizon=T)
        return SampleGrid(int(self.n), T, self.trunc)

    def limit_params(self) -> GmflouParams:
        return GmflouParams(self.d, self.h, self.alpha, self.spec())

    def validate(self, command: str) -> None:
        """Build every object the command needs so that bad input fails before any work."""
        if self.process not in PROCESSES:
            raise ParameterError(f"process must be one of {PROCESSES}, got {self.process!r}")
        FlpParams(self.d, self.spec())
        self.grid()
        if self.replicas < 1:
            raise ParameterError("replicas must be >= 1")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")
        if command in ("verify", "converge", "cf") or self.process in ("Z", "Y"):
            self.limit_params()
        MixingParams(self.h, self.alpha)
        if self.process == "flou" or command == "verify":
            variance_flou(self.lam, self.d, 1.0)
        if command != "simulate" and self.replicas < MIN_REPLICAS:
            raise StatisticsError(f"need at least {MIN_REPLICAS} replicas, got {self.replicas}")
        bad = [a for a in self.axes if a not in AXES]
        if bad:
            raise ParameterError(f"unknown convergence axes {bad}; choose from {AXES}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects the numbers (not ``out`` or ``threads``)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _metadata(cfg: RunConfig, **extra) -> dict[str, Any]:
    return {"config": cfg.to_dict(), "config_hash": cfg.digest(), "seed": cfg.seed,
            "version": __version__, **extra}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not JSON serialisable: {type(x)}")


def cmd_simulate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    spec, grid = cfg.spec(), cfg.grid()
    R, seed, th = cfg.replicas, cfg.seed, cfg.threads
    extra: dict[str, Any] = {}
    if cfg.process == "flp":
        ens = simulate_flp(FlpParams(cfg.d, spec), grid, seed, R, th)
    elif cfg.process == "flou":
        ens = simulate_flou_fixed(cfg.lam, cfg.d, spec, grid, seed, R, cfg.warmup, th)
    elif cfg.process == "Zm":
        lam = sample_lambda(MixingParams(cfg.h, cfg.alpha), cfg.m, SeedLineage(seed))
        ens, lam = simulate_aggregated(lam, cfg.d, spec, grid, seed, R, cfg.warmup, th)
        (out / "Zm_lambda.csv").write_text(lam.to_csv())
        extra["lambda_resampled"] = lam.resampled
    elif cfg.process == "Z":
        ens = simulate_Z(cfg.limit_params(), grid, seed, R, th)
    else:
        ens = simulate_Y(cfg.d, cfg.h, spec, grid, seed, R, th)
    stem = out / cfg.process
    ens.to_csv(stem.with_suffix(".csv"))
    if cfg.gnuplot:
        stem.with_suffix(".dat").write_text(paths_to_gnuplot(ens.times, ens.values))
    _write_json(stem.with_suffix(".json"), _metadata(cfg, grid=ens.grid.to_dict(), **extra))
    log.info("wrote %s.csv (%d replicas, %d times)", stem, ens.replicas, ens.times.size)
    return 0


def verification_battery(cfg: RunConfig) -> list[MomentReport]:
    """Closed-form second-moment checks for every process at ``t = 1``."""
    spec, grid = cfg.spec(), cfg.grid(max(1.0, cfg.horizon))
    m2, R, seed, th = spec.m2, cfg.replicas, cfg.seed, cfg.threads
    allow = discretization_allowance(grid.n, cfg.allowance)
    scale = cfg.target_scale
    i1 = int(grid.index_of(1.0)[0])
    ih = int(grid.index_of(0.5)[0])
    reports = []

    def add(quantity, est, target, params):
        reports.append(MomentReport(quantity, est[0], est[1], scale * target, params, cfg.k_sigma, allow))

    base = {"n": grid.n, "replicas": R, "seed": seed, "levy": spec.to_dict()}
    flp = simulate_flp(FlpParams(cfg.d, spec), grid, seed, R, th)
    add("Var L^d(1)", ensemble_moment(flp, i1, 2), flp_covariance(cfg.d, 1.0, 1.0, m2), {"d": cfg.d, **base})
    add("Cov(L^d(0.5), L^d(1))", covariance_estimate(flp.values[:, ih], flp.values[:, i1]),
        flp_covariance(cfg.d, 0.5, 1.0, m2), {"d": cfg.d, **base})

    ou = simulate_flou_fixed(cfg.lam, cfg.d, spec, grid, seed, R, cfg.warmup, th)
    add("Var V(1)", ensemble_moment(ou, i1, 2), variance_flou(cfg.lam, cfg.d, m2),
        {"d": cfg.d, "lambda": cfg.lam, **base})

    lam = sample_lambda(MixingParams(cfg.h, cfg.alpha), cfg.m, SeedLineage(seed))
    zm, _ = simulate_aggregated(lam, cfg.d, spec, grid, seed, R, cfg.warmup, th)
    add("Var Z_m(1)", ensemble_moment(zm, i1, 2), variance_aggregated(lam, cfg.d, m2),
        {"d": cfg.d, "h": cfg.h, "alpha": cfg.alpha, "m": cfg.m, **base})

    P = cfg.limit_params()
    z = simulate_Z(P, grid, seed, R, th)
    zp = {"d": cfg.d, "h": cfg.h, "alpha": cfg.alpha, **base}
    add("Var Z(1)", ensemble_moment(z, i1, 2), variance_Z(cfg.alpha, cfg.h, cfg.d, m2), zp)
    add("E Z(1)", ensemble_moment(z, i1, 1), 0.0, zp)

    y = simulate_Y(cfg.d, cfg.h, spec, grid, seed, R, th)
    add("Var Y(1)", ensemble_moment(y, i1, 2), variance_Y(1.0, cfg.h, cfg.d, m2),
        {"d": cfg.d, "h": cfg.h, **base})
    return reports


def cmd_verify(cfg: RunConfig) -> int:
    reports = verification_battery(cfg)
    for r in reports:
        print(r.line())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "verify.json", {**_metadata(cfg), "reports": [r.to_record() for r in reports]})
    return 0 if all(r.passed for r in reports) else 1


def variance_bias_table(cfg: RunConfig) -> ConvergenceTable:
    """Relative bias of the scheme's exact ``Var Z(1)`` for each grid density."""
    P = cfg.limit_params()
    target = variance_Z(P.alpha, P.h, P.d, P.m2)
    bias = []
    for n in cfg.n_values:
        g = SampleGrid(int(n))
        layout = NoiseLayout(g)
        f = z_functional(g, P.alpha, P.h, P.d, [g.steps], layout)
        v = scheme_covariance(P.m2, g, f, layout=layout)[0, 0]
        bias.append(abs(v - target) / target)
    return ConvergenceTable("n", [float(n) for n in cfg.n_values], bias, [0.0] * len(bias),
                            {**P.to_dict(), "quantity": "relative bias of Var Z(1)", "target": target})


def convergence_tables(cfg: RunConfig) -> list[tuple[str, ConvergenceTable, bool]]:
    spec, grid = cfg.spec(), cfg.grid(max(1.0, cfg.horizon))
    P = cfg.limit_params()
    R, seed, th = cfg.replicas, cfg.seed, cfg.threads
    out = []
    for axis in cfg.axes:
        if axis == "m":
            table, _ = aggregation_residual(cfg.m_values, 1.0, P, grid, seed, R, th, warmup_M=cfg.warmup)
            ok = table.monotone and table.residuals[-1] <= table.residuals[0] / 5.0
        elif axis == "alpha_up":
            table = limit_residual_alpha_inf(cfg.alphas_up, 1.0, P.d, P.h, spec, grid, seed, R, th)
            ok = table.monotone
        elif axis == "alpha_down":
            table = limit_residual_alpha_zero(cfg.alphas_down, 1.0, P.d, P.h, spec, grid, seed, R, th)
            ok = table.monotone
        else:
            table = variance_bias_table(cfg)
            ok = table.monotone
        out.append((axis, table, ok))
    return out


def cmd_converge(cfg: RunConfig) -> int:
    results = convergence_tables(cfg)
    records = []
    for axis, table, ok in results:
        records.append({"study": axis, **table.to_record(), "pass": ok})
        print(f"{'PASS' if ok else 'FAIL'} {axis}: {table.axis_name}={table.axis} "
              f"residuals={[float(f'{r:.4g}') for r in table.residuals]}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "converge.json", {**_metadata(cfg), "tables": records})
    return 0 if all(ok for _, _, ok in results) else 1


def cf_table(cfg: RunConfig) -> list[dict[str, Any]]:
    """Analytic against empirical characteristic function of ``Z`` at ``cfg.times``."""
    P = cfg.limit_params()
    times = sorted(float(t) for t in cfg.times)
    thetas = cfg.thetas
    if thetas is None:
        thetas = [[0.0], [0.25], [0.5], [-0.5]] if len(times) == 1 else [[0.0] * len(times), [0.3] * len(times)]
    th = np.array([np.atleast_1d(t) for t in thetas], dtype=float)
    if th.shape[1] != len(times):
        raise ParameterError("every theta needs one entry per time")
    grid = cfg.grid(max(max(times), cfg.horizon))
    layout = NoiseLayout(grid)
    idx = grid.index_of(times)
    f = z_functional(grid, P.alpha, P.h, P.d, idx, layout)
    (vals,) = simulate(P.spec, grid, [f], cfg.seed, cfg.replicas, cfg.threads, 0, layout)
    emp, se = empirical_char_function(vals, th)
    ana = char_function_Z(th, times, P)
    rows = []
    for k in range(th.shape[0]):
        diff = ana[k] - emp[k]
        ok = (abs(diff.real) <= cfg.k_sigma * se[k].real + 1e-12
              and abs(diff.imag) <= cfg.k_sigma * se[k].imag + 1e-12)
        rows.append({"theta": th[k].tolist(), "times": times,
                     "analytic": [ana[k].real, ana[k].imag], "empirical": [emp[k].real, emp[k].imag],
                     "stderr": [se[k].real, se[k].imag], "pass": bool(ok)})
    return rows


def cmd_cf(cfg: RunConfig) -> int:
    rows = cf_table(cfg)
    print("theta\tanalytic\tempirical\tstderr\tverdict")
    for r in rows:
        a, e, s = (complex(*r[k]) for k in ("analytic", "empirical", "stderr"))
        print(f"{r['theta']}\t{a:.6f}\t{e:.6f}\t{s:.2e}\t{'PASS' if r['pass'] else 'FAIL'}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "cf.json", {**_metadata(cfg), "rows": rows})
    return 0 if all(r["pass"] for r in rows) else 1


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "converge": cmd_converge, "cf": cmd_cf}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmflou", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML or JSON file with RunConfig keys")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicas", type=int)
        p.add_argument("--grid-n", type=int, dest="n")
        p.add_argument("--horizon", type=float)
        p.add_argument("--out")
        p.add_argument("--threads", type=int)
        p.add_argument("--process", choices=PROCESSES)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "simulate":
            p.add_argument("--gnuplot", action="store_true", default=None,
                           help="also write two-column blocks for gnuplot")
        if name == "verify":
            p.add_argument("--target-scale", type=float,
                           help="multiply every target (harness sanity check)")
        if name == "converge":
            p.add_argument("--axis", action="append", choices=AXES, dest="axes")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    data: dict[str, Any] = {}
    if args.config is not None:
        try:
            data = yaml.safe_load(args.config.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ParameterError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ParameterError("config must be a mapping")
    cfg = RunConfig.from_mapping(data)
    for key in ("seed", "replicas", "n", "horizon", "out", "threads", "process", "gnuplot",
                "target_scale", "axes"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        cfg.validate(args.command)
        return COMMANDS[args.command](cfg)
    except QuadratureError as exc:
        print(f"numerical error: {exc} {exc.diagnostics}", file=sys.stderr)
        return 3
    except (GmflouError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
