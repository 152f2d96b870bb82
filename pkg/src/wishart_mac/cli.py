"""Command-line interface.

Every command writes its result (a curve or a small table) to ``--output``
or standard output, prints a one-line summary to standard error and exits
with 0 on success, 2 on invalid input and 3 when a quadrature fails to
converge. Failures also emit a JSON error record on standard error.

Default quadrature tolerances can be set with the environment variables
``WISHART_MAC_REL_TOL`` and ``WISHART_MAC_ABS_TOL``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import extremes, montecarlo
from .curves import DensityCurve, Quantity
from .ensemble import ChannelConfig, EnsembleContext, marginal_bin_average, marginal_density
from .mutualinfo import MiMethod, default_method, mi_moments, mi_pdf, outage, outage_rate
from .numerics import AccuracyError, QuadratureSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_QUADRATURE = 3

COMMANDS = ("marginal", "extremes", "mi-pdf", "outage", "outage-rate", "moments", "mc-compare",
            "sweep-outage-rate")

ENV_REL_TOL = "WISHART_MAC_REL_TOL"
ENV_ABS_TOL = "WISHART_MAC_ABS_TOL"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    cfg: ChannelConfig
    method: MiMethod | None = None
    grid: tuple | None = None  # (lo, hi, points)
    R: float | None = None
    eps: float | None = None
    seed: int = 1
    count: int = 100_000
    output: Path | None = None
    fmt: str = "csv"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    quantity: str | None = None
    bins: int = 100
    sweep: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.fmt not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {self.fmt!r}")

    def context(self) -> EnsembleContext:
        return EnsembleContext(self.cfg)

    def spec(self, ctx: EnsembleContext) -> QuadratureSpec:
        return ctx.quad_spec(rel_tol=self.rel_tol, abs_tol=self.abs_tol)


# ---------------------------------------------------------------------------
# argument parsing


def _db(x: float) -> float:
    return 10.0 ** (x / 10.0)


def _grid_arg(text: str):
    try:
        lo, hi, pts = text.split(",")
        lo, hi, pts = float(lo), float(hi), int(pts)
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be lo,hi,points") from None
    if not (hi > lo and pts >= 2):
        raise argparse.ArgumentTypeError("grid needs hi > lo and at least 2 points")
    return lo, hi, pts


def _int_list(text: str):
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None


def _env_float(name, default):
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"{name}={raw!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="wishart-mac",
        description="Eigenvalue and mutual-information laws of the two-user MIMO MAC quotient ensemble.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--n", type=int, help="receive antennas (sweep-outage-rate uses --ns)")
    p.add_argument("--na", type=int, required=True, help="transmit antennas of user A")
    p.add_argument("--nb", type=int, required=True, help="transmit antennas of user B")
    ga = p.add_mutually_exclusive_group()
    ga.add_argument("--a", type=float, help="per-antenna SNR factor of user A (linear)")
    ga.add_argument("--a-db", type=float, help="per-antenna SNR factor of user A in dB")
    gb = p.add_mutually_exclusive_group()
    gb.add_argument("--b", type=float, help="per-antenna SNR factor of user B (linear)")
    gb.add_argument("--b-db", type=float, help="per-antenna SNR factor of user B in dB")
    p.add_argument("--method", help="direct_jpdf | laplace_convolution | gaussian_approx | monte_carlo")
    p.add_argument("--grid", type=_grid_arg, help="lo,hi,points")
    p.add_argument("--R", type=float, help="target rate (bits/s/Hz) for a single outage value")
    p.add_argument("--eps", type=float, help="outage level")
    p.add_argument("--quantity", help="curve to compute for extremes / mc-compare")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--count", type=int, default=100_000, help="Monte Carlo draws")
    p.add_argument("--bins", type=int, default=100, help="histogram bins for density comparisons")
    p.add_argument("--output", type=Path, help="output file (default: standard output)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--a-db-range", type=_grid_arg, default=(0.0, 30.0, 31),
                   help="sweep-outage-rate: lo,hi,points in dB")
    p.add_argument("--ns", type=_int_list, default=[2, 3, 4], help="sweep-outage-rate: receive antenna counts")
    return p


def parse_run_config(argv) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    a = _db(ns.a_db) if ns.a_db is not None else ns.a
    b = _db(ns.b_db) if ns.b_db is not None else ns.b
    sweep = ns.command == "sweep-outage-rate"
    if a is None and not sweep:
        raise UsageError("one of --a / --a-db is required")
    if b is None:
        raise UsageError("one of --b / --b-db is required")
    if ns.n is None and not sweep:
        raise UsageError("--n is required")
    if sweep and not ns.ns:
        raise UsageError("--ns must list at least one antenna count")
    try:
        # for a sweep, validate against the largest n so every scenario is admissible
        cfg = ChannelConfig(max(ns.ns) if sweep else ns.n, ns.na, ns.nb, 1.0 if a is None else a, b)
        method = MiMethod.parse(ns.method) if ns.method else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rel = ns.rel_tol if ns.rel_tol is not None else _env_float(ENV_REL_TOL, 1e-8)
    abs_ = ns.abs_tol if ns.abs_tol is not None else _env_float(ENV_ABS_TOL, 1e-12)
    if not (rel > 0 and abs_ > 0):
        raise UsageError("tolerances must be positive")
    if ns.eps is not None and not 0 < ns.eps < 1:
        raise UsageError("--eps must lie in (0, 1)")
    if ns.R is not None and not ns.R >= 0:
        raise UsageError("--R must be >= 0")
    if ns.count < 1:
        raise UsageError("--count must be positive")
    return RunConfig(
        command=ns.command, cfg=cfg, method=method, grid=ns.grid, R=ns.R, eps=ns.eps,
        seed=ns.seed, count=ns.count, output=ns.output, fmt=ns.fmt, rel_tol=rel, abs_tol=abs_,
        quantity=ns.quantity, bins=ns.bins,
        sweep={"a_db": ns.a_db_range, "ns": ns.ns},
    )


# ---------------------------------------------------------------------------
# commands


def _grid(rc: RunConfig, default):
    if rc.grid is None:
        return default
    lo, hi, pts = rc.grid
    return np.linspace(lo, hi, pts)


def _mi_grid(rc, ctx, points=101):
    m = mi_moments(ctx)
    return _grid(rc, np.linspace(0.0, m.mean + 6.0 * m.std, points))


def _curve(rc, ctx, quantity, method, grid, values):
    return DensityCurve(quantity, method, grid, values, rc.cfg, rc.spec(ctx))


_EXTREME_FUNCS = {
    Quantity.EIG_MIN_SF: extremes.gap_lower,
    Quantity.EIG_MAX_CDF: extremes.gap_upper,
    Quantity.EIG_MIN_PDF: extremes.pdf_min,
    Quantity.EIG_MAX_PDF: extremes.pdf_max,
}


def cmd_marginal(rc, ctx):
    grid = _grid(rc, extremes.default_grid(ctx, 200))
    return _curve(rc, ctx, Quantity.EIG_MARGINAL, MiMethod.DIRECT, grid, marginal_density(ctx, grid)), {}


def cmd_extremes(rc, ctx):
    q = Quantity(rc.quantity or "eig_max_cdf")
    if q not in _EXTREME_FUNCS:
        raise UsageError(f"extremes supports {', '.join(k.value for k in _EXTREME_FUNCS)}")
    grid = _grid(rc, extremes.default_grid(ctx, 200))
    if q in (Quantity.EIG_MIN_PDF, Quantity.EIG_MAX_PDF) and grid[0] <= 0:
        raise UsageError("extreme-eigenvalue densities need a grid with lo > 0")
    return _curve(rc, ctx, q, MiMethod.DIRECT, grid, _EXTREME_FUNCS[q](ctx, grid)), {}


def _method(rc, ctx):
    return rc.method or default_method(ctx)


def _mc_mi(rc):
    return montecarlo.empirical_mi(montecarlo.sample_eigenvalues(rc.cfg, rc.seed, rc.count))


def cmd_mi_pdf(rc, ctx):
    method = _method(rc, ctx)
    grid = _mi_grid(rc, ctx)
    if method is MiMethod.MONTE_CARLO:
        edges = np.linspace(grid[0], grid[-1], len(grid) + 1)
        centers, dens, _ = montecarlo.empirical_density(_mc_mi(rc), bins=edges)
        return _curve(rc, ctx, Quantity.MI_PDF, method, centers, dens), {}
    return _curve(rc, ctx, Quantity.MI_PDF, method, grid, mi_pdf(ctx, grid, method, rc.spec(ctx))), {}


def cmd_outage(rc, ctx):
    method = _method(rc, ctx)
    mc = _mc_mi(rc) if method is MiMethod.MONTE_CARLO else None
    if rc.R is not None:
        p = outage(ctx, rc.R, method, rc.spec(ctx), mc_values=mc)
        return {"R": rc.R, "p_out": p}, {"method": method.value}
    grid = _mi_grid(rc, ctx)
    vals = np.maximum.accumulate(np.asarray(outage(ctx, grid, method, rc.spec(ctx), mc_values=mc)))
    return _curve(rc, ctx, Quantity.MI_CDF, method, grid, vals), {}


def cmd_outage_rate(rc, ctx):
    if rc.eps is None:
        raise UsageError("outage-rate needs --eps")
    method = _method(rc, ctx)
    mc = _mc_mi(rc) if method is MiMethod.MONTE_CARLO else None
    r = outage_rate(ctx, rc.eps, method, rc.spec(ctx), mc_values=mc)
    return {"eps": rc.eps, "rate": r}, {"method": method.value}


def cmd_moments(rc, ctx):
    m = mi_moments(ctx)
    return {"mean": m.mean, "variance": m.variance, "std": m.std}, {"method": "correlation_quadrature"}


def _ks_band(count: int) -> float:
    return 1.63 / math.sqrt(count) + 0.005


def cmd_mc_compare(rc, ctx):
    q = Quantity(rc.quantity or "mi_cdf")
    ens = montecarlo.sample_eigenvalues(rc.cfg, rc.seed, rc.count)
    spec = rc.spec(ctx)
    if q is Quantity.MI_CDF:
        method = rc.method if rc.method not in (None, MiMethod.MONTE_CARLO) else default_method(ctx)
        grid = _mi_grid(rc, ctx, 61)
        analytic = np.asarray(outage(ctx, grid, method, spec))
        empirical = montecarlo.empirical_cdf(montecarlo.empirical_mi(ens), grid, strict=True)
        band = _ks_band(rc.count)
    elif q in (Quantity.EIG_MIN_SF, Quantity.EIG_MAX_CDF):
        method = MiMethod.DIRECT
        grid = _grid(rc, extremes.default_grid(ctx, 100))
        lmin, lmax = montecarlo.extreme_stats(ens)
        analytic = np.asarray(_EXTREME_FUNCS[q](ctx, grid))
        if q is Quantity.EIG_MIN_SF:
            empirical = 1.0 - montecarlo.empirical_cdf(lmin, grid, strict=True)
        else:
            empirical = montecarlo.empirical_cdf(lmax, grid)
        band = _ks_band(rc.count)
    elif q is Quantity.EIG_MARGINAL:
        method = MiMethod.DIRECT
        top = extremes.default_grid(ctx, 2)[-1]
        lo, hi = (rc.grid[0], rc.grid[1]) if rc.grid else (0.0, top)
        grid, empirical, edges = montecarlo.empirical_density(ens.samples.ravel(), bins=rc.bins, range=(lo, hi))
        # the histogram counts only draws inside the range; rescale to the full law
        inside = np.mean((ens.samples >= lo) & (ens.samples <= hi))
        empirical = empirical * inside
        # compare against the bin average, which is what a histogram estimates
        analytic = marginal_bin_average(ctx, edges)
        band = 0.02
    else:
        raise UsageError("mc-compare supports mi_cdf, eig_min_sf, eig_max_cdf, eig_marginal")
    sup = montecarlo.sup_distance(analytic, empirical)
    report = {
        "quantity": q.value,
        "method": method.value,
        "seed": rc.seed,
        "count": rc.count,
        "sup_distance": sup,
        "band": band,
        "verdict": "PASS" if sup <= band else "FAIL",
        "analytic": _curve(rc, ctx, q, method, grid, analytic).to_dict(),
        "empirical": DensityCurve(q, MiMethod.MONTE_CARLO, grid, empirical, rc.cfg, spec).to_dict(),
    }
    return report, {"method": method.value, "verdict": report["verdict"], "sup": f"{sup:.3g}"}


def sweep_outage_rate(rc: RunConfig):
    lo, hi, pts = rc.sweep["a_db"]
    adb = np.linspace(lo, hi, pts)
    eps = rc.eps if rc.eps is not None else 0.01
    method = rc.method or MiMethod.GAUSSIAN
    rows = []
    fits = {}
    for n in rc.sweep["ns"]:
        rates = []
        for d in adb:
            try:
                cfg = ChannelConfig(n, rc.cfg.n_A, rc.cfg.n_B, _db(d), rc.cfg.b)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            ctx = EnsembleContext(cfg)
            r = outage_rate(ctx, eps, method, ctx.quad_spec(rc.rel_tol, rc.abs_tol))
            rates.append(r)
            rows.append({"a_db": float(d), "n": n, "rate": r})
        rates = np.array(rates)
        coef = np.polyfit(adb, rates, 1)
        resid = rates - np.polyval(coef, adb)
        fits[n] = {
            "slope": float(coef[0]),
            "intercept": float(coef[1]),
            "r2": float(1.0 - resid.var() / rates.var()) if rates.var() > 0 else 1.0,
            "increasing": bool(np.all(np.diff(rates) > 0)),
        }
    return {"eps": eps, "method": method.value, "rows": rows, "fits": fits}


_DISPATCH = {
    "marginal": cmd_marginal,
    "extremes": cmd_extremes,
    "mi-pdf": cmd_mi_pdf,
    "outage": cmd_outage,
    "outage-rate": cmd_outage_rate,
    "moments": cmd_moments,
    "mc-compare": cmd_mc_compare,
}


# ---------------------------------------------------------------------------
# output


def _table_csv(rc: RunConfig, table: dict) -> str:
    c = rc.cfg
    head = f"# command,n,nA,nB,a,b\n# {rc.command},{c.n},{c.n_A},{c.n_B},{c.a!r},{c.b!r}\n"
    if rc.command == "sweep-outage-rate":
        lines = ["a_db,n,rate"] + [f"{r['a_db']:.17g},{r['n']},{r['rate']:.17g}" for r in table["rows"]]
        fits = "".join(f"# fit n={n}: slope={f['slope']:.6g} r2={f['r2']:.6f} increasing={f['increasing']}\n"
                       for n, f in table["fits"].items())
        return head + fits + "\n".join(lines) + "\n"
    if rc.command == "mc-compare":
        an, em = table["analytic"], table["empirical"]
        lines = ["x,analytic,empirical"] + [
            f"{x:.17g},{u:.17g},{v:.17g}" for x, u, v in zip(an["grid"], an["values"], em["values"])
        ]
        meta = (f"# quantity={table['quantity']} sup_distance={table['sup_distance']:.6g} "
                f"band={table['band']:.6g} verdict={table['verdict']}\n")
        return head + meta + "\n".join(lines) + "\n"
    lines = ["name,value"] + [f"{k},{v!r}" if isinstance(v, str) else f"{k},{v:.17g}" for k, v in table.items()]
    return head + "\n".join(lines) + "\n"


def render(rc: RunConfig, result) -> str:
    if isinstance(result, DensityCurve):
        return result.to_csv() if rc.fmt == "csv" else result.to_json() + "\n"
    if rc.fmt == "json":
        return json.dumps(result, indent=1, default=float) + "\n"
    return _table_csv(rc, result)


def _emit(rc: RunConfig, text: str):
    if rc.output is None:
        sys.stdout.write(text)
    else:
        rc.output.write_text(text)


def _error(kind: str, message: str, code: int, **extra) -> int:
    rec = {"error": kind, "message": message, "exit_code": code}
    rec.update(extra)
    sys.stderr.write(json.dumps(rec) + "\n")
    return code


def run(rc: RunConfig) -> int:
    t0 = time.perf_counter()
    try:
        if rc.command == "sweep-outage-rate":
            result, note = sweep_outage_rate(rc), {}
            method = result["method"]
        else:
            ctx = rc.context()
            result, note = _DISPATCH[rc.command](rc, ctx)
            method = result.method.value if isinstance(result, DensityCurve) else note.get(
                "method", (rc.method or default_method(ctx)).value)
    except UsageError as exc:
        return _error("usage", str(exc), EXIT_USAGE)
    except AccuracyError as exc:
        return _error("quadrature", str(exc), EXIT_QUADRATURE, estimate=exc.estimate, error_bound=exc.error)
    except ValueError as exc:
        return _error("invalid_input", str(exc), EXIT_USAGE)
    _emit(rc, render(rc, result))
    c = rc.cfg
    extra = "".join(f" {k}={v}" for k, v in note.items() if k != "method")
    sys.stderr.write(
        f"{rc.command} n={c.n} nA={c.n_A} nB={c.n_B} a={c.a:.6g} b={c.b:.6g} method={method}"
        f"{extra} time={time.perf_counter() - t0:.2f}s\n"
    )
    return EXIT_OK


def main(argv=None) -> int:
    try:
        rc = parse_run_config(argv)
    except UsageError as exc:
        return _error("usage", str(exc), EXIT_USAGE)
    return run(rc)


if __name__ == "__main__":
    sys.exit(main())
