"""Experiment runner.

Subcommands reproduce the study designs as machine-readable CSV files with
a JSON metadata sidecar: single prices, smiles against strike/maturity and
parameter sweeps, Bermudan exercise-date curves, recovered densities and
PMFs, DCOS error decay, Monte Carlo simulation summaries, and the timing
benchmark.  Figures are rendered externally from these files.

Exit codes: 0 success, 2 configuration errors, 3 numerical failures.
"""

import argparse
import csv
import json
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cos_engine as ce
from . import montecarlo as mc
from . import qhawkes as qh
from .errors import ConfigError, JumpcosError
from .impliedvol import implied_vol
from .models import (CONFIG_FIELDS, OptionSpec, SCENARIO_PARAMS, build_models,
                     load_config)

ALL_MODELS = ("hqh", "hh", "bates", "heston")
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _git_revision():
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        return out.stdout.strip() or "unknown"
    except Exception:
        return "unknown"


def _resolve_params(args):
    if args.config:
        params = load_config(args.config)
        label = Path(args.config).stem
    else:
        params = dict(SCENARIO_PARAMS[args.scenario])
        label = args.scenario
    missing = [f for f in CONFIG_FIELDS if f not in params]
    if missing:
        raise ConfigError(f"missing configuration fields: {', '.join(missing)}")
    return params, label


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_sidecar(out_path, label, params, args, settings):
    side = {
        "scenario": label,
        "config": params,
        "settings": settings,
        "seed": getattr(args, "seed", None),
        "git_revision": _git_revision(),
    }
    path = Path(out_path).with_suffix(".json")
    with open(path, "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
    return path


def _parallel_map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _price_one(models, kind, opt):
    model = models.get(kind)
    if opt.is_european:
        price = ce.price_european(model, opt)
    else:
        price = ce.bermudan_price(model, opt)
    hp = model.heston
    try:
        iv = implied_vol(price, hp.s0, opt.strike, hp.r, opt.maturity, opt.kind)
    except JumpcosError:
        iv = float("nan")
    return price, iv


def cmd_price(args):
    params, label = _resolve_params(args)
    models = build_models(params)
    m = None if args.exercise_dates in (None, 0) else args.exercise_dates
    opt = OptionSpec(args.kind, args.strike if args.strike else params["s0"],
                     args.maturity, m)
    price, iv = _price_one(models, args.model, opt)
    print(f"model={args.model} scenario={label} kind={opt.kind} strike={opt.strike} "
          f"maturity={opt.maturity} exercise_dates={m or 'european'}")
    print(f"price={price:.10f}")
    print(f"implied_vol={iv:.10f}")
    if args.out:
        _write_csv(args.out, ["model", "kind", "strike", "maturity",
                              "exercise_dates", "price", "implied_vol"],
                   [[args.model, opt.kind, opt.strike, opt.maturity,
                     m or "european", f"{price:.12g}", f"{iv:.12g}"]])
        _write_sidecar(args.out, label, params, args,
                       {"command": "price", "model": args.model})
    return 0


AXES = ("strike", "maturity", "alpha", "beta", "q0", "mu_y")


def _axis_values(axis, params, n_points, lo=None, hi=None):
    s0 = params["s0"]
    if axis == "strike":
        lo = 0.6 * s0 if lo is None else lo
        hi = 1.4 * s0 if hi is None else hi
        return np.linspace(lo, hi, n_points or 21)
    if axis == "maturity":
        lo = 0.1 if lo is None else lo
        hi = 2.0 if hi is None else hi
        return np.linspace(lo, hi, n_points or 20)
    if axis == "alpha":
        beta = params["beta"]
        lo = 0.0 if lo is None else lo
        hi = 0.95 * beta if hi is None else hi
        if not (0.0 <= lo <= hi < beta):
            raise ConfigError(f"alpha sweep must stay within [0, beta); got [{lo}, {hi}]")
        return np.linspace(lo, hi, n_points or 13)
    if axis == "beta":
        alpha = params["alpha"]
        lo = 1.05 * alpha if lo is None else lo
        hi = 12.0 * alpha if hi is None else hi
        if not (alpha < lo <= hi):
            raise ConfigError(f"beta sweep must stay above alpha; got [{lo}, {hi}]")
        return np.linspace(lo, hi, n_points or 13)
    if axis == "q0":
        lo = 0 if lo is None else int(lo)
        hi = 8 if hi is None else int(hi)
        return np.arange(lo, hi + 1)
    if axis == "mu_y":
        # Upper edge keeps every model's implied vol inside the inversion
        # bracket at the heavy-clustering presets.
        lo = -1.2 if lo is None else lo
        hi = 0.8 if hi is None else hi
        return np.linspace(lo, hi, n_points or 13)
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def cmd_smile(args):
    params, label = _resolve_params(args)
    model_kinds = args.models.split(",") if args.models else (
        ["hqh", "hh", "bates"] if args.axis in ("strike", "maturity") else ["hqh", "hh"])
    for kind in model_kinds:
        if kind not in ALL_MODELS:
            raise ConfigError(f"unknown model {kind!r}")
    values = _axis_values(args.axis, params, args.points, args.lo, args.hi)
    s0 = params["s0"]

    def run_point(point):
        value, kind = point
        p = dict(params)
        strike, maturity = s0, args.maturity
        if args.axis == "strike":
            strike = value
        elif args.axis == "maturity":
            maturity = value
        else:
            p[args.axis] = int(value) if args.axis == "q0" else value
        try:
            models = build_models(p)
            opt = OptionSpec(args.kind, strike, maturity, None)
            price, iv = _price_one(models, kind, opt)
            return f"{price:.12g}", f"{iv:.12g}"
        except JumpcosError as exc:
            print(f"warning: point {args.axis}={value} model={kind} failed: {exc}",
                  file=sys.stderr)
            return "", ""

    points = [(v, kind) for v in values for kind in model_kinds]
    results = _parallel_map(run_point, points, args.workers)
    rows = [[f"{v:.12g}", kind, price, iv]
            for (v, kind), (price, iv) in zip(points, results)]
    out = args.out or f"smile_{args.axis}_{label}.csv"
    _write_csv(out, ["axis_value", "model", "price", "implied_vol"], rows)
    _write_sidecar(out, label, params, args,
                   {"command": "smile", "axis": args.axis,
                    "models": model_kinds, "kind": args.kind,
                    "maturity": args.maturity,
                    "n_points": len(values)})
    print(f"wrote {out}")
    return 0


def cmd_bermudan(args):
    params, label = _resolve_params(args)
    models = build_models(params)
    model_kinds = args.models.split(",") if args.models else ["hqh", "hh", "bates"]
    m_values = [int(m) for m in args.dates.split(",")]
    strike = args.strike if args.strike else params["s0"]
    rows = []
    for kind in model_kinds:
        model = models.get(kind)
        for m in m_values:
            opt = OptionSpec(args.kind, strike, args.maturity, m)
            price = ce.bermudan_price(model, opt)
            iv = implied_vol(price, model.heston.s0, strike, model.heston.r,
                             args.maturity, args.kind)
            rows.append([m, kind, f"{price:.12g}", f"{iv:.12g}"])
    out = args.out or f"bermudan_{label}.csv"
    _write_csv(out, ["exercise_dates", "model", "price", "implied_vol"], rows)
    _write_sidecar(out, label, params, args,
                   {"command": "bermudan", "models": model_kinds,
                    "strike": strike, "maturity": args.maturity,
                    "kind": args.kind, "dates": m_values})
    print(f"wrote {out}")
    return 0


def cmd_pmf(args):
    params, label = _resolve_params(args)
    models = build_models(params)
    model_kinds = args.models.split(",") if args.models else ["hqh", "hh"]
    grids = {k: ce.asset_grid(models.get(k), args.maturity) for k in model_kinds}
    lo = min(g.a for g in grids.values())
    hi = max(g.b for g in grids.values())
    # Plot window: central slice of the widest truncation range.
    x = np.linspace(lo, hi, args.points or 801)
    rows = []
    for kind in model_kinds:
        dens = ce.density_log_asset(models.get(kind), args.maturity, x, grids[kind])
        rows.extend([[f"{xi:.12g}", kind, f"{di:.12g}"] for xi, di in zip(x, dens)])
    out = args.out or f"density_{label}.csv"
    _write_csv(out, ["log_price", "model", "density"], rows)
    _write_sidecar(out, label, params, args,
                   {"command": "pmf", "models": model_kinds,
                    "maturity": args.maturity, "n_points": x.size})
    print(f"wrote {out}")
    return 0


def cmd_dcos_error(args):
    """DCOS error-decay table for the discrete uniform and Poisson cases."""
    rows = []
    n_values = [2**j for j in range(4, 13)]
    support = 500
    pmf_u = 1.0 / (support + 1)

    def cf_uniform(u):
        den = np.exp(1j * np.asarray(u)) - 1.0
        degenerate = np.abs(den) < 1e-15
        safe = np.where(degenerate, 1.0, den)
        num = np.exp(1j * np.asarray(u) * (support + 1)) - 1.0
        return np.where(degenerate, 1.0 + 0j, num / ((support + 1) * safe))
    lam = 15.0
    cf_poisson = lambda u: np.exp(lam * (np.exp(1j * u) - 1.0))
    from scipy.stats import poisson
    for n_terms in n_values:
        err_u = abs(ce.dcos_pmf(cf_uniform, 24, n_terms) - pmf_u)
        err_p = abs(ce.dcos_pmf(cf_poisson, 12, n_terms) - poisson.pmf(12, lam))
        rows.append([n_terms, "uniform", f"{err_u:.12g}"])
        rows.append([n_terms, "poisson", f"{err_p:.12g}"])
    out = args.out or "dcos_error.csv"
    _write_csv(out, ["n_terms", "distribution", "abs_error"], rows)
    _write_sidecar(out, "-", {}, args,
                   {"command": "dcos-error", "uniform_support": support,
                    "uniform_index": 24, "poisson_rate": lam, "poisson_index": 12})
    print(f"wrote {out}")
    return 0


def cmd_simulate(args):
    params, label = _resolve_params(args)
    models = build_models(params)
    model = models.get(args.model)
    sample = mc.simulate_asset(model, args.maturity, args.paths, args.seed)
    opt = OptionSpec(args.kind, args.strike if args.strike else params["s0"],
                     args.maturity, None)
    price, se = mc.mc_price_european(sample.s_t, opt, model.heston.r)
    print(f"mc_price={price:.8f} se={se:.8f} paths={args.paths}")
    if args.out:
        rows = [[args.model, opt.kind, opt.strike, args.maturity, args.paths,
                 f"{price:.12g}", f"{se:.12g}"]]
        _write_csv(args.out, ["model", "kind", "strike", "maturity", "paths",
                              "mc_price", "std_error"], rows)
        _write_sidecar(args.out, label, params, args,
                       {"command": "simulate", "model": args.model,
                        "paths": args.paths})
    if args.dump:
        _dump_paths(model, args, params)
    return 0


def _dump_paths(model, args, params):
    """Debug dump of a few simulated paths on a coarse time grid."""
    jumps = model.jumps
    rows = []
    n_dump = min(args.paths, 8)
    t_grid = np.linspace(0.0, args.maturity, 101)
    for i in range(n_dump):
        if jumps is not None and hasattr(jumps, "params"):
            path_fn = (mc.qhawkes_path if model.kind == "hqh" else mc.hawkes_path)
            path = path_fn(jumps.params, args.maturity, args.seed + i)
            lam = path.intensity_at(t_grid)
            n_events = np.searchsorted(path.event_times, t_grid, side="right")
        else:
            lam = np.zeros_like(t_grid)
            n_events = np.zeros_like(t_grid, dtype=int)
        sa = mc.simulate_asset(model, args.maturity, 1, args.seed + i)
        for t, l, n in zip(t_grid, lam, n_events):
            rows.append([i, f"{t:.6g}", f"{sa.s_t[0]:.8g}", f"{sa.variance[0]:.8g}",
                         f"{l:.8g}", n])
    _write_csv(args.dump, ["path", "t", "S", "V", "lambda", "N"], rows)
    print(f"wrote {args.dump}")


def cmd_bench(args):
    params, label = _resolve_params(args)
    models = build_models(params)
    strikes = np.linspace(0.6 * params["s0"], 1.4 * params["s0"], args.strikes)
    maturities = np.linspace(0.1, 2.0, args.maturities)
    model_kinds = ["hh", "hqh", "bates"]
    timings = {}
    for kind in model_kinds:
        model = models.get(kind)
        _grid_prices(model, strikes, maturities)   # warm-up excluded
        reps = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            _grid_prices(model, strikes, maturities)
            reps.append(time.perf_counter() - t0)
        timings[kind] = float(np.mean(reps))
    base = timings["hh"]
    rows = [[kind, f"{timings[kind]:.6f}", f"{base / timings[kind]:.4f}"]
            for kind in model_kinds]
    out = args.out or f"bench_{label}.csv"
    _write_csv(out, ["model", "mean_seconds", "speedup_vs_hh"], rows)
    _write_sidecar(out, label, params, args,
                   {"command": "bench", "repeats": args.repeats,
                    "grid": [len(strikes), len(maturities)]})
    for kind in model_kinds:
        print(f"{kind}: {timings[kind]:.4f}s  speedup vs hh: {base / timings[kind]:.2f}")
    return 0


def _grid_prices(model, strikes, maturities):
    total = 0.0
    for t in maturities:
        for k in strikes:
            total += ce.price_european(model, OptionSpec("put", float(k), float(t)))
    return total


def _add_common(p, scenario_default="A"):
    p.add_argument("--scenario", choices=("A", "B"), default=scenario_default)
    p.add_argument("--config", default=None, help="JSON parameter file (overrides --scenario)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output CSV path")


def build_parser():
    parser = argparse.ArgumentParser(prog="jumpcos",
                                     description="Option pricing with self-exciting jumps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="single price and implied vol")
    _add_common(p)
    p.add_argument("--model", choices=ALL_MODELS, required=True)
    p.add_argument("--kind", choices=("put", "call"), default="put")
    p.add_argument("--strike", type=float, default=None, help="default: at the money")
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--exercise-dates", type=int, default=None,
                   help="Bermudan date count; omit for European")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("smile", help="implied-vol sweep along an axis")
    _add_common(p)
    p.add_argument("--axis", choices=AXES, default="strike")
    p.add_argument("--models", default=None, help="comma list of models")
    p.add_argument("--kind", choices=("put", "call"), default="put")
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--workers", type=int, default=0)
    p.set_defaults(func=cmd_smile)

    p = sub.add_parser("bermudan", help="price vs number of exercise dates")
    _add_common(p)
    p.add_argument("--models", default=None)
    p.add_argument("--kind", choices=("put", "call"), default="put")
    p.add_argument("--strike", type=float, default=None)
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--dates", default="1,2,4,8,12,24")
    p.set_defaults(func=cmd_bermudan)

    p = sub.add_parser("pmf", help="recovered log-asset density")
    _add_common(p)
    p.add_argument("--models", default=None)
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--points", type=int, default=None)
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("dcos-error", help="DCOS convergence table")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dcos_error)

    p = sub.add_parser("simulate", help="Monte Carlo pricing and path dump")
    _add_common(p)
    p.add_argument("--model", choices=ALL_MODELS, required=True)
    p.add_argument("--kind", choices=("put", "call"), default="put")
    p.add_argument("--strike", type=float, default=None)
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--dump", default=None, help="CSV path for per-path dumps")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="European pricing timing benchmark")
    _add_common(p)
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--strikes", type=int, default=21)
    p.add_argument("--maturities", type=int, default=20)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except JumpcosError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
