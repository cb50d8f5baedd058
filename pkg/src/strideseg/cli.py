"""Command line front end.

Subcommands: simulate (synthetic data), detect (run the staged pipeline),
plan (stage sizing from upper bounds), quantiles (build a walk-argmin
quantile table), bench (runtime scaling vs a full scan), coverage (interval
calibration study). All randomness flows from --seed; artifacts written
with the same seed are byte-identical, except for the wall-clock columns
in bench output.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from math import log10
from pathlib import Path

import numpy as np

from .model import StridesegError
from .pipeline import (
    AnalyticQuantileSource,
    PipelineConfig,
    QuantileSource,
    detect,
    plan_allocation,
)
from .rwdist import LDistTable, NoiseSpec, build_table, read_table, write_table
from .segmentation import SegmentationParams, binseg
from .seqio import MemorySeries, open_series, write_raw
from .synth import alternating_config, emulation_config, gen_config, gen_series

__all__ = ["main", "build_parser", "run_bench", "run_coverage"]

_NOISE_CHOICES = ("iid", "ma3", "ar1", "hetero", "none")
_DEFAULT_BENCH_GRID = (
    100_000,
    215_443,
    464_159,
    1_000_000,
    2_154_435,
    4_641_589,
    10_000_000,
)


def _eprint(*parts) -> None:
    print(*parts, file=sys.stderr)


def _parse_grid(text: str) -> list[float]:
    """lo:hi:step inclusive, values rounded to 9 decimals."""
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise StridesegError(f"bad grid '{text}'; expected lo:hi:step") from exc
    if step <= 0 or hi < lo:
        raise StridesegError(f"bad grid '{text}'; need step > 0 and hi >= lo")
    count = int(round((hi - lo) / step)) + 1
    grid = [round(lo + i * step, 9) for i in range(count) if lo + i * step <= hi + 1e-9]
    return grid


def _parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x.strip()]


def _pipeline_noise(name: str) -> NoiseSpec:
    if name in ("iid", "none", "hetero"):
        return NoiseSpec.iid()
    if name == "ma3":
        from .synth import MA3_COEFFS

        return NoiseSpec.ma(MA3_COEFFS)
    if name == "ar1":
        from .synth import AR1_PHI

        return NoiseSpec.ar1(AR1_PHI)
    raise StridesegError(f"unknown noise model '{name}'")


def _write_series(path: str, values: np.ndarray) -> None:
    if path.endswith(".csv"):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for v in values:
                fh.write(repr(float(v)) + "\n")
    else:
        write_raw(path, values)


# ---------------------------------------------------------------- simulate


def _cmd_simulate(args) -> int:
    sigma = args.sigma
    if args.emulate:
        config = emulation_config(args.emulate, args.n, sigma=sigma, seed=args.seed)
    else:
        config = gen_config(
            args.n,
            args.j,
            min_jump=args.snr * sigma if sigma > 0 else args.snr,
            level_max=args.level_max,
            seed=args.seed,
        )
    y = gen_series(config, noise=args.noise, sigma=sigma, seed=args.seed)
    _write_series(args.out, y)
    if args.truth:
        truth = json.loads(config.to_json())
        truth.update({"noise": args.noise, "sigma": sigma, "seed": args.seed})
        with open(args.truth, "w", encoding="ascii") as fh:
            json.dump(truth, fh, sort_keys=True, indent=2)
            fh.write("\n")
    print(
        json.dumps(
            {"n": config.n, "j": config.j, "out": args.out, "truth": args.truth},
            sort_keys=True,
        )
    )
    return 0


# ------------------------------------------------------------------ detect


def _cache_to_table(source: QuantileSource) -> LDistTable | None:
    """Freeze a source's simulated quantiles into a table (grid x alphas)."""
    if not source._cache:
        return None
    grid = sorted({k[0] for k in source._cache})
    alphas = sorted({k[1] for k in source._cache})
    qvals = np.zeros((len(grid), len(alphas)), dtype=np.int64)
    for gi, s in enumerate(grid):
        for ai, a in enumerate(alphas):
            qvals[gi, ai] = source.q(s, a)
    from .rwdist import repair_monotone

    return LDistTable(
        snr_grid=[float(s) for s in grid],
        alphas=[float(a) for a in alphas],
        qvals=repair_monotone(qvals),
        reps=source.reps,
        seed=source.seed,
        noise=source.noise,
    )


def _detect_config(args, noise: NoiseSpec) -> PipelineConfig:
    seg = SegmentationParams(
        zeta=args.zeta,
        method=args.method,
        m=args.m,
    )
    omit = args.noise == "iid" and not args.keep_grid_points
    return PipelineConfig(
        stages=args.stages,
        n1=args.n1,
        gamma=args.gamma,
        k_mult=args.k,
        alpha=args.alpha,
        alpha_window=args.alpha_window,
        delta_d=args.delta_d,
        delta_jump=args.delta_jump,
        snr_floor=args.snr_floor,
        omit_stage1_points=omit,
        seg=seg,
        noise=noise,
        seed=args.seed,
    )


def _cmd_detect(args) -> int:
    noise = _pipeline_noise(args.noise)
    table = None
    build_missing = False
    if args.table:
        if Path(args.table).exists():
            table = read_table(args.table)
        else:
            build_missing = True
            _eprint(
                f"table {args.table} not found; quantiles will be simulated "
                f"(reps={args.table_reps}) and the result saved there"
            )
    source = QuantileSource(
        table=table,
        noise=noise,
        reps=args.table_reps,
        seed=args.seed,
        jobs=args.jobs,
    )
    series = open_series(args.infile)
    try:
        report = detect(series, _detect_config(args, noise), source=source)
    finally:
        close = getattr(series, "close", None)
        if close:
            close()
    if build_missing:
        built = _cache_to_table(source)
        if built is not None:
            write_table(built, args.table)
            _eprint(f"wrote quantile table to {args.table}")
    text = report.to_json(include_timings=args.timings)
    if args.report:
        with open(args.report, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# -------------------------------------------------------------------- plan


def _cmd_plan(args) -> int:
    plan = plan_allocation(args.n, args.j, args.snr, args.alpha, args.stages)
    print(json.dumps(plan.to_dict(), sort_keys=True, indent=2))
    return 0


# --------------------------------------------------------------- quantiles


def _cmd_quantiles(args) -> int:
    grid = _parse_grid(args.snr_grid)
    alphas = _parse_float_list(args.alphas)
    noise = _pipeline_noise(args.noise)
    table = build_table(grid, alphas, args.reps, args.seed, noise=noise, jobs=args.jobs)
    write_table(table, args.out)
    from .rwdist import table_content_hash

    h = table_content_hash(table.snr_grid, table.alphas, table.reps, table.seed, table.noise)
    print(json.dumps({"out": args.out, "rows": len(grid), "hash": h}, sort_keys=True))
    return 0


# ------------------------------------------------------------------- bench


def run_bench(
    grid,
    reps: int = 5,
    snr: float = 2.0,
    sigma: float = 1.0,
    stages: int = 2,
    seed: int = 0,
    methods=("detect", "full"),
    table=None,
):
    """Time the staged pipeline against a full binary-segmentation scan.

    Returns (rows, summary): rows are per-run dicts, summary holds the
    fitted log-log slope per method and the speedup at the largest n.
    """
    rows = []
    # closed-form quantiles: table setup cost must not leak into the timings
    source = QuantileSource(table=table, seed=seed) if table is not None else AnalyticQuantileSource()
    for ni, n in enumerate(grid):
        j = max(1, int(round(log10(n) ** 2)))
        for rep in range(reps):
            base = seed * 1_000_003 + ni * 101 + rep
            config = gen_config(n, j, min_jump=snr * sigma, seed=base)
            y = gen_series(config, noise="iid", sigma=sigma, seed=base)
            series = MemorySeries(y)
            for method in methods:
                t0 = time.perf_counter()
                if method == "detect":
                    cfg = PipelineConfig(stages=stages, seed=base)
                    rpt = detect(series, cfg, source=source)
                    j_hat = rpt.j_hat
                    touched = rpt.touched_fraction
                else:
                    taus = binseg(y, float(n) ** 0.2)
                    j_hat = len(taus)
                    touched = 1.0
                seconds = time.perf_counter() - t0
                rows.append(
                    {
                        "n": n,
                        "rep": rep,
                        "method": method,
                        "j_true": j,
                        "j_hat": j_hat,
                        "touched_fraction": touched,
                        "seconds": seconds,
                    }
                )
    summary = {}
    for method in methods:
        xs, ys = [], []
        for n in grid:
            times = [r["seconds"] for r in rows if r["n"] == n and r["method"] == method]
            xs.append(log10(n))
            ys.append(log10(float(np.median(times))))
        slope = float(np.polyfit(xs, ys, 1)[0])
        summary[f"slope_{method}"] = slope
    n_max = max(grid)
    med = {
        m: float(np.median([r["seconds"] for r in rows if r["n"] == n_max and r["method"] == m]))
        for m in methods
    }
    if "detect" in med and "full" in med and med["detect"] > 0:
        summary["speedup_at_max_n"] = med["full"] / med["detect"]
    return rows, summary


_BENCH_COLUMNS = ("n", "rep", "method", "j_true", "j_hat", "touched_fraction", "seconds")


def _write_csv(path: str, columns, rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            cells = []
            for c in columns:
                v = r[c]
                cells.append(repr(float(v)) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def _cmd_bench(args) -> int:
    grid = _parse_int_list(args.grid) if args.grid else list(_DEFAULT_BENCH_GRID)
    methods = tuple(args.methods.split(","))
    table = read_table(args.table) if args.table and Path(args.table).exists() else None
    rows, summary = run_bench(
        grid,
        reps=args.reps,
        snr=args.snr,
        stages=args.stages,
        seed=args.seed,
        methods=methods,
        table=table,
    )
    _write_csv(args.out, _BENCH_COLUMNS, rows)
    print(json.dumps({"out": args.out, **{k: round(v, 4) for k, v in summary.items()}}, sort_keys=True))
    return 0


# ---------------------------------------------------------------- coverage


def run_coverage(
    spec: dict,
    reps: int,
    nominals,
    seed: int = 0,
    table=None,
    table_reps: int = 200_000,
):
    """Repeatedly simulate, detect, and score simultaneous interval coverage.

    spec keys: n, j, snr, and optionally sigma (1.0), noise ("iid"),
    stages (2), n1, alpha_window (0.01), k_mult (1.25). A replication is
    covered at a nominal level when the detected count matches and every
    true change point falls in its order-matched interval. Returns one
    summary row per nominal level.
    """
    n = int(spec["n"])
    j = int(spec["j"])
    snr = float(spec["snr"])
    sigma = float(spec.get("sigma", 1.0))
    noise_name = str(spec.get("noise", "iid"))
    stages = int(spec.get("stages", 2))
    n1 = spec.get("n1")
    alpha_window = float(spec.get("alpha_window", 0.01))
    k_mult = float(spec.get("k_mult", 1.25))

    config = alternating_config(n, j, snr * sigma)
    noise = _pipeline_noise(noise_name)
    omit = noise_name in ("iid", "none")
    sources = {
        nom: QuantileSource(table=table, noise=noise, reps=table_reps, seed=seed)
        for nom in nominals
    }
    covered = {nom: 0 for nom in nominals}
    j_correct = {nom: 0 for nom in nominals}
    for rep in range(reps):
        y = gen_series(config, noise=noise_name, sigma=sigma, seed=seed * 1_000_003 + rep)
        series = MemorySeries(y)
        for nom in nominals:
            cfg = PipelineConfig(
                stages=stages,
                n1=None if n1 is None else int(n1),
                k_mult=k_mult,
                alpha=1.0 - nom,
                alpha_window=alpha_window,
                omit_stage1_points=omit,
                noise=noise,
                seed=seed,
            )
            rpt = detect(series, cfg, source=sources[nom])
            ok_j = rpt.j_hat == j
            if ok_j:
                j_correct[nom] += 1
                if all(
                    e.ci_lo <= t <= e.ci_hi
                    for t, e in zip(config.taus, rpt.estimates)
                ):
                    covered[nom] += 1
    rows = []
    for nom in sorted(nominals):
        rows.append(
            {
                "nominal": nom,
                "reps": reps,
                "j_correct": j_correct[nom],
                "covered": covered[nom],
                "j_rate": j_correct[nom] / reps,
                "coverage": covered[nom] / reps,
            }
        )
    return rows


_COVERAGE_COLUMNS = ("nominal", "reps", "j_correct", "covered", "j_rate", "coverage")


def _cmd_coverage(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    nominals = _parse_float_list(args.nominal)
    table = read_table(args.table) if args.table and Path(args.table).exists() else None
    rows = run_coverage(
        spec,
        reps=args.reps,
        nominals=nominals,
        seed=args.seed,
        table=table,
        table_reps=args.table_reps,
    )
    _write_csv(args.out, _COVERAGE_COLUMNS, rows)
    print(json.dumps({"out": args.out, "rows": len(rows)}, sort_keys=True))
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="strideseg",
        description="Sub-linear change-point detection for long sequences",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic series")
    s.add_argument("--n", type=int, required=True, help="sequence length")
    s.add_argument("--j", type=int, default=10, help="number of change points")
    s.add_argument("--snr", type=float, default=2.0, help="minimum jump in sigma units")
    s.add_argument("--noise", choices=_NOISE_CHOICES, default="iid")
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--emulate", choices=("sig-1", "sig-2"), default=None,
                   help="use a named layout instead of --j/--snr")
    s.add_argument("--level-max", type=float, default=10.0)
    s.add_argument("--out", required=True, help=".csv for text, anything else raw float64")
    s.add_argument("--truth", default=None, help="write the true config JSON here")
    s.set_defaults(func=_cmd_simulate)

    d = sub.add_parser("detect", help="run the staged detection pipeline")
    d.add_argument("--in", dest="infile", required=True)
    d.add_argument("--stages", type=int, choices=(2, 3, 4), default=2)
    d.add_argument("--n1", type=int, default=None, help="stage-1 subsample size")
    d.add_argument("--gamma", type=float, default=None, help="n1 = ceil(n ** gamma)")
    d.add_argument("--alpha", type=float, default=0.01)
    d.add_argument("--alpha-window", type=float, default=0.01)
    d.add_argument("--k", type=float, default=1.25, help="window multiplier (> 1)")
    d.add_argument("--snr-floor", type=float, default=0.5)
    d.add_argument("--delta-d", type=float, default=15.0)
    d.add_argument("--delta-jump", type=float, default=0.5)
    d.add_argument("--method", choices=("binseg", "wbinseg"), default="binseg")
    d.add_argument("--zeta", type=float, default=None)
    d.add_argument("--m", type=int, default=None, help="wild interval count")
    d.add_argument("--noise", choices=("iid", "ma3", "ar1"), default="iid")
    d.add_argument("--keep-grid-points", action="store_true",
                   help="let refit windows include stage-1 grid positions")
    d.add_argument("--table", default=None, help="quantile table path; built if missing")
    d.add_argument("--table-reps", type=int, default=200_000)
    d.add_argument("--jobs", type=int, default=1)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--timings", action="store_true", help="include wall-clock timings")
    d.add_argument("--report", default=None, help="report path (default stdout)")
    d.set_defaults(func=_cmd_detect)

    pl = sub.add_parser("plan", help="stage sizing from (n, j, snr, alpha)")
    pl.add_argument("--n", type=int, required=True)
    pl.add_argument("--j", type=int, required=True)
    pl.add_argument("--snr", type=float, required=True)
    pl.add_argument("--alpha", type=float, default=0.01)
    pl.add_argument("--stages", type=int, choices=(2, 3, 4), default=2)
    pl.set_defaults(func=_cmd_plan)

    q = sub.add_parser("quantiles", help="build a walk-argmin quantile table")
    q.add_argument("--snr-grid", default="0.5:5.0:0.1", help="lo:hi:step")
    q.add_argument("--alphas", default="0.01,0.005,0.002", help="comma separated")
    q.add_argument("--reps", type=int, default=1_000_000)
    q.add_argument("--noise", choices=("iid", "ma3", "ar1"), default="iid")
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_quantiles)

    b = sub.add_parser("bench", help="runtime scaling against a full scan")
    b.add_argument("--grid", default=None, help="comma-separated lengths")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--snr", type=float, default=2.0)
    b.add_argument("--stages", type=int, choices=(2, 3, 4), default=2)
    b.add_argument("--methods", default="detect,full")
    b.add_argument("--table", default=None)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True, help="CSV output path")
    b.set_defaults(func=_cmd_bench)

    c = sub.add_parser("coverage", help="simultaneous interval calibration study")
    c.add_argument("--config", required=True, help="JSON with n, j, snr, ...")
    c.add_argument("--reps", type=int, default=500)
    c.add_argument("--nominal", default="0.90,0.95,0.98", help="comma separated")
    c.add_argument("--table", default=None)
    c.add_argument("--table-reps", type=int, default=200_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True, help="CSV output path")
    c.set_defaults(func=_cmd_coverage)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StridesegError as exc:
        _eprint(f"error: {exc}")
        return 1
    except OSError as exc:
        _eprint(f"io error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
