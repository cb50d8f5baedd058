"""Staged detection: sparse scan, offset recalibration, dense local refits.

Stage 1 reads every g-th position (g = floor(n / n1)), segments that
subsample, and prunes. Calibration rereads an offset subsample around each
estimate and refits with the estimated levels, which puts the estimate's
deviation on a known quantile scale. Later stages read shrinking windows
around each calibrated estimate (strided for the middle stages of a 3- or
4-stage run, dense for the last) and refit. Confidence intervals come from
Monte Carlo quantiles of the walk argmin law at the estimated
signal-to-noise ratio, floored to the table grid.

Total reads are sub-linear: roughly 2 n1 + sum over change points of the
window sizes, which the planner in plan_allocation predicts and minimizes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np
from scipy.special import ndtri

from .model import (
    ChangePointEstimate,
    DetectionReport,
    StridesegError,
)
from .rwdist import NoiseSpec, quantile, quantile_upper_bound
from .segmentation import (
    SegmentationParams,
    binseg,
    drop_close,
    drop_small_jump,
    estimate_levels,
    wbinseg,
    wbs_interval_count,
)
from .seqio import MemorySeries
from .stump import fit_stump_known_levels

__all__ = [
    "PipelineConfig",
    "StagePlan",
    "QuantileSource",
    "AnalyticQuantileSource",
    "detect",
    "estimate_sigma",
    "confidence_intervals",
    "plan_allocation",
    "total_points_two_stage",
]

_QNORM_3_4 = float(ndtri(0.75))


@dataclass
class PipelineConfig:
    """Detection knobs.

    n1 is the stage-1 subsample size (default ceil(50 sqrt(n)); gamma gives
    n1 = ceil(n ** gamma) instead). k_mult widens refit windows relative to
    the certified interval and must exceed 1. alpha is the simultaneous
    confidence level for reported intervals; alpha_window sizes the refit
    windows. delta_d and delta_jump are the pruning thresholds, applied on
    the subsample scale after segmentation and again after calibration.
    omit_stage1_points keeps refit windows off the stage-1 grid (the
    independent-errors regime); dependent-error runs set it False and pass
    the matching noise model.
    """

    stages: int = 2
    n1: int | None = None
    gamma: float | None = None
    k_mult: float = 1.25
    alpha: float = 0.01
    alpha_window: float = 0.01
    delta_d: float = 15.0
    delta_jump: float = 0.5
    snr_floor: float = 0.5
    omit_stage1_points: bool = True
    seg: SegmentationParams = field(default_factory=SegmentationParams)
    noise: NoiseSpec = field(default_factory=NoiseSpec.iid)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 2 <= self.stages <= 4:
            raise StridesegError("stages must be 2, 3 or 4")
        if not 0 < self.alpha < 1 or not 0 < self.alpha_window < 1:
            raise StridesegError("alpha levels must be in (0, 1)")
        if self.k_mult <= 1:
            raise StridesegError("k_mult must be > 1")
        if self.n1 is not None and self.n1 < 2:
            raise StridesegError("n1 must be >= 2")
        if self.gamma is not None and not 0 < self.gamma < 1:
            raise StridesegError("gamma must be in (0, 1)")
        if self.snr_floor <= 0:
            raise StridesegError("snr_floor must be positive")
        if self.delta_d < 0 or self.delta_jump < 0:
            raise StridesegError("pruning thresholds must be >= 0")

    def resolve_n1(self, n: int) -> int:
        if self.n1 is not None:
            return int(self.n1)
        if self.gamma is not None:
            return int(ceil(n ** self.gamma))
        return int(ceil(50.0 * sqrt(n)))


@dataclass
class StagePlan:
    """Planner output: subsample sizes and the predicted read count."""

    n: int
    j: int
    snr: float
    alpha: float
    stages: int
    q: int
    s: int
    n1: int
    n2: int | None
    n3: int | None
    predicted_total: int
    predicted_fraction: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "j": self.j,
            "snr": self.snr,
            "alpha": self.alpha,
            "stages": self.stages,
            "q": self.q,
            "s": self.s,
            "n1": self.n1,
            "n2": self.n2,
            "n3": self.n3,
            "predicted_total": self.predicted_total,
            "predicted_fraction": self.predicted_fraction,
        }


def total_points_two_stage(n: int, s: int, n1: int) -> float:
    """Objective of the two-stage read budget at subsample size n1."""
    if n1 < 1 or n1 > n:
        raise StridesegError("need 1 <= n1 <= n")
    return 2.0 * n1 + 2.0 * s * n / n1


def plan_allocation(
    n: int, j: int, snr: float, alpha: float, stages: int = 2
) -> StagePlan:
    """Closed-form stage sizing from upper bounds on (j, snr, alpha).

    q comes from the analytic quantile bound, s = j * (q + 1); the n1 (and
    n2, n3) formulas minimize the predicted total read count. Errors out
    when the prediction is not sub-linear (predicted_total >= n).
    """
    if n < 4:
        raise StridesegError("n too small to plan")
    if not 2 <= stages <= 4:
        raise StridesegError("stages must be 2, 3 or 4")
    q = quantile_upper_bound(snr, j, alpha)
    s = j * (q + 1)
    if stages == 2:
        n1 = int(ceil(sqrt(n * s)))
        n2 = n3 = None
        total = 2.0 * n1 + 2.0 * s * n / max(n1, 1)
    elif stages == 3:
        n1 = int(ceil(n ** (1.0 / 3.0) * s ** (2.0 / 3.0)))
        n2 = int(ceil(2.0 * n ** (1.0 / 3.0) * (q + 1) / s ** (1.0 / 3.0)))
        n3 = None
        total = 2.0 * n1 + j * n2 + 4.0 * (n / n1) * j * (q + 1) ** 2 / n2
    else:
        n1 = int(ceil(n ** 0.25 * s ** 0.75))
        n2 = n3 = int(ceil(2.0 * (q + 1) * (n / s) ** 0.25))
        total = 2.0 * n1 + j * n2 + j * n3 + 8.0 * j * (q + 1) ** 3 * (n / n1) / (n2 * n3)
    predicted = int(round(total))
    if predicted >= n:
        raise StridesegError(
            f"predicted read count {predicted} is not sub-linear for n={n}; "
            "lower j, raise snr, or use fewer stages"
        )
    return StagePlan(
        n=int(n),
        j=int(j),
        snr=float(snr),
        alpha=float(alpha),
        stages=int(stages),
        q=int(q),
        s=int(s),
        n1=n1,
        n2=n2,
        n3=n3,
        predicted_total=predicted,
        predicted_fraction=predicted / n,
    )


class QuantileSource:
    """Quantiles of |L| by table lookup, with a simulation fallback.

    snr values are floored to the table grid (or to a mesh when no table is
    given): the argmin law spreads as snr falls, so flooring is the
    conservative direction. Missing (snr, alpha) combinations are simulated
    on demand with seeds derived from (seed, snr, alpha), then cached.
    """

    def __init__(
        self,
        table=None,
        noise: NoiseSpec | None = None,
        reps: int = 200_000,
        seed: int = 0,
        mesh: float = 0.1,
        grid_min: float = 0.5,
        grid_max: float = 5.0,
        jobs: int = 1,
    ) -> None:
        self.table = table
        self.noise = noise or (table.noise if table is not None else NoiseSpec.iid())
        self.reps = int(table.reps if table is not None else reps)
        self.seed = int(seed)
        self.mesh = float(mesh)
        self.grid_min = float(grid_min)
        self.grid_max = float(grid_max)
        self.jobs = jobs
        self._cache: dict[tuple[float, float], int] = {}

    def floor_snr(self, snr: float) -> float:
        if self.table is not None:
            return self.table.floor_snr(snr)
        f = np.floor(snr / self.mesh + 1e-9) * self.mesh
        return float(np.round(min(max(f, self.grid_min), self.grid_max), 9))

    def q(self, snr: float, alpha: float) -> int:
        snr_f = self.floor_snr(snr)
        if self.table is not None and self.table.has_alpha(alpha):
            return self.table.lookup(snr_f, alpha)
        key = (snr_f, round(alpha, 12))
        if key not in self._cache:
            seed = [self.seed, int(round(snr_f * 1e6)), int(round(alpha * 1e9))]
            self._cache[key] = quantile(
                snr_f, 1.0 - alpha, self.reps, seed, noise=self.noise, jobs=self.jobs
            )
        return self._cache[key]


class AnalyticQuantileSource:
    """Closed-form quantile bound instead of simulation.

    Wider than the Monte Carlo quantile (it is an upper bound), so
    intervals stay valid; useful where table setup cost must not enter,
    e.g. timing comparisons. Only supports independent errors.
    """

    def __init__(self, snr_floor: float = 0.5) -> None:
        self.snr_floor = float(snr_floor)

    def floor_snr(self, snr: float) -> float:
        return max(float(snr), self.snr_floor)

    def q(self, snr: float, alpha: float) -> int:
        return quantile_upper_bound(max(float(snr), self.snr_floor), 1, alpha)


def _median_abs_diff_sigma(values: np.ndarray, lag: int = 1) -> float:
    if values.size <= lag:
        return 0.0
    d = values[lag:] - values[:-lag]
    return float(np.median(np.abs(d)) / (sqrt(2.0) * _QNORM_3_4))


def estimate_sigma(series, budget: int = 100_000, lag: int = 1) -> float:
    """Noise scale from median absolute differences of a strided probe.

    Reads about `budget` positions evenly strided across the sequence and
    scales the median absolute lag-difference to a Gaussian sd. Differences
    cancel the piecewise-constant signal except at the few probe steps that
    straddle a jump, which the median ignores. Raises on zero dispersion.
    """
    if budget < 100:
        raise StridesegError("sigma estimation needs a budget of at least 100")
    if lag < 1:
        raise StridesegError("lag must be >= 1")
    series = _as_series(series)
    stride = max(1, series.n // int(budget))
    pos = np.arange(stride, series.n + 1, stride, dtype=np.int64)
    if pos.size < 2 + lag:
        raise StridesegError("sequence too short for the probe")
    v = series.read_at(pos)
    sigma = _median_abs_diff_sigma(v, lag)
    if sigma == 0.0:
        raise StridesegError("zero dispersion: the probe differences are all zero")
    return sigma


def confidence_intervals(
    taus,
    snrs,
    j_hat: int,
    alpha: float,
    source: QuantileSource,
    snr_floor: float = 0.5,
    scale: int = 1,
    slack: int = 0,
) -> list[tuple[int, int]]:
    """Simultaneous intervals [tau +- (Q(1 - alpha/j_hat) + slack) * scale].

    The default scale/slack give the bare quantile half-width, which is what
    the pipeline reports around its final estimates; scale = stride and
    slack = 1 recover the coarse stage-one localization intervals.
    """
    if j_hat < 1:
        return []
    out = []
    level = alpha / j_hat
    for tau, snr in zip(taus, snrs):
        q = source.q(max(float(snr), snr_floor), level)
        half = (q + slack) * scale
        out.append((int(tau - half), int(tau + half)))
    return out


def _as_series(series):
    if isinstance(series, np.ndarray):
        return MemorySeries(series)
    return series


@dataclass
class _Stage1:
    n1: int
    g: int
    n_star: int
    z: np.ndarray
    sigma_hat: float
    zeta: float
    taus_sub: list[int]
    levels: list[float]


@dataclass
class _CalPoint:
    tau1: int          # calibrated full-scale estimate
    re_index: int      # position on the stride-unit scale
    level_left: float
    level_right: float
    snr_raw: float | None
    q_ci: int
    q_win: int


def _stage1(series, cfg: PipelineConfig) -> _Stage1:
    n = series.n
    n1 = cfg.resolve_n1(n)
    if n1 >= n:
        raise StridesegError(f"n1={n1} must be below n={n}")
    g = n // n1
    if g < 2:
        raise StridesegError(
            f"stride floor(n/n1) = {g} is below 2; the subsample would not be sparse"
        )
    n_star = n // g
    if n_star < 10:
        raise StridesegError(f"stage-1 subsample has only {n_star} points; need >= 10")
    pos = g * np.arange(1, n_star + 1, dtype=np.int64)
    z = series.read_at(pos)

    dep = cfg.noise.dependence_range()
    lag = max(1, int(ceil((dep + 1) / g))) if dep >= g else 1
    sigma_hat = _median_abs_diff_sigma(z, lag)

    zeta = cfg.seg.zeta if cfg.seg.zeta is not None else float(n_star) ** 0.2
    if cfg.seg.method == "binseg":
        taus = binseg(z, zeta)
    else:
        m = cfg.seg.m or wbs_interval_count(n_star, max(2.0, n_star / 10.0))
        seed = cfg.seg.seed if cfg.seg.seed is not None else cfg.seed
        taus = wbinseg(
            z, zeta, m, seed=seed, include_full_interval=cfg.seg.include_full_interval
        )
    taus = drop_close(taus, cfg.delta_d)
    taus = drop_small_jump(z, taus, cfg.delta_jump)
    levels = estimate_levels(z, taus)
    return _Stage1(n1, g, n_star, z, sigma_hat, zeta, taus, levels)


def _grid_splits(z: np.ndarray, re_positions: list[int], n_star: int) -> list[int]:
    """Carry offset-scale splits back onto the plain grid.

    The grid point sharing a split's index sits half a stride after the
    offset point, so it can land on either side of the change; its value
    picks the side it joins, keeping the refreshed segment means clean.
    """
    splits: list[int] = []
    for i, r in enumerate(re_positions):
        lo = re_positions[i - 1] if i > 0 else 0
        hi = re_positions[i + 1] - 1 if i + 1 < len(re_positions) else n_star
        left = z[lo:r - 1]
        right = z[r:hi]
        t = r
        if left.size and right.size:
            zv = z[r - 1]
            if abs(zv - float(left.mean())) > abs(zv - float(right.mean())):
                t = r - 1
        t = max(t, 1)
        if splits and t <= splits[-1]:
            t = splits[-1] + 1
        splits.append(t)
    return splits


def _calibrate(series, s1: _Stage1, cfg: PipelineConfig, source: QuantileSource):
    """Offset-subsample refit, second pruning pass, and quantile sizing."""
    g, n_star = s1.g, s1.n_star
    k_n = g // 2
    bounds = [0] + s1.taus_sub + [n_star]
    re_positions: list[int] = []
    for i, t_sub in enumerate(s1.taus_sub):
        d_hat = min(t_sub - bounds[i], bounds[i + 2] - t_sub)
        lo = max(1, t_sub - d_hat + 1)
        hi = min(n_star, t_sub + d_hat - 1)
        idx = np.arange(lo, hi + 1, dtype=np.int64)
        v = series.read_at(idx * g - k_n)
        fit = fit_stump_known_levels(v, idx, s1.levels[i], s1.levels[i + 1])
        re_positions.append(fit.split)

    # prune again on the recalibrated positions, then refresh the levels
    re_positions = sorted(set(min(max(r, 1), n_star - 1) for r in re_positions))
    re_positions = drop_close(re_positions, cfg.delta_d)
    z_splits = _grid_splits(s1.z, re_positions, n_star)
    survivors = set(drop_small_jump(s1.z, z_splits, cfg.delta_jump))
    kept = [i for i, t in enumerate(z_splits) if t in survivors]
    re_positions = [re_positions[i] for i in kept]
    z_splits = [z_splits[i] for i in kept]
    j_hat = len(re_positions)
    if j_hat == 0:
        return [], k_n
    levels = estimate_levels(s1.z, z_splits)

    noiseless = s1.sigma_hat == 0.0
    points: list[_CalPoint] = []
    for i, r in enumerate(re_positions):
        jump = abs(levels[i + 1] - levels[i])
        if noiseless:
            snr_raw = None
            q_ci = q_win = 0
        else:
            snr_raw = jump / s1.sigma_hat
            snr_lookup = max(snr_raw, cfg.snr_floor)
            q_ci = source.q(snr_lookup, cfg.alpha / j_hat)
            q_win = source.q(snr_lookup, cfg.alpha_window / j_hat)
        points.append(
            _CalPoint(
                tau1=r * g - k_n,
                re_index=r,
                level_left=levels[i],
                level_right=levels[i + 1],
                snr_raw=snr_raw,
                q_ci=q_ci,
                q_win=q_win,
            )
        )
    return points, k_n


def _window_positions(lo: int, hi: int, step: int, g: int, omit: bool) -> np.ndarray:
    pos = np.arange(lo, hi + 1, step, dtype=np.int64)
    if omit:
        keep = pos % g != 0
        if step > 1:
            moved = pos[~keep] + 1
            pos = np.unique(np.concatenate([pos[keep], moved[moved <= hi]]))
        else:
            pos = pos[keep]
    if pos.size == 0:
        pos = np.arange(lo, hi + 1, dtype=np.int64)
        if omit:
            pos = pos[pos % g != 0]
    return pos


def _refine(series, s1: _Stage1, points: list[_CalPoint], cfg: PipelineConfig):
    """Middle-stage strided refits and the final dense fit per change point."""
    n = series.n
    g = s1.g
    total_s = sum(p.q_ci + 1 for p in points)
    estimates: list[ChangePointEstimate] = []

    centers = [p.tau1 for p in points]
    for i, p in enumerate(points):
        half = int(ceil(cfg.k_mult * (p.q_win + 1) * g))
        lo = max(1, p.tau1 - half)
        hi = min(n, p.tau1 + half)
        if i > 0:
            lo = max(lo, (centers[i - 1] + centers[i]) // 2 + 1)
        if i + 1 < len(points):
            hi = min(hi, (centers[i] + centers[i + 1]) // 2)

        center = p.tau1
        cur_g = g
        for mid in range(cfg.stages - 2):
            if cur_g <= 1 or hi - lo + 1 <= 2:
                break
            if cfg.stages == 3:
                n_mid = 2.0 * n ** (1.0 / 3.0) * (p.q_ci + 1) / max(total_s, 1) ** (1.0 / 3.0)
            else:
                n_mid = 2.0 * (p.q_ci + 1) * (n / max(total_s, 1)) ** 0.25
            n_mid = max(4, int(ceil(n_mid)))
            step = max(1, (hi - lo + 1) // n_mid)
            if step <= 1:
                break
            pos = _window_positions(lo, hi, step, g, cfg.omit_stage1_points)
            v = series.read_at(pos)
            fit = fit_stump_known_levels(v, pos, p.level_left, p.level_right)
            center = fit.split
            cur_g = step
            half = int(ceil(cfg.k_mult * (p.q_win + 1) * cur_g))
            lo = max(lo, center - half)
            hi = min(hi, center + half)

        pos = _window_positions(lo, hi, 1, g, cfg.omit_stage1_points)
        v = series.read_at(pos)
        fit = fit_stump_known_levels(v, pos, p.level_left, p.level_right)
        tau = fit.split
        if cfg.omit_stage1_points and tau + 1 <= hi and (tau + 1) % g == 0:
            # the position right of the split sits on the stage-1 grid; its
            # cached value says which side it belongs to
            zi = (tau + 1) // g
            if 1 <= zi <= s1.n_star:
                zv = s1.z[zi - 1]
                if abs(zv - p.level_left) < abs(zv - p.level_right):
                    tau += 1

        ci_lo = max(1, tau - p.q_ci)
        ci_hi = min(n, tau + p.q_ci)
        estimates.append(
            ChangePointEstimate(
                tau=int(tau),
                ci_lo=int(ci_lo),
                ci_hi=int(ci_hi),
                level_left=p.level_left,
                level_right=p.level_right,
                snr=p.snr_raw,
            )
        )
    return estimates


def _config_echo(cfg: PipelineConfig, s1: _Stage1 | None, n: int) -> dict:
    echo = {
        "stages": cfg.stages,
        "n": n,
        "n1": None if s1 is None else s1.n1,
        "stride": None if s1 is None else s1.g,
        "gamma": cfg.gamma,
        "k_mult": cfg.k_mult,
        "alpha": cfg.alpha,
        "alpha_window": cfg.alpha_window,
        "delta_d": cfg.delta_d,
        "delta_jump": cfg.delta_jump,
        "snr_floor": cfg.snr_floor,
        "omit_stage1_points": cfg.omit_stage1_points,
        "noise": cfg.noise.label(),
        "seed": cfg.seed,
        "seg_method": cfg.seg.method,
        "zeta": None if s1 is None else s1.zeta,
    }
    return echo


def detect(series, cfg: PipelineConfig, table=None, source: QuantileSource | None = None) -> DetectionReport:
    """Run the staged pipeline and report estimates with intervals.

    series is a 1-d array or an accessor from seqio. Read accounting is
    reset at entry so touched counts describe this run alone.
    """
    series = _as_series(series)
    series.reset_accounting()
    if source is None:
        source = QuantileSource(table=table, noise=cfg.noise, seed=cfg.seed)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    s1 = _stage1(series, cfg)
    timings["stage1_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    points, _ = _calibrate(series, s1, cfg, source)
    timings["calibrate_ms"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    estimates = _refine(series, s1, points, cfg) if points else []
    timings["refine_ms"] = (time.perf_counter() - t0) * 1e3

    touched = series.distinct_touched()
    return DetectionReport(
        j_hat=len(estimates),
        sigma_hat=s1.sigma_hat,
        estimates=estimates,
        touched_indices=touched,
        touched_fraction=touched / series.n,
        timings_ms=timings,
        config_echo=_config_echo(cfg, s1, series.n),
    )
