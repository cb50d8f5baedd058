"""Argmin law of the two-sided drifted random walk, and its quantile tables.

The localization error of a dense refit around a change point converges to
L = argmin of X(t), where X(0) = 0 and, for unit-variance increments eps,

    X(t) = |t| * snr / 2 + eps_1 + ... + eps_t            (t > 0)
    X(t) = |t| * snr / 2 - (eps_{t+1} + ... + eps_0)      (t < 0)

with snr the jump-to-noise ratio. The increments are the local errors of
the sequence around the change point: independent N(0, 1) in the basic
model, or a stationary correlated stretch in the dependent-error model
(one doubly-infinite error sequence spans the boundary, so cross-boundary
covariance is kept). Everything here is Monte Carlo over that law plus
closed-form tail bounds; quantiles of |L| are the confidence interval unit.

Simulation is deterministic given (seed): replications are partitioned
into fixed blocks and block b draws from SeedSequence([*seed, b]), so
results are independent of execution order and of the number of workers.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import ceil, exp, log

import numpy as np
from scipy.linalg import cholesky_banded
from scipy.signal import lfilter

from .model import StridesegError

__all__ = [
    "NoiseSpec",
    "WalkSpec",
    "LDistTable",
    "simulate_argmin",
    "argmin_pmf",
    "tail_bound",
    "truncation_for",
    "quantile",
    "quantile_upper_bound",
    "build_table",
    "repair_monotone",
    "write_table",
    "read_table",
    "table_content_hash",
]

_BLOCK = 1 << 14


@dataclass(frozen=True)
class NoiseSpec:
    """Stationary error model for the walk increments.

    kind: "iid", "ma" (forward moving average with the given coeffs),
    "ar1" (autoregressive with coefficient phi, unit marginal variance),
    or "custom-acf" (autocovariances gamma_0..gamma_w; must be positive
    definite as a band matrix, checked by Cholesky factorization).
    All kinds are normalized to unit marginal variance.
    """

    kind: str = "iid"
    coeffs: tuple[float, ...] = ()
    phi: float = 0.0
    acf: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "iid":
            pass
        elif self.kind == "ma":
            if len(self.coeffs) < 1:
                raise StridesegError("ma noise needs at least one coefficient")
            if not any(c != 0 for c in self.coeffs):
                raise StridesegError("ma coefficients cannot all be zero")
        elif self.kind == "ar1":
            if not -1 < self.phi < 1:
                raise StridesegError("ar1 needs |phi| < 1")
        elif self.kind == "custom-acf":
            if len(self.acf) < 1 or self.acf[0] <= 0:
                raise StridesegError("custom-acf needs gamma_0 > 0")
        else:
            raise StridesegError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def iid(cls) -> "NoiseSpec":
        return cls("iid")

    @classmethod
    def ma(cls, coeffs) -> "NoiseSpec":
        return cls("ma", coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def ar1(cls, phi: float) -> "NoiseSpec":
        return cls("ar1", phi=float(phi))

    @classmethod
    def custom_acf(cls, acf) -> "NoiseSpec":
        return cls("custom-acf", acf=tuple(float(a) for a in acf))

    def dependence_range(self) -> int:
        """Lag beyond which autocorrelation is negligible."""
        if self.kind == "ma":
            return len(self.coeffs) - 1
        if self.kind == "ar1":
            if self.phi == 0.0:
                return 0
            return min(int(ceil(log(1e-12) / log(abs(self.phi)))), 10_000)
        if self.kind == "custom-acf":
            return len(self.acf) - 1
        return 0

    def label(self) -> str:
        if self.kind == "iid":
            return "iid"
        if self.kind == "ma":
            return "ma:" + ",".join(repr(c) for c in self.coeffs)
        if self.kind == "ar1":
            return f"ar1:{self.phi!r}"
        return "custom-acf:" + ",".join(repr(a) for a in self.acf)

    @classmethod
    def from_label(cls, text: str) -> "NoiseSpec":
        if text == "iid":
            return cls.iid()
        if text.startswith("ma:"):
            return cls.ma([float(c) for c in text[3:].split(",")])
        if text.startswith("ar1:"):
            return cls.ar1(float(text[4:]))
        if text.startswith("custom-acf:"):
            return cls.custom_acf([float(a) for a in text[11:].split(",")])
        raise StridesegError(f"cannot parse noise label {text!r}")

    def strip(self, rng: np.random.Generator, reps: int, length: int) -> np.ndarray:
        """(reps, length) stationary stretch with unit marginal variance."""
        if self.kind == "iid":
            return rng.standard_normal((reps, length))
        if self.kind == "ma":
            q = len(self.coeffs) - 1
            buf = rng.standard_normal((reps, length + q))
            out = np.zeros((reps, length))
            for k, c in enumerate(self.coeffs):
                if c != 0.0:
                    out += c * buf[:, k : k + length]
            out /= np.sqrt(sum(c * c for c in self.coeffs))
            return out
        if self.kind == "ar1":
            if self.phi == 0.0:
                return rng.standard_normal((reps, length))
            s = np.sqrt(1.0 - self.phi * self.phi)
            innov = rng.standard_normal((reps, length))
            # zi = phi * (stationary value one step before the window)
            zi = (self.phi * rng.standard_normal((reps, 1)))
            out, _ = lfilter([s], [1.0, -self.phi], innov, axis=1, zi=zi)
            return out
        # custom-acf
        w = len(self.acf) - 1
        ab = np.zeros((w + 1, length))
        for i, g in enumerate(self.acf):
            ab[i, : length - i if i else length] = g
        try:
            cb = cholesky_banded(ab, lower=True)
        except np.linalg.LinAlgError as exc:
            raise StridesegError(f"acf is not positive definite: {exc}") from exc
        except Exception as exc:  # scipy raises its own LinAlgError type
            raise StridesegError(f"acf is not positive definite: {exc}") from exc
        z = rng.standard_normal((reps, length))
        out = np.zeros((reps, length))
        for k in range(w + 1):
            band = cb[k, : length - k]
            if k == 0:
                out += band * z
            else:
                out[:, k:] += band * z[:, :-k]
        out /= np.sqrt(self.acf[0])
        return out


@dataclass(frozen=True)
class WalkSpec:
    """Truncated two-sided walk: snr > 0, argmin searched over [-m, m]."""

    snr: float
    m: int
    noise: NoiseSpec = field(default_factory=NoiseSpec.iid)

    def __post_init__(self) -> None:
        if self.snr <= 0:
            raise StridesegError("snr must be positive")
        if self.m < 0:
            raise StridesegError("truncation m must be >= 0")


def _seed_roots(seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def _block_counts(spec: WalkSpec, reps: int, roots: list[int], block: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(roots + [block]))
    m = spec.m
    counts = np.zeros(2 * m + 1, dtype=np.int64)
    if m == 0:
        counts[0] = reps
        return counts
    strip = spec.noise.strip(rng, reps, 2 * m + 1)
    drift = 0.5 * spec.snr * np.arange(1, m + 1, dtype=np.float64)

    right = np.cumsum(strip[:, m + 1 :], axis=1)
    right += drift
    t_r = np.argmin(right, axis=1)
    min_r = right[np.arange(reps), t_r]
    t_r += 1

    left = np.cumsum(strip[:, m:0:-1], axis=1)
    np.negative(left, out=left)
    left += drift
    t_l = np.argmin(left, axis=1)
    min_l = left[np.arange(reps), t_l]
    t_l += 1

    # argmin of (0 at t=0, left branch, right branch); ties prefer the
    # smallest |t|, then the negative side
    zero_wins = (min_l >= 0.0) & (min_r >= 0.0)
    left_wins = np.where(
        min_l != min_r, min_l < min_r, np.where(t_l != t_r, t_l < t_r, True)
    )
    arg = np.where(zero_wins, 0, np.where(left_wins, -t_l, t_r))
    counts += np.bincount(arg + m, minlength=2 * m + 1)
    return counts


def _block_star(args) -> np.ndarray:
    spec_tuple, reps, roots, block = args
    snr, m, label = spec_tuple
    spec = WalkSpec(snr, m, NoiseSpec.from_label(label))
    return _block_counts(spec, reps, roots, block)


def simulate_argmin(spec: WalkSpec, reps: int, seed, jobs: int = 1) -> np.ndarray:
    """Monte Carlo argmin counts over [-m, m] as an int64 array of length 2m+1.

    The blocks and their seeds are fixed by (reps, seed) alone; jobs only
    parallelizes execution, never changes the result.
    """
    if reps < 1:
        raise StridesegError("reps must be >= 1")
    roots = _seed_roots(seed)
    sizes = [_BLOCK] * (reps // _BLOCK)
    if reps % _BLOCK:
        sizes.append(reps % _BLOCK)
    if jobs <= 1 or len(sizes) <= 1:
        total = np.zeros(2 * spec.m + 1, dtype=np.int64)
        for b, size in enumerate(sizes):
            total += _block_counts(spec, size, roots, b)
        return total
    spec_tuple = (spec.snr, spec.m, spec.noise.label())
    args = [(spec_tuple, size, roots, b) for b, size in enumerate(sizes)]
    total = np.zeros(2 * spec.m + 1, dtype=np.int64)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for counts in pool.map(_block_star, args, chunksize=4):
            total += counts
    return total


def argmin_pmf(counts: np.ndarray) -> np.ndarray:
    c = np.asarray(counts, dtype=np.float64)
    s = c.sum()
    if s <= 0:
        raise StridesegError("empty counts")
    return c / s


def tail_bound(snr: float, m: int) -> float:
    """Upper bound on P[|L| > m]: 2 x^(m+1) / (1 - x), x = exp(-snr^2 / 8)."""
    if snr <= 0:
        raise StridesegError("snr must be positive")
    if m < 0:
        raise StridesegError("m must be >= 0")
    x = exp(-snr * snr / 8.0)
    return min(1.0, 2.0 * x ** (m + 1) / (1.0 - x))


def truncation_for(snr: float, tol: float) -> int:
    """Smallest m with tail_bound(snr, m) <= tol."""
    if not 0 < tol:
        raise StridesegError("tolerance must be positive")
    if tail_bound(snr, 0) <= tol:
        return 0
    x = exp(-snr * snr / 8.0)
    # solve 2 x^(m+1) / (1-x) <= tol
    m = int(ceil(log(tol * (1.0 - x) / 2.0) / log(x) - 1.0))
    m = max(m, 0)
    while tail_bound(snr, m) > tol:
        m += 1
    while m > 0 and tail_bound(snr, m - 1) <= tol:
        m -= 1
    return m


def _abs_cum_counts(counts: np.ndarray, m: int) -> np.ndarray:
    folded = counts[m : 2 * m + 1].astype(np.int64).copy()
    if m > 0:
        folded[1:] += counts[m - 1 :: -1]
    return np.cumsum(folded)


def _quantile_from_counts(counts: np.ndarray, m: int, q: float, reps: int) -> int:
    cum = _abs_cum_counts(counts, m)
    k = int(np.searchsorted(cum, q * reps, side="left"))
    return min(k, m)


def quantile(
    snr: float,
    q: float,
    reps: int,
    seed,
    noise: NoiseSpec | None = None,
    jobs: int = 1,
) -> int:
    """Monte Carlo q-quantile of |L| at the given snr.

    Truncation is chosen so the discarded tail mass is at most (1 - q)/100,
    two orders below the quantile's own resolution. reps must be at least
    1e5, and q must be resolvable: 1 - q >= 10/reps.
    """
    if not 0 < q < 1:
        raise StridesegError("q must be in (0, 1)")
    if reps < 100_000:
        raise StridesegError("quantile needs reps >= 100000")
    if (1.0 - q) < 10.0 / reps:
        raise StridesegError(
            f"q={q} too close to 1 for reps={reps}; need 1-q >= 10/reps"
        )
    noise = noise or NoiseSpec.iid()
    m = truncation_for(snr, (1.0 - q) / 100.0)
    counts = simulate_argmin(WalkSpec(snr, m, noise), reps, seed, jobs=jobs)
    return _quantile_from_counts(counts, m, q, reps)


def quantile_upper_bound(snr: float, j: int, alpha: float) -> int:
    """Closed-form bound on the 1 - alpha/j quantile of |L| at the given snr.

    ceil((1/B) * log(A * j / alpha)) with A = 2x/(1-x), B = snr^2/8,
    x = exp(-B). Used by the planner; no simulation involved.
    """
    if snr <= 0:
        raise StridesegError("snr must be positive")
    if j < 1:
        raise StridesegError("j must be >= 1")
    if not 0 < alpha < 1:
        raise StridesegError("alpha must be in (0, 1)")
    b = snr * snr / 8.0
    x = exp(-b)
    a = 2.0 * x / (1.0 - x)
    return max(0, int(ceil(log(a * j / alpha) / b)))


@dataclass
class LDistTable:
    """Quantile table: rows are snr grid points, columns are alpha levels.

    qvals[i, k] is the Monte Carlo (1 - alphas[k]) quantile of |L| at
    snr_grid[i], after monotone repair. raw_qvals keeps the pre-repair
    values in memory only (not serialized).
    """

    snr_grid: list[float]
    alphas: list[float]
    qvals: np.ndarray
    reps: int
    seed: int
    noise: NoiseSpec = field(default_factory=NoiseSpec.iid)
    raw_qvals: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.qvals = np.asarray(self.qvals, dtype=np.int64)
        if len(self.snr_grid) < 1 or len(self.alphas) < 1:
            raise StridesegError("table needs at least one snr and one alpha")
        if any(b <= a for a, b in zip(self.snr_grid, self.snr_grid[1:])):
            raise StridesegError("snr grid must be strictly increasing")
        if self.snr_grid[0] <= 0:
            raise StridesegError("snr grid must be positive")
        if any(not 0 < a < 1 for a in self.alphas):
            raise StridesegError("alphas must be in (0, 1)")
        if self.qvals.shape != (len(self.snr_grid), len(self.alphas)):
            raise StridesegError("qvals shape does not match grid x alphas")

    def has_alpha(self, alpha: float) -> bool:
        return any(abs(a - alpha) <= 1e-9 * max(1.0, abs(alpha)) for a in self.alphas)

    def floor_snr(self, snr: float) -> float:
        """Largest grid point <= snr (the conservative lookup direction)."""
        grid = np.asarray(self.snr_grid)
        i = int(np.searchsorted(grid, snr * (1 + 1e-12), side="right")) - 1
        if i < 0:
            raise StridesegError(
                f"snr {snr} below table grid minimum {self.snr_grid[0]}"
            )
        return float(grid[min(i, grid.size - 1)])

    def lookup(self, snr: float, alpha: float) -> int:
        grid = np.asarray(self.snr_grid)
        i = int(np.searchsorted(grid, snr * (1 + 1e-12), side="right")) - 1
        if i < 0:
            raise StridesegError(
                f"snr {snr} below table grid minimum {self.snr_grid[0]}"
            )
        i = min(i, grid.size - 1)
        for k, a in enumerate(self.alphas):
            if abs(a - alpha) <= 1e-9 * max(1.0, abs(alpha)):
                return int(self.qvals[i, k])
        raise StridesegError(f"table has no column for alpha={alpha}")


def repair_monotone(qvals: np.ndarray) -> np.ndarray:
    """Enforce non-increasing columns along increasing snr (running minimum)."""
    out = np.asarray(qvals, dtype=np.int64).copy()
    np.minimum.accumulate(out, axis=0, out=out)
    return out


def build_table(
    snr_grid,
    alphas,
    reps: int,
    seed: int,
    noise: NoiseSpec | None = None,
    jobs: int = 1,
) -> LDistTable:
    """Simulate the |L| quantiles on a grid; one simulation serves all alphas.

    Truncation per grid point targets tail mass min(alphas)/100. Columns are
    monotone-repaired; the raw values stay on raw_qvals for inspection.
    """
    noise = noise or NoiseSpec.iid()
    grid = [float(s) for s in snr_grid]
    alphas = [float(a) for a in alphas]
    if any(not 0 < a < 1 for a in alphas):
        raise StridesegError("alphas must be in (0, 1)")
    for a in alphas:
        if (a) < 10.0 / reps:
            raise StridesegError(
                f"alpha={a} not resolvable with reps={reps}; need alpha >= 10/reps"
            )
    if reps < 100_000:
        raise StridesegError("build_table needs reps >= 100000")
    tol = min(alphas) / 100.0
    raw = np.zeros((len(grid), len(alphas)), dtype=np.int64)
    for gi, snr in enumerate(grid):
        m = truncation_for(snr, tol)
        counts = simulate_argmin(
            WalkSpec(snr, m, noise), reps, [int(seed), gi], jobs=jobs
        )
        for k, a in enumerate(alphas):
            raw[gi, k] = _quantile_from_counts(counts, m, 1.0 - a, reps)
    return LDistTable(
        snr_grid=grid,
        alphas=alphas,
        qvals=repair_monotone(raw),
        reps=int(reps),
        seed=int(seed),
        noise=noise,
        raw_qvals=raw,
    )


def write_table(table: LDistTable, path) -> None:
    lines = [
        f"#reps={table.reps}",
        f"#seed={table.seed}",
        "#alphas=" + ",".join(repr(a) for a in table.alphas),
        f"#noise={table.noise.label()}",
    ]
    for i, snr in enumerate(table.snr_grid):
        row = [repr(float(snr))] + [str(int(v)) for v in table.qvals[i]]
        lines.append("\t".join(row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table(path) -> LDistTable:
    headers: dict[str, str] = {}
    grid: list[float] = []
    rows: list[list[int]] = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                headers[key] = val
                continue
            parts = line.split("\t")
            grid.append(float(parts[0]))
            rows.append([int(v) for v in parts[1:]])
    for need in ("reps", "seed", "alphas"):
        if need not in headers:
            raise StridesegError(f"table file missing #{need}= header")
    alphas = [float(a) for a in headers["alphas"].split(",")]
    noise = NoiseSpec.from_label(headers.get("noise", "iid"))
    if not rows:
        raise StridesegError("table file has no rows")
    if any(len(r) != len(alphas) for r in rows):
        raise StridesegError("table row width does not match #alphas header")
    return LDistTable(
        snr_grid=grid,
        alphas=alphas,
        qvals=np.asarray(rows, dtype=np.int64),
        reps=int(headers["reps"]),
        seed=int(headers["seed"]),
        noise=noise,
    )


def table_content_hash(snr_grid, alphas, reps: int, seed: int, noise=None) -> str:
    """Stable hash naming a table build; used for cache file names."""
    noise = noise or NoiseSpec.iid()
    text = "|".join(
        [
            ",".join(repr(float(s)) for s in snr_grid),
            ",".join(repr(float(a)) for a in alphas),
            str(int(reps)),
            str(int(seed)),
            noise.label(),
        ]
    )
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]
