"""CUSUM scans, binary segmentation and its wild variant, and pruning steps.

All positions are 1-based indices into the scanned array. A returned change
position b means the mean jumps between b and b + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, log

import numpy as np

from .model import StridesegError

__all__ = [
    "SegmentationParams",
    "cusum",
    "binseg",
    "wbinseg",
    "wbs_interval_count",
    "estimate_levels",
    "drop_close",
    "drop_small_jump",
    "default_threshold",
]


@dataclass
class SegmentationParams:
    """Knobs for the stage-1 scan.

    zeta = None means the scan picks n_sub ** 0.2 at run time (the protocol
    default); method is "binseg" or "wbinseg"; m is the wild interval count
    (None = the count rule for spacing delta = n_sub / 10).
    """

    zeta: float | None = None
    method: str = "binseg"
    m: int | None = None
    include_full_interval: bool = True
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.method not in ("binseg", "wbinseg"):
            raise StridesegError(f"unknown segmentation method {self.method!r}")
        if self.zeta is not None and self.zeta <= 0:
            raise StridesegError("zeta must be positive")
        if self.m is not None and self.m < 1:
            raise StridesegError("interval count must be >= 1")


def _prefix(values: np.ndarray) -> np.ndarray:
    p = np.empty(values.size + 1, dtype=np.float64)
    p[0] = 0.0
    np.cumsum(values, out=p[1:])
    return p


def _cusum_all(prefix: np.ndarray, s: int, e: int) -> np.ndarray:
    # statistics for every split b in s..e-1 of the segment (s, e)
    n = e - s + 1
    b = np.arange(s, e, dtype=np.float64)
    len_l = b - s + 1
    len_r = n - len_l
    sum_l = prefix[s:e] - prefix[s - 1]
    sum_r = (prefix[e] - prefix[s - 1]) - sum_l
    return np.sqrt(len_r / (n * len_l)) * sum_l - np.sqrt(len_l / (n * len_r)) * sum_r


def cusum(values, s: int, b: int, e: int) -> float:
    """CUSUM statistic of the segment (s, e) at split b, 1-based, s <= b < e."""
    v = np.asarray(values, dtype=np.float64)
    if not 1 <= s <= b < e <= v.size:
        raise StridesegError(f"need 1 <= s <= b < e <= {v.size}")
    p = _prefix(v)
    n = e - s + 1
    len_l = b - s + 1
    len_r = e - b
    sum_l = p[b] - p[s - 1]
    sum_r = p[e] - p[b]
    return float(
        np.sqrt(len_r / (n * len_l)) * sum_l - np.sqrt(len_l / (n * len_r)) * sum_r
    )


def binseg(values, zeta: float, return_scores: bool = False):
    """Recursive CUSUM maximization with an acceptance threshold.

    Splits the segment at the argmax of |CUSUM| whenever that maximum is at
    least zeta, then recurses left and right of the split. Ties in the
    argmax go to the smallest split. Returns sorted accepted positions
    (and their scores when return_scores is set).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise StridesegError("values must be one-dimensional")
    if zeta <= 0:
        raise StridesegError("zeta must be positive")
    p = _prefix(v)
    found: list[tuple[int, float]] = []
    stack = [(1, v.size)] if v.size >= 2 else []
    while stack:
        s, e = stack.pop()
        if e - s + 1 < 2:
            continue
        stats = _cusum_all(p, s, e)
        pos = int(np.argmax(np.abs(stats)))
        score = abs(float(stats[pos]))
        if score >= zeta:
            b0 = s + pos
            found.append((b0, score))
            stack.append((s, b0))
            stack.append((b0 + 1, e))
    found.sort()
    taus = [b for b, _ in found]
    if return_scores:
        return taus, [sc for _, sc in found]
    return taus


def wbs_interval_count(n: int, delta: float) -> int:
    """Number of random intervals needed to hit every delta-spaced segment.

    ceil((3n/delta)^2 * log(n^2/delta)), natural log.
    """
    if n < 2 or delta <= 0 or delta > n:
        raise StridesegError("need n >= 2 and 0 < delta <= n")
    return int(ceil((3.0 * n / delta) ** 2 * log(n * n / delta)))


def _draw_intervals(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    # unordered endpoint pairs from {1..n}, degenerate pairs redrawn
    lo = rng.integers(1, n + 1, size=m)
    hi = rng.integers(1, n + 1, size=m)
    bad = lo == hi
    while np.any(bad):
        k = int(bad.sum())
        lo[bad] = rng.integers(1, n + 1, size=k)
        hi[bad] = rng.integers(1, n + 1, size=k)
        bad = lo == hi
    out = np.stack([np.minimum(lo, hi), np.maximum(lo, hi)], axis=1)
    return out.astype(np.int64)


def wbinseg(
    values,
    zeta: float,
    m: int,
    seed: int = 0,
    include_full_interval: bool = True,
):
    """Wild variant: maximize |CUSUM| over random sub-intervals.

    Each recursion considers the drawn intervals fully contained in the
    current segment (plus the segment itself when include_full_interval),
    takes the best split of the best interval, accepts it against zeta and
    recurses. Ties prefer earlier-drawn intervals, then smaller splits.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise StridesegError("values must be one-dimensional")
    if zeta <= 0:
        raise StridesegError("zeta must be positive")
    if m < 0 or (m == 0 and not include_full_interval):
        raise StridesegError("interval count must be >= 1 (0 needs the full interval)")
    n = v.size
    if n < 2:
        return []
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x17]))
    intervals = _draw_intervals(n, m, rng)
    p = _prefix(v)

    found: list[int] = []
    stack = [(1, n)]
    while stack:
        s, e = stack.pop()
        if e - s + 1 < 2:
            continue
        inside = (intervals[:, 0] >= s) & (intervals[:, 1] <= e)
        cands = [(int(a), int(b)) for a, b in intervals[inside]]
        if include_full_interval:
            cands.append((s, e))
        best_score = -1.0
        best_b = -1
        for a, b in cands:
            stats = _cusum_all(p, a, b)
            pos = int(np.argmax(np.abs(stats)))
            score = abs(float(stats[pos]))
            if score > best_score:
                best_score = score
                best_b = a + pos
        if best_b >= 0 and best_score >= zeta:
            found.append(best_b)
            stack.append((s, best_b))
            stack.append((best_b + 1, e))
    return sorted(found)


def estimate_levels(values, taus) -> list[float]:
    """Segment means between consecutive change positions (0 and n padded)."""
    v = np.asarray(values, dtype=np.float64)
    bounds = [0] + [int(t) for t in taus] + [v.size]
    for a, b in zip(bounds, bounds[1:]):
        if not 0 <= a < b <= v.size:
            raise StridesegError("change positions must be sorted inside [1, n-1]")
    p = _prefix(v)
    return [float((p[b] - p[a]) / (b - a)) for a, b in zip(bounds, bounds[1:])]


def drop_close(taus, delta: float) -> list[int]:
    """Drop a position when its gap to the last kept one is <= delta."""
    kept: list[int] = []
    for t in sorted(int(t) for t in taus):
        if not kept or t - kept[-1] > delta:
            kept.append(t)
    return kept


def drop_small_jump(values, taus, delta: float) -> list[int]:
    """Drop positions whose level jump is <= delta (inclusive).

    Levels come from the current candidate list; after a drop the left
    segment is merged and its mean recomputed before the next comparison.
    """
    v = np.asarray(values, dtype=np.float64)
    p = _prefix(v)
    kept: list[int] = []
    left_start = 0  # left segment of the next comparison starts after this
    out: list[int] = []
    cand = sorted(int(t) for t in taus)
    for i, t in enumerate(cand):
        right_end = cand[i + 1] if i + 1 < len(cand) else v.size
        if not 0 <= left_start < t < right_end <= v.size:
            raise StridesegError("change positions must be sorted inside [1, n-1]")
        left_mean = (p[t] - p[left_start]) / (t - left_start)
        right_mean = (p[right_end] - p[t]) / (right_end - t)
        if abs(right_mean - left_mean) <= delta:
            continue  # merged into the left segment; left_start unchanged
        out.append(t)
        left_start = t
    return out


def default_threshold(n_sub: int, c1: float = 1.0, xi_over_gamma: float = 0.2) -> float:
    """Threshold c1 * n_sub ** xi with xi at the midpoint of the valid band.

    The admissible exponent band is (xi_over_gamma, 1/2 - xi_over_gamma),
    nonempty only for xi_over_gamma < 1/4; its midpoint is always 1/4.
    """
    if n_sub < 2:
        raise StridesegError("n_sub must be >= 2")
    if c1 <= 0:
        raise StridesegError("c1 must be positive")
    if not 0 <= xi_over_gamma < 0.25:
        raise StridesegError(
            "xi_over_gamma must lie in [0, 0.25) for a nonempty exponent band"
        )
    return c1 * float(n_sub) ** 0.25
