"""Least-squares single-split fits on (possibly gapped) index sets.

Both fits return the last position at the left level. Candidate splits are
the observed positions themselves, so a gapped window (one with omitted
grid positions) is handled without interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import StridesegError

__all__ = ["StumpFit", "fit_stump_full", "fit_stump_known_levels"]


@dataclass(frozen=True)
class StumpFit:
    split: int            # last position assigned to the left level
    level_left: float
    level_right: float
    sse: float


def _as_positions(values: np.ndarray, positions) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise StridesegError("values must be one-dimensional")
    if positions is None:
        p = np.arange(1, v.size + 1, dtype=np.int64)
    else:
        p = np.asarray(positions, dtype=np.int64)
        if p.shape != v.shape:
            raise StridesegError("positions and values must have equal length")
        if p.size > 1 and np.any(np.diff(p) <= 0):
            raise StridesegError("positions must be strictly increasing")
    return v, p


def fit_stump_full(values, positions=None) -> StumpFit:
    """Fit means on both sides of every candidate split, keep the best.

    The split index t ranges over positions[0] .. positions[-2] so both
    sides stay nonempty; needs at least two observations. Ties go to the
    smallest split position.
    """
    v, p = _as_positions(values, positions)
    if v.size < 2:
        raise StridesegError("fit_stump_full needs at least 2 observations")

    cs = np.cumsum(v)
    cs2 = np.cumsum(v * v)
    total = cs[-1]
    total2 = cs2[-1]
    n = v.size

    n_left = np.arange(1, n, dtype=np.float64)
    sum_left = cs[:-1]
    sum_right = total - sum_left
    n_right = n - n_left
    # SSE(t) = sum(v^2) - sum_left^2/n_left - sum_right^2/n_right
    sse = total2 - sum_left * sum_left / n_left - sum_right * sum_right / n_right
    best = int(np.argmin(sse))
    return StumpFit(
        split=int(p[best]),
        level_left=float(sum_left[best] / n_left[best]),
        level_right=float(sum_right[best] / n_right[best]),
        sse=float(max(sse[best], 0.0)),
    )


def fit_stump_known_levels(values, positions, nu_left, nu_right) -> StumpFit:
    """Best split when both levels are known.

    The split ranges over every observed position including the last, so an
    all-left assignment is allowed (the change may sit right of the window).
    Ties go to the smallest split position. Equal levels are rejected: the
    split would be unidentifiable.
    """
    if nu_left == nu_right:
        raise StridesegError("known-levels fit needs distinct levels")
    v, p = _as_positions(values, positions)
    if v.size < 1:
        raise StridesegError("fit_stump_known_levels needs at least 1 observation")

    dl = v - nu_left
    dr = v - nu_right
    base = float(np.sum(dr * dr))          # everything assigned right
    # moving position i to the left side changes SSE by dl_i^2 - dr_i^2
    delta = np.cumsum(dl * dl - dr * dr)
    sse = base + delta
    best = int(np.argmin(sse))
    return StumpFit(
        split=int(p[best]),
        level_left=float(nu_left),
        level_right=float(nu_right),
        sse=float(max(sse[best], 0.0)),
    )
