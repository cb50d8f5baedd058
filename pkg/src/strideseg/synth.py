"""Synthetic sequence generation: random configs, noise kinds, emulations.

Spacings are a guaranteed floor plus a multinomial spread over random
composition weights; levels follow a Markov chain whose jumps are at least
min_jump and whose density decays exponentially away from the previous
level, truncated to [-level_max, level_max].
"""

from __future__ import annotations

from math import exp, sqrt

import numpy as np
from scipy.signal import lfilter

from .model import PiecewiseConfig, StridesegError, build_signal
from .rwdist import NoiseSpec

__all__ = [
    "MA3_COEFFS",
    "AR1_PHI",
    "gen_config",
    "alternating_config",
    "gen_series",
    "noise_spec_for",
    "emulation_config",
]

MA3_COEFFS = (1.0, 0.5, 0.25)
AR1_PHI = 0.2

_NOISE_KINDS = ("none", "iid", "ma3", "ar1", "hetero")


def _composition_weights(rng: np.random.Generator, cells: int) -> np.ndarray:
    u = np.sort(rng.uniform(size=cells))
    p = np.diff(np.concatenate([[0.0], u]))
    total = p.sum()
    if total <= 0:
        return np.full(cells, 1.0 / cells)
    return p / total


def _sample_next_level(
    rng: np.random.Generator, prev: float, min_jump: float, level_max: float, decay: float
) -> float:
    up_lo = prev + min_jump
    dn_hi = prev - min_jump
    w_up = 0.0
    w_dn = 0.0
    if up_lo <= level_max:
        w_up = (1.0 - exp(-decay * (level_max - up_lo))) / decay
    if dn_hi >= -level_max:
        w_dn = (1.0 - exp(-decay * (dn_hi + level_max))) / decay
    if w_up <= 0 and w_dn <= 0:
        # both windows degenerate; jump to whichever boundary is reachable
        return up_lo if up_lo <= level_max else dn_hi
    go_up = rng.uniform() < w_up / (w_up + w_dn)
    u = rng.uniform()
    if go_up:
        span = level_max - up_lo
        return up_lo - np.log1p(-u * (1.0 - exp(-decay * span))) / decay
    span = dn_hi + level_max
    return dn_hi + np.log1p(-u * (1.0 - exp(-decay * span))) / decay


def gen_config(
    n: int,
    j: int,
    min_jump: float = 1.0,
    level_max: float = 10.0,
    decay: float = 0.3,
    spacing_floor: int | None = None,
    seed: int = 0,
) -> PiecewiseConfig:
    """Random piecewise-constant config with j change points in [1, n-1]."""
    if j < 1:
        raise StridesegError("gen_config needs j >= 1")
    if min_jump <= 0 or level_max < min_jump:
        raise StridesegError("need 0 < min_jump <= level_max")
    if decay <= 0:
        raise StridesegError("decay must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x02]))
    if spacing_floor is None:
        spacing_floor = min(int(n / (1.5 * j)), n // (j + 1))
    spacing_floor = int(spacing_floor)
    if spacing_floor < 1 or (j + 1) * spacing_floor > n:
        raise StridesegError(
            f"spacing floor {spacing_floor} infeasible for n={n}, j={j}"
        )
    rest = n - (j + 1) * spacing_floor
    p = _composition_weights(rng, j + 1)
    spacings = spacing_floor + rng.multinomial(rest, p)
    taus = np.cumsum(spacings)[:j].tolist()

    levels = [0.0]
    for _ in range(j):
        levels.append(
            float(_sample_next_level(rng, levels[-1], min_jump, level_max, decay))
        )
    return PiecewiseConfig(n=int(n), taus=[int(t) for t in taus], levels=levels)


def _ma3_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    c = MA3_COEFFS
    buf = rng.standard_normal(n + len(c) - 1)
    out = c[0] * buf[:n] + c[1] * buf[1 : n + 1] + c[2] * buf[2 : n + 2]
    return out / sqrt(sum(x * x for x in c))


def _ar1_noise(rng: np.random.Generator, n: int, phi: float = AR1_PHI) -> np.ndarray:
    s = sqrt(1.0 - phi * phi)
    innov = rng.standard_normal((1, n))
    zi = np.array([[phi * rng.standard_normal()]])
    out, _ = lfilter([s], [1.0, -phi], innov, axis=1, zi=zi)
    return out[0]


def _hetero_noise(rng: np.random.Generator, config: PiecewiseConfig) -> np.ndarray:
    if config.j % 4 != 0 or config.j < 4:
        raise StridesegError(
            "hetero noise needs the change point count divisible by 4"
        )
    n = config.n
    out = np.empty(n)
    bounds = [0] + config.taus + [n]

    def fill(lo: int, hi: int, kind: str) -> None:
        # fills positions (lo, hi], 0-based slice [lo:hi]
        ln = hi - lo
        if ln <= 0:
            return
        if kind == "iid":
            out[lo:hi] = rng.standard_normal(ln)
        elif kind == "ma3":
            out[lo:hi] = _ma3_noise(rng, ln)
        elif kind == "avg4":
            buf = rng.standard_normal(ln + 3)
            out[lo:hi] = 0.5 * (buf[:ln] + buf[1 : ln + 1] + buf[2 : ln + 2] + buf[3 : ln + 3]) / 2.0
        else:  # lag3 pair
            buf = rng.standard_normal(ln + 3)
            out[lo:hi] = 0.7 * (buf[:ln] + buf[3 : ln + 3]) / sqrt(2.0)

    for b in range(config.j // 4):
        t0, t1, t2, t3, t4 = bounds[4 * b : 4 * b + 5]
        m1 = (t1 + t2) // 2
        m2 = (t2 + t3) // 2
        fill(t0, m1, "iid")
        fill(m1, m2, "ma3")
        fill(m2, t3, "avg4")
        fill(t3, t4, "lag3")
    fill(bounds[config.j], n, "iid")
    return out


def noise_spec_for(kind: str) -> NoiseSpec:
    """Walk-increment model matching a generated noise kind."""
    if kind == "iid" or kind == "none":
        return NoiseSpec.iid()
    if kind == "ma3":
        return NoiseSpec.ma(MA3_COEFFS)
    if kind == "ar1":
        return NoiseSpec.ar1(AR1_PHI)
    raise StridesegError(f"no single walk law for noise kind {kind!r}")


def gen_series(
    config: PiecewiseConfig,
    noise: str = "iid",
    sigma: float = 1.0,
    seed: int = 0,
) -> np.ndarray:
    """Signal plus noise as a float64 array (position i at index i - 1)."""
    if noise not in _NOISE_KINDS:
        raise StridesegError(f"unknown noise kind {noise!r}; use one of {_NOISE_KINDS}")
    if sigma < 0:
        raise StridesegError("sigma must be >= 0")
    sig = build_signal(config)
    if noise == "none" or sigma == 0.0:
        return sig.copy()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x01]))
    if noise == "iid":
        eps = rng.standard_normal(config.n)
    elif noise == "ma3":
        eps = _ma3_noise(rng, config.n)
    elif noise == "ar1":
        eps = _ar1_noise(rng, config.n)
    else:
        eps = _hetero_noise(rng, config)
    return sig + sigma * eps


def alternating_config(n: int, j: int, jump: float) -> PiecewiseConfig:
    """Evenly spaced change points with equal jumps of alternating sign.

    tau_i = round(i * n / (j + 1)); levels swing between 0 and `jump`, so
    every jump has magnitude `jump`. Deterministic, no rng.
    """
    if j < 1:
        raise StridesegError("need j >= 1")
    if jump <= 0:
        raise StridesegError("jump must be positive")
    taus = [int(round(i * n / (j + 1))) for i in range(1, j + 1)]
    if len(set(taus)) != j or taus[0] < 1 or taus[-1] > n - 1:
        raise StridesegError(f"n={n} too small for {j} evenly spaced change points")
    levels = [float(jump) if i % 2 else 0.0 for i in range(j + 1)]
    return PiecewiseConfig(n=n, taus=taus, levels=levels)


def emulation_config(kind: str, n: int, sigma: float = 1.0, seed: int = 0) -> PiecewiseConfig:
    """Truth config for the named emulation layout.

    "sig-1": 31 long elevated stretches (length >= 75000, jumps 1.3 to 2
    sigma). "sig-2": 201 short spikes (length about 50, jumps 10 to 15
    sigma). Stretch ends are spaced by a floor plus a multinomial spread;
    each stretch occupies the tail of its spacing cell, so stretches never
    collide.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x08]))
    if kind == "sig-1":
        stretches, gap_base, len_base, len_sub, len_p = 31, 150_000, 75_000, 75_000, 0.5
        jump_lo, jump_hi = 1.3 * sigma, 2.0 * sigma
    elif kind == "sig-2":
        stretches, gap_base, len_base, len_sub, len_p = 201, 50_050, 50, 50_000, 1e-4
        jump_lo, jump_hi = 10.0 * sigma, 15.0 * sigma
    else:
        raise StridesegError(f"unknown emulation kind {kind!r}")
    if n < (stretches + 1) * gap_base:
        raise StridesegError(
            f"{kind} needs n >= {(stretches + 1) * gap_base}, got {n}"
        )
    p = _composition_weights(rng, stretches)
    gaps = gap_base + rng.multinomial(n - stretches * gap_base, p)
    ends = np.cumsum(gaps)  # stretch i ends at ends[i]
    taus: list[int] = []
    levels: list[float] = [0.0]
    for i in range(stretches):
        spare = int(gaps[i]) - len_sub
        length = len_base + (int(rng.binomial(spare, len_p)) if spare > 0 else 0)
        length = min(length, int(gaps[i]) - 1)
        end = int(ends[i])
        start = end - length  # elevated on (start, end]
        jump = float(rng.uniform(jump_lo, jump_hi))
        taus.append(start)
        levels.append(jump)
        if end <= n - 1:
            taus.append(end)
            levels.append(0.0)
    return PiecewiseConfig(n=int(n), taus=taus, levels=levels)
