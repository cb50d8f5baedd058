"""Core data types and index arithmetic.

Indexing convention: sequence positions are 1-based everywhere in the public
API. A change point tau is the last index at which the left mean level still
holds; the mean jumps between tau and tau + 1.

The stage-1 subsample reads every stride-th position (stride = g), so the
"grid" is the set of positions divisible by g. Off-grid positions are the
ones a second-stage window may read under the omission rule. ``lambda2``
measures signed distance in off-grid steps and ``pi2`` is the rank map from
off-grid positions to consecutive integers; both are exact integer
arithmetic at any magnitude.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StridesegError",
    "PiecewiseConfig",
    "SubsampleGrid",
    "ChangePointEstimate",
    "DetectionReport",
    "lambda2",
    "pi2",
    "pi2_inv",
    "signal_at",
    "build_signal",
]


class StridesegError(ValueError):
    """Raised for invalid configurations, data errors and contract violations."""


@dataclass
class PiecewiseConfig:
    """Piecewise-constant signal description.

    Parameters
    ----------
    n : int
        Sequence length, at least 2.
    taus : list[int]
        Sorted change point positions, each in [1, n - 1]. May be empty.
    levels : list[float]
        Mean levels, one more entry than ``taus``. Adjacent levels must
        differ (a zero jump is not a change point).
    """

    n: int
    taus: list[int] = field(default_factory=list)
    levels: list[float] = field(default_factory=lambda: [0.0])

    def __post_init__(self) -> None:
        self.n = int(self.n)
        self.taus = [int(t) for t in self.taus]
        self.levels = [float(v) for v in self.levels]
        if self.n < 2:
            raise StridesegError(f"sequence length must be >= 2, got {self.n}")
        if len(self.levels) != len(self.taus) + 1:
            raise StridesegError(
                f"need len(taus) + 1 levels, got {len(self.taus)} taus "
                f"and {len(self.levels)} levels"
            )
        prev = 0
        for t in self.taus:
            if not 1 <= t <= self.n - 1:
                raise StridesegError(f"change point {t} outside [1, {self.n - 1}]")
            if t <= prev:
                raise StridesegError("change points must be strictly increasing")
            prev = t
        for a, b in zip(self.levels, self.levels[1:]):
            if a == b:
                raise StridesegError("adjacent levels must differ")

    @property
    def j(self) -> int:
        return len(self.taus)

    def jumps(self) -> list[float]:
        return [b - a for a, b in zip(self.levels, self.levels[1:])]

    def min_spacing(self) -> int:
        """Smallest gap between consecutive change points (boundaries included)."""
        if not self.taus:
            return self.n
        pts = [0] + self.taus + [self.n]
        return min(b - a for a, b in zip(pts, pts[1:]))

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n, "taus": self.taus, "levels": self.levels},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StridesegError(f"invalid config JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise StridesegError("config JSON must be an object")
        missing = {"n", "taus", "levels"} - set(raw)
        if missing:
            raise StridesegError(f"config JSON missing keys: {sorted(missing)}")
        return cls(n=raw["n"], taus=list(raw["taus"]), levels=list(raw["levels"]))


def signal_at(config: PiecewiseConfig, i: int) -> float:
    """Mean level at position i (1-based)."""
    if not 1 <= i <= config.n:
        raise StridesegError(f"position {i} outside [1, {config.n}]")
    # number of change points strictly left of i
    lo, hi = 0, len(config.taus)
    while lo < hi:
        mid = (lo + hi) // 2
        if config.taus[mid] < i:
            lo = mid + 1
        else:
            hi = mid
    return config.levels[lo]


def build_signal(config: PiecewiseConfig) -> np.ndarray:
    """Dense signal array of length n (position i at index i - 1)."""
    bounds = [0] + config.taus + [config.n]
    lengths = np.diff(bounds)
    return np.repeat(np.asarray(config.levels, dtype=np.float64), lengths)


@dataclass(frozen=True)
class SubsampleGrid:
    """Strided index set {offset + k * stride, k = 1, 2, ...} within [1, n].

    offset = 0 gives the stage-1 grid (positions divisible by stride). The
    calibration grid uses offset = -k_n so its points interleave the stage-1
    ones. stride = 1 is accepted here (degenerate: everything is on-grid)
    but rejected by the detection pipeline.
    """

    n: int
    stride: int
    offset: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise StridesegError("grid length must be >= 1")
        if self.stride < 1:
            raise StridesegError("stride must be >= 1")
        if not -self.stride < self.offset < self.stride:
            raise StridesegError("offset must satisfy |offset| < stride")

    @property
    def count(self) -> int:
        """Number of grid positions inside [1, n]."""
        # largest k with offset + k*stride <= n, counting k >= 1
        k = (self.n - self.offset) // self.stride
        if self.offset + self.stride < 1:
            raise StridesegError("first grid position below 1")
        return max(k, 0)

    def position(self, k: int | np.ndarray) -> int | np.ndarray:
        """Original-scale position of grid index k (1-based, k in [1, count])."""
        return self.offset + np.multiply(k, self.stride)

    def indices(self) -> np.ndarray:
        """All grid positions as an int64 array."""
        c = self.count
        return self.offset + self.stride * np.arange(1, c + 1, dtype=np.int64)

    def contains(self, i: int | np.ndarray) -> bool | np.ndarray:
        shifted = np.subtract(i, self.offset)
        ok = (shifted > 0) & (shifted % self.stride == 0)
        lo = np.greater_equal(i, 1)
        hi = np.less_equal(i, self.n)
        return ok & lo & hi


def pi2(k: int, stride: int) -> int:
    """Rank of position k among off-grid positions in [1, k].

    Counts positions in [1, k] not divisible by stride. Defined for k >= 0
    (pi2(0) = 0). Exact integer arithmetic; safe at any magnitude.
    """
    k = int(k)
    stride = int(stride)
    if k < 0:
        raise StridesegError("pi2 requires k >= 0")
    if stride < 1:
        raise StridesegError("stride must be >= 1")
    return k - k // stride


def pi2_inv(m: int, stride: int) -> int:
    """Inverse rank map: the m-th off-grid position (m >= 1).

    stride = 1 has no off-grid positions and is rejected.
    """
    m = int(m)
    stride = int(stride)
    if stride < 2:
        raise StridesegError("pi2_inv needs stride >= 2")
    if m < 0:
        raise StridesegError("pi2_inv requires m >= 0")
    if m == 0:
        return 0
    return m + (m - 1) // (stride - 1)


def lambda2(a: int, b: int, stride: int) -> int:
    """Signed count of off-grid positions in (a, b] (negative when b < a)."""
    a = int(a)
    b = int(b)
    if a < 0 or b < 0:
        raise StridesegError("lambda2 requires nonnegative positions")
    return pi2(b, stride) - pi2(a, stride)


@dataclass
class ChangePointEstimate:
    """One detected change point with its confidence interval."""

    tau: int
    ci_lo: int
    ci_hi: int
    level_left: float
    level_right: float
    snr: float | None

    def to_dict(self) -> dict:
        return {
            "tau": int(self.tau),
            "ci_lo": int(self.ci_lo),
            "ci_hi": int(self.ci_hi),
            "level_left": float(self.level_left),
            "level_right": float(self.level_right),
            "snr": None if self.snr is None else float(self.snr),
        }


@dataclass
class DetectionReport:
    """Full output of a detection run.

    touched_indices is the count of distinct positions read from the data;
    touched_fraction divides it by n. timings_ms carries wall-clock stage
    timings and is excluded from byte-determinism guarantees (serialization
    drops it unless explicitly requested).
    """

    j_hat: int
    sigma_hat: float
    estimates: list[ChangePointEstimate]
    touched_indices: int
    touched_fraction: float
    timings_ms: dict[str, float] = field(default_factory=dict)
    config_echo: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        return {
            "j_hat": int(self.j_hat),
            "sigma_hat": float(self.sigma_hat),
            "estimates": [e.to_dict() for e in self.estimates],
            "touched_indices": int(self.touched_indices),
            "touched_fraction": float(self.touched_fraction),
            "timings_ms": (
                {k: float(v) for k, v in self.timings_ms.items()}
                if include_timings
                else {}
            ),
            "config_echo": self.config_echo,
        }

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), sort_keys=True, indent=2) + "\n"


def validate_report_dict(d: dict) -> None:
    """Check a report dict against the bundled JSON schema; raises on failure."""
    import importlib.resources

    import jsonschema

    schema_text = (
        importlib.resources.files("strideseg").joinpath("report-schema.json").read_text()
    )
    try:
        jsonschema.validate(d, json.loads(schema_text))
    except jsonschema.ValidationError as exc:
        raise StridesegError(f"report does not match schema: {exc.message}") from exc
