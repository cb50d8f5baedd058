"""Independent reference implementations used as oracles by the tests.

Everything here is written the slow, obvious way (plain Python loops,
direct formula transcription) and shares no code with the package, so a
bug would have to appear twice, in different shapes, to slip through.
"""

import math


def brute_stump_full(values, positions=None):
    """Exhaustive one-split least squares: returns (split, mean_l, mean_r, sse)."""
    v = [float(x) for x in values]
    n = len(v)
    pos = list(range(1, n + 1)) if positions is None else [int(p) for p in positions]
    best = None
    for k in range(n - 1):
        left = v[: k + 1]
        right = v[k + 1 :]
        ml = sum(left) / len(left)
        mr = sum(right) / len(right)
        sse = sum((x - ml) ** 2 for x in left) + sum((x - mr) ** 2 for x in right)
        if best is None or sse < best[3]:
            best = (pos[k], ml, mr, sse)
    return best


def brute_stump_known(values, positions, nu_left, nu_right):
    """Exhaustive known-levels split (all-left allowed): (split, sse)."""
    v = [float(x) for x in values]
    pos = [int(p) for p in positions]
    best = None
    for k in range(len(v)):
        sse = sum((x - nu_left) ** 2 for x in v[: k + 1]) + sum(
            (x - nu_right) ** 2 for x in v[k + 1 :]
        )
        if best is None or sse < best[1]:
            best = (pos[k], sse)
    return best


def brute_cusum(values, s, b, e):
    """Two-sample contrast at b on values[s..e], all indices 1-based inclusive."""
    n = e - s + 1
    len_l = b - s + 1
    len_r = e - b
    sum_l = sum(float(x) for x in values[s - 1 : b])
    sum_r = sum(float(x) for x in values[b:e])
    return math.sqrt(len_r / (n * len_l)) * sum_l - math.sqrt(len_l / (n * len_r)) * sum_r


def brute_binseg(values, zeta):
    """Recursive accept-and-split; ties go to the smallest b."""
    out = []

    def rec(s, e):
        if e - s < 1:
            return
        best_b = None
        best_a = -1.0
        for b in range(s, e):
            a = abs(brute_cusum(values, s, b, e))
            if a > best_a:
                best_a = a
                best_b = b
        if best_a >= zeta:
            out.append(best_b)
            rec(s, best_b)
            rec(best_b + 1, e)

    rec(1, len(values))
    return sorted(out)


def brute_pi2(k, stride):
    """Count of positions in [1, k] that are not multiples of stride."""
    return sum(1 for i in range(1, k + 1) if i % stride != 0)


def brute_abs_quantile(counts, m, q, reps):
    """Smallest x with P(|L| <= x) >= q, from offset counts of L in [-m, m]."""
    by_abs = {}
    for idx, c in enumerate(counts):
        t = idx - m
        by_abs[abs(t)] = by_abs.get(abs(t), 0) + int(c)
    cum = 0
    for x in range(0, m + 1):
        cum += by_abs.get(x, 0)
        if cum >= q * reps:
            return x
    return m


def brute_walk_argmin(snr, m, noise_left, noise_right):
    """Argmin of the two-sided drifted walk from explicit noise arrays.

    noise_right[p] is the increment at step p+1 (right branch), noise_left[p]
    the increment at step -(p+1) read toward the left. The left branch
    subtracts its running noise sum. Ties prefer the smaller |t|, then the
    negative side.
    """
    values = {0: 0.0}
    acc = 0.0
    for p in range(m):
        acc += noise_right[p]
        t = p + 1
        values[t] = abs(t) * snr / 2.0 + acc
    acc = 0.0
    for p in range(m):
        acc += noise_left[p]
        t = -(p + 1)
        values[t] = abs(t) * snr / 2.0 - acc
    best_t = 0
    best_v = values[0]
    for t in sorted(values, key=lambda t: (abs(t), t)):
        if values[t] < best_v:
            best_v = values[t]
            best_t = t
    return best_t


def tv_distance(p, q):
    """Total variation between two pmf dicts or equal-length sequences."""
    if isinstance(p, dict) or isinstance(q, dict):
        keys = set(p) | set(q)
        return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
    return 0.5 * sum(abs(a - b) for a, b in zip(p, q))


def brute_segment_means(values, taus):
    """Per-segment means for boundaries taus (1-based, value v belongs left of tau)."""
    v = [float(x) for x in values]
    bounds = [0] + list(taus) + [len(v)]
    out = []
    for a, b in zip(bounds, bounds[1:]):
        seg = v[a:b]
        out.append(sum(seg) / len(seg))
    return out
