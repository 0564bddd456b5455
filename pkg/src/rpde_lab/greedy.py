"""Greedy-time machinery: the two-parameter control W, greedy times, counts.

The control of a rough path over [s, t] with weight exponent eta in [0, gamma)
is the supremum over partitions s = k_0 < ... < k_n = t of

    sum_j (k_{j+1}-k_j)^(-eta/(gamma-eta)) *
          ( |X[k_j,k_{j+1}]|^(1/(gamma-eta)) + |XX[k_j,k_{j+1}]|^(1/(2(gamma-eta))) ).

Restricted to grid partitions this supremum is computed exactly by an O(n^2)
dynamic program. Greedy times chop an interval into maximal steps whose
control, raised to gamma - eta, stays below the threshold chi; N counts the
steps. W is superadditive, so it is monotone in the right endpoint, which the
greedy scan exploits for early exit.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericsError
from .roughpath import GridRoughPath, _second_level_matrix, _window_arrays


class GreedyPartition:
    """Greedy times on a grid interval together with threshold data."""

    __slots__ = ("taus", "count", "chi", "eta", "interval")

    def __init__(self, taus, chi: float, eta: float, interval):
        self.taus = np.asarray(taus, dtype=float)
        if self.taus.size < 2 or np.any(np.diff(self.taus) <= 0):
            raise ValueError("greedy times must be strictly increasing with >= 2 entries")
        self.count = self.taus.size - 1
        self.chi = float(chi)
        self.eta = float(eta)
        self.interval = (float(interval[0]), float(interval[1]))


def _check_eta(rp: GridRoughPath, eta: float) -> None:
    if not 0.0 <= eta < rp.gamma:
        raise ValueError(f"eta must lie in [0, gamma={rp.gamma}), got {eta}")


def _window_costs(rp: GridRoughPath, eta: float, interval=None):
    """cost[i, j] = one-segment control term of the window pair (i, j), j > i."""
    raw, xx, _, _ = _window_arrays(rp, interval)
    m = raw.size - 1
    if m == 0:
        return None
    g = rp.gamma - eta
    p1 = 1.0 / g
    p2 = 0.5 / g
    wexp = -eta / g
    mat2 = np.abs(_second_level_matrix(raw, xx))
    inc = np.abs(raw[None, :] - raw[:, None])
    lag = (np.arange(m + 1)[None, :] - np.arange(m + 1)[:, None]).astype(float) * rp.dt
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(lag > 0, lag ** wexp, 0.0) if eta > 0 else np.where(lag > 0, 1.0, 0.0)
    cost = weight * (inc ** p1 + mat2 ** p2)
    return cost


def control_w(rp: GridRoughPath, eta: float, s: float, t: float) -> float:
    """Exact grid-restricted control W over [s, t] by dynamic programming."""
    _check_eta(rp, eta)
    i, j = rp.index(s), rp.index(t)
    if j < i:
        raise ValueError("need s <= t")
    if j == i:
        return 0.0
    cost = _window_costs(rp, eta, (s, t))
    m = cost.shape[0] - 1
    dp = np.empty(m + 1)
    dp[0] = 0.0
    for k in range(1, m + 1):
        dp[k] = np.max(dp[:k] + cost[:k, k])
    return float(dp[m])


def _greedy_scan(rp: GridRoughPath, eta: float, chi: float, i0: int, i1: int):
    """Greedy step indices in [i0, i1]; raises when one cell already violates."""
    g = rp.gamma - eta
    cuts = [i0]
    cur = i0
    while cur < i1:
        cost = _window_costs(rp, eta, (rp.t0 + cur * rp.dt, rp.t0 + i1 * rp.dt))
        m = cost.shape[0] - 1
        dp = np.empty(m + 1)
        dp[0] = 0.0
        last_ok = 0
        for k in range(1, m + 1):
            dp[k] = np.max(dp[:k] + cost[:k, k])
            if dp[k] ** g <= chi:
                last_ok = k
            else:
                break
        if last_ok == 0:
            t_bad = rp.t0 + cur * rp.dt
            raise NumericsError(
                f"grid too coarse for chi={chi}: cell [{t_bad}, {t_bad + rp.dt}] "
                f"already exceeds the greedy threshold",
                cell_left=t_bad, chi=chi, w_cell=float(dp[1] ** g))
        cur += last_ok
        cuts.append(cur)
    return cuts


def greedy_times(rp: GridRoughPath, eta: float, chi: float, interval=None) -> GreedyPartition:
    """Greedy partition of the interval: each step is the largest grid time
    whose accumulated control raised to gamma - eta stays <= chi (boundary
    accepted on equality)."""
    _check_eta(rp, eta)
    if chi <= 0:
        raise ValueError("chi must be positive")
    i0, i1 = rp.interval_slice(interval)
    if i1 == i0:
        raise ValueError("greedy interval must contain at least one cell")
    cuts = _greedy_scan(rp, eta, chi, i0, i1)
    taus = rp.t0 + rp.dt * np.asarray(cuts, dtype=float)
    if interval is None:
        interval = (rp.t0, rp.end_time)
    return GreedyPartition(taus, chi, eta, interval)


def count_in_window(rp: GridRoughPath, eta: float, chi: float, s: float, t: float) -> int:
    """Number of greedy steps N on [s, t]."""
    return greedy_times(rp, eta, chi, (s, t)).count


def control_w_all_pairs(rp: GridRoughPath, eta: float, interval=None) -> np.ndarray:
    """Matrix of W over all grid pairs of the window; used by property tests."""
    _check_eta(rp, eta)
    cost = _window_costs(rp, eta, interval)
    if cost is None:
        return np.zeros((1, 1))
    m = cost.shape[0] - 1
    out = np.zeros((m + 1, m + 1))
    for i in range(m):
        dp = np.empty(m + 1 - i)
        dp[0] = 0.0
        for k in range(1, m + 1 - i):
            dp[k] = np.max(dp[:k] + cost[i:i + k, i + k])
        out[i, i:] = dp
    return out
