"""Grid rough paths: canonical lifts, fBm sampling, seminorms, metric, shifts.

A rough path here is a scalar path X sampled on a uniform grid together with
its second level XX over consecutive grid cells. Values over non-adjacent
grid pairs are reconstructed through Chen's relation

    XX[s,t] = XX[s,u] + XX[u,t] + X[s,u] * X[u,t],        s <= u <= t,

which is exact for the per-cell storage (prefix-sum closed form below).

Time shifts act by slicing: the object keeps the originally sampled values
(`x_raw`) and only the exposed first level is re-zeroed. Every two-point
quantity is computed from raw differences inside a window slice, so Hoelder
seminorms, controls and solver increments of a shifted path are bit-for-bit
equal to the same quantities of the original path on the shifted window.

Exponent convention: gamma in (1/3, 1/2] for the first level, 2*gamma for
the second level.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericsError

_GRID_RTOL = 1e-9


class GridRoughPath:
    """First and second rough-path level on a uniform grid.

    Attributes:
        t0: start time of the grid.
        dt: grid step, positive.
        x: first-level values with x[0] == 0 (re-zeroed view of x_raw).
        xx: second-level values over consecutive cells, len(x) - 1 entries.
        gamma: Hoelder exponent in (1/3, 1/2].
    """

    __slots__ = ("t0", "dt", "x", "xx", "gamma", "x_raw")

    def __init__(self, t0: float, dt: float, x, xx, gamma: float, x_raw=None):
        x = np.asarray(x, dtype=float)
        xx = np.asarray(xx, dtype=float)
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if x.ndim != 1 or x.size < 2:
            raise ValueError("x must hold at least two grid values")
        if xx.shape != (x.size - 1,):
            raise ValueError(f"xx must have one entry per cell, got {xx.shape}")
        if not 1.0 / 3.0 < gamma <= 0.5:
            raise ValueError(f"gamma must lie in (1/3, 1/2], got {gamma}")
        if x_raw is None:
            x_raw = x
        else:
            x_raw = np.asarray(x_raw, dtype=float)
            if x_raw.shape != x.shape:
                raise ValueError("x_raw must match x in shape")
        if x[0] != 0.0:
            raise ValueError("first level must be re-zeroed: x[0] == 0")
        if not (np.all(np.isfinite(x_raw)) and np.all(np.isfinite(xx))):
            raise ValueError("non-finite path values")
        self.t0 = float(t0)
        self.dt = float(dt)
        self.x = x
        self.xx = xx
        self.gamma = float(gamma)
        self.x_raw = x_raw
        for arr in (self.x, self.xx, self.x_raw):
            arr.flags.writeable = False

    @property
    def n_cells(self) -> int:
        return self.x.size - 1

    @property
    def end_time(self) -> float:
        return self.t0 + self.n_cells * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.x.size)

    def index(self, t: float) -> int:
        """Grid index of time t; raises if t is off the grid or outside it."""
        k = round((t - self.t0) / self.dt)
        if k < 0 or k > self.n_cells or abs(self.t0 + k * self.dt - t) > _GRID_RTOL * max(self.dt, 1.0):
            raise ValueError(f"time {t} is not a grid point of [{self.t0}, {self.end_time}] with dt={self.dt}")
        return int(k)

    def interval_slice(self, interval=None) -> tuple[int, int]:
        """Interval (s, t) -> index pair (i, j), defaulting to the full grid."""
        if interval is None:
            return 0, self.n_cells
        s, t = interval
        i, j = self.index(s), self.index(t)
        if i > j:
            raise ValueError(f"empty interval orientation: ({s}, {t})")
        return i, j

    def increment(self, i: int, j: int) -> float:
        return self.x_raw[j] - self.x_raw[i]

    def second_level(self, i: int, j: int) -> float:
        """XX over [t_i, t_j] via Chen aggregation of the stored cells."""
        if j <= i:
            return 0.0
        raw = self.x_raw
        d = np.diff(raw[i:j + 1])
        return float(np.sum(self.xx[i:j]) + np.sum((raw[i:j] - raw[i]) * d))

    def window(self, s: float, t: float) -> "GridRoughPath":
        """Sub-path on [s, t], raw values preserved (bitwise-stable increments)."""
        i, j = self.index(s), self.index(t)
        if j - i < 1:
            raise ValueError("window must contain at least one cell")
        raw = self.x_raw[i:j + 1]
        return GridRoughPath(self.t0 + i * self.dt, self.dt, raw - raw[0],
                             self.xx[i:j], self.gamma, x_raw=raw)

    def __repr__(self) -> str:
        return (f"GridRoughPath(t0={self.t0}, dt={self.dt}, cells={self.n_cells}, "
                f"gamma={self.gamma})")


class HolderReport:
    """Hoelder seminorms of both levels and their sum on one interval."""

    __slots__ = ("seminorm_x", "seminorm_xx", "rho", "interval")

    def __init__(self, seminorm_x: float, seminorm_xx: float, interval):
        self.seminorm_x = float(seminorm_x)
        self.seminorm_xx = float(seminorm_xx)
        self.rho = self.seminorm_x + self.seminorm_xx
        self.interval = (float(interval[0]), float(interval[1]))


def lift_piecewise_linear(samples, t0: float, dt: float, gamma: float = 0.5) -> GridRoughPath:
    """Canonical lift of the piecewise-linear interpolant of sampled values.

    Over one cell the iterated integral of a linear segment is exactly half the
    squared increment, so xx[k] = (x[k+1]-x[k])**2 / 2. The first value is
    shifted so the path starts at zero.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size < 2:
        raise ValueError("need at least two samples to lift")
    x = samples - samples[0]
    d = np.diff(x)
    xx = 0.5 * d * d
    return GridRoughPath(t0, dt, x, xx, gamma, x_raw=x)


def _fgn_autocov(n: int, hurst: float) -> np.ndarray:
    k = np.arange(n, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 + np.abs(k - 1) ** h2 - 2.0 * np.abs(k) ** h2)


def _fgn_davies_harte(n: int, hurst: float, rng: np.random.Generator) -> np.ndarray | None:
    """Exact fGn sample by circulant embedding; None if the embedding fails."""
    row = _fgn_autocov(n, hurst)
    circ = np.concatenate([row, [0.0], row[1:][::-1]])
    lam = np.fft.fft(circ).real
    if lam.min() < -1e-8 * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    m = 2 * n
    z0, zn = rng.standard_normal(2)
    v = rng.standard_normal((n - 1, 2))
    z = np.empty(m, dtype=complex)
    z[0] = z0
    z[n] = zn
    z[1:n] = (v[:, 0] + 1j * v[:, 1]) / np.sqrt(2.0)
    z[n + 1:] = np.conj(z[1:n][::-1])
    fgn = np.fft.ifft(np.sqrt(lam) * z).real[:n] * np.sqrt(m)
    return fgn


def _fgn_cholesky(n: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    row = _fgn_autocov(n, hurst)
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    cov = row[idx]
    cov[np.diag_indices_from(cov)] += 1e-12
    chol = np.linalg.cholesky(cov)
    return chol @ rng.standard_normal(n)


def sample_fbm(hurst: float, n_steps: int, seed: int, horizon: float = 1.0) -> np.ndarray:
    """Exact-in-law fBm sample: n_steps increments on [0, horizon], X[0] = 0.

    Uses i.i.d. Gaussian increments for H = 1/2, the degenerate line t*Z for
    H = 1, circulant embedding of the fGn covariance otherwise (Cholesky as
    fallback when the embedding is not nonnegative definite). Deterministic
    for a fixed (hurst, n_steps, seed, horizon).
    """
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    if not 1.0 / 3.0 < hurst <= 1.0:
        raise ValueError(f"hurst must lie in (1/3, 1], got {hurst}")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)
    dt = horizon / n_steps
    if hurst == 1.0:
        z = rng.standard_normal()
        incr = np.full(n_steps, z * dt)
    elif hurst == 0.5:
        incr = rng.standard_normal(n_steps) * np.sqrt(dt)
    else:
        fgn = _fgn_davies_harte(n_steps, hurst, rng)
        if fgn is None:
            if n_steps > 4096:
                raise NumericsError("circulant embedding failed and n_steps too large for Cholesky",
                                    n_steps=n_steps, hurst=hurst)
            fgn = _fgn_cholesky(n_steps, hurst, np.random.default_rng(seed))
        incr = fgn * dt ** hurst
    out = np.empty(n_steps + 1)
    out[0] = 0.0
    np.cumsum(incr, out=out[1:])
    return out


def _window_arrays(rp: GridRoughPath, interval=None):
    i, j = rp.interval_slice(interval)
    return rp.x_raw[i:j + 1], rp.xx[i:j], i, j


def _second_level_matrix(raw: np.ndarray, xx: np.ndarray) -> np.ndarray:
    """All-pairs second level of the window via local prefix sums.

    XX[i, j] = (xxc[j]-xxc[i]) + (a[j]-a[i]) - raw[i]*(raw[j]-raw[i]) with
    xxc the cell prefix sum and a[m] = sum_{k<m} raw[k]*(raw[k+1]-raw[k]).
    Entries with j <= i are zero. O(m^2) memory; windows are desk-sized.
    """
    m = raw.size - 1
    d = np.diff(raw)
    xxc = np.concatenate([[0.0], np.cumsum(xx)])
    a = np.concatenate([[0.0], np.cumsum(raw[:-1] * d)])
    mat = (xxc[None, :] - xxc[:, None]) + (a[None, :] - a[:, None]) \
        - raw[:, None] * (raw[None, :] - raw[:, None])
    return np.triu(mat, k=1) if m >= 1 else mat


def holder_seminorm(rp: GridRoughPath, level, interval=None) -> float:
    """Grid-restricted Hoelder seminorm of one level over the interval.

    level "first": sup |X[s,t]| / (t-s)^gamma over grid pairs; level "second"
    uses the Chen-reconstructed XX and exponent 2*gamma. Empty interval -> 0.
    """
    raw, xx, _, _ = _window_arrays(rp, interval)
    m = raw.size - 1
    if m == 0:
        return 0.0
    if level in (1, "first", "x"):
        best = 0.0
        for lag in range(1, m + 1):
            num = np.max(np.abs(raw[lag:] - raw[:-lag]))
            best = max(best, num / (lag * rp.dt) ** rp.gamma)
        return float(best)
    if level in (2, "second", "xx"):
        mat = _second_level_matrix(raw, xx)
        best = 0.0
        for lag in range(1, m + 1):
            num = np.max(np.abs(np.diagonal(mat, offset=lag)))
            best = max(best, num / (lag * rp.dt) ** (2.0 * rp.gamma))
        return float(best)
    raise ValueError(f"level must be 'first' or 'second', got {level!r}")


def holder_report(rp: GridRoughPath, interval=None) -> HolderReport:
    if interval is None:
        interval = (rp.t0, rp.end_time)
    return HolderReport(holder_seminorm(rp, "first", interval),
                        holder_seminorm(rp, "second", interval), interval)


def rough_metric(a: GridRoughPath, b: GridRoughPath, interval=None) -> float:
    """Inhomogeneous rough-path distance on a common grid.

    Sum of the first-level seminorm of the difference path and the
    second-level seminorm of the difference of the Chen reconstructions.
    rho(a) is recovered as the distance of a to a zero path.
    """
    if a.n_cells != b.n_cells or a.dt != b.dt or a.t0 != b.t0:
        raise ValueError("paths must share the same grid")
    if a.gamma != b.gamma:
        raise ValueError("paths must share the same Hoelder exponent")
    raw_a, xx_a, _, _ = _window_arrays(a, interval)
    raw_b, xx_b, _, _ = _window_arrays(b, interval)
    m = raw_a.size - 1
    if m == 0:
        return 0.0
    diff1 = (raw_a - raw_a[0]) - (raw_b - raw_b[0])
    mat = _second_level_matrix(raw_a, xx_a) - _second_level_matrix(raw_b, xx_b)
    best1 = 0.0
    best2 = 0.0
    for lag in range(1, m + 1):
        best1 = max(best1, np.max(np.abs(diff1[lag:] - diff1[:-lag])) / (lag * a.dt) ** a.gamma)
        best2 = max(best2, np.max(np.abs(np.diagonal(mat, offset=lag))) / (lag * a.dt) ** (2.0 * a.gamma))
    return float(best1 + best2)


def zero_path_like(rp: GridRoughPath) -> GridRoughPath:
    z = np.zeros_like(rp.x)
    return GridRoughPath(rp.t0, rp.dt, z, np.zeros_like(rp.xx), rp.gamma, x_raw=z)


def shift(rp: GridRoughPath, r: float) -> GridRoughPath:
    """Time shift by a grid multiple r >= 0: the sampled realization of theta_r.

    The returned path exposes X re-zeroed at the new origin while keeping the
    raw values, so seminorms, controls and greedy counts over [s, t] equal the
    originals over [s+r, t+r] exactly.
    """
    k = round(r / rp.dt)
    if abs(k * rp.dt - r) > _GRID_RTOL * max(rp.dt, 1.0):
        raise ValueError(f"shift {r} is not an integer multiple of dt={rp.dt}")
    if k < 0 or rp.n_cells - k < 1:
        raise ValueError(f"shifted window exceeds the sampled horizon (shift {r})")
    raw = rp.x_raw[k:]
    return GridRoughPath(rp.t0, rp.dt, raw - raw[0], rp.xx[k:], rp.gamma, x_raw=raw)


def retime(rp: GridRoughPath, t0: float) -> GridRoughPath:
    """Same sampled data on a relabeled clock starting at t0."""
    return GridRoughPath(t0, rp.dt, rp.x, rp.xx, rp.gamma, x_raw=rp.x_raw)


def coarsen(rp: GridRoughPath, factor: int) -> GridRoughPath:
    """Restriction to every factor-th grid point, second level Chen-aggregated.

    Used to compare lifts living on nested dyadic grids in the common coarse
    metric.
    """
    if factor < 1 or rp.n_cells % factor != 0:
        raise ValueError(f"factor {factor} must divide the cell count {rp.n_cells}")
    if factor == 1:
        return rp
    raw = rp.x_raw[::factor]
    n_coarse = rp.n_cells // factor
    xx = np.empty(n_coarse)
    for c in range(n_coarse):
        i = c * factor
        xx[c] = rp.second_level(i, i + factor)
    return GridRoughPath(rp.t0, rp.dt * factor, raw - raw[0], xx, rp.gamma, x_raw=raw)


def chen_defect(rp: GridRoughPath, i: int, u: int, j: int) -> float:
    """Residual of Chen's relation on the grid triple (i, u, j)."""
    return (rp.second_level(i, j) - rp.second_level(i, u) - rp.second_level(u, j)
            - rp.increment(i, u) * rp.increment(u, j))


def save_csv(rp: GridRoughPath, path: str) -> None:
    """Serialize as ``t,x,xx_cell`` rows; xx on the cell's left endpoint row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,x,xx_cell\n")
        times = rp.times
        for k in range(rp.x.size):
            xx = repr(float(rp.xx[k])) if k < rp.n_cells else ""
            fh.write(f"{float(times[k])!r},{float(rp.x[k])!r},{xx}\n")


def load_csv(path: str, gamma: float = 0.5) -> GridRoughPath:
    times, xs, xxs = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "t,x,xx_cell":
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            t_s, x_s, xx_s = line.rstrip("\n").split(",")
            times.append(float(t_s))
            xs.append(float(x_s))
            if xx_s:
                xxs.append(float(xx_s))
    if len(xs) < 2:
        raise ValueError("path file holds fewer than two samples")
    if len(xxs) != len(xs) - 1:
        raise ValueError("cell column must be empty exactly on the last row")
    dt = (times[-1] - times[0]) / (len(xs) - 1)
    return GridRoughPath(times[0], dt, np.asarray(xs), np.asarray(xxs), gamma)
