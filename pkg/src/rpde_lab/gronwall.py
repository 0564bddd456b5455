"""Executable upper-bound calculators: singular and discrete Gronwall forms.

The singular bound maps a forcing curve h on a uniform grid to

    t -> h(t) + kappa * integral_0^t h(r) ml'(beta, 1, (t-r) * kappa) dr,

with kappa = (Gamma(beta) * M)^(1/beta). Substituting u = t - r, the kernel
factorizes as kappa * ml'(beta,1,u*kappa) = kappa^beta * u^(beta-1) *
ml(beta,beta,u*kappa), i.e. an integrable u^(beta-1) singularity times a
smooth factor g. Each grid panel is integrated with the product-trapezoid
rule: g is interpolated linearly and the moments of u^(beta-1) are integrated
exactly, which handles the singular panel analytically and reduces to the
composite trapezoid rule at beta = 1.

The discrete bound turns coefficient sequences (a, u0, b, c) into the
running-product estimate

    u_n <= max(a, u0) * prod_{j<n} (1+b_j) + sum_{k<n} c_k prod_{k<j<n} (1+b_j)

evaluated in O(n) via the recursion bound[n+1] = bound[n]*(1+b_n) + c_n.
"""

from __future__ import annotations

import math

import numpy as np

from .specfun import OVERFLOW_HORIZON, mittag_leffler_array

__all__ = ["BoundCurve", "singular_gronwall", "discrete_gronwall"]


class BoundCurve:
    """Nonnegative bound values on a uniform time grid."""

    __slots__ = ("times", "values")

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size >= 2:
            steps = np.diff(times)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9):
                raise ValueError("times must form a uniform increasing grid")
        if np.any(values < 0):
            raise ValueError("bound values must be nonnegative")
        self.times = times
        self.values = values

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def write_csv(self, path: str) -> None:
        from .configio import write_csv
        write_csv(path, ["t", "bound"], zip(self.times, self.values))


def _panel_weights(u: np.ndarray, exponent: float, dt: float):
    """Product-trapezoid weights for the weight u^(exponent-1) per panel.

    The smooth factor is interpolated linearly on each panel while the moments
    of the singular weight are integrated exactly; at exponent = 1 the weights
    collapse to the trapezoid rule.
    """
    ue = u ** exponent
    ue1 = u ** (exponent + 1.0)
    m0 = (ue[1:] - ue[:-1]) / exponent
    m1 = (ue1[1:] - ue1[:-1]) / (exponent + 1.0)
    w_right = (m1 - u[:-1] * m0) / dt
    return m0 - w_right, w_right


def singular_gronwall(h: BoundCurve, big_m: float, beta: float) -> BoundCurve:
    """Upper-bound curve of the singular Gronwall form for forcing h.

    Requires h sampled on a uniform grid starting at 0, big_m > 0 and beta in
    (0, 1]. The kernel is split into its three leading singular powers
    u^(m beta - 1), m = 1, 2, 3, integrated exactly against the linearly
    interpolated forcing, plus a u^(4 beta)-smooth remainder handled by the
    weighted trapezoid rule; plain trapezoid would lose an order at the
    integrable singularity.
    """
    if big_m <= 0:
        raise ValueError("big_m must be positive")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if abs(h.times[0]) > 1e-12:
        raise ValueError("forcing curve must start at t = 0")
    n = h.times.size - 1
    if n < 1:
        return BoundCurve(h.times.copy(), h.values.copy())
    dt = h.dt
    kappa = (math.gamma(beta) * big_m) ** (1.0 / beta)
    t_end = h.times[-1]
    if t_end * kappa > OVERFLOW_HORIZON:
        from .errors import NumericsError
        raise NumericsError("kernel argument exceeds the overflow horizon",
                            z=t_end * kappa, horizon=OVERFLOW_HORIZON)

    u = dt * np.arange(n + 1)
    z = u * kappa
    series = mittag_leffler_array(beta, beta, z)
    lead_coeff = [1.0 / math.gamma((m + 1) * beta) for m in range(3)]
    tail = series - (lead_coeff[0] + lead_coeff[1] * z ** beta
                     + lead_coeff[2] * z ** (2.0 * beta))
    scale = kappa ** beta
    weights = [_panel_weights(u, (m + 1) * beta, dt) for m in range(3)]

    hv = h.values
    out = np.empty(n + 1)
    out[0] = hv[0]
    for j in range(1, n + 1):
        h_rev = hv[j::-1]
        integral = 0.0
        for m, (w_left, w_right) in enumerate(weights):
            coeff = scale * lead_coeff[m] * kappa ** (m * beta)
            integral += coeff * (np.dot(h_rev[:-1], w_left[:j])
                                 + np.dot(h_rev[1:], w_right[:j]))
        g_tail = h_rev * tail[: j + 1]
        w_left, w_right = weights[0]
        integral += scale * (np.dot(g_tail[:-1], w_left[:j])
                             + np.dot(g_tail[1:], w_right[:j]))
        out[j] = hv[j] + float(integral)
    return BoundCurve(h.times.copy(), out)


def discrete_gronwall(a: float, u0: float, b, c) -> np.ndarray:
    """Running-product discrete bounds for n = 0..len(b).

    b and c are equal-length nonnegative coefficient sequences; the returned
    array starts at max(a, u0).
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if b.shape != c.shape or b.ndim != 1:
        raise ValueError("b and c must be 1-d sequences of equal length")
    if a < 0 or u0 < 0 or np.any(b < 0) or np.any(c < 0):
        raise ValueError("all inputs must be nonnegative")
    out = np.empty(b.size + 1)
    out[0] = max(a, u0)
    for k in range(b.size):
        out[k + 1] = out[k] * (1.0 + b[k]) + c[k]
    return out
