"""Diagonal spectral model: fractional-power norms, semigroup, coefficients.

The operator is diagonal in a fixed orthonormal basis with eigenvalue
sequence mu_k. The default construction uses the Dirichlet Laplacian on the
unit interval shifted by lambda_a, i.e. mu_k = (k pi)^2 + lambda_a with
eigenfunctions sqrt(2) sin(k pi x). Fractional spaces are realized by the
weighted norms

    |x|_a = ( sum_k mu_k^(2a) x_k^2 )^(1/2),

so every smoothing constant is explicit. Two diffusion coefficients are
built in: a scaled fractional power of the (unshifted) Laplacian acting
diagonally, and a smoothing integral operator u -> int g(., u(x)) dx with a
smooth bounded kernel, discretized with fixed Gauss-Legendre quadrature so the
operator and its Frechet derivatives are mutually consistent.

The drift coefficient is a mode-wise saturating map scaled by mu_k^sigma_f,
which makes its Lipschitz constant from E_alpha to E_(alpha-sigma_f) exactly
c_f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configio import get_typed, load_kv_file
from .errors import ConfigError

_G_KINDS = ("linear", "integral")


@dataclass(frozen=True)
class SpectralState:
    """Mode coefficients together with the space index they live in."""

    coeffs: np.ndarray
    alpha: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.ndim != 1:
            raise ValueError("coefficients must be a 1-d array")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("non-finite mode coefficients")


class IntegralKernel:
    """Smooth bounded kernel g(xi, v) with derivatives in v up to order three.

    deriv_bound must be a finite bound for |D_v^k g|, k = 0..3; configurations
    with an unbounded kernel derivative are rejected.
    """

    def __init__(self, g, d1, d2, d3, deriv_bound: float):
        if not math.isfinite(deriv_bound):
            raise ConfigError("integral kernel requires a finite derivative bound")
        self.g, self.d1, self.d2, self.d3 = g, d1, d2, d3
        self.deriv_bound = float(deriv_bound)


def _default_kernel(c_g: float) -> IntegralKernel:
    # g(xi, v) = c_g sin(pi xi) tanh(v + cos(pi xi)/2); vanishes on the boundary
    def shift(xi):
        return 0.5 * np.cos(np.pi * xi)

    def g(xi, v):
        return c_g * np.sin(np.pi * xi) * np.tanh(v + shift(xi))

    def d1(xi, v):
        t = np.tanh(v + shift(xi))
        return c_g * np.sin(np.pi * xi) * (1.0 - t * t)

    def d2(xi, v):
        t = np.tanh(v + shift(xi))
        return c_g * np.sin(np.pi * xi) * (-2.0 * t * (1.0 - t * t))

    def d3(xi, v):
        t = np.tanh(v + shift(xi))
        return c_g * np.sin(np.pi * xi) * (-2.0 * (1.0 - t * t) * (1.0 - 3.0 * t * t))

    return IntegralKernel(g, d1, d2, d3, deriv_bound=2.0 * abs(c_g))


class SpectralModel:
    """Immutable diagonal model with coefficient configuration."""

    __slots__ = ("n_modes", "mu", "lambda_a", "alpha", "sigma_f", "sigma_g",
                 "c_f", "c_g", "g_kind", "lap", "kernel", "_nodes", "_weights", "_basis")

    def __init__(self, n_modes: int, lambda_a: float, alpha: float = 0.0,
                 sigma_f: float = 0.0, sigma_g: float = 0.0,
                 c_f: float = 0.0, c_g: float = 0.0, g_kind: str = "linear",
                 mu=None, kernel: IntegralKernel | None = None,
                 quad_points: int | None = None):
        if n_modes < 1:
            raise ConfigError("n_modes must be at least 1")
        if lambda_a <= 0:
            raise ConfigError("lambda_a must be positive")
        if not 0.0 <= sigma_f < 1.0:
            raise ConfigError("sigma_f must lie in [0, 1)")
        if sigma_g < 0:
            raise ConfigError("sigma_g must be nonnegative")
        if g_kind not in _G_KINDS:
            raise ConfigError(f"g_kind must be one of {_G_KINDS}")
        self.n_modes = int(n_modes)
        self.lambda_a = float(lambda_a)
        self.alpha = float(alpha)
        self.sigma_f = float(sigma_f)
        self.sigma_g = float(sigma_g)
        self.c_f = float(c_f)
        self.c_g = float(c_g)
        self.g_kind = g_kind
        if mu is None:
            k = np.arange(1, n_modes + 1, dtype=float)
            lap = (k * np.pi) ** 2
            mu = lap + lambda_a
        else:
            mu = np.array(mu, dtype=float)
            if mu.shape != (n_modes,):
                raise ConfigError("custom eigenvalues must match n_modes")
            lap = mu - lambda_a
            if np.any(lap < 0):
                raise ConfigError("custom eigenvalues must dominate lambda_a")
        if np.any(np.diff(mu) <= 0):
            raise ConfigError("eigenvalues must be strictly increasing")
        if mu[0] < lambda_a:
            raise ConfigError("mu_1 must be at least lambda_a")
        self.mu = mu
        self.lap = lap
        self.mu.flags.writeable = False
        self.lap.flags.writeable = False
        if g_kind == "integral":
            self.kernel = kernel if kernel is not None else _default_kernel(self.c_g)
            nq = quad_points if quad_points is not None else max(128, 4 * self.n_modes)
            nodes, weights = np.polynomial.legendre.leggauss(nq)
            self._nodes = 0.5 * (nodes + 1.0)
            self._weights = 0.5 * weights
            k = np.arange(1, self.n_modes + 1, dtype=float)
            self._basis = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, self._nodes))
        else:
            if kernel is not None:
                raise ConfigError("kernel only applies to g_kind = integral")
            self.kernel = None
            self._nodes = self._weights = self._basis = None

    # -- spaces ---------------------------------------------------------

    def state(self, coeffs, alpha: float | None = None) -> SpectralState:
        return SpectralState(np.asarray(coeffs, dtype=float),
                             self.alpha if alpha is None else alpha)

    def frac_norm(self, state, alpha: float) -> float:
        """Norm of the state in the fractional space of index alpha."""
        coeffs = state.coeffs if isinstance(state, SpectralState) else np.asarray(state, dtype=float)
        w = self.mu ** (2.0 * alpha)
        return float(np.sqrt(np.sum(w * coeffs * coeffs)))

    def frac_norm_rows(self, rows: np.ndarray, alpha: float) -> np.ndarray:
        """Row-wise fractional norms of a (n, n_modes) array."""
        w = self.mu ** (2.0 * alpha)
        return np.sqrt((rows * rows) @ w)

    # -- semigroup ------------------------------------------------------

    def semigroup_factors(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("semigroup time must be nonnegative")
        return np.exp(-self.mu * t)

    def semigroup_apply(self, t: float, state: SpectralState) -> SpectralState:
        return SpectralState(self.semigroup_factors(t) * state.coeffs, state.alpha)

    def smoothing_constant(self, sigma: float, lam: float) -> float:
        """Least per-mode constant with |S_t x|_(a+sigma) <= C exp(-lam t) t^-sigma |x|_a.

        Equals sup_u u^sigma exp(-(1 - lam/mu_1) u); requires lam < mu_1.
        """
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if sigma == 0.0:
            return 1.0
        mu1 = float(self.mu[0])
        if lam >= mu1:
            raise ValueError(f"decay rate {lam} must stay below mu_1 = {mu1}")
        rate = 1.0 - lam / mu1
        u = sigma / rate
        return u ** sigma * math.exp(-sigma)

    # -- drift ----------------------------------------------------------

    def apply_f(self, state: SpectralState) -> SpectralState:
        """Mode-wise saturating drift, Lipschitz c_f from alpha to alpha - sigma_f."""
        out = self.c_f * self.mu ** self.sigma_f * np.tanh(state.coeffs)
        return SpectralState(out, state.alpha - self.sigma_f)

    # -- diffusion ------------------------------------------------------

    def _point_values(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self._basis

    def _project(self, point_vals: np.ndarray) -> np.ndarray:
        return self._basis @ (self._weights * point_vals)

    def apply_g(self, state: SpectralState) -> SpectralState:
        """Diffusion coefficient: diagonal fractional power or integral operator."""
        if self.g_kind == "linear":
            out = self.c_g * self.lap ** self.sigma_g * state.coeffs
        else:
            u = self._point_values(state.coeffs)
            inner = self._integral_values(self.kernel.g, u)
            out = self._basis @ (self._weights * inner)
        return SpectralState(out, state.alpha - self.sigma_g)

    def _integral_values(self, fn, u: np.ndarray, h=None, h2=None, h3=None) -> np.ndarray:
        """Evaluate xi_j -> int fn(xi_j, u(x)) * [h(x) ...] dx on the nodes."""
        xi = self._nodes[:, None]
        vals = fn(xi, u[None, :])
        for extra in (h, h2, h3):
            if extra is not None:
                vals = vals * extra[None, :]
        return vals @ self._weights

    def apply_dg(self, state: SpectralState, h: SpectralState) -> SpectralState:
        if self.g_kind == "linear":
            out = self.c_g * self.lap ** self.sigma_g * h.coeffs
        else:
            u = self._point_values(state.coeffs)
            hv = self._point_values(h.coeffs)
            out = self._basis @ (self._weights * self._integral_values(self.kernel.d1, u, hv))
        return SpectralState(out, state.alpha - self.sigma_g)

    def apply_d2g(self, state: SpectralState, h1: SpectralState, h2: SpectralState) -> SpectralState:
        if self.g_kind == "linear":
            out = np.zeros_like(state.coeffs)
        else:
            u = self._point_values(state.coeffs)
            out = self._basis @ (self._weights * self._integral_values(
                self.kernel.d2, u, self._point_values(h1.coeffs), self._point_values(h2.coeffs)))
        return SpectralState(out, state.alpha - self.sigma_g)

    def apply_d3g(self, state: SpectralState, h1: SpectralState, h2: SpectralState,
                  h3: SpectralState) -> SpectralState:
        if self.g_kind == "linear":
            out = np.zeros_like(state.coeffs)
        else:
            u = self._point_values(state.coeffs)
            out = self._basis @ (self._weights * self._integral_values(
                self.kernel.d3, u, self._point_values(h1.coeffs),
                self._point_values(h2.coeffs), self._point_values(h3.coeffs)))
        return SpectralState(out, state.alpha - self.sigma_g)

    def gubinelli_of_g(self, state: SpectralState) -> SpectralState:
        """Composition DG(y) applied to G(y); the second-level weight in schemes."""
        return self.apply_dg(state, self.apply_g(state))

    @property
    def c_g_bound(self) -> float:
        """Effective bound for the diffusion coefficient and its derivatives.

        For the diagonal fractional power the operator norm from index a to
        a - sigma_g is below |c_g| since the unshifted eigenvalues stay below
        the shifted ones; for the integral operator the kernel's declared
        derivative bound applies.
        """
        if self.g_kind == "linear":
            return abs(self.c_g)
        return self.kernel.deriv_bound

    def config_pairs(self) -> dict:
        return {
            "n_modes": self.n_modes, "lambda_a": self.lambda_a, "alpha": self.alpha,
            "sigma_f": self.sigma_f, "sigma_g": self.sigma_g,
            "c_f": self.c_f, "c_g": self.c_g, "g_kind": self.g_kind,
        }


def model_from_config(path: str) -> SpectralModel:
    """Build a model from a plain key-value file (see config_pairs for keys)."""
    cfg = load_kv_file(path)
    return SpectralModel(
        n_modes=get_typed(cfg, "n_modes", int),
        lambda_a=get_typed(cfg, "lambda_a", float),
        alpha=get_typed(cfg, "alpha", float, 0.0),
        sigma_f=get_typed(cfg, "sigma_f", float, 0.0),
        sigma_g=get_typed(cfg, "sigma_g", float, 0.0),
        c_f=get_typed(cfg, "c_f", float, 0.0),
        c_g=get_typed(cfg, "c_g", float, 0.0),
        g_kind=cfg.get("g_kind", "linear"),
        quad_points=get_typed(cfg, "quad_points", int, 0) or None,
    )
