"""Reflecting Brownian motion on [-1, 1]^d and on orthants.

Time scale convention: the process with constant ``c`` has generator (c/2) Delta,
so a free coordinate has variance c t.
"""
from __future__ import annotations

import math
from itertools import product

import numpy as np
from scipy.optimize import brentq

SERIES_TOL = 1e-10
IMAGE_SWITCH = 0.05
_IMAGES = 3


def _series_order(s: float, tol: float = SERIES_TOL) -> int:
    a = math.pi**2 * s / 8
    K = 1
    while math.exp(-a * K * K) / max(1 - math.exp(-a * (2 * K + 1)), 1e-300) > tol:
        K += 1
    return K


def kernel_1d_series(s: float, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = np.arange(1, _series_order(s) + 1)
    shape = np.broadcast(x, y).shape
    xa = np.broadcast_to(x, shape)[..., None]
    ya = np.broadcast_to(y, shape)[..., None]
    terms = np.cos(k * np.pi * (xa + 1) / 2) * np.cos(k * np.pi * (ya + 1) / 2) * np.exp(-(k * k) * np.pi**2 * s / 8)
    return 0.5 + terms.sum(axis=-1)


def kernel_1d_images(s: float, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    norm = 1.0 / math.sqrt(2 * math.pi * s)
    out = np.zeros(np.broadcast(x, y).shape)
    for m in range(-_IMAGES, _IMAGES + 1):
        out += np.exp(-((x - y - 4 * m) ** 2) / (2 * s)) + np.exp(-((x + y + 2 - 4 * m) ** 2) / (2 * s))
    return norm * out


def kernel_1d(s: float, x, y) -> np.ndarray:
    """Neumann heat kernel of (1/2) d^2/dx^2 on [-1, 1] at time s."""
    return kernel_1d_images(s, x, y) if s < IMAGE_SWITCH else kernel_1d_series(s, x, y)


def rbm_box_density(t: float, x, y, c: float = 1.0) -> np.ndarray:
    """Transition density of X_{ct}, X reflecting BM on [-1, 1]^d; product over coordinates."""
    if t <= 0:
        raise ValueError("t must be positive")
    if c <= 0:
        raise ValueError("c must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12) or np.any(np.abs(y) > 1 + 1e-12):
        raise ValueError("points must lie in [-1, 1]^d")
    x = np.atleast_1d(x)
    y = np.atleast_1d(y)
    s = c * t
    out = kernel_1d(s, x[..., 0], y[..., 0])
    for i in range(1, x.shape[-1]):
        out = out * kernel_1d(s, x[..., i], y[..., i])
    return out


def rbm_orthant_sample(d1: int, d2: int, x, times, c: float = 1.0, seed: int = 0,
                       n_paths: int = 1) -> np.ndarray:
    """Samples at ``times`` of reflecting BM on R_+^{d1} x R^{d2}, shape (n_paths, len(times), d).

    The first d1 coordinates are |x_i + W_i| for a free Brownian path W, which has the
    law of normally reflected BM; the folding is applied at grid resolution.
    """
    d = d1 + d2
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"start must have {d} coordinates")
    if np.any(x[:d1] < 0):
        raise ValueError("start must lie in the closed orthant")
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ValueError("times must be sorted and nonnegative")
    rng = np.random.Generator(np.random.Philox(seed))
    dt = np.diff(np.concatenate([[0.0], times]))
    steps = rng.standard_normal((n_paths, len(times), d)) * np.sqrt(c * dt)[None, :, None]
    free = x + np.cumsum(steps, axis=1)
    free[..., :d1] = np.abs(free[..., :d1])
    return free


def _corner_excess(s: float) -> float:
    """2 * sum_k exp(-k^2 pi^2 s / 8): 2 k_s(1, 1) - 1 in one dimension."""
    k = np.arange(1, _series_order(s) + 1)
    return float(2 * np.sum(np.exp(-(k * k) * np.pi**2 * s / 8)))


def _corner_deficit(s: float) -> float:
    """1 - 2 k_s(1, -1)."""
    k = np.arange(1, _series_order(s) + 1)
    return float(-2 * np.sum((-1.0) ** k * np.exp(-(k * k) * np.pi**2 * s / 8)))


def box_deviation(t: float, p: float = math.inf, d: int = 1, c: float = 1.0, grid: int = 41) -> float:
    """sup_x || 2^d q_t(x, .) - 1 ||_{L^p(uniform)} on [-1, 1]^d.

    For p = inf the extremes sit at the corners; finite p uses Gauss-Legendre
    quadrature in y and a uniform grid of starting points x.
    """
    s = c * t
    if math.isinf(p):
        return max((1 + _corner_excess(s)) ** d - 1, 1 - (1 - _corner_deficit(s)) ** d)
    nodes, weights = np.polynomial.legendre.leggauss(64)
    xs = np.linspace(-1, 1, grid)
    k1 = 2 * kernel_1d(s, xs[:, None], nodes[None, :])      # (grid, nodes), density w.r.t. uniform
    w = weights / 2
    best = 0.0
    for idx in product(range(grid), repeat=d):
        dens = k1[idx[0]]
        wt = w
        for i in idx[1:]:
            dens = np.multiply.outer(dens, k1[i])
            wt = np.multiply.outer(wt, w)
        val = float(np.sum(np.abs(dens - 1) ** p * wt) ** (1 / p))
        best = max(best, val)
    return best


def rbm_box_mixing_time(p: float = math.inf, c: float = 1.0, d: int = 1, threshold: float = 0.25,
                        xtol: float = 1e-8) -> float:
    """inf{t : box_deviation(t) < threshold}, solved by bracketing and bisection."""
    if p < 1:
        raise ValueError("p must lie in [1, inf]")

    def f(t):
        return box_deviation(t, p, d, c) - threshold

    hi = 1.0 / c
    while f(hi) >= 0:
        hi *= 2
    lo = hi / 2
    while f(lo) < 0 and lo > 1e-6:
        lo /= 2
    return brentq(f, lo, hi, xtol=xtol * hi, rtol=1e-12)


def psi_branches(R: float, t: float) -> tuple[float, float]:
    """(e^{-R^2/t}, e^{-R log(R/t)})."""
    if R <= 0 or t <= 0:
        raise ValueError("R and t must be positive")
    return math.exp(-R * R / t), math.exp(-R * math.log(R / t))


def psi_envelope(R: float, t: float) -> float:
    """Psi(R, t): the Gaussian branch for t > R/e, the other for t < R/e, the larger at the seam."""
    gauss, poisson = psi_branches(R, t)
    seam = R / math.e
    if t > seam:
        return gauss
    if t < seam:
        return poisson
    return max(gauss, poisson)
