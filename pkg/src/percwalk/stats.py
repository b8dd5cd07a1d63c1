"""Estimators linking simulations to the continuum references."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import stats as sps

from .continuum import rbm_box_density
from .spectral import SpectralInstance, heat_kernel


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalSample:
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if len(v) == 0:
            raise InsufficientData("empty sample")
        object.__setattr__(self, "values", v)

    @property
    def count(self) -> int:
        return len(self.values)

    def cdf(self, x) -> np.ndarray:
        return np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.count


def ks_distance(sample, cdf) -> float:
    """sup_x |F_n(x) - F(x)| for a continuous or discrete oracle CDF."""
    s = sample if isinstance(sample, EmpiricalSample) else EmpiricalSample(sample)
    x = s.values
    n = s.count
    F = np.asarray(cdf(x), dtype=float)
    # empirical CDF just after and just before each distinct value
    right = np.searchsorted(x, x, side="right") / n
    left = np.searchsorted(x, x, side="left") / n
    F_left = np.asarray(cdf(np.nextafter(x, -np.inf)), dtype=float)
    return float(min(1.0, max(np.max(np.abs(right - F)), np.max(np.abs(left - F_left)))))


def half_normal_cdf(variance: float):
    sd = math.sqrt(variance)
    return lambda x: np.where(np.asarray(x) < 0, 0.0, 2 * sps.norm.cdf(np.asarray(x) / sd) - 1)


def folded_normal_cdf(start: float, variance: float):
    """CDF of |start + N(0, variance)|."""
    sd = math.sqrt(variance)

    def F(x):
        x = np.asarray(x, dtype=float)
        val = sps.norm.cdf((x - start) / sd) - sps.norm.cdf((-x - start) / sd)
        return np.where(x < 0, 0.0, val)

    return F


@dataclass(frozen=True)
class DiffusionFit:
    c_hat: float
    ci_low: float
    ci_high: float
    batch_estimates: np.ndarray
    times: np.ndarray

    def overlaps(self, other: "DiffusionFit") -> bool:
        return bool(self.ci_low <= other.ci_high and other.ci_low <= self.ci_high)


def diffusion_constant_fit(displacements, times, n_batches: int = 20, level: float = 0.95) -> DiffusionFit:
    """Fit E[X_t^2] = c t through the origin, per coordinate, with a batch-means CI.

    ``displacements`` has shape (paths, len(times)) or (paths, len(times), k); the k
    coordinates are pooled.  Paths are split into contiguous batches in input order.
    """
    x = np.asarray(displacements, dtype=float)
    t = np.asarray(times, dtype=float)
    if x.ndim == 2:
        x = x[..., None]
    if len(t) < 2:
        raise InsufficientData("need at least two time points")
    if x.shape[1] != len(t):
        raise ValueError("displacements and times disagree")
    if np.all(x == x.flat[0]):
        raise InsufficientData("degenerate data (all displacements equal)")
    if len(x) < n_batches:
        raise InsufficientData(f"need at least {n_batches} paths")
    est = []
    for chunk in np.array_split(x, n_batches):
        m2 = (chunk**2).mean(axis=(0, 2))
        est.append(float(t @ m2 / (t @ t)))
    est = np.array(est)
    c = float(est.mean())
    half = sps.t.ppf(0.5 + level / 2, n_batches - 1) * est.std(ddof=1) / math.sqrt(n_batches)
    return DiffusionFit(c, c - half, c + half, est, t)


@dataclass(frozen=True)
class TailFit:
    k: np.ndarray
    log_freq: np.ndarray
    slope: float
    intercept: float
    r2: float
    censored_fraction: float = 0.0


def tail_fit(k, counts, total: float | None = None, censored_fraction: float = 0.0) -> TailFit:
    """Weighted least squares of log(counts / total) on k with weights = counts.

    Points with zero count are dropped; the weights approximate the inverse variance
    of a log-frequency.
    """
    k = np.asarray(k, dtype=float)
    c = np.asarray(counts, dtype=float)
    keep = c > 0
    if keep.sum() < 3:
        raise InsufficientData("tail fit needs at least 3 support points with positive counts")
    k, c = k[keep], c[keep]
    total = c.max() if total is None else float(total)
    y = np.log(c / total)
    w = c / c.sum()
    kb = w @ k
    yb = w @ y
    sxx = w @ (k - kb) ** 2
    if sxx == 0:
        raise InsufficientData("support points coincide")
    slope = float(w @ ((k - kb) * (y - yb)) / sxx)
    intercept = float(yb - slope * kb)
    resid = y - (intercept + slope * k)
    sst = float(w @ (y - yb) ** 2)
    r2 = 1.0 if sst == 0 else float(min(1.0, max(0.0, 1 - (w @ resid**2) / sst)))
    return TailFit(k, y, slope, intercept, r2, censored_fraction)


def nearest_vertex(coords: np.ndarray, target) -> tuple[int, float]:
    """Index of the l-inf closest row of ``coords`` to ``target``; ties go to the
    lexicographically smallest coordinates."""
    dist = np.abs(coords - np.asarray(target, dtype=float)).max(axis=1)
    best = dist.min()
    cand = np.flatnonzero(dist <= best + 1e-12)
    order = np.lexsort(coords[cand].T[::-1])
    return int(cand[order[0]]), float(best)


@dataclass(frozen=True)
class LocalCltResult:
    n: int
    times: np.ndarray
    gap_by_time: np.ndarray
    skipped: int
    argmax: tuple

    @property
    def gap(self) -> float:
        return float(self.gap_by_time.max())


def local_clt_gap(inst: SpectralInstance, n: int, c: float, times, points, method: str = "eigen") -> LocalCltResult:
    """max over (x, y, t) of |n^d q_{n^2 t}(g_n(x), g_n(y)) - q_{ct}(x, y)|, x, y in ``points``.

    g_n(x) is the nearest instance vertex to n x; grid points with no vertex within
    l-inf distance (log n)^2 are skipped.
    """
    pts = np.asarray(points, dtype=float)
    d = inst.coords.shape[1]
    limit = math.log(n) ** 2
    rows, kept = [], []
    skipped = 0
    for p in pts:
        i, dist = nearest_vertex(inst.coords, n * p)
        if dist > limit:
            skipped += 1
            continue
        rows.append(i)
        kept.append(p)
    rows = np.array(rows)
    kept = np.array(kept)
    gaps = []
    where = None
    best = -1.0
    for t in times:
        Q = heat_kernel(inst, n * n * t, method)
        disc = n**d * Q[np.ix_(rows, rows)]
        cont = rbm_box_density(t, kept[:, None, :], kept[None, :, :], c)
        g = np.abs(disc - cont)
        gaps.append(float(g.max()))
        if g.max() > best:
            best = g.max()
            a, b = np.unravel_index(np.argmax(g), g.shape)
            where = (float(t), tuple(kept[a]), tuple(kept[b]))
    return LocalCltResult(n, np.asarray(times, dtype=float), np.array(gaps), skipped, where)


def box_grid(d: int, m: int = 5) -> np.ndarray:
    """The m^d tensor grid of equally spaced points in [-1, 1]^d."""
    axis = np.linspace(-1, 1, m)
    return np.array(list(product(axis, repeat=d)))


def is_nonincreasing(values, slack: float = 0.0) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= slack))


def is_nondecreasing(values, slack: float = 0.0) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) >= -slack))


def extrapolate(ns, values, order: int = 1) -> float:
    """Least-squares fit of a + b_1/n + ... + b_order/n^order; returns a."""
    ns = np.asarray(ns, dtype=float)
    A = np.stack([ns ** (-j) for j in range(order + 1)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.asarray(values, dtype=float), rcond=None)
    return float(coef[0])


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
