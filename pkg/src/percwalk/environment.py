"""Random conductance environments, edge classes and cluster extraction.

An :class:`Environment` stores conductances on a rectangular window of the
domain as an array ``weights[i][x]`` holding the weight of the edge
``{x, x + e_i}``.  Weights are drawn from a counter-based generator keyed on
the seed and the canonical edge id (lower endpoint, direction), so the same
edge receives the same weight in every window and every domain.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import rng
from .lattice import CapacityError, DomainSpec, grid_coords, vertex_cap, window_bounds

# bond percolation thresholds of Z^d (d=2 exact, others numerical estimates)
BOND_PC = {1: 1.0, 2: 0.5, 3: 0.2488, 4: 0.1601, 5: 0.1182, 6: 0.0942}


class EmptyClusterError(RuntimeError):
    pass


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ConductanceLaw:
    """I.i.d. law of a conductance: an atom at 0 of mass ``1 - p1`` plus a positive part.

    ``bernoulli``: weight 1 with probability p1.
    ``uniform``: Uniform(a, b) with probability p1.
    ``pareto``: P(mu > x) = p1 (x / c)^(-exponent) for x >= c.
    ``constant``: weight w everywhere.
    """

    kind: Literal["bernoulli", "uniform", "pareto", "constant"]
    p1: float = 1.0
    a: float | None = None
    b: float | None = None
    c: float | None = None
    exponent: float | None = None
    w: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError("p1 must lie in [0, 1]")
        if self.kind == "bernoulli":
            pass
        elif self.kind == "uniform":
            if self.a is None or self.b is None or not 0 < self.a < self.b:
                raise ValueError("uniform law needs 0 < a < b")
        elif self.kind == "pareto":
            if self.c is None or self.c <= 0:
                raise ValueError("pareto law needs c > 0")
            if self.exponent is None or self.exponent <= 1:
                raise ValueError("pareto exponent must exceed 1 for a finite mean")
        elif self.kind == "constant":
            if self.w is None or self.w <= 0:
                raise ValueError("constant law needs w > 0")
            if self.p1 != 1.0:
                raise ValueError("constant law has p1 = 1")
        else:
            raise ValueError(f"unknown law {self.kind!r}")

    @classmethod
    def bernoulli(cls, p: float) -> "ConductanceLaw":
        return cls("bernoulli", p1=p)

    @classmethod
    def uniform(cls, a: float, b: float, p1: float = 1.0) -> "ConductanceLaw":
        return cls("uniform", p1=p1, a=a, b=b)

    @classmethod
    def pareto(cls, c: float, exponent: float, p1: float = 1.0) -> "ConductanceLaw":
        return cls("pareto", p1=p1, c=c, exponent=exponent)

    @classmethod
    def constant(cls, w: float = 1.0) -> "ConductanceLaw":
        return cls("constant", w=w)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "ConductanceLaw":
        return cls(**data)

    def mean(self) -> float:
        if self.kind == "bernoulli":
            return self.p1
        if self.kind == "uniform":
            return self.p1 * (self.a + self.b) / 2
        if self.kind == "pareto":
            return self.p1 * self.c * self.exponent / (self.exponent - 1)
        return self.w

    def lower_bound(self) -> float:
        """Smallest positive value the law can take."""
        return {"bernoulli": 1.0, "uniform": self.a, "pareto": self.c, "constant": self.w}[self.kind]

    def _cdf_positive(self, x: float) -> float:
        """P(mu <= x | mu > 0)."""
        if self.kind in ("bernoulli", "constant"):
            value = 1.0 if self.kind == "bernoulli" else self.w
            return 1.0 if x >= value else 0.0
        if self.kind == "uniform":
            return min(max((x - self.a) / (self.b - self.a), 0.0), 1.0)
        if x < self.c:
            return 0.0
        return 1.0 - (x / self.c) ** (-self.exponent)

    def q(self, K: float) -> float:
        """P(0 < mu < 1/K) + P(mu > K), computed from the law."""
        lo = 1.0 / K
        if self.kind == "uniform":
            below = max(0.0, min(lo, self.b) - self.a) / (self.b - self.a)
        elif self.kind == "pareto":
            below = self._cdf_positive(lo) if lo > self.c else 0.0
        else:
            value = self.lower_bound()
            below = 1.0 if value < lo else 0.0
        above = 1.0 - self._cdf_positive(K)
        return self.p1 * (below + above)

    def default_K(self) -> float:
        """Smallest power of two with q(K) < (p1 - 1/2) / 2."""
        target = (self.p1 - 0.5) / 2
        if target <= 0:
            raise ValueError("p1 <= 1/2: choose K explicitly")
        K = 1.0
        while self.q(K) >= target:
            K *= 2
            if K > 2.0**60:
                raise ValueError("no admissible K found")
        return K

    def check_supercritical(self, d: int) -> None:
        pc = BOND_PC.get(d, 0.0)
        if self.p1 <= pc and not (d == 1 and self.p1 == 1.0):
            warnings.warn(f"p1={self.p1} is not above the bond threshold {pc} in d={d}", stacklevel=2)

    def sample(self, u_atom: np.ndarray, u_value: np.ndarray) -> np.ndarray:
        open_ = u_atom < self.p1
        if self.kind == "bernoulli":
            value = np.ones_like(u_value)
        elif self.kind == "uniform":
            value = self.a + (self.b - self.a) * u_value
        elif self.kind == "pareto":
            value = self.c * u_value ** (-1.0 / self.exponent)
        else:
            value = np.full_like(u_value, self.w)
        return np.where(open_, value, 0.0)

    def scaled(self, s: float) -> "ConductanceLaw":
        """The law of s * mu."""
        if self.kind == "bernoulli":
            raise ValueError("bernoulli weights are fixed at 1; use uniform or constant")
        if self.kind == "uniform":
            return ConductanceLaw.uniform(s * self.a, s * self.b, self.p1)
        if self.kind == "pareto":
            return ConductanceLaw.pareto(s * self.c, self.exponent, self.p1)
        return ConductanceLaw.constant(s * self.w)


def edge_weights(law: ConductanceLaw, seed: int, base, direction: int) -> np.ndarray:
    """Weights of the Z^d edges ``{x, x + e_direction}`` for base points ``x`` (shape (M, d))."""
    base = np.asarray(base, dtype=np.int64)
    cols = [base[..., k] for k in range(base.shape[-1])]
    u_atom = rng.uniform(seed, rng.STREAM_EDGE_ATOM, direction, *cols)
    u_value = rng.uniform(seed, rng.STREAM_EDGE_VALUE, direction, *cols)
    return law.sample(u_atom, u_value)


def edge_weight(law: ConductanceLaw, seed: int, x, y) -> float:
    """Weight of a single unit edge, endpoints in any order."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    diff = y - x
    if np.abs(diff).sum() != 1:
        raise ValueError("not a unit edge")
    i = int(np.flatnonzero(diff)[0])
    base = x if diff[i] > 0 else y
    return float(edge_weights(law, seed, base[None, :], i)[0])


@dataclass(frozen=True, eq=False)
class Environment:
    domain: DomainSpec
    law: ConductanceLaw
    seed: int
    K: float
    lo: tuple[int, ...]
    hi: tuple[int, ...]
    weights: np.ndarray = field(repr=False)
    radius: int | None = None
    explicit: bool = False

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(b - a + 1) for a, b in zip(self.lo, self.hi))

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def coords(self) -> np.ndarray:
        return grid_coords(self.lo, self.hi)

    def flat_index(self, coords) -> np.ndarray:
        """Flat vertex index of each point, -1 when outside the window."""
        x = np.asarray(coords, dtype=np.int64)
        rel = x - np.array(self.lo)
        shape = np.array(self.shape)
        inside = np.all((rel >= 0) & (rel < shape), axis=-1)
        rel = np.where(inside[..., None], rel, 0)
        idx = np.ravel_multi_index(tuple(np.moveaxis(rel, -1, 0)), self.shape)
        return np.where(inside, idx, -1)

    def index_of(self, coords) -> int:
        i = int(self.flat_index(np.asarray(coords)[None, :])[0])
        if i < 0:
            raise KeyError(f"{tuple(coords)} is outside the window")
        return i

    def edges(self, mask: np.ndarray | None = None):
        """Edge list ``(u, v, weight, direction)`` as flat indices, ``u`` the lower endpoint.

        By default only open edges; ``mask`` (same shape as ``weights``) selects others.
        """
        sel = self.weights > 0 if mask is None else mask
        us, vs, ws, ds = [], [], [], []
        strides = np.cumprod((self.shape[1:] + (1,))[::-1])[::-1]
        flat_w = self.weights.reshape(self.d, -1)
        flat_sel = sel.reshape(self.d, -1)
        for i in range(self.d):
            u = np.flatnonzero(flat_sel[i])
            us.append(u)
            vs.append(u + int(strides[i]))
            ws.append(flat_w[i][u])
            ds.append(np.full(len(u), i))
        return (np.concatenate(us), np.concatenate(vs), np.concatenate(ws), np.concatenate(ds))

    @cached_property
    def vertex_weight(self) -> np.ndarray:
        """mu_x, total conductance at each window vertex."""
        total = np.zeros(self.shape)
        for i in range(self.d):
            w = self.weights[i]
            total += w
            sl_dst = [slice(None)] * self.d
            sl_src = [slice(None)] * self.d
            sl_dst[i] = slice(1, None)
            sl_src[i] = slice(None, -1)
            total[tuple(sl_dst)] += w[tuple(sl_src)]
        return total.ravel()

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Vertices with a domain neighbour outside the window."""
        x = self.coords
        dom_lo = self.domain.lower_limits()
        dom_hi = self.domain.upper_limits()
        out = np.zeros(len(x), dtype=bool)
        for i in range(self.d):
            out |= (x[:, i] == self.lo[i]) & (self.lo[i] - 1 >= dom_lo[i])
            out |= (x[:, i] == self.hi[i]) & (self.hi[i] + 1 <= dom_hi[i])
        return out

    @cached_property
    def neighbor_table(self) -> tuple[np.ndarray, np.ndarray]:
        """(N, 2d) neighbour indices (-1 if absent) and conductances, order +e_1, -e_1, +e_2, ..."""
        N = self.n_vertices
        strides = np.cumprod((self.shape[1:] + (1,))[::-1])[::-1]
        nbr = np.full((N, 2 * self.d), -1, dtype=np.int64)
        wts = np.zeros((N, 2 * self.d))
        flat_w = self.weights.reshape(self.d, -1)
        idx = np.arange(N)
        for i in range(self.d):
            w = flat_w[i]
            up = w > 0
            nbr[up, 2 * i] = idx[up] + strides[i]
            wts[up, 2 * i] = w[up]
            src = idx[up]
            dst = src + strides[i]
            nbr[dst, 2 * i + 1] = src
            wts[dst, 2 * i + 1] = w[up]
        return nbr, wts

    def restrict(self, lo, hi) -> "Environment":
        """Sub-window view with edges leaving the sub-window removed."""
        lo = np.maximum(np.asarray(lo), self.lo)
        hi = np.minimum(np.asarray(hi), self.hi)
        sl = tuple(slice(a - b, c - b + 1) for a, b, c in zip(lo, self.lo, hi))
        w = self.weights[(slice(None),) + sl].copy()
        for i in range(self.d):
            idx = [slice(None)] * self.d
            idx[i] = -1
            w[i][tuple(idx)] = 0.0
        return Environment(self.domain, self.law, self.seed, self.K, tuple(int(v) for v in lo),
                           tuple(int(v) for v in hi), w, None, self.explicit)


def _resolve_window(domain: DomainSpec, window) -> tuple[np.ndarray, np.ndarray, int | None]:
    if isinstance(window, (int, np.integer)):
        lo, hi = window_bounds(domain, int(window))
        return lo, hi, int(window)
    lo, hi = (np.asarray(w, dtype=np.int64) for w in window)
    lo = np.maximum(lo, domain.lower_limits()).astype(np.int64)
    hi = np.minimum(hi, domain.upper_limits()).astype(np.int64)
    if np.any(hi < lo):
        raise GeometryError("empty window")
    return lo, hi, None


def sample_environment(domain: DomainSpec, window, law: ConductanceLaw, seed: int,
                       K: float | None = None) -> Environment:
    """Sample conductances on a window; ``window`` is an l-inf radius or a ``(lo, hi)`` pair."""
    law.check_supercritical(domain.d)
    if K is None:
        K = law.default_K() if law.p1 > 0.5 else 2.0
    if K <= 0:
        raise ValueError("K must be positive")
    lo, hi, radius = _resolve_window(domain, window)
    shape = tuple(int(v) for v in hi - lo + 1)
    count = int(np.prod(shape))
    if count > vertex_cap():
        raise CapacityError(f"{count} vertices exceeds cap {vertex_cap()}")
    coords = grid_coords(lo, hi)
    weights = np.zeros((domain.d,) + shape)
    for i in range(domain.d):
        w = edge_weights(law, seed, coords, i).reshape(shape)
        # edges leaving the window through the top face are not part of it
        idx = [slice(None)] * domain.d
        idx[i] = -1
        w[tuple(idx)] = 0.0
        weights[i] = w
    return Environment(domain, law, int(seed), float(K), tuple(int(v) for v in lo),
                       tuple(int(v) for v in hi), weights, radius)


def environment_from_weights(domain: DomainSpec, lo, hi, weights, law=None, seed=0, K=2.0) -> Environment:
    """Build an environment from explicit weights (hand-made test configurations)."""
    weights = np.asarray(weights, dtype=float)
    law = law or ConductanceLaw.constant(1.0)
    return Environment(domain, law, seed, float(K), tuple(int(v) for v in lo),
                       tuple(int(v) for v in hi), weights, None, explicit=True)


@dataclass(frozen=True, eq=False)
class EdgeClasses:
    o1: np.ndarray
    oR: np.ndarray
    oS: np.ndarray
    o2: np.ndarray


def _is_irregular(w: np.ndarray, K: float) -> np.ndarray:
    return ((w > 0) & (w < 1.0 / K)) | (w > K)


def classify_edges(env: Environment) -> EdgeClasses:
    """O_1 open edges, O_R irregular, O_S open edges touching an irregular edge, O_2 = O_1 \\ O_S.

    Irregular edges are looked up on all of Z^d, including edges outside the
    window or the domain, so the classes of window edges do not depend on the window.
    """
    o1 = env.weights > 0
    oR = o1 & _is_irregular(env.weights, env.K)
    coords = env.coords
    touch = np.zeros(env.n_vertices, dtype=bool)
    for i in range(env.d):
        if env.explicit:
            # hand-made weights: nothing is known outside the window
            up = env.weights[i].ravel()
            down = env.neighbor_table[1][:, 2 * i + 1]
        else:
            up = edge_weights(env.law, env.seed, coords, i)
            shifted = coords.copy()
            shifted[:, i] -= 1
            down = edge_weights(env.law, env.seed, shifted, i)
        touch |= _is_irregular(up, env.K) | _is_irregular(down, env.K)
    touch = touch.reshape(env.shape)
    oS = np.zeros_like(o1)
    for i in range(env.d):
        t_hi = np.zeros(env.shape, dtype=bool)
        idx_dst = [slice(None)] * env.d
        idx_src = [slice(None)] * env.d
        idx_dst[i] = slice(None, -1)
        idx_src[i] = slice(1, None)
        t_hi[tuple(idx_dst)] = touch[tuple(idx_src)]
        oS[i] = o1[i] & (touch | t_hi)
    return EdgeClasses(o1, oR, oS, o1 & ~oS)


def _components(n: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    graph = coo_matrix((np.ones(len(u)), (u, v)), shape=(n, n)).tocsr()
    _, labels = connected_components(graph, directed=False)
    return labels


def _largest_label(labels: np.ndarray, eligible: np.ndarray | None = None) -> tuple[int, int]:
    lab = labels if eligible is None else labels[eligible]
    if len(lab) == 0:
        return -1, 0
    counts = np.bincount(lab)
    best = int(np.argmax(counts))
    return best, int(counts[best])


def linf_diameters(labels: np.ndarray, coords: np.ndarray, n_labels: int) -> np.ndarray:
    d = coords.shape[1]
    lo = np.full((n_labels, d), np.iinfo(np.int64).max)
    hi = np.full((n_labels, d), np.iinfo(np.int64).min)
    for k in range(d):
        np.minimum.at(lo[:, k], labels, coords[:, k])
        np.maximum.at(hi[:, k], labels, coords[:, k])
    return (hi - lo).max(axis=1)


@dataclass(frozen=True, eq=False)
class ClusterIndex:
    env: Environment
    classes: EdgeClasses
    labels1: np.ndarray
    labels2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    hole_labels: np.ndarray
    hole_sizes: np.ndarray
    hole_diameters: np.ndarray
    hole_censored: np.ndarray

    @property
    def holes(self) -> np.ndarray:
        return self.hole_labels >= 0

    def inner_mask(self, radius: int) -> np.ndarray:
        return np.abs(self.env.coords).max(axis=1) <= radius

    def hole_diameter_at(self) -> np.ndarray:
        """diam H(x) for every vertex (0 off the holes)."""
        out = np.zeros(self.env.n_vertices, dtype=np.int64)
        h = self.hole_labels >= 0
        out[h] = self.hole_diameters[self.hole_labels[h]]
        return out


def build_cluster_index(env: Environment, classes: EdgeClasses | None = None) -> ClusterIndex:
    """C_1 proxy = largest O_1 component; C_2 proxy = largest O_2 component inside it;
    holes = O_1-components of C_1 \\ C_2."""
    if env.n_vertices < 4:
        raise GeometryError("window must hold at least 4 vertices")
    classes = classify_edges(env) if classes is None else classes
    N = env.n_vertices
    u1, v1, _, _ = env.edges(classes.o1)
    labels1 = _components(N, u1, v1)
    best1, size1 = _largest_label(labels1)
    if size1 < 2:
        raise EmptyClusterError("largest open cluster has fewer than 2 vertices")
    c1 = labels1 == best1
    u2, v2, _, _ = env.edges(classes.o2)
    labels2 = _components(N, u2, v2)
    best2, size2 = _largest_label(labels2, c1)
    c2 = (labels2 == best2) & c1 if size2 >= 2 else np.zeros(N, dtype=bool)

    hole = c1 & ~c2
    keep = hole[u1] & hole[v1]
    hl = _components(N, u1[keep], v1[keep])
    hole_labels = np.full(N, -1, dtype=np.int64)
    if hole.any():
        _, compact = np.unique(hl[hole], return_inverse=True)
        hole_labels[hole] = compact
        n_h = int(compact.max()) + 1
        sizes = np.bincount(compact, minlength=n_h)
        diam = linf_diameters(compact, env.coords[hole], n_h)
        censored = np.zeros(n_h, dtype=bool)
        np.logical_or.at(censored, compact, env.boundary_mask[hole])
    else:
        sizes = np.zeros(0, dtype=np.int64)
        diam = np.zeros(0, dtype=np.int64)
        censored = np.zeros(0, dtype=bool)
    return ClusterIndex(env, classes, labels1, labels2, c1, c2, hole_labels, sizes, diam, censored)


@dataclass(frozen=True)
class HoleStatistics:
    sizes: np.ndarray
    diameters: np.ndarray
    censored: np.ndarray
    k: np.ndarray
    tail: np.ndarray
    n_cluster_vertices: int

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean()) if len(self.censored) else 0.0


def hole_statistics(index: ClusterIndex, radius: int | None = None) -> HoleStatistics:
    """Per-hole census and the vertex-averaged tail P(diam H(x) >= k), k >= 1.

    Only holes meeting the inner region (``|x|_inf <= radius``) are reported;
    censored holes are kept in the census but left out of the tail.
    """
    region = np.ones(index.env.n_vertices, dtype=bool) if radius is None else index.inner_mask(radius)
    in_c1 = index.c1 & region
    n_c1 = int(in_c1.sum())
    hl = index.hole_labels
    seen = np.unique(hl[(hl >= 0) & region])
    sizes = index.hole_sizes[seen]
    diam = index.hole_diameters[seen]
    cens = index.hole_censored[seen]
    kmax = int(diam[~cens].max()) if (~cens).any() else 0
    k = np.arange(1, kmax + 1)
    if kmax == 0 or n_c1 == 0:
        return HoleStatistics(sizes, diam, cens, k, np.zeros(len(k)), n_c1)
    member = (hl >= 0) & in_c1
    vd = index.hole_diameters[hl[member]]
    vc = index.hole_censored[hl[member]]
    vd = vd[~vc]
    tail = np.array([(vd >= kk).sum() for kk in k], dtype=float) / n_c1
    return HoleStatistics(sizes, diam, cens, k, tail, n_c1)


def largest_component_in(env: Environment, vertex_mask: np.ndarray, edge_mask: np.ndarray) -> np.ndarray:
    """Vertex mask of the largest component of the subgraph induced on ``vertex_mask``."""
    u, v, _, _ = env.edges(edge_mask)
    keep = vertex_mask[u] & vertex_mask[v]
    labels = _components(env.n_vertices, u[keep], v[keep])
    best, _ = _largest_label(labels, vertex_mask)
    return (labels == best) & vertex_mask


def _cube_mask(env: Environment, lo, hi) -> np.ndarray:
    x = env.coords
    return np.all((x >= np.asarray(lo)) & (x <= np.asarray(hi)), axis=1)


def _cube_inside(env: Environment, lo, hi) -> bool:
    return bool(np.all(np.asarray(lo) >= env.lo) and np.all(np.asarray(hi) <= env.hi))


@dataclass(frozen=True)
class WindowAgreement:
    agree: bool
    mismatches: int


def window_agreement_check(env: Environment, n: int, eps: float,
                           index: ClusterIndex | None = None) -> WindowAgreement:
    """Compare C+(Q2) and the window's largest cluster on Q1.

    Q1 = [0, floor(n(1+eps))]^d and Q2 = [0, 2n]^d, both containing the origin corner.
    The domain must be Z_+^d so that the faces of the cubes through 0 are domain faces.
    """
    if env.domain.kind != "orthant" or env.domain.d1 != env.d:
        raise GeometryError("window agreement is defined on Z_+^d")
    side1 = math.floor(n * (1 + eps))
    if not 0 < eps < 1 or side1 > 2 * n:
        raise GeometryError("Q1 must nest inside Q2")
    d = env.d
    q1_hi = [side1] * d
    q2_hi = [2 * n] * d
    if not _cube_inside(env, [0] * d, q2_hi):
        raise GeometryError("Q2 does not fit in the window")
    index = build_cluster_index(env) if index is None else index
    q1 = _cube_mask(env, [0] * d, q1_hi)
    q2 = _cube_mask(env, [0] * d, q2_hi)
    local = largest_component_in(env, q2, index.classes.o1)
    mismatch = int(((local & q1) != (index.c1 & q1)).sum())
    return WindowAgreement(mismatch == 0, mismatch)


@dataclass(frozen=True)
class MeasureComparison:
    difference: int
    nu_full: int
    nu_orthant: int


def measure_comparison(env_orthant: Environment, env_full: Environment, n: int,
                       index_orthant: ClusterIndex | None = None,
                       index_full: ClusterIndex | None = None) -> MeasureComparison:
    """Vertices of Q = [0, n]^d in the full-lattice cluster proxy but not in the orthant one."""
    if env_orthant.seed != env_full.seed or env_orthant.law != env_full.law:
        raise ValueError("environments must share seed and law to be coupled")
    if env_orthant.domain.kind != "orthant" or env_full.domain.kind != "full":
        raise ValueError("expected an orthant and a full-lattice environment")
    d = env_orthant.d
    lo, hi = [0] * d, [n] * d
    if not (_cube_inside(env_orthant, lo, hi) and _cube_inside(env_full, lo, hi)):
        raise GeometryError("Q does not fit in both windows")
    io = build_cluster_index(env_orthant) if index_orthant is None else index_orthant
    jf = build_cluster_index(env_full) if index_full is None else index_full
    qo = _cube_mask(env_orthant, lo, hi)
    qf = _cube_mask(env_full, lo, hi)
    pts = env_orthant.coords[qo]
    in_orth = io.c1[qo]
    in_full = jf.c1[env_full.flat_index(pts)]
    diff = int((in_full & ~in_orth).sum())
    return MeasureComparison(diff, int(jf.c1[qf].sum()), int(in_orth.sum()))


# --- text snapshot -----------------------------------------------------------------

def write_snapshot(env: Environment, path) -> None:
    """One line per edge ``x_1 .. x_d y_1 .. y_d weight`` after a ``#`` header."""
    u, v, w, _ = env.edges(np.ones_like(env.weights, dtype=bool) & _edge_exists(env))
    xs = env.coords
    with open(path, "w") as fh:
        fh.write("# percwalk environment snapshot v1\n")
        fh.write(f"# seed {env.seed}\n")
        fh.write(f"# law {json.dumps(env.law.to_dict(), sort_keys=True)}\n")
        fh.write(f"# K {env.K!r}\n")
        fh.write(f"# domain {json.dumps(env.domain.to_dict(), sort_keys=True)}\n")
        fh.write(f"# window {' '.join(map(str, env.lo))} {' '.join(map(str, env.hi))}\n")
        for a, b, wt in zip(u, v, w):
            fh.write(" ".join(map(str, xs[a])) + " " + " ".join(map(str, xs[b])) + f" {float(wt)!r}\n")


def _edge_exists(env: Environment) -> np.ndarray:
    mask = np.ones_like(env.weights, dtype=bool)
    for i in range(env.d):
        idx = [slice(None)] * env.d
        idx[i] = -1
        mask[i][tuple(idx)] = False
    return mask


def read_snapshot(path) -> Environment:
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                parts = line[1:].strip().split(" ", 1)
                if len(parts) == 2:
                    header[parts[0]] = parts[1]
                continue
            if line.strip():
                rows.append(line.split())
    domain = DomainSpec.from_dict(json.loads(header["domain"]))
    law = ConductanceLaw.from_dict(json.loads(header["law"]))
    d = domain.d
    win = [int(v) for v in header["window"].split()]
    lo, hi = np.array(win[:d]), np.array(win[d:])
    shape = tuple(hi - lo + 1)
    weights = np.zeros((d,) + shape)
    for row in rows:
        x = np.array(row[:d], dtype=np.int64)
        y = np.array(row[d:2 * d], dtype=np.int64)
        i = int(np.flatnonzero(y - x)[0])
        weights[(i,) + tuple(x - lo)] = float(row[2 * d])
    return Environment(domain, law, int(header["seed"]), float(header["K"]),
                       tuple(int(v) for v in lo), tuple(int(v) for v in hi), weights, None)
