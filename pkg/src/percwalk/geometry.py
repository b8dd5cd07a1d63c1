"""Cluster metrics, ball comparisons, good balls and renormalization block events."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .environment import ClusterIndex, Environment, GeometryError, linf_diameters

POINCARE_CAP = 4000


class InsufficientWindow(GeometryError):
    """The window does not contain the region a check needs."""


class CarrierError(ValueError):
    """A point is outside the carrier set of the metric."""


class MetricKind(str, Enum):
    D1 = "d1"
    D1BAR = "d1bar"
    DZ = "dz"


@dataclass(frozen=True, eq=False)
class MetricGraph:
    kind: MetricKind
    C_A: float
    carrier: np.ndarray
    graph: object = field(repr=False)

    def distances_from(self, x: int) -> np.ndarray:
        if not self.carrier[x]:
            raise CarrierError(f"vertex {x} is not in the carrier of {self.kind.value}")
        out = dijkstra(self.graph, directed=False, indices=x, unweighted=self.kind != MetricKind.D1BAR)
        out[~self.carrier] = np.inf
        return out


def _z_edges(index: ClusterIndex) -> tuple[np.ndarray, np.ndarray]:
    """E_Z on C_2: O_1 edges inside C_2 plus pairs of C_2 vertices joined through a hole."""
    env = index.env
    u, v, _, _ = env.edges(index.classes.o1)
    c2 = index.c2
    inside = c2[u] & c2[v]
    us, vs = [u[inside]], [v[inside]]
    hl = index.hole_labels
    # C_2 vertices adjacent to each hole component
    a = np.concatenate([u, v])
    b = np.concatenate([v, u])
    touch = (hl[a] >= 0) & c2[b]
    pairs = np.unique(np.stack([hl[a[touch]], b[touch]], axis=1), axis=0)
    if len(pairs):
        splits = np.flatnonzero(np.diff(pairs[:, 0])) + 1
        for group in np.split(pairs[:, 1], splits):
            if len(group) > 1:
                i, j = np.triu_indices(len(group), 1)
                us.append(group[i])
                vs.append(group[j])
    return np.concatenate(us), np.concatenate(vs)


def metric_graph(kind: MetricKind | str, index: ClusterIndex, C_A: float = 1.0) -> MetricGraph:
    kind = MetricKind(kind)
    if C_A <= 0:
        raise ValueError("C_A must be positive")
    env = index.env
    N = env.n_vertices
    if kind == MetricKind.DZ:
        u, v = _z_edges(index)
        w = np.ones(len(u))
        carrier = index.c2
    else:
        u, v, mu, _ = env.edges(index.classes.o1)
        keep = index.c1[u] & index.c1[v]
        u, v, mu = u[keep], v[keep], mu[keep]
        w = np.minimum(C_A, mu ** -0.5) if kind == MetricKind.D1BAR else np.ones(len(u))
        carrier = index.c1
    graph = coo_matrix((w, (u, v)), shape=(N, N)).tocsr()
    return MetricGraph(kind, C_A, carrier, graph)


def distance(kind, env: Environment, index: ClusterIndex, x, y, C_A: float = 1.0) -> float:
    """Shortest-path distance; ``math.inf`` when x and y lie in different components."""
    mg = metric_graph(kind, index, C_A)
    i, j = env.index_of(x), env.index_of(y)
    if not mg.carrier[j]:
        raise CarrierError(f"{tuple(y)} is not in the carrier")
    return float(mg.distances_from(i)[j])


def ball(kind, env: Environment, index: ClusterIndex, x, R: float, C_A: float = 1.0) -> np.ndarray:
    """Flat indices of ``{y : dist(x, y) <= R}``."""
    mg = metric_graph(kind, index, C_A)
    dist = mg.distances_from(env.index_of(x))
    return np.flatnonzero(dist <= R + 1e-12)


def euclidean_ball(env: Environment, x, R: float, mask: np.ndarray | None = None) -> np.ndarray:
    dist = np.linalg.norm(env.coords - np.asarray(x), axis=1)
    inside = dist <= R + 1e-12
    if mask is not None:
        inside &= mask
    return np.flatnonzero(inside)


def require_window(env: Environment, x, margin: float) -> None:
    """The l-inf box of radius ``margin`` around x, cut to the domain, must lie in the window."""
    m = math.ceil(margin)
    x = np.asarray(x)
    lo = np.maximum(x - m, env.domain.lower_limits())
    hi = np.minimum(x + m, env.domain.upper_limits())
    if np.any(lo < env.lo) or np.any(hi > env.hi):
        raise InsufficientWindow(f"window does not contain the radius-{m} box around {tuple(x)}")


def ball_inclusion_chain(env: Environment, index: ClusterIndex, x, R: float,
                         c1: float, c2: float, C_A: float = 1.0) -> bool:
    """C_1 n B_E(x, c1 R) <= B_1(x, R) <= Bbar_1(x, C_A R) <= B_E(x, c2 R)."""
    require_window(env, x, max(c1, c2) * R + 1)
    i = env.index_of(x)
    d1 = metric_graph(MetricKind.D1, index).distances_from(i)
    d1b = metric_graph(MetricKind.D1BAR, index, C_A).distances_from(i)
    eu = np.linalg.norm(env.coords - np.asarray(x), axis=1)
    e_small = index.c1 & (eu <= c1 * R)
    b1 = d1 <= R + 1e-12
    b1b = d1b <= C_A * R + 1e-12
    e_big = eu <= c2 * R
    return bool(np.all(b1[e_small]) and np.all(b1b[b1]) and np.all(e_big[b1b]))


@dataclass(frozen=True)
class GoodBallConstants:
    C_V: float = 1.0
    C_P: float = 1.0
    C_W: float = 2.0
    C_R: float = 8.0
    C_D: float = 2.0
    C_A: float = 1.0


# frozen from a calibration on Constant(1), d=2, R in 2..7: the optimal Poincare
# constant peaks at 0.511 (R=2), so C_P carries a factor of about 2 of headroom
DEFAULT_CONSTANTS = GoodBallConstants(C_V=1.0, C_P=1.0, C_W=2.0, C_R=8.0, C_D=2.0, C_A=1.0)


def beta_exponent(d: int) -> float:
    return 1.0 - 2.0 / (1 + d)


@dataclass(frozen=True)
class GoodBallReport:
    x: tuple[int, ...]
    R: float
    constants: GoodBallConstants
    metric_comparison: bool
    separation: bool
    volume: bool
    holes: bool
    poincare: bool
    poincare_constant: float
    beta: float

    @property
    def good(self) -> bool:
        return self.metric_comparison and self.separation and self.volume and self.holes and self.poincare

    def row(self) -> list:
        return [" ".join(map(str, self.x)), self.R, int(self.metric_comparison), int(self.separation),
                int(self.volume), int(self.holes), int(self.poincare), repr(self.poincare_constant)]


def _o1_degree(index: ClusterIndex) -> np.ndarray:
    env = index.env
    deg = np.zeros(env.n_vertices)
    u, v, _, _ = env.edges(index.classes.o1)
    np.add.at(deg, u, 1)
    np.add.at(deg, v, 1)
    return deg


def poincare_forms(index: ClusterIndex, inner: np.ndarray, outer: np.ndarray):
    """Quadratic forms of the weak Poincare inequality on functions over ``outer``.

    Returns ``(A, E)`` with ``f^T A f = min_a sum_{inner} (f - a)^2 mu0`` and
    ``f^T E f = sum over ordered pairs {y, z} in O_1 inside ``outer`` of (f(y) - f(z))^2``.
    """
    env = index.env
    outer = np.asarray(outer)
    pos = np.full(env.n_vertices, -1)
    pos[outer] = np.arange(len(outer))
    u, v, _, _ = env.edges(index.classes.o1)
    keep = (pos[u] >= 0) & (pos[v] >= 0)
    a, b = pos[u[keep]], pos[v[keep]]
    n = len(outer)
    E = np.zeros((n, n))
    np.add.at(E, (a, a), 2.0)
    np.add.at(E, (b, b), 2.0)
    np.add.at(E, (a, b), -2.0)
    np.add.at(E, (b, a), -2.0)
    m = np.zeros(n)
    m[pos[inner]] = _o1_degree(index)[inner]
    A = np.diag(m) - np.outer(m, m) / m.sum()
    return A, E


def optimal_poincare_ratio(A: np.ndarray, E: np.ndarray) -> float:
    """sup_f (f^T A f) / (f^T E f) over non-constant f; E must have only constants in its kernel."""
    n = len(E)
    if n == 1:
        return 0.0
    Q = scipy.linalg.null_space(np.ones((1, n)))
    Ep = Q.T @ E @ Q
    Ap = Q.T @ A @ Q
    vals = scipy.linalg.eigh(Ap, Ep, eigvals_only=True)
    return float(max(vals[-1], 0.0))


def good_ball(env: Environment, index: ClusterIndex, x, R: float,
              constants: GoodBallConstants = DEFAULT_CONSTANTS) -> GoodBallReport:
    k = constants
    require_window(env, x, k.C_W * k.C_D * R + 1)
    i = env.index_of(x)
    if not index.c1[i]:
        raise CarrierError(f"{tuple(x)} is not in the cluster")
    d = env.d
    beta = beta_exponent(d)
    d1 = metric_graph(MetricKind.D1, index).distances_from(i)
    d1b = metric_graph(MetricKind.D1BAR, index, k.C_A).distances_from(i)
    tol = 1e-12

    # ball comparisons for r in [R, C_W R]; beyond that the window is not guaranteed to see them
    r_top = k.C_W * R
    near = d1b <= r_top + tol
    cond1 = bool(np.all(d1[near] <= k.C_D * np.maximum(R, d1b[near]) + tol))
    near1 = d1 <= r_top / k.C_A + tol
    cond1 &= bool(np.all(d1b[near1] <= np.maximum(R, k.C_A * d1[near1]) + tol))

    inner = np.flatnonzero(d1b <= R / 2 + tol)
    outer = np.flatnonzero(index.c1 & (d1b > 8 * R / 9 + tol))
    if len(outer) == 0:
        sep = np.inf
    else:
        sep, _ = cKDTree(env.coords[outer]).query(env.coords[inner])
        sep = float(np.min(sep))
    cond2 = sep >= R / k.C_R - tol

    mu0 = _o1_degree(index)
    cond3 = bool(k.C_V * R**d <= mu0[d1b <= R + tol].sum())

    eb = euclidean_ball(env, x, R, index.c1)
    hl = index.hole_labels[eb]
    hl = hl[hl >= 0]
    if np.any(index.hole_censored[hl]):
        raise InsufficientWindow("a hole near the ball touches the window boundary")
    cond4 = bool(np.all(index.hole_diameters[hl] <= R**beta + tol))

    b_in = np.flatnonzero(d1 <= R + tol)
    b_out = np.flatnonzero(d1 <= k.C_W * R + tol)
    if len(b_out) > POINCARE_CAP:
        raise GeometryError(f"Poincare ball has {len(b_out)} vertices, cap is {POINCARE_CAP}")
    A, E = poincare_forms(index, b_in, b_out)
    const = optimal_poincare_ratio(A, E) / R**2
    cond5 = const <= k.C_P + tol
    return GoodBallReport(tuple(int(c) for c in x), R, k, cond1, bool(cond2), cond3, cond4,
                          bool(cond5), const, beta)


@dataclass(frozen=True)
class VeryGoodReport:
    very_good: bool
    scale: int
    witness: tuple[tuple[int, ...], int] | None
    min_good_scale: int
    rx_lower_bound: int


def very_good_scan(env: Environment, index: ClusterIndex, x, R: int, alpha: float,
                   constants: GoodBallConstants = DEFAULT_CONSTANTS) -> VeryGoodReport:
    """Scan all (y, r) with y in Bbar_1(x, R) and integer r in [max(2, R^alpha), R].

    ``min_good_scale`` is the smallest N >= 2 such that every scanned pair with
    r >= N is good; ``rx_lower_bound`` is R + 1 when (x, R) fails, else 0.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    scale = max(2, math.ceil(R**alpha - 1e-12))
    ys = ball(MetricKind.D1BAR, env, index, x, R, constants.C_A)
    worst = None
    max_bad = 1
    for r in range(R, scale - 1, -1):
        for y in ys:
            rep = good_ball(env, index, env.coords[y], r, constants)
            if not rep.good:
                max_bad = max(max_bad, r)
                if worst is None:
                    worst = (tuple(int(c) for c in env.coords[y]), r)
                break
    ok = worst is None
    return VeryGoodReport(ok, scale, worst, max(2, max_bad + 1), 0 if ok else R + 1)


@dataclass(frozen=True)
class BlockEvent:
    G: bool
    G_prime: bool


def block_cubes(env: Environment, L: int, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    d = env.d
    shift = np.array(x, dtype=np.int64).copy()
    if env.domain.kind == "orthant":
        shift[: env.domain.d1] += 1
    shift *= L
    return shift, shift + L, shift - L, shift + 2 * L


def block_event(env: Environment, L: int, x, edge_class="o1", classes=None) -> BlockEvent:
    """G_L(x): a crossing cluster of Q_L(x) inside Q~_3L(x) to which every open path
    of diameter > L in Q~_3L(x) is attached.  G'_L(x): no O_1 edge outside the class
    joins two vertices of Q~_3L(x)."""
    from .environment import classify_edges

    classes = classify_edges(env) if classes is None else classes
    if isinstance(edge_class, str):
        mask = {"o1": classes.o1, "o2": classes.o2}[edge_class]
    else:
        mask = np.asarray(edge_class, dtype=bool)
    q_lo, q_hi, t_lo, t_hi = block_cubes(env, L, x)
    if np.any(t_lo < env.lo) or np.any(t_hi > env.hi):
        raise InsufficientWindow("Q~_3L(x) is not inside the window")
    xs = env.coords
    in_t = np.all((xs >= t_lo) & (xs <= t_hi), axis=1)
    u, v, _, _ = env.edges(mask)
    keep = in_t[u] & in_t[v]
    N = env.n_vertices
    graph = coo_matrix((np.ones(int(keep.sum())), (u[keep], v[keep])), shape=(N, N)).tocsr()
    _, labels = connected_components(graph, directed=False)

    in_q = np.all((xs >= q_lo) & (xs <= q_hi), axis=1)
    crossing = None
    candidates = np.unique(labels[in_q])
    for lab in candidates:
        member = in_q & (labels == lab)
        pts = xs[member]
        if all(np.any(pts[:, i] == q_lo[i]) and np.any(pts[:, i] == q_hi[i]) for i in range(env.d)):
            crossing = lab
            break
    G = False
    if crossing is not None:
        sub = np.flatnonzero(in_t)
        _, compact = np.unique(labels[sub], return_inverse=True)
        diam = linf_diameters(compact, xs[sub], int(compact.max()) + 1)
        big = np.unique(labels[sub][diam[compact] > L])
        G = bool(np.all(big == crossing))
    u1, v1, _, _ = env.edges(classes.o1 & ~mask)
    G_prime = not bool(np.any(in_t[u1] & in_t[v1]))
    return BlockEvent(G, G_prime)


def write_distance_table(rows, path) -> None:
    """Rows of ``(x, y, d1, d1bar, dz)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "d1", "d1bar", "dz"])
        for row in rows:
            w.writerow([" ".join(map(str, row[0])), " ".join(map(str, row[1]))] + [repr(float(v)) for v in row[2:]])


def write_ball_audit(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "R", "cond1", "cond2", "cond3", "cond4", "cond5", "poincare_const"])
        for rep in reports:
            w.writerow(rep.row())
