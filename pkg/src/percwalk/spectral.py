"""Dense linear algebra on finite cluster windows."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import poisson

from .environment import ClusterIndex, Environment, GeometryError
from .lattice import CapacityError
from .walk import WalkKind

DEFAULT_CAP = 5000
HEAT_TOL = 1e-12
MIX_THRESHOLD = 0.25


class DisconnectedWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class SpectralInstance:
    vertices: np.ndarray        # flat indices into the environment window
    coords: np.ndarray
    generator: np.ndarray
    measure: np.ndarray
    kind: WalkKind
    killed: bool
    _eig: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return len(self.vertices)

    def position_of(self, coords) -> np.ndarray:
        """Row index of each coordinate tuple, -1 if absent."""
        lookup = {tuple(c): i for i, c in enumerate(self.coords.tolist())}
        pts = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        return np.array([lookup.get(tuple(p), -1) for p in pts.tolist()])

    def eigensystem(self):
        """Eigenpairs of the symmetrized generator N^{1/2} L N^{-1/2}, ascending."""
        if "vals" not in self._eig:
            s = np.sqrt(self.measure)
            S = self.generator * s[:, None] / s[None, :]
            vals, vecs = scipy.linalg.eigh((S + S.T) / 2)
            self._eig["vals"], self._eig["vecs"] = vals, vecs
        return self._eig["vals"], self._eig["vecs"]


def build_instance(env: Environment, index: ClusterIndex, vertices=None, kind="vsrw",
                   boundary: str = "none", cap: int = DEFAULT_CAP) -> SpectralInstance:
    """Generator restricted to ``vertices`` (default: the C_1 proxy).

    ``boundary="none"`` drops edges leaving the vertex set; ``"killed"`` turns them
    into killing.  For the CSRW rows are divided by the full mu_x.
    """
    kind = WalkKind(kind)
    if kind == WalkKind.DISCRETE:
        raise ValueError("spectral instances are built for the VSRW or the CSRW")
    if boundary not in ("none", "killed"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if vertices is None:
        sel = np.flatnonzero(index.c1)
    else:
        v = np.asarray(vertices)
        sel = np.flatnonzero(v) if v.dtype == bool else np.unique(v)
    if len(sel) == 0:
        raise ValueError("empty vertex set")
    if len(sel) > cap:
        raise CapacityError(f"{len(sel)} vertices exceeds the dense cap {cap}")
    if boundary == "killed" and env.boundary_mask[sel].any():
        raise GeometryError("killed region touches the window boundary")
    n = len(sel)
    pos = np.full(env.n_vertices, -1)
    pos[sel] = np.arange(n)
    u, v, w, _ = env.edges()
    L = np.zeros((n, n))
    inside = (pos[u] >= 0) & (pos[v] >= 0)
    a, b, wi = pos[u[inside]], pos[v[inside]], w[inside]
    np.add.at(L, (a, b), wi)
    np.add.at(L, (b, a), wi)
    np.add.at(L, (a, a), -wi)
    np.add.at(L, (b, b), -wi)
    if boundary == "killed":
        for src, dst in ((u, v), (v, u)):
            out = (pos[src] >= 0) & (pos[dst] < 0)
            np.add.at(L, (pos[src[out]], pos[src[out]]), -w[out])
    mu = env.vertex_weight[sel]
    if kind == WalkKind.CSRW:
        if np.any(mu <= 0):
            raise ValueError("CSRW needs mu_x > 0 on every vertex")
        L = L / mu[:, None]
        measure = mu.copy()
    else:
        measure = np.ones(n)
    graph = coo_matrix((np.ones(len(a)), (a, b)), shape=(n, n))
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp > 1:
        warnings.warn(f"carrier has {ncomp} components", DisconnectedWarning, stacklevel=2)
    inst = SpectralInstance(sel, env.coords[sel], L, measure, kind, boundary == "killed")
    asym = np.abs(measure[:, None] * L - (measure[:, None] * L).T).max()
    scale = np.abs(L).max() if n > 1 else 1.0
    if asym > 1e-12 * max(scale, 1.0) * measure.max():
        raise AssertionError(f"generator not symmetric w.r.t. its measure (defect {asym})")
    return inst


def resolvent_apply(inst: SpectralInstance, lam: float, f) -> np.ndarray:
    """U^lam f, the solution of (lam - L) u = f."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    A = lam * np.eye(inst.size) - inst.generator
    return scipy.linalg.solve(A, np.asarray(f, dtype=float))


def resolvent_matrix(inst: SpectralInstance, lam: float) -> np.ndarray:
    return resolvent_apply(inst, lam, np.eye(inst.size))


def _poisson_terms(rate: float, tol: float) -> np.ndarray:
    kmax = int(poisson.isf(tol, rate)) + 2 if rate > 0 else 0
    while poisson.sf(kmax, rate) > tol:
        kmax += 1
    return poisson.pmf(np.arange(kmax + 1), rate)


def heat_kernel(inst: SpectralInstance, t: float, method: str = "uniformization",
                tol: float = HEAT_TOL, max_rate: float = 20.0) -> np.ndarray:
    """Transition matrix e^{tL}, with q_t(x, y) = P_x(Y_t = y).

    Uniformization sums Poisson(Lambda t) weighted powers of I + L / Lambda until the
    Poisson tail is below the budget; when Lambda t exceeds ``max_rate`` the time is
    halved s times and the result squared, with the budget split as tol / 2^s.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = inst.size
    if t == 0:
        return np.eye(n)
    if method == "eigen":
        vals, vecs = inst.eigensystem()
        s = np.sqrt(inst.measure)
        core = (vecs * np.exp(t * vals)) @ vecs.T
        return core / s[:, None] * s[None, :]
    if method != "uniformization":
        raise ValueError(f"unknown method {method!r}")
    L = inst.generator
    lam = max(float(-np.diag(L).min()), 1e-300)
    P = np.eye(n) + L / lam
    s = max(0, math.ceil(math.log2(lam * t / max_rate))) if lam * t > max_rate else 0
    tau = t / 2**s
    weights = _poisson_terms(lam * tau, tol / 2**s)
    term = np.eye(n)
    Q = weights[0] * term
    for wk in weights[1:]:
        term = term @ P
        Q += wk * term
    for _ in range(s):
        Q = Q @ Q
    return Q


def expected_exit_times(inst: SpectralInstance) -> np.ndarray:
    """u with L u = -1 on a killed instance: the expected exit time from each vertex."""
    if not inst.killed:
        raise ValueError("expected exit times need a killed instance")
    return scipy.linalg.solve(-inst.generator, np.ones(inst.size))


def expected_exit_time(inst: SpectralInstance, x) -> float:
    i = int(inst.position_of(x)[0])
    if i < 0:
        raise ValueError(f"{tuple(x)} is not interior to the killed region")
    return float(expected_exit_times(inst)[i])


def killed_ball(env: Environment, index: ClusterIndex, center, radius: float, kind="vsrw",
                norm: str = "euclidean") -> SpectralInstance:
    """Killed instance on C_1 n B(center, radius) (Euclidean or l-inf)."""
    diff = env.coords - np.asarray(center)
    if norm == "euclidean":
        inside = np.sqrt((diff**2).sum(axis=1)) <= radius + 1e-12
    elif norm == "linf":
        inside = np.abs(diff).max(axis=1) <= radius + 1e-12
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return build_instance(env, index, inside & index.c1, kind, boundary="killed")


@dataclass(frozen=True)
class HarmonicProfile:
    vertices: np.ndarray
    coords: np.ndarray
    values: np.ndarray
    boundary_vertices: np.ndarray
    boundary_values: np.ndarray
    center: tuple[int, ...]
    radius: float
    harnack_ratio: float
    sup_norm: float

    def holder_ratio(self, gamma: float) -> float:
        """max over pairs in B(x0, R/2) of |h(x) - h(y)| / ((|x - y| / R)^gamma ||h||_inf)."""
        diff = self.coords - np.asarray(self.center)
        inner = np.sqrt((diff**2).sum(axis=1)) <= self.radius / 2 + 1e-12
        c = self.coords[inner].astype(float)
        h = self.values[inner]
        if len(h) < 2 or self.sup_norm == 0:
            return 0.0
        i, j = np.triu_indices(len(h), 1)
        dist = np.sqrt(((c[i] - c[j]) ** 2).sum(axis=1)) / self.radius
        return float(np.max(np.abs(h[i] - h[j]) / dist**gamma) / self.sup_norm)

    def best_gamma(self, level: float = 2.0, tol: float = 1e-6) -> float:
        """Largest gamma in [0, 1] with holder_ratio(gamma) <= level (the ratio increases in gamma)."""
        if self.holder_ratio(1.0) <= level:
            return 1.0
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if self.holder_ratio(mid) <= level else (lo, mid)
        return lo


def harmonic_profile(env: Environment, index: ClusterIndex, center, radius: float, data,
                     norm: str = "euclidean") -> HarmonicProfile:
    """Solve L h = 0 on C_1 n B(center, radius) with h = data on the outer O_1-boundary.

    ``data`` maps an (m, d) coordinate array to m values.
    """
    inst = killed_ball(env, index, center, radius, "vsrw", norm)
    pos = np.full(env.n_vertices, -1)
    pos[inst.vertices] = np.arange(inst.size)
    u, v, w, _ = env.edges()
    rhs = np.zeros(inst.size)
    bverts = []
    for src, dst in ((u, v), (v, u)):
        out = (pos[src] >= 0) & (pos[dst] < 0)
        bverts.append(dst[out])
    bverts = np.unique(np.concatenate(bverts))
    bvals = np.asarray(data(env.coords[bverts]), dtype=float)
    gval = np.zeros(env.n_vertices)
    gval[bverts] = bvals
    for src, dst in ((u, v), (v, u)):
        out = (pos[src] >= 0) & (pos[dst] < 0)
        np.add.at(rhs, pos[src[out]], w[out] * gval[dst[out]])
    try:
        h = scipy.linalg.solve(-inst.generator, rhs)
    except scipy.linalg.LinAlgError as exc:
        raise GeometryError("singular Dirichlet problem (interior not connected to the boundary)") from exc
    diff = inst.coords - np.asarray(center)
    half = np.sqrt((diff**2).sum(axis=1)) <= radius / 2 + 1e-12
    hh = h[half]
    if len(hh) and hh.min() > 0:
        harnack = float(hh.max() / hh.min())
    elif len(hh) and hh.max() == hh.min() == 0:
        harnack = 1.0
    else:
        harnack = math.inf
    sup = float(max(np.abs(h).max(), np.abs(bvals).max() if len(bvals) else 0.0))
    return HarmonicProfile(inst.vertices, inst.coords, h, bverts, bvals,
                           tuple(int(c) for c in center), float(radius), harnack, sup)


def dirichlet_energy(env: Environment, index: ClusterIndex, n: float, f) -> float:
    """n^{2-d} sum over O_1 edges of C_1 of (f(x/n) - f(y/n))^2 mu_xy."""
    vals = np.asarray(f(env.coords / n), dtype=float)
    if np.any(vals[env.boundary_mask] != 0):
        raise GeometryError("support of f reaches the window boundary")
    u, v, w, _ = env.edges()
    keep = index.c1[u] & index.c1[v]
    diff = vals[u[keep]] - vals[v[keep]]
    return float(n ** (2 - env.d) * np.sum(diff**2 * w[keep]))


@dataclass(frozen=True)
class MixingReport:
    p: float
    threshold: float
    t_mix: float
    spectral_gap: float
    stationary: np.ndarray
    bracket: tuple[float, float]
    deviation_at_bracket: tuple[float, float]

    def to_json(self) -> str:
        out = asdict(self)
        out["stationary"] = self.stationary.tolist()
        out["p"] = "inf" if math.isinf(self.p) else self.p
        return json.dumps(out, sort_keys=True)


def lp_deviation(Q: np.ndarray, pi: np.ndarray, p: float) -> float:
    """sup_x ( sum_y |Q(x, y) / pi(y) - 1|^p pi(y) )^{1/p}."""
    dev = np.abs(Q / pi[None, :] - 1.0)
    if math.isinf(p):
        return float(dev.max())
    return float(np.max((dev**p @ pi) ** (1.0 / p)))


def mixing_time(inst: SpectralInstance, p: float = math.inf, threshold: float = MIX_THRESHOLD,
                rtol: float = 1e-6, certify: bool = True) -> MixingReport:
    """inf{t : deviation(t) < threshold} by bisection on eigen-evaluated kernels.

    With ``certify`` the two bracket ends are re-evaluated by uniformization.
    """
    if p < 1:
        raise ValueError("p must lie in [1, inf]")
    if inst.killed:
        raise ValueError("mixing times need an unkilled instance")
    n = inst.size
    pi = inst.measure / inst.measure.sum()
    if n == 1:
        return MixingReport(p, threshold, 0.0, math.inf, pi, (0.0, 0.0), (0.0, 0.0))
    vals, _ = inst.eigensystem()
    gap = float(-vals[-2])
    if gap <= 1e-12:
        raise ValueError("instance is disconnected")

    def dev(t, method="eigen"):
        return lp_deviation(heat_kernel(inst, t, method), pi, p)

    if dev(0.0) < threshold:
        return MixingReport(p, threshold, 0.0, gap, pi, (0.0, 0.0), (dev(0.0), dev(0.0)))
    lo, hi = 0.0, 1.0 / gap
    while dev(hi) >= threshold:
        lo, hi = hi, 2 * hi
    while hi - lo > rtol * hi:
        mid = (lo + hi) / 2
        lo, hi = (lo, mid) if dev(mid) < threshold else (mid, hi)
    method = "uniformization" if certify else "eigen"
    at = (dev(lo, method), dev(hi, method))
    return MixingReport(p, threshold, hi, gap, pi, (lo, hi), at)


def write_triplets(inst: SpectralInstance, path) -> None:
    """Generator as ``i j value`` lines (0-based rows) after a commented vertex table."""
    with open(path, "w") as fh:
        fh.write(f"# generator {inst.kind.value} killed={int(inst.killed)} size={inst.size}\n")
        for i, c in enumerate(inst.coords):
            fh.write(f"# vertex {i} " + " ".join(map(str, c)) + f" measure {float(inst.measure[i])!r}\n")
        rows, cols = np.nonzero(inst.generator)
        for i, j in zip(rows, cols):
            fh.write(f"{i} {j} {float(inst.generator[i, j])!r}\n")


def read_triplets(path) -> tuple[np.ndarray, np.ndarray]:
    coords, entries = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# vertex"):
                parts = line.split()
                coords.append([int(c) for c in parts[3:parts.index("measure")]])
            elif not line.startswith("#") and line.strip():
                i, j, val = line.split()
                entries.append((int(i), int(j), float(val)))
    n = len(coords)
    L = np.zeros((n, n))
    for i, j, val in entries:
        L[i, j] = val
    return np.array(coords), L
