"""Event-driven simulation of walks among conductances.

Draw ``k`` of a path uses counters ``(path_id, k)`` on fixed streams, so a path
is reproducible on its own and the batch engine reproduces ``simulate``
exactly.  The jump chain is shared by the VSRW, the CSRW and the discrete-time
walk; only the clocks differ.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .environment import ClusterIndex, Environment
from .rng import STREAM_HOLD, STREAM_JUMP, exponential, uniform

J_UMAX = 28.0
_CHUNK = 4096


class WalkKind(str, Enum):
    VSRW = "vsrw"
    CSRW = "csrw"
    DISCRETE = "discrete"


class StartError(ValueError):
    """Start vertex not in the cluster proxy."""


class WindowExit(RuntimeError):
    """A walk reached a vertex whose neighbourhood leaves the window."""

    def __init__(self, path_id: int, time: float, vertex: tuple[int, ...]):
        super().__init__(f"path {path_id} reached the window boundary at {vertex} (t={time:.4g}); enlarge the window")
        self.path_id = path_id
        self.time = time
        self.vertex = vertex


class HorizonError(ValueError):
    """The path horizon is too short for the requested evaluation."""


class TraceError(ValueError):
    """The path never visits C_2 within its horizon."""


def _rates(env: Environment, kind: WalkKind) -> np.ndarray:
    if kind == WalkKind.VSRW:
        return env.vertex_weight
    return np.ones(env.n_vertices)


def _choose(wts: np.ndarray, u: np.ndarray) -> np.ndarray:
    cw = np.cumsum(wts, axis=-1)
    target = u * cw[..., -1]
    j = np.sum(cw <= target[..., None], axis=-1)
    # guard against u * total rounding onto the last partial sum
    last = wts.shape[-1] - 1 - np.argmax(wts[..., ::-1] > 0, axis=-1)
    return np.minimum(j, last)


@dataclass(frozen=True, eq=False)
class WalkPath:
    """Right-continuous trajectory: ``vertices[k]`` is occupied on ``[times[k], times[k+1])``."""

    times: np.ndarray
    vertices: np.ndarray
    coords: np.ndarray
    horizon: float
    kind: WalkKind
    seed: int
    path_id: int = 0

    @property
    def start(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.coords[0])

    @property
    def n_jumps(self) -> int:
        return len(self.times) - 1

    def _slot(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon):
            raise HorizonError(f"evaluation time outside [0, {self.horizon}]")
        return np.searchsorted(self.times, t, side="right") - 1

    def position(self, t) -> np.ndarray:
        return self.coords[self._slot(t)]

    def vertex_at(self, t) -> np.ndarray:
        return self.vertices[self._slot(t)]

    def holding_times(self) -> np.ndarray:
        return np.diff(self.times)


def simulate(kind, env: Environment, index: ClusterIndex, start, horizon: float, seed: int,
             path_id: int = 0) -> WalkPath:
    kind = WalkKind(kind)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    x = env.index_of(start)
    if not index.c1[x]:
        raise StartError(f"{tuple(start)} is not in the cluster proxy")
    nbr, wts = env.neighbor_table
    rate = _rates(env, kind)
    edge = env.boundary_mask
    if edge[x]:
        raise WindowExit(path_id, 0.0, tuple(int(c) for c in env.coords[x]))
    times, verts = [0.0], [x]
    t, k = 0.0, 0
    while True:
        ks = np.arange(k, k + _CHUNK)
        hold = np.ones(_CHUNK) if kind == WalkKind.DISCRETE else exponential(seed, STREAM_HOLD, path_id, ks)
        us = uniform(seed, STREAM_JUMP, path_id, ks)
        for i in range(_CHUNK):
            t = t + hold[i] / rate[x]
            if t > horizon:
                return WalkPath(np.array(times), np.array(verts, dtype=np.int64), env.coords[verts],
                                float(horizon), kind, seed, path_id)
            x = int(nbr[x, _choose(wts[x], us[i])])
            if edge[x]:
                raise WindowExit(path_id, t, tuple(int(c) for c in env.coords[x]))
            times.append(t)
            verts.append(x)
        k += _CHUNK


@dataclass(frozen=True)
class BatchResult:
    """Positions of many paths on a time grid plus first exit times from Euclidean balls."""

    kind: WalkKind
    seed: int
    path_ids: np.ndarray
    starts: np.ndarray
    grid: np.ndarray
    positions: np.ndarray          # (P, G, d) integer coordinates
    exit_radii: tuple[float, ...]
    exit_times: np.ndarray         # (P, len(exit_radii)), inf when censored
    horizon: float
    n_jumps: np.ndarray

    def summary(self) -> dict:
        disp = (self.positions - self.starts[:, None, :]).astype(float)
        sq = (disp**2).sum(axis=2)
        out = {
            "kind": self.kind.value,
            "paths": int(len(self.path_ids)),
            "horizon": self.horizon,
            "grid": self.grid.tolist(),
            "mean_sq_displacement": sq.mean(axis=0).tolist(),
            "mean_fourth_displacement": (sq**2).mean(axis=0).tolist(),
            "mean_jumps": float(self.n_jumps.mean()),
            "exit": [],
        }
        for j, r in enumerate(self.exit_radii):
            e = self.exit_times[:, j]
            done = np.isfinite(e)
            q = np.quantile(e[done], [0.1, 0.5, 0.9]).tolist() if done.any() else []
            out["exit"].append({"radius": r, "censored": int((~done).sum()), "quantiles_10_50_90": q})
        return out


def simulate_batch(kind, env: Environment, index: ClusterIndex, starts, horizon: float, seed: int,
                   grid=None, exit_radii=(), path_ids=None, stop_on_exit: bool = False) -> BatchResult:
    """Vectorized engine over paths; path ``i`` is identical to ``simulate(..., path_id=path_ids[i])``.

    With ``stop_on_exit`` a path is dropped once it has left every exit ball; its
    remaining grid positions are then recorded as -1 in every coordinate.
    """
    kind = WalkKind(kind)
    starts = np.atleast_2d(np.asarray(starts, dtype=np.int64))
    P = len(starts)
    pid = np.arange(P, dtype=np.int64) if path_ids is None else np.asarray(path_ids, dtype=np.int64)
    grid = np.array([horizon], dtype=float) if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid < 0) or np.any(grid > horizon) or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted inside [0, horizon]")
    radii = tuple(float(r) for r in exit_radii)
    x = env.flat_index(starts)
    if np.any(x < 0):
        raise KeyError("some starts are outside the window")
    if not np.all(index.c1[x]):
        raise StartError("some starts are not in the cluster proxy")
    nbr, wts = env.neighbor_table
    rate = _rates(env, kind)
    edge = env.boundary_mask
    if edge[x].any():
        i = int(np.argmax(edge[x]))
        raise WindowExit(int(pid[i]), 0.0, tuple(int(c) for c in starts[i]))
    coords = env.coords
    r2 = np.array(radii) ** 2

    G = len(grid)
    rec = np.zeros((P, G), dtype=np.int64)
    exits = np.full((P, len(radii)), np.inf)
    cur = x.copy()
    t = np.zeros(P)
    k = np.zeros(P, dtype=np.int64)
    g = np.zeros(P, dtype=np.int64)
    stopped = np.zeros(P, dtype=bool)
    active = np.arange(P)
    while active.size:
        va = cur[active]
        if kind == WalkKind.DISCRETE:
            t_next = t[active] + 1.0
        else:
            t_next = t[active] + exponential(seed, STREAM_HOLD, pid[active], k[active]) / rate[va]
        g_new = np.searchsorted(grid, t_next, side="left")
        ga = g[active]
        while True:
            m = ga < g_new
            if not m.any():
                break
            rec[active[m], ga[m]] = va[m]
            ga[m] += 1
        g[active] = ga
        done = t_next > horizon
        live = active[~done]
        if live.size == 0:
            break
        vl = cur[live]
        tl = t_next[~done]
        j = _choose(wts[vl], uniform(seed, STREAM_JUMP, pid[live], k[live]))
        new = nbr[vl, j]
        if edge[new].any():
            i = int(np.argmax(edge[new]))
            raise WindowExit(int(pid[live[i]]), float(tl[i]), tuple(int(c) for c in coords[new[i]]))
        if radii:
            d2 = ((coords[new] - starts[live]) ** 2).sum(axis=1)
            hit = (d2[:, None] > r2[None, :]) & np.isinf(exits[live])
            rows, cols = np.nonzero(hit)
            exits[live[rows], cols] = tl[rows]
        cur[live] = new
        t[live] = tl
        k[live] += 1
        if stop_on_exit and radii:
            gone = np.all(np.isfinite(exits[live]), axis=1)
            stopped[live[gone]] = True
            live = live[~gone]
        active = live
    positions = coords[rec]
    positions[stopped[:, None] & (np.arange(G)[None, :] >= g[:, None])] = -1
    return BatchResult(kind, seed, pid, starts, grid, positions, radii, exits, float(horizon), k)


@dataclass(frozen=True)
class RescaledPath:
    """t -> Y_{n^2 t} / n."""

    path: WalkPath
    n: float

    @property
    def horizon(self) -> float:
        return self.path.horizon / self.n**2

    @property
    def jump_times(self) -> np.ndarray:
        return self.path.times[1:] / self.n**2

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t > self.horizon * (1 + 1e-12)):
            raise HorizonError(f"rescaled horizon is {self.horizon}")
        s = np.minimum(t * self.n**2, self.path.horizon)
        return self.path.position(s) / self.n


def rescale(path: WalkPath, n: float, horizon: float | None = None) -> RescaledPath:
    if n <= 0:
        raise ValueError("scale must be positive")
    if horizon is not None and path.horizon < n**2 * horizon:
        raise HorizonError(f"path horizon {path.horizon} < n^2 * {horizon}")
    return RescaledPath(path, float(n))


@dataclass(frozen=True, eq=False)
class TracePath:
    """Y time-changed by the inverse of A_t, the time spent in C_2."""

    path: WalkPath
    in_c2: np.ndarray            # per event of ``path``
    a_knots: np.ndarray          # A at each event time of ``path``
    z_times: np.ndarray
    z_vertices: np.ndarray
    z_coords: np.ndarray
    horizon: float               # A_T

    def A(self, t) -> np.ndarray:
        """A_t, piecewise linear with slopes 0 or 1."""
        p = self.path
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(p.times, t, side="right") - 1
        return self.a_knots[k] + np.where(self.in_c2[k], t - p.times[k], 0.0)

    def a(self, s) -> np.ndarray:
        """a_s = inf{t : A_t > s}."""
        s = np.asarray(s, dtype=float)
        p = self.path
        starts = self.a_knots[self.in_c2]
        k_c2 = np.flatnonzero(self.in_c2)
        j = np.searchsorted(starts, s, side="right") - 1
        k = k_c2[np.maximum(j, 0)]
        return p.times[k] + (s - self.a_knots[k])

    def position(self, s) -> np.ndarray:
        k = np.searchsorted(self.z_times, np.asarray(s, dtype=float), side="right") - 1
        return self.z_coords[k]

    def as_path(self) -> WalkPath:
        p = self.path
        return WalkPath(self.z_times, self.z_vertices, self.z_coords, self.horizon, p.kind, p.seed, p.path_id)


def trace(path: WalkPath, index: ClusterIndex) -> TracePath:
    in_c2 = index.c2[path.vertices]
    if not in_c2.any():
        raise TraceError("path never enters C_2")
    ends = np.append(path.times[1:], path.horizon)
    dur = np.where(in_c2, ends - path.times, 0.0)
    knots = np.concatenate([[0.0], np.cumsum(dur)[:-1]])
    total = float(dur.sum())
    ks = np.flatnonzero(in_c2 & (dur > 0)) if total > 0 else np.flatnonzero(in_c2)[:1]
    zt = knots[ks]
    zv = path.vertices[ks]
    # a hole excursion that returns to the same vertex is not a jump of Z
    keep = np.concatenate([[True], zv[1:] != zv[:-1]])
    return TracePath(path, in_c2, knots, zt[keep], zv[keep], path.coords[ks][keep], total)


@dataclass(frozen=True)
class ExitTime:
    time: float
    censored: bool
    horizon: float


def exit_time(path, center, radius: float, norm: str = "euclidean") -> ExitTime:
    """First time the path is outside ``{y : |y - center| <= radius}``."""
    if isinstance(path, RescaledPath):
        times = np.append(0.0, path.jump_times)
        pos = path.path.coords / path.n
        horizon = path.horizon
    else:
        times, pos, horizon = path.times, path.coords, path.horizon
    diff = pos - np.asarray(center, dtype=float)
    if norm == "euclidean":
        dist = np.sqrt((diff**2).sum(axis=1))
    elif norm == "linf":
        dist = np.abs(diff).max(axis=1)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    if dist[0] > radius + 1e-12:
        raise ValueError("path does not start inside the region")
    out = np.flatnonzero(dist > radius + 1e-12)
    if len(out) == 0:
        return ExitTime(math.inf, True, horizon)
    return ExitTime(float(times[out[0]]), False, horizon)


@dataclass(frozen=True)
class JModulus:
    value: float
    tail_bound: float


def path_modulus_J(path: RescaledPath | WalkPath, delta: float) -> JModulus:
    """int_0^U e^{-u} (1 ^ sup_{delta<=t<=u} |X_t - X_{t-delta}|) du, exact on the step path.

    U is ``J_UMAX`` or the path horizon if smaller; the omitted tail is at most e^{-U}.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if isinstance(path, RescaledPath):
        jumps, horizon, at = path.jump_times, path.horizon, path.at
    else:
        jumps, horizon, at = path.times[1:], path.horizon, path.position
    U = min(J_UMAX, horizon)
    if U <= delta:
        return JModulus(0.0, math.exp(-U))
    b = np.concatenate([[delta], jumps, jumps + delta])
    b = np.unique(b[(b >= delta) & (b < U)])
    xt = np.asarray(at(b), dtype=float)
    xs = np.asarray(at(b - delta), dtype=float)
    D = np.sqrt(((xt - xs) ** 2).sum(axis=1))
    S = np.minimum(np.maximum.accumulate(D), 1.0)
    right = np.append(b[1:], U)
    val = float(np.sum(S * (np.exp(-b) - np.exp(-right))))
    return JModulus(val, math.exp(-U))


def write_path_csv(path: WalkPath, fh_or_path) -> None:
    d = path.coords.shape[1]
    own = isinstance(fh_or_path, (str, bytes)) or hasattr(fh_or_path, "__fspath__")
    fh = open(fh_or_path, "w", newline="") if own else fh_or_path
    try:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"x{i + 1}" for i in range(d)])
        for t, c in zip(path.times, path.coords):
            w.writerow([repr(float(t))] + [int(v) for v in c])
    finally:
        if own:
            fh.close()


def write_batch_summary(result: BatchResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
