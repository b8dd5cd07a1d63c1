"""Ambient lattices: Z^d, orthants Z_+^{d1} x Z^{d2} and boxes [-n, n]^d.

Windows are always l-infinity balls around the origin intersected with the
domain, so a window is a rectangular coordinate range ``lo <= x <= hi``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import product
from typing import Literal

import numpy as np

DEFAULT_CAP_VERTICES = 10**8


class CapacityError(RuntimeError):
    """A requested object would exceed the configured vertex cap."""


def vertex_cap() -> int:
    value = os.environ.get("PERCWALK_CAP_VERTICES")
    return int(value) if value else DEFAULT_CAP_VERTICES


@dataclass(frozen=True)
class DomainSpec:
    kind: Literal["full", "orthant", "box"]
    d: int
    d1: int = 0
    n: int | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == "full":
            if self.d1 != 0 or self.n is not None:
                raise ValueError("full lattice takes no d1 or n")
        elif self.kind == "orthant":
            if not 0 <= self.d1 <= self.d:
                raise ValueError("orthant needs 0 <= d1 <= d")
            if self.n is not None:
                raise ValueError("orthant takes no radius")
        elif self.kind == "box":
            if self.n is None or self.n < 1:
                raise ValueError("box radius n must be >= 1")
            if self.d1 != 0:
                raise ValueError("box takes no d1")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def full(cls, d: int) -> "DomainSpec":
        return cls("full", d)

    @classmethod
    def orthant(cls, d1: int, d2: int) -> "DomainSpec":
        return cls("orthant", d1 + d2, d1=d1)

    @classmethod
    def box(cls, d: int, n: int) -> "DomainSpec":
        return cls("box", d, n=n)

    @property
    def d2(self) -> int:
        return self.d - self.d1

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d}
        if self.kind == "orthant":
            out["d1"] = self.d1
        if self.kind == "box":
            out["n"] = self.n
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DomainSpec":
        kind = data["kind"]
        if kind == "orthant":
            return cls.orthant(int(data["d1"]), int(data["d"]) - int(data["d1"]))
        if kind == "box":
            return cls.box(int(data["d"]), int(data["n"]))
        return cls.full(int(data["d"]))

    def lower_limits(self) -> np.ndarray:
        """Per-coordinate lower bound of the domain (``-inf`` encoded as None-free floats)."""
        lo = np.full(self.d, -np.inf)
        if self.kind == "orthant":
            lo[: self.d1] = 0
        elif self.kind == "box":
            lo[:] = -self.n
        return lo

    def upper_limits(self) -> np.ndarray:
        hi = np.full(self.d, np.inf)
        if self.kind == "box":
            hi[:] = self.n
        return hi

    def contains(self, coords) -> np.ndarray | bool:
        x = np.asarray(coords)
        inside = np.all((x >= self.lower_limits()) & (x <= self.upper_limits()), axis=-1)
        return bool(inside) if x.ndim == 1 else inside


def window_bounds(spec: DomainSpec, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive coordinate range of ``{x in domain : |x|_inf <= radius}``."""
    if radius < 0:
        raise ValueError("window radius must be >= 0")
    lo = np.maximum(spec.lower_limits(), -radius).astype(np.int64)
    hi = np.minimum(spec.upper_limits(), radius).astype(np.int64)
    return lo, hi


def grid_coords(lo, hi) -> np.ndarray:
    """All integer points of the range in lexicographic (C) order, shape (N, d)."""
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def enumerate_vertices(spec: DomainSpec, window_radius: int, cap: int | None = None) -> np.ndarray:
    lo, hi = window_bounds(spec, window_radius)
    count = int(np.prod(hi - lo + 1))
    cap = vertex_cap() if cap is None else cap
    if count > cap:
        raise CapacityError(f"{count} vertices exceeds cap {cap}")
    return grid_coords(lo, hi)


def incident_edges(spec: DomainSpec, v) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Unit edges at ``v`` inside the domain, each as (smaller, larger) endpoint."""
    v = tuple(int(c) for c in v)
    if not spec.contains(np.array(v)):
        raise ValueError(f"{v} is not in the domain")
    edges = []
    for i in range(spec.d):
        for step in (-1, 1):
            w = list(v)
            w[i] += step
            w = tuple(w)
            if spec.contains(np.array(w)):
                edges.append((min(v, w), max(v, w)))
    return edges


def degree(spec: DomainSpec, v) -> int:
    return len(incident_edges(spec, v))


@dataclass(frozen=True)
class CornerCube:
    corner: tuple[int, ...]
    side: int
    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def contains(self, coords) -> np.ndarray | bool:
        x = np.asarray(coords)
        inside = np.all((x >= np.array(self.lo)) & (x <= np.array(self.hi)), axis=-1)
        return bool(inside) if x.ndim == 1 else inside


def corner_decomposition(n: int, eps: float, d: int) -> list[CornerCube]:
    """The 2^d cubes of side floor(n(1+eps)) with a corner at n*i, i in {-1,1}^d."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    side = math.floor(n * (1 + eps))
    if side > 2 * n:
        raise ValueError("cube side exceeds the box")
    cubes = []
    for signs in product((-1, 1), repeat=d):
        lo = tuple(n - side if s == 1 else -n for s in signs)
        hi = tuple(n if s == 1 else -n + side for s in signs)
        cubes.append(CornerCube(tuple(n * s for s in signs), side, lo, hi))
    return cubes


def covering_margin(cubes: list[CornerCube], n: int, d: int) -> int:
    """Largest m such that every vertex of B(n) has its l-inf m-neighbourhood
    (intersected with B(n)) inside a single cube."""
    pts = grid_coords([-n] * d, [n] * d)
    best = np.full(len(pts), -1, dtype=np.int64)
    for cube in cubes:
        lo = np.array(cube.lo)
        hi = np.array(cube.hi)
        # faces of the cube lying on the box boundary impose no constraint
        room_lo = np.where(lo == -n, n, pts - lo)
        room_hi = np.where(hi == n, n, hi - pts)
        room = np.minimum(room_lo, room_hi).min(axis=1)
        best = np.maximum(best, room)
    return int(best.min())
