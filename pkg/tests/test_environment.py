from collections import deque

import numpy as np
import pytest
from hypothesis import given, strategies as st

from percwalk.environment import (ConductanceLaw, GeometryError, build_cluster_index, classify_edges, edge_weight,
                                  hole_statistics, read_snapshot, sample_environment, window_agreement_check,
                                  write_snapshot)
from percwalk.lattice import DomainSpec


def _neighbours(env, x):
    """Open neighbours of a coordinate tuple, read edge by edge through edge_weight."""
    out = []
    for i in range(env.d):
        for s in (-1, 1):
            y = list(x)
            y[i] += s
            y = tuple(y)
            if all(a <= c <= b for a, c, b in zip(env.lo, y, env.hi)):
                if env.domain.contains(np.array(y)) and edge_weight(env.law, env.seed, x, y) > 0:
                    out.append(y)
    return out


def _bfs_largest(env):
    seen, best = set(), set()
    for x in map(tuple, env.coords.tolist()):
        if x in seen:
            continue
        comp, queue = {x}, deque([x])
        while queue:
            for y in _neighbours(env, queue.popleft()):
                if y not in comp:
                    comp.add(y)
                    queue.append(y)
        seen |= comp
        if len(comp) > len(best):
            best = comp
    return best


def test_cluster_matches_bfs_oracle():
    env = sample_environment(DomainSpec.full(2), 32, ConductanceLaw.bernoulli(0.7), 7)
    index = build_cluster_index(env)
    ours = {tuple(c) for c in env.coords[index.c1].tolist()}
    assert ours == _bfs_largest(env)


def test_cluster_matches_bfs_on_orthant():
    env = sample_environment(DomainSpec.orthant(1, 1), 12, ConductanceLaw.bernoulli(0.6), 3)
    index = build_cluster_index(env)
    assert {tuple(c) for c in env.coords[index.c1].tolist()} == _bfs_largest(env)


def test_density_pinned():
    env = sample_environment(DomainSpec.full(2), 64, ConductanceLaw.bernoulli(0.7), 42)
    index = build_cluster_index(env)
    assert index.c1.sum() == 16424
    assert index.c1.mean() == pytest.approx(0.98696, abs=1e-5)


def test_weights_do_not_depend_on_window():
    law = ConductanceLaw.uniform(1.0, 3.0, 0.8)
    small = sample_environment(DomainSpec.full(2), 5, law, 11)
    big = sample_environment(DomainSpec.full(2), 9, law, 11)
    sub = big.weights[:, 4:15, 4:15]
    # the top faces of the small window are cut
    assert np.array_equal(small.weights[0][:-1], sub[0][:-1])
    assert np.array_equal(small.weights[1][:, :-1], sub[1][:, :-1])


def test_determinism_and_seed_dependence():
    law = ConductanceLaw.pareto(1.0, 1.5, 0.8)
    a = sample_environment(DomainSpec.full(2), 8, law, 5)
    b = sample_environment(DomainSpec.full(2), 8, law, 5)
    c = sample_environment(DomainSpec.full(2), 8, law, 6)
    assert np.array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, c.weights)


def test_edge_weight_lookup_agrees():
    env = sample_environment(DomainSpec.full(2), 4, ConductanceLaw.uniform(1, 3), 2)
    x = env.coords[7]
    y = x + np.array([0, 1])
    i = env.index_of(x)
    assert env.weights[1].ravel()[i] == edge_weight(env.law, env.seed, x, y) == edge_weight(env.law, env.seed, y, x)


def test_classification_brute_force():
    law = ConductanceLaw.pareto(1.0, 1.5, 0.8)
    env = sample_environment(DomainSpec.full(2), 6, law, 9, K=8.0)
    cls = classify_edges(env)

    def irregular(a, b):
        w = edge_weight(law, 9, a, b)
        return (0 < w < 1 / 8) or w > 8

    for i in range(2):
        for x in map(tuple, env.coords.tolist()):
            y = list(x)
            y[i] += 1
            y = tuple(y)
            if y[i] > env.hi[i]:
                continue
            flat = (i,) + tuple(c - lo for c, lo in zip(x, env.lo))
            w = edge_weight(law, 9, x, y)
            assert cls.o1[flat] == (w > 0)
            assert cls.oR[flat] == irregular(x, y)
            touching = False
            for z in (x, y):
                for j in range(2):
                    for s in (-1, 1):
                        z2 = list(z)
                        z2[j] += s
                        touching |= irregular(z, tuple(z2))
            assert cls.oS[flat] == (w > 0 and touching)
            assert cls.o2[flat] == (w > 0 and not touching)


def test_hand_built_hole(hole_env):
    env, index = hole_env
    holes = env.coords[index.holes]
    assert sorted(map(tuple, holes.tolist())) == [(0, 0), (1, 0)]
    assert index.hole_sizes.tolist() == [2]
    assert index.hole_diameters.tolist() == [1]
    assert not index.hole_censored.any()
    stats = hole_statistics(index)
    assert stats.k.tolist() == [1]
    assert stats.tail[0] == pytest.approx(2 / 49)


def test_default_K():
    assert ConductanceLaw.bernoulli(0.7).default_K() == 1.0
    assert ConductanceLaw.uniform(1, 3).default_K() == 4.0
    assert ConductanceLaw.pareto(1, 1.5, 0.8).default_K() == 4.0
    with pytest.raises(ValueError):
        ConductanceLaw.bernoulli(0.4).default_K()


def test_law_validation():
    with pytest.raises(ValueError):
        ConductanceLaw.uniform(3, 1)
    with pytest.raises(ValueError):
        ConductanceLaw.pareto(1, 0.5)
    with pytest.raises(ValueError):
        ConductanceLaw("constant", p1=0.5, w=1.0)


def test_subcritical_warns():
    with pytest.warns(UserWarning):
        sample_environment(DomainSpec.full(2), 4, ConductanceLaw.bernoulli(0.3), 0, K=2.0)


def test_snapshot_roundtrip(tmp_path):
    env = sample_environment(DomainSpec.orthant(1, 1), 5, ConductanceLaw.uniform(1, 3, 0.8), 4)
    path = tmp_path / "env.txt"
    write_snapshot(env, path)
    back = read_snapshot(path)
    assert back.lo == env.lo and back.hi == env.hi and back.K == env.K
    assert back.law == env.law and back.domain == env.domain
    assert np.array_equal(back.weights, env.weights)


def test_window_agreement_needs_quadrant():
    env = sample_environment(DomainSpec.full(2), 20, ConductanceLaw.bernoulli(0.7), 0)
    with pytest.raises(GeometryError):
        window_agreement_check(env, 8, 0.5)


def test_window_agreement_runs_on_quadrant():
    env = sample_environment(DomainSpec.orthant(2, 0), 16, ConductanceLaw.bernoulli(0.9), 1)
    res = window_agreement_check(env, 8, 0.5)
    assert res.mismatches >= 0 and res.agree == (res.mismatches == 0)


def test_tiny_window_rejected():
    env = sample_environment(DomainSpec.orthant(2, 0), 0, ConductanceLaw.bernoulli(0.9), 1)
    with pytest.raises(GeometryError):
        build_cluster_index(env)


@given(seed=st.integers(0, 10**6), p=st.floats(0.55, 1.0))
def test_cluster_invariants(seed, p):
    env = sample_environment(DomainSpec.full(2), 6, ConductanceLaw.bernoulli(p), seed, K=2.0)
    index = build_cluster_index(env)
    # C_2 inside C_1, holes partition the difference
    assert not np.any(index.c2 & ~index.c1)
    assert np.array_equal(index.holes, index.c1 & ~index.c2)
    assert index.hole_sizes.sum() == index.holes.sum()
    # o2 and oS split o1
    cls = index.classes
    assert np.array_equal(cls.o1, cls.o2 | cls.oS) and not np.any(cls.o2 & cls.oS)
