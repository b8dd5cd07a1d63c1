import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import grid_weights, hand_env
from percwalk.environment import ConductanceLaw, GeometryError, build_cluster_index, sample_environment
from percwalk.experiments import bump, bump_gradient_energy
from percwalk.lattice import CapacityError, DomainSpec
from percwalk.spectral import (build_instance, dirichlet_energy, expected_exit_time, expected_exit_times,
                               harmonic_profile, heat_kernel, killed_ball, lp_deviation, mixing_time,
                               read_triplets, resolvent_apply, resolvent_matrix, write_triplets)


@pytest.fixture
def path4():
    """Path 0-1-2-3 with conductances 1, 2, 3."""
    w = np.array([[1.0, 2.0, 3.0, 0.0]])
    env = hand_env((0,), (3,), w)
    return env, build_cluster_index(env)


@pytest.fixture
def pair():
    env = hand_env((0,), (3,), grid_weights((4,)))
    index = build_cluster_index(env)
    return build_instance(env, index, np.array([0, 1]))


def test_vsrw_generator(path4):
    inst = build_instance(*path4)
    expected = np.array([[-1, 1, 0, 0], [1, -3, 2, 0], [0, 2, -5, 3], [0, 0, 3, -3]], dtype=float)
    assert np.array_equal(inst.generator, expected)
    assert np.array_equal(inst.measure, np.ones(4))


def test_csrw_generator(path4):
    inst = build_instance(*path4, kind="csrw")
    mu = np.array([1.0, 3.0, 5.0, 3.0])
    L = np.array([[-1, 1, 0, 0], [1, -3, 2, 0], [0, 2, -5, 3], [0, 0, 3, -3]]) / mu[:, None]
    assert np.allclose(inst.generator, L)
    assert np.array_equal(inst.measure, mu)


def test_resolvent_two_vertices(pair):
    lam = 0.7
    R = resolvent_matrix(pair, lam)
    expected = np.array([[lam + 1, 1], [1, lam + 1]]) / (lam * (lam + 2))
    assert np.allclose(R, expected, atol=1e-14)
    with pytest.raises(ValueError):
        resolvent_apply(pair, 0.0, np.ones(2))


@pytest.mark.parametrize("method", ["uniformization", "eigen"])
@pytest.mark.parametrize("t", [0.1, 1.0, 7.5, 40.0])
def test_two_state_kernel(pair, method, t):
    Q = heat_kernel(pair, t, method)
    assert Q[0, 0] == pytest.approx((1 + math.exp(-2 * t)) / 2, abs=1e-12)
    assert Q[0, 1] == pytest.approx((1 - math.exp(-2 * t)) / 2, abs=1e-12)


def test_two_state_mixing(pair):
    rep = mixing_time(pair, math.inf)
    assert rep.t_mix == pytest.approx(math.log(4) / 2, rel=1e-5)
    assert rep.spectral_gap == pytest.approx(2.0)
    assert rep.deviation_at_bracket[0] >= 0.25 > rep.deviation_at_bracket[1]
    assert '"t_mix"' in rep.to_json()


def test_exit_time_tridiagonal():
    m = 9
    env = hand_env((0,), (m + 1,), grid_weights((m + 2,)))
    index = build_cluster_index(env)
    inside = np.zeros(env.n_vertices, dtype=bool)
    inside[1:m + 1] = True
    inst = build_instance(env, index, inside, boundary="killed")
    k = np.arange(1, m + 1)
    # embedded chain needs k(m+1-k) steps, each of mean length 1/2
    assert np.allclose(expected_exit_times(inst), k * (m + 1 - k) / 2)
    assert expected_exit_time(inst, (5,)) == pytest.approx(12.5)


def test_killed_region_must_be_interior():
    env = hand_env((0,), (5,), grid_weights((6,)))
    env_full = sample_environment(DomainSpec.full(1), 5, ConductanceLaw.constant(1.0), 0)
    index = build_cluster_index(env_full)
    with pytest.raises(GeometryError):
        build_instance(env_full, index, np.ones(env_full.n_vertices, dtype=bool), boundary="killed")
    with pytest.raises(ValueError):
        expected_exit_times(build_instance(env, build_cluster_index(env)))


def test_capacity_cap(bern07):
    with pytest.raises(CapacityError):
        build_instance(*bern07, cap=100)


def test_linear_functions_are_harmonic():
    env = sample_environment(DomainSpec.full(2), 12, ConductanceLaw.constant(1.0), 0)
    index = build_cluster_index(env)
    prof = harmonic_profile(env, index, (0, 0), 6, lambda c: 3.0 + c[:, 0] - 2 * c[:, 1])
    assert np.allclose(prof.values, 3.0 + prof.coords[:, 0] - 2 * prof.coords[:, 1], atol=1e-10)
    assert prof.best_gamma() == 1.0 or prof.holder_ratio(prof.best_gamma()) <= 2.0 + 1e-9


def test_harnack_for_positive_data(bern07):
    env, index = bern07
    prof = harmonic_profile(env, index, (0, 0), 8, lambda c: 1.0 + (c[:, 0] > 0))
    assert 1.0 <= prof.harnack_ratio < math.inf
    assert prof.values.min() >= 1.0 - 1e-12 and prof.values.max() <= 2.0 + 1e-12


def test_dirichlet_energy_limit():
    target = bump_gradient_energy(2)
    errs = []
    for n in (8, 16, 32):
        env = sample_environment(DomainSpec.full(2), n + 2, ConductanceLaw.constant(1.0), 0)
        errs.append(abs(dirichlet_energy(env, build_cluster_index(env), n, bump) - target))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / target < 0.01


def test_dirichlet_energy_scales_with_conductance():
    base = sample_environment(DomainSpec.full(2), 18, ConductanceLaw.constant(1.0), 0)
    double = sample_environment(DomainSpec.full(2), 18, ConductanceLaw.constant(2.0), 0)
    e1 = dirichlet_energy(base, build_cluster_index(base), 16, bump)
    assert dirichlet_energy(double, build_cluster_index(double), 16, bump) == pytest.approx(2 * e1)


def test_dirichlet_support_check():
    env = sample_environment(DomainSpec.full(2), 10, ConductanceLaw.constant(1.0), 0)
    with pytest.raises(GeometryError):
        dirichlet_energy(env, build_cluster_index(env), 12, bump)


def test_triplet_roundtrip(tmp_path, path4):
    inst = build_instance(*path4, kind="csrw")
    write_triplets(inst, tmp_path / "g.txt")
    coords, L = read_triplets(tmp_path / "g.txt")
    assert np.array_equal(coords, inst.coords)
    assert np.array_equal(L, inst.generator)


@given(seed=st.integers(0, 10**6), kind=st.sampled_from(["vsrw", "csrw"]), t=st.floats(0.05, 30.0))
def test_kernel_properties(seed, kind, t):
    env = sample_environment(DomainSpec.full(2), 4, ConductanceLaw.uniform(0.5, 2.0, 0.8), seed, K=4.0)
    inst = build_instance(env, build_cluster_index(env), kind=kind)
    Q = heat_kernel(inst, t)
    assert np.allclose(Q.sum(axis=1), 1.0, atol=1e-10)
    M = inst.measure[:, None] * Q
    assert np.allclose(M, M.T, atol=1e-10)
    assert Q.min() >= -1e-12
    assert np.allclose(Q, heat_kernel(inst, t, "eigen"), atol=1e-9)
    assert np.allclose(heat_kernel(inst, t / 2) @ heat_kernel(inst, t / 2), Q, atol=1e-9)


@given(seed=st.integers(0, 10**6))
def test_lp_order(seed):
    env = sample_environment(DomainSpec.box(2, 2), 2, ConductanceLaw.uniform(1.0, 3.0), seed)
    inst = build_instance(env, build_cluster_index(env))
    t1, t2, ti = (mixing_time(inst, p, certify=False).t_mix for p in (1.0, 2.0, math.inf))
    assert t1 <= t2 * (1 + 1e-6) and t2 <= ti * (1 + 1e-6)


def test_lp_deviation_of_stationary_rows():
    pi = np.array([0.25, 0.75])
    assert lp_deviation(np.tile(pi, (2, 1)), pi, 2.0) == 0.0


def test_killed_below_unkilled(bern07):
    env, index = bern07
    full = build_instance(env, index)
    ball = killed_ball(env, index, (0, 0), 5)
    Qf = heat_kernel(full, 3.0)
    Qk = heat_kernel(ball, 3.0)
    pos = full.position_of(ball.coords)
    assert np.all(Qk <= Qf[np.ix_(pos, pos)] + 1e-12)
    assert np.all(Qk.sum(axis=1) < 1.0)
