import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from percwalk.stats import (EmpiricalSample, InsufficientData, diffusion_constant_fit, extrapolate,
                            folded_normal_cdf, half_normal_cdf, is_nondecreasing, is_nonincreasing, ks_distance,
                            nearest_vertex, read_csv, tail_fit, write_csv)


def test_ks_against_scipy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=500)
    ours = ks_distance(x, sps.norm.cdf)
    assert ours == pytest.approx(sps.kstest(x, "norm").statistic, abs=1e-12)


def test_ks_extremes():
    # just below the atom F_n = 0 while F is nearly 1
    assert ks_distance(np.full(10, 5.0), sps.norm.cdf) == pytest.approx(sps.norm.cdf(5.0), abs=1e-12)
    quantiles = sps.norm.ppf((np.arange(200) + 0.5) / 200)
    assert ks_distance(quantiles, sps.norm.cdf) == pytest.approx(0.5 / 200, abs=1e-12)


def test_ks_discrete_oracle():
    # sample equal to its own distribution: a point mass at 0
    assert ks_distance(np.zeros(7), lambda x: (np.asarray(x) >= 0).astype(float)) == 0.0


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=60))
def test_ks_in_unit_interval(values):
    assert 0.0 <= ks_distance(values, sps.norm.cdf) <= 1.0


def test_empty_sample():
    with pytest.raises(InsufficientData):
        EmpiricalSample([])


def test_folded_normal_reduces_to_half_normal():
    xs = np.linspace(-1, 4, 11)
    assert np.allclose(folded_normal_cdf(0.0, 2.0)(xs), half_normal_cdf(2.0)(xs))


def test_geometric_tail_slope():
    k = np.arange(1, 9)
    counts = 4096 * 0.5**k
    fit = tail_fit(k, counts, total=4096)
    assert fit.slope == pytest.approx(-math.log(2))
    assert fit.r2 == pytest.approx(1.0)


@given(scale=st.floats(0.01, 1e4))
def test_tail_fit_scale_invariance(scale):
    k = np.arange(1, 7)
    counts = np.array([50, 31, 13, 9, 3, 1], dtype=float)
    a = tail_fit(k, counts)
    b = tail_fit(k, counts * scale)
    assert b.slope == pytest.approx(a.slope)
    assert b.r2 == pytest.approx(a.r2)


def test_tail_fit_needs_three_points():
    with pytest.raises(InsufficientData):
        tail_fit([1, 2, 3], [5, 2, 0])


def test_diffusion_fit_exact_and_scaling():
    rng = np.random.default_rng(1)
    t = np.array([0.5, 1.0])
    x = rng.normal(size=(4000, 2, 2)) * np.sqrt(2 * t)[None, :, None]
    fit = diffusion_constant_fit(x, t)
    assert fit.ci_low < fit.c_hat < fit.ci_high
    assert fit.c_hat == pytest.approx(2.0, rel=0.05)
    scaled = diffusion_constant_fit(3 * x, t)
    assert scaled.c_hat == pytest.approx(9 * fit.c_hat)
    assert fit.overlaps(fit) and not fit.overlaps(scaled)


def test_diffusion_fit_degenerate():
    with pytest.raises(InsufficientData):
        diffusion_constant_fit(np.zeros((100, 2)), [0.5, 1.0])
    with pytest.raises(InsufficientData):
        diffusion_constant_fit(np.ones((5, 2)) * [1, 2], [0.5, 1.0])


def test_nearest_vertex_ties_are_lexicographic():
    coords = np.array([[1, 0], [0, 1], [0, -1], [-1, 0]])
    i, dist = nearest_vertex(coords, (0, 0))
    assert tuple(coords[i]) == (-1, 0) and dist == 1.0


def test_extrapolate_exact():
    ns = np.array([4, 6, 8, 10])
    assert extrapolate(ns, 1.5 + 2 / ns, 1) == pytest.approx(1.5)
    assert extrapolate(ns, 1.5 + 2 / ns - 3 / ns**2, 2) == pytest.approx(1.5)


def test_monotone_helpers():
    assert is_nonincreasing([3, 2, 2, 1]) and not is_nonincreasing([1, 2])
    assert is_nondecreasing([1, 1, 2]) and is_nondecreasing([1, 0.99], slack=0.02)


def test_csv_roundtrip(tmp_path):
    write_csv(tmp_path / "a.csv", ["n", "v"], [[1, 0.1], [2, 1 / 3]])
    header, rows = read_csv(tmp_path / "a.csv")
    assert header == ["n", "v"] and float(rows[1][1]) == 1 / 3
