import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmflou.errors import DomainError, ParameterError
from gmflou.flp import (FlpParams, cd_constant, flp_covariance, flp_functional, flp_increment_functional,
                        flp_via_increments, increment_covariance_delta, kernel_f, simulate_flp,
                        simulate_flp_direct, vd_squared)
from gmflou.levy import CompensatedGamma, SeedLineage
from gmflou.scheme import NoiseLayout, SampleGrid, draw_noise, scheme_covariance, simulate
from gmflou.stats import empirical_autocovariance, fit_tail_exponent

from oracles import cd_oracle, direct_scheme_sum, vd2_oracle

SPEC = CompensatedGamma(1.0, 2.0)


def test_kernel_values():
    assert kernel_f(0.25, 1.0, 0.0) == pytest.approx(1 / math.gamma(1.25), abs=1e-12)
    assert kernel_f(0.25, 1.0, 0.0) == pytest.approx(1.103262, abs=1e-6)
    assert kernel_f(0.3, 0.0, -2.0) == 0.0
    assert kernel_f(0.3, 1.0, 1.5) == 0.0


@pytest.mark.parametrize("d", [0.05, 0.25, 0.4, 0.49])
def test_constants_against_mpmath(d):
    assert cd_constant(d, 1.0) == pytest.approx(cd_oracle(d, 1.0), rel=1e-12)
    assert vd_squared(d, 1.0) == pytest.approx(vd2_oracle(d, 1.0), rel=1e-12)


def test_constants_examples():
    assert cd_constant(0.25, 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)
    assert vd_squared(0.25, 1.0) == pytest.approx(0.531923, abs=1e-6)
    assert vd_squared(0.25, 0.25) == pytest.approx(0.132981, abs=1e-6)
    assert vd_squared(0.3, 2.0) == pytest.approx(2 * vd_squared(0.3, 1.0))
    assert cd_constant(0.3, 3.0) == pytest.approx(3 * cd_constant(0.3, 1.0))
    assert np.isfinite(cd_constant(0.49, 1.0)) and cd_constant(0.49, 1.0) > cd_constant(0.4, 1.0)
    with pytest.raises(DomainError):
        cd_constant(0.5, 1.0)


@pytest.mark.parametrize("d", [0.1, 0.25, 0.4])
def test_variance_identities(d):
    # 2 V_d^2 = C_d / (d (2d+1)) = m2 * int f_1^2
    assert flp_covariance(d, 1.0, 1.0, 1.0) == pytest.approx(cd_constant(d, 1.0) / (d * (2 * d + 1)), rel=1e-12)
    from scipy import integrate
    f2 = lambda s: kernel_f(d, 1.0, s) ** 2
    val = integrate.quad(f2, -np.inf, -1)[0] + integrate.quad(f2, -1, 0)[0] + integrate.quad(f2, 0, 1)[0]
    assert flp_covariance(d, 1.0, 1.0, 1.0) == pytest.approx(val, rel=1e-6)


def test_covariance_examples():
    assert flp_covariance(0.25, 0.0, 0.7, 1.0) == 0.0
    assert flp_covariance(0.25, 1.0, 2.0, 1.0) == pytest.approx(vd_squared(0.25, 1.0) * 2 ** 1.5, rel=1e-12)


def test_delta_examples():
    exact = vd2_oracle(0.25, 1.0) * (2 ** 1.5 - 2)
    assert increment_covariance_delta(0.25, 1, 1.0, 1.0) == pytest.approx(exact, rel=1e-12)
    # the quoted 0.440656 is a product of rounded factors
    assert increment_covariance_delta(0.25, 1, 1.0, 1.0) == pytest.approx(0.440656, abs=5e-6)
    ratio = increment_covariance_delta(0.25, 1024, 1.0, 1.0) / increment_covariance_delta(0.25, 512, 1.0, 1.0)
    assert ratio == pytest.approx(2 ** (2 * 0.25 - 1), rel=0.01)
    with pytest.raises(ParameterError):
        increment_covariance_delta(0.25, 0, 1.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(d=st.floats(0.01, 0.49), n=st.integers(1, 10_000))
def test_delta_positive_and_consistent(d, n):
    delta = increment_covariance_delta(d, n, 1.0, 1.0)
    # delta is the covariance of unit increments, so it follows from the covariance function
    cov = lambda s, t: flp_covariance(d, s, t, 1.0)
    direct = cov(n + 1, 1) - cov(n + 1, 0) - cov(n, 1) + cov(n, 0)
    assert delta > 0
    assert delta == pytest.approx(direct, rel=1e-6, abs=1e-12)


def test_partial_sums_of_delta_grow_like_n_to_2d():
    d = 0.25
    N = 2 ** np.arange(4, 13)
    ks = np.arange(1, N[-1] + 1)
    partial = np.cumsum(increment_covariance_delta(d, ks, 1.0, 1.0))[N - 1]
    slope, _, _ = fit_tail_exponent(N, partial)
    assert slope == pytest.approx(2 * d, abs=0.05)


def test_fast_path_equals_direct_loop():
    d, n, T = 0.3, 16, 16.0
    grid = SampleGrid(n, T, far_horizon=0.0)
    layout = NoiseLayout(grid)
    f = flp_functional(grid, d, layout=layout)
    _, noise = draw_noise(SPEC, grid, SeedLineage(9), layout)
    fast = f.uniform @ noise
    assert f.times.size == 257
    assert np.max(np.abs(fast - direct_scheme_sum(d, n, grid.a_n, grid.steps, noise))) < 1e-10
    assert np.max(np.abs(fast - simulate_flp_direct(d, grid, noise))) < 1e-10


def test_increment_route_equals_direct_route():
    grid = SampleGrid(32, 2.0)
    layout = NoiseLayout(grid)
    a = flp_functional(grid, 0.2, layout=layout)
    b = flp_via_increments(grid, 0.2, np.arange(grid.steps + 1), layout)
    assert np.allclose(a.uniform, b.uniform, atol=1e-12)
    assert np.allclose(a.far, b.far, rtol=1e-12)


def test_increment_functional_differences():
    grid = SampleGrid(16)
    layout = NoiseLayout(grid)
    a = flp_functional(grid, 0.2, layout=layout)
    inc = flp_increment_functional(grid, 0.2, np.arange(grid.steps), layout)
    assert np.allclose(inc.uniform, np.diff(a.uniform, axis=0), atol=1e-12)


def test_scheme_bias_shrinks_with_n():
    d = 0.25
    bias = []
    for n in (16, 32, 64):
        grid = SampleGrid(n)
        f = flp_functional(grid, d, [n // 4, n // 2, n])
        cov = scheme_covariance(1.0, grid, f)
        s = np.array([0.25, 0.5, 1.0])
        bias.append(np.max(np.abs(cov / flp_covariance(d, s[:, None], s[None, :], 1.0) - 1)))
    assert bias[0] > bias[1] > bias[2]


def test_far_tail_reduces_truncation_bias():
    d, n = 0.4, 16
    target = flp_covariance(d, 1, 1, 1.0)
    with_far = SampleGrid(n)
    without = SampleGrid(n, far_horizon=0.0)
    v1 = scheme_covariance(1.0, with_far, flp_functional(with_far, d, [n]))[0, 0]
    v0 = scheme_covariance(1.0, without, flp_functional(without, d, [n]))[0, 0]
    assert abs(v1 - target) < abs(v0 - target)


def test_paths_start_at_zero_and_are_deterministic():
    grid = SampleGrid(16)
    p = FlpParams(0.3, SPEC)
    a = simulate_flp(p, grid, 4, replicas=70, threads=1)
    b = simulate_flp(p, grid, 4, replicas=70, threads=3)
    assert np.array_equal(a.values, b.values)
    assert np.all(a.values[:, 0] == 0)
    # replica r only depends on its own stream
    c = simulate_flp(p, grid, 4, replicas=3, first_stream=65)
    assert np.array_equal(c.values, a.values[65:68])


def test_mc_increment_autocovariance_matches_delta():
    d, n = 0.25, 8
    grid = SampleGrid(n, 8.0)
    layout = NoiseLayout(grid)
    f = flp_increment_functional(grid, d, np.arange(grid.steps), layout)
    (inc,) = simulate(SPEC, grid, [f], 2, 3000, threads=4, layout=layout)
    lags = np.array([1, 4, 16])
    cov, se = empirical_autocovariance(inc, lags, np.arange(0, 40))
    target = increment_covariance_delta(d, lags, 1 / n, SPEC.m2)
    exact = scheme_covariance(SPEC.m2, grid, f, layout=layout)[0, lags]
    assert np.all(np.abs(cov - exact) <= 4 * se)
    assert np.all(np.abs(cov - target) <= 4 * se + 0.15 * target)


def test_invalid_parameters():
    with pytest.raises(ParameterError):
        FlpParams(0.5, SPEC)
    with pytest.raises(ParameterError):
        SampleGrid(0)
    with pytest.raises(ParameterError):
        SampleGrid(8).index_of(0.3)


def test_optimal_truncation():
    g = SampleGrid.with_optimal_trunc(64, 0.25)
    assert g.a_n == math.ceil(64 ** (1.75 / 0.75))
