import math

import numpy as np
import pytest

from gmflou.errors import DomainError, ParameterError
from gmflou.flp import FlpParams, simulate_flp
from gmflou.levy import CompensatedGamma
from gmflou.limit import (GmflouParams, char_function_Z, covariance_Z, covariance_Z_kernel, f_tilde,
                          kernel_g, limit_residual_alpha_inf, limit_residual_alpha_zero, rl_kernel,
                          simulate_Y, simulate_Z, tail_exponent, variance_Y, variance_Z, y_functional,
                          z_functional, z_integral_functional)
from gmflou.scheme import NoiseLayout, SampleGrid, scheme_covariance
from gmflou.stats import ensemble_moment, fit_tail_exponent

from oracles import variance_Z_oracle

SPEC = CompensatedGamma(1.0, 2.0)
P = GmflouParams(0.2, 0.12, 1.0, SPEC)


def test_kernel_g():
    assert kernel_g(0.0, 1.0, 0.12) == 1.0
    assert kernel_g(1.0, 1.0, 0.12) == pytest.approx(2 ** -0.88, rel=1e-12)
    t = np.linspace(0, 50, 200)
    assert np.all(np.diff(kernel_g(t, 2.0, 0.3)) < 0)


def test_domain_rejected_before_simulation():
    with pytest.raises(DomainError, match="h \\+ d"):
        GmflouParams(0.2, 0.3, 1.0, SPEC)
    with pytest.raises(ParameterError):
        GmflouParams(0.2, 0.1, 0.0, SPEC)
    with pytest.raises(DomainError):
        variance_Z(1.0, 0.3, 0.2, 1.0)
    with pytest.raises(DomainError):
        simulate_Y(0.2, 0.3, SPEC, SampleGrid(4), 1)


def test_variance_Z_example_and_scaling():
    expected = 2 / math.sqrt(2 * math.pi) * math.gamma(0.4) * math.gamma(0.5) / math.gamma(0.9) / 0.3
    assert variance_Z(1.0, 0.1, 0.25, 1.0) == pytest.approx(expected, rel=1e-12)
    assert variance_Z(1.0, 0.1, 0.25, 1.0) == pytest.approx(9.784, abs=1e-3)
    assert variance_Z(2.0, 0.1, 0.2, 1.0) == pytest.approx(2 ** 1.4 * variance_Z(1.0, 0.1, 0.2, 1.0))
    hs = [0.1, 0.2, 0.25, 0.29, 0.299]
    vals = [variance_Z(1.0, h, 0.2, 1.0) for h in hs]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("alpha,h,d", [(1.0, 0.12, 0.2), (4.0, 0.05, 0.3), (0.3, 0.2, 0.1)])
def test_variance_Z_matches_oracles(alpha, h, d):
    p = GmflouParams(d, h, alpha, SPEC)
    target = variance_Z_oracle(alpha, h, d, SPEC.m2)
    assert variance_Z(alpha, h, d, SPEC.m2) == pytest.approx(target, rel=1e-12)
    assert covariance_Z(0.0, p) == pytest.approx(target, rel=1e-5)
    assert covariance_Z_kernel(0.0, p) == pytest.approx(target, rel=1e-4)


def test_covariance_two_routes_agree():
    for t in (0.5, 4.0, 32.0):
        assert covariance_Z(t, P) == pytest.approx(covariance_Z_kernel(t, P), rel=1e-5)
    assert covariance_Z(1e-6, P) == pytest.approx(variance_Z(1.0, 0.12, 0.2, SPEC.m2), rel=1e-3)


def test_covariance_decreasing_positive():
    vals = [covariance_Z(t, P) for t in (1, 4, 16, 64)]
    assert all(v > 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_tail_exponent():
    assert tail_exponent(0.12, 0.2) == pytest.approx(-0.36)


def test_far_asymptotic_slope_reached_slowly():
    # the local slope approaches 2h+2d-1 only for t >> alpha
    ts = np.array([1e5, 2e5, 4e5, 8e5])
    slope, _, _ = fit_tail_exponent(ts, [covariance_Z(t, P) for t in ts])
    assert abs(slope - tail_exponent(0.12, 0.2)) < 0.05


@pytest.mark.parametrize("x", [1e-4, 0.3, 2.0, 150.0, 1e7])
def test_f_tilde_quadrature_equals_closed_form(x):
    assert f_tilde(x, 1.0, 0.12, 0.2) == pytest.approx(rl_kernel(x, 1.0, 0.12, 0.2), rel=1e-8)
    lit = f_tilde(x, 1.0, 0.12, 0.2, normalization="d")
    assert lit == pytest.approx(math.gamma(1.2) * rl_kernel(x, 1.0, 0.12, 0.2), rel=1e-8)


def test_f_tilde_large_alpha_tends_to_flp_kernel():
    x = 0.7
    assert f_tilde(x, 1e8, 0.12, 0.25) == pytest.approx(x ** 0.25 / math.gamma(1.25), rel=1e-6)


def test_char_function_axioms():
    assert char_function_Z([0.0], [1.0], P)[0] == 1.0
    th = np.array([[0.3], [-0.3], [2.0]])
    phi = char_function_Z(th, [1.0], P)
    assert phi[0] == pytest.approx(np.conj(phi[1]), abs=1e-12)
    assert np.all(np.abs(phi) <= 1.0)
    assert np.allclose(phi, char_function_Z(th, [1.0], P, method="closed"), atol=1e-8)


def test_char_function_gaussian_regime_matches_variance():
    # for small theta, log phi ~ -theta^2 Var/2
    theta = 1e-3
    phi = char_function_Z([theta], [1.0], P)[0]
    assert -2 * math.log(abs(phi)) / theta**2 == pytest.approx(variance_Z(1.0, 0.12, 0.2, SPEC.m2), rel=1e-3)


def test_char_function_multi_time_stationary():
    a = char_function_Z([0.3, 0.2], [0.5, 1.0], P)[0]
    b = char_function_Z([0.3, 0.2], [2.5, 3.0], P)[0]
    assert a == pytest.approx(b, abs=1e-8)


def test_char_function_rejects_shape_mismatch():
    with pytest.raises(ParameterError):
        char_function_Z([0.1, 0.2], [1.0], P)


def test_scheme_is_stationary_and_converges():
    biases = []
    for n in (16, 32, 64):
        g = SampleGrid(n, 2.0)
        f = z_functional(g, 1.0, 0.12, 0.2, [0, n, 2 * n])
        v = np.diag(scheme_covariance(SPEC.m2, g, f))
        assert np.ptp(v) < 1e-3 * v[0]
        biases.append(abs(v[1] / variance_Z(1.0, 0.12, 0.2, SPEC.m2) - 1))
    assert biases[0] > biases[1] > biases[2]


def test_y_variance_closed_form_and_scheme():
    g = SampleGrid(64, 2.0)
    f = y_functional(g, 0.12, 0.2, [64, 128])
    v = np.diag(scheme_covariance(SPEC.m2, g, f))
    assert v == pytest.approx(variance_Y(np.array([1.0, 2.0]), 0.12, 0.2, SPEC.m2), rel=0.02)
    assert variance_Y(2.0, 0.12, 0.2, 1.0) / variance_Y(1.0, 0.12, 0.2, 1.0) == pytest.approx(2 ** 1.64)


def test_y_increment_stationarity_mc():
    ens = simulate_Y(0.2, 0.12, SPEC, SampleGrid(16, 2.0), 3, replicas=1500, threads=4)
    assert np.all(ens.values[:, 0] == 0)
    inc = ens.values[:, 24] - ens.values[:, 8]
    direct = ens.values[:, 16]
    for order in (1, 2):
        a = ensemble_moment(inc[:, None], 0, order)
        b = ensemble_moment(direct[:, None], 0, order)
        assert abs(a[0] - b[0]) < 4 * math.hypot(a[1], b[1])


def test_simulate_Z_mean_zero_and_thread_independent():
    g = SampleGrid(16)
    a = simulate_Z(P, g, 5, replicas=300, threads=1)
    b = simulate_Z(P, g, 5, replicas=300, threads=4)
    assert np.array_equal(a.values, b.values)
    for i in (0, 8, 16):
        m, se = ensemble_moment(a, i, 1)
        assert abs(m) < 4 * se


def test_alpha_zero_residual_vanishes_at_t0_and_guards_overflow():
    g = SampleGrid(16)
    layout = NoiseLayout(g)
    f = z_integral_functional(g, 1e-6, 0.12, 0.2, [0, 16], layout)
    assert np.all(f.uniform[0] == 0) and np.all(f.far[0] == 0)
    assert np.all(np.isfinite(f.uniform)) and np.all(np.isfinite(f.far))
    table = limit_residual_alpha_zero([1e-6], 0.0, 0.2, 0.12, SPEC, g, 1, 40)
    assert table.residuals == [0.0]


def test_alpha_residual_tables_small():
    g = SampleGrid(16)
    up = limit_residual_alpha_inf([1e2, 1e4], 1.0, 0.2, 0.12, SPEC, g, 2, 100)
    assert up.monotone and all(r >= 0 for r in up.residuals)
    down = limit_residual_alpha_zero([1.0, 0.01], 1.0, 0.2, 0.12, SPEC, g, 2, 100)
    assert down.monotone


def test_large_alpha_increment_close_to_flp_pathwise():
    g = SampleGrid(16)
    z = simulate_Z(GmflouParams(0.2, 0.12, 1e6, SPEC), g, 8, replicas=50)
    L = simulate_flp(FlpParams(0.2, SPEC), g, 8, replicas=50)
    resid = z.values - z.values[:, :1] - L.values
    assert np.mean(resid**2) < 1e-3 * np.mean(L.values[:, -1] ** 2)
