import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmflou.errors import ParameterError
from gmflou.levy import (CompensatedGamma, CompoundPoisson, ExponentialJumps, NormalJumps, SeedLineage,
                         levy_from_dict, sample_increments)


SPECS = [CompensatedGamma(1.0, 2.0), CompensatedGamma(5.0, 15.0),
         CompoundPoisson(3.0, NormalJumps(0.5, 1.0)), CompoundPoisson(2.0, ExponentialJumps(1.5))]


def test_gamma_second_moment():
    assert CompensatedGamma(1.0, 2.0).m2 == pytest.approx(0.25)
    assert CompensatedGamma(5.0, 15.0).m2 == pytest.approx(5.0 / 225.0)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_psi_curvature_is_second_moment(spec):
    # -psi''(0) = E[L_1^2] by central finite differences
    eps = 1e-3
    second = (spec.psi(eps) - 2 * spec.psi(0.0) + spec.psi(-eps)) / eps**2
    assert -second.real == pytest.approx(spec.m2, rel=1e-5)
    assert spec.psi(0.0) == 0


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_increments_mean_zero_and_variance(spec):
    x = sample_increments(spec, SeedLineage(11), 200_000, 0.5)
    se = x.std() / np.sqrt(x.size)
    assert abs(x.mean()) < 5 * se
    assert x.var() == pytest.approx(0.5 * spec.m2, rel=0.03)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_empirical_cf_matches_cumulant(spec):
    dt = 0.25
    x = sample_increments(spec, SeedLineage(5), 200_000, dt)
    for u in (0.7, 2.0):
        emp = np.exp(1j * u * x)
        target = np.exp(dt * spec.psi(u))
        assert abs(emp.mean().real - target.real) < 5 * emp.real.std() / np.sqrt(x.size)
        assert abs(emp.mean().imag - target.imag) < 5 * emp.imag.std() / np.sqrt(x.size)


def test_stream_determinism_and_independence():
    spec = SPECS[0]
    a = sample_increments(spec, SeedLineage(3, 7), 100, 0.1)
    b = sample_increments(spec, SeedLineage(3, 7), 100, 0.1)
    c = sample_increments(spec, SeedLineage(3, 8), 100, 0.1)
    lam = SeedLineage(3, 7, domain=1).generator().standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.allclose(SeedLineage(3, 7).generator().standard_normal(5), lam)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.1, 10), b=st.floats(0.1, 10))
def test_gamma_roundtrip_and_moment(a, b):
    spec = CompensatedGamma(a, b)
    assert levy_from_dict(spec.to_dict()) == spec
    assert spec.m2 == pytest.approx(a / b**2)


def test_compound_poisson_roundtrip():
    for spec in SPECS[2:]:
        assert levy_from_dict(spec.to_dict()).to_dict() == spec.to_dict()


@pytest.mark.parametrize("bad", [dict(kind="CompensatedGamma", a=-1, b=1), dict(kind="stable", a=1)])
def test_invalid_specs(bad):
    with pytest.raises(ParameterError):
        levy_from_dict(bad)


def test_bad_lineage():
    with pytest.raises(ParameterError):
        SeedLineage(-1)
    with pytest.raises(ParameterError):
        sample_increments(SPECS[0], SeedLineage(1), 0, 0.1)
