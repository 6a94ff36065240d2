import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import quad

from asymfair.distributions import Beta, cdf_at, from_dict, make_peak, pdf_at, piecewise_uniform, uniform
from asymfair.errors import DomainError
from asymfair.profiles import load_profile, profile_from_list, standard_profiles
from asymfair.quadrature import integrate

# trapezoid integration of the peak(5/11) density formula at step 1e-6
PEAK_5_11_CDF = {0.1: 0.0298, 0.3: 0.2082, 0.7: 0.8215, 0.9: 0.9735}
PEAK_5_11_MEAN = 0.48636363636


def test_peak_density_values():
    d = make_peak(1 / 11)
    assert pdf_at(d, 0.0) == pytest.approx(0.1)
    assert pdf_at(d, 1 / 11) == pytest.approx(1.9)
    assert pdf_at(d, 1.0) == pytest.approx(0.1)
    assert pdf_at(make_peak(0.5), 0.5) == pytest.approx(1.9)
    assert d.bounds.p == pytest.approx(0.1) and d.bounds.q == pytest.approx(1.9)


def test_uniform_and_piecewise_values():
    assert pdf_at(uniform(), 0.3) == 1.0
    assert cdf_at(uniform(), 0.25) == 0.25
    split = piecewise_uniform([(0, 0.25, 0.5), (0.75, 1, 0.5)])
    assert cdf_at(split, 0.5) == pytest.approx(0.5)
    assert split.non_interval_support and split.bounds is None


@pytest.mark.parametrize("x, expected", sorted(PEAK_5_11_CDF.items()))
def test_peak_cdf_matches_trapezoid(x, expected):
    assert cdf_at(make_peak(5 / 11), x) == pytest.approx(expected, abs=1e-6)


def test_peak_symmetric_at_half():
    d = make_peak(0.5)
    x = np.linspace(0, 1, 101)
    np.testing.assert_allclose(d.pdf(x), d.pdf(1 - x), atol=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        make_peak(1.0)
    with pytest.raises(DomainError):
        make_peak(0.0)
    with pytest.raises(DomainError):
        pdf_at(uniform(), 1.5)
    assert cdf_at(uniform(), -3.0) == 0.0 and cdf_at(uniform(), 7.0) == 1.0


def test_sample_support_and_means(rng):
    assert np.all((uniform(0.6, 1).sample(rng, 10_000) >= 0.6))
    assert make_peak(5 / 11).sample(rng, 100_000).mean() == pytest.approx(PEAK_5_11_MEAN, abs=0.01)
    assert Beta(5.0, 1.0).sample(rng, 100_000).mean() == pytest.approx(5 / 6, abs=0.01)
    assert make_peak(5 / 11).mean() == pytest.approx(PEAK_5_11_MEAN, abs=1e-9)


@pytest.mark.parametrize("name", sorted(standard_profiles()))
def test_builtin_invariants(name, rng):
    for d in standard_profiles()[name]:
        lo, hi = d.support.lo, d.support.hi
        if d.singular:
            mass = quad(d.pdf, 0, 1, limit=200)[0]
        else:
            mass, _ = integrate(d.pdf, np.array(sorted({0.0, 1.0, *d.breakpoints})), atol=1e-10)
        assert abs(mass - 1.0) <= 1e-8
        grid = np.linspace(0, 1, 1000)
        assert np.all(np.diff(d.cdf(grid)) >= 0)
        assert d.cdf(0.0) == 0.0 and d.cdf(1.0) == pytest.approx(1.0, abs=1e-15)
        if d.bounds is not None:
            inside = np.linspace(lo, hi, 501)
            dens = d.pdf(inside)
            assert np.all(dens >= d.bounds.p - 1e-12) and np.all(dens <= d.bounds.q + 1e-12)
            assert 1 / d.bounds.q - 1e-12 <= hi - lo <= 1 / d.bounds.p + 1e-12
        draws = d.sample(rng, 100_000)
        assert stats.kstest(draws, d.cdf).statistic <= 0.01


def test_cdf_matches_integrated_pdf():
    for d in [make_peak(0.2), piecewise_uniform([(0, 0.25, 0.5), (0.25, 1, 0.5)]), Beta(2.0, 5.0)]:
        for x in np.linspace(0.05, 0.95, 7):
            pts = np.array(sorted({0.0, x, *[b for b in d.breakpoints if b < x]}))
            val, _ = integrate(d.pdf, pts, atol=1e-10)
            assert val == pytest.approx(d.cdf(x), abs=1e-6)


def test_standard_profiles_shapes():
    profs = standard_profiles()
    assert profs["peak10"].n == 10
    assert profs["beta5"].n == 5
    rr = profs["rr-po-counterexample"]
    assert (rr[0].support.lo, rr[0].support.hi) == (0.6, 1.0)
    assert (rr[1].support.lo, rr[1].support.hi) == (0.0, 1.0)
    assert all(d.bounds is None for d in profs["beta5"])


def test_profile_json_round_trip(tmp_path):
    prof = load_profile("beta5")
    path = tmp_path / "prof.json"
    path.write_text(prof.to_json())
    again = load_profile(str(path))
    assert [d.to_dict() for d in again] == [d.to_dict() for d in prof]
    assert from_dict({"kind": "peak", "params": {"a": 0.3}}).to_dict() == make_peak(0.3).to_dict()
    with pytest.raises(DomainError):
        from_dict({"kind": "gamma", "params": {}})
    with pytest.raises(DomainError):
        load_profile("no-such-profile")


def test_non_interval_profile_warns(tmp_path):
    path = tmp_path / "split.json"
    path.write_text(json.dumps([{"kind": "piecewise_uniform",
                                 "params": {"segments": [[0, 0.25, 0.5], [0.75, 1, 0.5]]}}]))
    with pytest.warns(UserWarning):
        load_profile(str(path))


@given(st.floats(0.01, 0.99))
def test_peak_integrates_to_one(a):
    d = make_peak(a)
    mass, _ = integrate(d.pdf, np.array([0.0, a, 1.0]), atol=1e-12)
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert d.cdf(a) == pytest.approx(a, abs=1e-12)


@given(st.floats(0.01, 0.99), st.floats(0.0, 1.0))
def test_peak_ppf_inverts_cdf(a, u):
    d = make_peak(a)
    assert d.cdf(d.ppf(u)) == pytest.approx(u, abs=1e-10)


@given(st.floats(0.3, 8.0), st.floats(0.3, 8.0), st.floats(0.0, 1.0))
def test_beta_partial_moment_limit(alpha, b, x):
    d = Beta(alpha, b)
    assert 0.0 <= d.partial_moment(x) <= d.mean() + 1e-12
    assert d.partial_moment(1.0) == pytest.approx(alpha / (alpha + b), rel=1e-10)
