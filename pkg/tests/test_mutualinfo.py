import math

import numpy as np
import pytest
from scipy import integrate

from conftest import scenario
from wishart_mac.ensemble import ChannelConfig, EnsembleContext
from wishart_mac.mutualinfo import (
    MiMethod,
    MomentSummary,
    gaussian_outage,
    mgf,
    mi_mean,
    mi_moments,
    mi_pdf,
    mi_pdf_direct,
    mi_pdf_laplace,
    mi_pdf_n1,
    mi_variance,
    outage,
    outage_direct,
    outage_laplace,
    outage_rate,
)


def test_method_parse():
    assert MiMethod.parse("direct") is MiMethod.DIRECT
    assert MiMethod.parse("laplace_convolution") is MiMethod.LAPLACE
    assert MiMethod.parse("Gaussian-Approx") is MiMethod.GAUSSIAN
    assert MiMethod.parse("mc") is MiMethod.MONTE_CARLO
    with pytest.raises(ValueError):
        MiMethod.parse("exact")


def test_moment_summary_validation():
    with pytest.raises(ValueError):
        MomentSummary(1.0, -0.1)
    assert MomentSummary(1.0, 4.0).std == 2.0


@pytest.mark.parametrize("cfg", [(1, 4, 5, 1.0, 1 / 3), (1, 1, 1, 2.0, 0.7), (1, 3, 2, 50.0, 3.0)])
def test_single_antenna_three_ways(cfg):
    ctx = EnsembleContext(ChannelConfig(*cfg))
    I = np.linspace(0.01, 10, 40)
    ref = mi_pdf_n1(ctx, I)
    np.testing.assert_allclose(mi_pdf_direct(ctx, I), ref, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(mi_pdf_laplace(ctx, I), ref, rtol=1e-12, atol=1e-300)


def test_single_antenna_scalar_law():
    # I = log2(1 + l) with P(l > x) = exp(-x/a) / (1 + b x / a)
    a, b = 2.0, 0.7
    ctx = EnsembleContext(ChannelConfig(1, 1, 1, a, b))
    for R in (0.3, 1.0, 2.5):
        x = 2.0**R - 1
        assert outage_direct(ctx, R) == pytest.approx(1 - math.exp(-x / a) / (1 + b * x / a), rel=1e-10)
    with pytest.raises(ValueError):
        mi_pdf_n1(scenario(2), 1.0)


@pytest.mark.parametrize("n", [2, 3])
def test_direct_and_laplace_agree(n):
    ctx = scenario(n)
    I = np.linspace(0.1, 8, 12)
    d, l = mi_pdf_direct(ctx, I), mi_pdf_laplace(ctx, I)
    np.testing.assert_allclose(d, l, rtol=1e-6, atol=1e-12)


def test_pdf_normalizes_and_integrates_to_outage(ctx2):
    spec = ctx2.quad_spec(rel_tol=1e-9, abs_tol=1e-13)
    f = lambda t: mi_pdf_direct(ctx2, np.array([t]), spec)[0]
    total, _ = integrate.quad(f, 0, 14, epsabs=1e-12, epsrel=1e-10, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)
    part, _ = integrate.quad(f, 0, 3, epsabs=1e-12, epsrel=1e-10, limit=200)
    assert outage_direct(ctx2, 3.0) == pytest.approx(part, rel=1e-8)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_outage_routes_agree(n):
    ctx = scenario(n)
    R = np.array([0.5, 1.5, 3.0, 4.5])
    closed = outage_direct(ctx, R)
    numeric = outage_direct(ctx, R, closed_inner=False)
    lap = outage_laplace(ctx, R)
    np.testing.assert_allclose(closed, numeric, rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(closed, lap, rtol=1e-9, atol=1e-14)


def test_outage_basic_properties(ctx3):
    R = np.linspace(0, 10, 21)
    p = outage(ctx3, R, MiMethod.LAPLACE)
    assert p[0] == 0.0
    assert np.all(np.diff(p) >= -1e-12)
    assert p[-1] == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        outage_direct(ctx3, -1.0)


def test_scalar_and_array_returns(ctx2):
    assert isinstance(outage_direct(ctx2, 3.0), float)
    assert isinstance(mi_pdf_direct(ctx2, 2.0), float)
    assert mi_pdf(ctx2, np.ones((2, 3))).shape == (2, 3)


def test_moments_match_density(ctx2):
    m = mi_moments(ctx2)
    f1 = lambda t: t * mi_pdf_direct(ctx2, t)
    f2 = lambda t: t * t * mi_pdf_direct(ctx2, t)
    e1, _ = integrate.quad(f1, 0, 14, epsabs=1e-11, epsrel=1e-10, limit=200)
    e2, _ = integrate.quad(f2, 0, 14, epsabs=1e-11, epsrel=1e-10, limit=200)
    assert m.mean == pytest.approx(e1, rel=1e-7)
    assert m.variance == pytest.approx(e2 - e1 * e1, rel=1e-6)
    assert mi_mean(ctx2) == m.mean and mi_variance(ctx2) == m.variance


def test_moments_single_antenna_direct():
    ctx = EnsembleContext(ChannelConfig(1, 4, 5, 1.0, 1 / 3))
    e1, _ = integrate.quad(lambda t: t * mi_pdf_n1(ctx, t), 0, np.inf, epsabs=1e-13, epsrel=1e-11)
    e2, _ = integrate.quad(lambda t: t * t * mi_pdf_n1(ctx, t), 0, np.inf, epsabs=1e-13, epsrel=1e-11)
    m = mi_moments(ctx)
    assert m.mean == pytest.approx(e1, rel=1e-9)
    assert m.variance == pytest.approx(e2 - e1 * e1, rel=1e-8)


def test_mgf_matches_density(ctx2):
    assert mgf(ctx2, 0.0) == pytest.approx(1.0, rel=1e-10)
    for s in (0.5, 2.0):
        ref, _ = integrate.quad(lambda t: math.exp(-s * t) * mi_pdf_direct(ctx2, t), 0, 14, epsabs=1e-12, epsrel=1e-10)
        assert mgf(ctx2, s) == pytest.approx(ref, rel=1e-8)
    with pytest.raises(ValueError):
        mgf(ctx2, -1.0)


def test_gaussian_outage_properties(ctx3):
    m = mi_moments(ctx3)
    assert gaussian_outage(ctx3, m.mean) == pytest.approx(0.5)
    g = gaussian_outage(ctx3, np.linspace(0, 10, 30))
    assert np.all(np.diff(g) > 0)
    degenerate = MomentSummary(2.0, 0.0)
    assert gaussian_outage(ctx3, [1.0, 2.0, 3.0], degenerate).tolist() == [0.0, 0.5, 1.0]


@pytest.mark.parametrize("method", ["direct", "laplace", "gaussian"])
def test_outage_rate_inverts_outage(ctx2, method):
    for eps in (0.01, 0.3):
        r = outage_rate(ctx2, eps, method)
        assert outage(ctx2, r, method) == pytest.approx(eps, rel=1e-5)


def test_outage_rate_monte_carlo_and_errors(ctx2):
    vals = np.linspace(0, 1, 101)
    assert outage_rate(ctx2, 0.5, "mc", mc_values=vals) == pytest.approx(0.5)
    # outage is P(I < R): the sample at exactly 0.5 is not counted
    assert outage(ctx2, 0.5, "mc", mc_values=vals) == pytest.approx(50 / 101)
    with pytest.raises(ValueError):
        outage_rate(ctx2, 0.0)
    with pytest.raises(ValueError):
        outage_rate(ctx2, 0.5, "mc")
    with pytest.raises(ValueError):
        mi_pdf(ctx2, 1.0, "mc")


def test_more_antennas_more_rate():
    means = [mi_mean(scenario(n)) for n in (1, 2, 3, 4)]
    assert np.all(np.diff(means) > 0)
