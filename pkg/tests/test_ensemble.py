import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from wishart_mac.ensemble import (
    ChannelConfig,
    EnsembleContext,
    correlation_r,
    h_by_quadrature,
    h_entry,
    jpdf,
    log_norm_constant,
    marginal_density,
)
from wishart_mac.numerics import QuadratureSpec, det_scaled, integrate_nested, integrate_semi_infinite

CONFIGS = [
    (1, 1, 1, 1.0, 1.0),
    (2, 4, 5, 1.0, 1 / 3),
    (3, 4, 5, 1.0, 1 / 3),
    (4, 4, 5, 1.0, 1 / 3),
    (3, 6, 3, 10.0, 0.2),
    (2, 2, 7, 1000.0, 5.0),
    (4, 9, 4, 0.05, 2.0),
]


@pytest.mark.parametrize("args", [(0, 1, 1, 1, 1), (2, 1, 2, 1, 1), (2, 2, 1, 1, 1), (1, 1, 1, 0, 1),
                                  (1, 1, 1, 1, -1), (1, 1, 1, math.inf, 1), (1.5, 2, 2, 1, 1)])
def test_config_validation(args):
    with pytest.raises(ValueError):
        ChannelConfig(*args)


@pytest.mark.parametrize("cfg", CONFIGS)
def test_normalization_identity(cfg):
    ctx = EnsembleContext(ChannelConfig(*cfg))
    d = det_scaled(ctx.h)
    assert d.sign == 1
    total = math.lgamma(ctx.n + 1) + ctx.log_Cn.log_mag + d.log_mag
    assert math.exp(total) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("cfg", CONFIGS[:5])
def test_h_against_scipy_quad(cfg):
    c = ChannelConfig(*cfg)
    ctx = EnsembleContext(c)
    for j in range(1, c.n + 1):
        for k in range(1, c.n + 1):
            p = c.n_A - c.n + k - 1
            f = lambda x: math.exp(-x / c.a + p * math.log(x) + ctx.log_f(x)[j - 1]) if x > 0 else float(p == 0) * math.exp(ctx.log_f(0.0)[j - 1])
            ref, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=400)
            assert h_entry(c, j, k) == pytest.approx(ref, rel=1e-9)
            assert h_by_quadrature(ctx, j, k) == pytest.approx(ref, rel=1e-9)
    with pytest.raises(IndexError):
        h_entry(c, 0, 1)


def test_scalar_case_closed_form():
    # n = n_A = n_B = 1: l = a X / (1 + b Y) with X, Y ~ Exp(1), so
    # P(l > x) = exp(-x/a) / (1 + b x / a)
    a, b = 2.0, 0.7
    ctx = EnsembleContext(ChannelConfig(1, 1, 1, a, b))
    x = np.geomspace(1e-3, 50, 40)
    sf = np.exp(-x / a) / (1 + b * x / a)
    pdf = sf * (1 / a + (b / a) / (1 + b * x / a))
    np.testing.assert_allclose(jpdf(ctx, x[:, None]), pdf, rtol=1e-12)
    np.testing.assert_allclose(marginal_density(ctx, x), pdf, rtol=1e-12)


def test_norm_constant_positive():
    assert log_norm_constant(ChannelConfig(3, 4, 5, 1.0, 1 / 3)).sign == 1


def test_jpdf_symmetric_and_positive():
    ctx = EnsembleContext(ChannelConfig(3, 4, 5, 1.0, 1 / 3))
    rng = np.random.default_rng(3)
    lam = rng.exponential(2.0, (50, 3))
    p = jpdf(ctx, lam)
    assert np.all(p >= 0)
    for perm in ([1, 0, 2], [2, 1, 0], [1, 2, 0]):
        np.testing.assert_allclose(jpdf(ctx, lam[:, perm]), p, rtol=1e-12)
    with pytest.raises(ValueError):
        jpdf(ctx, np.array([1.0, -1.0, 2.0]))
    with pytest.raises(ValueError):
        jpdf(ctx, np.array([1.0, 2.0]))


def test_jpdf_normalized_n2():
    ctx = EnsembleContext(ChannelConfig(2, 4, 5, 1.0, 1 / 3))
    inf = lambda p: np.full(len(p), np.inf)
    total = integrate_nested(lambda p: jpdf(ctx, np.maximum(p, 1e-300)), [inf, inf],
                             QuadratureSpec(rel_tol=1e-9, abs_tol=1e-13, tail_scale=2.0))
    assert total == pytest.approx(1.0, rel=1e-7)


@pytest.mark.parametrize("n", [2, 3])
def test_top_correlation_is_scaled_jpdf(n):
    # R_n = n! P
    ctx = EnsembleContext(ChannelConfig(n, 4, 5, 1.0, 1 / 3))
    lam = np.random.default_rng(n).exponential(1.5, (30, n))
    np.testing.assert_allclose(correlation_r(ctx, n, lam), math.factorial(n) * jpdf(ctx, lam), rtol=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_one_point_integrates_to_n(n):
    ctx = EnsembleContext(ChannelConfig(n, 4, 5, 1.0, 1 / 3))
    spec = ctx.quad_spec(rel_tol=1e-11, abs_tol=1e-14)
    val = integrate_semi_infinite(lambda x: correlation_r(ctx, 1, x[:, None]), spec)
    assert val == pytest.approx(n, rel=1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_two_point_integrates_to_pairs(n):
    ctx = EnsembleContext(ChannelConfig(n, 4, 5, 1.0, 1 / 3))
    inf = lambda p: np.full(len(p), np.inf)
    val = integrate_nested(lambda p: correlation_r(ctx, 2, p), [inf, inf], ctx.quad_spec(rel_tol=1e-9))
    assert val == pytest.approx(n * (n - 1), rel=1e-7)


def test_correlation_coincident_points_vanish():
    ctx = EnsembleContext(ChannelConfig(3, 4, 5, 1.0, 1 / 3))
    assert correlation_r(ctx, 2, np.array([1.3, 1.3])) == 0.0
    assert correlation_r(ctx, 3, np.array([0.5, 2.0, 0.5])) == 0.0
    with pytest.raises(ValueError):
        correlation_r(ctx, 4, np.ones(4))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 30), st.floats(0.01, 30))
def test_two_point_symmetric(x, y):
    ctx = EnsembleContext(ChannelConfig(3, 4, 5, 1.0, 1 / 3))
    r_xy = correlation_r(ctx, 2, np.array([x, y]))
    r_yx = correlation_r(ctx, 2, np.array([y, x]))
    assert r_xy == pytest.approx(r_yx, rel=1e-9, abs=1e-300)
    assert r_xy >= -1e-12 * correlation_r(ctx, 1, np.array([x])) * correlation_r(ctx, 1, np.array([y]))


def test_context_is_hashable_and_cached():
    c = ChannelConfig(2, 4, 5, 1.0, 1 / 3)
    assert EnsembleContext(c) == EnsembleContext.build(2, 4, 5, 1.0, 1 / 3)
    assert hash(EnsembleContext(c)) == hash(EnsembleContext(c))
    assert not EnsembleContext(c).h.flags.writeable
