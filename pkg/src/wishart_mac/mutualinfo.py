"""Distribution of the user-A mutual information I_A = sum_j log2(1 + l_j).

Two exact routes are provided and kept deliberately independent:

* ``direct_jpdf`` integrates the joint eigenvalue density in eigenvalue
  coordinates, with the rate constraint moved into the integration limits.
* ``laplace_convolution`` inverts the moment generating function
  analytically, which turns the density into an (n-1)-fold convolution in
  the per-eigenvalue rates ``y_j = log2(1 + l_j)``.

The Gaussian approximation uses the exact mean and variance computed from
the one- and two-point correlation functions. All rates are in bits/s/Hz.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .ensemble import EnsembleContext, _log_abs_vandermonde, correlation_r
from .extremes import chi_lower_matrix
from .numerics import (
    QuadratureSpec,
    find_root_monotone,
    integrate_nested,
    integrate_semi_infinite,
    slogdet_scaled,
)

__all__ = [
    "MiMethod",
    "MomentSummary",
    "gaussian_outage",
    "mgf",
    "mi_mean",
    "mi_moments",
    "mi_pdf",
    "mi_pdf_direct",
    "mi_pdf_laplace",
    "mi_pdf_n1",
    "mi_variance",
    "outage",
    "outage_direct",
    "outage_laplace",
    "outage_rate",
]

LN2 = math.log(2.0)


class MiMethod(str, enum.Enum):
    DIRECT = "direct_jpdf"
    LAPLACE = "laplace_convolution"
    GAUSSIAN = "gaussian_approx"
    MONTE_CARLO = "monte_carlo"

    @classmethod
    def parse(cls, value) -> "MiMethod":
        if isinstance(value, cls):
            return value
        aliases = {"direct": cls.DIRECT, "laplace": cls.LAPLACE, "gaussian": cls.GAUSSIAN,
                   "gauss": cls.GAUSSIAN, "mc": cls.MONTE_CARLO}
        v = str(value).lower().replace("-", "_")
        if v in aliases:
            return aliases[v]
        return cls(v)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def _spec(ctx: EnsembleContext, spec: QuadratureSpec | None, rel_tol=1e-8, abs_tol=1e-12):
    return spec or ctx.quad_spec(rel_tol=rel_tol, abs_tol=abs_tol)


def _as_array(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)):
        raise ValueError(f"{name} must be >= 0")
    return x


def _ret(out, like):
    return float(out.reshape(())) if np.ndim(like) == 0 else out.reshape(np.shape(like))


# ---------------------------------------------------------------------------
# joint density with boundary values allowed (l >= 0)


def _jpdf0(ctx: EnsembleContext, lam):
    """Joint density at ``lam`` (shape (p, n)), permitting zero eigenvalues."""
    lam = np.maximum(lam, 0.0)
    sv, logv = _log_abs_vandermonde(lam)
    F = np.exp(np.swapaxes(ctx.log_f(lam), -1, -2))
    sf, logf = slogdet_scaled(F)
    logp = ctx.log_Cn.log_mag + logv + np.sum(ctx.log_weight(lam), axis=-1) + logf
    sign = sv * sf
    ok = (sign != 0) & np.isfinite(logp)
    return np.where(ok, sign * np.exp(np.where(ok, logp, 0.0)), 0.0)


# ---------------------------------------------------------------------------
# direct route


def _direct_pdf_batch(ctx: EnsembleContext, I, spec):
    n = ctx.n
    T = ctx.support_cutoff
    if n == 1:
        lam = np.expm1(I * LN2)
        return LN2 * np.exp2(I) * _jpdf0(ctx, lam[:, None])

    def upper(pts):
        # pts: [I, l_2, ..., l_mu-1]
        logrest = np.sum(np.log1p(pts[:, 1:]), axis=1)
        return np.minimum(np.expm1(pts[:, 0] * LN2 - logrest), T)

    def integrand(pts):
        Ival = pts[:, 0]
        rest = pts[:, 1:]
        logq = Ival * LN2 - np.sum(np.log1p(rest), axis=1)  # log(1 + l_1)
        lam1 = np.maximum(np.expm1(logq), 0.0)
        lam = np.column_stack([lam1, rest])
        return LN2 * np.exp(logq) * _jpdf0(ctx, lam)

    return integrate_nested(integrand, [upper] * (n - 1), spec, prefix=I[:, None])


def mi_pdf_direct(ctx: EnsembleContext, I, spec: QuadratureSpec | None = None):
    """Density of I_A by direct integration of the joint eigenvalue density.

    The delta constraint eliminates l_1 = 2^I / prod_{j>=2}(1 + l_j) - 1,
    leaving an (n-1)-fold integral with upper limits
    ``u_mu = 2^I / prod_{j=2}^{mu-1} (1 + l_j) - 1``.
    """
    I = _as_array(I, "I")
    out = _direct_pdf_batch(ctx, I.reshape(-1), _spec(ctx, spec))
    return _ret(np.maximum(out, 0.0), I)


def _elementary_symmetric(x):
    """e_0..e_m of the rows of ``x`` (shape (p, m)); returns (p, m+1)."""
    p, m = x.shape
    e = np.zeros((p, m + 1))
    e[:, 0] = 1.0
    for k in range(m):
        e[:, 1:k + 2] = e[:, 1:k + 2] + x[:, k:k + 1] * e[:, 0:k + 1]
    return e


def _small_det(a):
    """Batched determinant, with explicit expansions for dimensions up to 3."""
    d = a.shape[-1]
    if d == 1:
        return a[..., 0, 0]
    if d == 2:
        return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    if d == 3:
        return (a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
                - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
                + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0]))
    return np.linalg.det(a)


def _outage_inner_closed(ctx: EnsembleContext, outer, v):
    """int_0^v P(outer..., l_n) dl_n via Laplace expansion along l_n.

    Expanding both determinants along the l_n column leaves integrals of
    exp(-l/a) l^(n_A-n+i-1) f_j(l) over (0, v), which are the chi_upper
    kernels.
    """
    n = ctx.n
    p = len(v)
    pos = v > 0
    out = np.zeros(p)
    if not pos.any():
        return out
    outer = outer[pos]
    vv = v[pos]
    chi_up = ctx.h - chi_lower_matrix(ctx, vv)  # (p, j, i)
    if n == 1:
        out[pos] = math.exp(ctx.log_Cn.log_mag) * chi_up[:, 0, 0]
        return out
    m = n - 1
    lam = np.maximum(outer, 0.0)
    F = np.exp(np.swapaxes(ctx.log_f(lam), -1, -2))  # (p, n j, m)
    rows = np.arange(n)
    # minors of the power matrix [l_k^i]: dropping power i leaves e_{m-i}(l) * Vandermonde(l)
    esym = _elementary_symmetric(lam)  # (p, m+1)
    sv, logv = _log_abs_vandermonde(lam)
    vand = sv * np.exp(logv)
    mdelta = esym[:, m - rows] * vand[:, None]
    mf = np.empty((len(vv), n))
    for i in range(n):
        mf[:, i] = _small_det(F[:, rows != i, :])
    sgn = (-1.0) ** (rows[:, None] + rows[None, :])  # (j, i)
    total = np.einsum("pji,ji,pi,pj->p", chi_up, sgn, mdelta, mf)
    logw = np.sum(ctx.log_weight(lam), axis=1)
    out[pos] = math.exp(ctx.log_Cn.log_mag) * np.exp(logw) * total
    return out


def _direct_outage_batch(ctx: EnsembleContext, R, spec, closed_inner=True):
    n = ctx.n
    T = ctx.support_cutoff

    def upper(pts):
        # pts: [R, l_1, ..., l_mu-1]
        logrest = np.sum(np.log1p(pts[:, 1:]), axis=1)
        return np.minimum(np.expm1(pts[:, 0] * LN2 - logrest), T)

    if closed_inner:
        if n == 1:
            return _outage_inner_closed(ctx, np.zeros((len(R), 0)), upper(R[:, None]))

        def integrand(pts):
            return _outage_inner_closed(ctx, pts[:, 1:], upper(pts))

        return integrate_nested(integrand, [upper] * (n - 1), spec, prefix=R[:, None])

    return integrate_nested(lambda pts: _jpdf0(ctx, pts[:, 1:]), [upper] * n, spec, prefix=R[:, None])


def outage_direct(ctx: EnsembleContext, R, spec: QuadratureSpec | None = None, closed_inner: bool = True):
    """P(I_A < R) by integrating the joint density over
    ``0 <= l_mu <= 2^R / prod_{j<mu} (1 + l_j) - 1``.

    With ``closed_inner`` (default) the innermost eigenvalue is integrated in
    closed form through the chi kernels, so only n-1 levels are numerical;
    ``closed_inner=False`` integrates all n levels numerically.
    """
    R = _as_array(R, "R")
    out = _direct_outage_batch(ctx, R.reshape(-1), _spec(ctx, spec), closed_inner)
    return _ret(np.clip(out, 0.0, 1.0), R)


# ---------------------------------------------------------------------------
# Laplace / convolution route


def _log_rate_factors(ctx: EnsembleContext, y):
    """Per-slot factor in rate coordinates: returns (lam, log g_j(y_j)).

    ``g_j(y) = (2^y - 1)^(n_A-n) exp(-(2^y - 1)/a) U(n_B-j+1, n_A+n_B-j+2; 1/b + (2^y-1)/a)``
    with slot j attached to column j of ``y``.
    """
    lam = np.expm1(np.maximum(y, 0.0) * LN2)
    logf = ctx.log_f(lam)  # (p, n, n): [p, slot, j]
    diag = np.diagonal(logf, axis1=-2, axis2=-1)  # f_j at slot j
    return lam, ctx.log_weight(lam) + diag


def _laplace_integrand(ctx: EnsembleContext, x):
    """Integrand of the convolution formula at nested coordinates
    ``x = (x_1, ..., x_n)`` with ``x_{n+1} = 0``."""
    n = ctx.n
    y = x - np.column_stack([x[:, 1:], np.zeros(len(x))])
    lam, logg = _log_rate_factors(ctx, y)
    sv, logv = _log_abs_vandermonde(lam)
    logval = (ctx.log_nfact_Cn + n * math.log(LN2) + x[:, 0] * LN2 + logv + np.sum(logg, axis=1))
    ok = (sv != 0) & np.isfinite(logval)
    return np.where(ok, sv * np.exp(np.where(ok, logval, 0.0)), 0.0)


def _laplace_pdf_batch(ctx: EnsembleContext, I, spec):
    n = ctx.n
    if n == 1:
        return _laplace_integrand(ctx, I[:, None])
    limits = [(lambda col: (lambda pts: pts[:, col]))(c) for c in range(n - 1)]
    return integrate_nested(lambda pts: _laplace_integrand(ctx, pts), limits, spec, prefix=I[:, None])


def mi_pdf_laplace(ctx: EnsembleContext, I, spec: QuadratureSpec | None = None):
    """Density of I_A from the analytic inverse Laplace transform.

    With ``x_1 = I`` and ``x_{n+1} = 0`` this is an (n-1)-fold integral over
    ``I >= x_2 >= ... >= x_n >= 0`` of ``n! C_n (ln 2)^n 2^I`` times the
    Vandermonde of ``2^(x_j - x_{j+1}) - 1`` and one weighted Tricomi factor
    per slot.
    """
    I = _as_array(I, "I")
    out = _laplace_pdf_batch(ctx, I.reshape(-1), _spec(ctx, spec))
    return _ret(np.maximum(out, 0.0), I)


def outage_laplace(ctx: EnsembleContext, R, spec: QuadratureSpec | None = None):
    """P(I_A < R) as the integral over [0, R] of :func:`mi_pdf_laplace`."""
    R = _as_array(R, "R")
    n = ctx.n
    limits = [(lambda col: (lambda pts: pts[:, col]))(c) for c in range(n)]
    out = integrate_nested(lambda pts: _laplace_integrand(ctx, pts[:, 1:]), limits,
                           _spec(ctx, spec), prefix=R.reshape(-1, 1))
    return _ret(np.clip(out, 0.0, 1.0), R)


def mi_pdf_n1(ctx: EnsembleContext, I):
    """Closed-form density of I_A for a single receive antenna."""
    cfg = ctx.cfg
    if cfg.n != 1:
        raise ValueError(f"mi_pdf_n1 requires n == 1, got n = {cfg.n}")
    I = _as_array(I, "I")
    from .specfun import log_tricomi_u

    # past I = 1000 the density is far below the smallest double; cap to avoid inf
    t = np.expm1(np.minimum(I, 1000.0) * LN2)  # 2^I - 1
    with np.errstate(divide="ignore"):
        logt = (cfg.n_A - 1) * np.log(t) if cfg.n_A > 1 else np.zeros_like(t)
    logval = (
        -cfg.n_A * math.log(cfg.a) - cfg.n_B * math.log(cfg.b) - math.lgamma(cfg.n_A)
        + math.log(LN2) + I * LN2 + logt - t / cfg.a
        + log_tricomi_u(cfg.n_B, cfg.n_A + cfg.n_B + 1, 1.0 / cfg.b + t / cfg.a)
    )
    out = np.where(I >= 1000.0, 0.0, np.exp(logval))
    return float(out) if out.ndim == 0 else out


def mgf(ctx: EnsembleContext, s: float, spec: QuadratureSpec | None = None) -> float:
    """Laplace transform of the I_A density, E[exp(-s I_A)] = n! C_n det[psi_jk(s)]."""
    if not s >= 0:
        raise ValueError("s must be >= 0")
    cfg = ctx.cfg
    n = cfg.n
    spec = spec or ctx.quad_spec(rel_tol=1e-11, abs_tol=1e-300)
    psi = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            p = cfg.n_A - n + k

            def f(lam, j=j, p=p):
                with np.errstate(divide="ignore"):
                    lp = p * np.log(lam) if p else 0.0
                return np.exp(-lam / cfg.a + lp - (s / LN2) * np.log1p(lam) + ctx.log_f(lam)[..., j])

            psi[j, k] = integrate_semi_infinite(f, spec)
    sign, logdet = slogdet_scaled(psi)
    return float(sign * math.exp(ctx.log_nfact_Cn + logdet))


# ---------------------------------------------------------------------------
# moments and Gaussian approximation


@functools.lru_cache(maxsize=256)
def _moments(ctx: EnsembleContext, rel_tol: float) -> MomentSummary:
    spec = ctx.quad_spec(rel_tol=rel_tol, abs_tol=1e-14)
    n = ctx.n

    def r1(x, power):
        return correlation_r(ctx, 1, x[:, None]) * np.log2(np.maximum(1.0, 1.0 + x)) ** power

    mean = integrate_semi_infinite(lambda x: r1(x, 1), spec)
    second = integrate_semi_infinite(lambda x: r1(x, 2), spec)
    cross = 0.0
    if n >= 2:
        inf = lambda pts: np.full(len(pts), np.inf)

        def r2(pts):
            return correlation_r(ctx, 2, pts) * np.log2(1.0 + pts[:, 0]) * np.log2(1.0 + pts[:, 1])

        cross = integrate_nested(r2, [inf, inf], spec.replace(abs_tol=1e-12, rel_tol=max(rel_tol, 1e-9)))
    var = second + cross - mean * mean
    if var < -1e-8:
        raise ArithmeticError(f"negative variance {var:.3g}: correlation integrals inconsistent")
    return MomentSummary(mean, max(var, 0.0))


def mi_moments(ctx: EnsembleContext, rel_tol: float = 1e-10) -> MomentSummary:
    """Exact mean and variance of I_A from R_1 and R_2 (cached per context)."""
    return _moments(ctx, rel_tol)


def mi_mean(ctx: EnsembleContext) -> float:
    """mu = int R_1(l) log2(1 + l) dl."""
    return mi_moments(ctx).mean


def mi_variance(ctx: EnsembleContext) -> float:
    """sigma^2 = int R_1 log2^2 + int int R_2 log2 log2 - mu^2."""
    return mi_moments(ctx).variance


def gaussian_outage(ctx: EnsembleContext, R, moments: MomentSummary | None = None):
    """Outage probability under the Gaussian approximation, erfc((mu-R)/sqrt(2 var))/2."""
    m = moments or mi_moments(ctx)
    R = np.asarray(R, dtype=float)
    if m.variance == 0:
        out = np.where(R > m.mean, 1.0, np.where(R == m.mean, 0.5, 0.0))
    else:
        out = 0.5 * special.erfc((m.mean - R) / math.sqrt(2.0 * m.variance))
    return float(out) if out.ndim == 0 else out


def gaussian_pdf(ctx: EnsembleContext, I, moments: MomentSummary | None = None):
    m = moments or mi_moments(ctx)
    I = np.asarray(I, dtype=float)
    out = np.exp(-(I - m.mean) ** 2 / (2 * m.variance)) / math.sqrt(2 * math.pi * m.variance)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# dispatch


def default_method(ctx: EnsembleContext) -> MiMethod:
    return MiMethod.DIRECT if ctx.n <= 2 else MiMethod.LAPLACE


def mi_pdf(ctx: EnsembleContext, I, method=None, spec: QuadratureSpec | None = None, mc_values=None):
    method = MiMethod.parse(method) if method is not None else default_method(ctx)
    if method is MiMethod.DIRECT:
        return mi_pdf_direct(ctx, I, spec)
    if method is MiMethod.LAPLACE:
        return mi_pdf_laplace(ctx, I, spec)
    if method is MiMethod.GAUSSIAN:
        return gaussian_pdf(ctx, I)
    raise ValueError("Monte Carlo densities are produced by montecarlo.empirical_density")


def outage(ctx: EnsembleContext, R, method=MiMethod.DIRECT, spec: QuadratureSpec | None = None, mc_values=None):
    """Outage probability by any method; Monte Carlo needs ``mc_values``."""
    method = MiMethod.parse(method)
    if method is MiMethod.DIRECT:
        return outage_direct(ctx, R, spec)
    if method is MiMethod.LAPLACE:
        return outage_laplace(ctx, R, spec)
    if method is MiMethod.GAUSSIAN:
        return gaussian_outage(ctx, R)
    if mc_values is None:
        raise ValueError("monte_carlo outage needs sampled mutual-information values")
    from .montecarlo import empirical_cdf

    R = np.asarray(R, dtype=float)
    out = empirical_cdf(mc_values, R.reshape(-1), strict=True)
    return _ret(out, R)


def outage_rate(ctx: EnsembleContext, eps: float, method=MiMethod.DIRECT, spec: QuadratureSpec | None = None,
                mc_values=None, tol: float = 1e-6) -> float:
    """Rate R with p_out(R) = eps."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    method = MiMethod.parse(method)
    m = mi_moments(ctx)
    if method is MiMethod.GAUSSIAN:
        if m.variance == 0:
            return m.mean
        return float(m.mean - math.sqrt(2.0 * m.variance) * special.erfcinv(2.0 * eps))
    if method is MiMethod.MONTE_CARLO:
        if mc_values is None:
            raise ValueError("monte_carlo outage rate needs sampled mutual-information values")
        return float(np.quantile(np.asarray(mc_values), eps))
    memo = {}

    def g(r):
        if r not in memo:
            memo[r] = outage(ctx, r, method, spec) - eps
        return memo[r]

    # bracket outward from the Gaussian guess; far-tail evaluations are the expensive ones
    step = max(m.std, 1e-3)
    guess = max(float(m.mean - math.sqrt(2.0 * m.variance) * special.erfcinv(2.0 * eps)), 0.0)
    lo, hi = max(guess - 0.5 * step, 0.0), guess + 0.5 * step
    while lo > 0 and g(lo) > 0:
        lo = max(lo - step, 0.0)
        step *= 2
    step = max(m.std, 1e-3)
    while g(hi) < 0:
        if hi > m.mean + 20.0 * step:
            raise ArithmeticError("outage never reaches eps; check the quadrature tolerance")
        hi += step
    return find_root_monotone(g, lo, hi, tol=tol)
