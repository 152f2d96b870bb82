"""Gap probabilities and extreme-eigenvalue laws of the quotient ensemble.

With the incomplete kernels

    chi_lower[j, k](x) = int_x^inf exp(-l/a) l^(n_A-n+k-1) f_j(l) dl
    chi_upper[j, k](x) = int_0^x  (same integrand)  = h[j, k] - chi_lower[j, k](x)

the probability of no eigenvalue in (0, x) is ``n! C_n det(chi_lower)`` and
the probability of none in (x, inf) is ``n! C_n det(chi_upper)``.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy import linalg

from .ensemble import EnsembleContext
from .numerics import find_root_monotone, integrate_batch, slogdet_scaled
from .specfun import log_tricomi_u

__all__ = [
    "chi_lower",
    "chi_lower_matrix",
    "chi_upper",
    "chi_upper_matrix",
    "default_grid",
    "gap_lower",
    "gap_upper",
    "pdf_max",
    "pdf_min",
]


def _check_x(x, strict=False):
    x = np.asarray(x, dtype=float)
    bad = ~(x > 0) if strict else ~(x >= 0)
    if np.any(bad):
        raise ValueError("x must be %s" % ("> 0" if strict else ">= 0"))
    return x


def _chi_lower_jk(ctx: EnsembleContext, j: int, k: int, x):
    cfg = ctx.cfg
    p = cfg.n_A - cfg.n + k - 1  # power of l in the integrand
    arg = 1.0 / cfg.b + x / cfg.a
    total = np.zeros_like(x)
    for r in range(p + 1):
        coef = math.exp(math.lgamma(p + 1) - math.lgamma(p + 1 - r) + (r + 1) * math.log(cfg.a))
        # x**0 == 1 at x == 0: the r == p term is the only survivor there
        total += coef * x ** (p - r) * np.exp(
            log_tricomi_u(cfg.n_B - j + 1, cfg.n_A + cfg.n_B - j - r + 1, arg)
        )
    return np.exp(-x / cfg.a) * total


def chi_lower(ctx: EnsembleContext, j: int, k: int, x):
    """Upper-tail kernel int_x^inf of the h integrand (finite sum)."""
    if not (1 <= j <= ctx.n and 1 <= k <= ctx.n):
        raise IndexError(f"(j, k) = ({j}, {k}) outside 1..{ctx.n}")
    x = _check_x(x)
    out = np.where(x == 0, ctx.h[j - 1, k - 1], _chi_lower_jk(ctx, j, k, x))
    return float(out) if out.ndim == 0 else out


def chi_lower_matrix(ctx: EnsembleContext, x):
    """All kernels at once; shape ``x.shape + (n, n)``."""
    x = _check_x(x)
    cfg = ctx.cfg
    n = cfg.n
    arg = 1.0 / cfg.b + x / cfg.a
    decay = np.exp(-x / cfg.a)
    pmax = cfg.n_A - 1
    xpow = [np.ones_like(x)]
    for _ in range(pmax):
        xpow.append(xpow[-1] * x)
    out = np.empty(x.shape + (n, n))
    for j in range(1, n + 1):
        # the U factor depends on (j, r) only, so share it across k
        u = [np.exp(log_tricomi_u(cfg.n_B - j + 1, cfg.n_A + cfg.n_B - j - r + 1, arg)) for r in range(pmax + 1)]
        for k in range(1, n + 1):
            p = cfg.n_A - n + k - 1
            total = np.zeros_like(x)
            for r in range(p + 1):
                coef = math.exp(math.lgamma(p + 1) - math.lgamma(p + 1 - r) + (r + 1) * math.log(cfg.a))
                total += coef * xpow[p - r] * u[r]
            out[..., j - 1, k - 1] = decay * total
    out[x == 0] = ctx.h
    return out


def _chi_upper_quad(ctx, jj, kk, x):
    """int_0^x of the kernel integrand for index arrays ``jj``, ``kk`` (1-based)."""
    cfg = ctx.cfg

    def g(pts):
        j = pts[:, 0].astype(int) - 1
        k = pts[:, 1].astype(int)
        lam = pts[:, 2]
        logf = np.take_along_axis(ctx.log_f(lam), j[:, None], axis=1)[:, 0]
        p = cfg.n_A - cfg.n + k - 1
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = np.where(p == 0, 0.0, p * np.log(lam))
        return np.exp(-lam / cfg.a + lp + logf)

    prefix = np.column_stack([jj, kk]).astype(float)
    spec = ctx.quad_spec(rel_tol=1e-13, abs_tol=1e-300)
    est, _ = integrate_batch(g, prefix, np.zeros(len(x)), x, spec)
    return est


def chi_upper_matrix(ctx: EnsembleContext, x):
    """``h - chi_lower``; entries that would lose more than one bit to the
    subtraction are integrated directly instead."""
    x = _check_x(x)
    lower = chi_lower_matrix(ctx, x)
    h = ctx.h
    up = h - lower
    small = (up < 0.5 * h) & (x[..., None, None] > 0)
    if np.any(small):
        n = ctx.n
        jj = np.broadcast_to(np.arange(1, n + 1)[:, None], up.shape)[small]
        kk = np.broadcast_to(np.arange(1, n + 1)[None, :], up.shape)[small]
        xx = np.broadcast_to(x[..., None, None], up.shape)[small]
        up[small] = _chi_upper_quad(ctx, jj, kk, xx)
    up[x == 0] = 0.0
    return up


def chi_upper(ctx: EnsembleContext, j: int, k: int, x):
    """Kernel integrated over (0, x); equals h - chi_lower."""
    if not (1 <= j <= ctx.n and 1 <= k <= ctx.n):
        raise IndexError(f"(j, k) = ({j}, {k}) outside 1..{ctx.n}")
    out = chi_upper_matrix(ctx, x)[..., j - 1, k - 1]
    return float(out) if out.ndim == 0 else out


def _prob_from_det(ctx, mats):
    sign, logdet = slogdet_scaled(mats)
    val = np.where(sign == 0, 0.0, sign * np.exp(np.where(sign == 0, 0.0, ctx.log_nfact_Cn + logdet)))
    return val


def gap_lower(ctx: EnsembleContext, x):
    """E((0, x)): probability that every eigenvalue is >= x (survival of l_min)."""
    x = _check_x(x)
    # the empty interval holds no eigenvalue with certainty
    out = np.where(x == 0, 1.0, np.clip(_prob_from_det(ctx, chi_lower_matrix(ctx, x)), 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


# Small-x series for det(chi_upper). As x -> 0 the rows of chi_upper all
# tend to multiples of the same vector, so its determinant cancels in
# floating point (about 1e-4 relative error in pdf_max at x = 0.05, n = 4).
# Writing phi_j(l) = exp(-l/a) f_j(l) = sum_m C[j, m] (kappa l)^m and
# reducing C to row echelon form E = T C (T unit lower triangular times a
# permutation) turns the kernel into
#   (T chi_upper)[j, k] = x^(p_k+1) tau^j G[j, k],
#   G[j, k] = sum_{m>=j} E[j, m] tau^(m-j) / (p_k + m + 1),   tau = kappa x,
# whose determinant carries no cancellation.
_SERIES_TAU = 0.4
_SERIES_TERMS = 96


@functools.lru_cache(maxsize=64)
def _series_echelon(ctx: EnsembleContext):
    cfg = ctx.cfg
    n, M = cfg.n, _SERIES_TERMS
    rho = cfg.b / cfg.a
    kappa = max(rho, 1.0 / cfg.a)
    m = np.arange(M)
    # exp(-t / (a kappa)) and (1 + (rho / kappa) t)^(-s) as power series in t
    lg_fact = np.array([math.lgamma(k + 1) for k in m])
    expo = (-1.0) ** m * np.exp(-m * math.log(cfg.a * kappa) - lg_fact)
    coef = np.zeros((n, M))
    N = cfg.n_A
    for j in range(1, n + 1):
        alpha = cfg.n_B - j + 1
        row = np.zeros(M)
        for r in range(N + 1):
            s = alpha + r
            # binom(N, r) (alpha)_r b^s
            lw = (math.lgamma(N + 1) - math.lgamma(r + 1) - math.lgamma(N - r + 1)
                  + math.lgamma(alpha + r) - math.lgamma(alpha) + s * math.log(cfg.b))
            lb = np.array([math.lgamma(s + k) - math.lgamma(s) - math.lgamma(k + 1) for k in m])
            row += np.exp(lw + lb + m * math.log(rho / kappa)) * (-1.0) ** m
        coef[j - 1] = np.convolve(row, expo)[:M]
    scale = np.max(np.abs(coef), axis=1)
    coef /= scale[:, None]
    perm, low, _ = linalg.lu(coef[:, :n])
    ech = linalg.solve_triangular(low, perm.T @ coef, lower=True, unit_diagonal=True)
    # det(chi) = det(T)^-1 prod(scale) det(T chi), and det(T) = det(perm)
    sign = round(np.linalg.det(perm))
    return kappa, ech, sign, float(np.sum(np.log(scale)))


def _series_parts(ctx: EnsembleContext, x):
    """(log prefactor, G, H) of the small-x representation, batched over x."""
    kappa, ech, sign, log_scale = _series_echelon(ctx)
    cfg = ctx.cfg
    n, M = cfg.n, ech.shape[1]
    p = cfg.n_A - n + np.arange(n)
    tau = kappa * x
    shift = np.arange(M)[None, :] - np.arange(n)[:, None]  # m - j
    with np.errstate(divide="ignore", invalid="ignore"):
        tpow = np.where(shift >= 0, tau[..., None, None] ** np.maximum(shift, 0), 0.0)
    terms = ech * tpow  # (..., n, M)
    G = terms @ (1.0 / (p[None, :] + np.arange(M)[:, None] + 1))
    H = terms.sum(axis=-1)
    with np.errstate(divide="ignore"):
        log_pref = (ctx.log_nfact_Cn + log_scale + np.sum(p + 1) * np.log(x)
                    + (n * (n - 1) // 2) * np.log(tau))
    return sign, log_pref, G, H


def _gap_upper_series(ctx, x):
    sign, log_pref, G, _ = _series_parts(ctx, x)
    sg, ld = slogdet_scaled(G)
    return sign * sg * np.exp(log_pref + ld)


def _pdf_max_series(ctx, x):
    sign, log_pref, G, H = _series_parts(ctx, x)
    total = np.zeros(x.shape)
    for i in range(ctx.n):
        m = G.copy()
        m[..., i, :] = (H[..., i] / x)[..., None]
        sg, ld = slogdet_scaled(m)
        total = total + sg * np.exp(log_pref + ld)
    return sign * total


def _split_small(ctx, x):
    kappa = _series_echelon(ctx)[0]
    return (x > 0) & (kappa * x <= _SERIES_TAU)


def gap_upper(ctx: EnsembleContext, x):
    """E((x, inf)): probability that every eigenvalue is <= x (CDF of l_max)."""
    x = _check_x(x)
    small = _split_small(ctx, x)
    out = np.empty(x.shape)
    out[small] = _gap_upper_series(ctx, x[small])
    big = ~small
    out[big] = _prob_from_det(ctx, chi_upper_matrix(ctx, x[big]))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _edge_rows(ctx, x):
    """phi[..., j, k] = exp(-x/a) x^(n_A-n+k-1) f_j(x)."""
    cfg = ctx.cfg
    powers = cfg.n_A - cfg.n + np.arange(cfg.n)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    lw = -x / cfg.a
    logf = ctx.log_f(x)  # (..., n) over j
    return np.exp(lw[..., None, None] + logf[..., :, None] + powers * logx[..., None, None])


def _row_replacement_sum(ctx, kernels, edge):
    n = ctx.n
    total = np.zeros(kernels.shape[:-2])
    for i in range(n):
        m = kernels.copy()
        m[..., i, :] = edge[..., i, :]
        total = total + _prob_from_det(ctx, m)
    return total


def pdf_min(ctx: EnsembleContext, x):
    """Density of the smallest eigenvalue, -d/dx E((0, x))."""
    x = _check_x(x, strict=True)
    out = _row_replacement_sum(ctx, chi_lower_matrix(ctx, x), _edge_rows(ctx, x))
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def pdf_max(ctx: EnsembleContext, x):
    """Density of the largest eigenvalue, d/dx E((x, inf))."""
    x = _check_x(x, strict=True)
    small = _split_small(ctx, x)
    out = np.empty(x.shape)
    out[small] = _pdf_max_series(ctx, x[small])
    big = ~small
    xb = x[big]
    out[big] = _row_replacement_sum(ctx, chi_upper_matrix(ctx, xb), _edge_rows(ctx, xb))
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def default_grid(ctx: EnsembleContext, points: int = 200) -> np.ndarray:
    """Log-spaced grid from 1e-3 a up to the 1 - 1e-6 quantile of l_max."""
    a = ctx.cfg.a
    hi = a
    while gap_upper(ctx, hi) < 1 - 1e-6:
        hi *= 2.0
    top = find_root_monotone(lambda x: gap_upper(ctx, x) - (1 - 1e-6), hi / 2, hi, tol=1e-6 * hi)
    return np.geomspace(1e-3 * a, top, points)
