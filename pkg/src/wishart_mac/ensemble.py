"""Eigenvalue law of the quotient ensemble W = (I + b H_B H_B^+)^-1 (a H_A H_A^+).

The joint density of the n eigenvalues is biorthogonal::

    P(l_1..l_n) = C_n * Vandermonde(l) * prod_i exp(-l_i/a) l_i^(n_A-n) * det[f_j(l_k)]

with ``f_j(l) = U(n_B-j+1, n_A+n_B-j+2; 1/b + l/a)``. Everything here is
evaluated in log space and is vectorized over leading array axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .numerics import QuadratureSpec, ScaledValue, integrate_batch, integrate_semi_infinite, slogdet_scaled
from .specfun import log_tricomi_u

__all__ = [
    "ChannelConfig",
    "EnsembleContext",
    "correlation_r",
    "h_entry",
    "jpdf",
    "log_norm_constant",
    "marginal_bin_average",
    "marginal_density",
]


@dataclass(frozen=True)
class ChannelConfig:
    """Scenario parameters.

    n: receive antennas; n_A, n_B: transmit antennas of users A and B;
    a, b: per-antenna SNR factors (``a = SNR_A / n_A``, ``b = SNR_B / n_B``).
    """

    n: int
    n_A: int
    n_B: int
    a: float
    b: float

    def __post_init__(self):
        for name in ("n", "n_A", "n_B"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        for name in ("a", "b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")
        if self.n_A < self.n:
            raise ValueError(f"n_A >= n is required (got n_A={self.n_A}, n={self.n})")
        if self.n_B < self.n:
            raise ValueError(f"n_B >= n is required (got n_B={self.n_B}, n={self.n})")


def log_norm_constant(cfg: ChannelConfig) -> ScaledValue:
    """log C_n from the closed-form product of Gamma factors."""
    n, na, nb = cfg.n, cfg.n_A, cfg.n_B
    log_inv = (
        math.lgamma(n + 1)
        + (n * na - n * (n - 1) / 2) * math.log(cfg.a)
        + n * nb * math.log(cfg.b)
        + sum(math.lgamma(j) + math.lgamma(na - j + 1) for j in range(1, n + 1))
    )
    return ScaledValue(1, -log_inv)


def _log_h(cfg: ChannelConfig) -> np.ndarray:
    n, na, nb = cfg.n, cfg.n_A, cfg.n_B
    out = np.empty((n, n))
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            out[j - 1, k - 1] = (
                (na - n + k) * math.log(cfg.a)
                + math.lgamma(na - n + k)
                + float(log_tricomi_u(nb - j + 1, nb + n - j - k + 2, 1.0 / cfg.b))
            )
    return out


def h_entry(cfg: ChannelConfig, j: int, k: int) -> float:
    """h_{j,k} = int_0^inf exp(-l/a) l^(n_A-n+k-1) f_j(l) dl, in closed form."""
    if not (1 <= j <= cfg.n and 1 <= k <= cfg.n):
        raise IndexError(f"(j, k) = ({j}, {k}) outside 1..{cfg.n}")
    n, na, nb = cfg.n, cfg.n_A, cfg.n_B
    return math.exp(
        (na - n + k) * math.log(cfg.a)
        + math.lgamma(na - n + k)
        + float(log_tricomi_u(nb - j + 1, nb + n - j - k + 2, 1.0 / cfg.b))
    )


def _support_cutoff(cfg: ChannelConfig) -> float:
    # smallest T with exp(-T/a) (T/a)^p below ~1e-40, p the largest power of l
    p = cfg.n_A + cfg.n
    t = 40.0
    while -t + p * math.log(t) > -92.0:
        t *= 1.25
    return cfg.a * t


@dataclass(frozen=True)
class EnsembleContext:
    """Immutable per-scenario cache of C_n and the h kernel."""

    cfg: ChannelConfig
    log_Cn: ScaledValue = field(init=False, compare=False)
    h: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "log_Cn", log_norm_constant(self.cfg))
        h = np.exp(_log_h(self.cfg))
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def build(cls, n, n_A, n_B, a, b) -> "EnsembleContext":
        return cls(ChannelConfig(n, n_A, n_B, a, b))

    @property
    def n(self) -> int:
        return self.cfg.n

    @cached_property
    def log_nfact_Cn(self) -> float:
        return math.lgamma(self.cfg.n + 1) + self.log_Cn.log_mag

    @cached_property
    def support_cutoff(self) -> float:
        """Eigenvalue beyond which every density here is negligible (< 1e-40 relative)."""
        return _support_cutoff(self.cfg)

    def quad_spec(self, rel_tol=1e-9, abs_tol=1e-13, max_subdivisions=400) -> QuadratureSpec:
        """Quadrature settings whose semi-infinite map is matched to the scale a."""
        return QuadratureSpec(rel_tol, abs_tol, max_subdivisions, tail_scale=2.0 * self.cfg.a)

    def log_f(self, lam):
        """log f_j(lam) for j = 1..n; output shape ``lam.shape + (n,)``."""
        cfg = self.cfg
        lam = np.asarray(lam, dtype=float)
        arg = 1.0 / cfg.b + lam / cfg.a
        return np.stack(
            [log_tricomi_u(cfg.n_B - j + 1, cfg.n_A + cfg.n_B - j + 2, arg) for j in range(1, cfg.n + 1)],
            axis=-1,
        )

    def log_weight(self, lam):
        """log of exp(-lam/a) lam^(n_A-n)."""
        lam = np.asarray(lam, dtype=float)
        p = self.cfg.n_A - self.cfg.n
        with np.errstate(divide="ignore"):
            lw = -lam / self.cfg.a + (p * np.log(lam) if p else 0.0)
        return lw


def _check_positive(lambdas):
    if np.any(~(lambdas > 0)):
        raise ValueError("eigenvalues must be strictly positive")


def _log_abs_vandermonde(lam):
    """(sign, log|prod_{j>k}(l_j - l_k)|) over the last axis."""
    n = lam.shape[-1]
    sign = np.ones(lam.shape[:-1])
    logv = np.zeros(lam.shape[:-1])
    for j in range(n):
        for k in range(j):
            d = lam[..., j] - lam[..., k]
            sign = sign * np.sign(d)
            with np.errstate(divide="ignore"):
                logv = logv + np.log(np.abs(d))
    return sign, logv


def jpdf(ctx: EnsembleContext, lambdas):
    """Joint eigenvalue density; ``lambdas`` has shape ``(..., n)``."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape[-1] != ctx.n:
        raise ValueError(f"expected {ctx.n} eigenvalues per point, got {lam.shape[-1]}")
    _check_positive(lam)
    sv, logv = _log_abs_vandermonde(lam)
    # F[..., j, k] = f_j(l_k)
    F = np.exp(np.swapaxes(ctx.log_f(lam), -1, -2))
    sf, logf = slogdet_scaled(F)
    logp = ctx.log_Cn.log_mag + logv + np.sum(ctx.log_weight(lam), axis=-1) + logf
    sign = sv * sf
    out = np.where(sign == 0, 0.0, sign * np.exp(np.where(sign == 0, 0.0, logp)))
    return float(out) if out.ndim == 0 else out


def correlation_r(ctx: EnsembleContext, r: int, lambdas):
    """r-point correlation function R_r via the bordered determinant.

    ``lambdas`` has shape ``(..., r)``. The determinant is the
    ``(n+r) x (n+r)`` block matrix ``[[0, V], [F, h]]`` with
    ``V[j, k] = l_j^(k-1)`` and ``F[j, k] = f_j(l_k)``.
    """
    n = ctx.n
    if not 1 <= r <= n:
        raise ValueError(f"r must be in 1..{n}, got {r}")
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim == 0:
        lam = lam[None]
    if lam.shape[-1] != r:
        raise ValueError(f"expected {r} eigenvalues per point, got {lam.shape[-1]}")
    _check_positive(lam)
    batch = lam.shape[:-1]
    M = np.zeros(batch + (n + r, n + r))
    M[..., :r, r:] = lam[..., :, None] ** np.arange(n)
    M[..., r:, :r] = np.exp(np.swapaxes(ctx.log_f(lam), -1, -2))
    M[..., r:, r:] = ctx.h
    sign, logdet = slogdet_scaled(M)
    logR = ctx.log_nfact_Cn + logdet + np.sum(ctx.log_weight(lam), axis=-1)
    sign = sign * (-1) ** r
    out = np.where(sign == 0, 0.0, sign * np.exp(np.where(sign == 0, 0.0, logR)))
    if r >= 2:
        # coincident arguments: structural zero
        srt = np.sort(lam, axis=-1)
        out = np.where(np.any(np.diff(srt, axis=-1) == 0, axis=-1), 0.0, out)
    return float(out) if out.ndim == 0 else out


def marginal_density(ctx: EnsembleContext, lam):
    """Single-eigenvalue marginal p_1(l) = R_1(l) / n."""
    lam = np.asarray(lam, dtype=float)
    out = correlation_r(ctx, 1, lam[..., None]) / ctx.n
    return out


def marginal_bin_average(ctx: EnsembleContext, edges, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Mean of the marginal density over each bin ``[edges[i], edges[i+1]]``.

    This is what a normalized histogram estimates; near a sharp peak it can
    differ a lot from the density at the bin center.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise ValueError("edges must be a strictly increasing 1-d array starting at >= 0")
    spec = spec or ctx.quad_spec(rel_tol=1e-10, abs_tol=1e-14)
    m = edges.size - 1
    est, _ = integrate_batch(lambda pts: marginal_density(ctx, np.maximum(pts[:, -1], 1e-300)),
                             np.zeros((m, 0)), edges[:-1], edges[1:], spec)
    return est / np.diff(edges)


def h_by_quadrature(ctx: EnsembleContext, j: int, k: int, spec: QuadratureSpec | None = None) -> float:
    """h_{j,k} from its defining integral (test oracle for :func:`h_entry`)."""
    cfg = ctx.cfg
    spec = spec or ctx.quad_spec(rel_tol=1e-11, abs_tol=1e-300)
    p = cfg.n_A - cfg.n + k - 1

    def f(x):
        with np.errstate(divide="ignore"):
            return np.exp(-x / cfg.a + p * np.log(x) + ctx.log_f(x)[..., j - 1])

    return integrate_semi_infinite(f, spec)
