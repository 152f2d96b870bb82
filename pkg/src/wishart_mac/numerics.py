"""Numerical substrate: log-scaled values, scaled determinants, batched
adaptive Gauss-Kronrod quadrature (flat, semi-infinite and nested) and
bracketed root finding.

The quadrature core integrates *many* one-dimensional problems at once.
Every problem carries a prefix (the values of the outer integration
variables) so that nested integrals with dependent upper limits can be
evaluated level by level with fully vectorized integrand calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

__all__ = [
    "AccuracyError",
    "BracketError",
    "QuadratureSpec",
    "ScaledValue",
    "det_scaled",
    "find_root_monotone",
    "integrate_nested",
    "integrate_semi_infinite",
    "log_gamma",
    "slogdet_scaled",
]


class AccuracyError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class BracketError(ValueError):
    """The root-finding bracket does not contain a sign change."""


@dataclass(frozen=True)
class ScaledValue:
    """A real number stored as ``sign * exp(log_mag)``."""

    sign: int
    log_mag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if (self.sign == 0) != (self.log_mag == -math.inf):
            raise ValueError("sign == 0 exactly when log_mag == -inf")

    @classmethod
    def from_float(cls, x: float) -> "ScaledValue":
        if x == 0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def __mul__(self, other: "ScaledValue") -> "ScaledValue":
        if self.sign == 0 or other.sign == 0:
            return ScaledValue(0, -math.inf)
        return ScaledValue(self.sign * other.sign, self.log_mag + other.log_mag)

    def __truediv__(self, other: "ScaledValue") -> "ScaledValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero ScaledValue")
        if self.sign == 0:
            return self
        return ScaledValue(self.sign * other.sign, self.log_mag - other.log_mag)

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_mag)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the adaptive integrators.

    ``tail_scale`` is the length scale of the map ``x = s*t/(1-t)`` used to
    bring ``[0, inf)`` onto ``[0, 1)``; choosing it near the decay length of
    the integrand keeps the mapped integrand well resolved.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-13
    max_subdivisions: int = 400
    tail_scale: float = 1.0

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "tail_scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be a positive integer")

    def replace(self, **kw) -> "QuadratureSpec":
        fields = dict(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            max_subdivisions=self.max_subdivisions,
            tail_scale=self.tail_scale,
        )
        fields.update(kw)
        return QuadratureSpec(**fields)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


# ---------------------------------------------------------------------------
# determinants


def slogdet_scaled(m):
    """Batched (sign, log|det|) with row/column equilibration.

    ``m`` has shape ``(..., d, d)``. Each row and then each column is divided
    by its largest magnitude before LU factorization, which keeps the
    elimination well scaled when entries span many decades.
    """
    m = np.array(m, dtype=float, copy=True)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError("expected square matrices")
    if m.shape[-1] == 0:
        shape = m.shape[:-2]
        return np.ones(shape), np.zeros(shape)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    d = m.shape[-1]
    logscale = np.zeros(m.shape[:-2])
    a = np.abs(m)
    # np.max over a length-d trailing axis is slow for big batches of tiny matrices
    rmax = a[..., 0].copy()
    for i in range(1, d):
        rmax = np.maximum(rmax, a[..., i])
    rmax[rmax == 0] = 1.0
    m /= rmax[..., None]
    a /= rmax[..., None]
    cmax = a[..., 0, :].copy()
    for i in range(1, d):
        cmax = np.maximum(cmax, a[..., i, :])
    cmax[cmax == 0] = 1.0
    m /= cmax[..., None, :]
    logscale += np.log(rmax).sum(axis=-1) + np.log(cmax).sum(axis=-1)
    sign, logdet = np.linalg.slogdet(m)
    logdet = np.where(sign == 0, -np.inf, logdet + logscale)
    return sign, logdet


def det_scaled(m) -> ScaledValue:
    """Determinant of a single square matrix as a :class:`ScaledValue`."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("det_scaled expects a single 2-d matrix")
    sign, logdet = slogdet_scaled(m)
    sign = int(sign)
    return ScaledValue(sign, float(logdet) if sign else -math.inf)


# ---------------------------------------------------------------------------
# Gauss-Kronrod 7/15 rule (QUADPACK abscissae and weights)

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
W_KRONROD = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
W_GAUSS = np.zeros(15)
W_GAUSS[[1, 3, 5, 7, 9, 11, 13]] = [_WG[0], _WG[1], _WG[2], _WG[3], _WG[2], _WG[1], _WG[0]]

_EPS = np.finfo(float).eps
_CHUNK = 250_000


def _eval_chunked(g, pts):
    if pts.shape[0] <= _CHUNK:
        return np.asarray(g(pts), dtype=float)
    out = np.empty(pts.shape[0])
    for i in range(0, pts.shape[0], _CHUNK):
        out[i:i + _CHUNK] = g(pts[i:i + _CHUNK])
    return out


def _gk_panels(g, prefix, owner, ta, tb, lo, mapped, scale):
    """Apply the 15-point rule to panels ``[ta, tb]`` of problems ``owner``."""
    c = 0.5 * (ta + tb)
    h = 0.5 * (tb - ta)
    t = c[:, None] + h[:, None] * NODES
    mp = mapped[owner][:, None]
    s = scale
    # x = lo + s*t/(1-t) on mapped problems; identity otherwise
    one_minus = np.where(mp, 1.0 - t, 1.0)
    x = np.where(mp, lo[owner][:, None] + s * t / one_minus, t)
    jac = np.where(mp, s / one_minus**2, 1.0)
    npan = len(ta)
    d = prefix.shape[1]
    pts = np.empty((npan * 15, d + 1))
    if d:
        pts[:, :d] = np.repeat(prefix[owner], 15, axis=0)
    pts[:, d] = x.ravel()
    fv = _eval_chunked(g, pts).reshape(npan, 15) * jac
    fv = np.where(np.isfinite(fv), fv, np.nan)
    if np.isnan(fv).any():
        raise AccuracyError("integrand returned non-finite values")
    resk = fv @ W_KRONROD
    resg = fv @ W_GAUSS
    resabs = np.abs(fv) @ W_KRONROD
    mean = 0.5 * resk
    resasc = np.abs(fv - mean[:, None]) @ W_KRONROD
    est = resk * h
    err = np.abs((resk - resg) * h)
    resasc = resasc * np.abs(h)
    resabs = resabs * np.abs(h)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    err = np.where(resabs > 1e-290, np.maximum(50 * _EPS * resabs, err), err)
    return est, err, resabs


def integrate_batch(g, prefix, lo, hi, spec: QuadratureSpec, init_panels: int = 1):
    """Integrate many 1-d problems ``int_lo^hi g`` at once.

    ``g`` receives an ``(p, d+1)`` array whose first ``d`` columns are the
    problem's ``prefix`` row and whose last column is the integration
    variable; it returns ``p`` values. ``hi`` may be ``inf``. Problems with
    ``hi <= lo`` integrate over an empty set and contribute 0.

    Returns ``(estimate, error)`` arrays of length ``len(lo)``.
    """
    prefix = np.asarray(prefix, dtype=float)
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    m = len(lo)
    if prefix.ndim == 1:
        prefix = prefix.reshape(m, -1)
    mapped = np.isinf(hi) & (hi > 0)
    active = (hi > lo) | mapped
    est_tot = np.zeros(m)
    err_tot = np.zeros(m)
    if not active.any():
        return est_tot, err_tot

    idx = np.flatnonzero(active)
    # panels live in t-space: [0, 1] for mapped problems, [lo, hi] otherwise
    ta0 = np.where(mapped[idx], 0.0, lo[idx])
    tb0 = np.where(mapped[idx], 1.0, hi[idx])
    k = max(1, init_panels)
    frac = np.linspace(0.0, 1.0, k + 1)
    owner = np.repeat(idx, k)
    ta = (ta0[:, None] + (tb0 - ta0)[:, None] * frac[:-1]).ravel()
    tb = (ta0[:, None] + (tb0 - ta0)[:, None] * frac[1:]).ravel()
    est, err, mag = _gk_panels(g, prefix, owner, ta, tb, lo, mapped, spec.tail_scale)

    npanels = np.bincount(owner, minlength=m)
    failed = np.zeros(m, dtype=bool)
    while True:
        est_tot = np.bincount(owner, weights=est, minlength=m)
        err_tot = np.bincount(owner, weights=err, minlength=m)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(est_tot))
        bad = (err_tot > tol) & ~failed
        if not bad.any():
            break
        share = tol[owner] / npanels[owner]
        width = np.abs(tb - ta)
        tiny = width <= 64 * _EPS * np.maximum(np.abs(ta), np.abs(tb))
        split = bad[owner] & (err > share) & ~tiny
        # always split the worst panel of every unconverged problem
        worst = np.full(m, -1.0)
        np.maximum.at(worst, owner, np.where(tiny, -1.0, err))
        split |= bad[owner] & (err == worst[owner]) & (worst[owner] >= 0)
        stuck = bad & (np.bincount(owner, weights=split, minlength=m) == 0)
        failed |= stuck
        too_many = bad & (npanels >= spec.max_subdivisions)
        failed |= too_many
        split &= ~failed[owner]
        if not split.any():
            continue
        keep = ~split
        sa, sb, so = ta[split], tb[split], owner[split]
        mid = 0.5 * (sa + sb)
        na = np.concatenate([sa, mid])
        nb = np.concatenate([mid, sb])
        no = np.concatenate([so, so])
        ne, nr, nm = _gk_panels(g, prefix, no, na, nb, lo, mapped, spec.tail_scale)
        ta = np.concatenate([ta[keep], na])
        tb = np.concatenate([tb[keep], nb])
        owner = np.concatenate([owner[keep], no])
        est = np.concatenate([est[keep], ne])
        err = np.concatenate([err[keep], nr])
        mag = np.concatenate([mag[keep], nm])
        npanels = np.bincount(owner, minlength=m)

    # accept problems whose remaining error is at the rounding floor of a
    # cancelling integrand: more panels cannot improve them
    mag_tot = np.bincount(owner, weights=mag, minlength=m)
    failed &= err_tot > 1e3 * _EPS * mag_tot
    if failed.any():
        i = int(np.flatnonzero(failed)[np.argmax(err_tot[failed])])
        raise AccuracyError(
            f"adaptive quadrature failed to converge: estimate {est_tot[i]:.6g}, "
            f"error bound {err_tot[i]:.3g}",
            estimate=float(est_tot[i]),
            error=float(err_tot[i]),
        )
    return est_tot, err_tot


def integrate_semi_infinite(f: Callable, spec: QuadratureSpec | None = None) -> float:
    """Integrate ``f`` over ``[0, inf)``.

    ``f`` must accept a numpy array. Integrable power singularities at 0 are
    handled by adaptive bisection toward the endpoint (the Kronrod nodes
    never touch it).
    """
    spec = spec or QuadratureSpec()
    g = lambda pts: f(pts[:, 0])
    est, _ = integrate_batch(g, np.zeros((1, 0)), [0.0], [np.inf], spec, init_panels=4)
    return float(est[0])


def _nested(f, limits, prefix, spec, level, init_panels):
    k = len(limits)
    hi = np.asarray(limits[level](prefix), dtype=float).reshape(-1)
    if hi.shape[0] == 1 and prefix.shape[0] != 1:
        hi = np.full(prefix.shape[0], hi[0])
    lo = np.zeros_like(hi)
    if level == k - 1:
        g = f
    else:
        g = lambda pts: _nested(f, limits, pts, spec, level + 1, init_panels)
    est, _ = integrate_batch(g, prefix, lo, hi, spec, init_panels=init_panels)
    return est


def integrate_nested(
    f: Callable,
    limits: Sequence[Callable],
    spec: QuadratureSpec | None = None,
    prefix=None,
    init_panels: int = 1,
):
    """Iterated integral over ``0 <= x_i <= limits[i](x_0..x_{i-1})``.

    ``f`` receives an array of points of shape ``(p, d + k)`` (``d`` prefix
    columns followed by ``x_0..x_{k-1}``) and returns ``p`` values.
    ``limits[i]`` receives the ``(p, d + i)`` array of outer coordinates and
    returns the ``p`` upper limits; ``inf`` is allowed. Negative upper
    limits give empty slices that contribute 0.

    With ``prefix=None`` a scalar is returned; otherwise ``prefix`` is a
    ``(m, d)`` array of fixed leading coordinates and an array of ``m``
    integrals is returned, all computed in one vectorized sweep.
    """
    spec = spec or QuadratureSpec()
    if len(limits) < 1:
        raise ValueError("need at least one integration level")
    scalar = prefix is None
    pre = np.zeros((1, 0)) if scalar else np.atleast_2d(np.asarray(prefix, dtype=float))
    out = _nested(f, list(limits), pre, spec, 0, init_panels)
    return float(out[0]) if scalar else out


def find_root_monotone(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    """Root of a monotone function bracketed by ``[lo, hi]`` (Brent's method)."""
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return float(lo)
    if ghi == 0:
        return float(hi)
    if np.sign(glo) == np.sign(ghi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: g(lo)={glo:.6g}, g(hi)={ghi:.6g}")
    x = optimize.brentq(g, lo, hi, xtol=tol, rtol=4 * _EPS, maxiter=200)
    return float(min(max(x, lo), hi))
