"""Confluent hypergeometric function of the second kind, U(alpha, gamma; x),
for positive integer alpha and integer gamma with gamma - alpha - 1 >= 0.

In that family the Euler integral collapses to a finite sum of positive
terms::

    U(alpha, gamma; x) = 1/Gamma(alpha) * sum_{m=0}^{N} C(N, m) Gamma(alpha+m) x^-(alpha+m)

with ``N = gamma - alpha - 1``. All U values needed by the quotient
ensemble fall in this family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import ScaledValue

__all__ = ["TricomiParams", "log_tricomi_u", "tricomi_u", "tricomi_u_log"]


@dataclass(frozen=True)
class TricomiParams:
    alpha: int
    gamma: int
    x: float

    def __post_init__(self):
        _check_params(self.alpha, self.gamma)
        if not (self.x > 0 and math.isfinite(self.x)):
            raise ValueError(f"U(alpha, gamma; x) needs finite x > 0, got {self.x}")


def _check_params(alpha, gamma):
    if int(alpha) != alpha or int(gamma) != gamma:
        raise ValueError("only integer parameters are supported")
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if gamma - alpha - 1 < 0:
        raise ValueError(f"gamma - alpha - 1 must be >= 0, got alpha={alpha}, gamma={gamma}")


_COEF_CACHE: dict = {}


def _log_coefs(alpha: int, gamma: int) -> np.ndarray:
    key = (alpha, gamma)
    c = _COEF_CACHE.get(key)
    if c is None:
        nterm = gamma - alpha - 1
        c = np.array([
            math.lgamma(nterm + 1) - math.lgamma(m + 1) - math.lgamma(nterm - m + 1)
            + math.lgamma(alpha + m) - math.lgamma(alpha)
            for m in range(nterm + 1)
        ])
        _COEF_CACHE[key] = c
    return c


def log_tricomi_u(alpha: int, gamma: int, x):
    """Natural log of U(alpha, gamma; x), vectorized over ``x``.

    When no term can overflow, the polynomial in 1/x is evaluated by Horner's
    rule (all coefficients positive, so it is backward stable). Otherwise
    the terms are accumulated in log space in ascending ``m`` with Kahan
    compensation after factoring out the largest one.
    """
    _check_params(alpha, gamma)
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("U(alpha, gamma; x) needs x > 0")
    coefs = _log_coefs(int(alpha), int(gamma))
    logx = np.log(x)
    top = alpha + len(coefs) - 1
    if x.size and np.min(logx) > -600.0 / top and np.max(logx) < 600.0 / top:
        lin = np.exp(coefs)
        z = 1.0 / x
        acc = np.full_like(x, lin[-1])
        for c in lin[-2::-1]:
            acc = acc * z + c
        return np.log(acc) - alpha * logx
    # log of term m: coefs[m] - (alpha + m) * log x
    peak = coefs[0] - alpha * logx
    for mm in range(1, len(coefs)):
        peak = np.maximum(peak, coefs[mm] - (alpha + mm) * logx)
    total = np.zeros_like(x)
    comp = np.zeros_like(x)
    for mm in range(len(coefs)):
        term = np.exp(coefs[mm] - (alpha + mm) * logx - peak)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return peak + np.log(total)


def tricomi_u(alpha: int, gamma: int, x):
    """U(alpha, gamma; x); returns a float for scalar ``x``."""
    out = np.exp(log_tricomi_u(alpha, gamma, x))
    return float(out) if np.ndim(out) == 0 else out


def tricomi_u_log(p: TricomiParams) -> ScaledValue:
    """U as a :class:`ScaledValue` (always positive)."""
    return ScaledValue(1, float(log_tricomi_u(p.alpha, p.gamma, p.x)))
