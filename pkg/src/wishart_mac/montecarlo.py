"""Monte Carlo sampling of the quotient ensemble from its matrix definition.

Entries of H_A and H_B are circularly symmetric complex Gaussians with unit
total variance (real and imaginary parts each of variance 1/2). Eigenvalues
of ``W = (I + b H_B H_B^+)^-1 (a H_A H_A^+)`` are obtained from the similar
Hermitian matrix ``a L^-1 H_A H_A^+ L^-+`` where ``L L^+ = I + b H_B H_B^+``.

Random streams: samples are drawn in blocks of ``BLOCK`` draws and block
``i`` uses its own Philox generator spawned from ``SeedSequence(seed)``,
so the stream for a given sample index never depends on how many samples
were requested or on the order in which blocks are generated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .ensemble import ChannelConfig

__all__ = [
    "McEnsemble",
    "draw_channels",
    "empirical_cdf",
    "empirical_density",
    "empirical_mi",
    "extreme_stats",
    "quotient_eigenvalues",
    "sample_eigenvalues",
    "sup_distance",
]

log = logging.getLogger(__name__)

BLOCK = 65536
_MAX_RETRIES = 8


@dataclass(frozen=True)
class McEnsemble:
    """Sampled eigenvalue vectors, one ascending row per draw."""

    cfg: ChannelConfig
    seed: int
    samples: np.ndarray
    count: int
    resampled: int = 0

    def __post_init__(self):
        s = self.samples
        if s.ndim != 2 or s.shape != (self.count, self.cfg.n):
            raise ValueError(f"samples must have shape ({self.count}, {self.cfg.n}), got {s.shape}")
        if np.any(s < 0):
            raise ValueError("eigenvalues must be >= 0")
        if self.cfg.n > 1 and np.any(np.diff(s, axis=1) < 0):
            raise ValueError("eigenvalue vectors must be sorted ascending")


def draw_channels(cfg: ChannelConfig, gen: np.random.Generator, count: int):
    """``count`` independent pairs (H_A, H_B) of shapes (n, n_A) and (n, n_B).

    Normals are consumed sample by sample, so the first k draws are the same
    whatever ``count`` is.
    """
    n, na, nb = cfg.n, cfg.n_A, cfg.n_B
    z = gen.standard_normal((count, n * (na + nb), 2))
    z = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
    ha = z[:, :n * na].reshape(count, n, na)
    hb = z[:, n * na:].reshape(count, n, nb)
    return ha, hb


def quotient_eigenvalues(cfg: ChannelConfig, ha, hb):
    """Ascending eigenvalues of W for stacked channel draws."""
    n = cfg.n
    m = np.eye(n) + cfg.b * (hb @ np.conj(np.swapaxes(hb, -1, -2)))
    chol = np.linalg.cholesky(m)
    x = np.linalg.solve(chol, ha)  # L^-1 H_A
    herm = cfg.a * (x @ np.conj(np.swapaxes(x, -1, -2)))
    return np.linalg.eigvalsh(herm)


def _block_generators(seed: int, nblocks: int):
    children = np.random.SeedSequence(seed).spawn(nblocks)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def sample_eigenvalues(cfg: ChannelConfig, seed: int, count: int) -> McEnsemble:
    """Draw ``count`` eigenvalue vectors of W, reproducibly for a given seed."""
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    count = int(count)
    nblocks = -(-count // BLOCK)
    out = np.empty((count, cfg.n))
    resampled = 0
    for i, gen in enumerate(_block_generators(int(seed), nblocks)):
        size = min(BLOCK, count - i * BLOCK)
        for attempt in range(_MAX_RETRIES):
            ha, hb = draw_channels(cfg, gen, size)
            try:
                lam = quotient_eigenvalues(cfg, ha, hb)
            except np.linalg.LinAlgError as exc:
                # redraw the whole block from the same substream, so the
                # result is still a deterministic function of the seed
                resampled += size
                log.warning("eigensolver failed on block %d (attempt %d): %s", i, attempt, exc)
                continue
            if np.all(np.isfinite(lam)) and lam.min() >= -1e-10 * max(1.0, lam.max()):
                break
            resampled += size
            log.warning("non-finite or negative eigenvalues in block %d, redrawing", i)
        else:
            raise RuntimeError(f"block {i} failed {_MAX_RETRIES} times")
        out[i * BLOCK:i * BLOCK + size] = np.maximum(lam, 0.0)
    return McEnsemble(cfg, int(seed), out, count, resampled)


def empirical_mi(ens: McEnsemble) -> np.ndarray:
    """I_A = sum_j log2(1 + l_j) per draw."""
    return np.sum(np.log1p(ens.samples), axis=1) / np.log(2.0)


def empirical_cdf(values, grid, strict: bool = False) -> np.ndarray:
    """Empirical CDF of ``values`` on ``grid``.

    The default is the right-continuous P(X <= x); ``strict=True`` gives
    P(X < x), the convention of an outage probability.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("empirical_cdf needs at least one value")
    grid = np.asarray(grid, dtype=float)
    side = "left" if strict else "right"
    return np.searchsorted(v, grid, side=side) / v.size


def extreme_stats(ens: McEnsemble):
    """(smallest eigenvalue per draw, largest eigenvalue per draw)."""
    return ens.samples[:, 0].copy(), ens.samples[:, -1].copy()


def empirical_density(values, bins: int = 100, range=None):
    """Histogram density; returns (bin centers, density, bin edges)."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empirical_density needs at least one value")
    dens, edges = np.histogram(v, bins=bins, range=range, density=True)
    return 0.5 * (edges[1:] + edges[:-1]), dens, edges


def sup_distance(a, b) -> float:
    """max |a - b| over a shared grid."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("curves must share a grid")
    return float(np.max(np.abs(a - b))) if a.size else 0.0
