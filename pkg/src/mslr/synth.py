"""Synthetic multi-scale test matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partition import MultiScalePartition, embed_block, partition_from_sizes


def hanning_window(n):
    """Symmetric Hann window ``0.5 * (1 - cos(2 pi k / (n - 1)))``; ``[1]`` for ``n == 1``."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))


@dataclass
class BlobSpec:
    """`count` rank-1 Hann blobs the size of one block of partition scale `scale` (1-based)."""

    scale: int
    count: int = 1
    amplitude: tuple[float, float] = (10.0, 10.0)
    on_grid: bool = True


def blob_matrix(partition: MultiScalePartition, specs, seed=0):
    """Sum of Hann-window blobs and the per-scale ground truth.

    On-grid blobs fill a uniformly chosen full-size block of their scale
    (distinct blocks within one spec), so each truth block has rank <= 1.
    Off-grid blobs get a uniform top-left corner anywhere they fit.
    Returns ``(Y, truth)`` with one truth matrix per partition scale.
    """
    rng = np.random.default_rng(seed)
    M, N = partition.shape
    truth = [np.zeros((M, N)) for _ in partition]
    for spec in specs:
        if not 1 <= spec.scale <= len(partition):
            raise ValueError(f"blob scale {spec.scale} not in partition")
        scale = partition[spec.scale - 1]
        if scale.is_noise:
            raise ValueError("blobs cannot live on the noise scale")
        m, n = scale.block_rows, scale.block_cols
        if m > M or n > N:
            raise ValueError(f"blob {m}x{n} larger than the {M}x{N} matrix")
        blob = np.outer(hanning_window(m), hanning_window(n))
        lo, hi = spec.amplitude
        if spec.on_grid:
            full = [b for b in partition.blocks(scale) if b.shape == (m, n)]
            if spec.count > len(full):
                raise ValueError(f"{spec.count} on-grid blobs requested, scale has {len(full)} blocks")
            for k in rng.choice(len(full), size=spec.count, replace=False):
                amp = rng.uniform(lo, hi)
                truth[spec.scale - 1] += embed_block(amp * blob, full[k], M, N)
        else:
            for _ in range(spec.count):
                r0 = int(rng.integers(M - m + 1))
                c0 = int(rng.integers(N - n + 1))
                amp = rng.uniform(lo, hi)
                truth[spec.scale - 1][r0:r0 + m, c0:c0 + n] += amp * blob
    return np.sum(truth, axis=0), truth


def blob_phantom(size=64, on_grid=True, seed=0, count=1, amplitude=10.0,
                 block_sizes=(4, 16, 64)):
    """Default demo: one blob per scale on a ``size x size`` matrix plus an empty 1x1 scale.

    Returns ``(Y, truth, partition)``.
    """
    partition = partition_from_sizes(size, size, [(1, 1)] + [(b, b) for b in block_sizes])
    specs = [BlobSpec(i + 2, count if b < size else 1, (amplitude, amplitude), on_grid)
             for i, b in enumerate(block_sizes)]
    Y, truth = blob_matrix(partition, specs, seed)
    return Y, truth, partition


def random_block_low_rank(partition: MultiScalePartition, ranks, energies, seed=0):
    """Sample the block-wise low rank model directly.

    Every block of scale ``i`` gets rank ``ranks[i]`` (capped at a ragged
    block's extent) with orthonormalised Gaussian factors and equal singular
    values chosen so that ``||X_i||_F == energies[i]``.
    Returns ``(Y, truth)``.
    """
    if len(ranks) != len(partition) or len(energies) != len(partition):
        raise ValueError("need one rank and one energy per scale")
    rng = np.random.default_rng(seed)
    M, N = partition.shape
    truth = []
    for scale, r, e in zip(partition, ranks, energies):
        if r < 0 or r > min(scale.block_rows, scale.block_cols):
            raise ValueError(f"rank {r} too large for {scale.label()} blocks")
        X = np.zeros((M, N))
        if r == 0 or e == 0:
            truth.append(X)
            continue
        blocks = partition.blocks(scale)
        rk = [min(r, b.height, b.width) for b in blocks]
        sv = e / np.sqrt(sum(rk))
        for b, k in zip(blocks, rk):
            U, _ = np.linalg.qr(rng.standard_normal((b.height, k)))
            V, _ = np.linalg.qr(rng.standard_normal((b.width, k)))
            X += embed_block(sv * U @ V.T, b, M, N)
        truth.append(X)
    return np.sum(truth, axis=0), truth


def add_gaussian_noise(X, sigma, seed=0):
    """`X` plus i.i.d. ``N(0, sigma^2)`` entries."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    X = np.asarray(X, dtype=np.float64)
    if sigma == 0:
        return X.copy()
    rng = np.random.default_rng(seed)
    return X + sigma * rng.standard_normal(X.shape)
