"""Regularization weights for each scale.

The recommended weight is the Gaussian complexity of the scale norm, i.e.
the expected dual norm of an i.i.d. standard Gaussian matrix, approximated
in closed form by ``sqrt(m) + sqrt(n) + sqrt(ln(MN / max(m, n)))``.
"""

from __future__ import annotations

import math

import numpy as np

from .partition import MultiScalePartition, Scale
from .spectral import scale_dual_norm


def lambda_for_scale(m, n, M, N):
    """Closed-form weight for ``m x n`` blocks of an ``M x N`` matrix (natural log)."""
    if m < 1 or n < 1 or M < 1 or N < 1:
        raise ValueError("dimensions must be positive")
    if m * n > M * N:
        raise ValueError(f"block {m}x{n} larger than the {M}x{N} matrix")
    return math.sqrt(m) + math.sqrt(n) + math.sqrt(math.log(M * N / max(m, n)))


def recommended_lambdas(partition: MultiScalePartition):
    """One weight per scale, using the nominal block size (ragged blocks ignored)."""
    M, N = partition.shape
    return [lambda_for_scale(s.block_rows, s.block_cols, M, N) for s in partition]


def gaussian_complexity_estimate(scale: Scale, partition: MultiScalePartition,
                                 trials=2000, seed=0):
    """Monte Carlo mean of the scale dual norm over standard Gaussian matrices."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(trials):
        G = rng.standard_normal(partition.shape)
        total += scale_dual_norm(G, scale, partition)
    return total / trials


def lambda_table(partition: MultiScalePartition):
    M, N = partition.shape
    return [
        {"scale": s.index, "block": s.label(), "kind": s.kind,
         "blocks": partition.num_blocks(s),
         "lambda": lambda_for_scale(s.block_rows, s.block_cols, M, N)}
        for s in partition
    ]
