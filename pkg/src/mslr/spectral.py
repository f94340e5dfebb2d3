"""SVD-backed operators on blocks of a partition scale.

Blocks of equal extent are stacked and handled with batched numpy linear
algebra. Vector-shaped blocks (``1 x n``, ``m x 1`` and the noise scale)
have a single singular value equal to their Euclidean norm, so they are
shrunk in closed form without calling the SVD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partition import MultiScalePartition, Scale


class SpectralError(ArithmeticError):
    """An SVD failed to converge."""


@dataclass
class SvdFactors:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.S) @ self.V.T


def svd(X):
    """Reduced SVD ``X = U diag(S) V^T`` with ``r = min(m, n)``."""
    X = np.asarray(X, dtype=np.float64)
    try:
        U, S, Vt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"SVD of {X.shape} matrix did not converge") from exc
    return SvdFactors(U, S, Vt.T)


def svt(X, t):
    """Singular value soft-thresholding ``U max(S - t, 0) V^T``."""
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    f = svd(X)
    return (f.U * np.maximum(f.S - t, 0.0)) @ f.V.T


def sigma_max_upper_bound(X):
    """Cheap upper bound on the largest singular value.

    Square root of the maximum absolute row sum of the Gram matrix ``X X^T``.
    Tight for rank-1 matrices whose rows have equal norm.
    """
    X = np.asarray(X, dtype=np.float64)
    G = X @ X.T
    return float(np.sqrt(np.abs(G).sum(axis=1).max()))


def _gram_bounds(B):
    """Batched version of the bound over a ``(k, h, w)`` stack.

    Uses the smaller of the two Gram matrices; either one bounds sigma_max^2.
    """
    if B.shape[1] <= B.shape[2]:
        G = B @ B.transpose(0, 2, 1)
    else:
        G = B.transpose(0, 2, 1) @ B
    return np.sqrt(np.abs(G).sum(axis=2).max(axis=1))


def _stacks(X, scale, partition):
    """Yield ``(rows, cols, h, w, br, bc, stack)`` for each equal-extent region."""
    for rs, cs, h, w in partition.regions(scale):
        sub = X[rs, cs]
        br, bc = sub.shape[0] // h, sub.shape[1] // w
        stack = sub.reshape(br, h, bc, w).transpose(0, 2, 1, 3).reshape(br * bc, h, w)
        yield rs, cs, h, w, br, bc, stack


def _unstack(stack, br, bc, h, w):
    return stack.reshape(br, bc, h, w).transpose(0, 2, 1, 3).reshape(br * h, bc * w)


def _batched_svd(B, scale):
    try:
        return np.linalg.svd(B, full_matrices=False)
    except np.linalg.LinAlgError:
        # locate the offending block for the error message
        for k, blk in enumerate(B):
            try:
                np.linalg.svd(blk, full_matrices=False)
            except np.linalg.LinAlgError as exc:
                raise SpectralError(
                    f"SVD failed at scale {scale.index} ({scale.label()}), block {k}"
                ) from exc
        raise


def _check_scale(scale, partition):
    if scale not in partition.scales:
        raise ValueError(f"scale {scale} does not belong to the partition")


def shrink_blocks(X, scale: Scale, partition: MultiScalePartition, t, stats=None):
    """BlockSVT plus the nuclear norm of its output.

    Returns ``(Z, nuc)`` where ``nuc`` is ``scale_norm(Z)``, available for
    free from the thresholded singular values. When `stats` is a dict,
    ``stats[scale.index]`` accumulates ``[svd_blocks, skipped_blocks]``.
    """
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    X = np.asarray(X, dtype=np.float64)
    if X.shape != partition.shape:
        raise ValueError(f"matrix shape {X.shape} does not match partition {partition.shape}")
    _check_scale(scale, partition)

    if scale.is_noise:
        nrm = np.linalg.norm(X)
        if nrm <= t:
            return np.zeros_like(X), 0.0
        return X * (1.0 - t / nrm), nrm - t

    Z = np.empty_like(X)
    nuc = 0.0
    total = skipped = 0
    for rs, cs, h, w, br, bc, B in _stacks(X, scale, partition):
        if min(h, w) == 1:
            nrm = np.sqrt((B * B).sum(axis=(1, 2)))
            keep = np.maximum(nrm - t, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(nrm > t, keep / nrm, 0.0)
            out = B * factor[:, None, None]
            nuc += keep.sum()
        else:
            out = np.zeros_like(B)
            active = np.nonzero(_gram_bounds(B) > t)[0]
            total += len(B)
            skipped += len(B) - len(active)
            if len(active):
                U, S, Vt = _batched_svd(B[active], scale)
                S = np.maximum(S - t, 0.0)
                out[active] = (U * S[:, None, :]) @ Vt
                nuc += S.sum()
        Z[rs, cs] = _unstack(out, br, bc, h, w)
    if stats is not None and total:
        acc = stats.setdefault(scale.index, [0, 0])
        acc[0] += total
        acc[1] += skipped
    return Z, float(nuc)


def block_svt(X, scale: Scale, partition: MultiScalePartition, t, stats=None):
    """Apply :func:`svt` with threshold `t` to every block of `scale` independently."""
    return shrink_blocks(X, scale, partition, t, stats)[0]


def block_singular_values(X, scale: Scale, partition: MultiScalePartition):
    """Singular values of every block, as a list of 1-D arrays (block order not guaranteed)."""
    X = np.asarray(X, dtype=np.float64)
    if scale.is_noise:
        return [np.array([np.linalg.norm(X)])]
    out = []
    for *_, B in _stacks(X, scale, partition):
        if min(B.shape[1:]) == 1:
            out.extend(np.sqrt((B * B).sum(axis=(1, 2)))[:, None])
        else:
            out.extend(np.linalg.svd(B, compute_uv=False))
    return out


def scale_norm(X, scale: Scale, partition: MultiScalePartition):
    """Block-wise nuclear norm: sum over blocks of the block nuclear norm."""
    return float(sum(s.sum() for s in block_singular_values(X, scale, partition)))


def scale_dual_norm(X, scale: Scale, partition: MultiScalePartition):
    """Largest block-wise maximum singular value.

    The block with the largest Gram-matrix bound is evaluated first; only
    blocks whose bound exceeds that value need an exact SVD.
    """
    X = np.asarray(X, dtype=np.float64)
    if scale.is_noise:
        return float(np.linalg.norm(X))
    best = 0.0
    for *_, B in _stacks(X, scale, partition):
        if min(B.shape[1:]) == 1:
            best = max(best, float(np.sqrt((B * B).sum(axis=(1, 2))).max()))
            continue
        bounds = _gram_bounds(B)
        top = int(np.argmax(bounds))
        if bounds[top] <= best:
            continue
        best = max(best, float(np.linalg.svd(B[top], compute_uv=False)[0]))
        rest = np.nonzero(bounds > best)[0]
        if len(rest):
            best = max(best, float(np.linalg.svd(B[rest], compute_uv=False)[:, 0].max()))
    return best


def rank_histogram(X, scale: Scale, partition: MultiScalePartition, rtol=1e-12):
    """Map block rank -> number of blocks, ranks cut at ``rtol * sigma_max`` per block."""
    hist: dict[int, int] = {}
    for s in block_singular_values(X, scale, partition):
        r = int((s > rtol * s[0]).sum()) if s.size and s[0] > 0 else 0
        hist[r] = hist.get(r, 0) + 1
    return dict(sorted(hist.items()))


def dual_norm_subgradient(X, scale: Scale, partition: MultiScalePartition):
    """Scale dual norm of `X` and one subgradient ``R_b^T(u v^T)`` at the maximising block."""
    X = np.asarray(X, dtype=np.float64)
    G = np.zeros_like(X)
    if scale.is_noise:
        nrm = float(np.linalg.norm(X))
        if nrm > 0:
            G = X / nrm
        return nrm, G
    best, where = -1.0, None
    for rs, cs, h, w, br, bc, B in _stacks(X, scale, partition):
        U, S, Vt = np.linalg.svd(B, full_matrices=False)
        k = int(np.argmax(S[:, 0]))
        if S[k, 0] > best:
            r0 = rs.start + (k // bc) * h
            c0 = cs.start + (k % bc) * w
            best, where = float(S[k, 0]), (r0, c0, np.outer(U[k][:, 0], Vt[k][0]))
    r0, c0, uv = where
    if best > 0:
        G[r0:r0 + uv.shape[0], c0:c0 + uv.shape[1]] = uv
    return best, G
