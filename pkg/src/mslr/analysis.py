"""Numerical checks of the recovery theory on small instances.

Tangent-space projections for block-wise low rank components, coherence
estimates between scales, the balance conditions on the weights, and the
dual certificate conditions for optimality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partition import BlockIndex, MultiScalePartition, Scale, embed_block, extract_block
from .spectral import dual_norm_subgradient, scale_dual_norm

RANK_RTOL = 1e-12


@dataclass
class BlockSubspaces:
    """Block-wise column/row factors ``(U_b, V_b)`` of one component at one scale.

    Blocks whose component is zero carry empty ``(m, 0)`` / ``(n, 0)`` factors.
    """

    scale: Scale
    partition: MultiScalePartition
    factors: list  # (BlockIndex, U, V)

    @property
    def E(self):
        """Sum over blocks of ``R_b^T(U_b V_b^T)``."""
        M, N = self.partition.shape
        out = np.zeros((M, N))
        for b, U, V in self.factors:
            if U.shape[1]:
                out += embed_block(U @ V.T, b, M, N)
        return out

    @property
    def dimension(self):
        """Dimension of the tangent space ``T``."""
        d = 0
        for b, U, V in self.factors:
            r = U.shape[1]
            d += r * (b.height + b.width) - r * r
        return d

    @classmethod
    def full(cls, scale, partition):
        """Factors spanning every block completely, so ``T`` is the whole space."""
        factors = []
        for b in partition.blocks(scale):
            r = min(b.height, b.width)
            factors.append((b, np.eye(b.height)[:, :r], np.eye(b.width)[:, :r]))
        return cls(scale, partition, factors)

    @classmethod
    def empty(cls, scale, partition):
        factors = [(b, np.zeros((b.height, 0)), np.zeros((b.width, 0)))
                   for b in partition.blocks(scale)]
        return cls(scale, partition, factors)


def _block_factors(B, rtol=RANK_RTOL):
    U, S, Vt = np.linalg.svd(B, full_matrices=False)
    r = int((S > rtol * S[0]).sum()) if S.size and S[0] > 0 else 0
    return U[:, :r], Vt[:r].T


def subspaces_from_components(components, partition: MultiScalePartition, rtol=RANK_RTOL):
    """Per-scale block factors of each component, rank cut at ``rtol * sigma_max``."""
    if len(components) != len(partition):
        raise ValueError("need one component per scale")
    out = []
    for X, scale in zip(components, partition):
        factors = []
        for b in partition.blocks(scale):
            U, V = _block_factors(extract_block(X, b), rtol)
            factors.append((b, U, V))
        out.append(BlockSubspaces(scale, partition, factors))
    return out


def _project(X, sub: BlockSubspaces, perp):
    X = np.asarray(X, dtype=np.float64)
    M, N = sub.partition.shape
    if X.shape != (M, N):
        raise ValueError(f"shape {X.shape} does not match partition {(M, N)}")
    out = np.zeros_like(X)
    for b, U, V in sub.factors:
        B = extract_block(X, b)
        # P_perp(B) = (I - UU^T) B (I - VV^T);  P_T(B) = B - P_perp(B)
        left = B - U @ (U.T @ B)
        Bp = left - (left @ V) @ V.T
        P = Bp if perp else B - Bp
        if b.noise:
            out += P.reshape(M, N)
        else:
            out[b.row_start:b.row_start + b.height, b.col_start:b.col_start + b.width] = P
    return out


def project_T(X, sub: BlockSubspaces):
    """Orthogonal projection onto the tangent space of the component."""
    return _project(X, sub, perp=False)


def project_T_perp(X, sub: BlockSubspaces):
    """Orthogonal projection onto the complement of the tangent space."""
    return _project(X, sub, perp=True)


def tangent_basis(sub: BlockSubspaces, rtol=1e-10):
    """Orthonormal basis of ``T`` as columns of an ``(M*N, dim)`` array (small problems only)."""
    M, N = sub.partition.shape
    images = np.empty((M * N, M * N))
    for k in range(M * N):
        e = np.zeros(M * N)
        e[k] = 1.0
        images[:, k] = project_T(e.reshape(M, N), sub).ravel()
    U, S, _ = np.linalg.svd(images)
    r = int((S > rtol * max(S[0], 1.0)).sum()) if S.size else 0
    return U[:, :r]


def tangent_spaces_independent(subspaces, rtol=1e-9):
    """Whether ``T_i`` meets the sum of the other tangent spaces only at zero, for every i."""
    bases = [tangent_basis(s) for s in subspaces]

    def rank(A):
        if A.shape[1] == 0:
            return 0
        S = np.linalg.svd(A, compute_uv=False)
        return int((S > rtol * S[0]).sum()) if S[0] > 0 else 0

    result = []
    for i, Bi in enumerate(bases):
        others = [B for j, B in enumerate(bases) if j != i]
        Bo = np.hstack(others) if others else np.zeros((Bi.shape[0], 0))
        result.append(rank(np.hstack([Bi, Bo])) == Bi.shape[1] + rank(Bo))
    return result


def coherence_estimate(sub_j: BlockSubspaces, scale_i: Scale, partition: MultiScalePartition,
                       restarts=20, iters=200, seed=0):
    """Lower bound on the coherence of ``T_j`` with respect to scale ``i``.

    Maximises ``||N||_(i)^* / ||N||_(j)^*`` over ``N`` in ``T_j`` by projected
    ascent from random starts. The problem is nonconvex, so the returned
    best value is only guaranteed to be a lower bound.
    """
    scale_j = sub_j.scale
    if scale_i == scale_j:
        raise ValueError("coherence is defined between distinct scales")
    rng = np.random.default_rng(seed)

    def ratio(N):
        dj, gj = dual_norm_subgradient(N, scale_j, partition)
        di, gi = dual_norm_subgradient(N, scale_i, partition)
        if dj <= 0:
            return 0.0, np.zeros_like(N)
        return di / dj, (gi - (di / dj) * gj) / dj

    best = 0.0
    for _ in range(restarts):
        N = project_T(rng.standard_normal(partition.shape), sub_j)
        nrm = np.linalg.norm(N)
        if nrm < 1e-12:
            return 0.0
        N /= nrm
        f, g = ratio(N)
        step = 0.5
        for _ in range(iters):
            d = project_T(g, sub_j)
            dn = np.linalg.norm(d)
            if dn < 1e-14:
                break
            while step > 1e-10:
                cand = N + step * d / dn
                cand /= np.linalg.norm(cand)
                fc, gc = ratio(cand)
                if fc > f:
                    N, f, g = cand, fc, gc
                    step = min(2 * step, 1.0)
                    break
                step /= 2
            else:
                break
        best = max(best, f)
    return best


def coherence_table(subspaces, partition: MultiScalePartition, restarts=20, iters=200, seed=0):
    """``mu[i, j]`` estimates for all ordered pairs of distinct scales (diagonal zero)."""
    L = len(partition)
    mu = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            if i != j:
                mu[i, j] = coherence_estimate(subspaces[j], partition[i], partition,
                                              restarts, iters, seed + L * i + j)
    return mu


@dataclass
class BalanceReport:
    sums: list
    margins: list
    pass_independence: bool
    pass_recovery: bool


def check_balance(mu, lambdas):
    """Evaluate ``sum_{j != i} mu_ij lambda_j / lambda_i`` against 1 and 1/2."""
    mu = np.asarray(mu, dtype=np.float64)
    lam = np.asarray(lambdas, dtype=np.float64)
    L = len(lam)
    if mu.shape != (L, L):
        raise ValueError(f"coherence table shape {mu.shape} does not match {L} weights")
    off = mu * (1.0 - np.eye(L))
    sums = (off @ lam) / lam
    return BalanceReport(sums=sums.tolist(), margins=(1.0 - sums).tolist(),
                         pass_independence=bool(np.all(sums < 1.0)),
                         pass_recovery=bool(np.all(sums < 0.5)))


def balancing_lambdas(mu, bound=0.5):
    """Positive weights with ``sum_{j != i} mu_ij lambda_j < bound * lambda_i`` for all i, or None.

    For a nonnegative matrix such weights exist exactly when its spectral
    radius is below `bound`; ``(bound I - mu)^{-1} 1`` is then a witness.
    """
    mu = np.asarray(mu, dtype=np.float64)
    off = mu * (1.0 - np.eye(len(mu)))
    if np.max(np.abs(np.linalg.eigvals(off))) >= bound:
        return None
    lam = np.linalg.solve(bound * np.eye(len(mu)) - off, np.ones(len(mu)))
    return (lam / lam.max()).tolist()


@dataclass
class CertificateReport:
    tangent_residual: list
    complement_ratio: list
    pass_tangent: list
    pass_complement: list
    tol: float

    @property
    def passed(self):
        return all(self.pass_tangent) and all(self.pass_complement)


def certificate_check(Q, subspaces, lambdas, tol=0.05):
    """Check the dual certificate conditions for each scale.

    ``||P_T(Q) - lambda E||_F / lambda <= tol`` and
    ``||P_T_perp(Q)||_(i)^* / lambda < 1 + tol``.
    """
    Q = np.asarray(Q, dtype=np.float64)
    res, ratio = [], []
    for sub, lam in zip(subspaces, lambdas):
        res.append(float(np.linalg.norm(project_T(Q, sub) - lam * sub.E) / lam))
        ratio.append(scale_dual_norm(project_T_perp(Q, sub), sub.scale, sub.partition) / lam)
    return CertificateReport(res, ratio, [r <= tol for r in res], [r < 1 + tol for r in ratio], tol)


def rmse(pred, entries):
    """Root mean squared error of `pred` over ``(row, col, value)`` entries."""
    entries = list(entries)
    if not entries:
        raise ValueError("no entries to evaluate")
    pred = np.asarray(pred)
    r = np.array([e[0] for e in entries], dtype=np.int64)
    c = np.array([e[1] for e in entries], dtype=np.int64)
    v = np.array([e[2] for e in entries], dtype=np.float64)
    if r.min() < 0 or c.min() < 0 or r.max() >= pred.shape[0] or c.max() >= pred.shape[1]:
        raise ValueError("entry index out of range")
    return float(np.sqrt(np.mean((pred[r, c] - v) ** 2)))
