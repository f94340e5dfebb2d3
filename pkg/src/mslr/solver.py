"""ADMM solver for the multi-scale low rank decomposition.

Solves::

    minimize    sum_i lambda_i * ||X_i||_(i)
    subject to  Y = sum_i X_i            (decompose)
                Y_jk = [sum_i X_i]_jk    for observed jk  (complete)

with the splitting ``X_i = Z_i``. One sweep is::

    X_i <- (Z_i - U_i) + (Y - sum_j (Z_j - U_j)) / L
    Z_i <- BlockSVT_{lambda_i / rho}(X_i + U_i)
    U_i <- U_i - (Z_i - X_i)

For completion the X-update correction is applied on observed entries
only. With cycle spinning each BlockSVT is conjugated by a fresh random
cyclic shift.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .partition import MultiScalePartition, cyclic_shift, cyclic_unshift, draw_shift
from .regularization import recommended_lambdas
from .spectral import rank_histogram, scale_norm, shrink_blocks

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    lambdas: list | None = None
    rho: float = 1.0
    max_iters: int = 1000
    feas_tol: float = 1e-6
    rel_change_tol: float = 1e-6
    cycle_spin: bool = False
    seed: int = 0
    log_every: int = 0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.feas_tol <= 0 or self.rel_change_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.lambdas is not None:
            self.lambdas = [float(v) for v in self.lambdas]
            if any(v <= 0 for v in self.lambdas):
                raise ValueError("all lambdas must be positive")

    def resolve_lambdas(self, partition):
        if self.lambdas is None:
            return recommended_lambdas(partition)
        if len(self.lambdas) != len(partition):
            raise ValueError(
                f"{len(self.lambdas)} lambdas given for {len(partition)} scales")
        return list(self.lambdas)

    def to_dict(self):
        return {
            "lambdas": self.lambdas, "rho": self.rho, "max_iters": self.max_iters,
            "feas_tol": self.feas_tol, "rel_change_tol": self.rel_change_tol,
            "cycle_spin": self.cycle_spin, "seed": self.seed,
        }


@dataclass
class SolverState:
    X: list
    Z: list
    U: list
    iteration: int = 0
    rng: np.random.Generator | None = None
    # filled by admm_step
    znorms: list = field(default_factory=list)
    constraint_residual: float = 0.0

    @classmethod
    def zeros(cls, partition, seed=0):
        shape = partition.shape
        L = len(partition)
        return cls(X=[np.zeros(shape) for _ in range(L)],
                   Z=[np.zeros(shape) for _ in range(L)],
                   U=[np.zeros(shape) for _ in range(L)],
                   rng=np.random.default_rng(seed))


@dataclass
class DecompositionResult:
    components: list
    lambdas: list
    objective: list
    feasibility: list
    constraint_residual: list
    iterations: int
    converged: bool
    dual: np.ndarray
    completed: np.ndarray | None = None
    svd_blocks: list = field(default_factory=list)
    svd_skipped: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def reconstruction(self):
        return np.sum(self.components, axis=0)

    def ranks(self, partition):
        return [rank_histogram(Z, s, partition) for Z, s in zip(self.components, partition)]


def _check_shapes(state, Y, partition):
    if Y.shape != partition.shape:
        raise ValueError(f"data shape {Y.shape} does not match partition {partition.shape}")
    L = len(partition)
    if not (len(state.X) == len(state.Z) == len(state.U) == L):
        raise ValueError("solver state does not match the number of scales")


def admm_step(state: SolverState, Y, partition: MultiScalePartition, config: SolverConfig,
              lambdas=None, mask=None, stats=None):
    """One ADMM sweep over all scales, updating `state` in place and returning it.

    `mask` is a boolean array of observed entries (``None`` means all
    observed). `stats` collects BlockSVT skip counts, see
    :func:`mslr.spectral.shrink_blocks`.
    """
    _check_shapes(state, Y, partition)
    lambdas = config.resolve_lambdas(partition) if lambdas is None else lambdas
    L = len(partition)

    D = [z - u for z, u in zip(state.Z, state.U)]
    residual = (Y - np.sum(D, axis=0)) / L
    if mask is not None:
        residual = np.where(mask, residual, 0.0)
    state.X = [d + residual for d in D]

    fit = np.sum(state.X, axis=0)
    if mask is not None:
        gap = np.linalg.norm((Y - fit)[mask])
        ref = np.linalg.norm(Y[mask])
    else:
        gap = np.linalg.norm(Y - fit)
        ref = np.linalg.norm(Y)
    state.constraint_residual = gap / ref if ref > 0 else gap

    znorms = []
    for i, scale in enumerate(partition):
        V = state.X[i] + state.U[i]
        t = lambdas[i] / config.rho
        if config.cycle_spin:
            shift = draw_shift(scale, state.rng)
            Z, nuc = shrink_blocks(cyclic_shift(V, shift), scale, partition, t, stats)
            Z = cyclic_unshift(Z, shift)
        else:
            Z, nuc = shrink_blocks(V, scale, partition, t, stats)
        state.Z[i] = Z
        state.U[i] = state.U[i] - (Z - state.X[i])
        znorms.append(nuc)
    state.znorms = znorms
    state.iteration += 1
    return state


def objective(components, partition, lambdas):
    """Weighted sum of scale norms."""
    if len(components) != len(partition) or len(lambdas) != len(partition):
        raise ValueError("components, lambdas and partition scales must have equal length")
    return float(sum(lam * scale_norm(X, s, partition)
                     for X, s, lam in zip(components, partition, lambdas)))


def _run(Y, partition, config, mask):
    lambdas = config.resolve_lambdas(partition)
    state = SolverState.zeros(partition, config.seed)
    if mask is not None:
        ref = np.linalg.norm(Y[mask])
    else:
        ref = np.linalg.norm(Y)
    scale_ref = ref if ref > 0 else 1.0

    objective_trace, feas_trace, cons_trace = [], [], []
    svd_blocks, svd_skipped = [], []
    converged = False
    start = time.perf_counter()
    prev_Z = [z.copy() for z in state.Z]
    for k in range(config.max_iters):
        stats: dict = {}
        admm_step(state, Y, partition, config, lambdas, mask, stats)
        SZ = np.sum(state.Z, axis=0)
        if not np.all(np.isfinite(SZ)):
            raise SolverError(f"non-finite iterate at iteration {state.iteration}")
        gap = (Y - SZ)[mask] if mask is not None else Y - SZ
        feas = float(np.linalg.norm(gap) / scale_ref)
        change = max(float(np.linalg.norm(z - p)) for z, p in zip(state.Z, prev_Z)) / scale_ref
        obj = float(sum(lam * n for lam, n in zip(lambdas, state.znorms)))

        objective_trace.append(obj)
        feas_trace.append(feas)
        cons_trace.append(state.constraint_residual)
        svd_blocks.append(sum(v[0] for v in stats.values()))
        svd_skipped.append(sum(v[1] for v in stats.values()))

        if config.log_every and state.iteration % config.log_every == 0:
            ranks = [rank_histogram(z, s, partition) for z, s in zip(state.Z, partition)]
            log.info("iter %d objective %.6g feasibility %.3e ranks %s",
                     state.iteration, obj, feas, ranks)
        if feas <= config.feas_tol and change <= config.rel_change_tol:
            converged = True
            break
        prev_Z = [z.copy() for z in state.Z]

    # at a fixed point all U_i coincide; their mean scaled by rho estimates the dual
    dual = config.rho * np.mean(state.U, axis=0)
    return state, DecompositionResult(
        components=[z.copy() for z in state.Z],
        lambdas=lambdas,
        objective=objective_trace,
        feasibility=feas_trace,
        constraint_residual=cons_trace,
        iterations=state.iteration,
        converged=converged,
        dual=dual,
        svd_blocks=svd_blocks,
        svd_skipped=svd_skipped,
        elapsed=time.perf_counter() - start,
    )


def decompose(Y, partition: MultiScalePartition, config: SolverConfig | None = None):
    """Split `Y` into one block-wise low rank component per scale.

    The returned components are the thresholded Z-iterates; their sum
    matches `Y` up to the reported feasibility.
    """
    config = config or SolverConfig()
    Y = np.asarray(Y, dtype=np.float64)
    if not np.all(np.isfinite(Y)):
        raise ValueError("Y contains non-finite entries")
    return _run(Y, partition, config, None)[1]


def complete(Y_observed, mask, partition: MultiScalePartition, config: SolverConfig | None = None):
    """Multi-scale low rank matrix completion.

    Only entries where `mask` is true constrain the fit; the values of
    `Y_observed` elsewhere are ignored. ``result.completed`` holds
    ``sum_i X_i``, which reproduces the observed entries exactly.
    """
    config = config or SolverConfig()
    mask = np.asarray(mask, dtype=bool)
    Y = np.asarray(Y_observed, dtype=np.float64)
    if mask.shape != Y.shape:
        raise ValueError(f"mask shape {mask.shape} does not match data shape {Y.shape}")
    if not mask.any():
        raise ValueError("observation mask is empty; nothing to fit")
    if not np.all(np.isfinite(Y[mask])):
        raise ValueError("observed entries contain non-finite values")
    Y = np.where(mask, Y, 0.0)
    state, result = _run(Y, partition, config, mask)
    result.completed = np.sum(state.X, axis=0)
    return result


def mask_from_entries(rows, cols, shape):
    """Boolean observation mask from index arrays; rejects duplicates and out-of-range pairs."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    M, N = shape
    if rows.shape != cols.shape:
        raise ValueError("row and column index arrays differ in length")
    if rows.size and (rows.min() < 0 or rows.max() >= M or cols.min() < 0 or cols.max() >= N):
        raise ValueError("observed index out of range")
    mask = np.zeros(shape, dtype=bool)
    mask[rows, cols] = True
    if mask.sum() != rows.size:
        raise ValueError("duplicate observed entries")
    return mask
