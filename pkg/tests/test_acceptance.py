"""End-to-end acceptance checks, one recorded PASS/FAIL line per criterion."""

import math
import os
import time

import numpy as np
import pytest

from mslr.analysis import (certificate_check, project_T, project_T_perp, rmse,
                           subspaces_from_components)
from mslr.partition import build_partition, partition_from_sizes
from mslr.ratings import (RATING_RANGE, build_rating_matrix, ingest_rating_triples,
                          ingest_user_ages, split_holdout)
from mslr.regularization import gaussian_complexity_estimate, lambda_for_scale, recommended_lambdas
from mslr.solver import SolverConfig, SolverState, admm_step, complete, decompose, objective
from mslr.spectral import block_svt, scale_dual_norm, sigma_max_upper_bound
from mslr.synth import blob_phantom
from oracles import reference_decompose
from test_analysis import contraction_ratios, incoherence_violations, random_components


def relative_errors(components, truth, Y):
    out = []
    for Z, X in zip(components, truth):
        nx = np.linalg.norm(X)
        out.append(np.linalg.norm(Z - X) / nx if nx > 0 else np.linalg.norm(Z) / np.linalg.norm(Y))
    return out


@pytest.fixture(scope="module")
def on_grid_run():
    Y, truth, p = blob_phantom(64, on_grid=True, seed=0)
    t0 = time.perf_counter()
    res = decompose(Y, p, SolverConfig(max_iters=2000, feas_tol=1e-7, rel_change_tol=1e-7))
    return Y, truth, p, res, time.perf_counter() - t0


def test_c01_exact_separation(on_grid_run, accept):
    Y, truth, p, res, elapsed = on_grid_run
    errs = relative_errors(res.components, truth, Y)
    ok = res.iterations <= 2000 and max(errs) <= 1e-2 and elapsed <= 60
    accept(1, ok, f"per-scale errors {[f'{e:.1e}' for e in errs]}, "
                  f"{res.iterations} iterations, {elapsed:.2f}s")


def total_error(components, truth):
    num = sum(np.linalg.norm(Z - X) ** 2 for Z, X in zip(components, truth))
    return math.sqrt(num / sum(np.linalg.norm(X) ** 2 for X in truth))


@pytest.mark.slow
def test_c02_cycle_spinning(accept):
    plain, spun = [], []
    for seed in range(5):
        Y, truth, p = blob_phantom(64, on_grid=False, seed=seed)
        for flag, acc in [(False, plain), (True, spun)]:
            res = decompose(Y, p, SolverConfig(max_iters=1000, cycle_spin=flag, seed=seed))
            acc.append(total_error(res.components, truth))
    a, b = np.mean(plain), np.mean(spun)
    accept(2, b <= 0.8 * a, f"mean error {a:.4f} without vs {b:.4f} with ({1 - b / a:.0%} lower)")


def test_c03_closed_forms(accept):
    rng = np.random.default_rng(3)
    worst = [0.0, 0.0, 0.0]
    for _ in range(100):
        M, N = rng.integers(1, 12, size=2)
        X = rng.standard_normal((M, N)) * rng.uniform(0.1, 5)
        t = float(rng.uniform(0, 3))
        p = partition_from_sizes(M, N, [(1, 1)])
        soft = np.sign(X) * np.maximum(np.abs(X) - t, 0)
        worst[0] = max(worst[0], np.abs(block_svt(X, p[0], p, t) - soft).max())

        q = partition_from_sizes(M, N, [(1, N)])
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        group = X * np.maximum(1 - t / np.where(norms > 0, norms, 1), 0)
        worst[1] = max(worst[1], np.abs(block_svt(X, q[0], q, t) - group).max())

        r = partition_from_sizes(M, N, [(1, 1)], include_noise_scale=True)
        frob = X * max(1 - t / np.linalg.norm(X), 0)
        worst[2] = max(worst[2], np.abs(block_svt(X, r[-1], r, t) - frob).max())
    accept(3, max(worst) <= 1e-12, "max deviation entrywise/row/Frobenius "
                                   f"{worst[0]:.1e}/{worst[1]:.1e}/{worst[2]:.1e}")


def tiny_problem(k):
    rng = np.random.default_rng(1000 + k)
    Y = 3 * np.outer(rng.standard_normal(8), rng.standard_normal(8))
    idx = rng.choice(64, size=6, replace=False)
    Y.flat[idx] += rng.uniform(-5, 5, size=6)
    Y += 0.3 * rng.standard_normal((8, 8))
    sizes = [(1, 1), (8, 8)] if k < 10 else [(2, 2), (8, 8)]
    return Y, sizes


@pytest.mark.slow
def test_c04_reference_solver(accept):
    obj_gap = comp_gap = 0.0
    for k in range(20):
        Y, sizes = tiny_problem(k)
        p = partition_from_sizes(8, 8, sizes)
        res = decompose(Y, p, SolverConfig(max_iters=20000, feas_tol=1e-9, rel_change_tol=1e-10))
        value, ref = reference_decompose(Y, sizes, res.lambdas)
        obj_gap = max(obj_gap, abs(objective(res.components, p, res.lambdas) - value) / value)
        for Z, R in zip(res.components, ref):
            denom = max(np.linalg.norm(R), 1e-3 * np.linalg.norm(Y))
            comp_gap = max(comp_gap, np.linalg.norm(Z - R) / denom)
    accept(4, obj_gap <= 1e-4 and comp_gap <= 1e-3,
           f"objective gap {obj_gap:.1e}, component gap {comp_gap:.1e} over 20 problems")


def test_c05_feasibility(on_grid_run, accept):
    Y, _, p, res, _ = on_grid_run
    # replay the same iterations to read the X-iterates directly
    state = SolverState.zeros(p)
    cfg = SolverConfig()
    lam = recommended_lambdas(p)
    for _ in range(res.iterations):
        admm_step(state, Y, p, cfg, lam)
    ny = np.linalg.norm(Y)
    fx = np.linalg.norm(Y - np.sum(state.X, axis=0)) / ny
    fz = np.linalg.norm(Y - np.sum(res.components, axis=0)) / ny
    accept(5, res.converged and fx <= 1e-10 and fz <= 1e-4,
           f"||Y-sum X||/||Y|| = {fx:.1e}, ||Y-sum Z||/||Y|| = {fz:.1e}")


def test_c06_sigma_bound(on_grid_run, accept):
    rng = np.random.default_rng(6)
    violations = 0
    for _ in range(1000):
        m, n = rng.integers(1, 17, size=2)
        B = rng.standard_normal((m, n))
        if rng.random() < 0.3:
            B = np.outer(rng.standard_normal(m), rng.standard_normal(n))
        violations += sigma_max_upper_bound(B) < np.linalg.norm(B, 2) * (1 - 1e-12)
    _, _, _, res, _ = on_grid_run
    done = sum(res.svd_blocks[-100:])
    skipped = sum(res.svd_skipped[-100:])
    frac = skipped / done
    accept(6, violations == 0 and frac >= 0.5,
           f"{violations} bound violations, {frac:.1%} of late block SVDs skipped")


def test_c07_svd_cost(accept):
    ratios = []
    for M in (64, 128, 256):
        p = build_partition(M, M, mode="two-sided", min_block=(1, 1), factor=2)
        cost = sum(b.height * b.width * min(b.height, b.width) for s in p for b in p.blocks(s))
        ratios.append(cost / (M * M * M))
    accept(7, max(ratios) <= 2, f"cost ratios {[round(r, 4) for r in ratios]}")


@pytest.mark.slow
def test_c08_lambda_endpoints(accept):
    ok = True
    for M, N in [(8, 8), (64, 64), (100, 37), (256, 512)]:
        fine = lambda_for_scale(1, 1, M, N)
        ok &= math.isclose((fine - 2) ** 2, math.log(M * N), rel_tol=1e-12)
        full = lambda_for_scale(M, N, M, N)
        ok &= math.isclose(full - math.sqrt(M) - math.sqrt(N),
                           math.sqrt(math.log(min(M, N))), rel_tol=1e-12)
        ok &= math.isclose(lambda_for_scale(M * N, 1, M, N), math.sqrt(M * N) + 1, rel_tol=1e-12)
    p = build_partition(64, 64, include_noise_scale=True)
    gaps = []
    for s, lam in zip(p, recommended_lambdas(p)):
        mc = gaussian_complexity_estimate(s, p, trials=2000, seed=0)
        gaps.append(abs(lam - mc) / mc)
    ok &= max(gaps) <= 0.35
    accept(8, ok, f"closed-form endpoints exact, max Monte Carlo gap {max(gaps):.1%}")


def test_c09a_projections(accept):
    rng = np.random.default_rng(9)
    p = build_partition(8, 8, include_noise_scale=True)
    worst = 0.0
    for _ in range(50):
        X = rng.standard_normal((8, 8))
        for sub in subspaces_from_components(random_components(p, rng), p):
            PX, QX = project_T(X, sub), project_T_perp(X, sub)
            worst = max(worst, np.abs(project_T(PX, sub) - PX).max(),
                        np.abs(project_T_perp(QX, sub) - QX).max(), np.abs(PX + QX - X).max())
    accept("9a", worst <= 1e-10, f"projection identities hold to {worst:.1e}")


def test_c09b_complement_contraction(accept):
    ratio = contraction_ratios(1000)[1]
    accept("9b", ratio <= 1 + 1e-12, f"max ||P_perp X||*/||X||* = {ratio:.6f} over 1000 draws")


@pytest.mark.xfail(strict=True, reason="P_T can enlarge the block dual norm; the valid bound is 2")
def test_c09c_tangent_contraction(accept):
    ratio = contraction_ratios(1000)[0]
    accept("9c", ratio <= 1 + 1e-12, f"max ||P_T X||*/||X||* = {ratio:.6f} over 1000 draws")


def test_c09d_incoherence(accept):
    bad = incoherence_violations(range(6))
    accept("9d", bad == 0, f"{bad} violations of the brute-force incoherence bound")


def test_c09e_certificate(accept):
    Y = np.zeros((16, 16))
    Y[0, 0] = 10.0
    p = partition_from_sizes(16, 16, [(1, 1), (16, 16)])
    res = decompose(Y, p, SolverConfig())
    subs = subspaces_from_components(res.components, p, rtol=1e-6)
    r = certificate_check(res.dual, subs, res.lambdas, tol=0.05)
    accept("9e", res.converged and r.passed,
           f"residuals {[f'{v:.1e}' for v in r.tangent_residual]}, "
           f"complement ratios {[round(v, 3) for v in r.complement_ratio]}")


def test_c10_movielens(accept):
    root = os.environ.get("MSLR_MOVIELENS")
    if not root:
        accept.skip(10, "optional dataset; set MSLR_MOVIELENS to an ml-100k directory")
    triples = ingest_rating_triples(os.path.join(root, "u.data"))
    ages = ingest_user_ages(os.path.join(root, "u.user"))
    rm = build_rating_matrix(triples, ages, group_count=8)
    train, test = split_holdout(rm.mask, 0.2, seed=0)
    truth = rm.entries(test)
    scores, elapsed = {}, {}
    for name, p in [("multiscale", rm.partition),
                    ("lowrank", partition_from_sizes(*rm.Y.shape, [rm.Y.shape]))]:
        t0 = time.perf_counter()
        res = complete(rm.Y, train, p, SolverConfig())
        scores[name] = rmse(np.clip(res.completed, *RATING_RANGE), truth)
        elapsed[name] = time.perf_counter() - t0
    ms, lr = scores["multiscale"], scores["lowrank"]
    accept(10, ms < lr and 0.91 <= ms <= 0.97 and elapsed["multiscale"] <= 1800,
           f"RMSE multiscale {ms:.4f} vs low rank {lr:.4f}, {elapsed['multiscale']:.0f}s")
