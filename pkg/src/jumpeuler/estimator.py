"""Monte Carlo strong-error estimators and the trajectory driver.

Trajectories are independent given ``(seed, index)``, so the driver may hand
them to any number of workers; per-trajectory results are always reduced in
ascending index order, which makes every estimate bit-identical across
worker counts.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidParameter, JumpEulerError, MissingReference, TrajectoryFailure
from .model import ModelSpec
from .scheme import SchemeParams, simulate_coupled_pair, simulate_terminal, simulate_with_reference

WORKERS_ENV = "JUMPEULER_WORKERS"
CHUNK = 64


@dataclass(frozen=True)
class ErrorEstimate:
    error: float
    std_error: float
    trajectories: int
    p: float
    cost: float
    M: int = 0
    n: int = 0


@dataclass(frozen=True)
class CostModel:
    """Cost of the scheme at ``(M, n)``: ``M * n`` scalar evaluations."""

    def __call__(self, M: int, n: int) -> float:
        if M < 1 or n < 1:
            raise InvalidParameter("M, n", "must be >= 1")
        return float(M) * float(n)


def informational_cost(M: int, n: int) -> float:
    return CostModel()(M, n)


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = os.environ.get(WORKERS_ENV, "1")
    if isinstance(workers, str):
        if workers.lower() in ("auto", "max"):
            return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
        try:
            workers = int(workers)
        except ValueError:
            raise InvalidParameter("workers", f"expected an integer, 'auto' or 'max', got {workers!r}")
    if workers < 1:
        raise InvalidParameter("workers", "must be >= 1")
    return workers


def run_trajectories(fn: Callable[[int], object], K: int, workers=None,
                     progress: Optional[Callable[[int, int], None]] = None) -> list:
    """Evaluate ``fn(index)`` for ``index = 0 .. K-1``; results in index order.

    Exceptions are re-raised as ``TrajectoryFailure`` carrying the index.
    """
    def run_chunk(start):
        out = []
        for idx in range(start, min(start + CHUNK, K)):
            try:
                out.append(fn(idx))
            except JumpEulerError as exc:
                raise TrajectoryFailure(idx, exc) from exc
        return out

    starts = range(0, K, CHUNK)
    nworkers = resolve_workers(workers)
    results = []
    if nworkers == 1:
        for s in starts:
            results.extend(run_chunk(s))
            if progress:
                progress(min(s + CHUNK, K), K)
        return results
    with ThreadPoolExecutor(max_workers=nworkers) as pool:
        for s, chunk in zip(starts, pool.map(run_chunk, starts)):
            results.extend(chunk)
            if progress:
                progress(min(s + CHUNK, K), K)
    return results


def _ordered_sum(values: np.ndarray) -> float:
    return float(np.add.accumulate(values)[-1])


def summarize_powers(powers: Sequence[float], p: float, cost: float, M=0, n=0) -> ErrorEstimate:
    """``(mean |D|^p)^{1/p}`` with a delta-method standard error."""
    D = np.asarray(powers, dtype=float)
    K = len(D)
    if K < 2:
        raise InvalidParameter("K", "need at least 2 trajectories")
    mean = _ordered_sum(D) / K
    var = _ordered_sum((D - mean) ** 2) / (K - 1)
    se_mean = math.sqrt(var / K)
    error = mean ** (1.0 / p)
    std_error = (1.0 / p) * mean ** (1.0 / p - 1.0) * se_mean if mean > 0 else 0.0
    return ErrorEstimate(error, std_error, K, p, cost, M, n)


def _distance_p(a, b, p):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) ** p


def coupled_differences(model: ModelSpec, M: int, n: int, multipliers=(10, 100), K: int = 1000,
                        p: float = 2.0, base_seed: int = 0, *, workers=None, noise="auto",
                        engine="auto", progress=None) -> np.ndarray:
    """``|fine_l - rare_l|^p`` for ``l = 0 .. K-1``."""
    params = SchemeParams(M, n, p)
    fM, fn = multipliers

    def one(idx):
        rare, fine = simulate_coupled_pair(model, params, base_seed, idx, fM, fn,
                                           noise=noise, engine=engine)
        return _distance_p(fine.value, rare.value, p)

    return np.array(run_trajectories(one, K, workers, progress))


def mc_error_coupled(model: ModelSpec, M: int, n: int, multipliers=(10, 100), K: int = 1000,
                     p: float = 2.0, base_seed: int = 0, *, workers=None, noise="auto",
                     engine="auto", progress=None) -> ErrorEstimate:
    """Strong L^p error of the scheme at ``(M, n)`` estimated against the
    scheme at ``(M * multipliers[0], n * multipliers[1])`` on shared noise."""
    if K < 2:
        raise InvalidParameter("K", "must be >= 2")
    D = coupled_differences(model, M, n, multipliers, K, p, base_seed, workers=workers,
                            noise=noise, engine=engine, progress=progress)
    return summarize_powers(D, p, informational_cost(M, n), M, n)


def mc_error_vs_reference(model: ModelSpec, M: int, n: int, K: int = 1000, p: float = 2.0,
                          base_seed: int = 0, ref_mult: int = 10, *, workers=None,
                          noise="auto", engine="auto", progress=None) -> ErrorEstimate:
    """Strong L^p error against the closed-form solution truncated at
    ``M * ref_mult`` dimensions, evaluated on the scheme's own noise."""
    if model.exact_reference is None:
        raise MissingReference(f"model {model.name!r} has no exact reference")
    if K < 2:
        raise InvalidParameter("K", "must be >= 2")
    params = SchemeParams(M, n, p)

    def one(idx):
        tv, exact = simulate_with_reference(model, params, base_seed, idx, ref_mult,
                                            noise=noise, engine=engine)
        return _distance_p(exact, tv.value, p)

    D = np.array(run_trajectories(one, K, workers, progress))
    return summarize_powers(D, p, informational_cost(M, n), M, n)


def sample_terminals(model: ModelSpec, params: SchemeParams, K: int, base_seed: int = 0, *,
                     workers=None, noise="auto", engine="auto", progress=None):
    """Terminal values ``(K, d)`` and jump counts ``(K,)`` of trajectories 0..K-1."""
    def one(idx):
        tv = simulate_terminal(model, params, base_seed, idx, noise=noise, engine=engine)
        return tv.value, tv.jump_count

    out = run_trajectories(one, K, workers, progress)
    values = np.array([v for v, _ in out]).reshape(K, model.dim)
    counts = np.array([c for _, c in out], dtype=np.int64)
    return values, counts
