"""Seeded resampling engine, p-values, and the Monte Carlo power harness.

Every replicate (and every Monte Carlo run) draws its randomness from a
dedicated counter-based substream keyed by (seed, index), so results are
bitwise identical no matter how the work is distributed across workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TestResult",
    "PowerCell",
    "PowerTable",
    "substream",
    "derive_seed",
    "permutation_pvalue",
    "run_permutation_test",
    "power_sweep",
]

_U64 = (1 << 64) - 1

# replicates are dispatched in fixed-size batches so the batching (and any
# floating-point consequence of it) is independent of the worker count
_REPLICATE_BATCH = 64


def substream(seed: int, *index: int) -> np.random.Generator:
    """Independent generator for one replicate, keyed by (seed, index).

    Built on the Philox counter-based generator; the key mixes the run seed
    with the replicate index, so streams do not depend on execution order.
    """
    entropy = [int(seed) & _U64] + [int(i) & _U64 for i in index]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=entropy)))


def derive_seed(seed: int, *index: int) -> int:
    """Deterministic 64-bit child seed for nested runs (e.g. power cells)."""
    entropy = [int(seed) & _U64] + [int(i) & _U64 for i in index]
    state = np.random.SeedSequence(entropy=entropy).generate_state(1, np.uint64)
    return int(state[0])


def permutation_pvalue(observed: float, null_stats: Sequence[float]) -> float:
    """(1 + #{replicates >= observed}) / (B + 1); ties count as exceedances."""
    arr = np.asarray(null_stats, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("need at least one null replicate")
    return float((1 + int((arr >= observed).sum())) / (arr.size + 1))


@dataclass(frozen=True)
class TestResult:
    """Outcome of a permutation test."""

    __test__ = False  # not a pytest class despite the name

    statistic: float
    p_value: float
    replications: int
    seed: int
    null_stats: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0.0 < self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value!r} outside (0, 1]")
        if self.null_stats is not None:
            ns = tuple(float(v) for v in self.null_stats)
            if len(ns) != self.replications:
                raise ValueError("null_stats length must equal replications")
            if self.p_value != permutation_pvalue(self.statistic, ns):
                raise ValueError("p_value inconsistent with null_stats")
            object.__setattr__(self, "null_stats", ns)


def _map_indexed(fn: Callable[[int], object], indices: Sequence[int], workers: int | None):
    """Apply fn over indices, preserving order; batches are worker-independent."""
    if workers is None or workers <= 1:
        return [fn(i) for i in indices]
    batches = [indices[s : s + _REPLICATE_BATCH] for s in range(0, len(indices), _REPLICATE_BATCH)]
    out: list = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(lambda chunk=b: [fn(i) for i in chunk]) for b in batches]
        for fut in futures:
            out.extend(fut.result())
    return out


def run_permutation_test(
    stat: Callable,
    resample: Callable[[np.random.Generator], object],
    B: int,
    seed: int,
    *,
    workers: int | None = None,
    observed_arrangement=None,
    keep_null: bool = True,
) -> TestResult:
    """Generic permutation test driver.

    ``stat`` evaluates the statistic for an index arrangement (``None`` means
    the observed arrangement); ``resample`` draws an arrangement using only
    the replicate substream it is handed.  Replicate b consumes
    ``substream(seed, b)``, so the result does not depend on the degree of
    parallelism.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    observed = float(stat(observed_arrangement))

    def one(b: int) -> float:
        try:
            return float(stat(resample(substream(seed, b))))
        except Exception as exc:  # noqa: BLE001 - annotate with replicate index
            raise RuntimeError(f"statistic evaluation failed in replicate {b}: {exc}") from exc

    null = _map_indexed(one, range(1, B + 1), workers)
    p = permutation_pvalue(observed, null)
    return TestResult(observed, p, B, seed, tuple(null) if keep_null else None)


@dataclass(frozen=True)
class PowerCell:
    """Rejection tally for one (kappa, n) scenario cell."""

    kappa: float
    n: int
    rejections: int
    runs: int
    rate: float
    error: str | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.error is None and self.rate != self.rejections / self.runs:
            raise ValueError("rate inconsistent with rejections/runs")


@dataclass(frozen=True)
class PowerTable:
    cells: tuple[PowerCell, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))

    def rate(self, kappa: float, n: int) -> float:
        for c in self.cells:
            if c.kappa == kappa and c.n == n:
                return c.rate
        raise KeyError(f"no cell for kappa={kappa}, n={n}")


def power_sweep(
    scenario: Callable[[float, int, int], object],
    run_test: Callable[[object, float, int, int], TestResult],
    alpha: float,
    runs: int,
    kappas: Sequence[float],
    ns: Sequence[int],
    *,
    workers: int | None = None,
) -> PowerTable:
    """Monte Carlo power estimate over a (kappa, n) grid.

    Each cell draws ``runs`` independent datasets via ``scenario(kappa, n,
    run)``, tests each at level ``alpha`` and tallies rejections.  A failing
    run marks its cell invalid (rate NaN, error recorded) without aborting the
    sweep.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    cells = []
    for kappa in kappas:
        for n in ns:
            def one(r: int):
                data = scenario(kappa, n, r)
                res = run_test(data, kappa, n, r)
                return bool(res.p_value <= alpha)

            try:
                flags = _map_indexed(one, range(runs), workers)
            except Exception as exc:  # noqa: BLE001 - cell marked invalid
                cells.append(
                    PowerCell(float(kappa), int(n), 0, runs, float("nan"), error=str(exc))
                )
                continue
            rej = int(sum(flags))
            cells.append(PowerCell(float(kappa), int(n), rej, runs, rej / runs))
    return PowerTable(tuple(cells))
