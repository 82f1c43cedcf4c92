"""Mutual-dependence statistic over K-fold product spaces and its test.

The statistic averages, over all sample pairs, the squared gap between the
joint EMDF and the product of the marginal EMDFs.  For K = 2 it equals the
squared ball covariance.  All ball counts are exact integers; the statistic
is assembled from them with a fixed operation order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .emdf import MultiDistance
from .metrics import DistanceMatrix
from .permutation import TestResult, permutation_pvalue, substream

__all__ = ["ma_statistic", "ma_test", "permute_component"]


def permute_component(md: MultiDistance, k: int, order) -> MultiDistance:
    """Relabel component k's index set by ``order``; other components fixed."""
    idx = np.asarray(order, dtype=np.intp)
    comps = list(md.components)
    comps[k] = DistanceMatrix(comps[k].d[np.ix_(idx, idx)])
    return MultiDistance(tuple(comps))


def _component_masks(d: np.ndarray) -> np.ndarray:
    """mask[i, j, l] = (d[i, l] <= d[i, j]): X_l inside the closed ball
    around center i with radius d(i, j)."""
    return d[:, None, :] <= d[:, :, None]


def _marginal_counts(mask: np.ndarray) -> np.ndarray:
    return mask.sum(axis=2, dtype=np.int64)


def _ma_value(joint_counts: np.ndarray, marginal_counts: list[np.ndarray], n: int) -> float:
    """(1/n^2) sum over pairs of (F_joint - prod_k F_k)^2 from integer counts.

    F_joint = joint/n and F_k = c_k/n, so each summand equals
    (joint * n^(K-1) - prod_k c_k)^2 / n^(2K); the accumulation stays exact
    for desk-scale n, and is order-independent there.
    """
    K = len(marginal_counts)
    prod = marginal_counts[0].astype(np.int64)
    for c in marginal_counts[1:]:
        prod = prod * c
    num = (joint_counts * n ** (K - 1) - prod).astype(np.float64)
    return float((num * num).sum() / float(n) ** (2 * K + 2))


def ma_statistic(md: MultiDistance) -> float:
    """Dependence measure for K >= 2 components; zero for n = 1, nonnegative,
    symmetric under component reordering and under common relabelings."""
    if md.K < 2:
        raise ValueError("mutual-dependence statistic needs K >= 2 components")
    ds = md.distance_arrays()
    masks = [_component_masks(d) for d in ds]
    joint = masks[0].copy()
    for m in masks[1:]:
        joint &= m
    return _ma_value(
        joint.sum(axis=2, dtype=np.int64), [_marginal_counts(m) for m in masks], md.n
    )


def ma_test(
    md: MultiDistance,
    B: int = 399,
    seed: int = 0,
    *,
    workers: int | None = None,
    keep_null: bool = True,
) -> TestResult:
    """Permutation test of mutual independence.

    Each replicate applies an independent uniform permutation to the index
    set of every component but the first, which breaks exactly the joint
    structure while preserving all marginals.  Marginal EMDF counts of the
    permuted components are index-relabeled rather than recomputed; only the
    joint counts are rebuilt per replicate.  Replicate b draws from
    substream(seed, b); results are identical for any worker count.
    """
    if md.K < 2:
        raise ValueError("mutual-dependence test needs K >= 2 components")
    if md.n < 3:
        raise ValueError("need at least 3 observations to permute")
    if B < 1:
        raise ValueError("B must be >= 1")
    n = md.n
    ds = md.distance_arrays()
    # only the first component's mask is reused verbatim across replicates;
    # permuted components are cheaper to re-mask from the relabeled distances
    # than to gather along all three tensor axes
    first_mask = _component_masks(ds[0])
    margs = [_marginal_counts(_component_masks(d)) for d in ds]

    def replicate(b: int) -> float:
        if b == 0:
            perms = [np.arange(n)] * (md.K - 1)
        else:
            rng = substream(seed, b)
            perms = [rng.permutation(n) for _ in range(md.K - 1)]
        joint = first_mask
        counts = [margs[0]]
        for k, pi in enumerate(perms, start=1):
            dp = ds[k][np.ix_(pi, pi)]
            joint = joint & _component_masks(dp)
            counts.append(margs[k][np.ix_(pi, pi)])
        return _ma_value(joint.sum(axis=2, dtype=np.int64), counts, n)

    if workers is None or workers <= 1:
        stats = [replicate(b) for b in range(B + 1)]
    else:
        # fixed-size batches: the split never depends on the worker count
        batch = 64
        chunks = [range(s, min(s + batch, B + 1)) for s in range(0, B + 1, batch)]
        stats = []
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(lambda c=c: [replicate(b) for b in c]) for c in chunks]
            for fut in futures:
                stats.extend(fut.result())

    p = permutation_pvalue(stats[0], stats[1:])
    return TestResult(
        float(stats[0]), p, B, seed, tuple(float(v) for v in stats[1:]) if keep_null else None
    )
