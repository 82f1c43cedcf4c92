"""MKS divergence estimation and the two-sample permutation test.

The directed divergence from group 1 to group 2 averages, over centers in
group 1, the largest gap between the two group EMDFs along the concentric
balls indexed by the pooled points; the statistic symmetrizes the two
directions.  All counting is done with small exact integers, so statistic
values are bitwise reproducible no matter how the work is batched.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .emdf import MultiDistance
from .metrics import DistanceMatrix
from .permutation import TestResult, permutation_pvalue, substream

__all__ = [
    "TwoSampleLayout",
    "mks_directed",
    "mks_statistic",
    "mks_test",
    "permute_layout",
]

# cap on the float32 work buffers of the replicate kernels, in elements
_KERNEL_BLOCK_CELLS = 6_000_000


@dataclass(frozen=True)
class TwoSampleLayout:
    """Pooled distances over n1 + n2 objects; the first n1 indices are group 1."""

    pooled: MultiDistance
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("both groups need at least 2 members")
        if self.n1 + self.n2 != self.pooled.n:
            raise ValueError(
                f"n1 + n2 = {self.n1 + self.n2} does not match pooled n = {self.pooled.n}"
            )

    @property
    def n(self) -> int:
        return self.pooled.n

    @classmethod
    def from_labels(cls, pooled: MultiDistance, labels: Sequence) -> "TwoSampleLayout":
        """Build a layout from an arbitrary two-level label sequence.

        Indices are reordered (stably) so group 1 comes first; the statistic
        is invariant under this relabeling.  Group 1 is the label seen first.
        """
        labels = list(labels)
        if len(labels) != pooled.n:
            raise ValueError(f"got {len(labels)} labels for n = {pooled.n} observations")
        distinct = list(dict.fromkeys(labels))
        if len(distinct) != 2:
            raise ValueError(f"expected exactly 2 distinct labels, got {distinct!r}")
        first = distinct[0]
        order = np.array(
            [i for i, lab in enumerate(labels) if lab == first]
            + [i for i, lab in enumerate(labels) if lab != first],
            dtype=np.intp,
        )
        n1 = sum(1 for lab in labels if lab == first)
        comps = tuple(DistanceMatrix(c.d[np.ix_(order, order)]) for c in pooled.components)
        return cls(MultiDistance(comps), n1, pooled.n - n1)


def permute_layout(layout: TwoSampleLayout, order) -> TwoSampleLayout:
    """Relabel the pooled indices by ``order``; group sizes are preserved."""
    idx = np.asarray(order, dtype=np.intp)
    comps = tuple(DistanceMatrix(c.d[np.ix_(idx, idx)]) for c in layout.pooled.components)
    return TwoSampleLayout(MultiDistance(comps), layout.n1, layout.n2)


def _center_gap_maxima(ds: Sequence[np.ndarray], z: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """Per-center maxima of |n2*c1 - n1*c2| over all pooled radii.

    c_g(i, j) counts group-g points inside the joint closed ball around
    center i with per-component radii d_k(i, j); z is the group-1 indicator.
    Integer-valued throughout.
    """
    n = ds[0].shape[0]
    zf = z.astype(np.int64)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        mask = ds[0][i][None, :] <= ds[0][i][:, None]
        for d in ds[1:]:
            mask &= d[i][None, :] <= d[i][:, None]
        c1 = mask @ zf
        c2 = mask.sum(axis=1) - c1
        out[i] = np.abs(n2 * c1 - n1 * c2).max()
    return out


def _directed_from_maxima(maxima: np.ndarray, z: np.ndarray, n1: int, n2: int) -> tuple[float, float]:
    s1 = float(maxima[z == 1].sum())
    s2 = float(maxima[z == 0].sum())
    return s1 / (n1 * n1 * n2), s2 / (n1 * n2 * n2)


def _observed_indicator(layout: TwoSampleLayout) -> np.ndarray:
    z = np.zeros(layout.n, dtype=np.int8)
    z[: layout.n1] = 1
    return z


def mks_directed(layout: TwoSampleLayout, direction: int) -> float:
    """Directed divergence with centers ranging over the given group (1 or 2).

    For each center, the two group EMDFs are compared at every radius vector
    d_k(center, v) with v in the pooled sample (v equal to the center, radius
    zero, included); the largest absolute gap is averaged over centers.
    """
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    z = _observed_indicator(layout)
    maxima = _center_gap_maxima(layout.pooled.distance_arrays(), z, layout.n1, layout.n2)
    d1, d2 = _directed_from_maxima(maxima, z, layout.n1, layout.n2)
    return d1 if direction == 1 else d2


def mks_statistic(layout: TwoSampleLayout) -> float:
    """Symmetrized divergence: directed(1 -> 2) + directed(2 -> 1), in [0, 2]."""
    z = _observed_indicator(layout)
    maxima = _center_gap_maxima(layout.pooled.distance_arrays(), z, layout.n1, layout.n2)
    d1, d2 = _directed_from_maxima(maxima, z, layout.n1, layout.n2)
    return d1 + d2


def _label_matrix(n: int, n1: int, B: int, seed: int) -> np.ndarray:
    """Group-1 indicators for the observed labels (column 0) and B replicates.

    Replicate b re-partitions the pooled indices uniformly into groups of
    sizes (n1, n - n1), drawing only from substream(seed, b).
    """
    Z = np.zeros((n, B + 1), dtype=np.float32)
    Z[:n1, 0] = 1.0
    for b in range(1, B + 1):
        perm = substream(seed, b).permutation(n)
        Z[perm[:n1], b] = 1.0
    return Z


def _maxima_single(d: np.ndarray, Z: np.ndarray, n1: int, n2: int, rows: slice) -> np.ndarray:
    """K = 1 replicate kernel: sort each row once, then one cumulative sweep
    per replicate evaluates every EMDF gap in O(n); gaps are only read at
    tie-group ends so closed-ball counts stay exact under ties."""
    sub = d[rows]
    order = np.argsort(sub, axis=1, kind="stable")
    s = np.take_along_axis(sub, order, axis=1)
    tie_end = np.ones(sub.shape, dtype=np.float32)
    tie_end[:, :-1] = (s[:, 1:] > s[:, :-1]).astype(np.float32)
    zs = Z[order]  # (rows, n, B+1)
    c1 = np.cumsum(zs, axis=1)
    pos = np.arange(1, d.shape[0] + 1, dtype=np.float32)[None, :, None]
    gaps = np.abs(np.float32(n2) * c1 - np.float32(n1) * (pos - c1))
    gaps *= tie_end[:, :, None]
    return gaps.max(axis=1)


def _maxima_joint(ds: Sequence[np.ndarray], Z: np.ndarray, n1: int, n2: int, rows: slice) -> np.ndarray:
    """K >= 2 replicate kernel: the joint-ball membership mask of a row block
    is contracted against all replicate indicators in one matrix product.
    Counts are sums of 0/1 float32 values below 2**24, hence exact."""
    n = ds[0].shape[0]
    mask = ds[0][rows, None, :] <= ds[0][rows, :, None]
    for d in ds[1:]:
        mask &= d[rows, None, :] <= d[rows, :, None]
    m = mask.astype(np.float32).reshape(-1, n)
    c1 = m @ Z  # (rows*n, B+1)
    tot = m.sum(axis=1)[:, None]
    gaps = np.abs(np.float32(n2) * c1 - np.float32(n1) * (tot - c1))
    return gaps.reshape(-1, n, Z.shape[1]).max(axis=1)


def _mks_stats_for_labels(
    ds: Sequence[np.ndarray], Z: np.ndarray, n1: int, n2: int, workers: int | None
) -> np.ndarray:
    """Statistic for every label column of Z, evaluated by the batched kernels."""
    n = ds[0].shape[0]
    ncols = Z.shape[1]
    block = max(1, _KERNEL_BLOCK_CELLS // (n * ncols))
    maxima = np.empty((n, ncols), dtype=np.float32)
    kernel = _maxima_single if len(ds) == 1 else _maxima_joint
    arg = ds[0] if len(ds) == 1 else ds

    def run_block(s: int) -> None:
        rows = slice(s, min(s + block, n))
        maxima[rows] = kernel(arg, Z, n1, n2, rows)

    starts = list(range(0, n, block))
    if workers is None or workers <= 1 or len(starts) == 1:
        for s in starts:
            run_block(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(run_block, s) for s in starts]:
                fut.result()

    s1 = (maxima * Z).sum(axis=0, dtype=np.float64)
    s2 = (maxima * (1.0 - Z)).sum(axis=0, dtype=np.float64)
    return s1 / (n1 * n1 * n2) + s2 / (n1 * n2 * n2)


def mks_test(
    layout: TwoSampleLayout,
    B: int = 399,
    seed: int = 0,
    *,
    workers: int | None = None,
    keep_null: bool = True,
) -> TestResult:
    """Two-sample permutation test on the symmetrized divergence.

    Replicates re-partition the pooled labels while the distance matrices
    stay fixed; replicate b draws from substream(seed, b), so the result is
    reproducible for any worker count.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    if layout.n1 * layout.n2 >= 2**24:
        # gap numerators must stay exact in float32
        raise ValueError("group sizes too large for the exact replicate kernel")
    Z = _label_matrix(layout.n, layout.n1, B, seed)
    stats = _mks_stats_for_labels(
        layout.pooled.distance_arrays(), Z, layout.n1, layout.n2, workers
    )
    p = permutation_pvalue(stats[0], stats[1:])
    return TestResult(
        float(stats[0]), p, B, seed, tuple(float(v) for v in stats[1:]) if keep_null else None
    )
