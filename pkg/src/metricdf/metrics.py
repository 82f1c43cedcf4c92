"""Distance functions for metric-space-valued objects.

The object types are thin immutable wrappers around numpy arrays that check
their defining invariants on construction.  Every distance in this module is
symmetric, nonnegative and zero on identical inputs; ``pairwise_matrix``
assembles any of them into a validated :class:`DistanceMatrix`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SpdMatrix",
    "ShapeObject",
    "FunctionalCurve",
    "DistanceMatrix",
    "MetricEvaluationError",
    "lp_distance",
    "cholesky_distance",
    "air_distance",
    "riemannian_shape_distance",
    "sphere_geodesic",
    "l2_distance",
    "product_distance",
    "pairwise_matrix",
    "resolve_metric",
    "METRIC_NAMES",
]

SPD_SYMMETRY_TOL = 1e-10
UNIT_NORM_TOL = 1e-8

# block of rows handled by one pairwise_matrix task; fixed so the work split
# (and hence behaviour) never depends on the worker count
_PAIRWISE_ROW_BLOCK = 32


class MetricEvaluationError(RuntimeError):
    """A metric raised on a specific pair; carries the offending indices."""

    def __init__(self, i: int, j: int, cause: BaseException):
        super().__init__(f"metric evaluation failed for pair ({i}, {j}): {cause}")
        self.pair = (i, j)


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive definite matrix, validated on construction."""

    entries: np.ndarray

    def __post_init__(self):
        e = _readonly(self.entries)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"SPD matrix must be square, got shape {e.shape}")
        if not np.isfinite(e).all():
            raise ValueError("SPD matrix entries must be finite")
        asym = float(np.abs(e - e.T).max())
        if asym > SPD_SYMMETRY_TOL:
            raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
        if float(np.linalg.eigvalsh(e).min()) <= 0.0:
            raise ValueError("matrix is not positive definite")
        object.__setattr__(self, "entries", e)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ShapeObject:
    """Ordered two-dimensional landmarks on a closed outline (m >= 3)."""

    landmarks: np.ndarray

    def __post_init__(self):
        lm = _readonly(self.landmarks)
        if lm.ndim != 2 or lm.shape[1] != 2:
            raise ValueError(f"landmarks must be an (m, 2) array, got shape {lm.shape}")
        if lm.shape[0] < 3:
            raise ValueError("a shape needs at least 3 landmarks")
        if not np.isfinite(lm).all():
            raise ValueError("landmarks must be finite")
        centered = lm - lm.mean(axis=0)
        if float(np.linalg.norm(centered)) == 0.0:
            raise ValueError("degenerate shape: all landmarks coincide")
        object.__setattr__(self, "landmarks", lm)

    @property
    def n_landmarks(self) -> int:
        return self.landmarks.shape[0]


@dataclass(frozen=True)
class FunctionalCurve:
    """Function values sampled on a strictly increasing grid."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = _readonly(self.grid)
        v = _readonly(self.values)
        if g.ndim != 1 or v.ndim != 1:
            raise ValueError("grid and values must be one-dimensional")
        if g.shape != v.shape:
            raise ValueError(f"grid length {g.size} != values length {v.size}")
        if g.size < 2:
            raise ValueError("a curve needs at least 2 grid points")
        if not (np.diff(g) > 0).all():
            raise ValueError("grid must be strictly increasing")
        if not (np.isfinite(g).all() and np.isfinite(v).all()):
            raise ValueError("curve data must be finite")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise-distance matrix with zero diagonal."""

    d: np.ndarray

    def __post_init__(self):
        d = _readonly(self.d)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        if not np.isfinite(d).all():
            raise ValueError("distance matrix entries must be finite")
        bad = np.argwhere(d != d.T)
        if bad.size:
            i, j = bad[0]
            raise ValueError(
                f"distance matrix is not symmetric: d[{i}][{j}]={d[i, j]!r} "
                f"!= d[{j}][{i}]={d[j, i]!r}"
            )
        nz = np.flatnonzero(np.diagonal(d))
        if nz.size:
            i = nz[0]
            raise ValueError(f"distance matrix diagonal must be zero: d[{i}][{i}]={d[i, i]!r}")
        neg = np.argwhere(d < 0)
        if neg.size:
            i, j = neg[0]
            raise ValueError(f"distances must be nonnegative: d[{i}][{j}]={d[i, j]!r}")
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]


def _spd_entries(p) -> np.ndarray:
    return p.entries if isinstance(p, SpdMatrix) else np.asarray(p, dtype=float)


def _shape_landmarks(s) -> np.ndarray:
    return s.landmarks if isinstance(s, ShapeObject) else np.asarray(s, dtype=float)


def lp_distance(x, y, p: float = 2.0) -> float:
    """l_p norm of x - y for vectors of equal length, p >= 1."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    if xv.shape != yv.shape:
        raise ValueError(f"length mismatch: {xv.shape} vs {yv.shape}")
    diff = np.abs(xv - yv)
    if math.isinf(p):
        return float(diff.max())
    if p == 2.0:
        return float(np.sqrt((diff * diff).sum()))
    if p == 1.0:
        return float(diff.sum())
    return float((diff**p).sum() ** (1.0 / p))


def cholesky_distance(p1, p2) -> float:
    """Frobenius distance between lower Cholesky factors of two SPD matrices.

    The factor convention (lower triangular, strictly positive diagonal) makes
    the factor unique, so the value is well defined.
    """
    a, b = _spd_entries(p1), _spd_entries(p2)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    la = np.linalg.cholesky(a)
    lb = np.linalg.cholesky(b)
    return float(np.linalg.norm(la - lb))


def air_distance(p1, p2) -> float:
    """Affine-invariant Riemannian distance ||log(P1^{-1/2} P2 P1^{-1/2})||_F.

    The principal matrix logarithm is taken through the symmetric
    eigendecomposition: eigenvalues are logged, the basis is kept.  Invariant
    under simultaneous congruence P -> M P M^T for invertible M.
    """
    a, b = _spd_entries(p1), _spd_entries(p2)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    w, v = np.linalg.eigh(a)
    if w.min() <= 0:
        raise ValueError("first argument is not positive definite")
    inv_sqrt = (v / np.sqrt(w)) @ v.T
    c = inv_sqrt @ b @ inv_sqrt
    c = (c + c.T) / 2
    ev = np.linalg.eigvalsh(c)
    if ev.min() <= 0:
        raise ValueError("second argument is not positive definite")
    return float(np.sqrt((np.log(ev) ** 2).sum()))


def _preshape(lm: np.ndarray) -> np.ndarray:
    centered = lm - lm.mean(axis=0)
    norm = np.linalg.norm(centered)
    if norm == 0.0:
        raise ValueError("degenerate shape: zero centered norm")
    return centered / norm


def riemannian_shape_distance(s1, s2) -> float:
    """Riemannian shape distance between two planar landmark configurations.

    Each shape is reduced to its preshape (centered, unit Frobenius norm);
    the distance is arccos of the sum of singular values of H2^T H1, i.e. the
    optimal trace alignment over all orthogonal 2x2 matrices, reflections
    included.  Invariant to translation, positive scaling, rotation and
    reflection of either argument; the value lies in [0, pi/2].

    Evaluated through the aligned residual, arccos(s) = 2*arcsin(r/2) with
    r^2 = 2 - 2s, which stays accurate when the preshapes nearly coincide;
    a canonical argument order makes the value bitwise symmetric.
    """
    a, b = _shape_landmarks(s1), _shape_landmarks(s2)
    if a.shape != b.shape:
        raise ValueError(f"landmark count mismatch: {a.shape} vs {b.shape}")
    h1 = _preshape(a)
    h2 = _preshape(b)
    if h2.tobytes() < h1.tobytes():
        h1, h2 = h2, h1
    u, _, vt = np.linalg.svd(h2.T @ h1)
    residual = h1 @ (vt.T @ u.T) - h2  # optimal orthogonal alignment of h1 onto h2
    r = np.sqrt((residual * residual).sum())
    return float(2.0 * np.arcsin(np.clip(r / 2.0, 0.0, 1.0)))


def sphere_geodesic(x, y) -> float:
    """Great-circle distance arccos(<x, y>) between unit vectors."""
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    if xv.shape != yv.shape:
        raise ValueError(f"length mismatch: {xv.shape} vs {yv.shape}")
    for name, v in (("x", xv), ("y", yv)):
        if abs(np.linalg.norm(v) - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"{name} is not a unit vector (norm {np.linalg.norm(v)!r})")
    return float(np.arccos(np.clip(xv @ yv, -1.0, 1.0)))


def l2_distance(f: FunctionalCurve, g: FunctionalCurve) -> float:
    """L2 distance of two curves on a shared grid, by the trapezoidal rule."""
    if not np.array_equal(f.grid, g.grid):
        raise ValueError("curves must share the same grid")
    diff = f.values - g.values
    return float(np.sqrt(np.trapezoid(diff * diff, f.grid)))


def product_distance(e, p: float = 2.0) -> float:
    """l_p combination of a vector of per-component distances."""
    ev = np.atleast_1d(np.asarray(e, dtype=float))
    if (ev < 0).any():
        raise ValueError("component distances must be nonnegative")
    return lp_distance(ev, np.zeros_like(ev), p)


def pairwise_matrix(
    objects: Sequence,
    metric: Callable[[object, object], float],
    *,
    workers: int | None = None,
) -> DistanceMatrix:
    """Evaluate ``metric`` on every pair of objects.

    Only the lower triangle is computed and then mirrored, so the result is
    exactly symmetric; the diagonal is zero by the metric identity and is not
    evaluated.  Row blocks of fixed size are distributed across ``workers``
    threads; the output is identical for any worker count.
    """
    objs = list(objects)
    n = len(objs)
    if n < 1:
        raise ValueError("need at least one object")
    d = np.zeros((n, n), dtype=float)

    def fill(i0: int, i1: int) -> None:
        for i in range(i0, i1):
            row = d[i]
            oi = objs[i]
            for j in range(i):
                try:
                    row[j] = metric(oi, objs[j])
                except Exception as exc:  # noqa: BLE001 - annotate with pair
                    raise MetricEvaluationError(i, j, exc) from exc

    blocks = [(s, min(s + _PAIRWISE_ROW_BLOCK, n)) for s in range(0, n, _PAIRWISE_ROW_BLOCK)]
    if workers is None or workers <= 1 or len(blocks) == 1:
        for s, e in blocks:
            fill(s, e)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fill, s, e) for s, e in blocks]
            for fut in futures:
                fut.result()
    return DistanceMatrix(d + d.T)


def _metric_lp(p: float):
    def dist(x, y):
        return lp_distance(x, y, p)

    return dist


METRIC_NAMES = ("lp", "cholesky", "air", "shape-riemannian", "sphere", "l2")


def resolve_metric(name: str, p: float = 2.0) -> Callable[[object, object], float]:
    """Look up a distance function by its CLI name."""
    if name == "lp":
        return _metric_lp(p)
    if name == "cholesky":
        return cholesky_distance
    if name == "air":
        return air_distance
    if name == "shape-riemannian":
        return riemannian_shape_distance
    if name == "sphere":
        return sphere_geodesic
    if name == "l2":
        return l2_distance
    raise ValueError(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")
