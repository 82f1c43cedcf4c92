"""Synthetic data generators for the simulation scenarios.

Two object families are generated: SPD matrices obtained by sparse random
perturbations of a base Cholesky factor, and planar shapes obtained by
multiplying random factors onto the elliptic-Fourier harmonics of a base
outline and re-synthesizing landmarks.  The shipped base objects are a
deterministic geometric-decay correlation matrix and a bean-like closed
outline; both are desk-scale stand-ins for domain data that cannot be
redistributed.

All generators consume randomness exclusively from the generator they are
handed, so a dataset is a pure function of (scenario, kappa, n, seed).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .metrics import ShapeObject, SpdMatrix

__all__ = [
    "SpdScenario",
    "EfaCoefficients",
    "SCENARIO_NAMES",
    "HomogeneitySample",
    "IndependenceSample",
    "default_spd_base",
    "default_spd_scenario",
    "bean_outline",
    "perturbed_spd",
    "cauchy_values",
    "constant_values",
    "efa_coefficients",
    "efa_reconstruct",
    "perturb_coefficients",
    "uniform_perturbations",
    "random_shape",
    "scenario_library",
]

log = logging.getLogger(__name__)

DEFAULT_HARMONICS = 12
DEFAULT_LANDMARKS = 50
DEFAULT_SPD_DIM = 20

_JITTER = 1e-10
_MAX_SHAPE_REDRAWS = 100


# ---------------------------------------------------------------------------
# SPD generation
# ---------------------------------------------------------------------------

def default_spd_base(dim: int = DEFAULT_SPD_DIM) -> SpdMatrix:
    """Deterministic correlation-like base matrix A[i][j] = 0.6^|i-j|."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    idx = np.arange(dim)
    return SpdMatrix(0.6 ** np.abs(idx[:, None] - idx[None, :]))


@dataclass(frozen=True)
class SpdScenario:
    """Base matrix A, its Cholesky factor, and the perturbation magnitude q
    (the 5% quantile of |vec(A)|)."""

    base: SpdMatrix
    chol: np.ndarray
    q: float
    sparsity: int = 3

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q must be nonnegative")
        if self.sparsity < 1:
            raise ValueError("sparsity must be >= 1")
        c = np.asarray(self.chol, dtype=float)
        if np.abs(c @ c.T - self.base.entries).max() > 1e-8:
            raise ValueError("chol is not a Cholesky factor of the base matrix")
        c.setflags(write=False)
        object.__setattr__(self, "chol", c)

    @classmethod
    def from_base(cls, base: SpdMatrix, sparsity: int = 3) -> "SpdScenario":
        chol = np.linalg.cholesky(base.entries)
        q = float(np.quantile(np.abs(base.entries.ravel()), 0.05))
        return cls(base, chol, q, sparsity)


def default_spd_scenario(dim: int = DEFAULT_SPD_DIM, sparsity: int = 3) -> SpdScenario:
    return SpdScenario.from_base(default_spd_base(dim), sparsity)


def cauchy_values(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_cauchy(size)


def constant_values(value: float) -> Callable[[np.random.Generator, int], np.ndarray]:
    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, value, dtype=float)

    return sampler


def perturbed_spd(
    sc: SpdScenario,
    scale: float,
    v_sampler: Callable[[np.random.Generator, int], np.ndarray],
    rng: np.random.Generator,
) -> SpdMatrix:
    """Random SPD draw (L + scale*q*W)(L + scale*q*W)^T.

    W has ``sc.sparsity`` nonzero entries at positions sampled uniformly
    without replacement from the lower triangle (diagonal included), with
    values from ``v_sampler``; positions are redrawn on every call.  The Gram
    product is re-symmetrized, and if it comes out numerically singular a
    diagonal jitter (1e-10, escalated if needed) restores definiteness; the
    event is logged.
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    dim = sc.base.dim
    rows, cols = np.tril_indices(dim)
    pos = rng.choice(rows.size, size=sc.sparsity, replace=False)
    vals = np.asarray(v_sampler(rng, sc.sparsity), dtype=float)
    w = np.zeros((dim, dim))
    w[rows[pos], cols[pos]] = vals
    m = sc.chol + scale * sc.q * w
    g = m @ m.T
    g = (g + g.T) / 2
    jitter = _JITTER
    for _ in range(8):
        if np.linalg.eigvalsh(g).min() > 0:
            return SpdMatrix(g)
        log.warning("singular perturbed SPD draw; adding %.1e jitter", jitter)
        g = g + jitter * np.eye(dim)
        jitter *= 100
    raise ValueError("could not restore positive definiteness by jitter")


# ---------------------------------------------------------------------------
# Elliptic Fourier analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EfaCoefficients:
    """Elliptic-Fourier representation of a closed outline.

    ``harmonics`` holds one (a, b, c, d) quadruple per harmonic; x(t) uses
    (a, b) and y(t) uses (c, d); ``perimeter`` is the total parameter length T.
    """

    a0: float
    c0: float
    harmonics: np.ndarray
    perimeter: float

    def __post_init__(self):
        h = np.array(self.harmonics, dtype=float)
        if h.ndim != 2 or h.shape[1] != 4 or h.shape[0] < 1:
            raise ValueError(f"harmonics must be an (N, 4) array, got shape {h.shape}")
        if not self.perimeter > 0:
            raise ValueError("perimeter must be positive")
        h.setflags(write=False)
        object.__setattr__(self, "harmonics", h)

    @property
    def n_harmonics(self) -> int:
        return self.harmonics.shape[0]


def efa_coefficients(
    outline: ShapeObject,
    n_harmonics: int = DEFAULT_HARMONICS,
    spacing: str = "chord",
) -> EfaCoefficients:
    """Closed-form harmonic coefficients of a closed polygonal outline.

    The outline is traversed as a closed polygon.  With ``spacing="chord"``
    the parameter advances by chord length (the standard convention); with
    ``spacing="uniform"`` every segment advances by T/m, which reproduces a
    sampled pure harmonic exactly.  The constant terms a0, c0 are twice the
    path-average of x and y.
    """
    if n_harmonics < 1:
        raise ValueError("need at least one harmonic")
    if spacing not in ("chord", "uniform"):
        raise ValueError(f"unknown spacing {spacing!r}")
    pts = outline.landmarks
    m = pts.shape[0]
    closed = np.vstack([pts, pts[:1]])
    seg = np.diff(closed, axis=0)  # (m, 2)
    chord = np.sqrt((seg**2).sum(axis=1))
    perimeter = float(chord.sum())
    if perimeter <= 0:
        raise ValueError("outline has zero perimeter")
    if (chord == 0).any():
        raise ValueError("outline contains a zero-length segment")
    dt = chord if spacing == "chord" else np.full(m, perimeter / m)
    total = float(dt.sum())
    t = np.concatenate([[0.0], np.cumsum(dt)])

    a0 = 2.0 / total * float(((closed[:-1, 0] + closed[1:, 0]) / 2 * dt).sum())
    c0 = 2.0 / total * float(((closed[:-1, 1] + closed[1:, 1]) / 2 * dt).sum())

    slopes = seg / dt[:, None]  # piecewise-constant derivative
    h = np.arange(1, n_harmonics + 1)[:, None]
    ang = 2 * np.pi * h * t[None, :] / total  # (N, m+1)
    dcos = np.cos(ang[:, 1:]) - np.cos(ang[:, :-1])
    dsin = np.sin(ang[:, 1:]) - np.sin(ang[:, :-1])
    k = total / (2 * np.pi**2 * h.ravel() ** 2)
    harmonics = np.column_stack(
        [
            k * (dcos @ slopes[:, 0]),
            k * (dsin @ slopes[:, 0]),
            k * (dcos @ slopes[:, 1]),
            k * (dsin @ slopes[:, 1]),
        ]
    )
    return EfaCoefficients(a0, c0, harmonics, total)


def efa_reconstruct(coef: EfaCoefficients, m: int = DEFAULT_LANDMARKS) -> ShapeObject:
    """Synthesize m landmarks by evaluating the series at t = j*T/m."""
    if m < 3:
        raise ValueError("need at least 3 landmarks")
    t = np.arange(m) * coef.perimeter / m
    h = np.arange(1, coef.n_harmonics + 1)[:, None]
    ang = 2 * np.pi * h * t[None, :] / coef.perimeter  # (N, m)
    ca, sa = np.cos(ang), np.sin(ang)
    x = coef.a0 / 2 + coef.harmonics[:, 0] @ ca + coef.harmonics[:, 1] @ sa
    y = coef.c0 / 2 + coef.harmonics[:, 2] @ ca + coef.harmonics[:, 3] @ sa
    return ShapeObject(np.column_stack([x, y]))


def perturb_coefficients(coef: EfaCoefficients, factors) -> EfaCoefficients:
    """Multiply an (N, 4) factor array onto the harmonic quadruples."""
    f = np.asarray(factors, dtype=float)
    if f.shape != coef.harmonics.shape:
        raise ValueError(f"factors must have shape {coef.harmonics.shape}, got {f.shape}")
    return EfaCoefficients(coef.a0, coef.c0, coef.harmonics * f, coef.perimeter)


def uniform_perturbations(
    low: float = 0.8,
    high: float = 1.2,
    first: tuple[float, float] | None = None,
) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Factor sampler drawing i.i.d. U[low, high]; the first harmonic's
    quadruple may use its own interval."""

    def sampler(rng: np.random.Generator, n_harmonics: int) -> np.ndarray:
        f = rng.uniform(low, high, size=(n_harmonics, 4))
        if first is not None:
            f[0] = rng.uniform(first[0], first[1], size=4)
        return f

    return sampler


def _scale_rotation(s: float, theta: float) -> np.ndarray:
    return s * np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]]).T


def random_shape(
    coef: EfaCoefficients,
    perturb_sampler: Callable[[np.random.Generator, int], np.ndarray],
    m: int = DEFAULT_LANDMARKS,
    rng: np.random.Generator | None = None,
) -> ShapeObject:
    """Random shape draw: perturb the harmonics, reconstruct m landmarks,
    then apply a random rotation theta ~ U(0, 2*pi) and scale s ~ U(0, 20).

    Degenerate draws (all landmarks coincident) are rejected and redrawn, at
    most 100 times.
    """
    if rng is None:
        raise ValueError("an explicit random generator is required")
    for _ in range(_MAX_SHAPE_REDRAWS):
        factors = np.asarray(perturb_sampler(rng, coef.n_harmonics), dtype=float)
        q = efa_reconstruct(perturb_coefficients(coef, factors), m)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        s = rng.uniform(0.0, 20.0)
        lm = q.landmarks @ _scale_rotation(s, theta).T
        centered = lm - lm.mean(axis=0)
        if np.linalg.norm(centered) > 0:
            return ShapeObject(lm)
    raise ValueError("could not draw a non-degenerate shape in 100 attempts")


def bean_outline(m: int = DEFAULT_LANDMARKS) -> ShapeObject:
    """Deterministic bean-like closed outline with m landmarks.

    Star-shaped radial curve, so the polygon is simple; sampled uniformly in
    angle, which keeps the chords nearly equal.
    """
    theta = 2 * np.pi * np.arange(m) / m
    r = 1.0 + 0.35 * np.sin(theta) + 0.18 * np.cos(2 * theta)
    return ShapeObject(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))


# ---------------------------------------------------------------------------
# Scenario library
# ---------------------------------------------------------------------------

SCENARIO_NAMES = ("spd-hom", "shape-hom", "spd-ind", "shape-ind")


@dataclass(frozen=True)
class HomogeneitySample:
    """Two groups of objects plus the metric they should be compared under."""

    group1: tuple
    group2: tuple
    metric_name: str


@dataclass(frozen=True)
class IndependenceSample:
    """K aligned component samples with one metric name per component."""

    components: tuple[tuple, ...]
    metric_names: tuple[str, ...]


def scenario_library(
    name: str,
    kappa: float,
    n: int,
    rng: np.random.Generator,
    *,
    spd_dim: int = DEFAULT_SPD_DIM,
    n_harmonics: int = DEFAULT_HARMONICS,
    n_landmarks: int = DEFAULT_LANDMARKS,
    metric: str | None = None,
):
    """Draw one synthetic dataset.

    spd-hom    X ~ P(q W_V), Y ~ P(kappa q W_V), V Cauchy; n per group.
    shape-hom  group 2's first-harmonic factors ~ U[0.8-kappa, 1.2+kappa],
               all other factors ~ U[0.8, 1.2]; n per group.
    spd-ind    X, Y, eps i.i.d. N(0,1); Z ~ P(q W_{kappa(X+Y)+eps});
               triple (X, Y, Z), absolute difference on the scalars.
    shape-ind  X', Y' ~ Bern(kappa), X'', Y'' ~ Bern(0.5);
               X = X' + 1{kappa=0} X'', Y likewise;
               Z = Z1 if kappa = 0 else (Z1 if X = Y else Z2), where Z1 has
               first-harmonic factors ~ U[0, 2] and Z2 is baseline.

    ``metric`` overrides the object metric (cholesky/air for SPD scenarios,
    shape-riemannian for shape scenarios).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if name == "spd-hom":
        sc = default_spd_scenario(spd_dim)
        g1 = tuple(perturbed_spd(sc, 1.0, cauchy_values, rng) for _ in range(n))
        g2 = tuple(perturbed_spd(sc, kappa, cauchy_values, rng) for _ in range(n))
        return HomogeneitySample(g1, g2, metric or "cholesky")
    if name == "shape-hom":
        coef = efa_coefficients(bean_outline(n_landmarks), n_harmonics)
        base = uniform_perturbations()
        shifted = uniform_perturbations(first=(0.8 - kappa, 1.2 + kappa))
        g1 = tuple(random_shape(coef, base, n_landmarks, rng) for _ in range(n))
        g2 = tuple(random_shape(coef, shifted, n_landmarks, rng) for _ in range(n))
        return HomogeneitySample(g1, g2, metric or "shape-riemannian")
    if name == "spd-ind":
        sc = default_spd_scenario(spd_dim)
        xs, ys, zs = [], [], []
        for _ in range(n):
            x, y, eps = rng.normal(size=3)
            z = perturbed_spd(sc, 1.0, constant_values(kappa * (x + y) + eps), rng)
            xs.append(np.array([x]))
            ys.append(np.array([y]))
            zs.append(z)
        return IndependenceSample(
            (tuple(xs), tuple(ys), tuple(zs)), ("lp", "lp", metric or "cholesky")
        )
    if name == "shape-ind":
        coef = efa_coefficients(bean_outline(n_landmarks), n_harmonics)
        z1_sampler = uniform_perturbations(first=(0.0, 2.0))
        z2_sampler = uniform_perturbations()
        xs, ys, zs = [], [], []
        for _ in range(n):
            xp = float(rng.random() < kappa)
            yp = float(rng.random() < kappa)
            xpp = float(rng.random() < 0.5)
            ypp = float(rng.random() < 0.5)
            x = xp + (xpp if kappa == 0 else 0.0)
            y = yp + (ypp if kappa == 0 else 0.0)
            if kappa == 0 or x == y:
                z = random_shape(coef, z1_sampler, n_landmarks, rng)
            else:
                z = random_shape(coef, z2_sampler, n_landmarks, rng)
            xs.append(np.array([x]))
            ys.append(np.array([y]))
            zs.append(z)
        return IndependenceSample(
            (tuple(xs), tuple(ys), tuple(zs)), ("lp", "lp", metric or "shape-riemannian")
        )
    raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}")
