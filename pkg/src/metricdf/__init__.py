"""Nonparametric inference for metric-space data via distribution functions
of distances: EMDF computation, a two-sample homogeneity test, a mutual
independence test, synthetic generators and a Monte Carlo power harness.
"""
from .emdf import EmdfMatrix, MultiDistance, emdf_eval, emdf_matrix, gc_deviation
from .homogeneity import TwoSampleLayout, mks_directed, mks_statistic, mks_test
from .independence import ma_statistic, ma_test
from .metrics import (
    DistanceMatrix,
    FunctionalCurve,
    ShapeObject,
    SpdMatrix,
    air_distance,
    cholesky_distance,
    l2_distance,
    lp_distance,
    pairwise_matrix,
    product_distance,
    riemannian_shape_distance,
    sphere_geodesic,
)
from .permutation import (
    PowerCell,
    PowerTable,
    TestResult,
    permutation_pvalue,
    power_sweep,
    run_permutation_test,
    substream,
)

__version__ = "0.1.0"

__all__ = [
    "DistanceMatrix",
    "EmdfMatrix",
    "FunctionalCurve",
    "MultiDistance",
    "PowerCell",
    "PowerTable",
    "ShapeObject",
    "SpdMatrix",
    "TestResult",
    "TwoSampleLayout",
    "air_distance",
    "cholesky_distance",
    "emdf_eval",
    "emdf_matrix",
    "gc_deviation",
    "l2_distance",
    "lp_distance",
    "ma_statistic",
    "ma_test",
    "mks_directed",
    "mks_statistic",
    "mks_test",
    "pairwise_matrix",
    "permutation_pvalue",
    "power_sweep",
    "product_distance",
    "riemannian_shape_distance",
    "run_permutation_test",
    "sphere_geodesic",
    "substream",
]
