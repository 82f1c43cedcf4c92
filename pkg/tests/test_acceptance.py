"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The calibration and
power criteria (4 and 5) are Monte Carlo studies and take a couple of
minutes each; everything else is fast.
"""
from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np
import pytest

from metricdf import io as mio
from metricdf.cli import EXIT_REJECT, holm_adjust, main, run_power_study
from metricdf.emdf import MultiDistance, emdf_matrix, gc_deviation
from metricdf.homogeneity import TwoSampleLayout, mks_statistic, mks_test
from metricdf.independence import ma_statistic, ma_test
from metricdf.metrics import (
    DistanceMatrix,
    ShapeObject,
    SpdMatrix,
    air_distance,
    lp_distance,
    pairwise_matrix,
    riemannian_shape_distance,
)
from metricdf.permutation import derive_seed, substream

from _oracles import naive_emdf, random_multidistance


@contextmanager
def criterion(num: int, name: str):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {num} ({name}): FAIL")
        raise
    print(f"\nACCEPTANCE {num} ({name}): PASS")


def test_criterion_1_holm_reproduction():
    with criterion(1, "Holm reproduction"):
        pvals = [0.001, 0.241, 0.039, 0.004, 0.001, 0.042, 0.588, 0.846, 0.074, 0.493]
        expected = [0.010, 0.964, 0.273, 0.032, 0.010, 0.273, 1.000, 1.000, 0.370, 1.000]
        holm_adjust(pvals)  # warm up
        start = time.perf_counter()
        adjusted = holm_adjust(pvals)
        elapsed = time.perf_counter() - start
        assert [round(v, 3) for v in adjusted] == expected
        assert elapsed < 1e-3


def test_criterion_2_emdf_oracle():
    with criterion(2, "EMDF oracle"):
        start = time.perf_counter()
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(2, 11))
            K = int(rng.integers(1, 4))
            md = random_multidistance(rng, n, K)
            fast = emdf_matrix(md).values
            assert np.array_equal(fast, naive_emdf(md.distance_arrays()))
        assert time.perf_counter() - start < 5.0


def test_criterion_3_hand_enumeration_fixtures():
    with criterion(3, "hand-enumeration fixtures"):
        d = DistanceMatrix(np.array([[0.0, 1, 3], [1, 0, 2], [3, 2, 0]]))
        F = emdf_matrix(MultiDistance((d,))).values
        assert np.array_equal(F, np.array([[1, 2, 3], [2, 1, 3], [3, 2, 1]]) / 3.0)

        d2 = DistanceMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert ma_statistic(MultiDistance((d2, d2))) == 1.0 / 32

        x = np.array([0.0, 1.0, 10.0, 11.0])
        dm = DistanceMatrix(np.abs(x[:, None] - x[None, :]))
        layout = TwoSampleLayout(MultiDistance((dm,)), 2, 2)
        assert mks_statistic(layout) == 2.0


def _mks_null_rejection_rate(runs: int, seed: int, alpha: float) -> float:
    rejections = 0
    for r in range(runs):
        rng = substream(seed, 10, r)
        pooled = [rng.normal(size=5) for _ in range(60)]
        dm = pairwise_matrix(pooled, lp_distance)
        layout = TwoSampleLayout(MultiDistance((dm,)), 30, 30)
        res = mks_test(layout, B=399, seed=derive_seed(seed, 11, r), keep_null=False)
        rejections += res.p_value <= alpha
    return rejections / runs


def _ma_null_rejection_rate(runs: int, seed: int, alpha: float, n: int = 50) -> float:
    rejections = 0
    for r in range(runs):
        rng = substream(seed, 20, r)
        comps = []
        for _ in range(2):
            objs = [rng.normal(size=5) for _ in range(n)]
            comps.append(pairwise_matrix(objs, lp_distance))
        res = ma_test(
            MultiDistance(tuple(comps)), B=399, seed=derive_seed(seed, 21, r), keep_null=False
        )
        rejections += res.p_value <= alpha
    return rejections / runs


def test_criterion_4_null_calibration():
    with criterion(4, "null calibration"):
        start = time.perf_counter()
        mks_rate = _mks_null_rejection_rate(runs=500, seed=2024, alpha=0.05)
        mks_elapsed = time.perf_counter() - start
        print(f"  MKS null rejection rate: {mks_rate:.3f} ({mks_elapsed:.0f}s)")
        assert 0.02 <= mks_rate <= 0.08
        assert mks_elapsed < 180.0

        start = time.perf_counter()
        ma_rate = _ma_null_rejection_rate(runs=500, seed=2025, alpha=0.05)
        ma_elapsed = time.perf_counter() - start
        print(f"  MA null rejection rate: {ma_rate:.3f} ({ma_elapsed:.0f}s)")
        assert 0.02 <= ma_rate <= 0.08
        assert ma_elapsed < 180.0


def test_criterion_5_power_monotonicity():
    with criterion(5, "power monotonicity"):
        kappas = [1.0, 2.0, 4.0, 8.0]
        runs = 200
        table = run_power_study(
            "spd-hom", kappas, [40], runs=runs, permutations=399,
            alpha=0.05, seed=7, workers=4, spd_dim=20,
        )
        rates = [table.rate(k, 40) for k in kappas]
        print(f"  spd-hom rates over kappa {kappas}: {rates}")
        for lo, hi in zip(rates, rates[1:]):
            se = np.sqrt(max(lo * (1 - lo), 1e-12) / runs)
            assert hi >= lo - se
        assert rates[-1] >= 0.8


def test_criterion_6_glivenko_cantelli_rate():
    with criterion(6, "Glivenko-Cantelli rate"):
        uniform_mdf = lambda u, r: np.minimum(u + r, 1.0) - np.maximum(u - r, 0.0)
        start = time.perf_counter()
        means = {}
        for n in (100, 1600):
            devs = [
                gc_deviation(substream(99, n, s).uniform(size=n), uniform_mdf)
                for s in range(20)
            ]
            means[n] = float(np.mean(devs))
        elapsed = time.perf_counter() - start
        print(f"  mean deviation n=100: {means[100]:.4f}, n=1600: {means[1600]:.4f}")
        assert means[1600] < 0.6 * means[100]
        assert elapsed < 30.0


def _random_rotation(rng, reflect: bool) -> np.ndarray:
    theta = rng.uniform(0.0, 2 * np.pi)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    return rot @ np.diag([1.0, -1.0]) if reflect else rot


def _well_conditioned_matrix(rng, dim: int) -> np.ndarray:
    u, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    v, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return u @ np.diag(rng.uniform(0.5, 2.0, size=dim)) @ v


def test_criterion_7_invariance_suites():
    with criterion(7, "invariance suites"):
        rng = np.random.default_rng(77)

        for _ in range(1000):  # shape distance vs similarity transforms
            s1 = ShapeObject(rng.normal(size=(10, 2)))
            s2 = ShapeObject(rng.normal(size=(10, 2)))
            q = _random_rotation(rng, reflect=bool(rng.integers(2)))
            scale = rng.uniform(0.1, 10.0)
            shift = rng.normal(size=2) * 3.0
            t1 = ShapeObject(scale * s1.landmarks @ q.T + shift)
            assert riemannian_shape_distance(s1, t1) <= 1e-8
            assert abs(
                riemannian_shape_distance(t1, s2) - riemannian_shape_distance(s1, s2)
            ) <= 1e-8

        for _ in range(1000):  # AIR congruence invariance
            a = rng.normal(size=(4, 4))
            b = rng.normal(size=(4, 4))
            p1 = SpdMatrix(a @ a.T + 4 * np.eye(4))
            p2 = SpdMatrix(b @ b.T + 4 * np.eye(4))
            m = _well_conditioned_matrix(rng, 4)
            q1 = (m @ p1.entries @ m.T + (m @ p1.entries @ m.T).T) / 2
            q2 = (m @ p2.entries @ m.T + (m @ p2.entries @ m.T).T) / 2
            assert abs(
                air_distance(SpdMatrix(q1), SpdMatrix(q2)) - air_distance(p1, p2)
            ) <= 1e-6

        transforms = (np.sqrt, np.square, lambda x: x / (1.0 + x), lambda x: 2.0 * x)
        for trial in range(1000):  # rank invariance, exact
            t_rng = np.random.default_rng(1000 + trial)
            h = transforms[trial % len(transforms)]
            md = random_multidistance(t_rng, 10, 2)
            h_md = MultiDistance(tuple(DistanceMatrix(h(c.d)) for c in md.components))
            assert np.array_equal(emdf_matrix(h_md).values, emdf_matrix(md).values)
            layout = TwoSampleLayout(md, 5, 5)
            h_layout = TwoSampleLayout(h_md, 5, 5)
            assert mks_statistic(h_layout) == mks_statistic(layout)
            assert ma_statistic(h_md) == ma_statistic(md)

        for trial in range(1000):  # label-swap symmetry, exact
            t_rng = np.random.default_rng(5000 + trial)
            n1 = int(t_rng.integers(2, 7))
            n2 = int(t_rng.integers(2, 7))
            md = random_multidistance(t_rng, n1 + n2, 1)
            layout = TwoSampleLayout(md, n1, n2)
            order = np.concatenate([np.arange(n1, n1 + n2), np.arange(n1)])
            comps = tuple(
                DistanceMatrix(c.d[np.ix_(order, order)]) for c in md.components
            )
            swapped = TwoSampleLayout(MultiDistance(comps), n2, n1)
            assert mks_statistic(swapped) == mks_statistic(layout)


def _write_homtest_fixture(tmp_path, n_per_group: int, dim: int, seed: int):
    rng = substream(seed, 0)
    g1 = rng.normal(size=(n_per_group, dim))
    g2 = rng.normal(size=(n_per_group, dim)) + 0.3
    vec = tmp_path / "objs.csv"
    mio.write_vectors(vec, np.vstack([g1, g2]))
    labels = tmp_path / "labels.csv"
    mio.write_labels(labels, ["1"] * n_per_group + ["2"] * n_per_group)
    return vec, labels


def test_criterion_8_determinism_across_workers(tmp_path):
    with criterion(8, "worker-count determinism"):
        vec, labels = _write_homtest_fixture(tmp_path, 30, 3, seed=8)
        outputs = {}
        for workers in (1, 4):
            out = tmp_path / f"res_w{workers}.txt"
            main(["homtest", "--components", str(vec), "--metric", "lp",
                  "--labels", str(labels), "--permutations", "199", "--seed", "5",
                  "--workers", str(workers), "--out", str(out)])
            outputs[workers] = out.read_bytes()
        assert outputs[1] == outputs[4]

        power_outputs = {}
        for workers in (1, 3):
            out = tmp_path / f"power_w{workers}.csv"
            rc = main(["power", "--scenario", "spd-hom", "--kappas", "1,4", "--ns", "10",
                       "--runs", "6", "--permutations", "49", "--seed", "3",
                       "--spd-dim", "6", "--workers", str(workers), "--out", str(out)])
            assert rc == 0
            power_outputs[workers] = (
                out.read_bytes(),
                out.with_suffix(".png").read_bytes(),
            )
        assert power_outputs[1] == power_outputs[3]


def test_criterion_9_performance(tmp_path):
    with criterion(9, "replicate-kernel performance"):
        rng = substream(9, 0)
        n = 200
        comps = []
        for k in range(2):
            pts = rng.normal(size=(n, 4))
            d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
            np.fill_diagonal(d, 0.0)
            d = np.tril(d) + np.tril(d, -1).T
            path = tmp_path / f"comp{k}.csv"
            mio.write_distance_matrix(path, DistanceMatrix(d))
            comps.append(str(path))
        labels = tmp_path / "labels.csv"
        mio.write_labels(labels, ["1"] * 100 + ["2"] * 100)
        out = tmp_path / "res.txt"
        start = time.perf_counter()
        rc = main(["homtest", "--components", *comps, "--metric", "precomputed",
                   "--labels", str(labels), "--permutations", "399", "--seed", "1",
                   "--workers", "1", "--out", str(out)])
        elapsed = time.perf_counter() - start
        print(f"  homtest n1=n2=100 K=2 B=399: {elapsed:.2f}s")
        assert rc in (0, EXIT_REJECT)
        assert out.exists()
        assert elapsed < 5.0
