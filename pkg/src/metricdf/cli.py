"""Command-line surface: dist | homtest | indtest | power | simulate | holm.

Exit codes: 0 success (or test accepting at alpha), 3 test rejecting at
alpha, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as mio
from .datagen import (
    DEFAULT_SPD_DIM,
    HomogeneitySample,
    IndependenceSample,
    SCENARIO_NAMES,
    bean_outline,
    default_spd_base,
    scenario_library,
)
from .emdf import MultiDistance
from .homogeneity import TwoSampleLayout, mks_test
from .independence import ma_test
from .metrics import (
    DistanceMatrix,
    MetricEvaluationError,
    pairwise_matrix,
    resolve_metric,
)
from .permutation import PowerTable, TestResult, derive_seed, substream

__all__ = [
    "main",
    "holm_adjust",
    "DatasetDescriptor",
    "ComponentSpec",
    "run_power_study",
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_DATA",
    "EXIT_REJECT",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REJECT = 3

WORKERS_ENV = "METRICDF_WORKERS"

DEFAULT_PERMUTATIONS = 399
DEFAULT_RUNS = 500
DEFAULT_ALPHA = 0.05

_METRIC_TO_TYPE = {
    "lp": "vector",
    "sphere": "vector",
    "cholesky": "spd",
    "air": "spd",
    "shape-riemannian": "shape",
    "l2": "curve",
    "precomputed": "precomputed",
    "identity-of-precomputed": "precomputed",
}
_TYPE_METRICS = {
    "vector": {"lp", "sphere"},
    "spd": {"cholesky", "air"},
    "shape": {"shape-riemannian"},
    "curve": {"l2"},
    "precomputed": {"precomputed", "identity-of-precomputed"},
}


class UsageError(Exception):
    pass


def holm_adjust(pvalues: Sequence[float]) -> list[float]:
    """Step-down multiple-testing adjustment.

    The i-th smallest p-value is multiplied by (m - i + 1); running maxima
    enforce monotonicity and values are capped at 1.  Output keeps the input
    order.  Raising any input never lowers any output.
    """
    p = np.asarray(list(pvalues), dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("need at least one p-value")
    if (p < 0).any() or (p > 1).any():
        bad = p[(p < 0) | (p > 1)][0]
        raise ValueError(f"p-value {bad!r} outside [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * (m - np.arange(m))
    adjusted = np.minimum(np.maximum.accumulate(scaled), 1.0)
    out = np.empty(m, dtype=float)
    out[order] = adjusted
    return [float(v) for v in out]


# ---------------------------------------------------------------------------
# dataset descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComponentSpec:
    path: str
    metric: str
    object_type: str
    p: float = 2.0

    def __post_init__(self):
        if self.object_type not in _TYPE_METRICS:
            raise UsageError(f"unknown object type {self.object_type!r}")
        if self.metric not in _METRIC_TO_TYPE:
            raise UsageError(f"unknown metric {self.metric!r}")
        if self.metric not in _TYPE_METRICS[self.object_type]:
            raise UsageError(
                f"metric {self.metric!r} is not defined for {self.object_type!r} objects"
            )


@dataclass(frozen=True)
class DatasetDescriptor:
    components: tuple[ComponentSpec, ...]

    @property
    def K(self) -> int:
        return len(self.components)


def _build_descriptor(args) -> DatasetDescriptor:
    paths = args.components
    metrics = args.metric
    if len(metrics) == 1 and len(paths) > 1:
        metrics = metrics * len(paths)
    if len(metrics) != len(paths):
        raise UsageError(
            f"got {len(paths)} component files but {len(metrics)} metrics"
        )
    types = getattr(args, "types", None)
    if types:
        if len(types) == 1 and len(paths) > 1:
            types = types * len(paths)
        if len(types) != len(paths):
            raise UsageError(f"got {len(paths)} component files but {len(types)} types")
    else:
        try:
            types = [_METRIC_TO_TYPE[m] for m in metrics]
        except KeyError as exc:
            raise UsageError(f"unknown metric {exc.args[0]!r}") from None
    p = getattr(args, "p", 2.0)
    return DatasetDescriptor(
        tuple(
            ComponentSpec(path, metric, otype, p)
            for path, metric, otype in zip(paths, metrics, types)
        )
    )


def _load_component(spec: ComponentSpec, workers: int | None) -> DistanceMatrix:
    if spec.object_type == "precomputed":
        return mio.read_distance_matrix(spec.path)
    if spec.object_type == "vector":
        objects = list(mio.read_vectors(spec.path))
    elif spec.object_type == "spd":
        objects = mio.read_spd_matrices(spec.path)
    elif spec.object_type == "shape":
        objects = mio.read_shapes(spec.path)
    else:
        objects = mio.read_curves(spec.path)
    return pairwise_matrix(objects, resolve_metric(spec.metric, spec.p), workers=workers)


def _load_multidistance(desc: DatasetDescriptor, workers: int | None) -> MultiDistance:
    comps = tuple(_load_component(spec, workers) for spec in desc.components)
    ns = {c.n for c in comps}
    if len(ns) != 1:
        raise mio.DataFormatError(f"components disagree on n: {sorted(ns)}")
    return MultiDistance(comps)


def _combine_components(md: MultiDistance, p: float) -> MultiDistance:
    """Collapse K component matrices into one product metric (entrywise l_p)."""
    stack = np.stack(md.distance_arrays())
    if np.isinf(p):
        d = stack.max(axis=0)
    else:
        d = (stack**p).sum(axis=0) ** (1.0 / p)
    np.fill_diagonal(d, 0.0)
    d = np.tril(d) + np.tril(d, -1).T
    return MultiDistance((DistanceMatrix(d),))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _resolve_workers(args) -> int | None:
    if getattr(args, "workers", None) is not None:
        return args.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{WORKERS_ENV}={env!r} is not an integer") from None
    return None


def _component_out_paths(out: str, k: int) -> list[Path]:
    base = Path(out)
    if k == 1 and base.suffix == ".csv":
        return [base]
    stem = str(base)[: -len(".csv")] if base.suffix == ".csv" else str(base)
    return [Path(f"{stem}_{i + 1}.csv") for i in range(k)]


def cmd_dist(args) -> int:
    desc = _build_descriptor(args)
    workers = _resolve_workers(args)
    comps = [_load_component(spec, workers) for spec in desc.components]
    ns = {c.n for c in comps}
    if len(ns) != 1:
        raise mio.DataFormatError(f"components disagree on n: {sorted(ns)}")
    paths = _component_out_paths(args.out, len(comps))
    for path, comp in zip(paths, comps):
        mio.write_distance_matrix(path, comp)
        print(f"wrote {path} ({comp.n} x {comp.n})")
    return EXIT_OK


def _report_test(result: TestResult, alpha: float, out: str | None) -> int:
    record = mio.format_test_result(result)
    sys.stdout.write(record)
    reject = result.p_value <= alpha
    print(f"alpha: {mio.fmt_float(alpha)}")
    print(f"decision: {'reject' if reject else 'accept'}")
    if out:
        mio.write_test_result(out, result)
    return EXIT_REJECT if reject else EXIT_OK


def cmd_homtest(args) -> int:
    desc = _build_descriptor(args)
    workers = _resolve_workers(args)
    md = _load_multidistance(desc, workers)
    labels = mio.read_labels(args.labels)
    if args.combine and md.K > 1:
        md = _combine_components(md, args.p)
    layout = TwoSampleLayout.from_labels(md, labels)
    result = mks_test(layout, args.permutations, args.seed, workers=workers, keep_null=False)
    return _report_test(result, args.alpha, args.out)


def cmd_indtest(args) -> int:
    desc = _build_descriptor(args)
    if desc.K < 2:
        raise UsageError("independence testing needs at least 2 components")
    workers = _resolve_workers(args)
    md = _load_multidistance(desc, workers)
    result = ma_test(md, args.permutations, args.seed, workers=workers, keep_null=False)
    return _report_test(result, args.alpha, args.out)


def run_power_study(
    scenario_name: str,
    kappas: Sequence[float],
    ns: Sequence[int],
    runs: int,
    permutations: int,
    alpha: float,
    seed: int,
    *,
    workers: int | None = None,
    metric: str | None = None,
    spd_dim: int = DEFAULT_SPD_DIM,
) -> PowerTable:
    """Monte Carlo power study over the synthetic scenario library.

    Run r of cell (kappa, n) draws its dataset from substream(seed, cell, r)
    and its permutation seed from a sibling stream, so the whole table is a
    pure function of (scenario, grids, runs, permutations, seed).
    """
    from .permutation import power_sweep

    kappas = [float(k) for k in kappas]
    ns = [int(n) for n in ns]

    def scenario(kappa: float, n: int, r: int):
        ci, ni = kappas.index(kappa), ns.index(n)
        rng = substream(seed, 1, ci, ni, r)
        return scenario_library(scenario_name, kappa, n, rng, spd_dim=spd_dim, metric=metric)

    def run_test(sample, kappa: float, n: int, r: int) -> TestResult:
        ci, ni = kappas.index(kappa), ns.index(n)
        tseed = derive_seed(seed, 2, ci, ni, r)
        if isinstance(sample, HomogeneitySample):
            objs = list(sample.group1) + list(sample.group2)
            dm = pairwise_matrix(objs, resolve_metric(sample.metric_name))
            layout = TwoSampleLayout(
                MultiDistance((dm,)), len(sample.group1), len(sample.group2)
            )
            return mks_test(layout, permutations, tseed, keep_null=False)
        comps = tuple(
            pairwise_matrix(list(objs), resolve_metric(name))
            for objs, name in zip(sample.components, sample.metric_names)
        )
        return ma_test(MultiDistance(comps), permutations, tseed, keep_null=False)

    return power_sweep(scenario, run_test, alpha, runs, kappas, ns, workers=workers)


def cmd_power(args) -> int:
    if args.scenario not in SCENARIO_NAMES:
        raise UsageError(f"unknown scenario {args.scenario!r}; expected one of {SCENARIO_NAMES}")
    kappas = [float(tok) for tok in args.kappas.split(",") if tok]
    ns = [int(tok) for tok in args.ns.split(",") if tok]
    if not kappas or not ns:
        raise UsageError("empty kappa or n grid")
    start = time.perf_counter()
    table = run_power_study(
        args.scenario,
        kappas,
        ns,
        args.runs,
        args.permutations,
        args.alpha,
        args.seed,
        workers=_resolve_workers(args),
        metric=args.metric,
        spd_dim=args.spd_dim,
    )
    elapsed = time.perf_counter() - start
    mio.write_power_table(args.out, table)
    print(f"wrote {args.out}")
    if not args.no_plot:
        from .plotting import render_power_curves

        fig_path = str(Path(args.out).with_suffix(".png"))
        render_power_curves(table, fig_path, alpha=args.alpha, title=args.scenario)
        print(f"wrote {fig_path}")
    for cell in table.cells:
        print(
            f"kappa={cell.kappa:g} n={cell.n}: rate={cell.rate:.3f}"
            + (f" [error: {cell.error}]" if cell.error else "")
        )
    print(f"wall_time_seconds: {elapsed:.3f}")
    return EXIT_OK


def _base_checksum(scenario: str, spd_dim: int) -> str:
    if scenario.startswith("spd"):
        base = default_spd_base(spd_dim).entries
        payload = ",".join(mio.fmt_float(v) for v in base.ravel())
    else:
        payload = ",".join(mio.fmt_float(v) for v in bean_outline().landmarks.ravel())
    return hashlib.sha256(payload.encode()).hexdigest()


def cmd_simulate(args) -> int:
    if args.scenario not in SCENARIO_NAMES:
        raise UsageError(f"unknown scenario {args.scenario!r}; expected one of {SCENARIO_NAMES}")
    rng = substream(args.seed, 0)
    sample = scenario_library(
        args.scenario, args.kappa, args.n, rng, spd_dim=args.spd_dim
    )
    prefix = args.out
    written: list[str] = []

    def write_objects(path: str, objects) -> None:
        first = objects[0]
        if isinstance(first, np.ndarray):
            mio.write_vectors(path, np.vstack(objects))
        elif hasattr(first, "landmarks"):
            mio.write_shapes(path, objects)
        else:
            mio.write_spd_matrices(path, objects)
        written.append(path)

    if isinstance(sample, HomogeneitySample):
        write_objects(f"{prefix}_component1.csv", list(sample.group1) + list(sample.group2))
        labels = ["1"] * len(sample.group1) + ["2"] * len(sample.group2)
        mio.write_labels(f"{prefix}_labels.csv", labels)
        written.append(f"{prefix}_labels.csv")
        print(f"metric: {sample.metric_name}")
    else:
        for k, (objs, name) in enumerate(zip(sample.components, sample.metric_names), start=1):
            write_objects(f"{prefix}_component{k}.csv", list(objs))
            print(f"metric[{k}]: {name}")
    meta = f"{prefix}_meta.txt"
    mio.write_scenario_metadata(
        meta, args.scenario, args.kappa, args.n, args.seed,
        _base_checksum(args.scenario, args.spd_dim),
    )
    written.append(meta)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_holm(args) -> int:
    values = [float(tok) for tok in args.pvalues]
    if args.infile:
        text = Path(args.infile).read_text()
        for ln in text.splitlines():
            values.extend(float(tok) for tok in ln.replace(",", " ").split())
    if not values:
        raise UsageError("no p-values given")
    adjusted = holm_adjust(values)
    lines = [mio.fmt_float(v) for v in adjusted]
    print("\n".join(lines))
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_test_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--permutations", type=int, default=DEFAULT_PERMUTATIONS,
                   help=f"permutation replications (default {DEFAULT_PERMUTATIONS})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker threads (default ${WORKERS_ENV} or serial)")
    p.add_argument("--out", default=None, help="write the result record here")


def _add_component_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--components", nargs="+", required=True, metavar="FILE")
    p.add_argument("--metric", nargs="+", required=True,
                   help="per-component metric: lp cholesky air shape-riemannian "
                        "sphere l2 precomputed")
    p.add_argument("--types", nargs="+", default=None,
                   help="per-component object type (inferred from the metric "
                        "when omitted): vector spd shape curve precomputed")
    p.add_argument("--p", type=float, default=2.0,
                   help="exponent for lp metrics and product combination (default 2)")


def build_parser() -> _Parser:
    parser = _Parser(prog="metricdf",
                     description="Distribution-function based tests for metric-space data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="compute per-component distance matrices")
    _add_component_flags(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True, help="output CSV path or prefix")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("homtest", help="two-sample homogeneity test")
    _add_component_flags(p)
    p.add_argument("--labels", required=True, help="group label file, one mark per row")
    p.add_argument("--combine", action="store_true",
                   help="collapse components into one product metric (exponent --p)")
    _add_test_flags(p)
    p.set_defaults(func=cmd_homtest)

    p = sub.add_parser("indtest", help="mutual independence test")
    _add_component_flags(p)
    _add_test_flags(p)
    p.set_defaults(func=cmd_indtest)

    p = sub.add_parser("power", help="Monte Carlo power study on a synthetic scenario")
    p.add_argument("--scenario", required=True, help="/".join(SCENARIO_NAMES))
    p.add_argument("--kappas", required=True, help="comma-separated kappa grid")
    p.add_argument("--ns", required=True, help="comma-separated sample-size grid")
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS,
                   help=f"Monte Carlo runs per cell (default {DEFAULT_RUNS})")
    p.add_argument("--permutations", type=int, default=DEFAULT_PERMUTATIONS)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--metric", default=None, help="override the scenario's object metric")
    p.add_argument("--spd-dim", type=int, default=DEFAULT_SPD_DIM)
    p.add_argument("--out", required=True, help="power table CSV path")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("simulate", help="draw one synthetic dataset to CSV files")
    p.add_argument("--scenario", required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spd-dim", type=int, default=DEFAULT_SPD_DIM)
    p.add_argument("--out", required=True, help="output file prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("holm", help="Holm step-down p-value adjustment")
    p.add_argument("pvalues", nargs="*", help="p-values in test order")
    p.add_argument("--in", dest="infile", default=None, help="read p-values from a file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_holm)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"metricdf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MetricEvaluationError as exc:
        print(f"metricdf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (mio.DataFormatError, ValueError, OSError) as exc:
        print(f"metricdf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
