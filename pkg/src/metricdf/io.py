"""Readers and writers for the on-disk formats.

All floats are written with 17 significant digits, which round-trips IEEE
doubles exactly; every writer's output parses back to an equal value.

Formats:
  vectors           one comma-separated row per vector
  SPD matrices      one row per matrix: dim, then dim*dim row-major entries
  shapes            blocks of "x,y" rows, one block per shape, blank-line
                    separated
  curves            blocks of "t,value" rows, shared grid required downstream
  distance matrix   plain n x n CSV, no header
  EMDF matrix       plain n x n CSV, no header
  labels            one group mark per row
  test result       "key: value" lines (statistic, p_value, replications, seed)
  power table       CSV with header kappa,n,rejections,runs,rate
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .emdf import EmdfMatrix
from .metrics import DistanceMatrix, FunctionalCurve, ShapeObject, SpdMatrix
from .permutation import PowerCell, PowerTable, TestResult

__all__ = [
    "DataFormatError",
    "fmt_float",
    "read_vectors",
    "write_vectors",
    "read_spd_matrices",
    "write_spd_matrices",
    "read_shapes",
    "write_shapes",
    "read_curves",
    "write_curves",
    "read_distance_matrix",
    "write_distance_matrix",
    "read_emdf_matrix",
    "write_emdf_matrix",
    "read_labels",
    "write_labels",
    "format_test_result",
    "write_test_result",
    "read_test_result",
    "write_power_table",
    "read_power_table",
    "write_scenario_metadata",
]


class DataFormatError(ValueError):
    """Malformed input file; message carries file and line context."""


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _parse_floats(path: Path, lineno: int, line: str) -> list[float]:
    try:
        return [float(tok) for tok in line.split(",")]
    except ValueError as exc:
        raise DataFormatError(f"{path}:{lineno}: {exc}") from None


def _data_lines(path: Path) -> list[tuple[int, str]]:
    text = Path(path).read_text()
    return [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]


def _blocks(path: Path) -> list[list[tuple[int, str]]]:
    """Blank-line separated blocks of nonempty lines."""
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for lineno, ln in _data_lines(path):
        if ln:
            current.append((lineno, ln))
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


# -- vectors -----------------------------------------------------------------

def read_vectors(path) -> np.ndarray:
    path = Path(path)
    rows = []
    width = None
    for lineno, ln in _data_lines(path):
        if not ln:
            continue
        vals = _parse_floats(path, lineno, ln)
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DataFormatError(
                f"{path}:{lineno}: expected {width} values per row, got {len(vals)}"
            )
        rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path}: no vectors found")
    return np.asarray(rows, dtype=float)


def write_vectors(path, vectors) -> None:
    arr = np.atleast_2d(np.asarray(vectors, dtype=float))
    lines = [",".join(fmt_float(v) for v in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n")


# -- SPD matrices ------------------------------------------------------------

def read_spd_matrices(path) -> list[SpdMatrix]:
    path = Path(path)
    out = []
    for lineno, ln in _data_lines(path):
        if not ln:
            continue
        vals = _parse_floats(path, lineno, ln)
        dim = int(vals[0])
        if dim < 1 or vals[0] != dim:
            raise DataFormatError(f"{path}:{lineno}: invalid dimension field {vals[0]!r}")
        if len(vals) != 1 + dim * dim:
            raise DataFormatError(
                f"{path}:{lineno}: expected {1 + dim * dim} fields for dim {dim}, "
                f"got {len(vals)}"
            )
        try:
            out.append(SpdMatrix(np.asarray(vals[1:], dtype=float).reshape(dim, dim)))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not out:
        raise DataFormatError(f"{path}: no SPD matrices found")
    return out


def write_spd_matrices(path, mats: Sequence[SpdMatrix]) -> None:
    lines = []
    for m in mats:
        fields = [str(m.dim)] + [fmt_float(v) for v in m.entries.ravel()]
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


# -- shapes ------------------------------------------------------------------

def read_shapes(path) -> list[ShapeObject]:
    path = Path(path)
    out = []
    for block in _blocks(path):
        pts = []
        for lineno, ln in block:
            vals = _parse_floats(path, lineno, ln)
            if len(vals) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected 'x,y', got {ln!r}")
            pts.append(vals)
        try:
            out.append(ShapeObject(np.asarray(pts, dtype=float)))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{block[0][0]}: {exc}") from None
    if not out:
        raise DataFormatError(f"{path}: no shapes found")
    return out


def write_shapes(path, shapes: Sequence[ShapeObject]) -> None:
    blocks = []
    for s in shapes:
        blocks.append("\n".join(f"{fmt_float(x)},{fmt_float(y)}" for x, y in s.landmarks))
    Path(path).write_text("\n\n".join(blocks) + "\n")


# -- curves ------------------------------------------------------------------

def read_curves(path) -> list[FunctionalCurve]:
    path = Path(path)
    out = []
    for block in _blocks(path):
        rows = []
        for lineno, ln in block:
            vals = _parse_floats(path, lineno, ln)
            if len(vals) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected 't,value', got {ln!r}")
            rows.append(vals)
        arr = np.asarray(rows, dtype=float)
        try:
            out.append(FunctionalCurve(arr[:, 0], arr[:, 1]))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{block[0][0]}: {exc}") from None
    if not out:
        raise DataFormatError(f"{path}: no curves found")
    return out


def write_curves(path, curves: Sequence[FunctionalCurve]) -> None:
    blocks = []
    for c in curves:
        blocks.append(
            "\n".join(f"{fmt_float(t)},{fmt_float(v)}" for t, v in zip(c.grid, c.values))
        )
    Path(path).write_text("\n\n".join(blocks) + "\n")


# -- matrices ----------------------------------------------------------------

def _read_square_matrix(path) -> np.ndarray:
    path = Path(path)
    rows = []
    for lineno, ln in _data_lines(path):
        if not ln:
            continue
        rows.append(_parse_floats(path, lineno, ln))
    if not rows:
        raise DataFormatError(f"{path}: empty matrix")
    n = len(rows)
    for i, row in enumerate(rows):
        if len(row) != n:
            raise DataFormatError(f"{path}: row {i + 1} has {len(row)} values, expected {n}")
    return np.asarray(rows, dtype=float)


def read_distance_matrix(path) -> DistanceMatrix:
    try:
        return DistanceMatrix(_read_square_matrix(path))
    except DataFormatError:
        raise
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def write_distance_matrix(path, dm: DistanceMatrix) -> None:
    lines = [",".join(fmt_float(v) for v in row) for row in dm.d]
    Path(path).write_text("\n".join(lines) + "\n")


def read_emdf_matrix(path) -> EmdfMatrix:
    try:
        return EmdfMatrix(_read_square_matrix(path))
    except DataFormatError:
        raise
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def write_emdf_matrix(path, em: EmdfMatrix) -> None:
    lines = [",".join(fmt_float(v) for v in row) for row in em.values]
    Path(path).write_text("\n".join(lines) + "\n")


# -- labels ------------------------------------------------------------------

def read_labels(path) -> list[str]:
    labels = [ln for _, ln in _data_lines(Path(path)) if ln]
    if not labels:
        raise DataFormatError(f"{path}: no labels found")
    return labels


def write_labels(path, labels: Sequence) -> None:
    Path(path).write_text("\n".join(str(lab) for lab in labels) + "\n")


# -- test results ------------------------------------------------------------

def format_test_result(result: TestResult) -> str:
    return (
        f"statistic: {fmt_float(result.statistic)}\n"
        f"p_value: {fmt_float(result.p_value)}\n"
        f"replications: {result.replications}\n"
        f"seed: {result.seed}\n"
    )


def write_test_result(path, result: TestResult) -> None:
    Path(path).write_text(format_test_result(result))


def read_test_result(path) -> TestResult:
    path = Path(path)
    fields: dict[str, str] = {}
    for lineno, ln in _data_lines(path):
        if not ln:
            continue
        if ":" not in ln:
            raise DataFormatError(f"{path}:{lineno}: expected 'key: value', got {ln!r}")
        key, _, val = ln.partition(":")
        fields[key.strip()] = val.strip()
    try:
        return TestResult(
            statistic=float(fields["statistic"]),
            p_value=float(fields["p_value"]),
            replications=int(fields["replications"]),
            seed=int(fields["seed"]),
        )
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing field {exc}") from None


# -- power tables ------------------------------------------------------------

POWER_HEADER = "kappa,n,rejections,runs,rate"


def write_power_table(path, table: PowerTable) -> None:
    lines = [POWER_HEADER]
    for c in table.cells:
        lines.append(
            f"{fmt_float(c.kappa)},{c.n},{c.rejections},{c.runs},{fmt_float(c.rate)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_power_table(path) -> PowerTable:
    path = Path(path)
    lines = [ln for _, ln in _data_lines(path) if ln]
    if not lines or lines[0] != POWER_HEADER:
        raise DataFormatError(f"{path}: missing header {POWER_HEADER!r}")
    cells = []
    for ln in lines[1:]:
        kappa, n, rej, runs, rate = ln.split(",")
        rate_f = float(rate)
        cells.append(
            PowerCell(
                float(kappa),
                int(n),
                int(rej),
                int(runs),
                rate_f,
                error="invalid" if np.isnan(rate_f) else None,
            )
        )
    return PowerTable(tuple(cells))


# -- scenario metadata -------------------------------------------------------

def write_scenario_metadata(
    path, scenario: str, kappa: float, n: int, seed: int, base_checksum: str
) -> None:
    Path(path).write_text(
        f"scenario: {scenario}\n"
        f"kappa: {fmt_float(kappa)}\n"
        f"n: {n}\n"
        f"seed: {seed}\n"
        f"base_checksum: {base_checksum}\n"
    )
