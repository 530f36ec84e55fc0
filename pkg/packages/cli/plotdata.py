"""
CSV series derived from a verification report.

File names are fixed and rows are sorted, so the same report always yields
byte-identical files. A series with no source records produces no file.

    gap_series.csv         experiment,case,h,n_nodes,gap,rel_gap,gap_tol,passed
    hessian_spectrum.csv   experiment,beta,primal_class,lambda_min,lambda_max
    weak_duality_slack.csv check,experiment,bin_lo,bin_hi,count
    gauge_convergence.csv  experiment,cells,h,defect,ratio
"""

import csv
from collections.abc import Callable, Iterable, Sequence
from pathlib import Path

import numpy as np

from packages.core.models import CheckRecord, VerificationReport
from packages.shared.logging import get_logger

logger = get_logger(__name__)

SLACK_BINS = 20

Row = Sequence[str]


def _fmt(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int | float):
        return format(float(value), ".17g")
    return str(value)


def _write(path: Path, header: Row, rows: Iterable[Row]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _float(record: CheckRecord, key: str) -> float:
    value = record.values.get(key)
    return float(value) if isinstance(value, int | float) else float("nan")


def gap_rows(records: Sequence[CheckRecord]) -> list[Row]:
    selected = [r for r in records if r.name in ("gap", "gap_closure") and "gap" in r.values]
    selected.sort(key=lambda r: (_float(r, "h"), r.experiment, r.case.value if r.case else ""))
    return [
        [
            r.experiment,
            r.case.value if r.case else r.name,
            _fmt(r.values.get("h")),
            _fmt(r.values.get("n_nodes")),
            _fmt(r.values.get("gap")),
            _fmt(r.values.get("rel_gap")),
            _fmt(r.tolerances.get("gap")),
            _fmt(r.passed),
        ]
        for r in selected
    ]


def spectrum_rows(records: Sequence[CheckRecord]) -> list[Row]:
    """λ_min/λ_max of δ²J against β, one row per critical point."""
    selected = [r for r in records if r.name == "second_derivative" and "beta" in r.values]
    selected.sort(key=lambda r: (_float(r, "beta"), r.experiment))
    return [
        [
            r.experiment,
            _fmt(r.values.get("beta")),
            _fmt(r.values.get("primal_class")),
            _fmt(r.values.get("primal_lambda_min")),
            _fmt(r.values.get("primal_lambda_max")),
        ]
        for r in selected
    ]


def slack_rows(records: Sequence[CheckRecord]) -> list[Row]:
    rows: list[Row] = []
    for r in records:
        if r.name not in ("weak_duality", "weak_duality_complex"):
            continue
        slacks = np.asarray(r.series.get("slacks", []), dtype=np.float64)
        if slacks.size == 0:
            continue
        counts, edges = np.histogram(slacks, bins=SLACK_BINS)
        rows.extend(
            [r.name, r.experiment, _fmt(lo), _fmt(hi), str(int(c))]
            for lo, hi, c in zip(edges[:-1], edges[1:], counts, strict=True)
        )
    return rows


def gauge_rows(records: Sequence[CheckRecord]) -> list[Row]:
    rows: list[Row] = []
    for r in records:
        if r.name != "gauge_invariance":
            continue
        cells, h, defect = (r.series.get(k, []) for k in ("cells", "h", "defect"))
        for i, (c, hi, d) in enumerate(zip(cells, h, defect, strict=True)):
            ratio = defect[i - 1] / d if i > 0 and d > 0 else None
            rows.append([r.experiment, str(int(c)), _fmt(hi), _fmt(d), _fmt(ratio)])
    return rows


SERIES: dict[str, tuple[Row, Callable[[Sequence[CheckRecord]], list[Row]]]] = {
    "gap_series.csv": (
        ["experiment", "case", "h", "n_nodes", "gap", "rel_gap", "gap_tol", "passed"],
        gap_rows,
    ),
    "hessian_spectrum.csv": (
        ["experiment", "beta", "primal_class", "lambda_min", "lambda_max"],
        spectrum_rows,
    ),
    "weak_duality_slack.csv": (["check", "experiment", "bin_lo", "bin_hi", "count"], slack_rows),
    "gauge_convergence.csv": (["experiment", "cells", "h", "defect", "ratio"], gauge_rows),
}


def emit_plot_data(report: VerificationReport, out_dir: Path | str) -> list[Path]:
    """
    Write every non-empty series into out_dir and return the written paths.

    Raises:
        OSError: out_dir cannot be created or a file cannot be written.
    """
    out_dir = Path(out_dir)
    written: list[Path] = []
    for name, (header, build) in SERIES.items():
        rows = build(report.records)
        if not rows:
            continue
        out_dir.mkdir(parents=True, exist_ok=True)
        written.append(_write(out_dir / name, header, rows))
        logger.info("Plot series written", file=name, rows=len(rows))
    return written
