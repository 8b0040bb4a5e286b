"""Reading and writing count matrices, labels, and result tables.

The native count format is line-oriented sparse text: a header line
``N D NNZ`` followed by N rows of ``col:count`` tokens with 1-based
column indices.  A file whose first content line is not three integers
is read as dense comma-separated counts instead.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import CountDataset
from .evaluation import BenchmarkReport
from .modelgen import CandidateModelSet
from .modelsel import CriterionCurve


class ParseError(ValueError):
    """Malformed input file; carries the offending location."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


def _content_lines(text: str) -> list[tuple[int, str]]:
    """(1-based line number, stripped text) for non-blank, non-# lines."""
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append((i, line))
    return out


def _parse_sparse(text: str, path) -> np.ndarray:
    """Sparse layout: an empty line in the row section is a legal
    all-zeros row, so only comment lines are skipped after the header."""
    lines = [(i, raw.strip()) for i, raw in enumerate(text.splitlines(), start=1)]
    body = []
    header = None
    for lineno, line in lines:
        if line.startswith("#"):
            continue
        if header is None:
            if not line:
                continue
            header = (lineno, line)
        else:
            body.append((lineno, line))
    lineno, head = header
    try:
        n, d, nnz = (int(p) for p in head.split())
    except ValueError:
        raise ParseError(f"expected header 'N D NNZ', got {head!r}", path, lineno)
    if n < 1 or d < 1 or nnz < 0:
        raise ParseError(f"invalid header values N={n} D={d} NNZ={nnz}", path, lineno)
    rows, extra = body[:n], body[n:]
    for extra_lineno, line in extra:
        if line:
            raise ParseError(
                f"header announces {n} rows but more follow", path, extra_lineno
            )
    if len(rows) != n:
        raise ParseError(
            f"header announces {n} rows but file has {len(rows)}", path, lineno
        )
    counts = np.zeros((n, d), dtype=np.int64)
    seen_tokens = 0
    for i, (lineno, line) in enumerate(rows):
        seen_cols = set()
        for token in line.split():
            col_s, _, cnt_s = token.partition(":")
            try:
                col = int(col_s)
                cnt = int(cnt_s)
            except ValueError:
                raise ParseError(f"malformed token {token!r}", path, lineno)
            if not 1 <= col <= d:
                raise ParseError(
                    f"column {col} outside 1..{d}", path, lineno
                )
            if col in seen_cols:
                raise ParseError(f"duplicate column {col} in row", path, lineno)
            if cnt < 0:
                raise ParseError(f"negative count {cnt}", path, lineno)
            seen_cols.add(col)
            counts[i, col - 1] = cnt
            seen_tokens += 1
    if seen_tokens != nnz:
        raise ParseError(
            f"header announces {nnz} entries but file has {seen_tokens}", path
        )
    return counts


def _parse_dense(lines: list[tuple[int, str]], path) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in lines:
        cells = [c.strip() for c in line.split(",")]
        try:
            row = [int(c) for c in cells]
        except ValueError:
            raise ParseError(f"non-integer cell in {line!r}", path, lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(
                f"row has {len(row)} columns, expected {width}", path, lineno
            )
        if any(v < 0 for v in row):
            raise ParseError("negative count", path, lineno)
        rows.append(row)
    return np.array(rows, dtype=np.int64)


def _looks_sparse(header: str) -> bool:
    parts = header.split()
    if len(parts) != 3:
        return False
    try:
        [int(p) for p in parts]
    except ValueError:
        return False
    return True


def load_counts(path) -> CountDataset:
    """Read a count matrix, auto-detecting sparse vs dense layout."""
    text = Path(path).read_text()
    lines = _content_lines(text)
    if not lines:
        raise ParseError("file has no content lines", path)
    if _looks_sparse(lines[0][1]):
        counts = _parse_sparse(text, path)
    else:
        counts = _parse_dense(lines, path)
    return CountDataset(counts=counts)


def write_sparse_counts(path, dataset: CountDataset) -> None:
    """Write counts in the sparse ``N D NNZ`` text format."""
    counts = dataset.counts
    nnz = int(np.count_nonzero(counts))
    with open(path, "w") as fh:
        fh.write(f"{dataset.n_samples} {dataset.n_features} {nnz}\n")
        for row in counts:
            cols = np.flatnonzero(row)
            fh.write(" ".join(f"{c + 1}:{row[c]}" for c in cols) + "\n")


def load_labels(path) -> np.ndarray:
    """Read one positive integer label per line."""
    labels = []
    for lineno, line in _content_lines(Path(path).read_text()):
        try:
            value = int(line)
        except ValueError:
            raise ParseError(f"expected an integer label, got {line!r}", path, lineno)
        if value < 1:
            raise ParseError(f"labels must be >= 1, got {value}", path, lineno)
        labels.append(value)
    if not labels:
        raise ParseError("label file has no content lines", path)
    return np.array(labels, dtype=np.int64)


def write_labels(path, labels) -> None:
    arr = np.asarray(labels, dtype=np.int64)
    with open(path, "w") as fh:
        for value in arr:
            fh.write(f"{value}\n")


def write_curve_csv(path, curve: CriterionCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", curve.criterion])
        for k, value in curve.points:
            writer.writerow([k, repr(value)])


def candidates_to_jsonable(candidates: CandidateModelSet) -> dict:
    """JSON-ready summary of a candidate set.

    Wall-clock timings are deliberately left out so that reruns with
    the same seed produce byte-identical artifacts.
    """
    entries = {}
    for k in candidates.component_counts():
        fit = candidates.entries[k]
        entries[str(k)] = {
            "log_likelihood": fit.log_likelihood,
            "weights": fit.model.weights.tolist(),
            "iterations": fit.iterations,
            "converged": fit.converged,
        }
    out = {
        "method": candidates.method,
        "n_samples": candidates.n_samples,
        "entries": entries,
        "failures": {str(k): v for k, v in candidates.failures.items()},
    }
    if candidates.merge_steps:
        out["merge_steps"] = [
            {
                "left": step.left,
                "right": step.right,
                "members": list(step.members),
                "dissimilarity": step.dissimilarity,
                "merged_weight": step.merged_weight,
            }
            for step in candidates.merge_steps
        ]
    return out


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


_RECORD_FIELDS = (
    "dataset_id",
    "method",
    "repeat",
    "seed",
    "true_k",
    "selected_k",
    "ari",
    "elapsed",
    "error",
)

_AGGREGATE_FIELDS = (
    "dataset_id",
    "method",
    "true_k",
    "n_runs",
    "n_failures",
    "ari_mean",
    "ari_std",
    "correct_k_rate",
    "elapsed_mean",
)


def write_report_csv(path, report: BenchmarkReport) -> None:
    """Per-run rows of a benchmark report."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RECORD_FIELDS)
        for record in report.records:
            writer.writerow(
                ["" if (v := getattr(record, f)) is None else v for f in _RECORD_FIELDS]
            )


def report_to_jsonable(report: BenchmarkReport) -> dict:
    aggregates = []
    for agg in report.aggregates:
        row = {f: getattr(agg, f) for f in _AGGREGATE_FIELDS}
        row["selected_counts"] = {str(k): v for k, v in agg.selected_counts.items()}
        aggregates.append(row)
    return {
        "repeats": report.repeats,
        "seed": report.seed,
        "aggregates": aggregates,
        "records": [
            {f: getattr(record, f) for f in _RECORD_FIELDS}
            for record in report.records
        ],
    }
