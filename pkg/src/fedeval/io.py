"""File formats: labeled-score CSV and JSON-lines result streams.

The CSV format is a strict two-column "score,label" file with scores in
[0, 1] and labels 1/0. Result streams start with a schema-version
header object followed by one JSON object per result row; floats are
serialized at full precision so reruns with the same seed are byte
identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from .core import Label, LabeledScore

if TYPE_CHECKING:
    from .sweep import SweepResultRow

__all__ = [
    "DataFileError",
    "read_data_file",
    "write_data_file",
    "result_header_line",
    "row_to_json",
]

DATA_HEADER = "score,label"
SCHEMA_VERSION = "1"
_MAX_REPORTED_LINES = 20


class DataFileError(ValueError):
    """A labeled-score CSV file failed validation."""


def _parse_row(line: str) -> LabeledScore:
    parts = line.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 2 fields, got {len(parts)}")
    score = float(parts[0])
    label_text = parts[1].strip()
    if label_text not in ("0", "1"):
        raise ValueError(f"label must be 0 or 1, got {label_text!r}")
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score must be in [0, 1], got {score}")
    return LabeledScore(score, Label.from_int(int(label_text)))


def read_data_file(path: str | Path) -> list[LabeledScore]:
    """Read a labeled-score CSV, rejecting the file on any bad row.

    All offending line numbers (up to a cap) are reported in the raised
    DataFileError.
    """
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != DATA_HEADER:
        raise DataFileError(f"{path}:1: expected header {DATA_HEADER!r}")
    examples = []
    problems: list[str] = []
    bad_rows = 0
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            examples.append(_parse_row(line))
        except ValueError as exc:
            bad_rows += 1
            if len(problems) < _MAX_REPORTED_LINES:
                problems.append(f"{path}:{lineno}: {exc}")
    if bad_rows:
        omitted = bad_rows - len(problems)
        suffix = f"\n({omitted} further bad rows omitted)" if omitted else ""
        raise DataFileError("\n".join(problems) + suffix)
    return examples


def write_data_file(path: str | Path, examples: Sequence[LabeledScore]) -> None:
    """Write a labeled-score CSV that read_data_file round-trips exactly."""
    rows = [DATA_HEADER]
    for example in examples:
        label = 1 if example.label is Label.POSITIVE else 0
        rows.append(f"{example.score!r},{label}")
    Path(path).write_text("\n".join(rows) + "\n")


def result_header_line() -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION})


def row_to_json(row: "SweepResultRow") -> str:
    """One result row as a JSON object with a fixed key order."""
    obj: dict[str, object] = {
        "metric": row.metric,
        "regime": row.regime.value,
        "M": row.num_examples,
        "B": row.num_buckets,
        "h": row.height,
        "epsilon": row.epsilon,
    }
    if row.threshold is not None:
        obj["threshold"] = row.threshold
    obj["estimate"] = row.estimate
    obj["exact"] = row.exact
    obj["abs_error"] = row.abs_error
    obj["advertised_uncertainty"] = row.advertised_uncertainty
    obj["seed"] = row.seed
    obj["wall_ms"] = row.wall_ms
    if row.degenerate:
        obj["degenerate"] = True
    return json.dumps(obj)
