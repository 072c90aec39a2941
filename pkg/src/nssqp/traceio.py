"""Delimited trace files.

One row per iteration, fixed column order, floats at 17 significant digits
so a written trace reproduces the in-memory doubles exactly. The header row
is mandatory and validated strictly on read.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError

PREFIX_COLUMNS = (
    "k",
    "alpha",
    "theta",
    "f",
    "v",
    "merit",
    "step_norm",
    "lambda_inf",
    "kkt_stationarity",
    "kkt_comp",
)


def trace_columns(n: int) -> tuple:
    return PREFIX_COLUMNS + tuple(f"x_{i}" for i in range(n))


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_trace(trace, path) -> None:
    """Write iteration records as CSV; byte-identical for identical runs."""
    if not trace:
        raise ContractError("cannot write an empty trace")
    n = int(np.asarray(trace[0].x).size)
    lines = [",".join(trace_columns(n))]
    for rec in trace:
        fields = [str(int(rec.k))]
        fields.extend(
            _fmt(v)
            for v in (
                rec.alpha,
                rec.theta,
                rec.f,
                rec.v,
                rec.merit,
                rec.step_norm,
                rec.lambda_inf,
                rec.kkt.stationarity,
                rec.kkt.complementarity,
            )
        )
        fields.extend(_fmt(x) for x in np.asarray(rec.x, dtype=float))
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class TraceTable:
    """A trace read back from disk: column names plus a float matrix."""

    columns: tuple
    data: np.ndarray

    @property
    def n(self) -> int:
        return len(self.columns) - len(PREFIX_COLUMNS)

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise ContractError(f"no column {name!r} in trace") from None
        return self.data[:, idx]

    def points(self) -> np.ndarray:
        return self.data[:, len(PREFIX_COLUMNS) :]


def read_trace(path) -> TraceTable:
    """Read a trace CSV, validating the fixed header layout."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ContractError(f"trace file {path} is empty")
    header = tuple(lines[0].split(","))
    if header[: len(PREFIX_COLUMNS)] != PREFIX_COLUMNS:
        raise ContractError(
            f"trace header must start with {','.join(PREFIX_COLUMNS)}"
        )
    coord = header[len(PREFIX_COLUMNS) :]
    if not coord or coord != tuple(f"x_{i}" for i in range(len(coord))):
        raise ContractError("trace header must end with columns x_0, x_1, ...")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ContractError(
                f"row at line {line_no} has {len(parts)} fields, expected"
                f" {len(header)}"
            )
        try:
            rows.append([float(tok) for tok in parts])
        except ValueError as exc:
            raise ContractError(f"bad number at line {line_no}: {exc}") from None
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return TraceTable(columns=header, data=data)
