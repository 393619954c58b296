"""Per-iteration trace records and their CSV serialization.

The CSV schema is fixed: the header is exactly ``TRACE_FIELDS`` in order
(minus ``wall_ns`` when wall-clock output is suppressed), comma-separated.
Optional fields serialize as empty strings. Floats are written with
``repr`` so files round-trip bit-exactly and re-runs with identical seeds
produce byte-identical output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

TRACE_FIELDS = (
    "replicate",
    "k",
    "mode",
    "alpha",
    "sampled_objective",
    "exact_residual",
    "grad_norm",
    "batch_nnz",
    "cumulative_samples",
    "cumulative_cost_units",
    "wall_ns",
)


@dataclass
class TraceRow:
    """One solver step: block/sweep index ``k`` plus its diagnostics.

    ``mode`` is None for rows that aggregate a whole block or sweep.
    ``exact_residual`` and ``grad_norm`` are None when not computed.
    """

    replicate: int
    k: int
    mode: int | None
    alpha: float
    sampled_objective: float
    exact_residual: float | None
    grad_norm: float | None
    batch_nnz: int
    cumulative_samples: int
    cumulative_cost_units: float
    wall_ns: int

    def astuple(self):
        return tuple(getattr(self, f.name) for f in fields(self))


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace(path, rows, include_wall: bool = True) -> None:
    """Write trace rows as CSV; ``include_wall=False`` drops the wall_ns column."""
    names = TRACE_FIELDS if include_wall else TRACE_FIELDS[:-1]
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            cells = [_cell(v) for v in row.astuple()]
            writer.writerow(cells if include_wall else cells[:-1])


def read_trace(path) -> list[TraceRow]:
    """Read a trace CSV written by :func:`write_trace`."""
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) not in (TRACE_FIELDS, TRACE_FIELDS[:-1]):
            raise ValueError(f"{path}: unexpected trace header {header}")
        has_wall = len(header) == len(TRACE_FIELDS)
        rows = []
        for rec in reader:
            rows.append(
                TraceRow(
                    replicate=int(rec[0]),
                    k=int(rec[1]),
                    mode=int(rec[2]) if rec[2] else None,
                    alpha=float(rec[3]),
                    sampled_objective=float(rec[4]),
                    exact_residual=float(rec[5]) if rec[5] else None,
                    grad_norm=float(rec[6]) if rec[6] else None,
                    batch_nnz=int(rec[7]),
                    cumulative_samples=int(rec[8]),
                    cumulative_cost_units=float(rec[9]),
                    wall_ns=int(rec[10]) if has_wall and rec[10] else 0,
                )
            )
    return rows
