"""Panel containers, long-format CSV ingestion and the two-way within transform."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Sequence

import numpy as np

from .errors import (
    DegeneratePanelError,
    DuplicateError,
    ImbalanceError,
    ParseError,
    SchemaError,
)

__all__ = [
    "PanelSchema",
    "LongPanel",
    "BalancedPanel",
    "TransformedPanel",
    "load_long_csv",
    "to_balanced",
    "flatten",
    "within_transform",
    "panel_to_json",
    "panel_from_json",
]

_MAX_REPORTED_MISSING = 10


@dataclass(frozen=True)
class PanelSchema:
    unit_col: str
    time_col: str
    y_col: str
    x_cols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "x_cols", tuple(self.x_cols))
        if not self.x_cols:
            raise SchemaError("schema needs at least one regressor column")


@dataclass(frozen=True, eq=False)
class LongPanel:
    """Observations in long format, one row per (unit, time) pair.

    Stored column-wise: ``unit_ids[r]``, ``time_ids[r]``, ``y[r]`` and
    ``x[r, :]`` describe row ``r``.
    """

    unit_ids: tuple
    time_ids: tuple
    y: np.ndarray
    x: np.ndarray
    columns: tuple[str, ...]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        n = len(self.unit_ids)
        if len(self.time_ids) != n or y.shape[0] != n or x.shape[0] != n:
            raise ValueError("row fields must have equal length")
        if x.shape[1] != len(self.columns):
            raise ValueError(
                f"expected {len(self.columns)} regressor values per row, got {x.shape[1]}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ParseError("panel values must be finite")
        seen: dict[tuple, int] = {}
        for r, key in enumerate(zip(self.unit_ids, self.time_ids)):
            if key in seen:
                raise DuplicateError(
                    f"duplicate observation for (unit, time) = ({key[0]}, {key[1]})"
                )
            seen[key] = r
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "time_ids", tuple(self.time_ids))
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def k(self) -> int:
        return self.x.shape[1]

    @property
    def rows(self) -> list[tuple[Any, Any, float, tuple[float, ...]]]:
        return [
            (u, t, float(yv), tuple(float(v) for v in xv))
            for u, t, yv, xv in zip(self.unit_ids, self.time_ids, self.y, self.x)
        ]

    def __len__(self) -> int:
        return len(self.unit_ids)


@dataclass(frozen=True, eq=False)
class BalancedPanel:
    """A complete N x T grid.

    ``y`` has shape ``(N, T)`` and ``x`` has shape ``(N, T, k)``; the first
    axis follows ``unit_labels`` and the second follows ``time_labels``.
    """

    y: np.ndarray
    x: np.ndarray
    columns: tuple[str, ...] = ()
    unit_labels: tuple = ()
    time_labels: tuple = ()
    _check_order: bool = field(default=True, repr=False)

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        x = np.array(self.x, dtype=float)
        if y.ndim != 2:
            raise ValueError("y must have shape (N, T)")
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[:2] != y.shape:
            raise ValueError(f"x must have shape (N, T, k) matching y {y.shape}")
        n, t, k = x.shape
        if n < 1 or t < 1 or k < 1:
            raise ValueError("panel dimensions must be positive")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("panel values must be finite")
        columns = tuple(self.columns) or tuple(f"x{j + 1}" for j in range(k))
        units = tuple(self.unit_labels) or tuple(range(1, n + 1))
        times = tuple(self.time_labels) or tuple(range(1, t + 1))
        if len(columns) != k or len(units) != n or len(times) != t:
            raise ValueError("label lengths do not match panel dimensions")
        if self._check_order and any(
            not _label_key(a) < _label_key(b) for a, b in zip(times, times[1:])
        ):
            raise ValueError("time labels must be strictly increasing")
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "unit_labels", units)
        object.__setattr__(self, "time_labels", times)

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def k(self) -> int:
        return self.x.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.x.shape

    def replace(self, *, y: np.ndarray | None = None, x: np.ndarray | None = None,
                columns: Sequence[str] | None = None):
        return type(self)(
            y=self.y if y is None else y,
            x=self.x if x is None else x,
            columns=self.columns if columns is None else tuple(columns),
            unit_labels=self.unit_labels,
            time_labels=self.time_labels,
            _check_order=False,
        )


class TransformedPanel(BalancedPanel):
    """Balanced panel holding double-demeaned outcome and regressors."""


def _read_source(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8-sig")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8-sig")
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8-sig")
    return data


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(
            f"row {row}: column {column!r} is not numeric: {text!r}", row=row
        ) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}: column {column!r} is not finite: {text!r}", row=row)
    return value


def load_long_csv(source: IO[bytes] | bytes | str | os.PathLike,
                  schema: PanelSchema) -> LongPanel:
    """Read a long-format CSV into a :class:`LongPanel`.

    ``source`` may be a binary stream, raw bytes or a filesystem path. Row
    numbers in error messages count the header as row 1, so the first record
    is row 2, matching what a spreadsheet shows.
    """
    text = _read_source(source)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("CSV input is empty") from None

    needed = [schema.unit_col, schema.time_col, schema.y_col, *schema.x_cols]
    missing = [name for name in needed if name not in header]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(repr(m) for m in missing)}")
    pos = {name: header.index(name) for name in needed}

    units: list[str] = []
    times: list[str] = []
    ys: list[float] = []
    xs: list[list[float]] = []
    seen: dict[tuple[str, str], int] = {}
    for row_no, record in enumerate(reader, start=2):
        if not record or all(not cell.strip() for cell in record):
            continue
        if len(record) < len(header):
            raise ParseError(
                f"row {row_no}: expected {len(header)} fields, got {len(record)}", row=row_no
            )
        unit = record[pos[schema.unit_col]].strip()
        time = record[pos[schema.time_col]].strip()
        if unit == "" or time == "":
            raise ParseError(f"row {row_no}: empty unit or time label", row=row_no)
        key = (unit, time)
        if key in seen:
            raise DuplicateError(
                f"duplicate observation for (unit, time) = ({unit}, {time}) "
                f"at rows {seen[key]} and {row_no}"
            )
        seen[key] = row_no
        units.append(unit)
        times.append(time)
        ys.append(_parse_float(record[pos[schema.y_col]].strip(), row_no, schema.y_col))
        xs.append([_parse_float(record[pos[c]].strip(), row_no, c) for c in schema.x_cols])

    k = len(schema.x_cols)
    return LongPanel(
        unit_ids=tuple(_coerce_labels(units)),
        time_ids=tuple(_coerce_labels(times)),
        y=np.array(ys, dtype=float),
        x=np.array(xs, dtype=float).reshape(len(ys), k),
        columns=schema.x_cols,
    )


def _coerce_labels(labels: list[str]) -> list:
    """Convert labels to int or float when every label parses as such."""
    if not labels or not all(isinstance(v, str) for v in labels):
        return labels
    try:
        return [int(v) for v in labels]
    except ValueError:
        pass
    try:
        converted = [float(v) for v in labels]
    except ValueError:
        return labels
    if all(math.isfinite(v) for v in converted):
        return converted
    return labels


def _label_key(label) -> tuple:
    # numbers order before strings so mixed label sets still sort deterministically
    if isinstance(label, (int, float, np.integer, np.floating)) and not isinstance(label, bool):
        return (0, float(label), "")
    return (1, 0.0, str(label))


def _sorted_labels(labels: Iterable, what: str) -> list:
    distinct = list(dict.fromkeys(labels))
    if any(isinstance(v, str) for v in distinct) and what == "time":
        warnings.warn(
            "time labels are not numeric; ordering them lexicographically",
            stacklevel=3,
        )
    return sorted(distinct, key=_label_key)


def to_balanced(panel: LongPanel) -> BalancedPanel:
    units = _sorted_labels(panel.unit_ids, "unit")
    times = _sorted_labels(panel.time_ids, "time")
    n, t, k = len(units), len(times), panel.k
    if n == 0:
        raise ImbalanceError("panel has no observations")
    u_index = {u: i for i, u in enumerate(units)}
    t_index = {s: j for j, s in enumerate(times)}

    y = np.empty((n, t))
    x = np.empty((n, t, k))
    filled = np.zeros((n, t), dtype=bool)
    for r, (u, s) in enumerate(zip(panel.unit_ids, panel.time_ids)):
        i, j = u_index[u], t_index[s]
        y[i, j] = panel.y[r]
        x[i, j] = panel.x[r]
        filled[i, j] = True

    if not filled.all():
        holes = np.argwhere(~filled)
        cells = [(units[i], times[j]) for i, j in holes]
        shown = ", ".join(f"({u}, {s})" for u, s in cells[:_MAX_REPORTED_MISSING])
        more = "" if len(cells) <= _MAX_REPORTED_MISSING else f" and {len(cells) - _MAX_REPORTED_MISSING} more"
        raise ImbalanceError(
            f"panel is unbalanced: {len(cells)} missing cell(s): {shown}{more}",
            missing=cells[:_MAX_REPORTED_MISSING],
        )
    return BalancedPanel(y=y, x=x, columns=panel.columns,
                         unit_labels=tuple(units), time_labels=tuple(times))


def flatten(panel: BalancedPanel) -> LongPanel:
    """Inverse of :func:`to_balanced`: unit-major long rows."""
    n, t, k = panel.shape
    units = [u for u in panel.unit_labels for _ in range(t)]
    times = [s for _ in range(n) for s in panel.time_labels]
    return LongPanel(
        unit_ids=tuple(units),
        time_ids=tuple(times),
        y=panel.y.reshape(n * t),
        x=panel.x.reshape(n * t, k),
        columns=panel.columns,
    )


def _double_demean(a: np.ndarray) -> np.ndarray:
    # a has shape (N, T) or (N, T, k)
    unit_mean = a.mean(axis=1, keepdims=True)
    time_mean = a.mean(axis=0, keepdims=True)
    grand = a.mean(axis=(0, 1), keepdims=True)
    return a - time_mean - unit_mean + grand


def within_transform(panel: BalancedPanel) -> TransformedPanel:
    """Remove additive unit and time effects from every column.

    Each value becomes ``v_it - mean_i' v_i't - mean_t' v_it' + mean v``.
    """
    if panel.n_units < 2 or panel.n_periods < 2:
        raise DegeneratePanelError(
            f"within transform needs N >= 2 and T >= 2, got N={panel.n_units}, "
            f"T={panel.n_periods}"
        )
    return TransformedPanel(
        y=_double_demean(panel.y),
        x=_double_demean(panel.x),
        columns=panel.columns,
        unit_labels=panel.unit_labels,
        time_labels=panel.time_labels,
        _check_order=False,
    )


def panel_to_json(panel: BalancedPanel) -> str:
    doc = {
        "n_units": panel.n_units,
        "n_periods": panel.n_periods,
        "columns": list(panel.columns),
        "unit_labels": list(panel.unit_labels),
        "time_labels": list(panel.time_labels),
        "y": panel.y.reshape(-1).tolist(),
        "x": panel.x.reshape(-1).tolist(),
    }
    return json.dumps(doc)


def panel_from_json(text: str) -> BalancedPanel:
    doc = json.loads(text)
    n, t = int(doc["n_units"]), int(doc["n_periods"])
    k = len(doc["columns"])
    return BalancedPanel(
        y=np.array(doc["y"], dtype=float).reshape(n, t),
        x=np.array(doc["x"], dtype=float).reshape(n, t, k),
        columns=tuple(doc["columns"]),
        unit_labels=tuple(doc["unit_labels"]),
        time_labels=tuple(doc["time_labels"]),
    )
