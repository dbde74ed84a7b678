"""Delimited-text tables, real-data transforms and detection reports.

Tables are one time step per row and one stream per column, with a header
row of stream names.  Lines starting with ``#`` are comments.  Numbers are
written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .detector import DetectionEvent
from .laws import Density, constant_lfl, LflPair

log = logging.getLogger(__name__)

FMT = "%.17g"


class TableError(ValueError):
    pass


@dataclass
class SeriesTable:
    names: list
    rows: np.ndarray
    source: str | None = None
    transforms: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.names):
            raise TableError(f"table shape {self.rows.shape} does not match {len(self.names)} names")

    @property
    def shape(self):
        return self.rows.shape

    def column(self, name) -> np.ndarray:
        return self.rows[:, self.names.index(name)]

    def apply_flight_transform(self, pad: int = 10) -> "SeriesTable":
        """Distances -> padded 10/distance signals, at most once per table."""
        if "flight_transform" in self.transforms:
            raise TableError("flight transform already applied to this table")
        cols = [flight_transform(self.rows[:, j], pad) for j in range(self.rows.shape[1])]
        return SeriesTable(list(self.names), np.column_stack(cols), self.source, self.transforms + ["flight_transform"])


def _sniff_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def read_table(path, missing: str = "reject", delimiter: str | None = None) -> SeriesTable:
    """Read a header + numeric rows table.

    ``missing='zero'`` replaces blank cells by 0.0 (each fill is logged);
    the default rejects them.
    """
    if missing not in ("reject", "zero"):
        raise ValueError(f"unknown missing-cell policy {missing!r}")
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise TableError(f"{path}: no header row")
    delim = delimiter or _sniff_delimiter(lines[0])
    reader = csv.reader(io.StringIO("\n".join(lines)), delimiter=delim)
    names = [h.strip() for h in next(reader)]
    data = []
    filled = []
    for lineno, raw in enumerate(reader, start=2):
        if len(raw) != len(names):
            raise TableError(f"{path}: row {lineno} has {len(raw)} cells, expected {len(names)}")
        row = []
        for j, cell in enumerate(raw):
            cell = cell.strip()
            if cell == "":
                if missing == "reject":
                    raise TableError(f"{path}: row {lineno}, column {names[j]!r} is empty")
                log.info("zero-filled blank cell at row %d column %s", lineno, names[j])
                filled.append((lineno, names[j]))
                row.append(0.0)
                continue
            try:
                row.append(float(cell))
            except ValueError:
                raise TableError(f"{path}: row {lineno}, column {names[j]!r}: non-numeric {cell!r}") from None
        data.append(row)
    if not data:
        raise TableError(f"{path}: header only, no data rows")
    transforms = [f"zero_fill:{r}:{c}" for r, c in filled]
    return SeriesTable(names, np.array(data), str(path), transforms)


def write_table(table: SeriesTable | np.ndarray, path, names: Sequence[str] | None = None, comments: Sequence[str] = (), delimiter: str = ",") -> Path:
    if not isinstance(table, SeriesTable):
        rows = np.atleast_2d(np.asarray(table, dtype=float))
        if rows.shape[0] == 1 and np.ndim(table) == 1:
            rows = rows.T
        names = list(names) if names is not None else [f"s{j}" for j in range(rows.shape[1])]
        table = SeriesTable(names, rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(delimiter.join(table.names) + "\n")
        for row in table.rows:
            fh.write(delimiter.join(FMT % v for v in row) + "\n")
    return path


def flight_transform(distances, pad: int = 10) -> np.ndarray:
    """``pad`` zeros followed by 10 / distance."""
    d = np.asarray(distances, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distances must be positive")
    if pad < 0:
        raise ValueError("pad must be >= 0")
    return np.concatenate([np.zeros(pad), 10.0 / d])


def _round_half_up(x: float) -> float:
    return float(math.floor(x + 0.5))


def estimate_poisson_lfl_history(history, k_pre: float = 2.0, k_post: float = 3.0, rounding: bool = True) -> LflPair:
    """Pois(mu + k_pre*sigma) -> Pois(mu + k_post*sigma) from a count history.

    ``sigma`` is the sample standard deviation (n - 1 denominator); rates
    are rounded to the nearest integer unless ``rounding`` is False.
    """
    h = np.asarray(history, dtype=float)
    if h.size < 2:
        raise ValueError("history needs at least two observations")
    if np.any(h < 0):
        raise ValueError("history must be non-negative")
    mu, sigma = float(h.mean()), float(h.std(ddof=1))
    pre, post = mu + k_pre * sigma, mu + k_post * sigma
    if rounding:
        pre, post = _round_half_up(pre), _round_half_up(post)
    if not post > pre:
        raise ValueError(f"history gives no separation: pre rate {pre} vs post rate {post}")
    return constant_lfl(Density.poisson(pre), Density.poisson(post))


# ---------------------------------------------------------------------------
# reports


def write_trace(trace, path, thresholds=None, start: int = 1) -> Path:
    """Two-column ``n,statistic`` file (third column when thresholds are given)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("n,statistic" + (",threshold" if thresholds is not None else "") + "\n")
        for i, s in enumerate(trace):
            line = f"{i + start},{FMT % s}"
            if thresholds is not None:
                line += f",{FMT % thresholds[i]}"
            fh.write(line + "\n")
    return path


def read_trace(path) -> tuple[np.ndarray, np.ndarray]:
    t = read_table(path)
    return t.rows[:, 0].astype(int), t.rows[:, 1]


def _fmt(v) -> str:
    if isinstance(v, float):
        return FMT % v
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def write_report(event: DetectionEvent, path, identification=None, config: dict | None = None, seed=None, names=None) -> Path:
    """Line-oriented ``key: value`` report plus a trace sidecar.

    The wall-clock time goes to a ``.meta`` sidecar so the report itself is
    byte-identical across reruns.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace_path = path.with_suffix(".trace.csv")
    try:
        write_trace(event.trace, trace_path, event.thresholds)
    except OSError as e:
        raise OSError(f"cannot write trace {trace_path}: {e}") from e
    lines = []
    if event.stopped:
        lines.append("status: detected")
        lines.append(f"stop_time: {event.stop_time}")
        lines.append(f"statistic_at_stop: {_fmt(event.statistic_at_stop)}")
        lines.append(f"threshold: {_fmt(event.thresholds[event.stop_time - 1])}")
        if event.argmax_k is not None:
            lines.append(f"change_point_estimate: {event.argmax_k}")
    else:
        lines.append("status: no detection within horizon")
        lines.append(f"steps: {len(event.trace)}")
        if event.thresholds:
            lines.append(f"threshold: {_fmt(event.thresholds[-1])}")
    lines.append(f"trace_file: {trace_path.name}")
    if identification is not None:
        r = identification
        label = [names[t] for t in r.subset] if names else list(r.subset)
        lines.append(f"identified_subset: {_fmt(label)}")
        lines.append(f"identified_subset_index: {r.subset_index}")
        lines.append(f"identified_change_point: {r.change_point}")
        lines.append(f"identification_value: {_fmt(r.value)}")
        lines.append(f"identification_rows_used: {r.n_used}")
        lines.append(f"identification_extra_obs: {r.extra_used}")
        for t, c in r.contributions.items():
            lines.append(f"contribution.{names[t] if names else t}: {_fmt(c)}")
    if seed is not None:
        lines.append(f"seed: {seed}")
    for k, v in _flatten(config or {}):
        lines.append(f"config.{k}: {_fmt(v)}")
    try:
        path.write_text("\n".join(lines) + "\n")
        path.with_suffix(path.suffix + ".meta").write_text(
            f"written_at: {datetime.now(timezone.utc).isoformat()}\npid: {os.getpid()}\n"
        )
    except OSError as e:
        raise OSError(f"cannot write report {path}: {e}") from e
    return path


def read_report(path) -> dict:
    out = {}
    for ln in Path(path).read_text().splitlines():
        k, _, v = ln.partition(": ")
        out[k] = v
    return out


def _flatten(d: dict, prefix: str = ""):
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v
