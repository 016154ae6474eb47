"""Windowed observation tables aligned to a system map.

Input is a CSV with a header row, one ``window`` column labeling each row
``ref`` or ``cur``, and one column per observed variable named by any
member of its equivalence class. Columns are unified to the canonical
(lexicographically smallest) class member on load. Cells are kept as raw
strings; the empty string means missing. Numeric/categorical typing is
decided downstream at discretization time.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import (
    BadWindowLabel,
    DuplicateEquivalenceColumn,
    EmptyWindow,
    MissingWindowColumn,
    NoDataForView,
)
from .mapcore import NodeKind, SystemMap, View

WINDOW_COLUMN = "window"
WINDOWS = ("ref", "cur")


@dataclass
class WindowedDataset:
    """Column store keyed by canonical qualified name, plus window labels."""

    columns: dict[str, np.ndarray]   # qname -> object array of str, '' = missing
    window: np.ndarray               # object array of 'ref' / 'cur'
    warnings: list[str] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return len(self.window)

    def window_mask(self, label: str) -> np.ndarray:
        if label not in WINDOWS:
            raise BadWindowLabel(f"unknown window label '{label}'")
        return self.window == label

    def has_column(self, qname: str) -> bool:
        return qname in self.columns


def load_csv(system_map: SystemMap, source: Union[str, io.TextIOBase]) -> WindowedDataset:
    """Read a CSV file (path, text, or open stream) against a map.

    Any member of an equivalence class is accepted as a column header and
    unified to the canonical member; two columns from one class are an
    error. Columns matching no map node are reported as warnings.
    """
    if isinstance(source, str):
        if "\n" in source or "," in source:
            stream = io.StringIO(source)
            rows = list(csv.reader(stream))
        else:
            with open(source, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
    else:
        rows = list(csv.reader(source))

    if not rows:
        raise MissingWindowColumn("empty CSV input")
    header, data_rows = rows[0], rows[1:]

    if WINDOW_COLUMN not in header:
        raise MissingWindowColumn("CSV has no 'window' column")
    window_idx = header.index(WINDOW_COLUMN)

    warnings: list[str] = []
    col_for: dict[str, int] = {}
    claimed_by: dict[str, str] = {}
    for i, name in enumerate(header):
        if i == window_idx:
            continue
        if not system_map.has_node(name):
            warnings.append(f"column '{name}' matches no map node")
            continue
        canonical = system_map.canonical_name(name)
        if canonical in claimed_by:
            raise DuplicateEquivalenceColumn(
                f"columns '{claimed_by[canonical]}' and '{name}' both map to '{canonical}'"
            )
        claimed_by[canonical] = name
        col_for[canonical] = i

    labels = []
    for r, row in enumerate(data_rows, start=2):
        label = row[window_idx] if window_idx < len(row) else ""
        if label not in WINDOWS:
            raise BadWindowLabel(f"row {r}: window label '{label}' (expected ref/cur)")
        labels.append(label)
    window = np.array(labels, dtype=object)
    for label in WINDOWS:
        if not np.any(window == label):
            raise EmptyWindow(f"window '{label}' has no rows")

    columns = {}
    for canonical, i in col_for.items():
        columns[canonical] = np.array(
            [row[i] if i < len(row) else "" for row in data_rows], dtype=object
        )
    return WindowedDataset(columns=columns, window=window, warnings=warnings)


@dataclass
class ViewTable:
    """Complete-case rows of one window, restricted to one view's nodes."""

    view: View
    window: str
    nodes: tuple[str, ...]                 # included qnames, canonical node order
    columns: dict[str, np.ndarray]         # qname -> object array, aligned rows
    excluded: tuple[str, ...]              # view nodes without any usable data
    n_rows: int

    def column(self, qname: str) -> np.ndarray:
        return self.columns[qname]


def resolve_column(ds: WindowedDataset, system_map: SystemMap, qname: str):
    """Column name backing a node: its class column, or a measure proxy."""
    canonical = system_map.canonical_name(qname)
    if ds.has_column(canonical):
        return canonical
    node = system_map.node(qname)
    if node.kind is NodeKind.RANDOM:
        target = system_map.measure_target(qname)
        if target is not None:
            proxy = system_map.canonical_name(target)
            if ds.has_column(proxy):
                return proxy
    return None


def view_matrix(ds: WindowedDataset, system_map: SystemMap, view: View,
                window: str) -> ViewTable:
    """Row-aligned complete-case table over one view for one window.

    Nodes without a backing column (directly or through a measure proxy),
    or whose column is entirely missing in the window, are excluded and
    reported; remaining rows with any missing cell are dropped.
    """
    graph = system_map.view_graph(view)
    mask = ds.window_mask(window)

    included: list[str] = []
    excluded: list[str] = []
    source: dict[str, str] = {}
    for node in graph.nodes:
        col = resolve_column(ds, system_map, node.qname)
        if col is None:
            excluded.append(node.qname)
            continue
        values = ds.columns[col][mask]
        if not np.any(values != ""):
            excluded.append(node.qname)
            continue
        included.append(node.qname)
        source[node.qname] = col

    complete = mask.copy()
    for qname in included:
        complete &= ds.columns[source[qname]] != ""
    n = int(np.count_nonzero(complete))
    if n == 0 or not included:
        raise NoDataForView(
            f"no complete rows for view '{view.name}' in window '{window}'"
        )
    columns = {q: ds.columns[source[q]][complete] for q in included}
    return ViewTable(
        view=view,
        window=window,
        nodes=tuple(included),
        columns=columns,
        excluded=tuple(excluded),
        n_rows=n,
    )
