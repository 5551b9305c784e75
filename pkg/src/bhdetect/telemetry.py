"""Sensor vocabulary and telemetry dataset handling.

Four operational data models feed the detector, mirrored here as a fixed
vocabulary rather than a generic model compiler:

  M1  per-interface traffic statistics broken down by protocol
      (input/output data and packet rates),
  M2  per-interface aggregate traffic statistics (M1 rates plus
      input/output load as a fraction of 255),
  M3  BGP route-table counters,
  M4  IS-IS route-table counters.

Column names follow the canonical ``<model>.<scope>.<metric>`` convention
(e.g. ``M2.Bundle-Ether1.100.input_packet_rate``). Scopes may themselves
contain dots; metric names never do, so names parse unambiguously from the
right.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MODELS = ("M1", "M2", "M3", "M4")

RATE_METRICS = (
    "input_data_rate",
    "input_packet_rate",
    "output_data_rate",
    "output_packet_rate",
)
LOAD_METRICS = ("input_load", "output_load")
ROUTE_METRICS = (
    "routes_count",
    "active_routes_count",
    "backup_routes_count",
    "deleted_routes_count",
    "paths_count",
    "protocol_route_memory",
    "redistribution_client_count",
    "protocol_clients_count",
)

# Legal metric set per model. M1 carries the four rates, M2 adds the two
# loads, M3/M4 carry the route-table counters.
MODEL_METRICS: dict[str, tuple[str, ...]] = {
    "M1": RATE_METRICS,
    "M2": RATE_METRICS + LOAD_METRICS,
    "M3": ROUTE_METRICS,
    "M4": ROUTE_METRICS,
}

METRIC_UNITS: dict[str, str] = {
    "input_data_rate": "kbps",
    "output_data_rate": "kbps",
    "input_packet_rate": "packets_per_second",
    "output_packet_rate": "packets_per_second",
    "input_load": "load_fraction_255",
    "output_load": "load_fraction_255",
    "routes_count": "count",
    "active_routes_count": "count",
    "backup_routes_count": "count",
    "deleted_routes_count": "count",
    "paths_count": "count",
    "protocol_route_memory": "bytes",
    "redistribution_client_count": "count",
    "protocol_clients_count": "count",
}

PROTOCOL_MODEL = {"BGP": "M3", "ISIS": "M4"}


@dataclass(frozen=True)
class SensorDescriptor:
    """Identity of one monitored sensor: (model, scope, metric)."""

    model_id: str
    scope: str
    metric: str

    def __post_init__(self):
        if self.model_id not in MODELS:
            raise ValueError(f"unknown model {self.model_id!r}")
        if self.metric not in MODEL_METRICS[self.model_id]:
            raise ValueError(
                f"metric {self.metric!r} is not legal under {self.model_id}"
            )
        if not self.scope:
            raise ValueError("scope must be non-empty")

    @property
    def unit(self) -> str:
        return METRIC_UNITS[self.metric]

    @property
    def column_name(self) -> str:
        return f"{self.model_id}.{self.scope}.{self.metric}"


def parse_column_name(name: str) -> tuple[str, str, str]:
    """Split a canonical column name into (model, scope, metric).

    The scope may contain dots; the metric never does, so the split is
    first-dot / last-dot. Raises ValueError on names that do not follow
    the convention.
    """
    parts = name.split(".")
    if len(parts) < 3:
        raise ValueError(f"not a canonical column name: {name!r}")
    model, metric = parts[0], parts[-1]
    scope = ".".join(parts[1:-1])
    if model not in MODELS:
        raise ValueError(f"not a canonical column name: {name!r}")
    return model, scope, metric


@dataclass(frozen=True)
class SensorCatalog:
    """Ordered, deduplicated collection of sensor descriptors."""

    descriptors: tuple[SensorDescriptor, ...]

    def __post_init__(self):
        seen = set()
        for d in self.descriptors:
            key = (d.model_id, d.scope, d.metric)
            if key in seen:
                raise ValueError(f"duplicate sensor {key}")
            seen.add(key)

    @property
    def column_names(self) -> list[str]:
        return [d.column_name for d in self.descriptors]

    def __len__(self) -> int:
        return len(self.descriptors)


def build_sensor_catalog(
    interfaces: list[str], protocols: list[str] | set[str]
) -> SensorCatalog:
    """Enumerate the sensors monitored for one device.

    Every interface yields the four M1 rate metrics and the six M2
    metrics; BGP yields the eight M3 route counters and IS-IS the eight
    M4 ones. Ordering is deterministic: model, then scope
    lexicographically, then the fixed metric order.
    """
    if not interfaces:
        raise ValueError("catalog would be empty: no interfaces supplied")
    unknown = set(protocols) - set(PROTOCOL_MODEL)
    if unknown:
        raise ValueError(f"unknown protocols: {sorted(unknown)}")

    descriptors: list[SensorDescriptor] = []
    for model in ("M1", "M2"):
        for iface in sorted(interfaces):
            for metric in MODEL_METRICS[model]:
                descriptors.append(SensorDescriptor(model, iface, metric))
    for proto in sorted(protocols, key=lambda p: PROTOCOL_MODEL[p]):
        model = PROTOCOL_MODEL[proto]
        for metric in ROUTE_METRICS:
            descriptors.append(SensorDescriptor(model, proto, metric))
    return SensorCatalog(tuple(descriptors))


@dataclass
class TelemetryDataset:
    """Time-aligned matrix of sensor values, optionally labeled.

    ``values`` is row-per-timestamp, column-per-sensor. ``labels`` (when
    present) maps a router name to a boolean vector aligned with
    ``timestamps``; True marks a silent-drop interval at that router.
    ``fill_log`` lists timestamps whose rows were forward-filled at
    ingestion.
    """

    timestamps: np.ndarray
    period_s: int
    column_names: list[str]
    values: np.ndarray
    node_of_column: dict[str, str] = field(default_factory=dict)
    labels: dict[str, np.ndarray] | None = None
    fill_log: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        n, m = self.values.shape
        if n != len(self.timestamps):
            raise ValueError("row count does not match timestamps")
        if m != len(self.column_names):
            raise ValueError("column count does not match column_names")
        if len(set(self.column_names)) != m:
            raise ValueError("column names are not unique")
        diffs = np.diff(self.timestamps)
        if np.any(diffs <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if diffs.size and np.any(diffs != self.period_s):
            raise ValueError("timestamps are not uniformly spaced at period_s")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values contain NaN or inf")

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    def column_index(self, name: str) -> int:
        return self.column_names.index(name)


def ingest_csv(
    path: str | Path,
    period_s: int,
    node_of_column: dict[str, str] | None = None,
    catalog: SensorCatalog | None = None,
) -> TelemetryDataset:
    """Read a telemetry CSV: header ``timestamp,<col>,...``, epoch-second rows.

    Rows are sorted by timestamp; duplicate timestamps are an error.
    Missing sampling slots are forward-filled from the previous row and
    recorded in the dataset's fill log. When a catalog is given, every
    data column must appear in it.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0] != "timestamp":
            raise ValueError(f"{path}: first column must be 'timestamp'")
        columns = header[1:]
        if not columns:
            raise ValueError(f"{path}: no data columns")

        rows: list[tuple[int, list[float]]] = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(header):
                raise ValueError(f"{path}: row {lineno} has {len(raw)} cells, "
                                 f"expected {len(header)}")
            try:
                ts = int(raw[0])
            except ValueError:
                raise ValueError(
                    f"{path}: row {lineno}, column 'timestamp': "
                    f"cannot parse {raw[0]!r}"
                ) from None
            vals = []
            for col, cell in zip(columns, raw[1:]):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {lineno}, column {col!r}: "
                        f"cannot parse {cell!r}"
                    ) from None
            rows.append((ts, vals))

    if not rows:
        raise ValueError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    for (a, _), (b, _) in zip(rows, rows[1:]):
        if a == b:
            raise ValueError(f"{path}: duplicate timestamp {a}")

    if catalog is not None:
        known = set(catalog.column_names)
        extra = [c for c in columns if c not in known]
        if extra:
            raise ValueError(f"{path}: columns not in catalog: {extra}")

    timestamps: list[int] = []
    matrix: list[list[float]] = []
    fill_log: list[int] = []
    for ts, vals in rows:
        if timestamps:
            gap = ts - timestamps[-1]
            if gap % period_s != 0:
                raise ValueError(
                    f"{path}: timestamp {ts} is not aligned to the "
                    f"{period_s}s period"
                )
            while ts - timestamps[-1] > period_s:
                filled = timestamps[-1] + period_s
                timestamps.append(filled)
                matrix.append(list(matrix[-1]))
                fill_log.append(filled)
        timestamps.append(ts)
        matrix.append(vals)
    if fill_log:
        log.info("%s: forward-filled %d missing rows", path, len(fill_log))

    return TelemetryDataset(
        timestamps=np.array(timestamps, dtype=np.int64),
        period_s=period_s,
        column_names=list(columns),
        values=np.array(matrix, dtype=np.float64),
        node_of_column=dict(node_of_column or {}),
        fill_log=fill_log,
    )


def export_csv(dataset: TelemetryDataset, path: str | Path) -> None:
    """Write a dataset back to the telemetry CSV format.

    Floats are rendered with repr, which round-trips exactly through
    ingest_csv.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + dataset.column_names)
        for i, ts in enumerate(dataset.timestamps):
            writer.writerow([int(ts)] + [repr(float(v)) for v in dataset.values[i]])


def merge_labels(
    dataset: TelemetryDataset,
    events,
    roster: list[str] | set[str] | None = None,
) -> TelemetryDataset:
    """Attach ground-truth labels derived from a silent-drop schedule.

    A label (t, n) is True iff some event at node n covers timestamp t;
    coverage is the half-open interval [start_s, start_s + duration_s).
    Events whose node is not in the dataset's node map or the supplied
    roster are an error; events entirely outside the dataset's time range
    only produce a warning.
    """
    known = set(dataset.node_of_column.values())
    if roster:
        known |= set(roster)
    if not known:
        raise ValueError("no node roster available to validate events against")

    labels: dict[str, np.ndarray] = {
        n: np.zeros(dataset.n_rows, dtype=bool) for n in sorted(known)
    }
    ts = dataset.timestamps
    t_lo = int(ts[0]) if len(ts) else 0
    t_hi = int(ts[-1]) if len(ts) else 0
    for ev in events:
        if ev.node not in known:
            raise ValueError(f"event references unknown node {ev.node!r}")
        start, end = ev.start_s, ev.start_s + ev.duration_s
        if end <= t_lo or start > t_hi:
            log.warning(
                "event at %s [%s, %s) lies outside the dataset time range",
                ev.node, start, end,
            )
            continue
        labels[ev.node] |= (ts >= start) & (ts < end)

    return dataclasses.replace(dataset, labels=labels)


@dataclass
class FlagTable:
    """Per-(timestamp, node) boolean flags: ground truth or detections."""

    timestamps: np.ndarray
    flags: dict[str, np.ndarray]

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        for node, vec in self.flags.items():
            vec = np.asarray(vec, dtype=bool)
            if vec.shape != self.timestamps.shape:
                raise ValueError(f"flag vector for {node!r} has wrong length")
            self.flags[node] = vec

    def as_dict(self) -> dict[tuple[int, str], bool]:
        out = {}
        for node in sorted(self.flags):
            vec = self.flags[node]
            for i, ts in enumerate(self.timestamps):
                out[(int(ts), node)] = bool(vec[i])
        return out


def write_flags_csv(table: FlagTable, path: str | Path) -> None:
    """Write the label/detection sidecar: ``timestamp,node,black_hole``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "node", "black_hole"])
        for node in sorted(table.flags):
            vec = table.flags[node]
            for i, ts in enumerate(table.timestamps):
                writer.writerow([int(ts), node, int(vec[i])])


def read_flags_csv(path: str | Path) -> FlagTable:
    """Read a label/detection sidecar written by write_flags_csv.

    Every node must cover the same timestamp set (the writer guarantees
    it; partial files are rejected rather than silently padded).
    """
    path = Path(path)
    per_node: dict[str, dict[int, bool]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["timestamp", "node", "black_hole"]:
            raise ValueError(f"{path}: not a label sidecar (bad header)")
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            try:
                ts, node, flag = int(raw[0]), raw[1], int(raw[2])
            except (ValueError, IndexError):
                raise ValueError(f"{path}: row {lineno}: malformed") from None
            if flag not in (0, 1):
                raise ValueError(f"{path}: row {lineno}: black_hole must be 0/1")
            per_node.setdefault(node, {})
            if ts in per_node[node]:
                raise ValueError(f"{path}: duplicate ({ts}, {node})")
            per_node[node][ts] = bool(flag)

    if not per_node:
        raise ValueError(f"{path}: no rows")
    ts_sets = {node: frozenset(d) for node, d in per_node.items()}
    universe = frozenset.union(*ts_sets.values())
    for node, tss in ts_sets.items():
        if tss != universe:
            raise ValueError(f"{path}: node {node!r} does not cover all timestamps")
    timestamps = np.array(sorted(universe), dtype=np.int64)
    flags = {
        node: np.array([per_node[node][int(t)] for t in timestamps], dtype=bool)
        for node in per_node
    }
    return FlagTable(timestamps=timestamps, flags=flags)


def labels_as_flag_table(dataset: TelemetryDataset) -> FlagTable:
    if dataset.labels is None:
        raise ValueError("dataset has no labels")
    return FlagTable(
        timestamps=dataset.timestamps.copy(),
        flags={n: v.copy() for n, v in dataset.labels.items()},
    )
