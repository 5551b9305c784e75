"""Black Hole-sensitive Metric Matrix (BHMM) feature curation.

Turns a raw telemetry matrix into the reduced matrix the detector runs
on, in five steps applied in a fixed order:

  1. drop constant columns,
  2. drop near-all-zero columns,
  3. add calendar features (minute of day, ISO week, ISO weekday),
  4. add input/output ratio features per interface metric,
  5. prune one side of every highly correlated column pair.

Every decision lands in a BhmmReport so the reduction is auditable.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .telemetry import TelemetryDataset, parse_column_name

TEMPORAL_COLUMNS = ("minute", "week_of_year", "day_of_week")
RATIO_PREFIX = "I/O "
RATIO_EPS = 1e-6

PROVENANCE_RAW = "raw_sensor"
PROVENANCE_TEMPORAL = "temporal"
PROVENANCE_RATIO = "io_ratio"


@dataclass
class FeatureMatrix:
    """Dense feature matrix with per-column provenance."""

    timestamps: np.ndarray
    column_names: list[str]
    values: np.ndarray
    provenance: dict[str, str] = field(default_factory=dict)
    node_of_column: dict[str, str] = field(default_factory=dict)

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
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values contain NaN or inf")
        for name in self.column_names:
            self.provenance.setdefault(name, _provenance_from_name(name))

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def n_cols(self) -> int:
        return len(self.column_names)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def select(self, names: list[str]) -> "FeatureMatrix":
        idx = [self.column_names.index(n) for n in names]
        return FeatureMatrix(
            timestamps=self.timestamps,
            column_names=list(names),
            values=self.values[:, idx],
            provenance={n: self.provenance[n] for n in names},
            node_of_column={
                n: self.node_of_column[n] for n in names if n in self.node_of_column
            },
        )


def _provenance_from_name(name: str) -> str:
    if name in TEMPORAL_COLUMNS:
        return PROVENANCE_TEMPORAL
    if name.startswith(RATIO_PREFIX):
        return PROVENANCE_RATIO
    return PROVENANCE_RAW


def from_dataset(dataset: TelemetryDataset) -> FeatureMatrix:
    return FeatureMatrix(
        timestamps=dataset.timestamps.copy(),
        column_names=list(dataset.column_names),
        values=dataset.values.copy(),
        node_of_column=dict(dataset.node_of_column),
    )


def to_dataset(m: FeatureMatrix, period_s: int) -> TelemetryDataset:
    return TelemetryDataset(
        timestamps=m.timestamps.copy(),
        period_s=period_s,
        column_names=list(m.column_names),
        values=m.values.copy(),
        node_of_column=dict(m.node_of_column),
    )


def drop_constant_features(
    m: FeatureMatrix, exempt: tuple[str, ...] = ()
) -> tuple[FeatureMatrix, list[str]]:
    """Remove columns whose values are all exactly equal."""
    if m.n_cols == 0 or m.n_rows == 0:
        raise ValueError("empty matrix")
    dropped = [
        name
        for i, name in enumerate(m.column_names)
        if name not in exempt and np.all(m.values[:, i] == m.values[0, i])
    ]
    kept = [n for n in m.column_names if n not in dropped]
    if not kept:
        raise ValueError("no informative features remain: all columns constant")
    return m.select(kept), dropped


def drop_sparse_features(
    m: FeatureMatrix,
    zero_fraction_threshold: float = 0.95,
    exempt: tuple[str, ...] = (),
) -> tuple[FeatureMatrix, list[tuple[str, float]]]:
    """Remove columns dominated by exact zeros.

    A column goes when its fraction of exact-zero values reaches the
    threshold; the fraction is reported for each dropped column.
    """
    if not 0.0 < zero_fraction_threshold <= 1.0:
        raise ValueError("zero_fraction_threshold must be in (0, 1]")
    dropped: list[tuple[str, float]] = []
    for i, name in enumerate(m.column_names):
        if name in exempt:
            continue
        frac = float(np.count_nonzero(m.values[:, i] == 0.0)) / m.n_rows
        if frac >= zero_fraction_threshold:
            dropped.append((name, frac))
    gone = {n for n, _ in dropped}
    kept = [n for n in m.column_names if n not in gone]
    return m.select(kept), dropped


def add_temporal_features(m: FeatureMatrix) -> tuple[FeatureMatrix, list[str]]:
    """Append minute-of-day, ISO week and ISO weekday columns (UTC).

    Columns already present are not re-added, so the step is idempotent.
    """
    added = [c for c in TEMPORAL_COLUMNS if c not in m.column_names]
    if not added:
        return m, []
    minute = np.empty(m.n_rows, dtype=np.float64)
    week = np.empty(m.n_rows, dtype=np.float64)
    weekday = np.empty(m.n_rows, dtype=np.float64)
    for i, ts in enumerate(m.timestamps):
        dt = datetime.fromtimestamp(int(ts), tz=timezone.utc)
        minute[i] = dt.hour * 60 + dt.minute
        iso = dt.isocalendar()
        week[i] = iso.week
        weekday[i] = iso.weekday
    new_cols = {"minute": minute, "week_of_year": week, "day_of_week": weekday}

    values = np.column_stack([m.values] + [new_cols[c] for c in added])
    provenance = dict(m.provenance)
    for c in added:
        provenance[c] = PROVENANCE_TEMPORAL
    return (
        FeatureMatrix(
            timestamps=m.timestamps,
            column_names=m.column_names + added,
            values=values,
            provenance=provenance,
            node_of_column=dict(m.node_of_column),
        ),
        added,
    )


def add_io_ratio_features(
    m: FeatureMatrix, epsilon: float = RATIO_EPS
) -> tuple[FeatureMatrix, list[tuple[str, str, str]], list[str]]:
    """Append input/output ratio columns for paired interface metrics.

    For every canonical pair ``<model>.<scope>.input_X`` /
    ``<model>.<scope>.output_X`` a column ``I/O <model>.<scope>.X`` is
    appended with value input / max(output, epsilon); the guard keeps the
    drop-to-zero signature finite. Input or output columns without a
    partner are left alone and reported.
    """
    by_key: dict[tuple[str, str], dict[str, str]] = {}
    for name in m.column_names:
        try:
            model, scope, metric = parse_column_name(name)
        except ValueError:
            continue
        if metric.startswith("input_"):
            by_key.setdefault((model, scope), {})["in_" + metric[6:]] = name
        elif metric.startswith("output_"):
            by_key.setdefault((model, scope), {})["out_" + metric[7:]] = name

    added: list[tuple[str, str, str]] = []
    unpaired: list[str] = []
    new_names: list[str] = []
    new_cols: list[np.ndarray] = []
    for (model, scope), sides in sorted(by_key.items()):
        bases = sorted({k[3:] if k.startswith("in_") else k[4:] for k in sides})
        for base in bases:
            num = sides.get("in_" + base)
            den = sides.get("out_" + base)
            if num is None or den is None:
                unpaired.append(num or den)
                continue
            ratio_name = f"{RATIO_PREFIX}{model}.{scope}.{base}"
            if ratio_name in m.column_names:
                continue
            ratio = m.column(num) / np.maximum(m.column(den), epsilon)
            new_names.append(ratio_name)
            new_cols.append(ratio)
            added.append((num, den, ratio_name))

    if not new_names:
        return m, added, unpaired
    provenance = dict(m.provenance)
    node_of_column = dict(m.node_of_column)
    for (num, _, ratio_name) in added:
        provenance[ratio_name] = PROVENANCE_RATIO
        if num in node_of_column:
            node_of_column[ratio_name] = node_of_column[num]
    return (
        FeatureMatrix(
            timestamps=m.timestamps,
            column_names=m.column_names + new_names,
            values=np.column_stack([m.values] + new_cols),
            provenance=provenance,
            node_of_column=node_of_column,
        ),
        added,
        unpaired,
    )


@dataclass
class CorrelationMatrix:
    column_names: list[str]
    r: np.ndarray

    def pair(self, a: str, b: str) -> float:
        i, j = self.column_names.index(a), self.column_names.index(b)
        return float(self.r[i, j])


def pearson_correlation_matrix(m: FeatureMatrix) -> CorrelationMatrix:
    """Pairwise Pearson r; symmetric with an exact unit diagonal."""
    if m.n_rows < 2:
        raise ValueError("need at least 2 rows for correlation")
    stds = m.values.std(axis=0)
    for name, s in zip(m.column_names, stds):
        if s == 0.0:
            raise ValueError(
                f"zero-variance column {name!r}: drop constants before correlating"
            )
    r = np.corrcoef(m.values, rowvar=False)
    if r.ndim == 0:  # single column
        r = np.array([[1.0]])
    r = np.clip(r, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(column_names=list(m.column_names), r=r)


# Keep-priority when collapsing a correlated group: packet rates carry the
# most signal, active route count and route memory are the preferred
# route-table representatives, data rates and loads are redundant scalings.
_RANK_BY_METRIC = {
    "input_packet_rate": 0,
    "output_packet_rate": 0,
    "packet_rate": 0,
    "active_routes_count": 1,
    "protocol_route_memory": 2,
    "routes_count": 5,
    "backup_routes_count": 5,
    "deleted_routes_count": 5,
    "paths_count": 5,
    "redistribution_client_count": 5,
    "protocol_clients_count": 5,
    "input_data_rate": 6,
    "output_data_rate": 6,
    "data_rate": 6,
    "input_load": 7,
    "output_load": 7,
    "load": 7,
}


def _keep_rank(name: str) -> int:
    stripped = name[len(RATIO_PREFIX):] if name.startswith(RATIO_PREFIX) else name
    try:
        _, _, metric = parse_column_name(stripped)
    except ValueError:
        return 4
    return _RANK_BY_METRIC.get(metric, 4)


def prune_correlated(
    m: FeatureMatrix,
    corr: CorrelationMatrix,
    threshold: float = 0.9,
) -> tuple[FeatureMatrix, list[tuple[str, str, float]], list[tuple[str, str, float]]]:
    """Drop one column of every pair with |r| above the threshold.

    Pairs are visited in descending |r|; within each pair the keep-priority
    ranking decides the representative (ties broken lexicographically).
    Returns (matrix, pruned as (removed, kept, r), all flagged pairs).
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    names = corr.column_names
    absr = np.abs(corr.r)
    iu, ju = np.triu_indices(len(names), k=1)
    over = absr[iu, ju] > threshold
    pairs = sorted(
        zip(iu[over], ju[over]),
        key=lambda p: (-absr[p[0], p[1]], p[0], p[1]),
    )
    flagged = [(names[i], names[j], float(corr.r[i, j])) for i, j in pairs]

    alive = set(names)
    pruned: list[tuple[str, str, float]] = []
    for i, j in pairs:
        a, b = names[i], names[j]
        if a not in alive or b not in alive:
            continue
        keep, drop = sorted((a, b), key=lambda n: (_keep_rank(n), n))
        alive.discard(drop)
        pruned.append((drop, keep, float(corr.r[i, j])))

    kept = [n for n in m.column_names if n not in {d for d, _, _ in pruned}]
    return m.select(kept), pruned, flagged


@dataclass
class BhmmReport:
    """Full audit of one pipeline run."""

    input_columns: list[str]
    dropped_constant: list[str]
    dropped_sparse: list[tuple[str, float]]
    added_temporal: list[str]
    added_ratio: list[tuple[str, str, str]]
    unpaired_io: list[str]
    correlation_pairs: list[tuple[str, str, float]]
    pruned: list[tuple[str, str, float]]
    final_columns: list[str]
    sparse_threshold: float
    corr_threshold: float

    def validate(self) -> None:
        n_final = (
            len(self.input_columns)
            + len(self.added_temporal)
            + len(self.added_ratio)
            - len(self.dropped_constant)
            - len(self.dropped_sparse)
            - len(self.pruned)
        )
        if n_final != len(self.final_columns):
            raise AssertionError("report does not balance against final columns")
        if len(set(self.final_columns)) != len(self.final_columns):
            raise AssertionError("final columns contain duplicates")

    def to_json_dict(self) -> dict:
        return {
            "input_columns": self.input_columns,
            "dropped_constant": self.dropped_constant,
            "dropped_sparse": [
                {"column": c, "zero_fraction": f} for c, f in self.dropped_sparse
            ],
            "added_temporal": self.added_temporal,
            "added_ratio": [
                {"numerator": n, "denominator": d, "column": c}
                for n, d, c in self.added_ratio
            ],
            "unpaired_io": self.unpaired_io,
            "correlation_pairs": [
                {"a": a, "b": b, "r": r} for a, b, r in self.correlation_pairs
            ],
            "pruned": [
                {"removed": rm, "kept": kp, "r": r} for rm, kp, r in self.pruned
            ],
            "final_columns": self.final_columns,
            "params": {
                "sparse_threshold": self.sparse_threshold,
                "corr_threshold": self.corr_threshold,
            },
        }


def run_bhmm_pipeline(
    data: TelemetryDataset | FeatureMatrix,
    sparse_threshold: float = 0.95,
    corr_threshold: float = 0.9,
) -> tuple[FeatureMatrix, BhmmReport]:
    """Run the five curation steps in order and report every decision.

    Calendar and ratio columns are exempt from the drop and prune steps:
    they encode structure added on purpose, which also makes the pipeline
    idempotent on its own output.
    """
    m = from_dataset(data) if isinstance(data, TelemetryDataset) else data
    input_columns = list(m.column_names)
    exempt = tuple(
        n for n in m.column_names
        if m.provenance.get(n, PROVENANCE_RAW) != PROVENANCE_RAW
    )

    m, dropped_constant = drop_constant_features(m, exempt=exempt)
    m, dropped_sparse = drop_sparse_features(
        m, zero_fraction_threshold=sparse_threshold, exempt=exempt
    )
    m, added_temporal = add_temporal_features(m)
    m, added_ratio, unpaired = add_io_ratio_features(m)

    non_temporal = [
        n for n in m.column_names if m.provenance[n] != PROVENANCE_TEMPORAL
    ]
    corr = pearson_correlation_matrix(m.select(non_temporal))
    _, pruned, flagged = prune_correlated(
        m.select(non_temporal), corr, threshold=corr_threshold
    )
    final_names = [
        n for n in m.column_names if n not in {d for d, _, _ in pruned}
    ]
    result = m.select(final_names)

    report = BhmmReport(
        input_columns=input_columns,
        dropped_constant=dropped_constant,
        dropped_sparse=dropped_sparse,
        added_temporal=added_temporal,
        added_ratio=added_ratio,
        unpaired_io=unpaired,
        correlation_pairs=flagged,
        pruned=pruned,
        final_columns=list(result.column_names),
        sparse_threshold=sparse_threshold,
        corr_threshold=corr_threshold,
    )
    report.validate()
    return result, report
