"""Dataset splitting, detection scoring, paired comparisons, PDR gain.

The split mirrors the monitored-data protocol: 70% train / 30% test with
a 15%-of-total validation slice carved from the tail of the training
block (chronological by default, seeded-random as an option). Scoring is
per (timestamp, node) against ground truth; the paired comparison runs
one detector protocol over raw features and over the curated matrix and
reports quality plus wall-clock fit time for each arm.
"""

from __future__ import annotations

import dataclasses
import logging
import platform
from dataclasses import dataclass, field

import numpy as np

from . import bhmm as bhmm_mod
from . import detector as det_mod
from .bhmm import FeatureMatrix
from .netsim import SimOutput
from .telemetry import FlagTable, TelemetryDataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    test_fraction: float = 0.30
    validation_fraction: float = 0.15  # of the total, carved inside train
    mode: str = "chronological"  # or seeded_random

    def __post_init__(self):
        if abs(self.train_fraction + self.test_fraction - 1.0) > 1e-9:
            raise ValueError("train and test fractions must sum to 1")
        if not 0.0 < self.validation_fraction < self.train_fraction:
            raise ValueError("validation must be a proper slice of train")
        if self.mode not in ("chronological", "seeded_random"):
            raise ValueError(f"unknown split mode {self.mode!r}")


def split_indices(
    n: int, spec: SplitSpec = SplitSpec(), seed: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row indices (train, validation, test); validation is inside train.

    Chronological mode keeps time order and takes validation from the
    tail of the training block.
    """
    if n < 10:
        raise ValueError("need at least 10 rows to split")
    n_train = int(np.floor(spec.train_fraction * n))
    n_val = int(np.floor(spec.validation_fraction * n))
    if spec.mode == "chronological":
        order = np.arange(n)
    else:
        if seed is None:
            raise ValueError("seeded_random mode requires a seed")
        order = np.random.default_rng(seed).permutation(n)
    train = order[:n_train]
    val = train[n_train - n_val:]
    test = order[n_train:]
    return train, val, test


def split_matrix(
    m: FeatureMatrix, spec: SplitSpec = SplitSpec(), seed: int | None = None
) -> tuple[FeatureMatrix, FeatureMatrix, FeatureMatrix]:
    tr, va, te = split_indices(m.n_rows, spec, seed)

    def take(idx: np.ndarray) -> FeatureMatrix:
        return dataclasses.replace(
            m, timestamps=m.timestamps[idx], values=m.values[idx]
        )

    return take(tr), take(va), take(te)


@dataclass
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    per_node: dict[str, dict] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n if self.n else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1_macro(self) -> float:
        return 0.5 * (_f1(self.tp, self.fp, self.fn)
                      + _f1(self.tn, self.fn, self.fp))

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1_macro": self.f1_macro,
            "recall": self.recall,
            "confusion": {"tp": self.tp, "fp": self.fp,
                          "tn": self.tn, "fn": self.fn},
            "per_node": self.per_node,
            "notes": self.notes,
        }


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def _confusion(pred: dict, truth: dict, keys) -> tuple[int, int, int, int]:
    tp = fp = tn = fn = 0
    for k in keys:
        p, t = pred[k], truth[k]
        if p and t:
            tp += 1
        elif p and not t:
            fp += 1
        elif not p and t:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn


def score_detections(predicted: FlagTable, truth: FlagTable) -> EvalReport:
    """Confusion-matrix scoring over identical (timestamp, node) keys."""
    pred = predicted.as_dict()
    true = truth.as_dict()
    extra = sorted(set(pred) - set(true))
    missing = sorted(set(true) - set(pred))
    if extra or missing:
        raise ValueError(
            "detection/truth key mismatch: "
            f"{len(extra)} extra (first: {extra[:3]}), "
            f"{len(missing)} missing (first: {missing[:3]})"
        )
    keys = sorted(pred)
    tp, fp, tn, fn = _confusion(pred, true, keys)
    report = EvalReport(tp=tp, fp=fp, tn=tn, fn=fn)
    if tp + fn == 0:
        report.notes.append("no positive ground truth: recall reported as 0")
    for node in sorted(predicted.flags):
        node_keys = [k for k in keys if k[1] == node]
        ntp, nfp, ntn, nfn = _confusion(pred, true, node_keys)
        sub = EvalReport(tp=ntp, fp=nfp, tn=ntn, fn=nfn)
        report.per_node[node] = {
            "accuracy": sub.accuracy,
            "f1_macro": sub.f1_macro,
            "recall": sub.recall,
            "confusion": {"tp": ntp, "fp": nfp, "tn": ntn, "fn": nfn},
        }
    return report


@dataclass
class TimingReport:
    variant: str
    n_features: int
    n_samples: int
    fit_seconds: float
    environment: str = field(
        default_factory=lambda: f"{platform.platform()} / {platform.processor() or 'unknown cpu'}"
    )

    def to_json_dict(self) -> dict:
        return {
            "variant": self.variant,
            "n_features": self.n_features,
            "n_samples": self.n_samples,
            "fit_seconds": self.fit_seconds,
            "environment": self.environment,
        }


@dataclass
class DetectorProtocol:
    """Everything the per-node detection run needs besides the matrix."""

    eps_grid: list[float]
    min_pts_grid: list[int]
    rounds: int = 3
    max_noise_fraction: float = 0.25
    split: SplitSpec = field(default_factory=SplitSpec)
    seed: int | None = None
    nodes: list[str] | None = None  # None: every node with columns


def run_detection(
    matrix: FeatureMatrix,
    truth: FlagTable,
    protocol: DetectorProtocol,
) -> tuple[EvalReport, FlagTable, dict[str, det_mod.TuningReport]]:
    """Tune per node on validation rows, flag test rows, score them."""
    tr_idx, va_idx, te_idx = split_indices(
        matrix.n_rows, protocol.split, protocol.seed
    )
    groups = det_mod.node_column_map(matrix)
    nodes = protocol.nodes or sorted(groups)
    flags: dict[str, np.ndarray] = {}
    tuning: dict[str, det_mod.TuningReport] = {}
    test_ts = matrix.timestamps[te_idx]
    for node in nodes:
        if node not in groups:
            raise ValueError(f"node {node!r} has no feature columns")
        sub = matrix.select(groups[node])
        sub_train = sub.values[tr_idx]
        keep = sub_train.std(axis=0) > 0.0
        if not keep.any():
            raise ValueError(f"node {node!r}: all columns constant on train")
        cols = [c for c, k in zip(sub.column_names, keep) if k]
        sub = sub.select(cols)
        report = det_mod.tune_hyperparameters(
            sub.values[tr_idx], sub.values[va_idx],
            protocol.eps_grid, protocol.min_pts_grid, protocol.rounds,
            max_noise_fraction=protocol.max_noise_fraction,
        )
        tuning[node] = report
        scaler = det_mod.fit_standardizer(sub.values[tr_idx])
        test_std = scaler.apply(sub.values[te_idx])
        assign = det_mod.dbscan(test_std, report.selected)
        flags[node] = assign.labels < 0

    detections = FlagTable(timestamps=test_ts.copy(), flags=flags)
    truth_test = FlagTable(
        timestamps=test_ts.copy(),
        flags={n: truth.flags[n][te_idx] for n in nodes},
    )
    return score_detections(detections, truth_test), detections, tuning


@dataclass
class PairedComparison:
    with_bhmm: EvalReport
    without_bhmm: EvalReport
    with_timing: TimingReport
    without_timing: TimingReport
    with_columns: int
    without_columns: int

    def to_json_dict(self) -> dict:
        return {
            "with_bhmm": self.with_bhmm.to_json_dict(),
            "without_bhmm": self.without_bhmm.to_json_dict(),
            "with_columns": self.with_columns,
            "without_columns": self.without_columns,
        }


def guarded_standardize(values: np.ndarray) -> np.ndarray:
    """z-scale with a unit floor on std; lets timing runs keep constants."""
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    std[std == 0.0] = 1.0
    return (values - mean) / std


def compare_bhmm(
    dataset: TelemetryDataset,
    protocol: DetectorProtocol,
    sparse_threshold: float = 0.95,
    corr_threshold: float = 0.9,
    timing_params: det_mod.DbscanParams | None = None,
) -> PairedComparison:
    """Identical detector protocol over raw vs curated features.

    The raw arm only removes constant columns (DBSCAN needs finite,
    non-degenerate standardization); the curated arm runs the full
    pipeline. Fit timing is one whole-matrix DBSCAN per arm at fixed
    params so the measured difference is the feature count.
    """
    if dataset.labels is None:
        raise ValueError("compare_bhmm needs a labeled dataset")
    truth = FlagTable(
        timestamps=dataset.timestamps.copy(),
        flags={n: v.copy() for n, v in dataset.labels.items()},
    )

    raw = bhmm_mod.from_dataset(dataset)
    raw, _ = bhmm_mod.drop_constant_features(raw)
    curated, _ = bhmm_mod.run_bhmm_pipeline(
        dataset, sparse_threshold=sparse_threshold, corr_threshold=corr_threshold
    )

    without_report, _, _ = run_detection(raw, truth, protocol)
    with_report, _, _ = run_detection(curated, truth, protocol)

    timing_params = timing_params or det_mod.DbscanParams(eps=2.0, min_pts=10)
    _, t_without = det_mod.timed_fit(
        guarded_standardize(raw.values), timing_params
    )
    _, t_with = det_mod.timed_fit(
        guarded_standardize(curated.values), timing_params
    )
    return PairedComparison(
        with_bhmm=with_report,
        without_bhmm=without_report,
        with_timing=TimingReport(
            variant="with_bhmm", n_features=curated.n_cols,
            n_samples=curated.n_rows, fit_seconds=t_with,
        ),
        without_timing=TimingReport(
            variant="without_bhmm", n_features=raw.n_cols,
            n_samples=raw.n_rows, fit_seconds=t_without,
        ),
        with_columns=curated.n_cols,
        without_columns=raw.n_cols,
    )


@dataclass
class PdrComparison:
    windows: list[dict]
    mean_gain: float

    def to_json_dict(self) -> dict:
        return {"windows": self.windows, "mean_gain": self.mean_gain}


def pdr_gain(
    sim_without: SimOutput, sim_with: SimOutput, events=None
) -> PdrComparison:
    """Per-event-window PDR delta between paired runs.

    Refuses runs that do not share seed, events, flows and topology.
    """
    a, b = sim_without, sim_with
    if a.config.seed != b.config.seed:
        raise ValueError("unpaired runs: different seeds")
    if a.events != b.events:
        raise ValueError("unpaired runs: different event schedules")
    if [f.name for f in a.flows] != [f.name for f in b.flows]:
        raise ValueError("unpaired runs: different flows")
    if a.topology.nodes != b.topology.nodes:
        raise ValueError("unpaired runs: different topologies")
    events = events if events is not None else a.events

    from .netsim import compute_pdr  # local to avoid import cycle at module load

    windows = []
    gains = []
    for ev in events:
        window = (ev.start_s, ev.start_s + ev.duration_s)
        p_without = compute_pdr(a.delivery, window)
        p_with = compute_pdr(b.delivery, window)
        gain = p_with - p_without
        windows.append({
            "node": ev.node,
            "role": a.topology.role(ev.node),
            "start_s": ev.start_s,
            "duration_s": ev.duration_s,
            "pdr_without": p_without,
            "pdr_with": p_with,
            "gain": gain,
        })
        gains.append(gain)
    mean_gain = float(np.mean(gains)) if gains else 0.0
    return PdrComparison(windows=windows, mean_gain=mean_gain)
