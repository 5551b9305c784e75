"""Command-line entry point: file-based stage handoff between modules.

Subcommands: simulate, ingest, bhmm, tune, detect, evaluate, report.
Every stage reads and writes plain CSV/JSON artifacts so a whole
experiment is reproducible from one seed; simulate records content
hashes in a manifest. Exit codes: 0 success, 2 usage or configuration
error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bhmm as bhmm_mod
from . import detector as det_mod
from . import evaluation as eval_mod
from . import netsim
from . import telemetry

log = logging.getLogger("bhdetect")


class ConfigError(Exception):
    """Bad usage or configuration; maps to exit code 2."""


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _load_json(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"missing file: {path}")
    with path.open() as fh:
        return json.load(fh)


def _load_scenario(arg: str) -> netsim.Scenario:
    if arg in ("benchmark", "mitigation"):
        return netsim.load_bundled_scenario(arg)
    path = Path(arg)
    if not path.exists():
        raise ConfigError(f"missing scenario file: {path}")
    return netsim.load_scenario(path)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _node_map_from(args) -> dict[str, str]:
    if not getattr(args, "columns", None):
        return {}
    payload = _load_json(Path(args.columns))
    mapping = payload.get("node_of_column", payload)
    if not isinstance(mapping, dict):
        raise ConfigError(f"{args.columns}: no node_of_column mapping found")
    return {str(k): str(v) for k, v in mapping.items()}


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario.config.seed = args.seed
    out = _out_dir(args)
    events = scenario.realize_events()
    sim = netsim.simulate(scenario.topology, scenario.flows, events,
                          scenario.config)

    telemetry.export_csv(sim.telemetry, out / "telemetry.csv")
    telemetry.write_flags_csv(
        telemetry.labels_as_flag_table(sim.telemetry), out / "labels.csv"
    )
    netsim.write_delivery_csv(sim.delivery, out / "delivery.csv")
    netsim.write_events_csv(sim.events, out / "events.csv")

    artifacts = {
        name: _sha256(out / name)
        for name in ("telemetry.csv", "labels.csv", "delivery.csv", "events.csv")
    }
    _write_json(
        {
            "command": "simulate",
            "scenario": args.scenario,
            "seed": scenario.config.seed,
            "period_s": scenario.config.period_s,
            "artifacts": artifacts,
            "node_of_column": sim.telemetry.node_of_column,
        },
        out / "manifest.json",
    )
    print(f"simulate: {sim.telemetry.n_rows} intervals, "
          f"{len(sim.telemetry.column_names)} columns, "
          f"{len(sim.events)} events -> {out}")
    return 0


def cmd_ingest(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"missing input file: {path}")
    out = _out_dir(args)
    ds = telemetry.ingest_csv(path, period_s=args.period)
    telemetry.export_csv(ds, out / "normalized.csv")
    _write_json(
        {
            "command": "ingest",
            "rows": ds.n_rows,
            "columns": len(ds.column_names),
            "forward_filled": ds.fill_log,
        },
        out / "ingest_log.json",
    )
    print(f"ingest: {ds.n_rows} rows ({len(ds.fill_log)} forward-filled) -> {out}")
    return 0


def _load_feature_matrix(args) -> bhmm_mod.FeatureMatrix:
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"missing input file: {path}")
    ds = telemetry.ingest_csv(path, period_s=args.period,
                              node_of_column=_node_map_from(args))
    return bhmm_mod.from_dataset(ds)


def cmd_bhmm(args) -> int:
    if not 0.0 < args.sparse_threshold <= 1.0:
        raise ConfigError("sparse threshold must be in (0, 1]")
    if not 0.0 < args.corr_threshold < 1.0:
        raise ConfigError("correlation threshold must be in (0, 1)")
    m = _load_feature_matrix(args)
    out = _out_dir(args)
    reduced, report = bhmm_mod.run_bhmm_pipeline(
        m, sparse_threshold=args.sparse_threshold,
        corr_threshold=args.corr_threshold,
    )
    telemetry.export_csv(bhmm_mod.to_dataset(reduced, args.period),
                         out / "features.csv")
    _write_json(report.to_json_dict(), out / "bhmm_report.json")
    _write_json(
        {
            "command": "bhmm",
            "node_of_column": reduced.node_of_column,
            "provenance": reduced.provenance,
        },
        out / "features_manifest.json",
    )
    print(f"bhmm: {len(report.input_columns)} -> {len(report.final_columns)} "
          f"columns -> {out}")
    return 0


def _split_spec(args) -> eval_mod.SplitSpec:
    return eval_mod.SplitSpec(mode=args.split)


def cmd_tune(args) -> int:
    m = _load_feature_matrix(args)
    out = _out_dir(args)
    if args.node:
        groups = det_mod.node_column_map(m)
        if args.node not in groups:
            raise ConfigError(f"node {args.node!r} has no feature columns")
        m = m.select(groups[args.node])
    tr, va, _ = eval_mod.split_indices(m.n_rows, _split_spec(args), args.seed)
    keep = m.values[tr].std(axis=0) > 0.0
    m = m.select([c for c, k in zip(m.column_names, keep) if k])
    report = det_mod.tune_hyperparameters(
        m.values[tr], m.values[va],
        eps_grid=args.eps, min_pts_grid=args.min_pts, rounds=args.rounds,
        max_noise_fraction=args.max_noise_fraction,
    )
    _write_json(report.to_json_dict(), out / "tuning_report.json")
    print(f"tune: selected eps={report.selected.eps} "
          f"min_pts={report.selected.min_pts} -> {out}")
    return 0


def cmd_detect(args) -> int:
    m = _load_feature_matrix(args)
    out = _out_dir(args)
    if args.tuning_report:
        sel = _load_json(Path(args.tuning_report))["selected"]
        params = det_mod.DbscanParams(eps=float(sel["eps"]),
                                      min_pts=int(sel["min_pts"]))
    elif args.eps is not None and args.min_pts is not None:
        params = det_mod.DbscanParams(eps=args.eps, min_pts=args.min_pts)
    else:
        raise ConfigError("detect needs --eps and --min-pts, or --tuning-report")

    tr, _, te = eval_mod.split_indices(m.n_rows, _split_spec(args), args.seed)
    rows = np.arange(m.n_rows) if args.scope == "all" else te
    keep = m.values[tr].std(axis=0) > 0.0
    m = m.select([c for c, k in zip(m.column_names, keep) if k])
    scaler = det_mod.fit_standardizer(m.values[tr])
    import dataclasses as _dc

    scoped = _dc.replace(m, timestamps=m.timestamps[rows],
                         values=scaler.apply(m.values[rows]))
    flags = det_mod.detect_black_holes(scoped, params,
                                       per_node=not args.whole_matrix)
    telemetry.write_flags_csv(flags, out / "detections.csv")
    n_flagged = int(sum(v.sum() for v in flags.flags.values()))
    print(f"detect: {n_flagged} flagged (timestamp, node) pairs -> {out}")
    return 0


def _restrict_truth(truth: telemetry.FlagTable,
                    detections: telemetry.FlagTable) -> telemetry.FlagTable:
    ts_index = {int(t): i for i, t in enumerate(truth.timestamps)}
    missing_nodes = set(detections.flags) - set(truth.flags)
    if missing_nodes:
        raise ConfigError(f"labels lack nodes: {sorted(missing_nodes)}")
    missing_ts = [int(t) for t in detections.timestamps if int(t) not in ts_index]
    if missing_ts:
        raise ConfigError(
            f"labels lack {len(missing_ts)} timestamps (first: {missing_ts[:3]})"
        )
    idx = np.array([ts_index[int(t)] for t in detections.timestamps])
    return telemetry.FlagTable(
        timestamps=detections.timestamps.copy(),
        flags={n: truth.flags[n][idx] for n in sorted(detections.flags)},
    )


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    if args.pdr:
        scenario = _load_scenario(args.scenario)
        events = scenario.realize_events()
        base = netsim.simulate(scenario.topology, scenario.flows, events,
                               scenario.config)
        if args.detections:
            table = telemetry.read_flags_csv(Path(args.detections))
            detections = [
                (node, int(ts))
                for node in sorted(table.flags)
                for ts, hit in zip(table.timestamps, table.flags[node])
                if hit
            ]
        else:
            detections = netsim.oracle_detections(events)
        mitigated = netsim.apply_mitigation(base, detections)
        gain = eval_mod.pdr_gain(base, mitigated)
        _write_json(gain.to_json_dict(), out / "pdr_comparison.json")
        print(f"evaluate --pdr: mean gain {gain.mean_gain:.4f} -> {out}")
        return 0

    if args.paired:
        if not args.telemetry or not args.labels:
            raise ConfigError("--paired needs --telemetry and --labels")
        scenario = _load_scenario(args.scenario) if args.scenario else None
        ds = telemetry.ingest_csv(Path(args.telemetry), period_s=args.period,
                                  node_of_column=_node_map_from(args))
        truth = telemetry.read_flags_csv(Path(args.labels))
        labels = {
            n: np.array([bool(v) for v in truth.flags[n]])
            for n in truth.flags
        }
        import dataclasses as _dc

        ds = _dc.replace(ds, labels=labels)
        det_cfg = scenario.detector if scenario else {}
        bh_cfg = scenario.bhmm if scenario else {}
        protocol = eval_mod.DetectorProtocol(
            eps_grid=det_cfg.get("eps_grid", args.eps),
            min_pts_grid=det_cfg.get("min_pts_grid", args.min_pts),
            rounds=det_cfg.get("rounds", args.rounds),
            max_noise_fraction=det_cfg.get("max_noise_fraction",
                                           args.max_noise_fraction),
            split=_split_spec(args),
            seed=args.seed,
            nodes=det_cfg.get("nodes"),
        )
        if not protocol.eps_grid or not protocol.min_pts_grid:
            raise ConfigError("--paired needs a hyperparameter grid "
                              "(scenario detector section or --eps/--min-pts)")
        comparison = eval_mod.compare_bhmm(
            ds, protocol,
            sparse_threshold=bh_cfg.get("sparse_threshold", 0.95),
            corr_threshold=bh_cfg.get("corr_threshold", 0.9),
        )
        _write_json(comparison.to_json_dict(), out / "comparison.json")
        _write_json(
            {
                "with_bhmm": comparison.with_timing.to_json_dict(),
                "without_bhmm": comparison.without_timing.to_json_dict(),
            },
            out / "timing.json",
        )
        print("evaluate --paired: "
              f"W/ acc {comparison.with_bhmm.accuracy:.4f} vs "
              f"W/O acc {comparison.without_bhmm.accuracy:.4f} -> {out}")
        return 0

    if not args.detections or not args.labels:
        raise ConfigError("evaluate needs --detections and --labels "
                          "(ground truth required)")
    detections = telemetry.read_flags_csv(Path(args.detections))
    truth = telemetry.read_flags_csv(Path(args.labels))
    truth = _restrict_truth(truth, detections)
    report = eval_mod.score_detections(detections, truth)
    _write_json(report.to_json_dict(), out / "eval_report.json")
    print(f"evaluate: accuracy {report.accuracy:.4f} "
          f"f1_macro {report.f1_macro:.4f} recall {report.recall:.4f} -> {out}")
    return 0


def cmd_report(args) -> int:
    src = Path(args.input)
    if not src.exists():
        raise ConfigError(f"missing report directory: {src}")
    rows: list[tuple[str, str, str, str]] = []

    def add(metric: str, variant: str, node: str, value) -> None:
        rows.append((metric, variant, node, repr(float(value))))

    eval_report = src / "eval_report.json"
    if eval_report.exists():
        payload = _load_json(eval_report)
        for metric in ("accuracy", "f1_macro", "recall"):
            add(metric, "detector", "all", payload[metric])
        for node, sub in payload.get("per_node", {}).items():
            for metric in ("accuracy", "f1_macro", "recall"):
                add(metric, "detector", node, sub[metric])
    comparison = src / "comparison.json"
    if comparison.exists():
        payload = _load_json(comparison)
        for variant in ("with_bhmm", "without_bhmm"):
            for metric in ("accuracy", "f1_macro", "recall"):
                add(metric, variant, "all", payload[variant][metric])
            for node, sub in payload[variant].get("per_node", {}).items():
                for metric in ("accuracy", "f1_macro", "recall"):
                    add(metric, variant, node, sub[metric])
    pdr = src / "pdr_comparison.json"
    if pdr.exists():
        payload = _load_json(pdr)
        add("pdr_mean_gain", "mitigation", "all", payload["mean_gain"])
        for w in payload["windows"]:
            add("pdr_gain", "mitigation", w["node"], w["gain"])
    if not rows:
        raise ConfigError(f"no report files found under {src}")

    out_path = Path(args.out)
    with out_path.open("w", newline="") as fh:
        import csv as _csv

        w = _csv.writer(fh)
        w.writerow(["metric", "variant", "node", "value"])
        w.writerows(rows)
    print(f"report: {len(rows)} rows -> {out_path}")
    return 0


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bhdetect",
        description="Silent packet-drop detection toolkit: simulate, curate "
                    "features, tune, detect, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the backbone simulation")
    p.add_argument("--scenario", required=True,
                   help="scenario JSON path, or 'benchmark'/'mitigation'")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="validate and align a telemetry CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--period", type=int, default=300)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bhmm", help="run the feature-curation pipeline")
    p.add_argument("--input", required=True, help="telemetry CSV")
    p.add_argument("--period", type=int, default=300)
    p.add_argument("--columns", help="manifest JSON with node_of_column")
    p.add_argument("--sparse-threshold", type=float, default=0.95)
    p.add_argument("--corr-threshold", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bhmm)

    p = sub.add_parser("tune", help="sweep DBSCAN hyperparameters")
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--period", type=int, default=300)
    p.add_argument("--columns", help="manifest JSON with node_of_column")
    p.add_argument("--node", help="tune on a single node's columns")
    p.add_argument("--eps", type=_float_list, default=[0.5, 1.0, 2.0, 4.0])
    p.add_argument("--min-pts", type=_int_list, default=[5, 10, 20])
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--max-noise-fraction", type=float, default=0.25)
    p.add_argument("--split", choices=["chronological", "seeded_random"],
                   default="chronological")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("detect", help="flag black-hole candidates")
    p.add_argument("--input", required=True, help="feature CSV")
    p.add_argument("--period", type=int, default=300)
    p.add_argument("--columns", help="manifest JSON with node_of_column")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--min-pts", type=int, default=None)
    p.add_argument("--tuning-report", help="use the selected params from tune")
    p.add_argument("--scope", choices=["test", "all"], default="test")
    p.add_argument("--whole-matrix", action="store_true",
                   help="one DBSCAN over all columns instead of per node")
    p.add_argument("--split", choices=["chronological", "seeded_random"],
                   default="chronological")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score detections / compare pipelines")
    p.add_argument("--detections")
    p.add_argument("--labels")
    p.add_argument("--paired", action="store_true",
                   help="full with/without feature-curation comparison")
    p.add_argument("--pdr", action="store_true",
                   help="paired mitigation runs and PDR gain")
    p.add_argument("--telemetry", help="labeled telemetry CSV (--paired)")
    p.add_argument("--columns", help="manifest JSON with node_of_column")
    p.add_argument("--scenario", help="scenario JSON ('benchmark'/'mitigation' ok)")
    p.add_argument("--period", type=int, default=300)
    p.add_argument("--eps", type=_float_list, default=None)
    p.add_argument("--min-pts", type=_int_list, default=None)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--max-noise-fraction", type=float, default=0.25)
    p.add_argument("--split", choices=["chronological", "seeded_random"],
                   default="chronological")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="flatten report JSONs to a CSV")
    p.add_argument("--input", required=True, help="directory with report JSONs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
