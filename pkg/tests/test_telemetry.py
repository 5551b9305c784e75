import dataclasses
from datetime import datetime, timezone

import numpy as np
import pytest

from bhdetect.netsim import BlackHoleEvent
from bhdetect.telemetry import (
    MODEL_METRICS,
    ROUTE_METRICS,
    FlagTable,
    SensorCatalog,
    SensorDescriptor,
    TelemetryDataset,
    build_sensor_catalog,
    export_csv,
    ingest_csv,
    labels_as_flag_table,
    merge_labels,
    parse_column_name,
    read_flags_csv,
    write_flags_csv,
)


def expected_catalog_size(n_ifaces: int, protocols) -> int:
    # Independent enumeration of the per-model metric lists.
    per_iface = len(MODEL_METRICS["M1"]) + len(MODEL_METRICS["M2"])
    return n_ifaces * per_iface + len(protocols) * len(ROUTE_METRICS)


def test_catalog_counts_one_interface_both_protocols():
    cat = build_sensor_catalog(["Bundle-Ether1.100"], ["BGP", "ISIS"])
    assert len(cat) == expected_catalog_size(1, ["BGP", "ISIS"]) == 26


def test_catalog_counts_two_interfaces_bgp_only():
    cat = build_sensor_catalog(["a", "b"], ["BGP"])
    assert len(cat) == expected_catalog_size(2, ["BGP"]) == 28


def test_catalog_empty_interfaces_is_error():
    with pytest.raises(ValueError, match="catalog would be empty"):
        build_sensor_catalog([], [])


def test_catalog_unknown_protocol_is_error():
    with pytest.raises(ValueError, match="unknown protocol"):
        build_sensor_catalog(["a"], ["OSPF"])


def test_catalog_determinism_and_ordering():
    a = build_sensor_catalog(["b", "a"], ["ISIS", "BGP"])
    b = build_sensor_catalog(["a", "b"], ["BGP", "ISIS"])
    assert a.column_names == b.column_names
    models = [n.split(".")[0] for n in a.column_names]
    assert models == sorted(models)


def test_descriptor_rejects_illegal_metric_for_model():
    with pytest.raises(ValueError, match="not legal"):
        SensorDescriptor("M1", "x", "input_load")
    with pytest.raises(ValueError, match="not legal"):
        SensorDescriptor("M2", "x", "routes_count")


def test_catalog_rejects_duplicates():
    d = SensorDescriptor("M3", "BGP", "routes_count")
    with pytest.raises(ValueError, match="duplicate"):
        SensorCatalog((d, d))


def test_parse_column_name_handles_dotted_scope():
    name = "M2.Bundle-Ether1.100.input_packet_rate"
    assert parse_column_name(name) == ("M2", "Bundle-Ether1.100",
                                       "input_packet_rate")
    with pytest.raises(ValueError):
        parse_column_name("not_canonical")


def _write(path, text):
    path.write_text(text)
    return path


def test_ingest_well_formed(tmp_path):
    p = _write(tmp_path / "t.csv",
               "timestamp,a,b\n300,1.0,2.0\n600,3.0,4.0\n900,5.0,6.0\n")
    ds = ingest_csv(p, period_s=300)
    assert ds.n_rows == 3
    assert ds.column_names == ["a", "b"]
    assert ds.fill_log == []
    assert ds.values[2, 1] == 6.0


def test_ingest_sorts_rows(tmp_path):
    p = _write(tmp_path / "t.csv", "timestamp,a\n900,3.0\n300,1.0\n600,2.0\n")
    ds = ingest_csv(p, period_s=300)
    assert list(ds.timestamps) == [300, 600, 900]
    assert list(ds.values[:, 0]) == [1.0, 2.0, 3.0]


def test_ingest_forward_fills_missing_slot(tmp_path):
    p = _write(tmp_path / "t.csv",
               "timestamp,a\n300,1.0\n600,2.0\n1200,4.0\n")
    ds = ingest_csv(p, period_s=300)
    assert ds.n_rows == 4
    assert ds.fill_log == [900]
    assert ds.values[2, 0] == 2.0  # carried forward


def test_ingest_text_cell_names_row_and_column(tmp_path):
    p = _write(tmp_path / "t.csv", "timestamp,a,b\n300,1.0,oops\n")
    with pytest.raises(ValueError, match=r"row 2, column 'b'"):
        ingest_csv(p, period_s=300)


def test_ingest_duplicate_timestamp_is_error(tmp_path):
    p = _write(tmp_path / "t.csv", "timestamp,a\n300,1.0\n300,2.0\n")
    with pytest.raises(ValueError, match="duplicate timestamp"):
        ingest_csv(p, period_s=300)


def test_ingest_misaligned_timestamp_is_error(tmp_path):
    p = _write(tmp_path / "t.csv", "timestamp,a\n300,1.0\n750,2.0\n")
    with pytest.raises(ValueError, match="not aligned"):
        ingest_csv(p, period_s=300)


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(3)
    ds = TelemetryDataset(
        timestamps=np.arange(10) * 300 + 600,
        period_s=300,
        column_names=["x", "y"],
        values=rng.normal(size=(10, 2)) * 1e3,
    )
    path = tmp_path / "out.csv"
    export_csv(ds, path)
    back = ingest_csv(path, period_s=300)
    assert list(back.timestamps) == list(ds.timestamps)
    assert back.column_names == ds.column_names
    assert np.array_equal(back.values, ds.values)


def test_dataset_invariants():
    with pytest.raises(ValueError, match="strictly increasing"):
        TelemetryDataset(np.array([300, 300]), 300, ["a"], np.ones((2, 1)))
    with pytest.raises(ValueError, match="uniformly spaced"):
        TelemetryDataset(np.array([300, 900]), 300, ["a"], np.ones((2, 1)))
    with pytest.raises(ValueError, match="NaN"):
        TelemetryDataset(np.array([300, 600]), 300, ["a"],
                         np.array([[1.0], [np.nan]]))


def _dataset(n=6, t0=0):
    return TelemetryDataset(
        timestamps=t0 + 300 * np.arange(n),
        period_s=300,
        column_names=["c"],
        values=np.zeros((n, 1)),
        node_of_column={"c": "Node-1"},
    )


def test_merge_labels_interval_membership():
    ds = _dataset(n=6, t0=0)
    events = [BlackHoleEvent(node="Node-1", start_s=0, duration_s=900)]
    out = merge_labels(ds, events)
    # Oracle: half-open interval membership per timestamp.
    expected = [0 <= t < 900 for t in ds.timestamps]
    assert list(out.labels["Node-1"]) == expected
    assert sum(out.labels["Node-1"]) == 3


def test_merge_labels_empty_events_all_false():
    out = merge_labels(_dataset(), [])
    assert not out.labels["Node-1"].any()


def test_merge_labels_out_of_range_event_warns(caplog):
    ds = _dataset(n=4, t0=0)
    events = [BlackHoleEvent(node="Node-1", start_s=10**9, duration_s=900)]
    with caplog.at_level("WARNING"):
        out = merge_labels(ds, events)
    assert not out.labels["Node-1"].any()
    assert "outside the dataset time range" in caplog.text


def test_merge_labels_unknown_node_is_error():
    with pytest.raises(ValueError, match="unknown node"):
        merge_labels(_dataset(), [BlackHoleEvent("Node-9", 0, 300)])


def test_merge_labels_roster_extends_universe():
    out = merge_labels(_dataset(), [BlackHoleEvent("Node-2", 0, 300)],
                       roster=["Node-2"])
    assert out.labels["Node-2"][0]


def test_label_density_matches_coverage():
    # K covered sampling slots -> exactly K true labels.
    rng = np.random.default_rng(5)
    ds = _dataset(n=200, t0=0)
    events = []
    t = 0
    while t < 200 * 300 - 3000:
        t += int(rng.integers(1, 8)) * 300
        dur = int(rng.integers(1, 4)) * 300
        events.append(BlackHoleEvent("Node-1", t, dur))
        t += dur
    out = merge_labels(ds, events)
    covered = {
        int(ts) for ts in ds.timestamps
        if any(e.start_s <= ts < e.start_s + e.duration_s for e in events)
    }
    assert int(out.labels["Node-1"].sum()) == len(covered)


def test_flags_csv_round_trip(tmp_path):
    table = FlagTable(
        timestamps=np.array([300, 600, 900]),
        flags={"Node-1": np.array([True, False, True]),
               "Node-2": np.array([False, False, True])},
    )
    path = tmp_path / "flags.csv"
    write_flags_csv(table, path)
    back = read_flags_csv(path)
    assert list(back.timestamps) == [300, 600, 900]
    for node in table.flags:
        assert np.array_equal(back.flags[node], table.flags[node])


def test_flags_csv_rejects_partial_grid(tmp_path):
    path = tmp_path / "flags.csv"
    path.write_text("timestamp,node,black_hole\n300,Node-1,1\n600,Node-2,0\n")
    with pytest.raises(ValueError, match="does not cover"):
        read_flags_csv(path)


def test_labels_as_flag_table_requires_labels():
    with pytest.raises(ValueError, match="no labels"):
        labels_as_flag_table(_dataset())
