from datetime import datetime, timezone

import numpy as np
import pytest

from bhdetect.bhmm import (
    PROVENANCE_RATIO,
    PROVENANCE_TEMPORAL,
    FeatureMatrix,
    add_io_ratio_features,
    add_temporal_features,
    drop_constant_features,
    drop_sparse_features,
    from_dataset,
    pearson_correlation_matrix,
    prune_correlated,
    run_bhmm_pipeline,
)
from bhdetect.synth import make_isp_style_dataset


def fm(columns: dict[str, np.ndarray], t0: int = 1625097600,
       period: int = 300) -> FeatureMatrix:
    names = list(columns)
    n = len(next(iter(columns.values())))
    return FeatureMatrix(
        timestamps=t0 + period * np.arange(n),
        column_names=names,
        values=np.column_stack([columns[c] for c in names]),
    )


def test_drop_constant_basic():
    m = fm({"const": np.full(5, 7.0), "varies": np.arange(5.0)})
    out, dropped = drop_constant_features(m)
    assert dropped == ["const"]
    assert out.column_names == ["varies"]


def test_drop_constant_exact_equality_rule():
    col = np.array([1.0, 1.0, 1.0000001])
    m = fm({"nearly": col, "flat": np.ones(3)})
    out, dropped = drop_constant_features(m)
    assert dropped == ["flat"]
    assert "nearly" in out.column_names


def test_drop_constant_count():
    rng = np.random.default_rng(0)
    cols = {f"v{i}": rng.normal(size=20) for i in range(7)}
    cols.update({f"c{i}": np.full(20, float(i)) for i in range(3)})
    out, dropped = drop_constant_features(fm(cols))
    assert len(dropped) == 3
    assert out.n_cols == 7


def test_drop_constant_all_constant_is_error():
    with pytest.raises(ValueError, match="no informative features"):
        drop_constant_features(fm({"a": np.ones(4), "b": np.zeros(4)}))


def test_drop_sparse_thresholds():
    n = 100
    sparse = np.zeros(n)
    sparse[::25] = 5.0  # exactly 4% nonzero
    mild = np.ones(n)
    mild[:10] = 0.0  # 10% zeros
    m = fm({"sparse": sparse, "mild": mild})
    out, dropped = drop_sparse_features(m, zero_fraction_threshold=0.95)
    assert [c for c, _ in dropped] == ["sparse"]
    assert dropped[0][1] == 0.96
    assert out.column_names == ["mild"]


def test_drop_sparse_min_rate_sensors():
    n = 200
    burst = np.zeros(n)
    burst[::50] = 1.0
    m = fm({
        "M2.Bundle-Ether14.1320.min_input_packet_rate": burst,
        "M2.Bundle-Ether14.1320.min_output_packet_rate": burst * 2,
        "M2.Bundle-Ether1.100.input_packet_rate": np.linspace(1, 2, n),
    })
    out, dropped = drop_sparse_features(m, 0.95)
    assert len(dropped) == 2
    assert all("min_" in c for c, _ in dropped)


def test_temporal_features_against_calendar_library():
    t0 = 1625097600  # 2021-07-01 00:00 UTC
    m = fm({"x": np.arange(4.0)}, t0=t0, period=300)
    out, added = add_temporal_features(m)
    assert added == ["minute", "week_of_year", "day_of_week"]
    dt = datetime.fromtimestamp(t0, tz=timezone.utc)
    assert out.column("minute")[0] == dt.hour * 60 + dt.minute == 0
    assert out.column("day_of_week")[0] == dt.isocalendar().weekday == 4
    assert out.column("week_of_year")[0] == dt.isocalendar().week == 26
    # 300 s apart -> minute differs by 5
    assert out.column("minute")[1] - out.column("minute")[0] == 5.0


def test_temporal_minute_at_day_end():
    t = 1625097600 + 23 * 3600 + 55 * 60  # 23:55 UTC
    m = fm({"x": np.zeros(1)}, t0=t)
    out, _ = add_temporal_features(m)
    assert out.column("minute")[0] == 1435.0


def test_temporal_idempotent():
    m = fm({"x": np.arange(3.0)})
    once, _ = add_temporal_features(m)
    twice, added = add_temporal_features(once)
    assert added == []
    assert twice.column_names == once.column_names


def test_io_ratio_pairing_and_guard():
    m = fm({
        "M2.ifA.input_packet_rate": np.array([100.0, 500.0]),
        "M2.ifA.output_packet_rate": np.array([50.0, 0.0]),
        "M2.ifB.input_packet_rate": np.array([1.0, 2.0]),
    })
    out, added, unpaired = add_io_ratio_features(m)
    assert [c for _, _, c in added] == ["I/O M2.ifA.packet_rate"]
    ratio = out.column("I/O M2.ifA.packet_rate")
    assert ratio[0] == 2.0
    assert ratio[1] == 500.0 / 1e-6  # finite, large: the drop signature
    assert unpaired == ["M2.ifB.input_packet_rate"]
    assert out.provenance["I/O M2.ifA.packet_rate"] == PROVENANCE_RATIO


def test_io_ratio_monotone_in_output():
    inp = np.full(5, 100.0)
    for lo, hi in [(0.0, 1.0), (1.0, 50.0), (50.0, 99.0)]:
        a = fm({"M2.i.input_packet_rate": inp,
                "M2.i.output_packet_rate": np.full(5, hi)})
        b = fm({"M2.i.input_packet_rate": inp,
                "M2.i.output_packet_rate": np.full(5, lo)})
        ra, _, _ = add_io_ratio_features(a)
        rb, _, _ = add_io_ratio_features(b)
        assert (rb.column("I/O M2.i.packet_rate")
                >= ra.column("I/O M2.i.packet_rate")).all()


def test_pearson_exact_cases():
    x = np.arange(10.0)
    m = fm({"x": x, "double": 2 * x, "neg": -x})
    corr = pearson_correlation_matrix(m)
    assert corr.pair("x", "double") == pytest.approx(1.0)
    assert corr.pair("x", "neg") == pytest.approx(-1.0)
    assert np.array_equal(np.diag(corr.r), np.ones(3))
    assert np.array_equal(corr.r, corr.r.T)


def test_pearson_independent_columns_near_zero():
    rng = np.random.default_rng(123)
    m = fm({"a": rng.normal(size=10000), "b": rng.normal(size=10000)})
    corr = pearson_correlation_matrix(m)
    assert abs(corr.pair("a", "b")) < 0.05


def test_pearson_zero_variance_is_error():
    m = fm({"flat": np.ones(5), "x": np.arange(5.0)})
    with pytest.raises(ValueError, match="flat"):
        pearson_correlation_matrix(m)


def test_prune_keeps_packet_rate_over_data_rate_and_load():
    rng = np.random.default_rng(7)
    pps = 100 + 10 * rng.normal(size=50)
    m = fm({
        "M2.if1.input_data_rate": pps * 12.0,
        "M2.if1.input_packet_rate": pps,
        "M2.if1.input_load": pps * 0.003,
    })
    corr = pearson_correlation_matrix(m)
    out, pruned, flagged = prune_correlated(m, corr, 0.9)
    assert out.column_names == ["M2.if1.input_packet_rate"]
    # every pruned entry cites the correlated pair it lost to
    assert all(kept != removed and abs(r) > 0.9 for removed, kept, r in pruned)
    assert len(flagged) == 3


def test_prune_keeps_active_routes_and_route_memory():
    rng = np.random.default_rng(8)
    n = 400
    churn1 = 0.05 * rng.normal(size=n)
    churn2 = 0.05 * rng.normal(size=n)
    tiny = lambda: 0.002 * rng.normal(size=n)
    m = fm({
        "M3.BGP.routes_count": 20 * (1 + churn1 + tiny()),
        "M3.BGP.active_routes_count": 15 * (1 + churn1 + tiny()),
        "M3.BGP.paths_count": 30 * (1 + churn1 + tiny()),
        "M3.BGP.protocol_route_memory": 1280 * (1 + churn2 + tiny()),
        "M3.BGP.backup_routes_count": 5 * (1 + churn2 + tiny()),
    })
    corr = pearson_correlation_matrix(m)
    out, _, _ = prune_correlated(m, corr, 0.9)
    assert set(out.column_names) == {
        "M3.BGP.active_routes_count", "M3.BGP.protocol_route_memory"
    }


def test_prune_no_pairs_above_threshold_is_identity():
    rng = np.random.default_rng(9)
    m = fm({f"c{i}": rng.normal(size=200) for i in range(5)})
    corr = pearson_correlation_matrix(m)
    out, pruned, flagged = prune_correlated(m, corr, 0.9)
    assert out.column_names == m.column_names
    assert pruned == [] and flagged == []


def test_pipeline_fixture_reduces_220_to_88():
    ds = make_isp_style_dataset()
    assert len(ds.column_names) == 220
    reduced, report = run_bhmm_pipeline(ds)
    assert len(report.final_columns) == 88
    assert reduced.n_cols == 88
    report.validate()
    # Recompute correlation over the non-temporal survivors.
    non_t = [c for c in reduced.column_names
             if reduced.provenance[c] != PROVENANCE_TEMPORAL]
    corr = pearson_correlation_matrix(reduced.select(non_t))
    off = np.abs(corr.r.copy())
    np.fill_diagonal(off, 0.0)
    assert off.max() <= 0.9


def test_pipeline_pass_through_adds_temporal_and_ratios():
    rng = np.random.default_rng(10)
    n = 300
    m = fm({
        "M2.if1.input_packet_rate": 100 + 30 * rng.normal(size=n),
        "M2.if1.output_packet_rate": 200 + 60 * rng.normal(size=n),
        "other": rng.normal(size=n),
    })
    reduced, report = run_bhmm_pipeline(m)
    assert report.dropped_constant == [] and report.dropped_sparse == []
    assert report.pruned == []
    assert set(reduced.column_names) == set(m.column_names) | {
        "minute", "week_of_year", "day_of_week", "I/O M2.if1.packet_rate"
    }


def test_pipeline_idempotent():
    ds = make_isp_style_dataset(n_rows=600)
    once, _ = run_bhmm_pipeline(ds)
    twice, report = run_bhmm_pipeline(once)
    assert twice.column_names == once.column_names
    assert np.array_equal(twice.values, once.values)
    assert report.pruned == [] and report.dropped_constant == []


def test_pipeline_audit_identity():
    ds = make_isp_style_dataset(n_rows=500)
    _, report = run_bhmm_pipeline(ds)
    n_final = (len(report.input_columns) + len(report.added_temporal)
               + len(report.added_ratio) - len(report.dropped_constant)
               - len(report.dropped_sparse) - len(report.pruned))
    assert n_final == len(report.final_columns)


def test_report_serializes():
    ds = make_isp_style_dataset(n_rows=400)
    _, report = run_bhmm_pipeline(ds)
    payload = report.to_json_dict()
    assert payload["final_columns"] == report.final_columns
    assert payload["params"]["corr_threshold"] == 0.9
    assert all(set(e) == {"column", "zero_fraction"}
               for e in payload["dropped_sparse"])
