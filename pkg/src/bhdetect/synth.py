"""Synthetic ISP-style telemetry for benchmarks and timing runs.

The generated matrix reproduces the redundancy structure of a monitored
backbone inventory: per-interface rate/load columns that are affine
copies of each other, route-table counters driven by shared churn
factors, a dead interface, and a pair of near-all-zero sensors. Feeding
it through the curation pipeline exercises every reduction step with a
known outcome: 220 raw columns collapse to 88.
"""

from __future__ import annotations

import numpy as np

from .telemetry import ROUTE_METRICS, TelemetryDataset

#: layout of the 220-column fixture
N_SYMMETRIC_IFACES = 5   # M2 columns, input tracks output
N_ASYMMETRIC_IFACES = 9  # M2 columns, independent directions
N_ROUTE_BLOCKS = 16      # 8 routers x {BGP, ISIS}
KBPS_PER_PKT = 12.0      # 1500-byte packets
LOAD_PER_KBPS = 255.0 * 1000.0 / 1e9


def _series(rng: np.random.Generator, n: int, base: float,
            rel_spread: float) -> np.ndarray:
    t = base * (1.0 + rel_spread * rng.standard_normal(n))
    return np.maximum(t, 0.05 * base)


def make_isp_style_dataset(
    seed: int = 20210701,
    n_rows: int = 2016,
    start_ts: int = 1625097600,
    period_s: int = 300,
) -> TelemetryDataset:
    """Build the 220-column fixture dataset.

    Column groups:
      - 5 symmetric M2 interfaces (6 cols each): input/output move
        together, data rate and load are exact scalings of packet rate;
      - 9 asymmetric M2 interfaces (6 cols each): directions independent;
      - 16 route-table blocks (8 cols each): one churn factor drives
        routes/active/paths, another memory/backup; the two client-count
        columns are constants;
      - 1 dead interface (6 all-zero cols) and 2 sparse `min_*` sensors.
    """
    rng = np.random.default_rng(seed)
    timestamps = start_ts + period_s * np.arange(n_rows, dtype=np.int64)
    columns: list[str] = []
    data: list[np.ndarray] = []
    node_of_column: dict[str, str] = {}

    def add(name: str, series: np.ndarray, node: str) -> None:
        columns.append(name)
        data.append(series)
        node_of_column[name] = node

    def add_m2_iface(scope: str, node: str, in_pps: np.ndarray,
                     out_pps: np.ndarray) -> None:
        add(f"M2.{scope}.input_data_rate", in_pps * KBPS_PER_PKT, node)
        add(f"M2.{scope}.input_packet_rate", in_pps, node)
        add(f"M2.{scope}.output_data_rate", out_pps * KBPS_PER_PKT, node)
        add(f"M2.{scope}.output_packet_rate", out_pps, node)
        add(f"M2.{scope}.input_load",
            in_pps * KBPS_PER_PKT * LOAD_PER_KBPS, node)
        add(f"M2.{scope}.output_load",
            out_pps * KBPS_PER_PKT * LOAD_PER_KBPS, node)

    for i in range(N_SYMMETRIC_IFACES):
        node = f"Node-{i + 1}"
        t = _series(rng, n_rows, rng.uniform(50.0, 150.0), 0.25)
        in_pps = t * (1.0 + 0.01 * rng.standard_normal(n_rows))
        out_pps = t * (1.0 + 0.01 * rng.standard_normal(n_rows))
        add_m2_iface(f"Bundle-Ether{i + 1}.100", node, in_pps, out_pps)

    for i in range(N_ASYMMETRIC_IFACES):
        node = f"Node-{(i % 8) + 1}"
        sub = 200 + i // 8
        in_pps = _series(rng, n_rows, rng.uniform(50.0, 150.0), 0.25)
        out_pps = _series(rng, n_rows, rng.uniform(50.0, 150.0), 0.25)
        add_m2_iface(f"Bundle-Ether{(i % 8) + 1}.{sub}", node, in_pps, out_pps)

    # Dead interface: every column exactly zero.
    add_m2_iface("Bundle-Ether6.900", "Node-6",
                 np.zeros(n_rows), np.zeros(n_rows))

    # Two sparse sensors, nonzero once every 25 samples.
    for direction in ("input", "output"):
        series = np.zeros(n_rows)
        burst = np.arange(0, n_rows, 25)
        series[burst] = 5.0 * np.abs(rng.standard_normal(burst.size))
        add(f"M2.Bundle-Ether14.1320.min_{direction}_packet_rate",
            series, "Node-7")

    for proto, model in (("BGP", "M3"), ("ISIS", "M4")):
        for r in range(8):
            node = f"Node-{r + 1}"
            dests = 11.0 + r
            degree = 3.0 + (r % 4)
            z1 = 0.02 * rng.standard_normal(n_rows)
            z2 = 0.02 * rng.standard_normal(n_rows)
            e = 0.001 * rng.standard_normal((n_rows, 5))
            bases = {
                "routes_count": dests + degree,
                "active_routes_count": dests,
                "backup_routes_count": degree,
                "paths_count": dests + 2 * degree,
                "protocol_route_memory": (dests + degree) * 64.0,
            }
            series = {
                "routes_count": bases["routes_count"] * (1 + z1 + e[:, 0]),
                "active_routes_count":
                    bases["active_routes_count"] * (1 + z1 + e[:, 1]),
                "paths_count": bases["paths_count"] * (1 + z1 + e[:, 2]),
                "protocol_route_memory":
                    bases["protocol_route_memory"] * (1 + z2 + e[:, 3]),
                "backup_routes_count":
                    bases["backup_routes_count"] * (1 + z2 + e[:, 4]),
                "deleted_routes_count":
                    np.abs(rng.normal(0.0, 0.5, n_rows)),
                "redistribution_client_count": np.full(n_rows, 1.0),
                "protocol_clients_count": np.full(n_rows, degree),
            }
            scope = f"{proto}-{node}"
            for metric in ROUTE_METRICS:
                add(f"{model}.{scope}.{metric}", series[metric], node)

    return TelemetryDataset(
        timestamps=timestamps,
        period_s=period_s,
        column_names=columns,
        values=np.column_stack(data),
        node_of_column=node_of_column,
    )
