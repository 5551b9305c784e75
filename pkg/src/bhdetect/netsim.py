"""Backbone simulation with silent-drop injection.

A fluid-flow model at sampling-period granularity: each flow follows its
hop-count shortest path (lexicographic tie-break), a router with an active
drop event forwards zero transit traffic while staying in routing, and
per-interface counters plus route-table metrics are synthesized from the
realized traffic. Mitigation reroutes affected flows around a detected
node from the first interval boundary after the detection; edge nodes
with no alternate path keep their route.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .telemetry import (
    ROUTE_METRICS,
    TelemetryDataset,
    merge_labels,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowSpec:
    src: str
    dst: str
    rate_pps: float
    packet_bits: float = 12000.0
    diurnal_phase_h: float = 0.0  # shifts this flow's daily load curve

    def __post_init__(self):
        if self.rate_pps <= 0:
            raise ValueError("rate_pps must be > 0")
        if self.src == self.dst:
            raise ValueError("flow src and dst must differ")

    @property
    def name(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class BlackHoleEvent:
    node: str
    start_s: int
    duration_s: int
    kind: str = "drop_transit"

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")

    @property
    def end_s(self) -> int:
        return self.start_s + self.duration_s


@dataclass
class Topology:
    nodes: list[str]
    edges: list[tuple[str, str, float]]
    hosts: dict[str, str]
    roles: dict[str, str]

    def __post_init__(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise ValueError("duplicate nodes")
        for a, b, w in self.edges:
            if a not in node_set or b not in node_set:
                raise ValueError(f"edge ({a}, {b}) references unknown node")
            if w <= 0:
                raise ValueError("edge weights must be positive")
        for host, router in self.hosts.items():
            if router not in node_set:
                raise ValueError(f"host {host!r} attaches to unknown router")
        for node, role in self.roles.items():
            if node not in node_set:
                raise ValueError(f"role for unknown node {node!r}")
            if role not in ("core", "edge"):
                raise ValueError(f"bad role {role!r}")
        self._adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b, _ in self.edges:
            self._adj[a].append(b)
            self._adj[b].append(a)
        for n in self._adj:
            self._adj[n] = sorted(set(self._adj[n]))
        if self.nodes and not self._connected():
            raise ValueError("topology graph is not connected")

    def _connected(self) -> bool:
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            for nb in self._adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.nodes)

    def neighbors(self, node: str) -> list[str]:
        return self._adj[node]

    def degree(self, node: str) -> int:
        return len(self._adj[node])

    def role(self, node: str) -> str:
        return self.roles.get(node, "core")

    def attachment(self, host: str) -> str:
        return self.hosts[host]


def topology_from_dict(d: dict) -> Topology:
    return Topology(
        nodes=list(d["nodes"]),
        edges=[(a, b, float(w)) for a, b, w in d["edges"]],
        hosts=dict(d["hosts"]),
        roles=dict(d["roles"]),
    )


def load_topology(path: str | Path) -> Topology:
    with Path(path).open() as fh:
        return topology_from_dict(json.load(fh))


def build_reference_topology() -> Topology:
    """The bundled 8-router research topology with two client/server pairs."""
    data = resources.files("bhdetect").joinpath("data/reference_topology.json")
    return topology_from_dict(json.loads(data.read_text()))


def shortest_path(
    topo: Topology,
    src: str,
    dst: str,
    excluded: frozenset[str] | set[str] = frozenset(),
) -> list[str] | None:
    """Hop-count shortest router path, lexicographically smallest on ties.

    Returns None when src/dst are excluded or disconnected under the
    exclusion set.
    """
    if src in excluded or dst in excluded:
        return None
    if src == dst:
        return [src]
    # BFS from dst gives distance-to-destination; a greedy walk from src
    # picking the smallest neighbor one step closer yields the
    # lexicographically smallest shortest path.
    dist = {dst: 0}
    frontier = [dst]
    while frontier:
        nxt = []
        for u in frontier:
            for v in topo.neighbors(u):
                if v in excluded or v in dist:
                    continue
                dist[v] = dist[u] + 1
                nxt.append(v)
        frontier = nxt
    if src not in dist:
        return None
    path = [src]
    cur = src
    while cur != dst:
        cur = min(v for v in topo.neighbors(cur)
                  if v in dist and dist[v] == dist[cur] - 1)
        path.append(cur)
    return path


def route_flow(
    topo: Topology, flow: FlowSpec, excluded: frozenset[str] = frozenset()
) -> list[str] | None:
    return shortest_path(
        topo, topo.attachment(flow.src), topo.attachment(flow.dst), excluded
    )


def schedule_black_holes(
    topology: Topology,
    per_interval_prob: float,
    candidate_nodes: set[str] | list[str],
    mean_duration_s: int,
    horizon: tuple[int, int],
    seed: int,
    check_period_s: int | None = None,
) -> list[BlackHoleEvent]:
    """Draw a seeded silent-drop schedule.

    At every onset check each candidate node independently starts an event
    with the given probability unless one is already active there;
    durations are the fixed mean. check_period_s defaults to the mean
    duration's sampling-friendly floor of 300 s when not supplied.
    """
    if not 0.0 <= per_interval_prob <= 1.0:
        raise ValueError("per_interval_prob must be within [0, 1]")
    unknown = set(candidate_nodes) - set(topology.nodes)
    if unknown:
        raise ValueError(f"candidate nodes not in topology: {sorted(unknown)}")
    t0, t1 = horizon
    if t1 <= t0:
        raise ValueError("empty horizon")
    check = check_period_s or 300
    rng = np.random.default_rng(seed)
    active_until: dict[str, int] = {}
    events: list[BlackHoleEvent] = []
    for t in range(t0, t1, check):
        for node in sorted(candidate_nodes):
            if active_until.get(node, t0) > t:
                continue
            if rng.random() < per_interval_prob:
                events.append(BlackHoleEvent(node=node, start_s=t,
                                             duration_s=mean_duration_s))
                active_until[node] = t + mean_duration_s
    return events


@dataclass
class DeliveryLog:
    period_s: int
    interval_start: np.ndarray
    flow: list[str]
    sent: np.ndarray
    delivered: np.ndarray

    def __post_init__(self):
        self.interval_start = np.asarray(self.interval_start, dtype=np.int64)
        self.sent = np.asarray(self.sent, dtype=np.float64)
        self.delivered = np.asarray(self.delivered, dtype=np.float64)
        if np.any(self.delivered > self.sent + 1e-9):
            raise ValueError("delivered exceeds sent")


def compute_pdr(
    delivery: DeliveryLog,
    window: tuple[int, int],
    flow: str | None = None,
) -> float:
    """Sum(delivered)/sum(sent) over intervals overlapping the window."""
    t0, t1 = window
    starts = delivery.interval_start
    mask = (starts < t1) & (starts + delivery.period_s > t0)
    if flow is not None:
        mask &= np.array([f == flow for f in delivery.flow])
    if not mask.any():
        raise ValueError("window does not overlap the delivery log")
    total_sent = float(delivery.sent[mask].sum())
    if total_sent == 0.0:
        log.warning("PDR window carries zero offered traffic; reporting 1.0")
        return 1.0
    return float(delivery.delivered[mask].sum()) / total_sent


@dataclass
class SimConfig:
    period_s: int = 300
    horizon: tuple[int, int] = (0, 86400)
    seed: int = 0
    mitigation_mode: str = "off"  # off | oracle | detector_feed
    hold_s: int = 1800
    noise_sigma: float = 0.0
    diurnal_amplitude: float = 0.0
    weekend_factor: float = 1.0
    peak_hours: tuple[int, ...] = ()
    peak_factor: float = 1.0
    reverse_ratio: float = 1.0
    counter_leak_pkts: float = 0.0
    capacity_bps: float = 1e9
    route_churn_sigma: float = 0.01
    route_peak_bump: float = 0.0  # route-table swell during peak hours
    deleted_noise: float = 0.0  # baseline churn of deleted_routes_count
    deleted_bump: float = 0.0  # extra deleted routes at event onsets
    models: tuple[str, ...] = ("M1", "M2", "M3", "M4")

    def __post_init__(self):
        if self.period_s <= 0:
            raise ValueError("period_s must be > 0")
        t0, t1 = self.horizon
        if (t1 - t0) < self.period_s:
            raise ValueError("horizon shorter than one period")
        if self.mitigation_mode not in ("off", "oracle", "detector_feed"):
            raise ValueError(f"bad mitigation mode {self.mitigation_mode!r}")


@dataclass
class SimOutput:
    telemetry: TelemetryDataset
    delivery: DeliveryLog
    events: list[BlackHoleEvent]
    route_trace: dict[str, list[tuple[int, tuple[str, ...]]]]
    topology: Topology
    flows: list[FlowSpec]
    config: SimConfig
    exclusions: list[tuple[str, int, int]] = field(default_factory=list)


def _interface_names(topo: Topology) -> dict[tuple[str, str], str]:
    """Deterministic bundle-interface name per (router, attached peer)."""
    node_index = {n: i + 1 for i, n in enumerate(sorted(topo.nodes))}
    attached: dict[str, list[str]] = {n: list(topo.neighbors(n)) for n in topo.nodes}
    for host, router in topo.hosts.items():
        attached[router].append(host)
    names = {}
    for node in topo.nodes:
        for k, peer in enumerate(sorted(attached[node])):
            names[(node, peer)] = f"Bundle-Ether{node_index[node]}.{100 + k}"
    return names


def _traffic_multipliers(
    config: SimConfig, starts: np.ndarray, phase_h: float = 0.0
) -> np.ndarray:
    mult = np.ones(len(starts), dtype=np.float64)
    peak = set(config.peak_hours)
    for i, t in enumerate(starts):
        tod = int(t) % 86400
        frac = (tod / 86400.0) - (phase_h / 24.0)
        m = 1.0 + config.diurnal_amplitude * math.sin(2.0 * math.pi * (frac - 0.25))
        dt = datetime.fromtimestamp(int(t), tz=timezone.utc)
        if dt.weekday() >= 5:
            m *= config.weekend_factor
        if dt.hour in peak:
            m *= config.peak_factor
        mult[i] = max(m, 0.0)
    return mult


def _union_length(spans: list[tuple[int, int]]) -> float:
    total = 0.0
    last_end = None
    for s, e in sorted(spans):
        if last_end is None or s > last_end:
            total += e - s
            last_end = e
        elif e > last_end:
            total += e - last_end
            last_end = e
    return total


def simulate(
    topology: Topology,
    flows: list[FlowSpec],
    events: list[BlackHoleEvent],
    config: SimConfig,
    exclusions: list[tuple[str, int, int]] | None = None,
) -> SimOutput:
    """Run the fluid simulation and synthesize labeled telemetry.

    ``exclusions`` are (node, from_s, until_s) routing exclusion windows
    (normally produced by apply_mitigation); a flow whose exclusion-free
    route would disconnect keeps its original path.
    """
    for ev in events:
        if ev.node not in set(topology.nodes):
            raise ValueError(f"event references unknown node {ev.node!r}")
    healthy_paths = {}
    for fl in flows:
        p = route_flow(topology, fl)
        if p is None:
            raise ValueError(f"flow {fl.name} is not routable in the healthy graph")
        healthy_paths[fl.name] = p
    exclusions = sorted(exclusions or [])

    t0, t1 = config.horizon
    period = config.period_s
    starts = np.arange(t0, t1, period, dtype=np.int64)
    n_int = len(starts)
    mult_by_phase = {
        phase: _traffic_multipliers(config, starts, phase)
        for phase in sorted({fl.diurnal_phase_h for fl in flows})
    }

    iface_names = _interface_names(topology)
    ifaces = sorted(iface_names.values())
    iface_idx = {name: i for i, name in enumerate(ifaces)}
    iface_node = {name: node for (node, _), name in iface_names.items()}

    rng = np.random.default_rng(config.seed)
    # All stochastic inputs are drawn up front in a fixed order so a seed
    # pins the whole run.
    pkt_noise = (
        np.exp(rng.normal(0.0, config.noise_sigma, size=(n_int, len(ifaces), 2))
               - 0.5 * config.noise_sigma ** 2)
        if config.noise_sigma > 0
        else np.ones((n_int, len(ifaces), 2))
    )
    leak_jitter = (
        np.abs(rng.normal(1.0, 0.4, size=(n_int, len(ifaces), 2)))
        if config.counter_leak_pkts > 0
        else np.zeros((n_int, len(ifaces), 2))
    )
    protocols = [p for p, m in (("BGP", "M3"), ("ISIS", "M4")) if m in config.models]
    routers = sorted(topology.nodes)
    churn1 = rng.normal(0.0, config.route_churn_sigma,
                        size=(n_int, len(routers), len(protocols)))
    churn2 = rng.normal(0.0, config.route_churn_sigma,
                        size=(n_int, len(routers), len(protocols)))
    idio = rng.normal(0.0, config.route_churn_sigma * 0.05,
                      size=(n_int, len(routers), len(protocols), 5))
    deleted_noise = (
        np.abs(rng.normal(0.0, config.deleted_noise,
                          size=(n_int, len(routers), len(protocols))))
        if config.deleted_noise > 0
        else np.zeros((n_int, len(routers), len(protocols)))
    )

    events_by_node: dict[str, list[BlackHoleEvent]] = {}
    for ev in sorted(events, key=lambda e: (e.start_s, e.node)):
        events_by_node.setdefault(ev.node, []).append(ev)

    in_pkts = np.zeros((n_int, len(ifaces)))
    out_pkts = np.zeros((n_int, len(ifaces)))
    in_bits = np.zeros((n_int, len(ifaces)))
    out_bits = np.zeros((n_int, len(ifaces)))

    delivery_rows: list[tuple[int, str, float, float]] = []
    route_trace: dict[str, list[tuple[int, tuple[str, ...]]]] = {
        fl.name: [] for fl in flows
    }
    path_cache: dict[tuple[str, frozenset[str]], list[str] | None] = {}

    def add_hop(i: int, u: str, v: str, pkts: float, bits: float) -> None:
        out_i = iface_idx[iface_names[(u, v)]]
        in_i = iface_idx[iface_names[(v, u)]]
        out_pkts[i, out_i] += pkts
        out_bits[i, out_i] += bits
        in_pkts[i, in_i] += pkts
        in_bits[i, in_i] += bits

    def run_direction(i: int, t: int, path: list[str], src_host: str,
                      dst_host: str, pkts: float, bits_per_pkt: float) -> float:
        """Push one direction of traffic; returns delivered packets."""
        spans = []
        absorber = None
        for node in path:
            node_spans = [
                (max(ev.start_s, t), min(ev.end_s, t + period))
                for ev in events_by_node.get(node, [])
                if ev.start_s < t + period and ev.end_s > t
            ]
            if node_spans and absorber is None:
                absorber = node
            spans.extend(node_spans)
        frac = min(_union_length(spans) / period, 1.0) if spans else 0.0
        delivered = pkts * (1.0 - frac)

        a_idx = path.index(absorber) if absorber is not None else None
        in_pkts[i, iface_idx[iface_names[(path[0], src_host)]]] += pkts
        in_bits[i, iface_idx[iface_names[(path[0], src_host)]]] += pkts * bits_per_pkt
        for k in range(len(path) - 1):
            hop_pkts = delivered + (pkts - delivered) * (
                1.0 if a_idx is not None and k < a_idx else 0.0
            )
            add_hop(i, path[k], path[k + 1], hop_pkts, hop_pkts * bits_per_pkt)
        out_i = iface_idx[iface_names[(path[-1], dst_host)]]
        out_pkts[i, out_i] += delivered
        out_bits[i, out_i] += delivered * bits_per_pkt
        return delivered

    for i, t in enumerate(starts):
        t = int(t)
        excluded_now = frozenset(
            node for node, m_start, m_end in exclusions if m_start <= t < m_end
        )
        for fl in flows:
            path = healthy_paths[fl.name]
            if excluded_now:
                key = (fl.name, excluded_now)
                if key not in path_cache:
                    path_cache[key] = route_flow(topology, fl, excluded_now)
                rerouted = path_cache[key]
                if rerouted is not None:
                    path = rerouted
            trace = route_trace[fl.name]
            if not trace or trace[-1][1] != tuple(path):
                trace.append((t, tuple(path)))

            sent = fl.rate_pps * mult_by_phase[fl.diurnal_phase_h][i] * period
            delivered = run_direction(
                i, t, path, fl.src, fl.dst, sent, fl.packet_bits
            )
            delivery_rows.append((t, fl.name, sent, delivered))
            if config.reverse_ratio > 0:
                run_direction(
                    i, t, list(reversed(path)), fl.dst, fl.src,
                    sent * config.reverse_ratio, fl.packet_bits,
                )

    in_pkts *= pkt_noise[:, :, 0]
    in_bits *= pkt_noise[:, :, 0]
    out_pkts *= pkt_noise[:, :, 1]
    out_bits *= pkt_noise[:, :, 1]
    if config.counter_leak_pkts > 0:
        # Counters on interfaces that carry any traffic never read exactly
        # zero (keepalives, line-level frames): a small jittered leak.
        # Interfaces idle over the whole horizon stay at true zero.
        active = ((in_pkts.sum(axis=0) > 0) | (out_pkts.sum(axis=0) > 0))
        leak = config.counter_leak_pkts * leak_jitter * active[None, :, None]
        in_pkts += leak[:, :, 0]
        in_bits += leak[:, :, 0] * 12000.0
        out_pkts += leak[:, :, 1]
        out_bits += leak[:, :, 1] * 12000.0

    # Assemble telemetry columns: model -> scope (lexicographic) -> metric.
    columns: list[str] = []
    data: list[np.ndarray] = []
    node_of_column: dict[str, str] = {}

    def add_col(name: str, series: np.ndarray, node: str) -> None:
        columns.append(name)
        data.append(series)
        node_of_column[name] = node

    in_rate = in_pkts / period
    out_rate = out_pkts / period
    in_kbps = in_bits / period / 1000.0
    out_kbps = out_bits / period / 1000.0
    load_scale = 255.0 * 1000.0 / config.capacity_bps
    for model in ("M1", "M2"):
        if model not in config.models:
            continue
        for iface in ifaces:
            j = iface_idx[iface]
            node = iface_node[iface]
            add_col(f"{model}.{iface}.input_data_rate", in_kbps[:, j], node)
            add_col(f"{model}.{iface}.input_packet_rate", in_rate[:, j], node)
            add_col(f"{model}.{iface}.output_data_rate", out_kbps[:, j], node)
            add_col(f"{model}.{iface}.output_packet_rate", out_rate[:, j], node)
            if model == "M2":
                add_col(f"{model}.{iface}.input_load",
                        in_kbps[:, j] * load_scale, node)
                add_col(f"{model}.{iface}.output_load",
                        out_kbps[:, j] * load_scale, node)

    onset_idx: dict[str, set[int]] = {}
    for ev in events:
        k = (ev.start_s - t0) // period
        if 0 <= k < n_int:
            onset_idx.setdefault(ev.node, set()).add(int(k))
    peak_rows = np.array(
        [1.0 + config.route_peak_bump
         if datetime.fromtimestamp(int(t), tz=timezone.utc).hour
         in set(config.peak_hours) else 1.0
         for t in starts]
    )
    for pi, proto in enumerate(protocols):
        model = {"BGP": "M3", "ISIS": "M4"}[proto]
        for ri, router in enumerate(routers):
            dests = len(topology.nodes) + len(topology.hosts) - 1
            degree = topology.degree(router)
            bases = {
                "routes_count": float(dests + degree),
                "active_routes_count": float(dests),
                "backup_routes_count": float(degree),
                "deleted_routes_count": 0.0,
                "paths_count": float(dests + 2 * degree),
                "protocol_route_memory": float((dests + degree) * 64),
                "redistribution_client_count": 1.0,
                "protocol_clients_count": float(degree),
            }
            z1 = churn1[:, ri, pi]
            z2 = churn2[:, ri, pi]
            e = idio[:, ri, pi, :]
            deleted = deleted_noise[:, ri, pi].copy()
            if config.deleted_bump > 0 and router in onset_idx:
                for k in sorted(onset_idx[router]):
                    deleted[k] += config.deleted_bump
            series = {
                "routes_count": bases["routes_count"] * (1 + z1 + e[:, 0]) * peak_rows,
                "active_routes_count":
                    bases["active_routes_count"] * (1 + z1 + e[:, 1]) * peak_rows,
                "paths_count": bases["paths_count"] * (1 + z1 + e[:, 2]) * peak_rows,
                "protocol_route_memory":
                    bases["protocol_route_memory"] * (1 + z2 + e[:, 3]) * peak_rows,
                "backup_routes_count":
                    bases["backup_routes_count"] * (1 + z2 + e[:, 4]) * peak_rows,
                "deleted_routes_count": deleted,
                "redistribution_client_count":
                    np.full(n_int, bases["redistribution_client_count"]),
                "protocol_clients_count":
                    np.full(n_int, bases["protocol_clients_count"]),
            }
            scope = f"{proto}-{router}"
            for metric in ROUTE_METRICS:
                add_col(f"{model}.{scope}.{metric}", series[metric], router)

    telemetry = TelemetryDataset(
        timestamps=starts,
        period_s=period,
        column_names=columns,
        values=np.column_stack(data) if data else np.zeros((n_int, 0)),
        node_of_column=node_of_column,
    )
    telemetry = merge_labels(telemetry, events, roster=topology.nodes)

    delivery = DeliveryLog(
        period_s=period,
        interval_start=np.array([r[0] for r in delivery_rows], dtype=np.int64),
        flow=[r[1] for r in delivery_rows],
        sent=np.array([r[2] for r in delivery_rows]),
        delivered=np.array([r[3] for r in delivery_rows]),
    )
    return SimOutput(
        telemetry=telemetry,
        delivery=delivery,
        events=sorted(events, key=lambda e: (e.start_s, e.node)),
        route_trace=route_trace,
        topology=topology,
        flows=list(flows),
        config=config,
        exclusions=exclusions,
    )


def mitigation_windows(
    sim: SimOutput, detections: list[tuple[str, int]]
) -> list[tuple[str, int, int]]:
    """Translate detections into routing exclusion windows.

    A detection takes effect at the first interval boundary strictly after
    detected_at (one-period routing-update latency) and lasts until the
    matching event ends, or for the configured hold time when no event
    matches (a false positive).
    """
    t0, _ = sim.config.horizon
    period = sim.config.period_s
    known = set(sim.topology.nodes)
    windows = []
    for node, det_t in detections:
        if node not in known:
            log.warning("ignoring detection for unknown node %r", node)
            continue
        k = (det_t - t0) // period
        m_start = t0 + (k + 1) * period
        match = [
            ev for ev in sim.events
            if ev.node == node and ev.start_s <= det_t < ev.end_s
        ]
        m_end = match[0].end_s if match else det_t + sim.config.hold_s
        if m_end > m_start:
            windows.append((node, int(m_start), int(m_end)))
    return sorted(windows)


def apply_mitigation(
    sim: SimOutput, detections: list[tuple[str, int]]
) -> SimOutput:
    """Re-run the simulation with detection-driven rerouting applied."""
    windows = mitigation_windows(sim, detections)
    return simulate(sim.topology, sim.flows, sim.events, sim.config,
                    exclusions=windows)


def oracle_detections(events: list[BlackHoleEvent]) -> list[tuple[str, int]]:
    """A perfect detector: every event detected at onset."""
    return [(ev.node, ev.start_s) for ev in events]


@dataclass
class Scenario:
    """A parsed scenario file: everything one simulation run needs."""

    topology: Topology
    flows: list[FlowSpec]
    config: SimConfig
    events: list[BlackHoleEvent] | None  # explicit schedule, if given
    blackhole: dict
    detector: dict
    bhmm: dict

    def realize_events(self) -> list[BlackHoleEvent]:
        if self.events is not None:
            return list(self.events)
        bh = self.blackhole
        if not bh:
            return []
        return schedule_black_holes(
            self.topology,
            per_interval_prob=float(bh["prob"]),
            candidate_nodes=list(bh["nodes"]),
            mean_duration_s=int(bh["duration_s"]),
            horizon=self.config.horizon,
            seed=self.config.seed,
            check_period_s=int(bh.get("check_period_s") or self.config.period_s),
        )


def scenario_from_dict(d: dict, base_dir: Path | None = None) -> Scenario:
    """Parse a scenario mapping (see data/scenario_benchmark.json for keys)."""
    topo_spec = d.get("topology", "reference")
    if topo_spec == "reference":
        topology = build_reference_topology()
    elif isinstance(topo_spec, dict):
        topology = topology_from_dict(topo_spec)
    else:
        path = Path(topo_spec)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        topology = load_topology(path)

    flows = [
        FlowSpec(
            src=f["src"],
            dst=f["dst"],
            rate_pps=float(f["rate_pps"]),
            packet_bits=float(f.get("packet_bits", 12000.0)),
            diurnal_phase_h=float(f.get("diurnal_phase_h", 0.0)),
        )
        for f in d.get("flows", [])
    ]

    noise = d.get("noise", {})
    traffic = d.get("traffic", {})
    routes = d.get("routes", {})
    mitigation = d.get("mitigation", {})
    config = SimConfig(
        period_s=int(d["period_s"]),
        horizon=(int(d["horizon"][0]), int(d["horizon"][1])),
        seed=int(d.get("seed", 0)),
        mitigation_mode=mitigation.get("mode", "off"),
        hold_s=int(mitigation.get("hold_s", 1800)),
        noise_sigma=float(noise.get("sigma", 0.0)),
        counter_leak_pkts=float(noise.get("counter_leak_pkts", 0.0)),
        diurnal_amplitude=float(traffic.get("diurnal_amplitude", 0.0)),
        weekend_factor=float(traffic.get("weekend_factor", 1.0)),
        peak_hours=tuple(traffic.get("peak_hours", ())),
        peak_factor=float(traffic.get("peak_factor", 1.0)),
        reverse_ratio=float(traffic.get("reverse_ratio", 1.0)),
        capacity_bps=float(traffic.get("capacity_bps", 1e9)),
        route_churn_sigma=float(routes.get("churn_sigma", 0.01)),
        route_peak_bump=float(routes.get("peak_bump", 0.0)),
        deleted_noise=float(routes.get("deleted_noise", 0.0)),
        deleted_bump=float(routes.get("deleted_bump", 0.0)),
    )

    blackhole = d.get("blackhole", {})
    events = None
    if "events" in blackhole:
        events = [
            BlackHoleEvent(
                node=e["node"],
                start_s=int(e["start_s"]),
                duration_s=int(e["duration_s"]),
            )
            for e in blackhole["events"]
        ]
    return Scenario(
        topology=topology,
        flows=flows,
        config=config,
        events=events,
        blackhole=blackhole,
        detector=dict(d.get("detector", {})),
        bhmm=dict(d.get("bhmm", {})),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    with path.open() as fh:
        return scenario_from_dict(json.load(fh), base_dir=path.parent)


def load_bundled_scenario(name: str) -> Scenario:
    """Load a scenario shipped with the package (benchmark, mitigation)."""
    data = resources.files("bhdetect").joinpath(f"data/scenario_{name}.json")
    return scenario_from_dict(json.loads(data.read_text()))


def write_delivery_csv(delivery: DeliveryLog, path: str | Path) -> None:
    import csv as _csv

    with Path(path).open("w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["interval_start", "flow", "sent", "delivered"])
        for i in range(len(delivery.interval_start)):
            w.writerow([
                int(delivery.interval_start[i]),
                delivery.flow[i],
                repr(float(delivery.sent[i])),
                repr(float(delivery.delivered[i])),
            ])


def read_delivery_csv(path: str | Path, period_s: int) -> DeliveryLog:
    import csv as _csv

    starts, flows_, sent, delivered = [], [], [], []
    with Path(path).open(newline="") as fh:
        r = _csv.reader(fh)
        header = next(r, None)
        if header != ["interval_start", "flow", "sent", "delivered"]:
            raise ValueError(f"{path}: not a delivery log")
        for row in r:
            if not row:
                continue
            starts.append(int(row[0]))
            flows_.append(row[1])
            sent.append(float(row[2]))
            delivered.append(float(row[3]))
    return DeliveryLog(
        period_s=period_s,
        interval_start=np.array(starts, dtype=np.int64),
        flow=flows_,
        sent=np.array(sent),
        delivered=np.array(delivered),
    )


def write_events_csv(events: list[BlackHoleEvent], path: str | Path) -> None:
    import csv as _csv

    with Path(path).open("w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["node", "start", "duration"])
        for ev in events:
            w.writerow([ev.node, ev.start_s, ev.duration_s])


def read_events_csv(path: str | Path) -> list[BlackHoleEvent]:
    import csv as _csv

    events = []
    with Path(path).open(newline="") as fh:
        r = _csv.reader(fh)
        header = next(r, None)
        if header != ["node", "start", "duration"]:
            raise ValueError(f"{path}: not an events file")
        for row in r:
            if not row:
                continue
            events.append(BlackHoleEvent(node=row[0], start_s=int(row[1]),
                                         duration_s=int(row[2])))
    return events
