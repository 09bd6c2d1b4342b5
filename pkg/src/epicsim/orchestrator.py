"""Scenario configuration, edge-node selection, deployment handshake, experiment drivers.

Scenario files and reports are JSON documents with keys matching the domain
type field names.  Report times are integer microseconds, rates integer
bits/second; battery_gain and loss_rate carry four fractional digits.  The
same config and seed always serialize to byte-identical report files.
"""

from __future__ import annotations

import copy
import heapq
import json
import logging
import math
import os
from dataclasses import dataclass

from . import kpi, power
from .adapt import ControllerConfig
from .kpi import RunTrace, build_report
from .model import (
    CapacityError,
    DEFAULT_LADDER,
    KpiReport,
    NetworkProfile,
    NodeSpec,
    PowerProfile,
    QualityLevel,
    ValidationError,
    validate_ladder,
)
from .netem import Packet, Path
from .rng import derive_seed
from .session import (
    BandwidthStep,
    CLIENT_HOSTED,
    ClientSpec,
    DEVICE_NODE,
    EDGE_HOSTED,
    SessionSettings,
    SessionTopology,
    run_session,
)
from .transport import MsgType, WireHeader, decode_message, encode_message

logger = logging.getLogger("epicsim.orchestrator")

HANDSHAKE_TIMEOUT_US = 2_000_000
HANDSHAKE_RETRY_US = 250_000

CTRL_DISCOVER = 0x01
CTRL_OFFER = 0x02
CTRL_DEPLOY = 0x03
CTRL_READY = 0x04
CTRL_ACK = 0x05

_CTRL_NAMES = {CTRL_DISCOVER: "DISCOVER", CTRL_OFFER: "OFFER",
               CTRL_DEPLOY: "DEPLOY", CTRL_READY: "READY"}


class HandshakeTimeout(RuntimeError):
    """No READY arrived within the deployment handshake deadline."""


def configure_logging_from_env() -> None:
    """Map EPICSIM_LOG=off|events|packets onto logger levels."""
    mode = os.environ.get("EPICSIM_LOG", "off").lower()
    level = {"off": logging.WARNING, "events": logging.INFO, "packets": logging.DEBUG}.get(mode)
    if level is None:
        raise ValidationError(f"EPICSIM_LOG must be off, events or packets, not {mode!r}")
    logging.basicConfig(format="%(name)s %(message)s")
    logging.getLogger("epicsim").setLevel(level)


# -- scenario configuration ---------------------------------------------------


@dataclass(frozen=True, slots=True)
class ScenarioClient:
    client_id: int
    paths: dict[int, NetworkProfile]
    power: PowerProfile
    decode_throughput: int


@dataclass(frozen=True, slots=True)
class Budgets:
    rtt_p95: int = 7_000
    loss: float = 0.02


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    name: str
    seed: int
    duration: int
    ladder: tuple[QualityLevel, ...]
    nodes: tuple[NodeSpec, ...]
    clients: tuple[ScenarioClient, ...]
    mode: str
    master_id: int | None
    master_uplink: NetworkProfile | None
    settings: SessionSettings
    budgets: Budgets
    device_node: NodeSpec
    power_pixel_throughput: int
    power_decode_throughput: int
    raw: dict


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ValidationError(f"{context}: missing required key {key!r}")
    return mapping[key]


def _profile_from(obj: dict, context: str) -> NetworkProfile:
    try:
        return NetworkProfile(
            one_way_latency=int(_require(obj, "one_way_latency", context)),
            jitter=int(obj.get("jitter", 0)),
            loss_rate=float(obj.get("loss_rate", 0.0)),
            bandwidth=int(_require(obj, "bandwidth", context)),
            mtu=int(obj.get("mtu", 1400)),
            queue_capacity=int(obj["queue_capacity"]) if "queue_capacity" in obj else None,
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{context}: {exc}") from exc


def _node_from(obj: dict, context: str) -> NodeSpec:
    return NodeSpec(
        node_id=int(_require(obj, "node_id", context)),
        pixel_throughput=int(_require(obj, "pixel_throughput", context)),
        encode_throughput=int(_require(obj, "encode_throughput", context)),
        max_sessions=int(obj.get("max_sessions", 16)),
    )


def _power_from(obj: dict) -> PowerProfile:
    return PowerProfile(
        p_idle=float(obj.get("p_idle", 3.0)),
        p_render_local=float(obj.get("p_render_local", 4.5)),
        p_radio=float(obj.get("p_radio", 1.2)),
        p_decode=float(obj.get("p_decode", 0.8)),
        battery_capacity=float(obj.get("battery_capacity", 7.6)),
    )


def _ladder_from(entries: list, context: str) -> tuple[QualityLevel, ...]:
    levels = tuple(
        QualityLevel(
            level_index=int(_require(e, "level_index", context)),
            width=int(_require(e, "width", context)),
            height=int(_require(e, "height", context)),
            fps=int(_require(e, "fps", context)),
            bpp=_require(e, "bpp", context),
        )
        for e in entries
    )
    return validate_ladder(levels)


def parse_scenario(doc: dict) -> ScenarioConfig:
    """Validate a scenario JSON document and bind it to domain types."""
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a JSON object")
    name = str(doc.get("name", "scenario"))
    seed = int(doc.get("seed", 0))
    duration = int(_require(doc, "duration", "scenario"))
    ladder = _ladder_from(doc["ladder"], "ladder") if doc.get("ladder") else DEFAULT_LADDER

    nodes = tuple(_node_from(n, "nodes") for n in doc.get("nodes", []))
    if len({n.node_id for n in nodes}) != len(nodes):
        raise ValidationError("node ids must be unique")
    node_ids = {n.node_id for n in nodes}

    clients = []
    for entry in _require(doc, "clients", "scenario"):
        cid = int(_require(entry, "id", "client"))
        raw_paths = _require(entry, "paths", f"client {cid}")
        if isinstance(raw_paths, dict) and "bandwidth" in raw_paths:
            # single-profile shorthand, applied to every candidate node
            profile = _profile_from(raw_paths, f"client {cid} path")
            paths = {nid: profile for nid in node_ids} or {0: profile}
        else:
            paths = {}
            for key, val in raw_paths.items():
                nid = int(key)
                if node_ids and nid not in node_ids:
                    raise ValidationError(f"client {cid}: path references unknown node {nid}")
                paths[nid] = _profile_from(val, f"client {cid} path to node {nid}")
        clients.append(ScenarioClient(
            client_id=cid,
            paths=paths,
            power=_power_from(entry.get("power", {})),
            decode_throughput=int(entry.get("decode_throughput", 7_000_000_000)),
        ))
    if not clients:
        raise ValidationError("scenario needs at least one client")
    if len({c.client_id for c in clients}) != len(clients):
        raise ValidationError("client ids must be unique")

    topo = doc.get("topology", {"mode": EDGE_HOSTED})
    mode = topo.get("mode", EDGE_HOSTED)
    if mode not in (EDGE_HOSTED, CLIENT_HOSTED):
        raise ValidationError(f"unknown topology mode {mode!r}")
    master_id = int(topo["master"]) if "master" in topo else None
    master_uplink = _profile_from(topo["master_uplink"], "master_uplink") if "master_uplink" in topo else None
    if mode == EDGE_HOSTED and not nodes:
        raise ValidationError("edge_hosted scenario needs at least one node")
    if mode == CLIENT_HOSTED and (master_id is None or master_uplink is None):
        raise ValidationError("client_hosted scenario needs topology.master and topology.master_uplink")

    ctrl_doc = doc.get("controller", {})
    controller = ControllerConfig(
        rtt_budget=int(ctrl_doc.get("rtt_budget", 7_000)),
        loss_threshold=float(ctrl_doc.get("loss_threshold", 0.02)),
        throughput_factor=float(ctrl_doc.get("throughput_factor", 0.9)),
        k_down=int(ctrl_doc.get("k_down", 2)),
        k_up=int(ctrl_doc.get("k_up", 12)),
        cooldown=int(ctrl_doc.get("cooldown", 4)),
        window_us=int(ctrl_doc.get("window", 250_000)),
    )
    start_level = int(ctrl_doc.get("start_level", 0))
    if not 0 <= start_level < len(ladder):
        raise ValidationError("controller.start_level outside the ladder")

    steps = tuple(
        BandwidthStep(
            time_us=int(_require(e, "time", "events")),
            bandwidth=int(_require(e, "bandwidth", "events")),
            client_ids=tuple(int(x) for x in e["clients"]) if e.get("clients") else None,
        )
        for e in doc.get("events", [])
    )

    settings = SessionSettings(
        tick_us=int(doc.get("tick", 8_333)),
        ping_interval_us=int(doc.get("ping_interval", 100_000)),
        sync_interval_us=int(doc.get("sync_interval", 50_000)),
        sync_payload_bytes=int(doc.get("state_sync_bytes", 256)),
        scene_complexity=float(doc.get("scene_complexity", 1.0)),
        start_level=start_level,
        adaptation=bool(ctrl_doc.get("enabled", True)),
        controller=controller,
        shared_egress=_profile_from(doc["shared_egress"], "shared_egress")
        if doc.get("shared_egress") else None,
        bandwidth_steps=steps,
        prerender=int(doc.get("prerender", 0)),
    )

    budget_doc = doc.get("budgets", {})
    budgets = Budgets(
        rtt_p95=int(budget_doc.get("rtt_p95", 7_000)),
        loss=float(budget_doc.get("loss", 0.02)),
    )

    power_doc = doc.get("power_model", {})
    return ScenarioConfig(
        name=name, seed=seed, duration=duration, ladder=ladder, nodes=nodes,
        clients=tuple(clients), mode=mode, master_id=master_id,
        master_uplink=master_uplink, settings=settings, budgets=budgets,
        device_node=_node_from(topo["device_node"], "device_node")
        if "device_node" in topo else DEVICE_NODE,
        power_pixel_throughput=int(power_doc.get("device_pixel_throughput",
                                                 power.DEVICE_PIXEL_THROUGHPUT)),
        power_decode_throughput=int(power_doc.get("device_decode_throughput",
                                                  power.DEVICE_DECODE_THROUGHPUT)),
        raw=copy.deepcopy(doc),
    )


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(json.load(fh))


# -- node selection and deployment handshake ----------------------------------


def render_demand(cfg: ScenarioConfig) -> int:
    """Total pixels/second the host must render at the starting level."""
    level = cfg.ladder[cfg.settings.start_level]
    per_client = math.ceil(cfg.settings.scene_complexity * level.pixels * level.fps)
    return per_client * len(cfg.clients)


def select_node(cfg: ScenarioConfig) -> NodeSpec:
    """Pick the feasible node with the lowest mean latency to the clients.

    Feasible means enough session slots for every client and enough render
    throughput for the total demand at the starting level; ties break toward
    the lowest node id.
    """
    if not cfg.nodes:
        raise CapacityError("no nodes to select from")
    demand = render_demand(cfg)
    best: tuple[float, int] | None = None
    chosen: NodeSpec | None = None
    for node in cfg.nodes:
        if node.max_sessions < len(cfg.clients) or node.pixel_throughput < demand:
            continue
        if any(node.node_id not in c.paths for c in cfg.clients):
            continue
        mean_latency = sum(c.paths[node.node_id].one_way_latency for c in cfg.clients) / len(cfg.clients)
        key = (mean_latency, node.node_id)
        if best is None or key < best:
            best = key
            chosen = node
    if chosen is None:
        raise CapacityError("no feasible node: capacity or render demand unsatisfied")
    return chosen


@dataclass(frozen=True, slots=True)
class HandshakeStep:
    name: str
    sent_at: int
    received_at: int


@dataclass(frozen=True, slots=True)
class HandshakeTrace:
    steps: tuple[HandshakeStep, ...]
    ready_time: int


def deploy_handshake(profile: NetworkProfile, seed: int, session_id: int = 0,
                     timeout_us: int = HANDSHAKE_TIMEOUT_US,
                     retry_us: int = HANDSHAKE_RETRY_US) -> HandshakeTrace:
    """Run the DISCOVER/OFFER/DEPLOY/READY exchange over an emulated path pair.

    The client retransmits its outstanding request every retry interval; if
    READY has not arrived by the timeout the deployment fails.  The node side
    is a stateless responder (DISCOVER begets OFFER, DEPLOY begets READY), so
    duplicated requests are harmless.  Session traffic may only start after
    the returned ready_time.
    """
    up = Path(profile, derive_seed(seed, session_id, 0x41))
    down = Path(profile, derive_seed(seed, session_id, 0x42))
    heap: list[tuple[int, int, str]] = []
    order = 0
    seq = 0
    send_times: dict[int, int] = {}
    steps_seen: dict[int, HandshakeStep] = {}
    pending = CTRL_DISCOVER

    def sched(t: int, kind: str):
        nonlocal order
        order += 1
        heapq.heappush(heap, (t, order, kind))

    def send(subtype: int, t: int, path: Path, kind: str):
        nonlocal seq
        header = WireHeader(MsgType.CONTROL, session_id, seq, t)
        seq += 1
        send_times.setdefault(subtype, t)
        result = path.submit(Packet(encode_message(header, bytes([subtype])), t), t)
        if isinstance(result, int):
            sched(result, kind)

    def record(subtype: int, at: int):
        if subtype not in steps_seen:
            steps_seen[subtype] = HandshakeStep(_CTRL_NAMES[subtype], send_times[subtype], at)

    send(CTRL_DISCOVER, 0, up, "up")
    sched(retry_us, "retry")

    while heap:
        t, _, kind = heapq.heappop(heap)
        if t > timeout_us:
            break
        if kind == "retry":
            send(pending, t, up, "up")
            sched(t + retry_us, "retry")
        elif kind == "up":
            for pkt, at in up.advance_to(t):
                subtype = decode_message(pkt.data)[1][0]
                record(subtype, at)
                reply = CTRL_OFFER if subtype == CTRL_DISCOVER else CTRL_READY
                send(reply, at, down, "down")
        else:
            for pkt, at in down.advance_to(t):
                subtype = decode_message(pkt.data)[1][0]
                record(subtype, at)
                if subtype == CTRL_OFFER and pending == CTRL_DISCOVER:
                    pending = CTRL_DEPLOY
                    send(CTRL_DEPLOY, at, up, "up")
                elif subtype == CTRL_READY:
                    ordered = tuple(sorted(steps_seen.values(), key=lambda s: s.received_at))
                    return HandshakeTrace(ordered, at)
    raise HandshakeTimeout(f"no READY within {timeout_us} us")


# -- scenario runner -----------------------------------------------------------


def scenario_topology(cfg: ScenarioConfig, node: NodeSpec | None) -> SessionTopology:
    if cfg.mode == EDGE_HOSTED:
        clients = tuple(
            ClientSpec(c.client_id, c.paths[node.node_id], c.power, c.decode_throughput)
            for c in cfg.clients)
        return SessionTopology(EDGE_HOSTED, clients, host_node=node)
    clients = tuple(
        ClientSpec(c.client_id, next(iter(c.paths.values())), c.power, c.decode_throughput)
        for c in cfg.clients)
    return SessionTopology(CLIENT_HOSTED, clients, master_id=cfg.master_id,
                           master_uplink=cfg.master_uplink, device_node=cfg.device_node)


def scenario_battery_gain(cfg: ScenarioConfig) -> float:
    """Offload-vs-local battery gain at the starting level.

    Edge hosting makes every client a thin client; the master-server baseline
    keeps rendering on a device (and adds its streaming radio), so its gain
    over the classic single-user local setup is never positive.
    """
    level = cfg.ladder[cfg.settings.start_level]
    profile = cfg.clients[0].power
    if cfg.mode == EDGE_HOSTED:
        return power.default_gain(profile, level,
                                  cfg.power_pixel_throughput, cfg.power_decode_throughput)
    views = len(cfg.clients)
    base_util = min(1.0, level.pixels / cfg.power_pixel_throughput * level.fps)
    host_util = min(1.0, views * level.pixels / cfg.power_pixel_throughput * level.fps)
    baseline = profile.p_idle + profile.p_render_local * base_util
    master = profile.p_idle + profile.p_render_local * host_util + profile.p_radio
    return (baseline / master - 1.0) * 100.0


@dataclass(frozen=True, slots=True)
class ScenarioResult:
    report: KpiReport
    trace: RunTrace
    handshake: HandshakeTrace | None
    node: NodeSpec | None


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Select a node, handshake, run the session with adaptation, build the report."""
    node = None
    handshake = None
    start = 0
    if cfg.mode == EDGE_HOSTED:
        node = select_node(cfg)
        handshake = deploy_handshake(cfg.clients[0].paths[node.node_id],
                                     derive_seed(cfg.seed, 0x4853))
        start = handshake.ready_time
        logger.info("scenario %s: node %d ready at %d us", cfg.name, node.node_id, start)
    topology = scenario_topology(cfg, node)
    trace = run_session(topology, cfg.ladder, cfg.duration, cfg.settings,
                        seed=cfg.seed, start_time=start)
    report = build_report(trace, scenario_battery_gain(cfg))
    return ScenarioResult(report, trace, handshake, node)


def report_to_json(report: KpiReport) -> str:
    """Canonical report serialization: sorted keys, two-space indent, newline."""
    doc = {
        "rtt_p50": report.rtt_p50,
        "rtt_p95": report.rtt_p95,
        "rtt_p99": report.rtt_p99,
        "motion_to_photon_p95": report.motion_to_photon_p95,
        "aggregate_throughput": report.aggregate_throughput,
        "loss_rate": round(report.loss_rate, 4),
        "battery_gain": round(report.battery_gain, 4),
        "pass_rtt": report.pass_rtt,
        "pass_bandwidth": report.pass_bandwidth,
        "pass_battery": report.pass_battery,
        "frames_sent": report.frames_sent,
        "frames_delivered": report.frames_delivered,
        "frames_dropped": report.frames_dropped,
        "frames_in_flight": report.frames_in_flight,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# -- parameter sweeps and capacity searches ------------------------------------


def _apply_param(node, dotted: list[str], value):
    """Set a (possibly broadcast) dotted path inside a raw scenario document."""
    key = dotted[0]
    rest = dotted[1:]
    if isinstance(node, list):
        hit = False
        for item in node:
            hit = _apply_param(item, dotted, value) or hit
        return hit
    if not isinstance(node, dict) or key not in node:
        return False
    if not rest:
        node[key] = value
        return True
    return _apply_param(node[key], rest, value)


def sweep(cfg: ScenarioConfig, param: str, values: list) -> list[tuple[object, KpiReport]]:
    """Re-run the scenario once per value of a numeric config field.

    The dotted parameter path broadcasts across lists, so "ladder.bpp"
    rewrites every rung and "clients.paths.bandwidth" every client path.
    Seeds are identical across runs.
    """
    if not values:
        raise ValidationError("sweep needs at least one value")
    out = []
    for value in values:
        doc = copy.deepcopy(cfg.raw)
        if not _apply_param(doc, param.split("."), value):
            raise ValidationError(f"parameter path {param!r} matches nothing in the scenario")
        result = run_scenario(parse_scenario(doc))
        out.append((value, result.report))
    return out


def scale_clients(cfg: ScenarioConfig, n: int) -> ScenarioConfig:
    """N-user variant: replicate the first client, derive the seed from (seed, N)."""
    doc = copy.deepcopy(cfg.raw)
    template = copy.deepcopy(doc["clients"][0])
    doc["clients"] = []
    for i in range(n):
        entry = copy.deepcopy(template)
        entry["id"] = i
        doc["clients"].append(entry)
    doc["seed"] = cfg.seed ^ n
    return parse_scenario(doc)


def _search_runner(cfg: ScenarioConfig):
    def run(n: int) -> tuple[KpiReport, RunTrace]:
        result = run_scenario(scale_clients(cfg, n))
        return result.report, result.trace
    return run


def load_search(cfg: ScenarioConfig, rtt_budget_us: int | None = None,
                loss_budget: float | None = None, n_max: int = 16) -> int:
    """Largest user count keeping rtt_p95 and frame loss within budget."""
    budgets = cfg.budgets
    return kpi.load_search(
        _search_runner(cfg),
        rtt_budget_us if rtt_budget_us is not None else budgets.rtt_p95,
        loss_budget if loss_budget is not None else budgets.loss,
        n_max,
    )


def stress_search(cfg: ScenarioConfig, n_max: int = 16) -> int | None:
    """Smallest user count that congests the network, or None if none up to n_max."""
    return kpi.stress_search(_search_runner(cfg), n_max)
