"""Wiring of engine, mobility, radio, routing and traffic into one run."""

from __future__ import annotations

import hashlib
from fractions import Fraction
from typing import Sequence

from .config import ScenarioConfig
from .engine import Engine, seconds
from .mobility import Heading, Mobility
from .packets import DataPacket, RouteError, RouteReply, RouteRequest, is_control, packet_size
from .radio import Channel, PositionTopology, RadioConfig, StaticTopology
from .routing import AomdvNode, MetricPolicy, RoutingConfig, get_policy
from .traffic import Flow, PacketLedger, RunReport, finalize, spawn_flows

_TYPE_TAG = {RouteRequest: "RREQ", RouteReply: "RREP", RouteError: "RERR", DataPacket: "DATA"}


def run_seed(seed: int, node_count: int, fraction: float) -> int:
    """Engine seed shared by all protocols for one (seed, node count, fraction) cell."""
    text = f"{seed}|{node_count}|{fraction:.6f}"
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def quantize_speed(speed: float) -> Fraction:
    """Speed as carried by the protocol: whole centi-m/s."""
    return Fraction(int(round(speed * 100)), 100)


class LoopChecker:
    """Walks next-hop chains after route changes and records any cycle found."""

    def __init__(self, nodes: Sequence[AomdvNode], engine: Engine):
        self.nodes = nodes
        self.engine = engine
        self.cycles: list[tuple[int, int, tuple]] = []
        self.checks = 0

    def _next(self, nid: int, dest: int) -> int | None:
        e = self.nodes[nid].table.get(dest)
        if e is None:
            return None
        now = self.engine.now
        live = [p for p in e.paths if p.expiry >= now]
        if not live:
            return None
        return min(live, key=self.nodes[nid].policy.key).next_hop

    def walk(self, start: int, dest: int, clear: set | None = None) -> tuple | None:
        seen: list[int] = []
        members = set()
        cur = start
        while cur != dest and cur is not None:
            if clear is not None and cur in clear:
                break
            if cur in members:
                return tuple(seen[seen.index(cur):])
            members.add(cur)
            seen.append(cur)
            cur = self._next(cur, dest)
        if clear is not None:
            clear.update(members)
        return None

    def check(self, nid: int, dest: int) -> None:
        self.checks += 1
        cyc = self.walk(nid, dest)
        if cyc:
            self.cycles.append((self.engine.now, dest, cyc))

    def check_all(self) -> None:
        for dest in range(len(self.nodes)):
            clear: set[int] = set()
            for nid in range(len(self.nodes)):
                if nid == dest or dest not in self.nodes[nid].table:
                    continue
                self.checks += 1
                cyc = self.walk(nid, dest, clear)
                if cyc:
                    self.cycles.append((self.engine.now, dest, cyc))


class Network:
    """Nodes sharing one channel; subclasses supply topology and kinematics."""

    def __init__(self, engine: Engine, n_nodes: int, topology, radio: RadioConfig, policy: MetricPolicy,
                 routing: RoutingConfig, check_loops: bool = False, keep_log: bool = False):
        self.engine = engine
        self.ledger = PacketLedger(keep_log=keep_log)
        self.log = self.ledger.log
        self.channel = Channel(engine, radio, topology, packet_size, is_control)
        self.channel.deliver = self._deliver
        self.channel.link_failed = self._link_failed
        if keep_log:
            self.channel.on_transmit = self._log_tx
        self.policy = policy
        self.nodes = [AomdvNode(i, self, policy, routing) for i in range(n_nodes)]
        self.loops = LoopChecker(self.nodes, engine) if check_loops else None

    # hooks used by AomdvNode
    def kin(self, nid: int) -> tuple[Heading, Fraction, int]:
        raise NotImplementedError

    def delivered(self, pkt: DataPacket) -> None:
        self.ledger.record_delivery(pkt.flow, pkt.seq, self.engine.now, pkt.hops)

    def dropped(self, pkt: DataPacket, reason: str) -> None:
        self.ledger.record_drop(pkt.flow, pkt.seq, self.engine.now, reason)

    def route_changed(self, nid: int, dest: int) -> None:
        if self.loops is not None:
            self.loops.check(nid, dest)

    def _deliver(self, receiver: int, packet, sender: int) -> None:
        self.nodes[receiver].receive(packet, sender)

    def _link_failed(self, sender: int, target: int, packet) -> None:
        self.nodes[sender].on_link_failure(target, packet)

    def _log_tx(self, sender: int, packet, mode: str, size: int) -> None:
        tag = "CTRL" if is_control(packet) else "DATA"
        self.log.append(f"{self.engine.now} {tag} {sender} {_TYPE_TAG[type(packet)]} {mode} {size}")


class ScriptedNetwork(Network):
    """Static graph with fixed per-node heading, speed (m/s) and stop_times."""

    def __init__(self, edges, kinematics: Sequence[tuple[Heading, float | Fraction, int]], policy: MetricPolicy | str,
                 routing: RoutingConfig | None = None, radio: RadioConfig | None = None, seed: int = 0,
                 check_loops: bool = False):
        if isinstance(policy, str):
            policy = get_policy(policy)
        n = len(kinematics)
        self.kinematics = [(h, Fraction(s).limit_denominator(100) if not isinstance(s, Fraction) else s, st)
                           for h, s, st in kinematics]
        super().__init__(Engine(seed), n, StaticTopology(n, edges), radio or RadioConfig(broadcast_jitter_max=0.0),
                         policy, routing or RoutingConfig(), check_loops=check_loops)

    def kin(self, nid: int):
        return self.kinematics[nid]

    def discover(self, source: int, dest: int, until: float = 5.0) -> None:
        """Send one data packet from ``source`` to ``dest`` and run ``until`` seconds."""
        pkt = DataPacket(0, 0, source, dest, 64, self.engine.now)
        self.ledger.record_send(0, 0, self.engine.now)
        self.nodes[source].send_data(pkt)
        self.engine.run_until(self.engine.now + seconds(until))


class ScenarioRun(Network):
    """One mobile scenario: Manhattan mobility, periodic stoppers, CBR flows."""

    def __init__(self, cfg: ScenarioConfig, protocol: str, node_count: int, stopped_fraction: float, seed: int,
                 check_loops: bool = False, keep_log: bool = False, record_events: bool = False):
        self.cfg = cfg
        self.protocol = protocol
        self.node_count = node_count
        self.stopped_fraction = stopped_fraction
        self.seed = seed
        self.duration = seconds(cfg.sim_duration_s)
        engine = Engine(run_seed(seed, node_count, stopped_fraction), record=record_events)
        self.mobility = Mobility(engine, node_count, cfg.grid(), cfg.mobility(), self.duration)
        radio = cfg.radio()
        super().__init__(engine, node_count, PositionTopology(self.mobility, radio.range), radio,
                         get_policy(protocol), cfg.routing(), check_loops=check_loops, keep_log=keep_log)
        self.flows: list[Flow] = spawn_flows(cfg.flows, node_count, cfg.packet_rate_pps, cfg.payload_bytes,
                                             engine.rng("traffic"), self.duration,
                                             seconds(cfg.flow_start_window_s))
        self._speed_cache_version = -1
        self._speed_cache: list[Fraction] = []

    def kin(self, nid: int):
        mob = self.mobility
        if self._speed_cache_version != mob.version:
            self._speed_cache = [None] * self.node_count
            self._speed_cache_version = mob.version
        node = mob.nodes[nid]
        speed = self._speed_cache[nid]
        if speed is None or node.stopped:
            speed = quantize_speed(node.speed)
            self._speed_cache[nid] = speed
        return node.heading, speed, mob.stop_times(nid)

    def _start_flow(self, flow: Flow) -> None:
        self.engine.schedule(flow.start, "traffic-send", self._send, (flow, 0))

    def _send(self, payload) -> None:
        flow, seq = payload
        now = self.engine.now
        pkt = DataPacket(flow.fid, seq, flow.source, flow.destination, flow.payload, now)
        self.ledger.record_send(flow.fid, seq, now)
        self.nodes[flow.source].send_data(pkt)
        nxt = flow.start + seconds((seq + 1) / flow.rate)
        if nxt < flow.stop:
            self.engine.schedule(nxt, "traffic-send", self._send, (flow, seq + 1))

    def run(self) -> RunReport:
        self.mobility.start(self.stopped_fraction)
        if self.loops is not None:
            self.mobility.listeners.append(self.loops.check_all)
        for flow in self.flows:
            self._start_flow(flow)
        self.engine.schedule(self.duration, "sim-end", lambda _: None)
        self.engine.run_until(self.duration)
        return self.report()

    def report(self) -> RunReport:
        return finalize(self.ledger, self.channel.control_tx, self.protocol, self.node_count,
                        self.stopped_fraction, self.seed)


def run_once(cfg: ScenarioConfig, protocol: str, node_count: int, stopped_fraction: float, seed: int) -> RunReport:
    return ScenarioRun(cfg, protocol, node_count, stopped_fraction, seed).run()
