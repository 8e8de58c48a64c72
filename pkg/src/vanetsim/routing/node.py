"""AOMDV state machine for one node, with pluggable mobility-aware metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from fractions import Fraction

from ..engine import seconds
from ..mobility import Heading
from ..packets import DataPacket, RouteError, RouteReply, RouteRequest
from .policy import MetricPolicy
from .table import PathRecord, RouteEntry, accept_advertisement, select_forward_path

log = logging.getLogger(__name__)

_ZERO = Fraction(0)
_HALF = Fraction(1, 2)


@dataclass
class RoutingConfig:
    active_route_timeout: float = 3.0  # s
    reverse_route_timeout: float = 6.0
    rreq_retries: int = 2
    rreq_timeout: float = 1.0  # first wait, doubled per retry
    max_paths: int = 3
    send_buffer_size: int = 64
    net_diameter: int = 35
    rreq_direction_filter: bool = False
    zero_metric_fields: bool = False

    def __post_init__(self):
        if self.rreq_retries < 0 or self.max_paths < 1 or self.send_buffer_size < 1:
            raise ValueError("invalid routing configuration")


class _Discovery:
    __slots__ = ("attempt", "timer", "src_speed", "src_stop")

    def __init__(self, attempt, timer, src_speed, src_stop):
        self.attempt = attempt
        self.timer = timer
        self.src_speed = src_speed
        self.src_stop = src_stop


class AomdvNode:
    """Routing layer of a single vehicle.

    ``net`` supplies ``engine``, ``channel``, ``kin(nid) -> (heading, speed,
    stop_times)`` and the ledger hooks ``delivered``, ``dropped`` and
    ``route_changed``.
    """

    def __init__(self, nid: int, net, policy: MetricPolicy, cfg: RoutingConfig):
        self.id = nid
        self.net = net
        self.policy = policy
        self.cfg = cfg
        self.seqno = 0
        self.rreq_id = 0
        self.table: dict[int, RouteEntry] = {}
        self.seen: set[tuple[int, int]] = set()
        self.pending: dict[int, list[DataPacket]] = {}
        self.n_pending = 0
        self.discoveries: dict[int, _Discovery] = {}
        self._active = seconds(cfg.active_route_timeout)
        self._reverse = seconds(cfg.reverse_route_timeout)

    # -- helpers ---------------------------------------------------------

    def _sample(self) -> tuple[Heading, Fraction, int]:
        if self.cfg.zero_metric_fields:
            return Heading.NORTH, _ZERO, 0
        return self.net.kin(self.id)

    def _entry(self, dest: int) -> RouteEntry:
        e = self.table.get(dest)
        if e is None:
            e = self.table[dest] = RouteEntry(dest)
        return e

    def route(self, dest: int) -> PathRecord | None:
        e = self.table.get(dest)
        if e is None:
            return None
        return select_forward_path(e, self.policy, self.net.engine.now)

    # -- data plane ------------------------------------------------------

    def send_data(self, pkt: DataPacket) -> None:
        """Application entry point at the packet's source."""
        path = self.route(pkt.destination)
        if path is not None:
            self._forward(pkt, path)
        else:
            self._buffer(pkt)

    def _forward(self, pkt: DataPacket, path: PathRecord) -> None:
        path.expiry = self.net.engine.now + self._active
        pkt.hops += 1
        self.net.channel.unicast(self.id, path.next_hop, pkt)

    def _buffer(self, pkt: DataPacket) -> None:
        if self.n_pending >= self.cfg.send_buffer_size:
            self.net.dropped(pkt, "buffer-full")
        else:
            self.pending.setdefault(pkt.destination, []).append(pkt)
            self.n_pending += 1
        if pkt.destination not in self.discoveries:
            self._send_rreq(pkt.destination, 0)

    def _flush(self, dest: int) -> None:
        queued = self.pending.pop(dest, None)
        if not queued:
            return
        self.n_pending -= len(queued)
        for pkt in queued:
            path = self.route(dest)
            if path is None:
                self._buffer(pkt)
            else:
                self._forward(pkt, path)

    def _on_data(self, pkt: DataPacket, prev: int) -> None:
        if pkt.destination == self.id:
            self.net.delivered(pkt)
            return
        path = self.route(pkt.destination)
        if path is not None:
            self._forward(pkt, path)
            return
        self.net.dropped(pkt, "no-route")
        e = self.table.get(pkt.destination)
        seq = e.seqno if e is not None else 0
        self.net.channel.broadcast(self.id, RouteError(((pkt.destination, max(seq, 0)),)))

    # -- route discovery -------------------------------------------------

    def _send_rreq(self, dest: int, attempt: int) -> None:
        self.seqno += 1
        self.rreq_id += 1
        e = self.table.get(dest)
        known = e.seqno if e is not None and e.seqno >= 0 else None
        heading, speed, stops = self._sample()
        rreq = RouteRequest(self.rreq_id, self.id, self.seqno, dest, known, 0, None, heading, speed, stops,
                            _ZERO, 0)
        self.seen.add((self.id, self.rreq_id))
        self.net.channel.broadcast(self.id, rreq)
        wait = seconds(self.cfg.rreq_timeout) << attempt
        timer = self.net.engine.schedule_in(wait, "timer-expiry", self._discovery_timeout, (dest, attempt))
        self.discoveries[dest] = _Discovery(attempt, timer, speed, stops)

    def _discovery_timeout(self, payload) -> None:
        dest, attempt = payload
        d = self.discoveries.get(dest)
        if d is None or d.attempt != attempt:
            return
        if self.route(dest) is not None:
            del self.discoveries[dest]
            self._flush(dest)
            return
        if attempt < self.cfg.rreq_retries:
            self._send_rreq(dest, attempt + 1)
            return
        del self.discoveries[dest]
        queued = self.pending.pop(dest, [])
        self.n_pending -= len(queued)
        for pkt in queued:
            self.net.dropped(pkt, "discovery-failed")

    def _on_rreq(self, rreq: RouteRequest, prev: int) -> None:
        if rreq.source == self.id:
            return
        now = self.net.engine.now
        policy = self.policy
        rev = self._entry(rreq.source)
        path = PathRecord(prev, rreq.first_hop if rreq.first_hop is not None else self.id, rreq.hop_count + 1,
                          rreq.speed_metric, rreq.stop_metric, now + self._reverse)
        accepted = accept_advertisement(rev, rreq.source_seqno, path, now, self.cfg.max_paths)
        if accepted:
            rev.dest_dir = rreq.src_dir
            rev.dest_speed = rreq.src_speed
            rev.dest_stop = rreq.src_stoptimes
            self.net.route_changed(self.id, rreq.source)
        key = (rreq.source, rreq.rreq_id)
        first = key not in self.seen
        if first:
            self.seen.add(key)

        if rreq.destination == self.id:
            if not accepted:
                return
            if first:
                known = rreq.dest_seqno_known or 0
                self.seqno = max(self.seqno, known) + 1
            heading, speed, stops = self._sample()
            rrep = RouteReply(rreq.source, self.id, self.seqno, 0, None,
                              (rreq.src_speed + speed) * _HALF, Fraction(rreq.src_stoptimes + stops, 2),
                              _ZERO, _ZERO, rreq.src_dir, heading)
            path.rrep_used = True
            self.net.channel.unicast(self.id, prev, rrep)
            return

        if not first:
            return
        heading, speed, stops = self._sample()
        fwd = self.table.get(rreq.destination)
        if fwd is not None and (rreq.dest_seqno_known is None or fwd.seqno >= rreq.dest_seqno_known):
            best = select_forward_path(fwd, policy, now)
            if best is not None and best.next_hop != prev and policy.admits(heading, rreq.src_dir, fwd.dest_dir):
                if self._reply_from_cache(rreq, fwd, best, prev, rev):
                    return
        if rreq.hop_count + 1 >= self.cfg.net_diameter:
            return
        if self.cfg.rreq_direction_filter and policy.direction:
            dest_dir = fwd.dest_dir if fwd is not None and fwd.seqno >= 0 else rreq.src_dir
            if not policy.admits(heading, rreq.src_dir, dest_dir):
                return
        rev.advertise(policy, now)
        out = RouteRequest(
            rreq.rreq_id, rreq.source, rreq.source_seqno, rreq.destination, rreq.dest_seqno_known,
            rreq.hop_count + 1, self.id if rreq.first_hop is None else rreq.first_hop,
            rreq.src_dir, rreq.src_speed, rreq.src_stoptimes,
            policy.speed_update(rreq.speed_metric, rreq.src_speed, speed),
            policy.stop_update(rreq.stop_metric, rreq.src_stoptimes, stops),
        )
        self.net.channel.broadcast(self.id, out)

    def _reply_from_cache(self, rreq: RouteRequest, fwd: RouteEntry, best: PathRecord, prev: int,
                          rev: RouteEntry) -> bool:
        now = self.net.engine.now
        rev_path = next((p for p in rev.purge(now) if p.next_hop == prev), None)
        if rev_path is None or rev_path.rrep_used:
            return False
        hops = fwd.advertise(self.policy, now)
        rev_path.rrep_used = True
        fwd.precursors.add(prev)
        rrep = RouteReply(
            rreq.source, fwd.destination, fwd.seqno, hops, best.last_hop,
            (rreq.src_speed + fwd.dest_speed) * _HALF, Fraction(rreq.src_stoptimes + fwd.dest_stop, 2),
            fwd.advertised_speed_metric if self.policy.speed else _ZERO,
            fwd.advertised_stop_metric if self.policy.stoptimes else _ZERO,
            rreq.src_dir, fwd.dest_dir, trail=(self.id,) + best.trail,
        )
        self.net.channel.unicast(self.id, prev, rrep)
        return True

    def _on_rrep(self, rrep: RouteReply, prev: int) -> None:
        now = self.net.engine.now
        policy = self.policy
        fwd = self._entry(rrep.destination)
        path = PathRecord(prev, rrep.last_hop if rrep.last_hop is not None else self.id, rrep.hop_count + 1,
                          rrep.speed_metric, rrep.stop_metric, now + self._active, trail=rrep.trail)
        if not accept_advertisement(fwd, rrep.dest_seqno, path, now, self.cfg.max_paths):
            return
        self.net.route_changed(self.id, rrep.destination)

        if rrep.source == self.id:
            d = self.discoveries.get(rrep.destination)
            src_speed = d.src_speed if d is not None else self._sample()[1]
            src_stop = d.src_stop if d is not None else self._sample()[2]
            self._learn_destination(fwd, rrep, src_speed, src_stop)
            if d is not None:
                self.net.engine.cancel(d.timer)
                del self.discoveries[rrep.destination]
            self._flush(rrep.destination)
            return

        rev = self.table.get(rrep.source)
        if rev is not None:
            self._learn_destination(fwd, rrep, rev.dest_speed, rev.dest_stop)
        heading, speed, stops = self._sample()
        if not policy.admits(heading, rrep.src_dir, rrep.dest_dir):
            return
        if rev is None:
            log.debug("node %d: RREP for %d without reverse route", self.id, rrep.source)
            return
        unused = [p for p in rev.purge(now) if not p.rrep_used]
        if not unused:
            return
        back = min(unused, key=policy.key)
        back.rrep_used = True
        fwd.precursors.add(back.next_hop)
        rev.precursors.add(prev)
        out = replace(
            rrep,
            hop_count=fwd.advertise(policy, now),
            last_hop=self.id if rrep.last_hop is None else rrep.last_hop,
            speed_metric=policy.speed_update(rrep.speed_metric, rrep.avg_speed, speed),
            stop_metric=policy.stop_update(rrep.stop_metric, rrep.avg_stop, stops),
            trail=(self.id,) + rrep.trail,
        )
        self.net.channel.unicast(self.id, back.next_hop, out)

    @staticmethod
    def _learn_destination(fwd: RouteEntry, rrep: RouteReply, src_speed, src_stop) -> None:
        fwd.dest_dir = rrep.dest_dir
        fwd.dest_speed = max(_ZERO, 2 * rrep.avg_speed - src_speed)
        fwd.dest_stop = max(0, int(2 * rrep.avg_stop - src_stop))

    # -- route maintenance -----------------------------------------------

    def _drop_next_hop(self, next_hop: int, dests=None) -> list[tuple[int, int]]:
        """Remove paths through ``next_hop``; return newly unreachable (dest, seqno) pairs."""
        broken = []
        items = self.table.items() if dests is None else ((d, self.table.get(d)) for d in dests)
        now = self.net.engine.now
        for dest, e in items:
            if e is None or not e.paths:
                continue
            live = e.purge(now)
            kept = [p for p in live if p.next_hop != next_hop]
            if len(kept) == len(live):
                continue
            e.paths = kept
            self.net.route_changed(self.id, dest)
            if not kept:
                broken.append((dest, e))
        return broken

    def on_link_failure(self, target: int, packet) -> None:
        """MAC reported that a unicast to ``target`` could not be delivered."""
        broken = self._drop_next_hop(target)
        notify = []
        for dest, e in broken:
            e.reset(e.seqno + 1)
            if e.precursors:
                notify.append((dest, e.seqno))
        if notify:
            self.net.channel.broadcast(self.id, RouteError(tuple(notify[:255])))
        if isinstance(packet, DataPacket):
            path = self.route(packet.destination)
            if path is not None:
                self._forward(packet, path)
            elif packet.source == self.id:
                self._buffer(packet)
            else:
                self.net.dropped(packet, "link-break")

    def _on_rerr(self, rerr: RouteError, prev: int) -> None:
        seqs = dict(rerr.unreachable)
        broken = self._drop_next_hop(prev, seqs)
        notify = []
        for dest, e in broken:
            e.reset(max(e.seqno, seqs[dest]))
            if e.precursors:
                notify.append((dest, e.seqno))
        if notify:
            self.net.channel.broadcast(self.id, RouteError(tuple(notify)))

    # -- radio entry point -----------------------------------------------

    def receive(self, packet, prev: int) -> None:
        t = type(packet)
        if t is DataPacket:
            self._on_data(packet, prev)
        elif t is RouteRequest:
            self._on_rreq(packet, prev)
        elif t is RouteReply:
            self._on_rrep(packet, prev)
        elif t is RouteError:
            self._on_rerr(packet, prev)
        else:
            log.warning("node %d: dropping malformed packet %r", self.id, packet)
