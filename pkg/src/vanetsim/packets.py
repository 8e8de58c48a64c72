"""Control/data packet records and the fixed binary codec for RREQ/RREP/RERR.

Wire layout (big-endian, fields in declaration order):

RREQ  u8 type=1 | u32 rreq_id | u32 source | u32 source_seqno | u32 destination |
      u32 dest_seqno_known | u16 hop_count | u32 first_hop | u8 src_dir |
      u32 src_speed | u16 src_stoptimes | u32 speed_metric | u16 stop_metric
RREP  u8 type=2 | u32 source | u32 destination | u32 dest_seqno | u16 hop_count |
      u32 last_hop | u32 avg_speed | u32 avg_stop | u32 speed_metric |
      u32 stop_metric | u8 dirs (src_dir bits 0-1, dest_dir bits 2-3)
RERR  u8 type=3 | u8 count | count x (u32 destination, u32 seqno)

Speeds travel in centi-m/s; the RREP's averaged quantities (avg_speed,
speed_metric in half-centi-m/s, avg_stop and stop_metric in halves) are sent
doubled so the half-integral means survive exactly.  ``0xFFFFFFFF`` encodes an
absent node id or unknown sequence number.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction

from .mobility import Heading

NONE32 = 0xFFFFFFFF

RREQ_TYPE, RREP_TYPE, RERR_TYPE = 1, 2, 3

_RREQ = struct.Struct(">BIIIIIHIBIHIH")
_RREP = struct.Struct(">BIIIHIIIIIB")
_RERR_HEAD = struct.Struct(">BB")
_RERR_ITEM = struct.Struct(">II")


class CodecError(ValueError):
    """Packet cannot be encoded or a byte string is not a valid packet."""


@dataclass(frozen=True, slots=True)
class RouteRequest:
    rreq_id: int
    source: int
    source_seqno: int
    destination: int
    dest_seqno_known: int | None
    hop_count: int
    first_hop: int | None
    src_dir: Heading
    src_speed: Fraction
    src_stoptimes: int
    speed_metric: Fraction = Fraction(0)
    stop_metric: int = 0


@dataclass(frozen=True, slots=True)
class RouteReply:
    source: int
    destination: int
    dest_seqno: int
    hop_count: int
    last_hop: int | None
    avg_speed: Fraction
    avg_stop: Fraction
    speed_metric: Fraction
    stop_metric: Fraction
    src_dir: Heading
    dest_dir: Heading
    # forwarders visited so far, for diagnostics only (not on the wire)
    trail: tuple = field(default=(), compare=False)


@dataclass(frozen=True, slots=True)
class RouteError:
    unreachable: tuple  # ((destination, seqno), ...)


@dataclass(slots=True)
class DataPacket:
    flow: int
    seq: int
    source: int
    destination: int
    size: int
    sent_at: int
    hops: int = 0


CONTROL_TYPES = (RouteRequest, RouteReply, RouteError)


def is_control(packet) -> bool:
    return isinstance(packet, CONTROL_TYPES)


def _scaled(value, scale: int, name: str) -> int:
    v = Fraction(value) * scale
    if v.denominator != 1 or v < 0:
        raise CodecError(f"{name}={value} is not a non-negative multiple of 1/{scale}")
    return int(v)


def _opt(v: int | None) -> int:
    return NONE32 if v is None else v


def _unopt(v: int) -> int | None:
    return None if v == NONE32 else v


def encode(packet) -> bytes:
    try:
        if isinstance(packet, RouteRequest):
            return _RREQ.pack(
                RREQ_TYPE, packet.rreq_id, packet.source, packet.source_seqno, packet.destination,
                _opt(packet.dest_seqno_known), packet.hop_count, _opt(packet.first_hop),
                int(packet.src_dir) & 0b11, _scaled(packet.src_speed, 100, "src_speed"),
                packet.src_stoptimes, _scaled(packet.speed_metric, 100, "speed_metric"),
                packet.stop_metric,
            )
        if isinstance(packet, RouteReply):
            dirs = (int(packet.src_dir) & 0b11) | ((int(packet.dest_dir) & 0b11) << 2)
            return _RREP.pack(
                RREP_TYPE, packet.source, packet.destination, packet.dest_seqno, packet.hop_count,
                _opt(packet.last_hop), _scaled(packet.avg_speed, 200, "avg_speed"),
                _scaled(packet.avg_stop, 2, "avg_stop"), _scaled(packet.speed_metric, 200, "speed_metric"),
                _scaled(packet.stop_metric, 2, "stop_metric"), dirs,
            )
        if isinstance(packet, RouteError):
            items = packet.unreachable
            if len(items) > 255:
                raise CodecError("RERR carries at most 255 destinations")
            return _RERR_HEAD.pack(RERR_TYPE, len(items)) + b"".join(_RERR_ITEM.pack(d, s) for d, s in items)
    except struct.error as exc:
        raise CodecError(str(exc)) from exc
    raise CodecError(f"no wire format for {type(packet).__name__}")


def decode(data: bytes):
    if not data:
        raise CodecError("empty packet")
    kind = data[0]
    try:
        if kind == RREQ_TYPE:
            (_, rid, src, sseq, dst, dseq, hops, first, sdir, sspeed, sstop, smetric, stmetric) = _RREQ.unpack(data)
            if sdir > 3:
                raise CodecError("bad heading code")
            return RouteRequest(rid, src, sseq, dst, _unopt(dseq), hops, _unopt(first), Heading(sdir),
                                Fraction(sspeed, 100), sstop, Fraction(smetric, 100), stmetric)
        if kind == RREP_TYPE:
            (_, src, dst, dseq, hops, last, avg_speed, avg_stop, smetric, stmetric, dirs) = _RREP.unpack(data)
            if dirs > 0b1111:
                raise CodecError("bad heading code")
            return RouteReply(src, dst, dseq, hops, _unopt(last), Fraction(avg_speed, 200), Fraction(avg_stop, 2),
                              Fraction(smetric, 200), Fraction(stmetric, 2), Heading(dirs & 0b11), Heading(dirs >> 2))
        if kind == RERR_TYPE:
            _, count = _RERR_HEAD.unpack_from(data)
            if len(data) != _RERR_HEAD.size + count * _RERR_ITEM.size:
                raise CodecError("RERR length mismatch")
            items = tuple(_RERR_ITEM.unpack_from(data, _RERR_HEAD.size + i * _RERR_ITEM.size) for i in range(count))
            return RouteError(items)
    except struct.error as exc:
        raise CodecError(str(exc)) from exc
    raise CodecError(f"unknown packet type {kind}")


RREQ_SIZE = _RREQ.size
RREP_SIZE = _RREP.size


def packet_size(packet) -> int:
    """Bytes on the air: the codec size for control packets, the payload for data."""
    if isinstance(packet, DataPacket):
        return packet.size
    if isinstance(packet, RouteRequest):
        return RREQ_SIZE
    if isinstance(packet, RouteReply):
        return RREP_SIZE
    if isinstance(packet, RouteError):
        return _RERR_HEAD.size + len(packet.unreachable) * _RERR_ITEM.size
    raise TypeError(type(packet).__name__)
