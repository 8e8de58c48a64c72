"""CBR flows, the data-packet ledger, and delay / PDF / NRL computation."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable

from .engine import NS_PER_S, seconds


@dataclass(frozen=True)
class Flow:
    fid: int
    source: int
    destination: int
    rate: float  # packets/s
    payload: int  # bytes
    start: int  # ns
    stop: int  # ns


def spawn_flows(count: int, n_nodes: int, rate: float, payload: int, rng: random.Random,
                duration: int, start_window: int = seconds(10.0)) -> list[Flow]:
    """``count`` CBR flows over distinct ordered (source, destination) pairs."""
    pairs = n_nodes * (n_nodes - 1)
    if count > pairs:
        raise ValueError(f"{count} flows requested but only {pairs} ordered pairs exist")
    if count < 0 or rate <= 0 or payload <= 0:
        raise ValueError("flow count, rate and payload must be positive")
    flows = []
    for fid, k in enumerate(rng.sample(range(pairs), count)):
        src, off = divmod(k, n_nodes - 1)
        dst = off if off < src else off + 1
        flows.append(Flow(fid, src, dst, rate, payload, rng.randrange(start_window), duration))
    return flows


@dataclass
class RunReport:
    protocol: str
    node_count: int
    percent_stopped: float
    seed: int
    mean_delay: float | None  # s, None when nothing was delivered
    pdf: float | None  # None when nothing was sent
    nrl: float | None  # None when nothing was delivered
    sent: int
    received: int
    control_tx: int
    dropped: int = 0
    in_flight: int = 0
    failed: bool = False

    @property
    def flags(self) -> list[str]:
        return [name for name in ("mean_delay", "pdf", "nrl") if getattr(self, name) is None]


class PacketLedger:
    """Send/delivery/drop record for every data packet, keyed by ``(flow, seq)``."""

    def __init__(self, keep_log: bool = False):
        self.sent_at: dict[tuple[int, int], int] = {}
        self.delivered_at: dict[tuple[int, int], int] = {}
        self.hops: dict[tuple[int, int], int] = {}
        self.dropped: dict[tuple[int, int], str] = {}
        self.duplicates = 0
        self.log: list[str] | None = [] if keep_log else None

    def record_send(self, flow: int, seq: int, now: int) -> None:
        self.sent_at[(flow, seq)] = now
        if self.log is not None:
            self.log.append(f"{now} SEND {flow} {seq}")

    def record_delivery(self, flow: int, seq: int, now: int, hops: int = 0) -> bool:
        key = (flow, seq)
        if key in self.delivered_at:
            self.duplicates += 1
            return False
        self.delivered_at[key] = now
        self.hops[key] = hops
        self.dropped.pop(key, None)
        if self.log is not None:
            self.log.append(f"{now} RECV {flow} {seq} {hops}")
        return True

    def record_drop(self, flow: int, seq: int, now: int, reason: str) -> None:
        key = (flow, seq)
        if key in self.delivered_at:
            return
        self.dropped[key] = reason
        if self.log is not None:
            self.log.append(f"{now} DROP {flow} {seq} {reason}")

    def delays(self) -> list[int]:
        return [t - self.sent_at[k] for k, t in self.delivered_at.items()]


def finalize(ledger: PacketLedger, control_tx: int, protocol: str = "", node_count: int = 0,
             percent_stopped: float = 0.0, seed: int = 0) -> RunReport:
    sent = len(ledger.sent_at)
    received = len(ledger.delivered_at)
    total = sum(ledger.delays())
    return RunReport(
        protocol=protocol,
        node_count=node_count,
        percent_stopped=percent_stopped,
        seed=seed,
        mean_delay=total / received / NS_PER_S if received else None,
        pdf=received / sent if sent else None,
        nrl=control_tx / received if received else None,
        sent=sent,
        received=received,
        control_tx=control_tx,
        dropped=len(ledger.dropped),
        in_flight=sent - received - len(ledger.dropped),
    )


def report_from_log(lines: Iterable[str], **labels) -> RunReport:
    """Rebuild a :class:`RunReport` from an exported run log."""
    ledger = PacketLedger()
    control = 0
    for line in lines:
        parts = line.split()
        if len(parts) < 2:
            continue
        now, tag = int(parts[0]), parts[1]
        if tag == "SEND":
            ledger.record_send(int(parts[2]), int(parts[3]), now)
        elif tag == "RECV":
            ledger.record_delivery(int(parts[2]), int(parts[3]), now, int(parts[4]))
        elif tag == "DROP":
            ledger.record_drop(int(parts[2]), int(parts[3]), now, parts[4])
        elif tag == "CTRL":
            control += 1
    return finalize(ledger, control, **labels)
