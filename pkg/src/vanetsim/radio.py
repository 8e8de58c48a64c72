"""Unit-disk wireless channel with seeded jitter, optional loss and NRL accounting."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .engine import Engine, seconds

log = logging.getLogger(__name__)


@dataclass
class RadioConfig:
    range: float = 250.0  # m
    bitrate: float = 2e6  # bit/s
    broadcast_jitter_max: float = 0.010  # s
    loss_probability: float = 0.0
    failure_detection_delay: float = 0.050  # s

    def __post_init__(self):
        if self.range <= 0 or self.bitrate <= 0:
            raise ValueError("range and bitrate must be positive")
        if not 0 <= self.loss_probability < 1:
            raise ValueError("loss_probability must be in [0, 1)")
        if self.broadcast_jitter_max < 0 or self.failure_detection_delay < 0:
            raise ValueError("delays must be non-negative")


def neighbors(node: int, all_positions: Sequence[tuple[float, float]], radius: float) -> set[int]:
    """Nodes other than ``node`` within Euclidean distance ``<= radius`` (boundary inclusive)."""
    x0, y0 = all_positions[node]
    r2 = radius * radius
    return {
        i for i, (x, y) in enumerate(all_positions)
        if i != node and (x - x0) ** 2 + (y - y0) ** 2 <= r2
    }


def adjacency(all_positions: Sequence[tuple[float, float]], radius: float) -> list[list[int]]:
    """Neighbour lists for every node, in ascending id order."""
    pos = np.asarray(all_positions, dtype=float).reshape(-1, 2)
    dx = pos[:, 0, None] - pos[None, :, 0]
    dy = pos[:, 1, None] - pos[None, :, 1]
    adj = dx * dx + dy * dy <= radius * radius
    np.fill_diagonal(adj, False)
    rows, cols = np.nonzero(adj)
    out: list[list[int]] = [[] for _ in range(len(pos))]
    for r, c in zip(rows.tolist(), cols.tolist()):
        out[r].append(c)
    return out


class PositionTopology:
    """Connectivity derived from current vehicle positions (cached per mobility step)."""

    def __init__(self, mobility, radius: float):
        self.mobility = mobility
        self.radius = radius
        self._version = -1
        self._adj: list[list[int]] = []
        self._sets: list[set[int]] = []

    def _refresh(self) -> None:
        if self._version != self.mobility.version:
            self._adj = adjacency(self.mobility.positions(), self.radius)
            self._sets = [set(a) for a in self._adj]
            self._version = self.mobility.version

    def neighbors(self, nid: int) -> list[int]:
        self._refresh()
        return self._adj[nid]

    def connected(self, a: int, b: int) -> bool:
        self._refresh()
        return b in self._sets[a]


class StaticTopology:
    """Fixed undirected graph, for scripted scenarios."""

    def __init__(self, n_nodes: int, edges):
        self._sets = [set() for _ in range(n_nodes)]
        for a, b in edges:
            self._sets[a].add(b)
            self._sets[b].add(a)
        self._adj = [sorted(s) for s in self._sets]

    def neighbors(self, nid: int) -> list[int]:
        return self._adj[nid]

    def connected(self, a: int, b: int) -> bool:
        return b in self._sets[a]

    def remove_edge(self, a: int, b: int) -> None:
        self._sets[a].discard(b)
        self._sets[b].discard(a)
        self._adj[a] = sorted(self._sets[a])
        self._adj[b] = sorted(self._sets[b])


class Channel:
    """Delivers packets between nodes.

    ``deliver(receiver, packet, sender)`` and ``link_failed(sender, target,
    packet)`` are hooks set by the owner.  ``control_tx`` counts transmissions
    of routing control packets, once per transmit call.
    """

    def __init__(self, engine: Engine, cfg: RadioConfig, topology, size_of: Callable[[object], int],
                 is_control: Callable[[object], bool]):
        self.engine = engine
        self.cfg = cfg
        self.topology = topology
        self.size_of = size_of
        self.is_control = is_control
        self.rng = engine.rng("radio")
        self.control_tx = 0
        self.data_tx = 0
        self.deliver: Callable = lambda receiver, packet, sender: None
        self.link_failed: Callable = lambda sender, target, packet: None
        self.on_transmit: Callable | None = None  # (sender, packet, mode, size)
        self._jitter_ns = seconds(cfg.broadcast_jitter_max)
        self._fail_ns = seconds(cfg.failure_detection_delay)
        self._ns_per_bit = 1e9 / cfg.bitrate

    def airtime(self, size: int) -> int:
        return int(round(size * 8 * self._ns_per_bit))

    def _account(self, sender: int, packet, mode: str, size: int) -> None:
        if self.is_control(packet):
            self.control_tx += 1
        else:
            self.data_tx += 1
        if self.on_transmit is not None:
            self.on_transmit(sender, packet, mode, size)

    def broadcast(self, sender: int, packet) -> list[tuple[int, int]]:
        """Send to every in-range node; returns the scheduled ``(receiver, time)`` pairs."""
        size = self.size_of(packet)
        self._account(sender, packet, "broadcast", size)
        receivers = self.topology.neighbors(sender)
        if not receivers:
            return []
        jitter = self.rng.randint(0, self._jitter_ns) if self._jitter_ns else 0
        at = self.engine.now + self.airtime(size) + jitter
        loss = self.cfg.loss_probability
        if loss:
            rand = self.rng.random
            receivers = [r for r in receivers if rand() >= loss]
            if not receivers:
                return []
        else:
            receivers = list(receivers)
        # one event per transmission; receivers are served in ascending id order
        self.engine.schedule(at, "radio-delivery", self._deliver_all, (receivers, packet, sender))
        return [(r, at) for r in receivers]

    def unicast(self, sender: int, target: int, packet) -> bool:
        """Send to ``target``; an out-of-range target yields one delayed link-failure notice."""
        size = self.size_of(packet)
        self._account(sender, packet, "unicast", size)
        if not self.topology.connected(sender, target):
            self.engine.schedule(self.engine.now + self._fail_ns, "radio-delivery", self._fail, (sender, target, packet))
            return False
        loss = self.cfg.loss_probability
        if loss and self.rng.random() < loss:
            return True
        self.engine.schedule(self.engine.now + self.airtime(size), "radio-delivery", self._deliver, (target, packet, sender))
        return True

    def _deliver_all(self, payload) -> None:
        receivers, packet, sender = payload
        deliver = self.deliver
        for r in receivers:
            deliver(r, packet, sender)

    def _deliver(self, payload) -> None:
        receiver, packet, sender = payload
        self.deliver(receiver, packet, sender)

    def _fail(self, payload) -> None:
        sender, target, packet = payload
        self.link_failed(sender, target, packet)
