"""Manhattan-grid vehicle kinematics and periodic stop scheduling."""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, TextIO

from .engine import NS_PER_S, Engine, seconds

KMH = 1000.0 / 3600.0


class Heading(IntEnum):
    # clockwise order; the value doubles as the 2-bit wire code
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3

    def left(self) -> "Heading":
        return Heading((self - 1) % 4)

    def right(self) -> "Heading":
        return Heading((self + 1) % 4)

    @property
    def horizontal(self) -> bool:
        return self in (Heading.EAST, Heading.WEST)

    @property
    def label(self) -> str:
        return self.name.lower()


_UNIT = {
    Heading.NORTH: (0.0, 1.0),
    Heading.EAST: (1.0, 0.0),
    Heading.SOUTH: (0.0, -1.0),
    Heading.WEST: (-1.0, 0.0),
}


class MobilityError(RuntimeError):
    """Node state left the street grid."""


@dataclass(frozen=True)
class GridMap:
    width: float = 2000.0
    height: float = 2000.0
    block_size: float = 250.0

    def __post_init__(self):
        for name in ("width", "height"):
            v = getattr(self, name)
            if v <= 0 or self.block_size <= 0:
                raise ValueError(f"{name} and block_size must be positive")
            if not math.isclose(v / self.block_size, round(v / self.block_size)):
                raise ValueError(f"{name}={v} is not a multiple of block_size={self.block_size}")

    def on_line(self, c: float) -> bool:
        k = round(c / self.block_size)
        return abs(c - k * self.block_size) < 1e-6

    def on_street(self, x: float, y: float) -> bool:
        inside = -1e-6 <= x <= self.width + 1e-6 and -1e-6 <= y <= self.height + 1e-6
        return inside and (self.on_line(x) or self.on_line(y))

    def can_move(self, x: float, y: float, heading: Heading) -> bool:
        """Whether a node at an intersection may leave along ``heading``."""
        if heading == Heading.NORTH:
            return y < self.height - 1e-6
        if heading == Heading.SOUTH:
            return y > 1e-6
        if heading == Heading.EAST:
            return x < self.width - 1e-6
        return x > 1e-6

    def interior(self, x: float, y: float) -> bool:
        return 1e-6 < x < self.width - 1e-6 and 1e-6 < y < self.height - 1e-6


@dataclass
class MobilityConfig:
    speed_min: float = 10 * KMH  # m/s
    speed_max: float = 90 * KMH
    speed_change: float = 10 * KMH  # max per-intersection speed perturbation
    p_straight: float = 0.5
    p_left: float = 0.25
    p_right: float = 0.25
    step: float = 0.5  # s
    stop_interval: float = 60.0
    stop_duration: float = 20.0
    min_stop_duration: float = 5.0
    stop_window: float | None = None  # None: entire history

    def __post_init__(self):
        if not 0 <= self.speed_min <= self.speed_max:
            raise ValueError("speed range must satisfy 0 <= min <= max")
        total = self.p_straight + self.p_left + self.p_right
        if not math.isclose(total, 1.0) or min(self.p_straight, self.p_left, self.p_right) < 0:
            raise ValueError("turn probabilities must be non-negative and sum to 1")
        if self.stop_duration >= self.stop_interval:
            raise ValueError("stop_duration must be shorter than stop_interval")


@dataclass(eq=False)
class KinematicState:
    x: float
    y: float
    speed: float
    heading: Heading
    stop_events: list = field(default_factory=list)  # [begin_ns, end_ns | None]
    cruise_speed: float = 0.0
    stopped: bool = False

    def __post_init__(self):
        if not self.cruise_speed:
            self.cruise_speed = self.speed

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def choose_turn(node: KinematicState, grid: GridMap, cfg: MobilityConfig, rng: random.Random) -> tuple[str, Heading]:
    """Draw straight/left/right at an intersection, renormalised over exits that stay on the grid."""
    h = node.heading
    options = [("straight", h, cfg.p_straight), ("left", h.left(), cfg.p_left), ("right", h.right(), cfg.p_right)]
    valid = [o for o in options if grid.can_move(node.x, node.y, o[1])]
    if not valid:
        back = Heading((h + 2) % 4)
        return "back", back
    total = sum(p for _, _, p in valid)
    if total <= 0:
        # every allowed exit has probability zero; pick uniformly so the node stays on the grid
        turn, heading, _ = valid[int(rng.random() * len(valid))]
        return turn, heading
    r = rng.random() * total
    acc = 0.0
    for turn, heading, p in valid:
        acc += p
        if r < acc:
            return turn, heading
    return valid[-1][0], valid[-1][1]


def _redraw_speed(speed: float, cfg: MobilityConfig, rng: random.Random) -> float:
    new = speed + rng.uniform(-cfg.speed_change, cfg.speed_change)
    return min(max(new, cfg.speed_min), cfg.speed_max)


def step_node(
    node: KinematicState,
    dt: float,
    rng: random.Random,
    grid: GridMap,
    cfg: MobilityConfig,
    turns: Counter | None = None,
) -> KinematicState:
    """Advance ``node`` by ``dt`` seconds along the grid, in place.

    Each intersection reached draws a new heading and a speed correlated with
    the previous one.  Interior turn decisions are tallied into ``turns`` when
    given.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if node.stopped or node.speed <= 0:
        return node
    b = grid.block_size
    t_left = dt
    while t_left > 1e-12:
        h = node.heading
        dx, dy = _UNIT[h]
        coord = node.x if h.horizontal else node.y
        sign = dx + dy
        if sign > 0:
            target = (math.floor(coord / b + 1e-9) + 1) * b
        else:
            target = (math.ceil(coord / b - 1e-9) - 1) * b
        dist = abs(target - coord)
        travel = node.speed * t_left
        if travel < dist:
            if h.horizontal:
                node.x += dx * travel
            else:
                node.y += dy * travel
            break
        if h.horizontal:
            node.x = target
        else:
            node.y = target
        t_left -= dist / node.speed
        interior = grid.interior(node.x, node.y)
        turn, node.heading = choose_turn(node, grid, cfg, rng)
        if turns is not None and interior:
            turns[turn] += 1
        node.speed = node.cruise_speed = _redraw_speed(node.speed, cfg, rng)
    if not grid.on_street(node.x, node.y):
        raise MobilityError(f"node off grid at ({node.x}, {node.y})")
    return node


def place_node(grid: GridMap, cfg: MobilityConfig, rng: random.Random) -> KinematicState:
    """Uniform position on a random street, heading along it, uniform speed."""
    lines_h = int(round(grid.height / grid.block_size)) + 1
    lines_v = int(round(grid.width / grid.block_size)) + 1
    len_h = lines_h * grid.width
    len_v = lines_v * grid.height
    if rng.random() * (len_h + len_v) < len_h:
        y = rng.randrange(lines_h) * grid.block_size
        x = rng.uniform(0, grid.width)
        heading = Heading.EAST if rng.random() < 0.5 else Heading.WEST
    else:
        x = rng.randrange(lines_v) * grid.block_size
        y = rng.uniform(0, grid.height)
        heading = Heading.NORTH if rng.random() < 0.5 else Heading.SOUTH
    speed = rng.uniform(cfg.speed_min, cfg.speed_max)
    return KinematicState(x=x, y=y, speed=speed, heading=heading)


def assign_stoppers(n_nodes: int, fraction: float, rng: random.Random) -> list[int]:
    """Pick ``round(fraction * n)`` distinct node ids (halves round up), sorted."""
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must be in [0, 1]")
    k = int(math.floor(fraction * n_nodes + 0.5 + 1e-9))
    return sorted(rng.sample(range(n_nodes), k))


def stop_times(node: KinematicState, now: int, min_stop_duration: int = seconds(5.0), window: int | None = None) -> int:
    """Number of qualifying stops in the node's history as of ``now`` (ns).

    A stop qualifies once it has lasted ``min_stop_duration`` and, with a finite
    ``window``, when it overlaps ``[now - window, now]``.
    """
    lo = None if window is None else now - window
    count = 0
    for begin, end in node.stop_events:
        if begin > now:
            break
        stop_end = now if end is None or end > now else end
        if stop_end - begin < min_stop_duration:
            continue
        if lo is not None and stop_end < lo:
            continue
        count += 1
    return count


class Mobility:
    """Owns every vehicle's kinematic state during one run."""

    def __init__(self, engine: Engine, n_nodes: int, grid: GridMap, cfg: MobilityConfig, duration: int):
        self.engine = engine
        self.grid = grid
        self.cfg = cfg
        self.duration = duration
        self.rng = engine.rng("mobility")
        self.nodes = [place_node(grid, cfg, self.rng) for _ in range(n_nodes)]
        self.version = 0  # bumped whenever positions change
        self._step_ns = seconds(cfg.step)
        self._min_stop = seconds(cfg.min_stop_duration)
        self._window = None if cfg.stop_window is None else seconds(cfg.stop_window)
        self.stoppers: list[int] = []
        self.listeners: list = []

    def start(self, stopped_fraction: float = 0.0) -> None:
        topo = self.engine.rng("topology")
        self.stoppers = assign_stoppers(len(self.nodes), stopped_fraction, topo)
        for nid in self.stoppers:
            self.schedule_stop_cycle(nid, seconds(self.cfg.stop_interval), seconds(self.cfg.stop_duration), topo)
        self.engine.schedule(self._step_ns, "mobility-step", self._on_step)

    def schedule_stop_cycle(self, nid: int, interval: int, duration: int, rng: random.Random) -> None:
        if duration >= interval:
            raise ValueError("stop_duration must be shorter than stop_interval")
        begin = rng.randrange(interval)
        while begin < self.duration:
            self.engine.schedule(begin, "stop-begin", self._on_stop_begin, nid)
            self.engine.schedule(begin + duration, "stop-end", self._on_stop_end, nid)
            begin += interval

    def _on_step(self, _payload) -> None:
        dt = self.cfg.step
        rng, grid, cfg = self.rng, self.grid, self.cfg
        for node in self.nodes:
            if not node.stopped:
                step_node(node, dt, rng, grid, cfg)
        self.version += 1
        for cb in self.listeners:
            cb()
        nxt = self.engine.now + self._step_ns
        if nxt <= self.duration:
            self.engine.schedule(nxt, "mobility-step", self._on_step)

    def _on_stop_begin(self, nid: int) -> None:
        node = self.nodes[nid]
        node.stopped = True
        node.speed = 0.0
        node.stop_events.append([self.engine.now, None])

    def _on_stop_end(self, nid: int) -> None:
        node = self.nodes[nid]
        node.stopped = False
        node.speed = node.cruise_speed
        node.stop_events[-1][1] = self.engine.now

    def stop_times(self, nid: int) -> int:
        return stop_times(self.nodes[nid], self.engine.now, self._min_stop, self._window)

    def positions(self) -> list[tuple[float, float]]:
        return [(n.x, n.y) for n in self.nodes]

    def write_trace(self, out: TextIO, nodes: Iterable[int] | None = None) -> None:
        """One line per node: time_s, node_id, x_m, y_m, speed_mps, heading, stop_times."""
        t = self.engine.now / NS_PER_S
        ids = range(len(self.nodes)) if nodes is None else nodes
        for nid in ids:
            n = self.nodes[nid]
            out.write(f"{t:.3f} {nid} {n.x:.3f} {n.y:.3f} {n.speed:.3f} {n.heading.label} {self.stop_times(nid)}\n")
