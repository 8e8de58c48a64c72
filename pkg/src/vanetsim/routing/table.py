"""Per-destination multipath routing state and the AOMDV advertisement rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from ..mobility import Heading
from .policy import MetricPolicy

UNADVERTISED = 1 << 30
_ZERO = Fraction(0)


@dataclass(slots=True, eq=False)
class PathRecord:
    next_hop: int
    last_hop: int
    hop_count: int
    speed_metric: Fraction = Fraction(0)
    stop_metric: Fraction = Fraction(0)
    expiry: int = 0
    rrep_used: bool = False
    trail: tuple = ()  # intermediate nodes between this node and the destination, nearest first


@dataclass(eq=False)
class RouteEntry:
    destination: int
    seqno: int = -1
    advertised_hopcount: int = UNADVERTISED
    advertised_speed_metric: Fraction = Fraction(0)
    advertised_stop_metric: Fraction = Fraction(0)
    dest_dir: Heading = Heading.NORTH
    dest_speed: Fraction = Fraction(0)
    dest_stop: int = 0
    paths: list = field(default_factory=list)
    precursors: set = field(default_factory=set)

    def purge(self, now: int) -> list:
        """Drop expired paths; return the survivors."""
        paths = self.paths
        if paths and any(p.expiry < now for p in paths):
            self.paths = paths = [p for p in paths if p.expiry >= now]
        return paths

    def advertise(self, policy: MetricPolicy, now: int) -> int:
        """Fix the advertised hop count (and metrics) for this seqno on first use."""
        if self.advertised_hopcount == UNADVERTISED:
            live = self.purge(now)
            if live:
                best = select_forward_path(self, policy, now)
                self.advertised_hopcount = max(p.hop_count for p in live)
                self.advertised_speed_metric = best.speed_metric
                self.advertised_stop_metric = best.stop_metric
        return self.advertised_hopcount

    def reset(self, seqno: int) -> None:
        self.seqno = seqno
        self.paths = []
        self.advertised_hopcount = UNADVERTISED
        self.advertised_speed_metric = _ZERO
        self.advertised_stop_metric = _ZERO


def accept_advertisement(entry: RouteEntry, seqno: int, path: PathRecord, now: int, max_paths: int = 3) -> bool:
    """Install ``path`` under ``seqno`` if the AOMDV rules allow it.

    A fresher seqno replaces every stored path.  At equal seqno the path must
    not be longer than the advertised hop count and must not share its next
    hop or last hop with a stored path.  Older seqnos are rejected.
    """
    if seqno > entry.seqno:
        entry.reset(seqno)
        entry.paths.append(path)
        return True
    if seqno < entry.seqno:
        return False
    if path.hop_count > entry.advertised_hopcount:
        return False
    live = entry.purge(now)
    for p in live:
        if p.next_hop == path.next_hop or p.last_hop == path.last_hop:
            return False
    if len(live) >= max_paths:
        return False
    live.append(path)
    return True


def select_forward_path(entry: RouteEntry, policy: MetricPolicy, now: int) -> PathRecord | None:
    """Lexicographic minimum over live paths; ``None`` when none remain."""
    live = entry.purge(now)
    if not live:
        return None
    if len(live) == 1:
        return live[0]
    return min(live, key=policy.key)
