"""Metric policies: which mobility parameters a protocol variant uses."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from ..mobility import Heading


class MetricTriple(NamedTuple):
    """Ordered lexicographically: speed metric, then stop_times metric, then hops."""

    speed_metric: Fraction
    stop_metric: Fraction
    hop_count: int


_ZERO = Fraction(0)


@dataclass(frozen=True)
class MetricPolicy:
    name: str
    direction: bool = False
    speed: bool = False
    stoptimes: bool = False

    def admits(self, heading: Heading, src_dir: Heading, dest_dir: Heading) -> bool:
        """Direction predicate for an intermediate node (always true without direction)."""
        if not self.direction:
            return True
        return heading == src_dir or heading == dest_dir

    def triple(self, path) -> MetricTriple:
        return MetricTriple(
            path.speed_metric if self.speed else _ZERO,
            path.stop_metric if self.stoptimes else _ZERO,
            path.hop_count,
        )

    def key(self, path) -> tuple:
        # next_hop is the deterministic tie-break
        return (*self.triple(path), path.next_hop)

    def speed_update(self, metric, baseline, own):
        if not self.speed:
            return _ZERO
        return max(metric, abs(baseline - own))

    def stop_update(self, metric, baseline, own):
        if not self.stoptimes:
            return 0 if isinstance(metric, int) else _ZERO
        return max(metric, abs(baseline - own))


AOMDV = MetricPolicy("aomdv")
SD_AOMDV = MetricPolicy("sd-aomdv", direction=True, speed=True)
SSD_AOMDV = MetricPolicy("ssd-aomdv", direction=True, speed=True, stoptimes=True)

POLICIES = {p.name: p for p in (AOMDV, SD_AOMDV, SSD_AOMDV)}


def get_policy(name: str) -> MetricPolicy:
    try:
        return POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; expected one of {sorted(POLICIES)}") from None
