import io
import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from vanetsim.engine import Engine, seconds
from vanetsim.mobility import (
    KMH, GridMap, Heading, KinematicState, Mobility, MobilityConfig, MobilityError, assign_stoppers,
    step_node, stop_times,
)

GRID = GridMap()
CFG = MobilityConfig()


def test_stopped_node_does_not_move():
    n = KinematicState(x=100.0, y=250.0, speed=0.0, heading=Heading.EAST)
    step_node(n, 5.0, random.Random(0), GRID, CFG)
    assert (n.x, n.y, n.heading) == (100.0, 250.0, Heading.EAST)


def test_mid_block_straight_line():
    n = KinematicState(x=100.0, y=250.0, speed=10.0, heading=Heading.EAST)
    step_node(n, 1.0, random.Random(0), GRID, CFG)
    assert n.x == pytest.approx(110.0)
    assert n.y == 250.0 and n.heading == Heading.EAST and n.speed == 10.0


def test_off_grid_state_aborts():
    n = KinematicState(x=100.0, y=100.0, speed=10.0, heading=Heading.EAST)
    with pytest.raises(MobilityError):
        step_node(n, 1.0, random.Random(0), GRID, CFG)


def test_grid_must_be_multiple_of_block():
    with pytest.raises(ValueError):
        GridMap(2000.0, 1900.0, 300.0)


def test_heading_turns():
    assert Heading.EAST.left() == Heading.NORTH
    assert Heading.EAST.right() == Heading.SOUTH
    assert Heading.NORTH.left() == Heading.WEST


def test_turn_frequencies_match_configuration():
    rng = random.Random(1234)
    turns = Counter()
    n = KinematicState(x=1000.0, y=1000.0, speed=20.0, heading=Heading.NORTH)
    for _ in range(10_000):
        step_node(n, 5.0, rng, GRID, CFG, turns)
    total = sum(turns[k] for k in ("straight", "left", "right"))
    assert total > 1000
    assert turns["straight"] / total == pytest.approx(0.5, abs=0.03)
    assert turns["left"] / total == pytest.approx(0.25, abs=0.03)
    assert turns["right"] / total == pytest.approx(0.25, abs=0.03)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nodes_stay_on_grid_with_bounded_speed(seed):
    eng = Engine(seed)
    mob = Mobility(eng, 20, GRID, CFG, seconds(60))
    mob.start(0.5)
    checks = []

    def probe():
        for node in mob.nodes:
            assert GRID.on_street(node.x, node.y)
            assert 0 <= node.speed <= CFG.speed_max + 1e-9
            if node.stopped:
                assert node.speed == 0.0
        checks.append(1)

    mob.listeners.append(probe)
    eng.run_until(seconds(60))
    assert checks


def test_assign_stoppers_counts():
    assert assign_stoppers(60, 0.0, random.Random(1)) == []
    assert len(assign_stoppers(60, 0.10, random.Random(1))) == 6
    chosen = assign_stoppers(70, 0.70, random.Random(1))
    assert len(chosen) == 49 == len(set(chosen))
    with pytest.raises(ValueError):
        assign_stoppers(10, 1.5, random.Random(1))


@pytest.mark.parametrize("seed", range(12))
def test_stop_cycle_event_count(seed):
    eng = Engine(seed)
    mob = Mobility(eng, 3, GRID, CFG, seconds(400))
    mob.schedule_stop_cycle(0, seconds(60), seconds(20), random.Random(seed))
    eng.run_until(seconds(400))
    events = mob.nodes[0].stop_events
    assert len(events) in (6, 7)
    first = events[0][0]
    assert len(events) == (7 if first < seconds(40) else 6)
    assert mob.nodes[1].stop_events == []


def test_stop_cycle_rejects_bad_durations():
    eng = Engine()
    mob = Mobility(eng, 1, GRID, CFG, seconds(100))
    with pytest.raises(ValueError):
        mob.schedule_stop_cycle(0, seconds(20), seconds(20), random.Random(0))


def test_position_constant_during_stop():
    eng = Engine(3)
    mob = Mobility(eng, 1, GRID, CFG, seconds(200))
    mob.schedule_stop_cycle(0, seconds(60), seconds(20), random.Random(5))
    eng.schedule(seconds(0.5), "mobility-step", mob._on_step)
    by_stop = {}

    def probe():
        node = mob.nodes[0]
        if node.stopped:
            by_stop.setdefault(len(node.stop_events), set()).add(node.position)

    mob.listeners.append(probe)
    eng.run_until(seconds(200))
    assert len(by_stop) >= 3
    assert all(len(positions) == 1 for positions in by_stop.values())


def test_stop_times_counts():
    n = KinematicState(x=0.0, y=0.0, speed=0.0, heading=Heading.NORTH)
    assert stop_times(n, 0) == 0
    n.stop_events = [[seconds(t), seconds(t + 20)] for t in (10, 100, 200)]
    assert stop_times(n, seconds(300)) == 3


def test_stop_times_window():
    n = KinematicState(x=0.0, y=0.0, speed=0.0, heading=Heading.NORTH)
    n.stop_events = [[seconds(e - 20), seconds(e)] for e in (50, 150, 250)]
    assert stop_times(n, seconds(260), window=seconds(100)) == 1


def test_stop_times_ignores_short_and_open_young_stops():
    n = KinematicState(x=0.0, y=0.0, speed=0.0, heading=Heading.NORTH)
    n.stop_events = [[seconds(10), seconds(12)], [seconds(50), None]]
    assert stop_times(n, seconds(52)) == 0
    assert stop_times(n, seconds(56)) == 1


def test_stop_times_monotone_over_time():
    eng = Engine(9)
    mob = Mobility(eng, 5, GRID, CFG, seconds(400))
    mob.start(1.0)
    seen = [[] for _ in range(5)]
    mob.listeners.append(lambda: [seen[i].append(mob.stop_times(i)) for i in range(5)])
    eng.run_until(seconds(400))
    for series in seen:
        assert series == sorted(series)
        assert series[-1] >= 5


def test_trace_replay_is_identical():
    def trace(seed):
        eng = Engine(seed)
        mob = Mobility(eng, 10, GRID, CFG, seconds(50))
        mob.start(0.3)
        buf = io.StringIO()
        mob.listeners.append(lambda: mob.write_trace(buf))
        eng.run_until(seconds(50))
        return buf.getvalue()

    a, b = trace(11), trace(11)
    assert a == b
    first = a.splitlines()[0].split()
    assert len(first) == 7 and first[5] in {"north", "south", "east", "west"}
    assert trace(12) != a


def test_speed_conversion():
    assert CFG.speed_max == pytest.approx(25.0)
    assert CFG.speed_min == pytest.approx(10 * KMH)
