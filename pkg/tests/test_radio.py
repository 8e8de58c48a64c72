import random

import pytest

from vanetsim.engine import Engine, seconds
from vanetsim.packets import DataPacket, RouteRequest, is_control, packet_size
from vanetsim.mobility import Heading
from vanetsim.radio import Channel, RadioConfig, StaticTopology, adjacency, neighbors
from fractions import Fraction


def test_boundary_is_inclusive():
    assert neighbors(0, [(0.0, 0.0), (250.0, 0.0)], 250.0) == {1}
    assert neighbors(0, [(0.0, 0.0), (250.1, 0.0)], 250.0) == set()


def test_neighbor_relation_symmetric():
    rng = random.Random(5)
    pos = [(rng.uniform(0, 2000), rng.uniform(0, 2000)) for _ in range(60)]
    adj = adjacency(pos, 250.0)
    for a in range(60):
        assert set(adj[a]) == neighbors(a, pos, 250.0)
        for b in adj[a]:
            assert a in adj[b]


def test_config_validation():
    with pytest.raises(ValueError):
        RadioConfig(range=0)
    with pytest.raises(ValueError):
        RadioConfig(loss_probability=1.0)


def _channel(edges, n, **cfg):
    eng = Engine(1)
    ch = Channel(eng, RadioConfig(**cfg), StaticTopology(n, edges), packet_size, is_control)
    got = []
    fails = []
    ch.deliver = lambda r, p, s: got.append((eng.now, r, s))
    ch.link_failed = lambda s, t, p: fails.append((eng.now, s, t))
    return eng, ch, got, fails


def _rreq():
    return RouteRequest(1, 0, 1, 5, None, 0, None, Heading.EAST, Fraction(0), 0)


def test_isolated_broadcast_delivers_nothing_but_counts():
    eng, ch, got, _ = _channel([], 2)
    assert ch.broadcast(0, _rreq()) == []
    eng.run_until(seconds(1))
    assert got == [] and ch.control_tx == 1


def test_data_airtime():
    eng, ch, got, _ = _channel([(0, 1)], 2, broadcast_jitter_max=0.0)
    ch.unicast(0, 1, DataPacket(0, 0, 0, 1, 512, 0))
    eng.run_until(seconds(1))
    assert got == [(2_048_000, 1, 0)]
    assert ch.control_tx == 0 and ch.data_tx == 1


def test_broadcast_counted_once_regardless_of_receivers():
    eng, ch, got, _ = _channel([(0, 1), (0, 2), (0, 3)], 4)
    ch.broadcast(0, _rreq())
    eng.run_until(seconds(1))
    assert sorted(r for _, r, _ in got) == [1, 2, 3]
    assert ch.control_tx == 1


def test_jitter_bounded():
    eng, ch, got, _ = _channel([(0, 1)], 2, broadcast_jitter_max=0.010)
    for _ in range(200):
        ch.broadcast(0, _rreq())
    eng.run_until(seconds(1))
    base = ch.airtime(packet_size(_rreq()))
    offsets = [t - base for t, _, _ in got]
    assert min(offsets) >= 0 and max(offsets) <= seconds(0.010)
    assert len(set(offsets)) > 100


def test_loss_rate_statistics():
    eng, ch, got, _ = _channel([(0, 1), (0, 2)], 3, loss_probability=0.1)
    for _ in range(10_000):
        ch.broadcast(0, _rreq())
    eng.run_until(seconds(1000))
    for r in (1, 2):
        frac = sum(1 for _, rr, _ in got if rr == r) / 10_000
        assert frac == pytest.approx(0.9, abs=0.01)


def test_unicast_in_range_no_failure():
    eng, ch, got, fails = _channel([(0, 1)], 2)
    assert ch.unicast(0, 1, _rreq())
    eng.run_until(seconds(1))
    assert fails == [] and len(got) == 1


def test_unicast_out_of_range_fails_once_after_delay():
    eng, ch, got, fails = _channel([], 2)
    eng.run_until(seconds(2))
    assert not ch.unicast(0, 1, DataPacket(0, 0, 0, 1, 512, 0))
    eng.run_until(seconds(3))
    assert got == []
    assert fails == [(seconds(2) + seconds(0.050), 0, 1)]
