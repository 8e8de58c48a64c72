import pytest
from hypothesis import given, strategies as st

from vanetsim.engine import Engine, SchedulingError, rng_stream, seconds


def test_event_at_zero_dispatched_first():
    eng = Engine()
    order = []
    eng.schedule(seconds(1), "timer-expiry", order.append, "late")
    eng.schedule(0, "timer-expiry", order.append, "first")
    eng.run_until(seconds(2))
    assert order == ["first", "late"]


def test_equal_times_fire_in_scheduling_order():
    eng = Engine()
    order = []
    for tag in "abc":
        eng.schedule(seconds(0.5), "timer-expiry", order.append, tag)
    eng.run_until(seconds(1))
    assert order == ["a", "b", "c"]


def test_cancelled_event_never_dispatched():
    eng = Engine()
    fired = []
    h = eng.schedule(seconds(1), "timer-expiry", fired.append, 1)
    Engine.cancel(h)
    assert eng.run_until(seconds(2)) == 0
    assert fired == []


def test_empty_queue_advances_clock_to_end():
    eng = Engine()
    assert eng.run_until(seconds(400)) == 0
    assert eng.now == seconds(400)


def test_scheduling_in_the_past_aborts():
    eng = Engine()
    eng.run_until(seconds(5))
    with pytest.raises(SchedulingError):
        eng.schedule(seconds(1), "timer-expiry", lambda _: None)


def test_events_after_end_stay_queued():
    eng = Engine()
    fired = []
    eng.schedule(seconds(3), "timer-expiry", fired.append, 3)
    eng.run_until(seconds(2))
    assert fired == [] and eng.now == seconds(2)
    eng.run_until(seconds(3))
    assert fired == [3]


@given(st.lists(st.integers(min_value=0, max_value=10_000), min_size=1, max_size=60))
def test_dispatch_order_is_time_then_sequence(times):
    eng = Engine(record=True)
    seen = []
    for t in times:
        eng.schedule(t, "timer-expiry", lambda _: seen.append(eng.now))
    eng.run_until(10_000)
    assert seen == sorted(seen)
    keys = [(t, s) for t, s, _ in eng.log]
    assert keys == sorted(keys)
    assert len(keys) == len(times)


def test_rng_streams_reproducible_and_independent():
    a = [rng_stream(7, "mobility").random() for _ in range(5)]
    b = [rng_stream(7, "mobility").random() for _ in range(5)]
    c = [rng_stream(7, "traffic").random() for _ in range(5)]
    assert a == b
    assert a != c
    with pytest.raises(ValueError):
        rng_stream(7, "weather")


def test_rng_stream_value_is_platform_stable():
    # frozen golden value: blake2b-derived state feeding the Mersenne Twister
    assert rng_stream(42, "radio").getrandbits(64) == 0x3C907C34FCDDE822
