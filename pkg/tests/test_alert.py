import itertools
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blindspot.alert import (
    AlertEvent,
    AlertHooks,
    AlertParams,
    AlertState,
    ClockError,
    EventKind,
    EventPublisher,
    Mode,
    Zone,
    alert_step,
    check_raise_budget,
    default_zone_presets,
    derive_zone_presets,
    in_zone,
    point_in_polygon,
    zone_for_placement,
)
from blindspot.geometry import BoundingBox, Detection
from blindspot.scenario import ConfigError
from oracles import on_boundary, regex_alert_events, winding_number

WHOLE = Zone(((0, 0), (1, 0), (1, 1), (0, 1)), "A_front_mirror")
QUAD = Zone(((0, 0), (0.5, 0), (0.5, 0.5), (0, 0.5)), "A_front_mirror")
HIT = [Detection(BoundingBox(0.2, 0.2, 0.3, 0.3, True), 0.9)]


def nd(x0, y0, x1, y1, s=0.9):
    return Detection(BoundingBox(x0, y0, x1, y1, True), s)


def run(pattern, k_on, k_off, period=1):
    state, events = AlertState(), []
    modes = []
    for i, c in enumerate(pattern):
        state, ev = alert_step(state, HIT if c == "h" else [], WHOLE, i * period, AlertParams(k_on, k_off))
        events += [(e.kind.value, i) for e in ev]
        modes.append(state)
    return events, state, modes


def test_in_zone_examples():
    assert in_zone(nd(0.4, 0.4, 0.6, 0.6), WHOLE)
    assert not in_zone(nd(0.7, 0.7, 0.9, 0.9), QUAD)
    edge = nd(0.1, 0.2, 0.3, 0.5)  # bottom-center (0.2, 0.5) lies on the top-side edge y = 0.5
    assert in_zone(edge, QUAD)
    assert on_boundary(edge.box.bottom_center, QUAD.polygon)


def test_bottom_center_not_box_center():
    # box centre inside the quadrant, ground contact below it
    assert not in_zone(nd(0.1, 0.3, 0.2, 0.8), QUAD)


def random_simple_polygon(rng):
    n = rng.randint(3, 9)
    cx, cy = rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)
    # one angle per sector keeps every gap below pi, so the star polygon stays simple
    angles = [(i + rng.uniform(0.1, 0.9)) * 2 * math.pi / n for i in range(n)]
    return [(cx + r * math.cos(a), cy + r * math.sin(a)) for a, r in ((a, rng.uniform(0.05, 0.3)) for a in angles)]


def test_point_in_polygon_matches_winding_oracle():
    rng = random.Random(4)
    for _ in range(300):
        poly = random_simple_polygon(rng)
        for _ in range(30):
            p = (rng.uniform(0, 1), rng.uniform(0, 1))
            expect = winding_number(p, poly) != 0 or on_boundary(p, poly)
            assert point_in_polygon(p, poly) == expect
        # vertices and edge midpoints are boundary points
        for a, b in zip(poly, poly[1:] + poly[:1]):
            assert point_in_polygon(a, poly)
            assert point_in_polygon(((a[0] + b[0]) / 2, (a[1] + b[1]) / 2), poly) == on_boundary(
                ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2), poly
            )


def test_in_zone_invariant_under_vertex_rotation():
    rng = random.Random(6)
    for _ in range(100):
        poly = random_simple_polygon(rng)
        for _ in range(20):
            x0, x1 = sorted([rng.random(), rng.random()])
            y0, y1 = sorted([rng.random(), rng.random()])
            d = nd(x0, y0, x1, y1)
            base = in_zone(d, Zone(tuple(poly)))
            for k in range(1, len(poly)):
                assert in_zone(d, Zone(tuple(poly[k:] + poly[:k]))) == base


def test_zone_validation():
    with pytest.raises(ConfigError):
        Zone(((0, 0), (1, 1)))
    with pytest.raises(ConfigError):
        Zone(((0, 0), (1.5, 0), (1, 1)))
    with pytest.raises(ConfigError):
        Zone(((0, 0), (1, 1), (1, 0), (0, 1)))  # bow-tie


def test_presets_are_projected_lane_bands():
    shipped = default_zone_presets()
    derived = derive_zone_presets()
    assert set(shipped) == {"A", "B", "C"}
    for key in shipped:
        assert len(shipped[key]) == len(derived[key])
        for (u0, v0), (u1, v1) in zip(shipped[key], derived[key]):
            assert abs(u0 - u1) <= 1e-6 and abs(v0 - v1) <= 1e-6


def test_zone_for_placement():
    a = zone_for_placement("A")
    assert a.placement_tag == "A_front_mirror" and a.polygon == default_zone_presets()["A"]
    assert zone_for_placement("C_rear").placement_tag == "C_rear"
    custom = "0 0; 1 0; 1 1"
    assert zone_for_placement("B", {"B": custom}).polygon == ((0, 0), (1, 0), (1, 1))
    with pytest.raises(ConfigError):
        zone_for_placement("D")


def test_alert_examples():
    events, _, _ = run("h", 1, 5)
    assert events == [("RAISED", 0)]
    events, _, _ = run("hhhhhh", 3, 5)
    assert events == [("RAISED", 2)]
    events, _, _ = run("hhmh", 3, 5)
    assert events == []


def test_raise_at_thirty_fps_within_budget():
    period = 1_000_000_000 // 30
    state = AlertState()
    for i in range(10):
        state, ev = alert_step(state, HIT, WHOLE, i * period, AlertParams(3, 5))
        if ev:
            raised_at = ev[0].timestamp
            break
    assert raised_at / 1e9 == pytest.approx(2 / 30)
    assert raised_at / 1e9 < 2.0


@pytest.mark.parametrize("k_on,k_off", [(1, 1), (1, 3), (2, 2), (3, 5), (4, 1), (5, 4)])
def test_matches_regex_oracle_exhaustively(k_on, k_off):
    for n in range(13):
        for combo in itertools.product("hm", repeat=n):
            pattern = "".join(combo)
            events, state, modes = run(pattern, k_on, k_off)
            expect, active = regex_alert_events(pattern, k_on, k_off)
            assert events == expect, pattern
            assert state.alerting == active


def test_mode_invariants():
    rng = random.Random(2)
    for _ in range(300):
        pattern = "".join(rng.choice("hm") for _ in range(30))
        k_on, k_off = rng.randint(1, 4), rng.randint(1, 4)
        _, _, states = run(pattern, k_on, k_off)
        for s in states:
            if s.mode is Mode.TENTATIVE:
                assert 1 <= s.consecutive_hits < k_on
            if s.mode is Mode.COOLDOWN:
                assert 1 <= s.consecutive_misses < k_off


@given(st.text("hm", max_size=25), st.integers(0, 24), st.integers(1, 4), st.integers(1, 4))
def test_extra_hit_never_delays_raise(pattern, flip, k_on, k_off):
    if flip >= len(pattern):
        return
    more = pattern[:flip] + "h" + pattern[flip + 1:]

    def first_raise(p):
        ev, _, _ = run(p, k_on, k_off)
        return next((i for k, i in ev if k == "RAISED"), None)

    a, b = first_raise(pattern), first_raise(more)
    if a is not None:
        assert b is not None and b <= a


def test_clock_error():
    s, _ = alert_step(AlertState(), [], WHOLE, 100)
    with pytest.raises(ClockError):
        alert_step(s, [], WHOLE, 99)
    alert_step(s, [], WHOLE, 100)  # equal timestamps are allowed


def test_budget_validation():
    check_raise_budget(3, 30.0)
    check_raise_budget(60, 30.0)
    with pytest.raises(ConfigError):
        check_raise_budget(61, 30.0)
    with pytest.raises(ConfigError):
        check_raise_budget(3, 1.0)
    with pytest.raises(ConfigError):
        AlertParams(0, 1)


def test_hooks_and_publisher(tmp_path):
    seen = []
    marker = tmp_path / "beep"
    hooks = AlertHooks(sound_command=f"touch {marker}", callbacks=[seen.append])
    pub = EventPublisher()
    q = pub.subscribe(maxsize=1)
    raised = AlertEvent(EventKind.RAISED, 1, (), "A_front_mirror")
    hooks(raised)
    pub.publish(raised)
    assert hooks.overlay_active and seen == [raised]
    pub.publish(AlertEvent(EventKind.CLEARED, 2))
    assert pub.overflows == 1 and q.get_nowait() is raised
    hooks(AlertEvent(EventKind.CLEARED, 2))
    assert not hooks.overlay_active
    import time

    for _ in range(100):
        if marker.exists():
            break
        time.sleep(0.01)
    assert marker.exists()


def test_event_log_line():
    ev = AlertEvent(EventKind.RAISED, 5, (nd(0.25, 0.5, 0.75, 1.0, 0.5),), "B_above")
    assert ev.log_line() == "5,RAISED,B_above,[0.25 0.5 0.75 1.0 0.5]"
