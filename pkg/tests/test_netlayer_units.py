import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from adhoccloud.engine import make_stream
from adhoccloud.netlayer.discovery import (
    PacketKind,
    handle_discovery_reply,
    handle_discovery_request,
    make_request,
    start_discovery,
)
from adhoccloud.netlayer.estimation import LinkStats, estimate_dtt, ewma, link_quality, packets_for
from adhoccloud.netlayer.lifetime import (
    ALLOWED_MASK,
    Boundaries,
    Interval,
    LinkLifetimeModel,
    classify_lifetime,
    link_down,
    link_up,
    predict_lifetime,
    record_link_transition,
    transition_matrix,
)
from adhoccloud.netlayer.routing import NoRoute, RouteEntry, RoutingTableSet, select_route
from adhoccloud.radio import RadioConfig, rssi

RADIO = RadioConfig(rx_success_ratio=1.0)


# ------------------------------------------------------------ link quality

def test_link_quality_examples():
    stats = LinkStats(b_channel=11e6, b_self={1: 2e6, 2: 3e6}, neighbors={0: {1, 2}})
    assert link_quality(0, 1, stats) == 6e6
    assert link_quality(0, 1, LinkStats(b_channel=2e6)) == 2e6
    assert link_quality(0, 1, LinkStats(b_channel=1e6, b_self={1: 3e6}), neighbors=[1]) == 0.0


def test_traffic_bookkeeping():
    s = LinkStats()
    s.add_traffic(1, 5.0)
    s.remove_traffic(1, 5.0 + 1e-9)
    assert s.b_self[1] == 0.0


# ------------------------------------------------------------ packets / dtt

def test_packets_examples():
    assert packets_for(3840, 4096, 256) == 1
    assert packets_for(8192, 4096, 256) == 3
    assert packets_for(0, 4096, 256) == 0
    with pytest.raises(ValueError):
        packets_for(10, 256, 256)


def test_dtt_examples():
    e = RouteEntry(1, 1, 1, avg_dropped_lost=0, link_quality=1e6)
    assert estimate_dtt(8192, e, 4096, 256) == pytest.approx(0.012288, rel=1e-12)
    e1 = RouteEntry(1, 1, 1, avg_dropped_lost=1, link_quality=1e6)
    assert estimate_dtt(8192, e1, 4096, 256) == pytest.approx(0.016384, rel=1e-12)
    assert estimate_dtt(0, e1, 4096, 256) == 0.0
    assert math.isinf(estimate_dtt(10, RouteEntry(1, 1, 1, link_quality=0.0)))


@given(st.floats(1, 1e7), st.floats(1e4, 1e7), st.floats(0, 50))
def test_dtt_monotone(data, lq, dl):
    base = RouteEntry(1, 1, 1, avg_dropped_lost=dl, link_quality=lq)
    faster = RouteEntry(1, 1, 1, avg_dropped_lost=dl, link_quality=lq * 1.5)
    lossier = RouteEntry(1, 1, 1, avg_dropped_lost=dl + 1, link_quality=lq)
    assert estimate_dtt(data, faster) < estimate_dtt(data, base) < estimate_dtt(data, lossier)


def test_multi_hop_dtt_sums_hops():
    e = RouteEntry(2, 3, 1, path=(2, 3), hop_stats=((1e6, 0.0), (5e5, 2.0)))
    expected = oracles.dtt(1e5, [(1e6, 0.0), (5e5, 2.0)], 4096, 256)
    assert estimate_dtt(1e5, e, 4096, 256) == pytest.approx(expected, rel=1e-12)


def test_ewma():
    assert ewma(10.0, 0.0) == pytest.approx(8.0)


# ------------------------------------------------------------ lifetime

def test_classify():
    b = Boundaries(30, 120)
    assert classify_lifetime(10, b) is Interval.S
    assert classify_lifetime(30, b) is Interval.S
    assert classify_lifetime(120, b) is Interval.M
    assert classify_lifetime(500, b) is Interval.L
    with pytest.raises(ValueError):
        classify_lifetime(-1, b)
    with pytest.raises(ValueError):
        Boundaries(50, 20)


def test_record_transitions():
    m = LinkLifetimeModel()
    record_link_transition(m, 5)
    assert m.counts.sum() == 0  # first observation has no predecessor
    record_link_transition(m, 10)
    assert m.counts[0, 0] == 1
    assert transition_matrix(m.counts)[0].tolist() == [1.0, 0.0, 0.0]
    record_link_transition(m, 6)  # S -> S
    record_link_transition(m, 40)  # S -> M
    assert transition_matrix(m.counts)[0].tolist() == [2 / 3, 1 / 3, 0.0]


def test_forbidden_transition_rejected():
    m = LinkLifetimeModel()
    record_link_transition(m, 60)  # M
    record_link_transition(m, 5)  # M -> S forbidden
    assert m.counts.sum() == 0 and m.rejected == 1


def test_fig5_example():
    m = LinkLifetimeModel()
    m.counts[0] = [5, 4, 1]
    p = predict_lifetime(m, Interval.S)
    assert p.interval is Interval.S and p.probability == pytest.approx(0.5) and p.lifetime_s == 0.0


def test_prediction_from_m_never_s():
    m = LinkLifetimeModel()
    m.counts[1] = [0, 1, 3]
    p = predict_lifetime(m, Interval.M)
    assert p.interval is Interval.L and p.probability == pytest.approx(0.75)
    assert predict_lifetime(LinkLifetimeModel(), Interval.M).interval is Interval.M


def test_empty_history_prior():
    p = predict_lifetime(LinkLifetimeModel(), Interval.S)
    assert p.interval is Interval.S and p.probability == pytest.approx(1 / 3)
    assert np.allclose(transition_matrix(np.zeros((3, 3)))[0], [1 / 3] * 3)


def test_at_least_conditioning():
    m = LinkLifetimeModel()
    m.counts[0] = [6, 3, 1]
    p = predict_lifetime(m, Interval.S, at_least=Interval.M)
    assert p.interval is Interval.M and p.probability == pytest.approx(0.75) and p.lifetime_s == 30.0
    # beyond every permitted successor: the known survival bound
    m2 = LinkLifetimeModel()
    m2.prev_interval = Interval.L
    assert predict_lifetime(m2, at_least=Interval.L).lifetime_s == 120.0


def test_link_up_down_records():
    m = LinkLifetimeModel()
    link_up(m, 0.0)
    link_down(m, 10.0)
    link_up(m, 20.0)
    link_down(m, 70.0)
    assert m.counts[0, 1] == 1 and m.prev_interval is Interval.M
    link_down(m, 80.0)  # already down: nothing recorded
    assert m.counts.sum() == 1


# ------------------------------------------------------------ routing

def _entry(dest, level, e_lq, prob, lifetime=100.0, nxt=None, path=None):
    return RouteEntry(
        next_node=nxt if nxt is not None else dest,
        dest_node=dest,
        power_level=level,
        link_quality=e_lq,
        predicted_lifetime=lifetime,
        lifetime_probability=prob,
        path=path or (),
    )


def test_select_single():
    t = RoutingTableSet(3)
    e = _entry(5, 1, 1e6, 0.5)
    t.add(e)
    c = select_route(5, 1e4, t)
    assert c.entry is e and not c.fallback


def test_select_prefers_probability_and_speed():
    # dtt 2 s vs 1 s for the same data, probabilities 0.6 vs 0.9
    data = 3840 * 100
    lq_slow = 100 * 4096 / 2.0
    lq_fast = 100 * 4096 / 1.0
    t = RoutingTableSet(3)
    a = _entry(5, 1, lq_slow, 0.6, nxt=1, path=(1, 5))
    b = _entry(5, 1, lq_fast, 0.9, nxt=2, path=(2, 5))
    t.add(a)
    t.add(b)
    c = select_route(5, data, t)
    assert c.entry is b and c.e_dtt == pytest.approx(1.0)


def test_select_only_level3():
    t = RoutingTableSet(3)
    t.add(_entry(5, 3, 1e6, 0.5))
    assert select_route(5, 1e4, t).entry.power_level == 3


def test_select_lower_level_wins_when_it_qualifies():
    t = RoutingTableSet(3)
    t.add(_entry(5, 1, 1e6, 0.4))
    t.add(_entry(5, 2, 1e6, 0.9))
    assert select_route(5, 1e4, t).entry.power_level == 1


def test_select_skips_short_lived_level():
    t = RoutingTableSet(3)
    t.add(_entry(5, 1, 1e6, 0.9, lifetime=0.0))
    t.add(_entry(5, 2, 1e6, 0.3))
    c = select_route(5, 1e4, t)
    assert c.entry.power_level == 2 and not c.fallback


def test_select_fallback_and_no_route():
    t = RoutingTableSet(3)
    t.add(_entry(5, 2, 1e6, 0.9, lifetime=0.0, nxt=1, path=(1, 5)))
    t.add(_entry(5, 2, 1e6, 0.1, lifetime=0.001, nxt=2, path=(2, 5)))
    c = select_route(5, 1e6, t)
    assert c.fallback and c.entry.next_node == 2
    with pytest.raises(NoRoute):
        select_route(9, 1e3, t)


@settings(max_examples=200)
@given(
    st.lists(
        st.tuples(st.integers(1, 3), st.floats(1e4, 1e7), st.floats(0, 1), st.floats(0, 200)),
        min_size=1,
        max_size=8,
    ),
    st.floats(1, 1e6),
    st.randoms(use_true_random=False),
)
def test_select_invariants(specs, data, rnd):
    entries = [
        _entry(9, lvl, lq, p, lifetime=lt, nxt=i, path=(i, 9)) for i, (lvl, lq, p, lt) in enumerate(specs)
    ]
    t1 = RoutingTableSet(3)
    for e in entries:
        t1.add(e)
    shuffled = list(entries)
    rnd.shuffle(shuffled)
    t2 = RoutingTableSet(3)
    for e in shuffled:
        t2.add(e)
    c1, c2 = select_route(9, data, t1), select_route(9, data, t2)
    assert c1.entry.path == c2.entry.path
    if not c1.fallback:
        assert c1.entry.predicted_lifetime >= c1.e_dtt


def test_table_add_replace_remove():
    t = RoutingTableSet(3)
    t.add(_entry(4, 1, 1e6, 0.2))
    t.add(_entry(4, 1, 2e6, 0.2))
    assert len(t.routes(4, 1)) == 1 and t.routes(4, 1)[0].link_quality == 2e6
    t.add(_entry(4, 3, 1e6, 0.2))
    assert t.levels_with(4) == [1, 3] and t.lowest_level(4) == 1 and 4 in t
    t.remove(4, 1)
    assert t.levels_with(4) == [3]
    with pytest.raises(ValueError):
        t.add(_entry(4, 7, 1e6, 0.2))
    with pytest.raises(ValueError):
        RouteEntry(1, 1, 1, link_quality=-1)
    with pytest.raises(ValueError):
        RouteEntry(1, 1, 1, lifetime_probability=1.5)


# ------------------------------------------------------------ discovery

def test_request_at_max_power():
    req = make_request(0, RADIO, 3)
    assert req.kind is PacketKind.REQUEST and req.tx_power_dbm == RADIO.tx_power(3)


def test_reply_levels():
    req = make_request(0, RADIO, 0)
    near = handle_discovery_request(1, req, req.tx_power_dbm, RADIO)
    assert near.selected_level == 1
    mid = handle_discovery_request(1, req, rssi(req.tx_power_dbm, 100, RADIO.path_loss_exponent), RADIO)
    assert mid.selected_level == 2 and mid.dest == 0
    assert handle_discovery_request(1, req, rssi(req.tx_power_dbm, 250, RADIO.path_loss_exponent), RADIO) is None


def test_reply_moves_entry_between_levels():
    t = RoutingTableSet(3)
    req = make_request(0, RADIO, 0)
    r1 = handle_discovery_request(1, req, rssi(req.tx_power_dbm, 100, 2.0), RADIO)
    handle_discovery_reply(t, r1)
    assert t.levels_with(1) == [2]
    r2 = handle_discovery_request(1, req, rssi(req.tx_power_dbm, 30, 2.0), RADIO)
    handle_discovery_reply(t, r2)
    assert t.levels_with(1) == [1]
    with pytest.raises(ValueError):
        handle_discovery_reply(t, req)


def test_start_discovery_isolated_and_crowd():
    rng = make_stream(1, "loss")
    pos = np.array([[0.0, 0.0], [1000.0, 1000.0]])
    t = RoutingTableSet(3)
    recs = start_discovery(0, pos, RADIO, t, rng)
    assert len(recs) == 1 and not t.destinations()

    pos = np.array([[0.0, 0.0], [100.0, 0.0]])
    t = RoutingTableSet(3)
    start_discovery(0, pos, RADIO, t, rng)
    assert t.levels_with(1) == [2]

    angles = np.linspace(0, 2 * np.pi, 19, endpoint=False)
    pos = np.vstack([[500.0, 500.0], 500 + np.c_[np.cos(angles), np.sin(angles)] * 50])
    t = RoutingTableSet(3)
    recs = start_discovery(0, pos, RadioConfig(rx_success_ratio=0.9), t, rng)
    replies = [r for r in recs if r.packet.kind is PacketKind.REPLY]
    assert len(replies) <= 19
    assert len(t.destinations()) <= len(replies)
    assert all(len(t.levels_with(d)) == 1 for d in t.destinations())


@settings(max_examples=150)
@given(st.integers(0, 10**6), st.integers(0, 400))
def test_markov_rows_normalise(seed, n_events):
    rng = np.random.default_rng(seed)
    m = LinkLifetimeModel()
    for d in rng.exponential(60, n_events):
        record_link_transition(m, float(d))
    probs = transition_matrix(m.counts)
    assert np.all(np.abs(probs.sum(axis=1) - 1) <= 1e-12)
    assert np.all(probs[~ALLOWED_MASK] == 0)
