import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from adhoccloud.engine import make_stream
from adhoccloud.mobility import MobilityGroup, advance_mobility, init_mobility
from adhoccloud.radio import (
    Delivery,
    RadioConfig,
    Unreachable,
    deliverable,
    estimate_distance,
    min_power_level,
    rssi,
)

RADIO = RadioConfig()


@pytest.mark.parametrize("tx,d,n,expected", [(0, 1, 2, 0), (0, 100, 2, -40), (0, 10, 2, -20), (5, 0.2, 3, 5)])
def test_rssi_examples(tx, d, n, expected):
    assert rssi(tx, d, n) == pytest.approx(expected, abs=1e-12)


def test_distance_examples():
    assert estimate_distance(3.0, 3.0, 2.0) == 1.0
    assert estimate_distance(0, -40, 2) == pytest.approx(100.0, rel=1e-12)
    with pytest.raises(ValueError):
        estimate_distance(0, -40, 0)


@given(st.floats(1.0, 180.0), st.floats(-10, 20), st.floats(1.5, 4.0))
def test_distance_roundtrip(d, tx, n):
    assert estimate_distance(tx, rssi(tx, d, n), n) == pytest.approx(d, rel=1e-9)


def test_min_power_level():
    assert min_power_level(100, RADIO) == 2
    assert min_power_level(60, RADIO) == 1
    assert min_power_level(0, RADIO) == 1
    with pytest.raises(Unreachable):
        min_power_level(200, RADIO)


@given(st.floats(0, 180), st.floats(0, 180))
def test_min_power_level_monotone(a, b):
    lo, hi = sorted((a, b))
    assert min_power_level(lo, RADIO) <= min_power_level(hi, RADIO)


def test_energy_non_decreasing():
    e = RADIO.energy_per_packet_j
    assert all(x <= y for x, y in zip(e, e[1:]))
    assert RADIO.max_range == 180.0


def test_radio_validation():
    with pytest.raises(ValueError):
        RadioConfig(tx_power_dbm=[0, 0], range_m=[10, 20])
    with pytest.raises(ValueError):
        RadioConfig(path_loss_exponent=0)
    with pytest.raises(ValueError):
        RadioConfig(energy_per_packet_j=[3, 2, 1])


def test_max_only_keeps_top_level():
    m = RADIO.max_only()
    assert m.levels == 1 and m.range_m == [180.0] and m.energy_per_packet_j == [RADIO.energy_per_packet_j[-1]]


def test_deliverable_cases():
    rng = make_stream(1, "loss")
    sure = RadioConfig(rx_success_ratio=1.0)
    assert deliverable(30, 1, sure, rng) is Delivery.DELIVERED
    assert deliverable(70, 1, sure, rng) is Delivery.LOST
    assert deliverable(80, 1, sure, rng) is Delivery.LOST
    assert deliverable(80.01, 1, sure, rng) is Delivery.OUT_OF_RANGE


def test_delivery_rate_monte_carlo():
    rng = make_stream(3, "loss")
    radio = RadioConfig(rx_success_ratio=0.9)
    hits = sum(deliverable(10, 1, radio, rng) is Delivery.DELIVERED for _ in range(10_000))
    assert abs(hits / 10_000 - 0.9) <= 0.02


@given(st.integers(1, 100), st.floats(0.1, 30), st.floats(0, 250))
def test_rssi_oracle(seed, tx, d):
    assert rssi(tx, d, 2.5) == pytest.approx(oracles.rssi(tx, d, 2.5), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------- mobility

def _state(groups, n, seed=1, area=1200.0):
    return init_mobility(groups, n, area, make_stream(seed, "placement"))


def test_zero_speed_static():
    st_ = _state([MobilityGroup([0, 1, 2], speed=0, jitter_step=0, start=(100, 100))], 3)
    before = st_.positions().copy()
    after = advance_mobility(st_, 5.0)
    assert np.array_equal(before, after)
    assert st_.static


def test_centroid_kinematics():
    st_ = _state([MobilityGroup([0], speed=10, jitter_radius=0, jitter_step=0, start=(0, 0))], 1)
    st_.waypoint[0] = (100, 0)
    advance_mobility(st_, 1.0)
    assert st_.centroid[0] == pytest.approx((10, 0))


def test_positions_stay_in_area_over_long_run():
    groups = [MobilityGroup(list(range(i * 5, i * 5 + 5)), speed=8, jitter_radius=60, jitter_step=3) for i in range(4)]
    st_ = _state(groups, 20, seed=5)
    for _ in range(3600):
        pos = advance_mobility(st_, 1.0)
        assert pos.min() >= 0 and pos.max() <= 1200


def test_group_membership_validated():
    with pytest.raises(ValueError):
        _state([MobilityGroup([0, 1]), MobilityGroup([1, 2])], 3)
    with pytest.raises(ValueError):
        _state([MobilityGroup([0])], 2)
    with pytest.raises(ValueError):
        advance_mobility(_state([MobilityGroup([0])], 1), 0)


def test_jitter_bounded():
    st_ = _state([MobilityGroup([0, 1, 2, 3], speed=0, jitter_radius=25, jitter_step=5, start=(600, 600))], 4)
    for _ in range(200):
        advance_mobility(st_, 1.0)
        assert np.all(np.hypot(*st_.offset.T) <= 25 + 1e-9)
