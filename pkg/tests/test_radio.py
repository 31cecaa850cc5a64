import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oran_dsa.radio import (
    Assignment,
    GridError,
    LinkSet,
    RuConfig,
    SpectrumGrid,
    build_links,
    candidate_rates,
    is_satisfied,
    noise_power,
    path_loss,
    per_prb_rate,
    power_budget_ok,
    prb_bandwidth,
    prb_count,
    realized_rates,
    sample_fading,
    sinr,
    ue_total_rate,
)


def test_prb_counts_10mhz():
    assert [prb_count(10e6, 0.25e6, mu) for mu in range(5)] == [52, 26, 13, 6, 3]


def test_prb_bandwidth_doubles():
    assert [prb_bandwidth(mu) for mu in range(5)] == [180e3, 360e3, 720e3, 1440e3, 2880e3]


def test_grid_errors():
    with pytest.raises(GridError):
        prb_count(1e6, 0.5e6, 0)
    with pytest.raises(GridError):
        prb_count(2e6, 0.0, 4)  # 2 MHz < one 2.88 MHz PRB
    with pytest.raises(GridError):
        prb_bandwidth(5)


def test_spectrum_grid_ids_are_one_based():
    g = SpectrumGrid(10e6, 0.25e6, 4)
    assert list(g.prbs) == [1, 2, 3]
    assert g.prb_bandwidth_hz == 2880e3


@given(st.floats(1e6, 100e6), st.floats(0, 0.2), st.integers(0, 3))
def test_prb_count_non_increasing_in_mu(bw, guard_frac, mu):
    guard = guard_frac * bw
    try:
        hi = prb_count(bw, guard, mu + 1)
    except GridError:
        return
    assert prb_count(bw, guard, mu) >= hi


def test_noise_at_180khz():
    # -174 dBm/Hz over 180 kHz: 10**-17.4 mW/Hz * 1.8e5 Hz
    assert noise_power(-174.0, 180e3) == pytest.approx(7.16592e-16, rel=1e-5)


def test_path_loss_clamps_below_one_metre():
    assert path_loss(1.0, 2.7, 0.0) == 1.0
    assert path_loss(1.0, 2.7, 0.5) == 1.0
    assert path_loss(2.0, 2.0, 10.0) == pytest.approx(0.02)


def test_fading_is_unit_mean_exponential():
    h = sample_fading(np.random.default_rng(3), 200_000)
    assert (h >= 0).all()
    assert h.mean() == pytest.approx(1.0, abs=0.01)
    assert h.var() == pytest.approx(1.0, abs=0.03)


@given(st.floats(1e-3, 1e6), st.integers(0, 3))
def test_rate_strictly_increases_with_mu_at_fixed_sinr(s, mu):
    assert per_prb_rate(prb_bandwidth(mu + 1), s) > per_prb_rate(prb_bandwidth(mu), s)


def test_satisfaction_uses_tolerance_and_is_inclusive():
    assert is_satisfied(1e6, 1e6, 0.0)
    assert not is_satisfied(0.99e6, 1e6, 0.0)
    assert is_satisfied(0.9e6, 1e6, 0.1)


def _two_cell(fading=None):
    rus = (
        RuConfig(0, "macro", (0.0, 0.0), 300.0, 0.1, 10.0, 0.001, 1.0, 2.0),
        RuConfig(1, "micro", (100.0, 0.0), 50.0, 0.01, 1.0, 0.001, 1.0, 2.0),
    )
    pos = np.array([[10.0, 0.0], [90.0, 0.0]])
    links = build_links([7, 8], pos, rus, 2)
    if fading is not None:
        links = LinkSet(links.ue_ids, rus, links.distance, links.pathloss, fading)
    return rus, links


def test_sinr_hand_evaluation():
    rus, links = _two_cell()
    a = Assignment({7: 0, 8: 1}, {7: 1, 8: 1})
    n = 1e-12
    # UE 7: signal 0.1 * 10**-2, interference 0.01 * 90**-2
    exp7 = (0.1 / 100) / (0.01 / 8100 + n)
    # UE 8: signal 0.01 * 10**-2, interference 0.1 * 90**-2
    exp8 = (0.01 / 100) / (0.1 / 8100 + n)
    assert sinr(7, 1, 0, a, links, n) == pytest.approx(exp7, rel=1e-12)
    assert sinr(8, 1, 1, a, links, n) == pytest.approx(exp8, rel=1e-12)
    assert sinr(7, 2, 0, a, links, n) == 0.0  # not assigned there


def test_sinr_without_cochannel_interference():
    rus, links = _two_cell()
    a = Assignment({7: 0, 8: 1}, {7: 1, 8: 2})
    n = 1e-12
    assert sinr(7, 1, 0, a, links, n) == pytest.approx((0.1 / 100) / n)


def test_vectorized_rates_match_scalar_path():
    rng = np.random.default_rng(11)
    rus, links = _two_cell(rng.exponential(size=(2, 2, 2)))
    grid = SpectrumGrid(10e6, 0.25e6, 4)
    links = LinkSet(links.ue_ids, rus, links.distance, links.pathloss, rng.exponential(size=(2, 2, 3)))
    n = noise_power(-174, grid.prb_bandwidth_hz)
    for prbs in ({7: 1, 8: 1}, {7: 1, 8: 3}, {7: 2}, {}):
        a = Assignment({7: 0, 8: 1}, prbs)
        fast = realized_rates(a, links, grid, n)
        for ue in (7, 8):
            assert fast[ue] == pytest.approx(ue_total_rate(ue, a, links, grid, n), rel=1e-12)


def test_candidate_rates_exclude_own_ru():
    rus, links = _two_cell()
    grid = SpectrumGrid(10e6, 0.25e6, 4)
    links = LinkSet(links.ue_ids, rus, links.distance, links.pathloss, np.ones((2, 2, 3)))
    active = np.array([[True, False, False], [False, False, False]])
    table = candidate_rates(links, {7: 0, 8: 1}, active, grid, 1e-12)
    # RU 0 busy on PRB 1 does not interfere with its own UE
    assert table[0, 0] == table[0, 1]
    assert table[1, 0] < table[1, 1]


def test_occupancy_rejects_per_ru_reuse():
    a = Assignment({1: 0, 2: 0}, {1: 1, 2: 1})
    with pytest.raises(ValueError):
        a.occupancy()


def test_power_budget():
    ru = RuConfig(0, "micro", (0, 0), 50, 0.5, 1.0, 0.001)
    assert power_budget_ok(Assignment({1: 0, 2: 0}, {1: 1, 2: 2}), [ru])
    assert not power_budget_ok(Assignment({1: 0, 2: 0, 3: 0}, {1: 1, 2: 2, 3: 3}), [ru])


def test_ru_validation_messages():
    ru = RuConfig(0, "pico", (0, 0), -1, 0.1, 1.0, 0.5)
    errs = ru.validation_errors(max_prbs=52)
    assert any(e.startswith("kind") for e in errs)
    assert any(e.startswith("radius_m") for e in errs)
    assert any(e.startswith("prb_power_w") for e in errs)
    assert any(e.startswith("max_power_w") for e in errs)


def test_table1_power_budget_holds_at_every_numerology(table1_rus):
    for mu in range(5):
        p = prb_count(10e6, 0.25e6, mu)
        for ru in table1_rus:
            assert ru.validation_errors(p) == []
            assert p * ru.prb_power_w <= ru.max_power_w
    assert math.isclose(52 * 0.1, 5.2)
