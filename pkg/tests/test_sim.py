import json
import math

import numpy as np
import pytest

from oran_dsa import load_config, run_scenario
from oran_dsa.metrics import jain_fairness, service_share, service_shares, success_rate
from oran_dsa.mobility import MobilityState, step
from oran_dsa.radio import noise_power, prb_count
from oran_dsa.scenario import ConfigError, ScenarioConfig
from oran_dsa.sim import SlotRecord, UeSlot
from oran_dsa.streams import FADING, MOBILITY, POPULATION, stream
from oran_dsa.traffic import load_to_population, round_half_up

FAST = ["episodes=2", "slots_per_episode=8"]


def flat(base, amplitude=0.0):
    return "traffic.per_ru=" + json.dumps(
        [{"ru_id": i, "base": base, "amplitude": amplitude, "noise_sd": 0.0} for i in range(3)]
    )


def rec(flags):
    return SlotRecord(0, 0, 0, [UeSlot(i, 0, 1, 0.0, 1.0, f, False) for i, f in enumerate(flags)], 0, 0, 0)


def test_success_rate_examples():
    assert success_rate([rec([True, True]), rec([True])]) == 100.0
    assert success_rate([rec([True, False]), rec([False, True])]) == 50.0
    assert success_rate([rec([]), rec([True, False])]) == 50.0
    assert success_rate([rec([])]) == 100.0


def test_jain_examples():
    assert jain_fairness([1, 1, 1, 1]) == pytest.approx(100.0)
    assert jain_fairness([1, 0, 0, 0]) == pytest.approx(25.0)
    assert jain_fairness([2, 2]) == pytest.approx(100.0)
    assert jain_fairness([0, 0]) == 100.0
    with pytest.raises(ValueError):
        jain_fairness([])


def test_service_share_examples():
    recs = [rec([True]), rec([True]), rec([False]), rec([True])]
    assert service_share(recs, 0) == 0.75
    with pytest.raises(KeyError):
        service_share(recs, 9)


def test_single_ue_matches_hand_evaluation():
    rus = [
        {"id": 0, "kind": "macro", "position": [0.0, 0.0], "radius_m": 300.0, "prb_power_w": 0.1,
         "max_power_w": 10.0, "min_power_w": 0.001, "pathloss_constant": 1.0, "pathloss_exponent": 2.7}
    ]
    cfg = load_config(None, [
        "rus=" + json.dumps(rus),
        "traffic.per_ru=" + json.dumps([{"ru_id": 0, "base": 1.0, "amplitude": 0.0, "noise_sd": 0.0}]),
        "episodes=1", "slots_per_episode=1", "numerology=2", "demand_mix=[[20000000.0,1.0]]",
    ], seed=5)
    summary, records = run_scenario(cfg)
    assert len(records) == 1 and len(records[0].ues) == 1
    u = records[0].ues[0]
    assert u.prb == 1 and records[0].colored == 1

    # replay the named streams and evaluate the link budget by hand
    ru = cfg.ru_configs[0]
    prng = stream(5, POPULATION, 0, 0)
    (d,) = load_to_population(1.0, cfg.demand_mix, prng, ru, cfg.class_mix)
    s = MobilityState(*d.position, float(prng.uniform(-math.pi, math.pi)), cfg.speed_mps)
    s = step(s, 1.0, cfg.max_turn_rad, stream(5, MOBILITY, 0, 0), ru)
    h = stream(5, FADING, 0, 0).exponential(1.0, size=(1, 1, prb_count(10e6, 0.25e6, 2)))[0, 0, 0]
    dist = max(math.hypot(s.x, s.y), 1.0)
    w = 720e3
    snr = 0.1 * dist**-2.7 * h / (10 ** ((-174 + 10 * math.log10(w) - 30) / 10))
    rate = w * math.log2(1 + snr)
    assert u.rate_bps == pytest.approx(rate, rel=1e-12)
    assert u.satisfied == (rate >= 20e6)
    assert summary.success_rate == (100.0 if u.satisfied else 0.0)
    assert noise_power(-174, w) == pytest.approx(10 ** ((-174 + 10 * math.log10(w) - 30) / 10))


def test_zero_traffic_is_vacuous():
    summary, records = run_scenario(load_config(None, FAST + [flat(0.0)]))
    assert all(not r.ues for r in records)
    assert summary.success_rate == 100.0
    assert summary.jfi == 100.0


@pytest.fixture(scope="module")
def small_run():
    cfg = load_config(None, FAST + ["traffic.per_ru=" + json.dumps([
        {"ru_id": 0, "base": 8.0, "amplitude": 6.0, "noise_sd": 0.5},
        {"ru_id": 1, "base": 3.0, "amplitude": 2.0, "noise_sd": 0.2},
        {"ru_id": 2, "base": 3.0, "amplitude": 2.0, "noise_sd": 0.2},
    ]), "fairness_scheme=\"mpf\""], seed=3)
    return cfg, *run_scenario(cfg)


def test_run_invariants(small_run):
    cfg, summary, records = small_run
    assert 0 <= summary.success_rate <= 100
    assert 0 < summary.jfi <= 100
    assert len(records) == cfg.episodes * cfg.slots_per_episode
    assert len(summary.mu_trace) == cfg.episodes
    for r in records:
        assert r.numerology == summary.mu_trace[r.episode]
        per_ru = {}
        for u in r.ues:
            if u.satisfied:
                assert u.prb is not None
            if u.prb is None:
                assert u.rate_bps == 0.0
            else:
                assert (u.ru, u.prb) not in per_ru
                per_ru[(u.ru, u.prb)] = u.ue
        assert r.colored + r.uncolored == len(r.ues)


def test_population_constant_within_episode(small_run):
    cfg, summary, records = small_run
    for e in range(cfg.episodes):
        ids = [tuple(u.ue for u in r.ues) for r in records if r.episode == e]
        assert len(set(ids)) == 1
        assert len(ids[0]) == summary.ue_counts[e]


def test_recount_matches_metrics(small_run):
    _, summary, records = small_run
    fractions = [sum(u.satisfied for u in r.ues) / len(r.ues) for r in records if r.ues]
    assert summary.success_rate == pytest.approx(100 * sum(fractions) / len(fractions))
    shares = service_shares(records)
    vals = list(shares.values())
    assert summary.jfi == pytest.approx(100 * sum(vals) ** 2 / (len(vals) * sum(v * v for v in vals)))


def test_same_seed_same_records(small_run):
    cfg, summary, records = small_run
    s2, r2 = run_scenario(cfg)
    assert r2 == records
    assert s2 == summary


def test_scheme_change_keeps_traffic_and_positions(small_run):
    cfg, _, records = small_run
    other = ScenarioConfig.from_dict({**cfg.to_dict(), "fairness_scheme": "none", "coloring_scheme": "random"})
    _, r2 = run_scenario(other)
    assert [[(u.ue, u.ru, u.demand_bps) for u in r.ues] for r in r2] == [
        [(u.ue, u.ru, u.demand_bps) for u in r.ues] for r in records
    ]


def test_population_equals_rounded_load():
    cfg = load_config(None, FAST + [flat(2.5)])
    summary, _ = run_scenario(cfg)
    assert summary.ue_counts == [3 * round_half_up(2.5)] * 2


def test_forecast_mse_reported(small_run):
    _, summary, _ = small_run
    assert summary.forecast_mse is not None and summary.forecast_mse >= 0


def test_config_errors_name_fields():
    with pytest.raises(ConfigError) as exc:
        load_config(None, ["episodes=0", "rus.1.radius_m=-3", "fairness_scheme=\"edf\"", "bogus=1"])
    text = "\n".join(exc.value.errors)
    assert "bogus" in text
    with pytest.raises(ConfigError) as exc:
        load_config(None, ["episodes=0", "rus.1.radius_m=-3", "fairness_scheme=\"edf\""])
    text = "\n".join(exc.value.errors)
    assert "episodes" in text and "rus.1.radius_m" in text and "fairness_scheme" in text


def test_power_budget_violation_is_a_config_error():
    with pytest.raises(ConfigError, match="max_power_w"):
        load_config(None, ["rus.1.max_power_w=0.1"])


def test_config_round_trip_and_hash():
    cfg = load_config(None, ["seed=9"])
    again = ScenarioConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.config_hash() == cfg.config_hash()
    assert load_config(None, ["seed=10"]).config_hash() != cfg.config_hash()


def test_np_default_rng_is_not_global():
    np.random.seed(0)
    a = np.random.random()
    run_scenario(load_config(None, ["episodes=1", "slots_per_episode=1"]))
    np.random.seed(0)
    assert np.random.random() == a
