"""Scenario configuration: defaults, JSON loading, overrides and validation.

A scenario is a single JSON document. Every field has a default, and
``ScenarioConfig.to_dict`` materializes all of them, so a saved config
always describes the run completely.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from oran_dsa.coloring import SCHEMES as COLORING_SCHEMES
from oran_dsa.fairness import SCHEMES as FAIRNESS_SCHEMES
from oran_dsa.radio import MAX_NUMEROLOGY, GridError, RuConfig, prb_count
from oran_dsa.traffic import PREDICTORS, SAMPLES_PER_DAY

TABLE1_UE_RANGE = (10, 160)


class ConfigError(ValueError):
    """Invalid scenario; ``errors`` lists ``field.path: message`` entries."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario config:\n  " + "\n  ".join(self.errors))


def table1_rus() -> list[dict]:
    return [
        dict(id=0, kind="macro", position=[0.0, 0.0], radius_m=300.0, prb_power_w=0.1,
             max_power_w=10.0, min_power_w=0.001, pathloss_constant=1.0, pathloss_exponent=2.7),
        dict(id=1, kind="micro", position=[200.0, 0.0], radius_m=50.0, prb_power_w=0.01,
             max_power_w=1.0, min_power_w=0.001, pathloss_constant=1.0, pathloss_exponent=2.8),
        dict(id=2, kind="micro", position=[-200.0, 0.0], radius_m=50.0, prb_power_w=0.01,
             max_power_w=1.0, min_power_w=0.001, pathloss_constant=1.0, pathloss_exponent=2.8),
    ]


@dataclass
class ForecastSettings:
    kind: str = "seasonal-naive"
    lookback: int = 48
    horizon: int = 1
    external_path: str | None = None


@dataclass
class RuTraffic:
    ru_id: int
    base: float
    amplitude: float
    noise_sd: float = 0.0


def _default_ru_traffic():
    return [
        asdict(RuTraffic(0, base=8.0, amplitude=6.0, noise_sd=0.5)),
        asdict(RuTraffic(1, base=3.0, amplitude=2.0, noise_sd=0.2)),
        asdict(RuTraffic(2, base=3.0, amplitude=2.0, noise_sd=0.2)),
    ]


@dataclass
class TrafficSettings:
    source: str = "synthetic"  # "synthetic" | "csv"
    csv_path: str | None = None
    days: int = 3
    # first episode runs at this sample index; defaults to 08:00 on day 2
    start_index: int = SAMPLES_PER_DAY + 32
    per_ru: list[dict] = field(default_factory=_default_ru_traffic)


@dataclass
class SlaSettings:
    priorities: dict[str, float] = field(default_factory=lambda: {"high": 2.0, "low": 1.0, "standard": 1.0})
    tolerances: dict[str, float] = field(default_factory=lambda: {"high": 0.0, "low": 0.0, "standard": 0.0})


@dataclass
class ScenarioConfig:
    rus: list[dict] = field(default_factory=table1_rus)
    bandwidth_hz: float = 10e6
    guard_band_hz: float = 0.25e6
    noise_psd_dbm_hz: float = -174.0
    episodes: int = 4
    slots_per_episode: int = 100
    slot_s: float = 1.0
    demand_mix: list[list[float]] = field(
        default_factory=lambda: [[0.5e6, 1 / 3], [1.0e6, 1 / 3], [1.5e6, 1 / 3]]
    )
    class_mix: list[list] = field(default_factory=lambda: [["standard", 1.0]])
    speed_mps: float = 1.5
    max_turn_rad: float = math.pi / 8
    sla: SlaSettings = field(default_factory=SlaSettings)
    coloring_scheme: str = "welsh-powell"
    fairness_scheme: str = "mpf"
    numerology: int | None = None
    headroom: float = 1.2
    ewma_alpha: float = 0.1
    forecast: ForecastSettings = field(default_factory=ForecastSettings)
    traffic: TrafficSettings = field(default_factory=TrafficSettings)
    seed: int = 0

    NESTED = {"sla": SlaSettings, "forecast": ForecastSettings, "traffic": TrafficSettings}

    @property
    def ru_configs(self) -> list[RuConfig]:
        return [RuConfig(**{**r, "position": tuple(r["position"])}) for r in self.rus]

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        errors: list[str] = []
        cfg = _build(cls, data, "", errors)
        if errors:
            raise ConfigError(errors)
        errors.extend(cfg.validation_errors())
        if errors:
            raise ConfigError(errors)
        return cfg

    def validation_errors(self) -> list[str]:
        e = []
        if self.episodes < 1:
            e.append("episodes: must be >= 1")
        if self.slots_per_episode < 1:
            e.append("slots_per_episode: must be >= 1")
        if self.slot_s <= 0:
            e.append("slot_s: must be > 0")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            e.append("seed: must be a non-negative integer")
        if self.speed_mps < 0:
            e.append("speed_mps: must be >= 0")
        if self.max_turn_rad < 0:
            e.append("max_turn_rad: must be >= 0")
        if self.headroom < 1:
            e.append("headroom: must be >= 1")
        if not 0 < self.ewma_alpha <= 1:
            e.append("ewma_alpha: must be in (0, 1]")
        if self.coloring_scheme not in COLORING_SCHEMES:
            e.append(f"coloring_scheme: expected one of {COLORING_SCHEMES}")
        if self.fairness_scheme not in FAIRNESS_SCHEMES:
            e.append(f"fairness_scheme: expected one of {FAIRNESS_SCHEMES}")
        if self.numerology is not None and not 0 <= self.numerology <= MAX_NUMEROLOGY:
            e.append(f"numerology: must be null or in 0..{MAX_NUMEROLOGY}")
        try:
            max_prbs = prb_count(self.bandwidth_hz, self.guard_band_hz,
                                 0 if self.numerology is None else self.numerology)
        except GridError as exc:
            e.append(f"bandwidth_hz: {exc}")
            max_prbs = None
        if not self.rus:
            e.append("rus: at least one RU is required")
        ids = set()
        for i, r in enumerate(self.rus):
            try:
                ru = RuConfig(**{**r, "position": tuple(r["position"])})
            except (TypeError, KeyError) as exc:
                e.append(f"rus.{i}: {exc}")
                continue
            if ru.id in ids:
                e.append(f"rus.{i}.id: duplicate RU id {ru.id}")
            ids.add(ru.id)
            e.extend(f"rus.{i}.{msg}" for msg in ru.validation_errors(max_prbs))
        e.extend(_mix_errors("demand_mix", self.demand_mix, positive=True))
        e.extend(_mix_errors("class_mix", self.class_mix, positive=False))
        for i, item in enumerate(self.class_mix):
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                continue
            cls = item[0]
            if cls not in self.sla.priorities:
                e.append(f"class_mix.{i}: class {cls!r} missing from sla.priorities")
            if cls not in self.sla.tolerances:
                e.append(f"class_mix.{i}: class {cls!r} missing from sla.tolerances")
        for k, w in self.sla.priorities.items():
            if not w > 0:
                e.append(f"sla.priorities.{k}: must be > 0")
        for k, eta in self.sla.tolerances.items():
            if not 0 <= eta <= 1:
                e.append(f"sla.tolerances.{k}: must be in [0, 1]")
        f = self.forecast
        if f.kind not in PREDICTORS:
            e.append(f"forecast.kind: expected one of {PREDICTORS}")
        if f.lookback < 1:
            e.append("forecast.lookback: must be >= 1")
        if f.horizon < 1:
            e.append("forecast.horizon: must be >= 1")
        if f.kind == "external" and not f.external_path:
            e.append("forecast.external_path: required for the external predictor")
        t = self.traffic
        if t.source not in ("synthetic", "csv"):
            e.append("traffic.source: expected 'synthetic' or 'csv'")
        if t.source == "csv" and not t.csv_path:
            e.append("traffic.csv_path: required when traffic.source is 'csv'")
        if t.source == "synthetic":
            if t.days < 1:
                e.append("traffic.days: must be >= 1")
            covered = {entry.get("ru_id") for entry in t.per_ru}
            for rid in sorted(ids - covered):
                e.append(f"traffic.per_ru: no entry for RU {rid}")
            for i, entry in enumerate(t.per_ru):
                try:
                    rt = RuTraffic(**entry)
                except TypeError as exc:
                    e.append(f"traffic.per_ru.{i}: {exc}")
                    continue
                if not rt.base >= rt.amplitude >= 0:
                    e.append(f"traffic.per_ru.{i}: need base >= amplitude >= 0")
                if rt.noise_sd < 0:
                    e.append(f"traffic.per_ru.{i}.noise_sd: must be >= 0")
            if t.start_index + self.episodes > t.days * SAMPLES_PER_DAY:
                e.append("traffic.start_index: episodes run past the end of the synthetic series")
        if t.start_index - f.horizon + 1 < f.lookback:
            e.append(f"traffic.start_index: needs at least {f.lookback} samples of history before the first episode")
        return e


def _mix_errors(name, mix, positive):
    e = []
    if not isinstance(mix, list) or not mix:
        return [f"{name}: must be a non-empty list of [value, probability]"]
    total = 0.0
    for i, item in enumerate(mix):
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            e.append(f"{name}.{i}: expected [value, probability]")
            continue
        value, prob = item
        if positive and not (isinstance(value, (int, float)) and value > 0):
            e.append(f"{name}.{i}: value must be > 0")
        if not isinstance(prob, (int, float)) or prob < 0:
            e.append(f"{name}.{i}: probability must be >= 0")
            continue
        total += prob
    if not e and not math.isclose(total, 1.0, abs_tol=1e-9):
        e.append(f"{name}: probabilities sum to {total}, expected 1")
    return e


def _build(cls, data, prefix, errors):
    if not isinstance(data, dict):
        errors.append(f"{prefix or '<root>'}: expected an object")
        return cls()
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in known:
            errors.append(f"{path}: unknown field")
            continue
        nested = getattr(cls, "NESTED", {}).get(key)
        if nested is not None:
            kwargs[key] = _build(nested, value, path + ".", errors)
            continue
        default = known[key].default
        if isinstance(default, bool) and not isinstance(value, bool):
            errors.append(f"{path}: expected a boolean")
            continue
        if isinstance(default, (int, float)) and not isinstance(default, bool) and value is not None:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                errors.append(f"{path}: expected a number, got {value!r}")
                continue
            if isinstance(default, int) and not isinstance(default, bool) and key != "numerology":
                if isinstance(value, float) and not value.is_integer():
                    errors.append(f"{path}: expected an integer, got {value!r}")
                    continue
                value = int(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        errors.append(f"{prefix or '<root>'}: {exc}")
        return cls()


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``key.path=value`` assignments; values parse as JSON when possible."""
    data = copy.deepcopy(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError([f"--set {item!r}: expected key=value"])
        parts = key.split(".")
        node = data
        for i, part in enumerate(parts[:-1]):
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError):
                    raise ConfigError([f"{'.'.join(parts[:i + 1])}: no such list element"]) from None
            else:
                node = node.setdefault(part, {})
        last = parts[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = _parse_value(raw)
            except (ValueError, IndexError):
                raise ConfigError([f"{key}: no such list element"]) from None
        else:
            node[last] = _parse_value(raw)
    return data


def load_config(path=None, overrides: list[str] | None = None, seed: int | None = None) -> ScenarioConfig:
    """Load a scenario JSON (or the defaults when ``path`` is None) and apply overrides."""
    if path is None:
        data = {}
    else:
        path = Path(path)
        if not path.exists():
            raise ConfigError([f"<file>: {path} does not exist"])
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<file>: {path} is not valid JSON ({exc})"]) from None
    base = ScenarioConfig.from_dict(data).to_dict()
    if overrides:
        base = apply_overrides(base, overrides)
    if seed is not None:
        base["seed"] = seed
    return ScenarioConfig.from_dict(base)


def population_warnings(total_ues: int) -> list[str]:
    lo, hi = TABLE1_UE_RANGE
    if not lo <= total_ues <= hi:
        return [f"{total_ues} active UEs is outside the {lo}-{hi} range of the reference setup"]
    return []
