"""Non-RT RIC logic: turn traffic forecasts and SLA maps into policy profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from oran_dsa.radio import MAX_NUMEROLOGY, GridError, prb_count
from oran_dsa.traffic import (
    ExternalPredictions,
    ForecastConfig,
    TrafficError,
    TrafficSeries,
    forecast,
    parse_timestamp,
    worst_case,
)

FAIRNESS_SCHEMES = ("none", "rr", "pf", "mpf")
COLORING_SCHEMES = ("random", "sequential", "greedy", "welsh-powell", "dsatur")
CLASS_WEIGHTS = {"high": 2.0, "low": 1.0, "standard": 1.0}


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyProfile:
    episode_id: int
    valid_from: str
    priorities: dict[str, float]
    ue_weights: dict[int, float]
    fairness_scheme: str
    tolerances: dict[str, float]
    ue_tolerances: dict[int, float]
    coloring_scheme: str
    numerology: int

    def __post_init__(self):
        for name, w in {**self.priorities, **{str(k): v for k, v in self.ue_weights.items()}}.items():
            if not w > 0:
                raise PolicyError(f"priority weight for {name} must be > 0, got {w}")
        for name, eta in {**self.tolerances, **{str(k): v for k, v in self.ue_tolerances.items()}}.items():
            if not 0.0 <= eta <= 1.0:
                raise PolicyError(f"tolerance for {name} must be in [0, 1], got {eta}")
        if self.fairness_scheme not in FAIRNESS_SCHEMES:
            raise PolicyError(f"unknown fairness scheme {self.fairness_scheme!r}")
        if self.coloring_scheme not in COLORING_SCHEMES:
            raise PolicyError(f"unknown coloring scheme {self.coloring_scheme!r}")
        if not 0 <= self.numerology <= MAX_NUMEROLOGY:
            raise PolicyError(f"numerology must be in 0..{MAX_NUMEROLOGY}")

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "valid_from": self.valid_from,
            "priorities": dict(self.priorities),
            "ue_weights": {str(k): v for k, v in self.ue_weights.items()},
            "fairness_scheme": self.fairness_scheme,
            "tolerances": dict(self.tolerances),
            "ue_tolerances": {str(k): v for k, v in self.ue_tolerances.items()},
            "coloring_scheme": self.coloring_scheme,
            "numerology": self.numerology,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PolicyProfile":
        return cls(
            episode_id=int(d["episode_id"]),
            valid_from=str(d["valid_from"]),
            priorities={str(k): float(v) for k, v in d["priorities"].items()},
            ue_weights={int(k): float(v) for k, v in d["ue_weights"].items()},
            fairness_scheme=d["fairness_scheme"],
            tolerances={str(k): float(v) for k, v in d["tolerances"].items()},
            ue_tolerances={int(k): float(v) for k, v in d["ue_tolerances"].items()},
            coloring_scheme=d["coloring_scheme"],
            numerology=int(d["numerology"]),
        )


def select_numerology(
    worst_load: float, bandwidth_hz: float, guard_band_hz: float, headroom: float = 1.2
) -> int:
    """Largest mu whose PRB count still covers ``headroom * worst_load`` UEs; 0 if none does."""
    if worst_load < 0:
        raise PolicyError("worst-case load must be >= 0")
    if headroom < 1:
        raise PolicyError("headroom must be >= 1")
    needed = math.ceil(headroom * worst_load)
    for mu in range(MAX_NUMEROLOGY, -1, -1):
        try:
            if prb_count(bandwidth_hz, guard_band_hz, mu) >= needed:
                return mu
        except GridError:
            continue
    return 0


@dataclass
class SlaMaps:
    priorities: dict[str, float] = field(default_factory=lambda: dict(CLASS_WEIGHTS))
    tolerances: dict[str, float] = field(default_factory=lambda: {c: 0.0 for c in CLASS_WEIGHTS})


def build_policy_profile(
    forecasts: Mapping[int, float],
    sla: SlaMaps,
    ue_classes: Mapping[int, str],
    fairness_scheme: str = "mpf",
    coloring_scheme: str = "welsh-powell",
    bandwidth_hz: float = 10e6,
    guard_band_hz: float = 0.25e6,
    headroom: float = 1.2,
    episode_id: int = 0,
    valid_from: str = "0",
    numerology: int | None = None,
) -> PolicyProfile:
    """Assemble the five-part policy for one rApp episode.

    ``numerology`` pins the spectrum segmentation (operator override); otherwise
    it follows the worst-case forecast.
    """
    if not forecasts:
        raise PolicyError("no forecasts available")
    mu = numerology
    if mu is None:
        mu = select_numerology(worst_case(forecasts), bandwidth_hz, guard_band_hz, headroom)
    weights, etas = {}, {}
    for ue, cls in sorted(ue_classes.items()):
        if cls not in sla.priorities:
            raise PolicyError(f"UE {ue} references class {cls!r} missing from SLA priorities")
        if cls not in sla.tolerances:
            raise PolicyError(f"UE {ue} references class {cls!r} missing from SLA tolerances")
        weights[ue] = float(sla.priorities[cls])
        etas[ue] = float(sla.tolerances[cls])
    return PolicyProfile(
        episode_id=episode_id,
        valid_from=valid_from,
        priorities=dict(sorted(sla.priorities.items())),
        ue_weights=weights,
        fairness_scheme=fairness_scheme,
        tolerances=dict(sorted(sla.tolerances.items())),
        ue_tolerances=etas,
        coloring_scheme=coloring_scheme,
        numerology=mu,
    )


class RApp:
    """DSA rApp: keeps the O1 measurement history and issues one profile per episode."""

    def __init__(
        self,
        forecast_cfg: ForecastConfig,
        sla: SlaMaps,
        fairness_scheme: str,
        coloring_scheme: str,
        bandwidth_hz: float,
        guard_band_hz: float,
        headroom: float,
        numerology: int | None = None,
        external: ExternalPredictions | None = None,
    ):
        self.forecast_cfg = forecast_cfg
        self.sla = sla
        self.fairness_scheme = fairness_scheme
        self.coloring_scheme = coloring_scheme
        self.bandwidth_hz = bandwidth_hz
        self.guard_band_hz = guard_band_hz
        self.headroom = headroom
        self.numerology = numerology
        self.external = external
        self.history: dict[int, TrafficSeries] = {}

    def ingest(self, window: Sequence[tuple[int, int, float]]) -> None:
        """Replace the KPM history with an O1 window of (timestamp, ru_id, load) rows."""
        by_ru: dict[int, list[tuple[int, float]]] = {}
        for ts, ru, load in window:
            by_ru.setdefault(ru, []).append((parse_timestamp(ts), load))
        self.history = {
            ru: TrafficSeries(ru, tuple(t for t, _ in rows), tuple(v for _, v in rows))
            for ru, rows in sorted(by_ru.items())
        }

    def predict(self) -> dict[int, float]:
        """Forecast every RU one horizon past the end of its history."""
        if not self.history:
            raise TrafficError("no O1 history ingested")
        return {
            ru: forecast(s, self.forecast_cfg, len(s) - 1, self.external)
            for ru, s in self.history.items()
        }

    def issue(self, episode_id: int, valid_from: str, ue_classes: Mapping[int, str]):
        predictions = self.predict()
        profile = build_policy_profile(
            predictions,
            self.sla,
            ue_classes,
            fairness_scheme=self.fairness_scheme,
            coloring_scheme=self.coloring_scheme,
            bandwidth_hz=self.bandwidth_hz,
            guard_band_hz=self.guard_band_hz,
            headroom=self.headroom,
            episode_id=episode_id,
            valid_from=valid_from,
            numerology=self.numerology,
        )
        return profile, predictions
