"""Per-RU traffic series: CSV ingestion, synthetic diurnal load, forecasting.

Loads are expressed in UE-count units at a 15-minute cadence (96 samples per
day). Timestamps are either integer sample indices or ISO-8601 datetimes; a
series never mixes the two.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from oran_dsa.mobility import uniform_in_disc

SAMPLES_PER_DAY = 96
SAMPLE_PERIOD = timedelta(minutes=15)

Timestamp = Union[int, datetime]


class TrafficError(ValueError):
    pass


@dataclass(frozen=True)
class TrafficSeries:
    ru_id: int
    timestamps: tuple[Timestamp, ...]
    loads: tuple[float, ...]

    def __post_init__(self):
        if len(self.timestamps) != len(self.loads):
            raise TrafficError("timestamps and loads differ in length")
        if not self.loads:
            raise TrafficError(f"RU {self.ru_id}: no samples")
        if any(v < 0 or not math.isfinite(v) for v in self.loads):
            raise TrafficError(f"RU {self.ru_id}: loads must be finite and >= 0")
        _check_spacing(self.timestamps, f"RU {self.ru_id}")

    def __len__(self):
        return len(self.loads)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.loads, dtype=float)

    def timestamp_at(self, index: int) -> Timestamp:
        """Timestamp of sample ``index``, extrapolating past the end."""
        first = self.timestamps[0]
        if isinstance(first, datetime):
            return first + index * SAMPLE_PERIOD
        return first + index


def _check_spacing(timestamps: Sequence[Timestamp], where: str) -> None:
    kinds = {isinstance(t, datetime) for t in timestamps}
    if len(kinds) > 1:
        raise TrafficError(f"{where}: mixed ISO-8601 and integer timestamps")
    step = SAMPLE_PERIOD if kinds == {True} else 1
    for prev, cur in zip(timestamps, timestamps[1:]):
        if cur - prev != step:
            raise TrafficError(
                f"{where}: expected uniform 15-minute spacing, got {prev!s} -> {cur!s}"
            )


def parse_timestamp(text) -> Timestamp:
    if isinstance(text, (int, datetime)):
        return text
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return datetime.fromisoformat(text)


def ingest_csv(path, known_rus: Iterable[int] | None = None) -> dict[int, TrafficSeries]:
    """Read ``timestamp,ru_id,load`` rows into one validated series per RU."""
    path = Path(path)
    known = set(known_rus) if known_rus is not None else None
    rows: dict[int, list[tuple[Timestamp, float]]] = {}
    seen_kinds: set[bool] = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TrafficError(f"{path}: no samples")
        if [h.strip() for h in header] != ["timestamp", "ru_id", "load"]:
            raise TrafficError(f"{path}:1: header must be 'timestamp,ru_id,load'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise TrafficError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[0])
                ru = int(row[1])
                load = float(row[2])
            except ValueError as exc:
                raise TrafficError(f"{path}:{lineno}: {exc}") from None
            if known is not None and ru not in known:
                raise TrafficError(f"{path}:{lineno}: unknown ru_id {ru}")
            if load < 0 or not math.isfinite(load):
                raise TrafficError(f"{path}:{lineno}: load must be finite and >= 0")
            seen_kinds.add(isinstance(ts, datetime))
            if len(seen_kinds) > 1:
                raise TrafficError(f"{path}:{lineno}: mixed ISO-8601 and integer timestamps")
            rows.setdefault(ru, []).append((ts, load))
    if not rows:
        raise TrafficError(f"{path}: no samples")
    series = {}
    for ru, samples in sorted(rows.items()):
        ts, loads = zip(*samples)
        try:
            series[ru] = TrafficSeries(ru, tuple(ts), tuple(loads))
        except TrafficError as exc:
            raise TrafficError(f"{path}: {exc}") from None
    return series


def synth_diurnal(
    days: int,
    base: float,
    amplitude: float,
    noise_sd: float,
    rng: np.random.Generator,
    ru_id: int = 0,
) -> TrafficSeries:
    """Sinusoidal daily profile with its trough at midnight and its peak at noon."""
    if days < 1:
        raise TrafficError("days must be >= 1")
    if not base >= amplitude >= 0:
        raise TrafficError("need base >= amplitude >= 0")
    n = days * SAMPLES_PER_DAY
    slot = np.arange(n) % SAMPLES_PER_DAY  # exact periodicity across days
    clean = base + amplitude * np.sin(2.0 * np.pi * slot / SAMPLES_PER_DAY - np.pi / 2.0)
    noise = rng.normal(0.0, noise_sd, n) if noise_sd > 0 else np.zeros(n)
    loads = np.maximum(0.0, clean + noise)
    return TrafficSeries(ru_id, tuple(range(n)), tuple(float(v) for v in loads))


PREDICTORS = ("seasonal-naive", "moving-average", "external")


@dataclass(frozen=True)
class ForecastConfig:
    lookback: int = 48
    horizon: int = 1
    kind: str = "seasonal-naive"

    def __post_init__(self):
        if self.lookback < 1:
            raise TrafficError("lookback must be >= 1")
        if self.horizon < 1:
            raise TrafficError("horizon must be >= 1")
        if self.kind not in PREDICTORS:
            raise TrafficError(f"unknown predictor {self.kind!r}; expected one of {PREDICTORS}")


class ExternalPredictions:
    """Predicted loads read from a ``timestamp,ru_id,predicted_load`` CSV."""

    def __init__(self, table: Mapping[tuple[Timestamp, int], float]):
        self.table = dict(table)

    @classmethod
    def from_csv(cls, path) -> "ExternalPredictions":
        table = {}
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["timestamp", "ru_id", "predicted_load"]:
                raise TrafficError(f"{path}:1: header must be 'timestamp,ru_id,predicted_load'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    table[(parse_timestamp(row[0]), int(row[1]))] = float(row[2])
                except (ValueError, IndexError) as exc:
                    raise TrafficError(f"{path}:{lineno}: {exc}") from None
        return cls(table)

    def lookup(self, timestamp: Timestamp, ru_id: int) -> float:
        try:
            return self.table[(timestamp, ru_id)]
        except KeyError:
            raise TrafficError(f"no external prediction for RU {ru_id} at {timestamp}") from None


def forecast(
    series: TrafficSeries,
    cfg: ForecastConfig,
    t: int,
    external: ExternalPredictions | None = None,
) -> float:
    """Predict the load at index ``t + horizon`` from samples ``0..t``."""
    if t + 1 < cfg.lookback:
        raise TrafficError(
            f"RU {series.ru_id}: insufficient history at t={t} for lookback {cfg.lookback}"
        )
    if t >= len(series):
        raise TrafficError(f"RU {series.ru_id}: t={t} is past the end of the series")
    target = t + cfg.horizon
    values = series.loads
    if cfg.kind == "seasonal-naive":
        back = target - SAMPLES_PER_DAY
        return float(values[back]) if 0 <= back <= t else float(values[t])
    if cfg.kind == "moving-average":
        window = values[t - cfg.lookback + 1 : t + 1]
        return float(sum(window) / len(window))
    if external is None:
        raise TrafficError("external predictor selected but no prediction file loaded")
    return external.lookup(series.timestamp_at(target), series.ru_id)


def worst_case(predictions: Mapping[int, float]) -> float:
    if not predictions:
        raise TrafficError("no RU predictions")
    return max(predictions.values())


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class UeDescriptor:
    ru_id: int
    demand_bps: float
    ue_class: str
    position: tuple[float, float]


def load_to_population(
    load: float,
    demand_mix: Sequence[tuple[float, float]],
    rng: np.random.Generator,
    ru=None,
    class_mix: Sequence[tuple[str, float]] = (("standard", 1.0),),
) -> list[UeDescriptor]:
    """Spawn ``round(load)`` UEs with demands (and SLA classes) drawn from the mixes.

    Positions are uniform over ``ru``'s disc when an RU is given.
    """
    if load < 0:
        raise TrafficError("load must be >= 0")
    demands, dprobs = _mix(demand_mix, "demand_mix")
    classes, cprobs = _mix(class_mix, "class_mix")
    ues = []
    for _ in range(round_half_up(load)):
        d = float(demands[rng.choice(len(demands), p=dprobs)]) if len(demands) > 1 else float(demands[0])
        c = classes[rng.choice(len(classes), p=cprobs)] if len(classes) > 1 else classes[0]
        pos = uniform_in_disc(ru, rng) if ru is not None else (0.0, 0.0)
        ues.append(UeDescriptor(ru.id if ru is not None else 0, d, c, pos))
    return ues


def _mix(mix, name):
    if not mix:
        raise TrafficError(f"{name} is empty")
    values = [v for v, _ in mix]
    probs = np.array([p for _, p in mix], dtype=float)
    if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
        raise TrafficError(f"{name}: probabilities must be >= 0 and sum to 1")
    return values, probs / probs.sum()


def minmax_normalize(values, lo: float, hi: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    span = hi - lo
    if span <= 0:
        return np.zeros_like(values)
    return (values - lo) / span


def mse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape:
        raise TrafficError(f"length mismatch: {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise TrafficError("empty series")
    return float(np.mean((predicted - actual) ** 2))
