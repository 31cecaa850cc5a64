"""Nested closed loop: rApp episodes outside, xApp slots inside.

The orchestrator plays the O-DU/O-RU side (mobility, channel, realized
rates) and hosts the rApp. The xApp sits behind a transport, so the same
code runs in one process (loopback) or against a separate xApp process.
"""

from __future__ import annotations

import logging
import subprocess
import sys
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from oran_dsa import metrics, mobility
from oran_dsa.control_plane import (
    A1Policy,
    E2Control,
    E2Report,
    E2Setup,
    ErrorNotice,
    LoopbackTransport,
    O1Report,
    TcpTransport,
    TransportError,
    UeReport,
    decode,
    encode,
)
from oran_dsa.rapp import RApp, SlaMaps
from oran_dsa.radio import (
    Assignment,
    SpectrumGrid,
    build_links,
    is_satisfied,
    noise_power,
    power_budget_ok,
    realized_rates,
)
from oran_dsa.scenario import ScenarioConfig, population_warnings
from oran_dsa.streams import FADING, MOBILITY, POPULATION, TRAFFIC, stream
from oran_dsa.traffic import (
    SAMPLES_PER_DAY,
    ExternalPredictions,
    ForecastConfig,
    TrafficError,
    TrafficSeries,
    ingest_csv,
    load_to_population,
    minmax_normalize,
    mse,
    synth_diurnal,
)
from oran_dsa.xapp import XApp

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UeSlot:
    ue: int
    ru: int
    prb: int | None
    rate_bps: float
    demand_bps: float
    satisfied: bool
    preempted: bool


@dataclass
class SlotRecord:
    episode: int
    slot: int
    numerology: int
    ues: list[UeSlot]
    colored: int
    uncolored: int
    preemptions: int


@dataclass
class RunSummary:
    success_rate: float
    jfi: float
    shares: dict[int, float]
    mu_trace: list[int]
    forecast_mse: float | None
    ue_counts: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "success_rate_pct": self.success_rate,
            "jfi_pct": self.jfi,
            "service_shares": {str(k): v for k, v in self.shares.items()},
            "mu_trace": list(self.mu_trace),
            "forecast_mse": self.forecast_mse,
            "ue_counts": list(self.ue_counts),
            "warnings": list(self.warnings),
        }


def build_traffic(cfg: ScenarioConfig) -> dict[int, TrafficSeries]:
    ru_ids = [r["id"] for r in cfg.rus]
    t = cfg.traffic
    if t.source == "csv":
        series = ingest_csv(t.csv_path, known_rus=ru_ids)
        missing = sorted(set(ru_ids) - set(series))
        if missing:
            raise TrafficError(f"{t.csv_path}: no samples for RU(s) {missing}")
        lengths = {len(s) for s in series.values()}
        starts = {s.timestamps[0] for s in series.values()}
        if len(lengths) != 1 or len(starts) != 1:
            raise TrafficError(f"{t.csv_path}: per-RU series must share the same timestamps")
        if t.start_index + cfg.episodes > lengths.pop():
            raise TrafficError("traffic.start_index: episodes run past the end of the CSV series")
        return series
    out = {}
    for entry in sorted(t.per_ru, key=lambda e: e["ru_id"]):
        rid = entry["ru_id"]
        out[rid] = synth_diurnal(
            t.days, entry["base"], entry["amplitude"], entry.get("noise_sd", 0.0),
            stream(cfg.seed, TRAFFIC, rid), ru_id=rid,
        )
    return out


def _wire_timestamp(ts):
    return ts.isoformat() if isinstance(ts, datetime) else ts


class XAppProcess:
    """An xApp in a child Python process listening on an ephemeral localhost port."""

    def __init__(self):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "oran_dsa", "xapp", "--listen", "127.0.0.1:0"],
            stdout=subprocess.PIPE,
            text=True,
        )
        line = self.proc.stdout.readline().strip()
        if not line.startswith("LISTENING "):
            self.proc.kill()
            raise TransportError(f"xApp process failed to start (got {line!r})")
        self.endpoint = line.split(" ", 1)[1]

    def close(self):
        self.proc.terminate()
        try:
            self.proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.proc.kill()
        self.proc.stdout.close()


def open_transport(mode: str = "loopback"):
    """``loopback``, ``subprocess`` (spawn a local xApp process) or a ``host:port`` endpoint."""
    if mode == "loopback":
        return LoopbackTransport(XApp()), None
    if mode != "subprocess":
        return TcpTransport.connect(mode), None
    child = XAppProcess()
    try:
        return TcpTransport.connect(child.endpoint), child
    except TransportError:
        child.close()
        raise


def _request(transport, msg) -> E2Control:
    transport.send(encode(msg))
    reply = decode(transport.recv())
    if isinstance(reply, ErrorNotice):
        raise TransportError(f"xApp rejected {msg.TYPE}: {reply.reason}")
    if not isinstance(reply, E2Control):
        raise TransportError(f"expected e2_control, got {reply.TYPE}")
    return reply


def run_scenario(cfg: ScenarioConfig, transport: str = "loopback") -> tuple[RunSummary, list[SlotRecord]]:
    """Run every episode and slot of ``cfg``.

    ``transport`` picks where the xApp runs (see ``open_transport``); the
    results do not depend on it.
    """
    rus = cfg.ru_configs
    ru_by_id = {r.id: r for r in rus}
    series = build_traffic(cfg)
    start = cfg.traffic.start_index
    fc = ForecastConfig(cfg.forecast.lookback, cfg.forecast.horizon, cfg.forecast.kind)
    external = (
        ExternalPredictions.from_csv(cfg.forecast.external_path)
        if cfg.forecast.kind == "external"
        else None
    )
    rapp = RApp(
        fc,
        SlaMaps(dict(cfg.sla.priorities), dict(cfg.sla.tolerances)),
        cfg.fairness_scheme,
        cfg.coloring_scheme,
        cfg.bandwidth_hz,
        cfg.guard_band_hz,
        cfg.headroom,
        numerology=cfg.numerology,
        external=external,
    )

    link, child = open_transport(transport)
    records: list[SlotRecord] = []
    mu_trace: list[int] = []
    ue_counts: list[int] = []
    warnings: list[str] = []
    predicted, actual = [], []
    next_ue = 0
    try:
        link.send(
            encode(E2Setup(rus, cfg.bandwidth_hz, cfg.guard_band_hz, cfg.noise_psd_dbm_hz, cfg.ewma_alpha, cfg.seed))
        )
        for e in range(cfg.episodes):
            t = start + e
            # O1: the rApp sees history up to one forecast horizon before the episode
            last = t - fc.horizon
            first = max(0, last + 1 - max(fc.lookback, SAMPLES_PER_DAY))
            o1 = O1Report(
                [
                    (_wire_timestamp(s.timestamps[i]), rid, s.loads[i])
                    for rid, s in series.items()
                    for i in range(first, last + 1)
                ]
            )
            rapp.ingest(decode(encode(o1)).samples)

            # repopulate from the realized load of this episode's sample
            ues, states = [], {}
            for rid in sorted(series):
                ru = ru_by_id[rid]
                prng = stream(cfg.seed, POPULATION, e, rid)
                for d in load_to_population(series[rid].loads[t], cfg.demand_mix, prng, ru, cfg.class_mix):
                    uid = next_ue
                    next_ue += 1
                    ues.append((uid, d))
                    heading = float(prng.uniform(-np.pi, np.pi))
                    states[uid] = mobility.MobilityState(d.position[0], d.position[1], heading, cfg.speed_mps)
            ue_counts.append(len(ues))
            for w in population_warnings(len(ues)):
                msg = f"episode {e}: {w}"
                log.warning(msg)
                warnings.append(msg)

            profile, preds = rapp.issue(
                e, str(_wire_timestamp(series[sorted(series)[0]].timestamp_at(t))),
                {uid: d.ue_class for uid, d in ues},
            )
            for rid, p in preds.items():
                train = series[rid].values[:start]
                lo, hi = float(train.min()), float(train.max())
                predicted.append(float(minmax_normalize([p], lo, hi)[0]))
                actual.append(float(minmax_normalize([series[rid].loads[t]], lo, hi)[0]))
            link.send(encode(A1Policy(e, profile)))
            mu_trace.append(profile.numerology)

            grid = SpectrumGrid(cfg.bandwidth_hz, cfg.guard_band_hz, profile.numerology)
            noise_w = noise_power(cfg.noise_psd_dbm_hz, grid.prb_bandwidth_hz)
            ids = [uid for uid, _ in ues]
            serving = {uid: d.ru_id for uid, d in ues}
            demand = {uid: d.demand_bps for uid, d in ues}
            feedback: list[tuple[int, float]] = []

            for s in range(cfg.slots_per_episode):
                mrng = stream(cfg.seed, MOBILITY, e, s)
                for uid in ids:
                    states[uid] = mobility.step(
                        states[uid], cfg.slot_s, cfg.max_turn_rad, mrng, ru_by_id[serving[uid]]
                    )
                pos = np.array([states[uid].position for uid in ids], dtype=float).reshape(len(ids), 2)
                links = build_links(ids, pos, rus, grid.prb_count, stream(cfg.seed, FADING, e, s))
                report = E2Report(
                    e,
                    s,
                    [UeReport(uid, serving[uid], states[uid].position, demand[uid]) for uid in ids],
                    links.pathloss.tolist(),
                    links.fading.tolist(),
                    feedback,
                )
                ctrl = _request(link, report)
                if (ctrl.episode_id, ctrl.slot_id) != (e, s):
                    raise TransportError(f"e2_control for ({ctrl.episode_id}, {ctrl.slot_id}) while in ({e}, {s})")
                unknown = set(ctrl.assignment) - set(ids)
                if unknown:
                    raise TransportError(f"e2_control assigns unknown UE(s) {sorted(unknown)}")
                assignment = Assignment(dict(serving), dict(ctrl.assignment))
                assignment.occupancy()
                if not power_budget_ok(assignment, rus):
                    raise TransportError("e2_control exceeds an RU power budget")
                rates = realized_rates(assignment, links, grid, noise_w)
                eta = profile.ue_tolerances
                preempted = set(ctrl.preempted)
                records.append(
                    SlotRecord(
                        e,
                        s,
                        profile.numerology,
                        [
                            UeSlot(
                                uid,
                                serving[uid],
                                assignment.prb.get(uid),
                                rates[uid],
                                demand[uid],
                                uid in assignment.prb and is_satisfied(rates[uid], demand[uid], eta.get(uid, 0.0)),
                                uid in preempted,
                            )
                            for uid in ids
                        ],
                        ctrl.colored,
                        ctrl.uncolored,
                        len(ctrl.preempted),
                    )
                )
                feedback = [(uid, rates[uid]) for uid in ids]
    finally:
        link.close()
        if child is not None:
            child.close()

    shares = metrics.service_shares(records)
    summary = RunSummary(
        success_rate=metrics.success_rate(records),
        jfi=metrics.jain_fairness(shares) if shares else 100.0,
        shares=shares,
        mu_trace=mu_trace,
        forecast_mse=mse(predicted, actual) if predicted else None,
        ue_counts=ue_counts,
        warnings=warnings,
    )
    return summary, records
