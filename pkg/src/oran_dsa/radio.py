"""Closed-form downlink physical layer.

PRB grid arithmetic, distance-based path loss with Rayleigh fading, SINR
under a realized PRB assignment and Shannon rates. All bandwidths are in Hz,
powers in watts and gains are linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

SUBCARRIERS_PER_PRB = 12
BASE_SCS_HZ = 15_000.0
PRB_BLOCK_HZ = SUBCARRIERS_PER_PRB * BASE_SCS_HZ  # 180 kHz at mu = 0
MAX_NUMEROLOGY = 4
MIN_DISTANCE_M = 1.0


class GridError(ValueError):
    """Raised when a bandwidth/numerology combination yields no usable PRB."""


def prb_bandwidth(numerology: int) -> float:
    """PRB width in Hz: 12 subcarriers of 15 kHz * 2**mu."""
    if not 0 <= numerology <= MAX_NUMEROLOGY:
        raise GridError(f"numerology must be in 0..{MAX_NUMEROLOGY}, got {numerology}")
    return PRB_BLOCK_HZ * 2**numerology


def prb_count(bandwidth_hz: float, guard_band_hz: float, numerology: int) -> int:
    """Number of PRBs that fit in the usable band ``B - 2*B_G``."""
    usable = bandwidth_hz - 2.0 * guard_band_hz
    if usable <= 0:
        raise GridError(f"non-positive usable bandwidth: {usable} Hz")
    count = int(usable // prb_bandwidth(numerology))
    if count < 1:
        raise GridError(
            f"no PRB fits in {usable} Hz at numerology {numerology}"
        )
    return count


@dataclass(frozen=True)
class SpectrumGrid:
    bandwidth_hz: float
    guard_band_hz: float
    numerology: int
    prb_count: int = field(init=False)
    prb_bandwidth_hz: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "prb_count", prb_count(self.bandwidth_hz, self.guard_band_hz, self.numerology)
        )
        object.__setattr__(self, "prb_bandwidth_hz", prb_bandwidth(self.numerology))

    @property
    def prbs(self) -> range:
        """PRB ids, 1-based."""
        return range(1, self.prb_count + 1)


@dataclass(frozen=True)
class RuConfig:
    id: int
    kind: str  # "macro" | "micro"
    position: tuple[float, float]
    radius_m: float
    prb_power_w: float
    max_power_w: float
    min_power_w: float
    pathloss_constant: float = 1.0
    pathloss_exponent: float = 2.7

    def validation_errors(self, max_prbs: int | None = None) -> list[str]:
        errors = []
        if self.kind not in ("macro", "micro"):
            errors.append(f"kind: expected 'macro' or 'micro', got {self.kind!r}")
        if self.radius_m <= 0:
            errors.append("radius_m: must be > 0")
        if self.pathloss_exponent <= 0:
            errors.append("pathloss_exponent: must be > 0")
        if self.pathloss_constant <= 0:
            errors.append("pathloss_constant: must be > 0")
        if self.prb_power_w < self.min_power_w:
            errors.append(
                f"prb_power_w: {self.prb_power_w} W is below min_power_w {self.min_power_w} W"
            )
        if max_prbs is not None and max_prbs * self.prb_power_w > self.max_power_w:
            errors.append(
                f"max_power_w: {max_prbs} PRBs x {self.prb_power_w} W exceeds {self.max_power_w} W"
            )
        return errors


def path_loss(constant: float, exponent: float, distance_m: float | np.ndarray):
    """Large-scale gain ``K * D**-alpha`` with D clamped to 1 m."""
    d = np.maximum(distance_m, MIN_DISTANCE_M)
    out = constant * d ** (-exponent)
    return float(out) if np.ndim(out) == 0 else out


def sample_fading(rng: np.random.Generator, size=None):
    """Rayleigh amplitude fading expressed as a unit-mean exponential power gain."""
    return rng.exponential(1.0, size=size)


def noise_power(psd_dbm_per_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise in watts over ``bandwidth_hz``."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return 10.0 ** ((psd_dbm_per_hz + 10.0 * math.log10(bandwidth_hz) - 30.0) / 10.0)


def per_prb_rate(bandwidth_hz, sinr):
    """Shannon rate of one PRB in bit/s."""
    return bandwidth_hz * np.log2(1.0 + sinr)


def is_satisfied(rate: float, demand: float, tolerance: float) -> bool:
    return rate >= (1.0 - tolerance) * demand


@dataclass(frozen=True)
class LinkState:
    ru_id: int
    ue_id: int
    distance_m: float
    pathloss: float
    fading: tuple[float, ...]

    def gain(self, prb: int) -> float:
        return self.pathloss * self.fading[prb - 1]


@dataclass
class LinkSet:
    """Channel state of every (UE, RU, PRB) triple for one slot.

    ``fading`` has shape (U, R, P). With ``fading=None`` the expected gain
    (unit fading) is used everywhere.
    """

    ue_ids: tuple[int, ...]
    rus: tuple[RuConfig, ...]
    distance: np.ndarray  # (U, R), already clamped
    pathloss: np.ndarray  # (U, R)
    fading: np.ndarray  # (U, R, P)

    def __post_init__(self):
        self.ue_index = {u: i for i, u in enumerate(self.ue_ids)}
        self.ru_index = {r.id: i for i, r in enumerate(self.rus)}
        self.ru_power = np.array([r.prb_power_w for r in self.rus], dtype=float)

    @property
    def gains(self) -> np.ndarray:
        return self.pathloss[:, :, None] * self.fading

    def link(self, ue: int, ru: int) -> LinkState:
        i, k = self.ue_index[ue], self.ru_index[ru]
        return LinkState(
            ru_id=ru,
            ue_id=ue,
            distance_m=float(self.distance[i, k]),
            pathloss=float(self.pathloss[i, k]),
            fading=tuple(float(h) for h in self.fading[i, k]),
        )

    def expected(self) -> "LinkSet":
        return LinkSet(self.ue_ids, self.rus, self.distance, self.pathloss, np.ones_like(self.fading))


def build_links(
    ue_ids: Sequence[int],
    positions: np.ndarray,
    rus: Sequence[RuConfig],
    n_prbs: int,
    rng: np.random.Generator | None = None,
) -> LinkSet:
    positions = np.asarray(positions, dtype=float).reshape(len(ue_ids), 2)
    centers = np.array([r.position for r in rus], dtype=float).reshape(len(rus), 2)
    diff = positions[:, None, :] - centers[None, :, :]
    distance = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), MIN_DISTANCE_M)
    k = np.array([r.pathloss_constant for r in rus])
    alpha = np.array([r.pathloss_exponent for r in rus])
    pl = k[None, :] * distance ** (-alpha[None, :])
    shape = (len(ue_ids), len(rus), n_prbs)
    fading = sample_fading(rng, shape) if rng is not None else np.ones(shape)
    return LinkSet(tuple(ue_ids), tuple(rus), distance, pl, fading)


@dataclass
class Assignment:
    """Partial UE -> PRB map; ``serving`` gives each UE's RU."""

    serving: dict[int, int]
    prb: dict[int, int] = field(default_factory=dict)

    def occupancy(self) -> dict[tuple[int, int], int]:
        """(ru, prb) -> ue. Raises if an RU reuses a PRB."""
        occ: dict[tuple[int, int], int] = {}
        for ue, p in self.prb.items():
            key = (self.serving[ue], p)
            if key in occ:
                raise ValueError(f"RU {key[0]} assigns PRB {p} to both UE {occ[key]} and UE {ue}")
            occ[key] = ue
        return occ

    def active_rus(self, prb: int) -> set[int]:
        return {self.serving[u] for u, p in self.prb.items() if p == prb}

    def holders(self, prb: int) -> list[int]:
        return sorted(u for u, p in self.prb.items() if p == prb)

    def copy(self) -> "Assignment":
        return Assignment(dict(self.serving), dict(self.prb))


def sinr(ue: int, prb: int, ru: int, assignment: Assignment, links: LinkSet, noise_w: float) -> float:
    """SINR of ``ue`` on ``prb`` from ``ru``; 0 when that triple is not assigned."""
    if assignment.prb.get(ue) != prb or assignment.serving.get(ue) != ru:
        return 0.0
    i = links.ue_index[ue]
    r = links.ru_index[ru]
    g = links.gains[i, :, prb - 1]
    signal = links.ru_power[r] * g[r]
    interference = sum(
        links.ru_power[links.ru_index[k]] * g[links.ru_index[k]]
        for k in assignment.active_rus(prb)
        if k != ru
    )
    return float(signal / (interference + noise_w))


def ue_total_rate(ue: int, assignment: Assignment, links: LinkSet, grid: SpectrumGrid, noise_w: float) -> float:
    ru = assignment.serving[ue]
    return float(
        sum(
            per_prb_rate(grid.prb_bandwidth_hz, sinr(ue, p, ru, assignment, links, noise_w))
            for p in grid.prbs
        )
    )


def activity_matrix(assignment: Assignment, links: LinkSet, n_prbs: int) -> np.ndarray:
    """Boolean (R, P) matrix: RU r transmits on PRB p in ``assignment``."""
    active = np.zeros((len(links.rus), n_prbs), dtype=bool)
    for ue, p in assignment.prb.items():
        active[links.ru_index[assignment.serving[ue]], p - 1] = True
    return active


def candidate_rates(
    links: LinkSet,
    serving: Mapping[int, int],
    active: np.ndarray,
    grid: SpectrumGrid,
    noise_w: float,
) -> np.ndarray:
    """(U, P) rate each UE would get on each PRB given RU activity ``active``.

    The UE's own RU is excluded from the interferer set.
    """
    gains = links.gains
    power = links.ru_power[None, :, None] * gains  # (U, R, P)
    own = np.array([links.ru_index[serving[u]] for u in links.ue_ids], dtype=int)
    idx = np.arange(len(links.ue_ids))
    signal = power[idx, own, :]
    mask = np.broadcast_to(active[None, :, :], power.shape).copy()
    mask[idx, own, :] = False
    interference = (power * mask).sum(axis=1)
    return per_prb_rate(grid.prb_bandwidth_hz, signal / (interference + noise_w))


def realized_rates(
    assignment: Assignment, links: LinkSet, grid: SpectrumGrid, noise_w: float
) -> dict[int, float]:
    """Per-UE achieved rate under full co-channel interference; 0 if unscheduled."""
    active = activity_matrix(assignment, links, grid.prb_count)
    table = candidate_rates(links, assignment.serving, active, grid, noise_w)
    rates = {}
    for ue in links.ue_ids:
        p = assignment.prb.get(ue)
        rates[ue] = 0.0 if p is None else float(table[links.ue_index[ue], p - 1])
    return rates


def power_budget_ok(assignment: Assignment, rus: Iterable[RuConfig]) -> bool:
    used: dict[int, int] = {}
    for ue in assignment.prb:
        r = assignment.serving[ue]
        used[r] = used.get(r, 0) + 1
    return all(used.get(r.id, 0) * r.prb_power_w <= r.max_power_w for r in rus)
