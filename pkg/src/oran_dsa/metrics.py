"""Run-level metrics: slot-averaged success rate and Jain's index over service shares."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence


def success_rate(records: Iterable) -> float:
    """Mean over slots of the satisfied fraction, in percent; empty slots are skipped."""
    fractions = []
    for rec in records:
        if rec.ues:
            fractions.append(sum(u.satisfied for u in rec.ues) / len(rec.ues))
    if not fractions:
        return 100.0
    return 100.0 * sum(fractions) / len(fractions)


def service_shares(records: Iterable) -> dict[int, float]:
    """Per-UE fraction of its active slots in which it was satisfied."""
    active: dict[int, int] = {}
    satisfied: dict[int, int] = {}
    for rec in records:
        for u in rec.ues:
            active[u.ue] = active.get(u.ue, 0) + 1
            satisfied[u.ue] = satisfied.get(u.ue, 0) + int(u.satisfied)
    return {ue: satisfied[ue] / active[ue] for ue in sorted(active)}


def service_share(records: Sequence, ue: int) -> float:
    shares = service_shares(records)
    if ue not in shares:
        raise KeyError(f"UE {ue} never appears in the records")
    return shares[ue]


def jain_fairness(shares: Mapping[int, float] | Sequence[float]) -> float:
    values = list(shares.values()) if isinstance(shares, Mapping) else list(shares)
    if not values:
        raise ValueError("Jain's index needs at least one UE")
    if any(v < 0 for v in values):
        raise ValueError("shares must be non-negative")
    total = sum(values)
    squares = sum(v * v for v in values)
    if squares == 0:
        return 100.0
    return 100.0 * total * total / (len(values) * squares)
