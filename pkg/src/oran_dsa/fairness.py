"""Post-coloring scheduling: MPF time-sharing and the none/RR/PF baselines.

Each scheme starts from the coloring. Uncolored UEs are visited in ascending
id order; a UE may take a PRB only by displacing every occupant it conflicts
with, so the result stays proper with respect to the conflict graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from oran_dsa.coloring import Coloring, verify_coloring
from oran_dsa.graph import ConflictGraph
from oran_dsa.radio import Assignment

EWMA_FLOOR = 1.0  # bit/s
SCHEMES = ("none", "rr", "pf", "mpf")

Rates = Mapping[int, Sequence[float]]  # ue -> rate on PRB p at index p - 1


def mpf_metric(rate: float, ewma: float, weight: float = 1.0) -> float:
    if ewma <= 0:
        raise ValueError("EWMA throughput must be positive")
    return rate / ewma * weight


def update_ewma(prev: float, achieved: float, alpha: float) -> float:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    return (1.0 - alpha) * prev + alpha * achieved


@dataclass
class FairnessState:
    alpha: float = 0.1
    ewma: dict[int, float] = field(default_factory=dict)
    last_served: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")

    def admit(self, ue: int, demand: float) -> None:
        """Start tracking ``ue``; its EWMA begins at its demand."""
        if ue not in self.ewma:
            self.ewma[ue] = max(demand, EWMA_FLOOR)
            self.last_served[ue] = -1

    def update(self, achieved: Mapping[int, float]) -> None:
        for ue, rate in achieved.items():
            self.ewma[ue] = max(update_ewma(self.ewma[ue], rate, self.alpha), EWMA_FLOOR)

    def mark_served(self, assignment: Assignment, slot: int) -> None:
        for ue in assignment.prb:
            self.last_served[ue] = slot

    def reset(self) -> None:
        self.ewma.clear()
        self.last_served.clear()


@dataclass
class Schedule:
    assignment: Assignment
    preempted: list[int] = field(default_factory=list)


def _check(colored: Coloring, g: ConflictGraph) -> None:
    if not verify_coloring(g, colored):
        raise ValueError("input coloring is not proper for the conflict graph")


def _conflicting_holders(g, assignment, u, p):
    return [v for v in assignment.holders(p) if g.has_edge(u, v)]


def _contend(
    colored: Coloring,
    g: ConflictGraph,
    serving: Mapping[int, int],
    n_prbs: int,
    choose: Callable[[int, Assignment], int],
    beats: Callable[[int, int, int, int], bool],
) -> Schedule:
    out = Schedule(Assignment(dict(serving), dict(colored.colors)))
    a = out.assignment
    for u in sorted(colored.uncolored):
        p = choose(u, a)
        occupants = _conflicting_holders(g, a, u, p)
        if all(beats(u, p, v, a.prb[v]) for v in occupants):
            for v in occupants:
                del a.prb[v]
                out.preempted.append(v)
            a.prb[u] = p
    return out


def _argmax_prb(score: Callable[[int], float], n_prbs: int) -> int:
    best, best_p = None, 1
    for p in range(1, n_prbs + 1):
        s = score(p)
        if best is None or s > best:
            best, best_p = s, p
    return best_p


def mpf_schedule(
    colored: Coloring,
    g: ConflictGraph,
    state: FairnessState,
    rates: Rates,
    weights: Mapping[int, float],
    serving: Mapping[int, int],
    n_prbs: int,
) -> Schedule:
    """Conflict-aware modified PF.

    An uncolored UE targets the PRB maximizing its weighted rate/EWMA metric
    and takes it only if that metric strictly beats every conflicting
    occupant's metric on the occupant's own PRB.
    """
    _check(colored, g)

    def metric(u, p):
        return mpf_metric(rates[u][p - 1], state.ewma[u], weights.get(u, 1.0))

    return _contend(
        colored,
        g,
        serving,
        n_prbs,
        choose=lambda u, a: _argmax_prb(lambda p: metric(u, p), n_prbs),
        beats=lambda u, p, v, pv: metric(u, p) > metric(v, pv),
    )


def pf_schedule(
    colored: Coloring,
    g: ConflictGraph,
    state: FairnessState,
    rates: Rates,
    serving: Mapping[int, int],
    n_prbs: int,
) -> Schedule:
    """Classical PF: unweighted rate/EWMA, ties to the lower UE id (no holder advantage)."""
    _check(colored, g)

    def metric(u, p):
        return mpf_metric(rates[u][p - 1], state.ewma[u])

    return _contend(
        colored,
        g,
        serving,
        n_prbs,
        choose=lambda u, a: _argmax_prb(lambda p: metric(u, p), n_prbs),
        beats=lambda u, p, v, pv: (metric(u, p), -u) > (metric(v, pv), -v),
    )


def rr_schedule(
    colored: Coloring,
    g: ConflictGraph,
    state: FairnessState,
    serving: Mapping[int, int],
    n_prbs: int,
) -> Schedule:
    """Least-recently-served wins each contended PRB; ties to the lower UE id."""
    _check(colored, g)

    def key(u):
        return (state.last_served.get(u, -1), u)

    def choose(u, a):
        # weakest defence first: the PRB whose strongest conflicting holder was served most recently
        def softness(p):
            holders = _conflicting_holders(g, a, u, p)
            if not holders:
                return (float("inf"), 0)
            return min(key(v) for v in holders)

        return _argmax_prb(softness, n_prbs)

    return _contend(
        colored, g, serving, n_prbs, choose=choose, beats=lambda u, p, v, pv: key(u) < key(v)
    )


def none_schedule(colored: Coloring, serving: Mapping[int, int]) -> Schedule:
    return Schedule(Assignment(dict(serving), dict(colored.colors)))


def schedule(
    scheme: str,
    colored: Coloring,
    g: ConflictGraph,
    state: FairnessState,
    rates: Rates,
    weights: Mapping[int, float],
    serving: Mapping[int, int],
    n_prbs: int,
) -> Schedule:
    if scheme == "mpf":
        return mpf_schedule(colored, g, state, rates, weights, serving, n_prbs)
    if scheme == "pf":
        return pf_schedule(colored, g, state, rates, serving, n_prbs)
    if scheme == "rr":
        return rr_schedule(colored, g, state, serving, n_prbs)
    if scheme == "none":
        _check(colored, g)
        return none_schedule(colored, serving)
    raise ValueError(f"unknown fairness scheme {scheme!r}; expected one of {SCHEMES}")
