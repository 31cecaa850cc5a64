"""Per-slot user conflict graph.

Same-RU UEs always conflict. A cross-RU pair conflicts when sharing a PRB,
with each UE seeing only the other's serving RU as interferer, would push
either rate below its tolerance-scaled demand. Expected fading is used so the
graph is a deterministic function of positions, demands and tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from oran_dsa.radio import LinkSet, SpectrumGrid, per_prb_rate


@dataclass(frozen=True)
class UeState:
    id: int
    ru_id: int
    demand_bps: float
    tolerance: float = 0.0
    weight: float = 1.0

    @property
    def required_rate(self) -> float:
        return (1.0 - self.tolerance) * self.demand_bps


class ConflictGraph:
    def __init__(self, vertices: Iterable[int], edges: Iterable[tuple[int, int]] = ()):
        self.vertices = tuple(sorted(set(vertices)))
        self.adjacency: dict[int, set[int]] = {v: set() for v in self.vertices}
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError(f"self-loop on {u}")
        if u not in self.adjacency or v not in self.adjacency:
            raise KeyError(f"edge ({u}, {v}) references an unknown vertex")
        self.adjacency[u].add(v)
        self.adjacency[v].add(u)

    def neighbors(self, u: int) -> set[int]:
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency.get(u, ())

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in self.vertices for v in self.adjacency[u] if u < v)

    @property
    def max_degree(self) -> int:
        return max((len(n) for n in self.adjacency.values()), default=0)

    def __eq__(self, other):
        return (
            isinstance(other, ConflictGraph)
            and self.vertices == other.vertices
            and self.edges == other.edges
        )

    def __repr__(self):
        return f"ConflictGraph(|V|={len(self.vertices)}, |E|={len(self.edges)})"

    def dump_edges(self) -> str:
        """Edge list, one ``u,v`` pair per line."""
        return "".join(f"{u},{v}\n" for u, v in self.edges)


def weighted_degree(g: ConflictGraph, u: int, weights: Mapping[int, float]) -> float:
    if u not in g.adjacency:
        raise KeyError(f"unknown vertex {u}")
    return weights.get(u, 1.0) * g.degree(u)


def _pair_rate(links: LinkSet, ue: UeState, interferer_ru: int, grid: SpectrumGrid, noise_w: float):
    i = links.ue_index[ue.id]
    own = links.ru_index[ue.ru_id]
    k = links.ru_index[interferer_ru]
    signal = links.ru_power[own] * links.pathloss[i, own]
    interference = links.ru_power[k] * links.pathloss[i, k]
    return per_prb_rate(grid.prb_bandwidth_hz, signal / (interference + noise_w))


def pairwise_conflict(
    u: UeState, v: UeState, links: LinkSet, grid: SpectrumGrid, noise_w: float
) -> bool:
    """Cross-RU co-channel test under expected fading.

    Gains are PRB-independent in expectation, so one evaluation stands for
    every PRB.
    """
    if u.ru_id == v.ru_id:
        raise ValueError("same-RU pairs are handled by the clique rule")
    return bool(
        _pair_rate(links, u, v.ru_id, grid, noise_w) < u.required_rate
        or _pair_rate(links, v, u.ru_id, grid, noise_w) < v.required_rate
    )


def build_graph(
    ues: Sequence[UeState], links: LinkSet, grid: SpectrumGrid, noise_w: float
) -> ConflictGraph:
    g = ConflictGraph(u.id for u in ues)
    if len(ues) < 2:
        return g
    idx = np.array([links.ue_index[u.id] for u in ues])
    own = np.array([links.ru_index[u.ru_id] for u in ues])
    power = links.ru_power[None, :] * links.pathloss[idx, :]  # (n, R) expected rx power
    signal = power[np.arange(len(ues)), own]
    # violates[a, k]: UE a misses its target when RU k reuses its PRB
    rate = per_prb_rate(grid.prb_bandwidth_hz, signal[:, None] / (power + noise_w))
    required = np.array([u.required_rate for u in ues])
    violates = rate < required[:, None]
    same = own[:, None] == own[None, :]
    cross = violates[:, own] | violates[:, own].T
    adj = np.where(same, True, cross)
    np.fill_diagonal(adj, False)
    ids = [u.id for u in ues]
    for a, b in zip(*np.nonzero(np.triu(adj, 1))):
        g.add_edge(ids[a], ids[b])
    return g
