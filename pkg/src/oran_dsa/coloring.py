"""PRB allocation as partial graph coloring with P colors.

Every scheme returns a proper partial coloring: a vertex that cannot be
given a conflict-free PRB is left uncolored rather than violating an edge.
PRBs are numbered 1..P and scanned in ascending order; remaining ties are
broken by ascending UE id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from oran_dsa.graph import ConflictGraph, weighted_degree

SCHEMES = ("random", "sequential", "greedy", "welsh-powell", "dsatur")


@dataclass
class Coloring:
    colors: dict[int, int] = field(default_factory=dict)
    uncolored: set[int] = field(default_factory=set)

    @property
    def colors_used(self) -> int:
        return len(set(self.colors.values()))

    def __eq__(self, other):
        return (
            isinstance(other, Coloring)
            and self.colors == other.colors
            and self.uncolored == other.uncolored
        )


def _first_fit(g: ConflictGraph, u: int, colors: Mapping[int, int], n_prbs: int) -> int | None:
    taken = {colors[v] for v in g.neighbors(u) if v in colors}
    for p in range(1, n_prbs + 1):
        if p not in taken:
            return p
    return None


def _fits(g: ConflictGraph, u: int, p: int, colors: Mapping[int, int]) -> bool:
    return all(colors.get(v) != p for v in g.neighbors(u))


def _color_in_order(g: ConflictGraph, order: Iterable[int], n_prbs: int) -> Coloring:
    out = Coloring()
    for u in order:
        p = _first_fit(g, u, out.colors, n_prbs)
        if p is None:
            out.uncolored.add(u)
        else:
            out.colors[u] = p
    return out


def welsh_powell_order(g: ConflictGraph, weights: Mapping[int, float]) -> list[int]:
    return sorted(g.vertices, key=lambda u: (-weighted_degree(g, u, weights), u))


def _dsatur(g: ConflictGraph, n_prbs: int, weights: Mapping[int, float]) -> Coloring:
    out = Coloring()
    seen: dict[int, set[int]] = {u: set() for u in g.vertices}
    wdeg = {u: weighted_degree(g, u, weights) for u in g.vertices}
    pending = set(g.vertices)
    while pending:
        u = min(pending, key=lambda v: (-len(seen[v]), -wdeg[v], v))
        pending.discard(u)
        p = _first_fit(g, u, out.colors, n_prbs)
        if p is None:
            out.uncolored.add(u)
            continue
        out.colors[u] = p
        for v in g.neighbors(u):
            seen[v].add(p)
    return out


def _random(g: ConflictGraph, n_prbs: int, rng: np.random.Generator) -> Coloring:
    out = Coloring()
    for u in g.vertices:
        p = int(rng.integers(1, n_prbs + 1))
        if _fits(g, u, p, out.colors):
            out.colors[u] = p
        else:
            out.uncolored.add(u)
    return out


def _sequential(g: ConflictGraph, n_prbs: int) -> Coloring:
    # k-th UE (id order) is offered PRB (k mod P) + 1 and nothing else
    out = Coloring()
    for k, u in enumerate(g.vertices):
        p = k % n_prbs + 1
        if _fits(g, u, p, out.colors):
            out.colors[u] = p
        else:
            out.uncolored.add(u)
    return out


def color(
    g: ConflictGraph,
    n_prbs: int,
    weights: Mapping[int, float] | None = None,
    scheme: str = "welsh-powell",
    rng: np.random.Generator | None = None,
) -> Coloring:
    if n_prbs < 1:
        raise ValueError("need at least one PRB")
    weights = weights or {}
    if scheme == "welsh-powell":
        return _color_in_order(g, welsh_powell_order(g, weights), n_prbs)
    if scheme == "greedy":
        return _color_in_order(g, g.vertices, n_prbs)
    if scheme == "dsatur":
        return _dsatur(g, n_prbs, weights)
    if scheme == "sequential":
        return _sequential(g, n_prbs)
    if scheme == "random":
        if rng is None:
            raise ValueError("random coloring needs an rng")
        return _random(g, n_prbs, rng)
    raise ValueError(f"unknown coloring scheme {scheme!r}; expected one of {SCHEMES}")


def verify_coloring(g: ConflictGraph, c: Coloring, n_prbs: int | None = None) -> bool:
    colored = set(c.colors)
    if colored & c.uncolored:
        return False
    if colored | c.uncolored and (colored | c.uncolored) != set(g.vertices):
        return False
    for u, p in c.colors.items():
        if u not in g.adjacency:
            return False
        if p < 1 or (n_prbs is not None and p > n_prbs):
            return False
        if any(c.colors.get(v) == p for v in g.neighbors(u)):
            return False
    return True
