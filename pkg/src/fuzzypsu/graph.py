"""Induced edge-labeled graphs, exclusivity tests, DSATUR and stripping.

Axes and vertices are 0-based.  An edge label is a d-bit mask whose bit
``l`` is set when the two balls' projections on axis ``l`` intersect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from fuzzypsu.geometry import FuzzyDataset


class StripsFailed(Exception):
    """Alg. Strips left some vertices unassigned."""

    def __init__(self, remaining: Sequence[int]):
        super().__init__(f"{len(remaining)} vertices could not be stripped")
        self.remaining = tuple(remaining)


class DegreeBoundError(ValueError):
    def __init__(self, degree: int, bound: int):
        super().__init__(f"labeled degree {degree} exceeds the bound {bound}")
        self.degree = degree
        self.bound = bound


@dataclass(frozen=True)
class LabeledGraph:
    n: int
    d: int
    labels: dict = field(default_factory=dict)  # (i, j) with i < j -> mask

    def __post_init__(self):
        adj: list[dict[int, int]] = [dict() for _ in range(self.n)]
        for (i, j), mask in self.labels.items():
            if not 0 <= i < j < self.n or mask <= 0 or mask >> self.d:
                raise ValueError(f"bad edge {(i, j)} -> {mask:#x}")
            adj[i][j] = mask
            adj[j][i] = mask
        object.__setattr__(self, "_adj", adj)

    def label(self, i: int, j: int) -> int:
        return self._adj[i].get(j, 0)

    def neighbors(self, v: int) -> dict[int, int]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return sum(bin(m).count("1") for m in self._adj[v].values())

    @property
    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(self.n)), default=0)

    def is_null(self) -> bool:
        return not self.labels

    def edges(self, axis: Optional[int] = None):
        for (i, j), m in sorted(self.labels.items()):
            if axis is None or m >> axis & 1:
                yield i, j, m

    def label_set(self, i: int, j: int) -> set[int]:
        m = self.label(i, j)
        return {l for l in range(self.d) if m >> l & 1}

    def dump(self) -> str:
        return "".join(f"{i} {j} {m:x}\n" for i, j, m in self.edges())


def build_induced_graph(X: FuzzyDataset) -> LabeledGraph:
    n, d = X.n, X.d
    if n < 2:
        return LabeledGraph(n, d, {})
    c = np.asarray(X.points, dtype=np.int64)
    close = np.abs(c[:, None, :] - c[None, :, :]) <= 2 * X.delta
    masks = (close.astype(np.int64) << np.arange(d, dtype=np.int64)).sum(axis=2)
    iu, ju = np.nonzero(np.triu(masks, k=1))
    return LabeledGraph(n, d, {(int(i), int(j)): int(masks[i, j]) for i, j in zip(iu, ju)})


def _as_graph(G: Union[LabeledGraph, FuzzyDataset]) -> LabeledGraph:
    return build_induced_graph(G) if isinstance(G, FuzzyDataset) else G


def vertex_a_exclusive(G: LabeledGraph, v: int, a: int,
                       among: Optional[set] = None) -> bool:
    """Every edge at ``v`` (into ``among`` if given) carrying ``a`` carries only ``a``."""
    bit = 1 << a
    for u, m in G.neighbors(v).items():
        if among is not None and u not in among:
            continue
        if m & bit and m != bit:
            return False
    return True


def is_a_exclusive(G: Union[LabeledGraph, FuzzyDataset], a: int,
                   vertices: Optional[Iterable[int]] = None) -> bool:
    G = _as_graph(G)
    if not 0 <= a < G.d:
        raise ValueError(f"axis {a} outside [0, {G.d})")
    vs = None if vertices is None else set(vertices)
    bit = 1 << a
    for i, j, m in G.edges():
        if vs is not None and (i not in vs or j not in vs):
            continue
        if m & bit and m != bit:
            return False
    return True


@dataclass(frozen=True)
class Partition:
    parts: tuple[tuple[int, ...], ...]
    axes: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        parts = tuple(tuple(sorted(p)) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        seen: set[int] = set()
        for p in parts:
            if seen.intersection(p):
                raise ValueError("partition parts overlap")
            seen.update(p)
        if self.axes is not None and len(self.axes) != len(parts):
            raise ValueError("one axis tag per part")

    def __len__(self) -> int:
        return len(self.parts)

    def covers(self, n: int) -> bool:
        return sorted(v for p in self.parts for v in p) == list(range(n))

    def part_of(self) -> dict[int, int]:
        return {v: k for k, p in enumerate(self.parts) for v in p}


def dsatur(G: Union[LabeledGraph, FuzzyDataset], axis: Optional[int] = None,
           vertices: Optional[Iterable[int]] = None) -> Partition:
    """Color the simple graph (or its ``axis``-edge subgraph) with DSATUR.

    Ties on saturation go to the higher degree, then the lower index.
    """
    G = _as_graph(G)
    vs = sorted(set(range(G.n) if vertices is None else vertices))
    if not vs:
        return Partition(())
    inside = set(vs)
    need = 0 if axis is None else 1 << axis
    adj = {v: [u for u, m in G.neighbors(v).items()
                if u in inside and (m & need if need else True)] for v in vs}
    color: dict[int, int] = {}
    seen_colors: dict[int, set[int]] = {v: set() for v in vs}
    for _ in vs:
        v = max((u for u in vs if u not in color),
                key=lambda u: (len(seen_colors[u]), len(adj[u]), -u))
        c = 0
        while c in seen_colors[v]:
            c += 1
        color[v] = c
        for u in adj[v]:
            seen_colors[u].add(c)
    k = max(color.values()) + 1
    return Partition(tuple(tuple(v for v in vs if color[v] == c) for c in range(k)))


def is_proper_coloring(G: LabeledGraph, partition: Partition, axis: Optional[int] = None) -> bool:
    need = 0 if axis is None else 1 << axis
    for part in partition.parts:
        for x in range(len(part)):
            for y in range(x + 1, len(part)):
                m = G.label(part[x], part[y])
                if m and (not need or m & need):
                    return False
    return True


def verify_strips(G: LabeledGraph, partition: Partition) -> bool:
    if partition.axes is None or not partition.covers(G.n):
        return False
    return all(is_a_exclusive(G, a, part) for a, part in zip(partition.axes, partition.parts))


def _peel_exclusive(G: LabeledGraph, remaining: set[int], Z: list[list[int]]) -> None:
    """Move a-exclusive vertices (checked in the remaining graph) until none are left.

    One vertex per sweep in index order, lowest axis first.
    """
    changed = True
    while changed:
        changed = False
        for v in sorted(remaining):
            for a in range(G.d):
                if vertex_a_exclusive(G, v, a, remaining):
                    Z[a].append(v)
                    remaining.discard(v)
                    changed = True
                    break
            if changed:
                break


def _multiplicity(G: LabeledGraph, v: int, remaining: set[int]) -> int:
    total = 0
    for u, m in G.neighbors(v).items():
        if u in remaining:
            k = bin(m).count("1")
            if k >= 2:
                total += k
    return total


def strips(G: Union[LabeledGraph, FuzzyDataset]) -> Partition:
    """Alg. Strips: returns ``d`` axis-tagged parts or raises StripsFailed."""
    G = _as_graph(G)
    remaining = set(range(G.n))
    Z: list[list[int]] = [[] for _ in range(G.d)]
    _peel_exclusive(G, remaining, Z)
    for a in range(G.d):
        if not remaining:
            break
        classes = dsatur(G, a, remaining).parts
        best = max(range(len(classes)),
                   key=lambda k: (sum(_multiplicity(G, v, remaining) for v in classes[k]), -k))
        Z[a].extend(classes[best])
        remaining.difference_update(classes[best])
    if remaining:
        raise StripsFailed(sorted(remaining))
    return Partition(tuple(tuple(z) for z in Z), tuple(range(G.d)))


def degree_bound(d: int) -> int:
    return math.ceil(3 * d / 2) - 1


@dataclass(frozen=True)
class TheoremStripping:
    partition: Partition
    residual: tuple[int, ...]
    residual_degree: int


def strip_by_theorem_detail(G: Union[LabeledGraph, FuzzyDataset]) -> TheoremStripping:
    G = _as_graph(G)
    bound = degree_bound(G.d)
    if G.max_degree > bound:
        raise DegreeBoundError(G.max_degree, bound)
    remaining = set(range(G.n))
    Z: list[list[int]] = [[] for _ in range(G.d)]
    _peel_exclusive(G, remaining, Z)
    residual = tuple(sorted(remaining))
    rdeg = max((sum(1 for u in G.neighbors(v) if u in remaining) for v in residual), default=0)
    classes = dsatur(G, None, residual).parts
    if len(classes) > G.d:
        raise RuntimeError(f"residual needed {len(classes)} colors for d={G.d}")
    for a, cls in enumerate(classes):
        Z[a].extend(cls)
    return TheoremStripping(Partition(tuple(tuple(z) for z in Z), tuple(range(G.d))),
                            residual, rdeg)


def strip_by_theorem(G: Union[LabeledGraph, FuzzyDataset]) -> Partition:
    """Constructive stripping for labeled degree at most ceil(3d/2) - 1."""
    return strip_by_theorem_detail(G).partition
