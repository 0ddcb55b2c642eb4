"""Points, L-infinity balls, the fuzzy-union oracle and the dataset file format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Collection, Iterable, Sequence

Point = tuple[int, ...]


class DimensionMismatch(ValueError):
    pass


class InvalidDataset(ValueError):
    pass


def linf_dist(p: Sequence[int], q: Sequence[int]) -> int:
    if len(p) != len(q):
        raise DimensionMismatch(f"dimension {len(p)} vs {len(q)}")
    return max((abs(a - b) for a, b in zip(p, q)), default=0)


@dataclass(frozen=True)
class FuzzyDataset:
    """Receiver centers with a common radius.

    Every coordinate lies in ``[delta, 2**w - 1 - delta]`` so shifted keys
    ``x + eps`` never leave ``[0, 2**w)``.
    """

    points: tuple[Point, ...]
    delta: int
    d: int
    w: int = 16

    def __post_init__(self):
        pts = tuple(tuple(int(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if self.d < 1 or self.w < 1 or self.delta < 0:
            raise InvalidDataset("need d >= 1, w >= 1 and delta >= 0")
        lo, hi = self.delta, (1 << self.w) - 1 - self.delta
        for p in pts:
            if len(p) != self.d:
                raise InvalidDataset(f"point {p} does not have dimension {self.d}")
            for c in p:
                if not lo <= c <= hi:
                    raise InvalidDataset(f"coordinate {c} of {p} outside [{lo}, {hi}]")
        if len(set(pts)) != len(pts):
            raise InvalidDataset("duplicate centers")

    @property
    def n(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def subset(self, indices: Iterable[int]) -> "FuzzyDataset":
        return FuzzyDataset(tuple(self.points[i] for i in indices), self.delta, self.d, self.w)


def _check_queries(X: FuzzyDataset, Y: Iterable[Sequence[int]]) -> list[Point]:
    out = []
    for y in Y:
        if len(y) != X.d:
            raise DimensionMismatch(f"query {tuple(y)} has dimension {len(y)}, expected {X.d}")
        out.append(tuple(int(c) for c in y))
    return out


def dedup(Y: Iterable[Sequence[int]]) -> list[Point]:
    """Drop repeated points, keeping first occurrences in order."""
    return list(dict.fromkeys(tuple(int(c) for c in y) for y in Y))


def is_member(X: FuzzyDataset, y: Sequence[int], exact_axes: Collection[int] = ()) -> bool:
    for x in X.points:
        if all(abs(a - b) <= (0 if j in exact_axes else X.delta)
               for j, (a, b) in enumerate(zip(x, y))):
            return True
    return False


def fuzzy_union_oracle(X: FuzzyDataset, Y: Iterable[Sequence[int]],
                       exact_axes: Collection[int] = ()) -> set[Point]:
    """Brute force union: X plus every y farther than delta from all centers.

    Axes listed in ``exact_axes`` use threshold 0 instead of delta (the
    identifier axis of the non-fuzzy-id variant).
    """
    if not exact_axes:
        out = set(X.points)
        for y in _check_queries(X, Y):
            if min((linf_dist(x, y) for x in X.points), default=X.delta + 1) > X.delta:
                out.add(y)
        return out
    out = set(X.points)
    for y in _check_queries(X, Y):
        if not is_member(X, y, exact_axes):
            out.add(y)
    return out


def fuzzy_membership_count(X: FuzzyDataset, Y: Iterable[Sequence[int]],
                           exact_axes: Collection[int] = ()) -> int:
    """Members of Y (duplicates counted once)."""
    return sum(is_member(X, y, exact_axes) for y in dedup(_check_queries(X, Y)))


def write_dataset(path: str | Path, X: FuzzyDataset, Y: Sequence[Sequence[int]]) -> None:
    lines = [f"{X.d} {X.n} {len(Y)} {X.delta} {X.w}"]
    lines += [" ".join(map(str, p)) for p in X.points]
    lines += [" ".join(map(str, p)) for p in Y]
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path: str | Path) -> tuple[FuzzyDataset, list[Point]]:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 5:
        raise InvalidDataset("header must be 'd n m delta w'")
    d, n, m, delta, w = map(int, rows[0])
    if len(rows) != 1 + n + m:
        raise InvalidDataset(f"expected {n + m} point lines, found {len(rows) - 1}")
    pts = [tuple(map(int, r)) for r in rows[1:]]
    X = FuzzyDataset(tuple(pts[:n]), delta, d, w)
    Y = _check_queries(X, pts[n:])
    for y in Y:
        if any(not 0 <= c < (1 << w) for c in y):
            raise InvalidDataset(f"query {y} outside [0, 2^{w})")
    return X, Y
