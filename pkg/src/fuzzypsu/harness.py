"""Seeded datasets per structure class, the metered protocol runner and reports.

Randomness comes from ``random.Random`` instances seeded by keyed BLAKE2b
derivations of one master seed.  That makes runs reproducible; it is not a
cryptographic RNG and the simulator makes no security claim for it.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import logging
import math
import os
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from fuzzypsu.crypto import SchemeDescriptor
from fuzzypsu.fpsu import (FpsuConfig, FpsuRun, Variant, choose_exclusive_axis, execute_fpsu,
                           fpsu_query)
from fuzzypsu.geometry import (FuzzyDataset, Point, dedup, fuzzy_membership_count,
                               fuzzy_union_oracle, is_member)
from fuzzypsu.graph import (build_induced_graph, degree_bound, is_a_exclusive)
from fuzzypsu.pir import PirBackend
from fuzzypsu.transcript import R_TO_S, S_TO_R, Channel, Transcript

log = logging.getLogger("fuzzypsu")

CSV_COLUMNS = ("variant", "n", "m", "d", "delta", "chi", "pir_indices", "ciphertexts",
               "store_entries", "rounds", "bytes", "ms")


def configure_logging() -> None:
    level = os.environ.get("FPSU_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def derive_seed(master: int, label: str) -> int:
    h = hashlib.blake2b(label.encode(), key=master.to_bytes(16, "big", signed=True),
                        digest_size=8)
    return int.from_bytes(h.digest(), "big")


@dataclass(frozen=True)
class Seeds:
    dataset: int
    receiver: int
    sender: int

    @classmethod
    def from_master(cls, master: int) -> "Seeds":
        return cls(derive_seed(master, "dataset"), derive_seed(master, "receiver"),
                   derive_seed(master, "sender"))


class Structure(enum.Enum):
    NULL_GRAPH = "null-graph"
    NON_FUZZY_ID = "non-fuzzy-id"
    A_EXCLUSIVE = "a-exclusive"
    D_STRIPABLE = "d-stripable"
    RANDOM = "random"


STRUCTURE_FOR = {
    Variant.NG: Structure.NULL_GRAPH,
    Variant.NF: Structure.NON_FUZZY_ID,
    Variant.LAY: Structure.RANDOM,
    Variant.EXC: Structure.A_EXCLUSIVE,
    Variant.STR: Structure.D_STRIPABLE,
}


class InfeasibleSpec(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    structure: Structure
    n: int
    m: int
    d: int
    delta: int
    w: int = 16
    inside_count: Optional[int] = None
    seed: int = 0
    axis: int = 0

    @property
    def inside(self) -> int:
        return self.m // 2 if self.inside_count is None else self.inside_count

    @property
    def exact_axes(self) -> tuple[int, ...]:
        return (0,) if self.structure is Structure.NON_FUZZY_ID else ()


def _bounds(spec: DatasetSpec) -> tuple[int, int]:
    return spec.delta, (1 << spec.w) - 1 - spec.delta


def _window(rng: random.Random, spec: DatasetSpec, width: int) -> tuple[int, int]:
    lo, hi = _bounds(spec)
    width = min(width, hi - lo + 1)
    start = rng.randint(lo, hi - width + 1)
    return start, start + width - 1


def _spaced(rng: random.Random, count: int, gap: int, lo: int, hi: int) -> list[int]:
    """``count`` values in [lo, hi] with pairwise distance > gap, shuffled."""
    room = hi - lo + 1 - (count - 1) * gap
    if room < count:
        raise InfeasibleSpec(f"cannot fit {count} values {gap + 1} apart in [{lo}, {hi}]")
    base = sorted(rng.sample(range(room), count))
    vals = [lo + b + k * gap for k, b in enumerate(base)]
    rng.shuffle(vals)
    return vals


def _gen_null(rng, spec):
    gap = 2 * spec.delta
    lo, hi = _window(rng, spec, 4 * spec.n * (gap + 1))
    axes = [_spaced(rng, spec.n, gap, lo, hi) for _ in range(spec.d)]
    return [tuple(axes[j][i] for j in range(spec.d)) for i in range(spec.n)]


def _gen_nf(rng, spec):
    lo, hi = _window(rng, spec, 4 * spec.n)
    ids = rng.sample(range(lo, hi + 1), spec.n)
    wlo, whi = _window(rng, spec, 3 * (4 * spec.delta + 1))
    return [(ids[i],) + tuple(rng.randint(wlo, whi) for _ in range(spec.d - 1))
            for i in range(spec.n)]


def _rejection(rng, spec, draw, accept, tries: int = 20000):
    pts: list[Point] = []
    for _ in range(tries):
        if len(pts) == spec.n:
            return pts
        p = draw()
        if p not in pts and accept(pts, p):
            pts.append(p)
    if len(pts) == spec.n:
        return pts
    raise InfeasibleSpec(f"rejection sampling placed {len(pts)} of {spec.n} points")


def _gen_exclusive(rng, spec):
    a, two = spec.axis, 2 * spec.delta
    if not 0 <= a < spec.d:
        raise InfeasibleSpec(f"axis {a} outside [0, {spec.d})")
    wa = _window(rng, spec, max(two + 1, spec.n * (spec.delta + 1)))
    wo = [_window(rng, spec, 4 * spec.n * (two + 1)) for _ in range(spec.d)]

    def draw():
        return tuple(rng.randint(*wa) if j == a else rng.randint(*wo[j]) for j in range(spec.d))

    def accept(pts, p):
        for q in pts:
            close = [abs(p[j] - q[j]) <= two for j in range(spec.d)]
            if close[a] and sum(close) > 1:
                return False
        return True

    for _ in range(50):
        pts = _rejection(rng, spec, draw, accept)
        G = build_induced_graph(FuzzyDataset(tuple(pts), spec.delta, spec.d, spec.w))
        if spec.n < 2 or any(True for _ in G.edges(a)):
            return pts
    raise InfeasibleSpec("could not force an overlap on the exclusive axis")


def _gen_stripable(rng, spec):
    bound = degree_bound(spec.d)
    two = 2 * spec.delta
    width = max(two + 2, spec.n * (two + 1) // 2)

    def accept(pts, p):
        labels = [sum(abs(p[j] - q[j]) <= two for j in range(spec.d)) for q in pts]
        if sum(labels) > bound:
            return False
        deg = _degrees(pts, spec.delta)
        return all(deg[i] + l <= bound for i, l in enumerate(labels))

    # start crowded so edges appear; widen the box until the bound can be met
    for _ in range(12):
        win = [_window(rng, spec, width) for _ in range(spec.d)]
        try:
            return _rejection(rng, spec, lambda: tuple(rng.randint(*w) for w in win), accept, 4000)
        except InfeasibleSpec:
            width *= 2
    raise InfeasibleSpec("could not meet the stripping degree bound")


def _degrees(pts, delta):
    two = 2 * delta
    out = [0] * len(pts)
    for i in range(len(pts)):
        for k in range(i + 1, len(pts)):
            l = sum(abs(a - b) <= two for a, b in zip(pts[i], pts[k]))
            out[i] += l
            out[k] += l
    return out


def _gen_random(rng, spec):
    win = [_window(rng, spec, max(4 * spec.delta + 2, 3 * (4 * spec.delta + 1))) for _ in range(spec.d)]
    return _rejection(rng, spec, lambda: tuple(rng.randint(*w) for w in win), lambda pts, p: True)


_GENERATORS = {
    Structure.NULL_GRAPH: _gen_null,
    Structure.NON_FUZZY_ID: _gen_nf,
    Structure.A_EXCLUSIVE: _gen_exclusive,
    Structure.D_STRIPABLE: _gen_stripable,
    Structure.RANDOM: _gen_random,
}


def _gen_queries(rng: random.Random, spec: DatasetSpec, X: FuzzyDataset) -> list[Point]:
    exact = spec.exact_axes
    top = (1 << spec.w) - 1
    Y: list[Point] = []
    seen: set[Point] = set()
    while len(Y) < spec.inside:
        c = rng.choice(X.points)
        y = []
        for j, x in enumerate(c):
            if j in exact:
                y.append(x)
            elif rng.random() < 0.3:
                y.append(x + rng.choice((-spec.delta, spec.delta)))
            else:
                y.append(x + rng.randint(-spec.delta, spec.delta))
        y = tuple(y)
        if y not in seen:
            seen.add(y)
            Y.append(y)
    misses = 0
    reach = 2 * spec.delta + 2
    while len(Y) < spec.m:
        if misses < 500:
            c = rng.choice(X.points)
            y = []
            for j, x in enumerate(c):
                r = rng.random()
                if j in exact and r < 0.5:
                    y.append(x + rng.choice((-1, 0, 0, 1)))
                elif r < 0.25:
                    y.append(x + rng.choice((-spec.delta - 1, spec.delta + 1)))
                else:
                    y.append(x + rng.randint(-reach, reach))
            y = tuple(y)
        else:
            y = tuple(rng.randint(0, top) for _ in range(spec.d))
        if (y in seen or any(not 0 <= v <= top for v in y) or is_member(X, y, exact)):
            misses += 1
            continue
        seen.add(y)
        Y.append(y)
    rng.shuffle(Y)
    return Y


def gen_dataset(spec: DatasetSpec) -> tuple[FuzzyDataset, list[Point]]:
    """Build (X, Y) for ``spec`` and check its class and membership count."""
    if spec.n < 1 or spec.m < 0 or not 0 <= spec.inside <= spec.m:
        raise InfeasibleSpec("need n >= 1 and 0 <= inside_count <= m")
    rng = random.Random(spec.seed)
    pts = _GENERATORS[spec.structure](rng, spec)
    X = FuzzyDataset(tuple(pts), spec.delta, spec.d, spec.w)
    G = build_induced_graph(X)
    s = spec.structure
    if s is Structure.NULL_GRAPH and not G.is_null():
        raise AssertionError("null-graph generator produced an edge")
    if s is Structure.NON_FUZZY_ID and len({x[0] for x in X.points}) != X.n:
        raise AssertionError("identifier collision")
    if s is Structure.A_EXCLUSIVE and not is_a_exclusive(G, spec.axis):
        raise AssertionError("a-exclusive generator broke exclusivity")
    if s is Structure.D_STRIPABLE and G.max_degree > degree_bound(spec.d):
        raise AssertionError("stripable generator exceeded the degree bound")
    Y = _gen_queries(rng, spec, X)
    if fuzzy_membership_count(X, Y, spec.exact_axes) != spec.inside:
        raise AssertionError("membership count differs from inside_count")
    return X, Y


# ---------------------------------------------------------------- running

@dataclass
class RunResult:
    result: set
    transcript: Transcript
    run: FpsuRun
    config: FpsuConfig


def make_config(variant: Variant, X: FuzzyDataset, Y: Sequence[Point], lam: int = 40,
                scheme: Optional[SchemeDescriptor] = None,
                pir_backend: PirBackend = PirBackend.REFERENCE_LHE,
                pir_scheme: Optional[SchemeDescriptor] = None) -> FpsuConfig:
    return FpsuConfig(variant, X.n, len(Y), X.d, X.delta, X.w, lam,
                      scheme or SchemeDescriptor.mock(), pir_backend, pir_scheme)


def run_protocol(variant: Variant, X: FuzzyDataset, Y: Sequence[Point],
                 config: Optional[FpsuConfig] = None, seed: int = 0,
                 axis: Optional[int] = None, partition=None) -> RunResult:
    """Run one protocol instance; returns the receiver's output and the transcript."""
    Y = dedup(Y)
    config = config or make_config(variant, X, Y)
    if config.variant is not variant:
        raise ValueError("variant does not match the configuration")
    seeds = Seeds.from_master(seed)
    channel = Channel()
    tr = channel.transcript
    if config.pir_backend is PirBackend.INSECURE_CLEAR:
        tr.flags.add("insecure-clear-pir")
    t0 = time.perf_counter()
    run = execute_fpsu(config, X, Y, random.Random(seeds.receiver), random.Random(seeds.sender),
                       channel, axis, partition)
    tr.counters.update(variant=variant.value, n=X.n, m=len(Y), d=X.d, delta=X.delta,
                       ms=round((time.perf_counter() - t0) * 1000, 3))
    log.info("%s n=%d m=%d d=%d delta=%d: %d messages, %d bytes", variant.value, X.n, len(Y),
             X.d, X.delta, len(tr.messages), tr.total_bytes)
    return RunResult(run.result, tr, run, config)


def meter_report(transcripts: Iterable[Transcript]) -> list[dict]:
    rows = []
    for tr in transcripts:
        c = tr.counters
        rows.append({
            "variant": c.get("variant", ""),
            "n": c.get("n", ""), "m": c.get("m", ""), "d": c.get("d", ""),
            "delta": c.get("delta", ""),
            "chi": c.get("chi", ""),
            "pir_indices": sum(c.get("pir_indices", [])),
            "ciphertexts": tr.total_ciphertexts,
            "store_entries": sum(c.get("store_entries", [])),
            "rounds": tr.rounds,
            "bytes": tr.total_bytes,
            "ms": c.get("ms", ""),
        })
    if not rows:
        raise ValueError("no transcripts to report")
    return rows


def report_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _windows(data: bytes, width: int) -> set[bytes]:
    return {data[i:i + width] for i in range(len(data) - width + 1)}


def privacy_violations(rr: RunResult) -> list[str]:
    """Scan every message for plaintext secrets of the party that sent it.

    Looks for: serialized store keys and share values (receiver), serialized
    query keys (sender), and whole points as d big-endian 8-byte words.
    """
    rx, sx = rr.run.receiver, rr.run.sender
    cfg = rr.config
    bp = rx.blueprint
    width = (bp.modulus.bit_length() + 7) // 8
    secret_r: set[bytes] = set()
    for store in bp.stores:
        for k, v in store:
            secret_r.add(k)
            if v >= 1 << 32:
                secret_r.add(v.to_bytes(8, "big") if v < 1 << 64 else v.to_bytes(width, "big"))
    secret_r.update(b"".join(c.to_bytes(8, "big") for c in x) for x in rx.X.points)
    secret_s: set[bytes] = set()
    for batch in fpsu_query(cfg.variant, sx.Y, cfg.d, sx.chi):
        secret_s.update(batch)
    secret_s.update(b"".join(c.to_bytes(8, "big") for c in y) for y in sx.Y)
    out = []
    for msg in rr.transcript.messages:
        secrets = secret_r if msg.direction == R_TO_S else secret_s
        for width_ in sorted({len(s) for s in secrets}):
            hits = _windows(msg.payload, width_) & {s for s in secrets if len(s) == width_}
            if hits:
                out.append(f"{msg.tag} ({msg.direction}) carries {len(hits)} secret strings of {width_} bytes")
    return out


# ---------------------------------------------------------------- acceptance grid

GRID_N = (8, 16, 32)
GRID_M = (2, 4, 8)
GRID_D = (2, 3, 4)
GRID_DELTA = (1, 2, 4)


@dataclass
class TrialOutcome:
    variant: Variant
    seed: int
    spec: DatasetSpec
    matches: bool
    leakage_ok: bool
    zero_count: int
    member_count: int
    transcript: Transcript = field(repr=False)


def grid_spec(variant: Variant, seed: int, n_choices=GRID_N, w: int = 16) -> DatasetSpec:
    rng = random.Random(derive_seed(seed, f"grid-{variant.value}"))
    n, m = rng.choice(n_choices), rng.choice(GRID_M)
    d, delta = rng.choice(GRID_D), rng.choice(GRID_DELTA)
    axis = rng.randrange(d) if variant is Variant.EXC else 0
    return DatasetSpec(STRUCTURE_FOR[variant], n, m, d, delta, w,
                       inside_count=rng.randint(0, m), seed=derive_seed(seed, "dataset"), axis=axis)


def run_trial(variant: Variant, seed: int, scheme: Optional[SchemeDescriptor] = None,
              n_choices=GRID_N, lam: int = 40,
              pir_backend: PirBackend = PirBackend.REFERENCE_LHE) -> TrialOutcome:
    spec = grid_spec(variant, seed, n_choices)
    X, Y = gen_dataset(spec)
    cfg = make_config(variant, X, Y, lam, scheme, pir_backend)
    axis = spec.axis if variant is Variant.EXC else None
    rr = run_protocol(variant, X, Y, cfg, seed=seed, axis=axis)
    oracle = fuzzy_union_oracle(X, Y, spec.exact_axes)
    members = fuzzy_membership_count(X, Y, spec.exact_axes)
    zc = rr.transcript.counters["zero_count"]
    return TrialOutcome(variant, seed, spec, rr.result == oracle, zc == members, zc, members,
                        rr.transcript)
