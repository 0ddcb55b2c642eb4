"""The five fuzzy PSU variants on top of OKHER.

Every variant hands the sender, per sender point, a ciphertext t_i that
decrypts to 0 exactly when the point lies in one of the receiver's balls,
together with ``y_i * t_i``.  The receiver recovers ``y_i`` whenever
``t_i != 0``.

=====  ======================  ===========================================
name   receiver precondition   sender combination
=====  ======================  ===========================================
ng     induced graph is null   sum of d retrieved shares
nf     distinct first coords   sum over axes 2..d of id-prefixed shares
lay    none (DSATUR layers)    product over layers of per-layer sums
exc    a-exclusive graph       product over candidate axes a' of sums
str    d-stripable             same as exc, one strip per axis
=====  ======================  ===========================================

The exc/str combination rule is this package's reconstruction: the
retrieval pattern fixes the keys but the formula for t_i is not pinned
down elsewhere.
"""

from __future__ import annotations

import enum
import math
import random
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

from fuzzypsu import wire
from fuzzypsu.crypto import (CipherValue, SchemeDescriptor, SchemeKind, invert_plaintext)
from fuzzypsu.geometry import FuzzyDataset, Point
from fuzzypsu.graph import (LabeledGraph, Partition, StripsFailed, DegreeBoundError,
                            build_induced_graph, dsatur, is_a_exclusive, strip_by_theorem,
                            strips, verify_strips)
from fuzzypsu.okher import (OkherReceiverSetup, OkherResponse, OkherSenderSetup, cts_from_bytes,
                            cts_to_bytes, okher_decode, okher_query, okher_receiver_complete,
                            okher_receiver_init, okher_resp, okher_sender_init, okher_setup)
from fuzzypsu.pir import PirBackend, PirQuery
from fuzzypsu.transcript import R_TO_S, S_TO_R, Channel

TAG_NG = 0x4E
TAG_NF = 0x46
TAG_LAY = 0x4C
TAG_EXC = 0x45
TAG_PAD = 0x50


class FpsuError(Exception):
    pass


class PreconditionError(FpsuError, ValueError):
    pass


class SchemeRequirementError(FpsuError, ValueError):
    pass


class IntegrityError(FpsuError):
    pass


class Variant(enum.Enum):
    NG = "ng"
    NF = "nf"
    LAY = "lay"
    EXC = "exc"
    STR = "str"

    @property
    def needs_fhe(self) -> bool:
        return self in (Variant.LAY, Variant.EXC, Variant.STR)


@dataclass(frozen=True)
class FpsuConfig:
    variant: Variant
    n: int
    m: int
    d: int
    delta: int
    w: int = 16
    lam: int = 40
    scheme: SchemeDescriptor = field(default_factory=SchemeDescriptor.mock)
    pir_backend: PirBackend = PirBackend.REFERENCE_LHE
    pir_scheme: Optional[SchemeDescriptor] = None

    @property
    def capacity(self) -> int:
        side = 2 * self.delta + 1
        if self.variant in (Variant.EXC, Variant.STR):
            return side * side * self.n
        return side * self.n

    @property
    def okher_lambda(self) -> int:
        return self.lam + math.ceil(math.log2(self.d))

    @property
    def store_axes(self) -> tuple[int, ...]:
        start = 1 if self.variant is Variant.NF else 0
        return tuple(range(start, self.d))

    def validate(self) -> None:
        if self.variant.needs_fhe and not self.scheme.kind.supports_mul:
            raise SchemeRequirementError(
                f"{self.variant.value} multiplies ciphertexts; {self.scheme.kind.value} cannot")
        if self.d < 2:
            raise PreconditionError("d >= 2 is required (the zero-sum shares need two summands)")
        if self.n < 1 or self.m < 1:
            raise PreconditionError("both sets must be nonempty")
        if self.delta < 0:
            raise PreconditionError("delta must be nonnegative")
        if self.scheme.plaintext_bits_lower_bound() < self.w + self.okher_lambda:
            raise SchemeRequirementError(
                f"plaintext modulus must exceed 2^{self.w + self.okher_lambda}")

    def check_modulus(self, t: int) -> None:
        if t <= 1 << (self.w + self.okher_lambda):
            raise SchemeRequirementError(
                f"plaintext modulus must exceed 2^(w + lambda + ceil(log2 d)) = 2^{self.w + self.okher_lambda}")


# ---------------------------------------------------------------- keys

def key_ng(coord: int) -> bytes:
    return struct.pack(">BQ", TAG_NG, coord)


def key_nf(ident: int, coord: int) -> bytes:
    return struct.pack(">BQQ", TAG_NF, ident, coord)


def key_lay(layer: int, coord: int) -> bytes:
    return struct.pack(">BIQ", TAG_LAY, layer, coord)


def key_exc(axis: int, v: int, coord: int) -> bytes:
    return struct.pack(">BIQQ", TAG_EXC, axis, v, coord)


def key_pad(rng: random.Random) -> bytes:
    return bytes([TAG_PAD]) + rng.randbytes(16)


@dataclass
class KeyBlueprint:
    """Per-store key/share lists plus the zero-sum groups the shares came from."""

    axes: tuple[int, ...]
    stores: list[list[tuple[bytes, int]]]
    groups: list[tuple[int, ...]]
    modulus: int

    def entries(self) -> list[int]:
        return [len(s) for s in self.stores]

    def well_formed(self) -> bool:
        return all(len({k for k, _ in s}) == len(s) for s in self.stores)

    def zero_sum(self) -> bool:
        return all(sum(g) % self.modulus == 0 for g in self.groups)


def _shares(k: int, t: int, rng: random.Random) -> list[int]:
    """k uniform shares of zero mod t."""
    out = [rng.randrange(t) for _ in range(k - 1)]
    out.append(-sum(out) % t)
    return out


def _pad(store: list[tuple[bytes, int]], capacity: int, t: int, rng: random.Random) -> None:
    have = {k for k, _ in store}
    while len(store) < capacity:
        k = key_pad(rng)
        if k not in have:
            have.add(k)
            store.append((k, rng.randrange(t)))


def _well_formed_or_raise(bp: KeyBlueprint) -> KeyBlueprint:
    if not bp.well_formed():
        raise PreconditionError("a store has repeated keys")
    return bp


def ng_build_kv(X: FuzzyDataset, t: int, rng: random.Random,
                graph: Optional[LabeledGraph] = None) -> KeyBlueprint:
    graph = graph or build_induced_graph(X)
    if not graph.is_null():
        i, j, mask = next(graph.edges())
        raise PreconditionError(f"induced graph is not null: edge ({i}, {j}) labels {mask:#x}")
    if X.d < 2:
        raise PreconditionError("d >= 2 is required")
    stores: list[list[tuple[bytes, int]]] = [[] for _ in range(X.d)]
    groups = []
    for x in X.points:
        r = _shares(X.d, t, rng)
        groups.append(tuple(r))
        for j in range(X.d):
            stores[j].extend((key_ng(x[j] + e), r[j]) for e in range(-X.delta, X.delta + 1))
    return _well_formed_or_raise(KeyBlueprint(tuple(range(X.d)), stores, groups, t))


def nf_build_kv(X: FuzzyDataset, t: int, rng: random.Random) -> KeyBlueprint:
    ids = [x[0] for x in X.points]
    if len(set(ids)) != len(ids):
        raise PreconditionError("first coordinates are not distinct identifiers")
    if X.d < 2:
        raise PreconditionError("d >= 2 is required")
    stores: list[list[tuple[bytes, int]]] = [[] for _ in range(X.d - 1)]
    groups = []
    for x in X.points:
        r = _shares(X.d - 1, t, rng)
        groups.append(tuple(r))
        for j in range(1, X.d):
            stores[j - 1].extend((key_nf(x[0], x[j] + e), r[j - 1])
                                 for e in range(-X.delta, X.delta + 1))
    return _well_formed_or_raise(KeyBlueprint(tuple(range(1, X.d)), stores, groups, t))


def lay_partition(X: FuzzyDataset, graph: Optional[LabeledGraph] = None) -> Partition:
    return dsatur(graph or build_induced_graph(X))


def lay_build_kv(X: FuzzyDataset, t: int, rng: random.Random,
                 partition: Optional[Partition] = None) -> tuple[int, KeyBlueprint]:
    """Layered build; layer ``l`` holds the centers of DSATUR color ``l``."""
    partition = partition or lay_partition(X)
    stores: list[list[tuple[bytes, int]]] = [[] for _ in range(X.d)]
    groups = []
    for layer, part in enumerate(partition.parts):
        for i in part:
            x = X.points[i]
            r = _shares(X.d, t, rng)
            groups.append(tuple(r))
            for j in range(X.d):
                stores[j].extend((key_lay(layer, x[j] + e), r[j])
                                 for e in range(-X.delta, X.delta + 1))
    return len(partition), _well_formed_or_raise(KeyBlueprint(tuple(range(X.d)), stores, groups, t))


def _exc_into(X: FuzzyDataset, members: Sequence[int], a: int, t: int, rng: random.Random,
              stores: list[list[tuple[bytes, int]]], groups: list) -> None:
    """Hit-value keys (a||v||x_ij+e) for every center of ``members`` into stores j != a."""
    delta, d = X.delta, X.d
    hits: dict[int, list[int]] = {}
    for i in members:
        for v in range(X.points[i][a] - delta, X.points[i][a] + delta + 1):
            hits.setdefault(v, []).append(i)
    others = [j for j in range(d) if j != a]
    for v in sorted(hits):
        for i in hits[v]:
            x = X.points[i]
            r = _shares(len(others), t, rng)
            groups.append(tuple(r))
            for j, share in zip(others, r):
                stores[j].extend((key_exc(a, v, x[j] + e), share)
                                 for e in range(-delta, delta + 1))


def exc_build_kv(X: FuzzyDataset, a: int, t: int, rng: random.Random,
                 graph: Optional[LabeledGraph] = None) -> KeyBlueprint:
    graph = graph or build_induced_graph(X)
    if not is_a_exclusive(graph, a):
        raise PreconditionError(f"centers are not {a}-exclusive")
    stores: list[list[tuple[bytes, int]]] = [[] for _ in range(X.d)]
    groups: list = []
    _exc_into(X, range(X.n), a, t, rng, stores, groups)
    # store a gets no real keys: fill it with random pairs up to capacity
    cap = (2 * X.delta + 1) ** 2 * X.n
    _pad(stores[a], cap, t, rng)
    return _well_formed_or_raise(KeyBlueprint(tuple(range(X.d)), stores, groups, t))


def str_build_kv(X: FuzzyDataset, partition: Partition, t: int, rng: random.Random,
                 graph: Optional[LabeledGraph] = None) -> KeyBlueprint:
    graph = graph or build_induced_graph(X)
    if partition.axes is None or not partition.covers(X.n) or not verify_strips(graph, partition):
        raise PreconditionError("partition is not a valid axis-tagged stripping")
    stores: list[list[tuple[bytes, int]]] = [[] for _ in range(X.d)]
    groups: list = []
    for a, part in zip(partition.axes, partition.parts):
        _exc_into(X, part, a, t, rng, stores, groups)
    cap = (2 * X.delta + 1) ** 2 * X.n
    for s in stores:
        _pad(s, cap, t, rng)
    return _well_formed_or_raise(KeyBlueprint(tuple(range(X.d)), stores, groups, t))


def choose_exclusive_axis(graph: LabeledGraph) -> Optional[int]:
    return next((a for a in range(graph.d) if is_a_exclusive(graph, a)), None)


def choose_stripping(graph: LabeledGraph) -> Partition:
    """Alg. Strips first, then the bounded-degree construction."""
    try:
        return strips(graph)
    except StripsFailed:
        pass
    try:
        return strip_by_theorem(graph)
    except DegreeBoundError as exc:
        raise PreconditionError(f"no stripping found ({exc})") from None


# ---------------------------------------------------------------- sender side

def fpsu_query(variant: Variant, Y: Sequence[Point], d: int, chi: int = 1) -> list[list[bytes]]:
    """Key batches, one per store, in the order fpsu_decode expects."""
    if variant is Variant.NG:
        return [[key_ng(y[j]) for y in Y] for j in range(d)]
    if variant is Variant.NF:
        return [[key_nf(y[0], y[j]) for y in Y] for j in range(1, d)]
    if variant is Variant.LAY:
        return [[key_lay(l, y[j]) for y in Y for l in range(chi)] for j in range(d)]
    return [[key_exc(a, y[a], y[j]) for y in Y for a in range(d) if a != j] for j in range(d)]


@dataclass
class FpsuResponse:
    t_hat: list[CipherValue]
    u_hat: list[list[CipherValue]]

    def to_bytes(self) -> bytes:
        flat = []
        for t, us in zip(self.t_hat, self.u_hat):
            flat.append(t)
            flat.extend(us)
        return wire.u32(len(self.t_hat)) + cts_to_bytes(flat)

    @classmethod
    def from_bytes(cls, pk, data: bytes) -> "FpsuResponse":
        r = wire.Reader(data)
        m = r.u32()
        flat = cts_from_bytes(pk, r)
        r.done()
        if m == 0 or len(flat) % m:
            raise FpsuError("malformed result message")
        k = len(flat) // m
        return cls([flat[i * k] for i in range(m)], [flat[i * k + 1:(i + 1) * k] for i in range(m)])

    @property
    def n_ciphertexts(self) -> int:
        return len(self.t_hat) + sum(map(len, self.u_hat))


def fpsu_decode(variant: Variant, shares: Sequence[Sequence[CipherValue]], Y: Sequence[Point],
                d: int, pk, rng: random.Random, chi: int = 1) -> FpsuResponse:
    """Combine retrieved shares into t_i and y_i * t_i."""
    m = len(Y)
    t_hat: list[CipherValue] = []
    for i in range(m):
        if variant in (Variant.NG, Variant.NF):
            acc = shares[0][i]
            for s in shares[1:]:
                acc = acc + s[i]
        elif variant is Variant.LAY:
            acc = None
            for l in range(chi):
                layer = shares[0][i * chi + l]
                for s in shares[1:]:
                    layer = layer + s[i * chi + l]
                acc = layer if acc is None else acc * layer
        else:
            acc = None
            for a in range(d):
                part = None
                for j in range(d):
                    if j == a:
                        continue
                    # store j holds, per point, d-1 candidates skipping a' == j
                    pos = i * (d - 1) + (a if a < j else a - 1)
                    part = shares[j][pos] if part is None else part + shares[j][pos]
                acc = part if acc is None else acc * part
        t_hat.append(acc)
    u_hat = []
    for y, t in zip(Y, t_hat):
        row = []
        for c in y:
            if c % pk.plaintext_modulus == 0:
                # 0 * t would be the trivial ciphertext of zero
                row.append(pk.encrypt(0, rng))
            else:
                row.append(c * t)
        u_hat.append(row)
    return FpsuResponse(t_hat, u_hat)


def fpsu_union(X: FuzzyDataset, response: FpsuResponse, sk, w: int) -> tuple[set[Point], int]:
    """X plus every recovered y_i with t_i != 0; also returns the zero count."""
    out = set(X.points)
    t_mod = sk.pk.plaintext_modulus
    zeros = 0
    for t_c, us in zip(response.t_hat, response.u_hat):
        t = sk.decrypt(t_c)
        if t == 0:
            zeros += 1
            continue
        t_inv = invert_plaintext(t, t_mod)
        y = tuple(sk.decrypt(u) * t_inv % t_mod for u in us)
        if any(c >= 1 << w for c in y):
            raise IntegrityError(f"recovered coordinate outside [0, 2^{w})")
        out.add(y)
    return out, zeros


# ---------------------------------------------------------------- parties

def fpsu_setup(config: FpsuConfig, rng_r: random.Random, rng_s: random.Random,
               channel: Optional[Channel] = None) -> tuple[OkherReceiverSetup, OkherSenderSetup]:
    """One OKHER setup shared by every per-dimension execution."""
    config.validate()
    o_r, o_s = okher_setup(config.scheme, config.okher_lambda, config.capacity, rng_r, rng_s,
                           channel, config.pir_backend, config.pir_scheme)
    config.check_modulus(o_r.keys.pk.plaintext_modulus)
    return o_r, o_s


class FpsuReceiver:
    def __init__(self, config: FpsuConfig, X: FuzzyDataset, rng: random.Random,
                 axis: Optional[int] = None, partition: Optional[Partition] = None):
        config.validate()
        if (X.d, X.n, X.delta, X.w) != (config.d, config.n, config.delta, config.w):
            raise PreconditionError("dataset does not match the configuration")
        self.config, self.X, self.rng = config, X, rng
        self.graph = build_induced_graph(X)
        self.axis = axis
        self.partition = partition
        v = config.variant
        if v is Variant.NG and not self.graph.is_null():
            i, j, mask = next(self.graph.edges())
            raise PreconditionError(f"ng needs a null graph: edge ({i}, {j}) labels {mask:#x}")
        if v is Variant.NF and len({x[0] for x in X.points}) != X.n:
            raise PreconditionError("nf needs distinct first coordinates")
        if v is Variant.EXC:
            if self.axis is None:
                self.axis = choose_exclusive_axis(self.graph)
            if self.axis is None or not is_a_exclusive(self.graph, self.axis):
                raise PreconditionError("exc needs an a-exclusive dataset")
        if v is Variant.LAY and self.partition is None:
            self.partition = lay_partition(X, self.graph)
        if v is Variant.STR:
            if self.partition is None:
                self.partition = choose_stripping(self.graph)
            elif not verify_strips(self.graph, self.partition):
                raise PreconditionError("supplied partition is not a valid stripping")
        self.setup: Optional[OkherReceiverSetup] = None
        self.blueprint: Optional[KeyBlueprint] = None

    @property
    def chi(self) -> int:
        return len(self.partition) if self.config.variant is Variant.LAY else 1

    def setup_message(self) -> bytes:
        c = self.config
        self._keys, self._encoder, msg = okher_receiver_init(c.scheme, c.okher_lambda, c.capacity, self.rng)
        c.check_modulus(self._keys.pk.plaintext_modulus)
        return msg

    def finish_setup(self, reply: bytes) -> None:
        self.setup = okher_receiver_complete(self._keys, self._encoder, self.config.okher_lambda, reply)

    def chromatic_message(self) -> bytes:
        return wire.u32(self.chi)

    def build(self) -> KeyBlueprint:
        X, t, rng, v = self.X, self.setup.keys.pk.plaintext_modulus, self.rng, self.config.variant
        if v is Variant.NG:
            return ng_build_kv(X, t, rng, self.graph)
        if v is Variant.NF:
            return nf_build_kv(X, t, rng)
        if v is Variant.LAY:
            return lay_build_kv(X, t, rng, self.partition)[1]
        if v is Variant.EXC:
            return exc_build_kv(X, self.axis, t, rng, self.graph)
        return str_build_kv(X, self.partition, t, rng, self.graph)

    def respond(self, query_msg: bytes) -> tuple[bytes, int]:
        r = wire.Reader(query_msg)
        queries = [PirQuery.from_bytes(b) for b in r.blob_list()]
        r.done()
        self.blueprint = bp = self.build()
        if len(queries) != len(bp.stores):
            raise FpsuError("query count does not match the number of stores")
        resps = [okher_resp(self.setup, store, q, self.rng) for store, q in zip(bp.stores, queries)]
        return wire.blob_list([x.to_bytes() for x in resps]), sum(x.n_ciphertexts for x in resps)

    def union(self, result_msg: bytes) -> set[Point]:
        resp = FpsuResponse.from_bytes(self.setup.keys.pk, result_msg)
        if len(resp.t_hat) != self.config.m or any(len(u) != self.config.d for u in resp.u_hat):
            raise FpsuError("result has the wrong shape")
        out, self.zero_count = fpsu_union(self.X, resp, self.setup.keys.sk, self.config.w)
        return out


class FpsuSender:
    def __init__(self, config: FpsuConfig, Y: Sequence[Point], rng: random.Random):
        config.validate()
        Y = [tuple(int(c) for c in y) for y in Y]
        if len(Y) != config.m or len(set(Y)) != len(Y):
            raise PreconditionError("sender set must hold m distinct points")
        for y in Y:
            if len(y) != config.d or any(not 0 <= c < 1 << config.w for c in y):
                raise PreconditionError(f"point {y} outside [0, 2^{config.w})^{config.d}")
        self.config, self.Y, self.rng = config, Y, rng
        self.chi = 1
        self.setup: Optional[OkherSenderSetup] = None

    def accept_setup(self, msg: bytes) -> bytes:
        c = self.config
        self.setup, reply = okher_sender_init(msg, c.okher_lambda, self.rng, c.pir_backend, c.pir_scheme)
        c.check_modulus(self.setup.pk.plaintext_modulus)
        if self.setup.sokvs.capacity != c.capacity:
            raise FpsuError("store capacity does not match the configuration")
        return reply

    def accept_chromatic(self, msg: bytes) -> None:
        r = wire.Reader(msg)
        self.chi = r.u32()
        r.done()
        if not 1 <= self.chi <= self.config.n:
            raise FpsuError("chromatic number out of range")

    def query_message(self) -> tuple[bytes, int, list[int]]:
        batches = fpsu_query(self.config.variant, self.Y, self.config.d, self.chi)
        self.states = []
        blobs, n_ct, sizes = [], 0, []
        for keys in batches:
            q, st = okher_query(self.setup, keys, self.rng)
            self.states.append(st)
            blobs.append(q.to_bytes())
            n_ct += q.n_ciphertexts
            sizes.append(st.pir_indices)
        return wire.blob_list(blobs), n_ct, sizes

    def result_message(self, resp_msg: bytes) -> tuple[bytes, int]:
        pk = self.setup.pk
        r = wire.Reader(resp_msg)
        resps = [OkherResponse.from_bytes(pk, b) for b in r.blob_list()]
        r.done()
        if len(resps) != len(self.states):
            raise FpsuError("response count does not match the queries")
        shares = [okher_decode(self.setup, resp, st) for resp, st in zip(resps, self.states)]
        out = fpsu_decode(self.config.variant, shares, self.Y, self.config.d, pk, self.rng, self.chi)
        return out.to_bytes(), out.n_ciphertexts


def _attributed(party: str, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        if not hasattr(exc, "party"):
            exc.party = party
        raise


@dataclass
class FpsuRun:
    result: set
    receiver: FpsuReceiver
    sender: FpsuSender


def execute_fpsu(config: FpsuConfig, X: FuzzyDataset, Y: Sequence[Point],
                 rng_r: random.Random, rng_s: random.Random, channel: Optional[Channel] = None,
                 axis: Optional[int] = None, partition: Optional[Partition] = None) -> FpsuRun:
    """Run both parties through ``channel``; keeps the party objects for inspection.

    Exceptions carry a ``party`` attribute naming the side that raised.
    """
    channel = channel or Channel()
    tr = channel.transcript
    receiver = _attributed("receiver", FpsuReceiver, config, X, rng_r, axis, partition)
    sender = _attributed("sender", FpsuSender, config, Y, rng_s)

    msg = channel.send(R_TO_S, "SETUP-R", _attributed("receiver", receiver.setup_message), phase="setup")
    reply = channel.send(S_TO_R, "SETUP-S", _attributed("sender", sender.accept_setup, msg), phase="setup")
    _attributed("receiver", receiver.finish_setup, reply)

    if config.variant is Variant.LAY:
        chi_msg = channel.send(R_TO_S, "CHROMATIC", receiver.chromatic_message())
        _attributed("sender", sender.accept_chromatic, chi_msg)
        tr.counters["chi"] = receiver.chi

    q, n_ct, sizes = _attributed("sender", sender.query_message)
    q = channel.send(S_TO_R, "QUERY", q, ciphertexts=n_ct)
    tr.counters["pir_indices"] = sizes

    resp, n_ct = _attributed("receiver", receiver.respond, q)
    resp = channel.send(R_TO_S, "RESP", resp, ciphertexts=n_ct)
    tr.counters["store_entries"] = receiver.blueprint.entries()
    tr.counters["right_len"] = receiver.setup.params.right_len

    res, n_ct = _attributed("sender", sender.result_message, resp)
    res = channel.send(S_TO_R, "RESULT", res, ciphertexts=n_ct)
    out = _attributed("receiver", receiver.union, res)
    tr.counters["zero_count"] = receiver.zero_count
    return FpsuRun(out, receiver, sender)


def run_fpsu(config: FpsuConfig, X: FuzzyDataset, Y: Sequence[Point],
             rng_r: random.Random, rng_s: random.Random, channel: Optional[Channel] = None,
             axis: Optional[int] = None, partition: Optional[Partition] = None) -> set[Point]:
    return execute_fpsu(config, X, Y, rng_r, rng_s, channel, axis, partition).result
