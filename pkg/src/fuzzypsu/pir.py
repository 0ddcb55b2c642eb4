"""Batch PIR with cuckoo bucketing.

Database indices are spread over ``b = ceil(1.5 M)`` buckets by ``z = 3``
hash choices; the sender cuckoo-places its ``M`` wanted indices so each
bucket holds at most one, then sends one encrypted selection vector per
bucket.  Backends:

* ``reference-lhe``: selectors are encryptions under the sender's PIR key
  and each bucket answer is ``sum_k chunk_k * Enc(sel_k)``.
* ``insecure-clear``: the bucket's wanted index is sent in clear.  Only
  for debugging; it leaks the access pattern.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from fuzzypsu import kernels, wire
from fuzzypsu.crypto import (KeyPair, PublicKey, SchemeDescriptor, SecretKey, e_setup,
                             public_key_from_bytes)

BUCKET_FACTOR = 1.5
NUM_HASHES = 3
MAX_KICKS = 500
MAX_EPOCHS = 64


class PirError(ValueError):
    pass


class CuckooFailure(PirError):
    pass


class PirBackend(enum.Enum):
    REFERENCE_LHE = "reference-lhe"
    INSECURE_CLEAR = "insecure-clear"

    @property
    def tag(self) -> int:
        return 0x11 if self is PirBackend.REFERENCE_LHE else 0x12


_BACKENDS = {b.tag: b for b in PirBackend}


def bucket_count(M: int) -> int:
    return max(1, math.ceil(BUCKET_FACTOR * M))


@dataclass(frozen=True)
class PirLayout:
    n_items: int
    batch: int
    buckets: int
    z: int
    seed: int

    def candidates(self):
        return kernels.bucket_candidates(self.n_items, self.buckets, self.z, self.seed)

    def members(self) -> list[list[int]]:
        """Database indices per bucket, ascending."""
        out: list[list[int]] = [[] for _ in range(self.buckets)]
        for i, row in enumerate(self.candidates().tolist()):
            for b in row:
                out[b].append(i)
        return out


def layout_for(n_items: int, batch: int, z: int, base_seed: int, epoch: int) -> PirLayout:
    seed = kernels.splitmix64((base_seed + 0x632BE59BD9B4E019 * (epoch + 1)) & ((1 << 64) - 1))
    return PirLayout(n_items, batch, bucket_count(batch), z, seed)


@dataclass(frozen=True)
class PirReceiverMaterial:
    backend: PirBackend
    seed: int
    z: int
    pk: Optional[PublicKey]

    def to_bytes(self) -> bytes:
        pkb = self.pk.to_bytes() if self.pk is not None else b""
        return wire.u8(self.backend.tag) + wire.u64(self.seed) + wire.u8(self.z) + wire.blob(pkb)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PirReceiverMaterial":
        r = wire.Reader(data)
        backend = _BACKENDS[r.u8()]
        seed, z, pkb = r.u64(), r.u8(), r.blob()
        r.done()
        return cls(backend, seed, z, public_key_from_bytes(pkb) if pkb else None)


@dataclass(frozen=True)
class PirSenderMaterial:
    backend: PirBackend
    seed: int
    z: int
    keys: Optional[KeyPair]

    @property
    def receiver_view(self) -> PirReceiverMaterial:
        return PirReceiverMaterial(self.backend, self.seed, self.z,
                                   self.keys.pk if self.keys else None)


def pir_setup(kappa: Optional[int], lam: int, rng: random.Random,
              backend: PirBackend = PirBackend.REFERENCE_LHE,
              scheme: Optional[SchemeDescriptor] = None,
              z: int = NUM_HASHES) -> tuple[PirReceiverMaterial, PirSenderMaterial]:
    """Sender-run setup; returns (O_R, O_S).  ``lam`` is kept for interface parity."""
    keys = None
    if backend is PirBackend.REFERENCE_LHE:
        keys = e_setup(scheme or SchemeDescriptor.mock(), rng)
    sender = PirSenderMaterial(backend, rng.getrandbits(64), z, keys)
    return sender.receiver_view, sender


@dataclass
class PirQuery:
    backend: PirBackend
    n_items: int
    batch: int
    epoch: int
    blocks: list[bytes]
    n_ciphertexts: int = 0

    def to_bytes(self) -> bytes:
        return (wire.u8(self.backend.tag) + wire.u32(self.n_items) + wire.u32(self.batch)
                + wire.u32(self.epoch) + wire.blob_list(self.blocks))

    @classmethod
    def from_bytes(cls, data: bytes) -> "PirQuery":
        r = wire.Reader(data)
        tag = r.u8()
        if tag not in _BACKENDS:
            raise PirError("unknown PIR backend tag")
        q = cls(_BACKENDS[tag], r.u32(), r.u32(), r.u32(), r.blob_list())
        r.done()
        return q


@dataclass
class PirState:
    """Sender-private query state J."""

    wanted: list[int]
    layout: PirLayout
    bucket_of: dict[int, int] = field(default_factory=dict)


@dataclass
class PirResponse:
    backend: PirBackend
    n_chunks: int
    buckets: list[bytes]
    n_ciphertexts: int = 0

    def to_bytes(self) -> bytes:
        return (wire.u8(self.backend.tag) + wire.u32(self.n_chunks) + wire.blob_list(self.buckets))

    @classmethod
    def from_bytes(cls, data: bytes) -> "PirResponse":
        r = wire.Reader(data)
        tag = r.u8()
        if tag not in _BACKENDS:
            raise PirError("unknown PIR backend tag")
        out = cls(_BACKENDS[tag], r.u32(), r.blob_list())
        r.done()
        return out


def cuckoo_place(layout: PirLayout, wanted: Sequence[int], rng: random.Random) -> Optional[dict[int, int]]:
    """Map each wanted index to one of its candidate buckets, at most one per bucket."""
    cand = layout.candidates()
    owner: dict[int, int] = {}
    where: dict[int, int] = {}
    for u in wanted:
        cur = u
        for _ in range(MAX_KICKS):
            opts = cand[cur].tolist()
            free = next((b for b in opts if b not in owner), None)
            if free is not None:
                owner[free] = cur
                where[cur] = free
                break
            b = opts[rng.randrange(len(opts))]
            evicted = owner[b]
            owner[b] = cur
            where[cur] = b
            del where[evicted]
            cur = evicted
        else:
            return None
    return where


def pir_query(O_S: PirSenderMaterial, U: Sequence[int], n_items: int,
              rng: random.Random) -> tuple[PirQuery, PirState]:
    U = [int(u) for u in U]
    if len(set(U)) != len(U):
        raise PirError("duplicate indices in the batch")
    if any(not 0 <= u < n_items for u in U):
        raise PirError(f"index outside [0, {n_items})")
    for epoch in range(MAX_EPOCHS):
        layout = layout_for(n_items, len(U), O_S.z, O_S.seed, epoch)
        placement = cuckoo_place(layout, U, rng)
        if placement is not None:
            break
    else:
        raise CuckooFailure("cuckoo placement failed for every layout epoch")
    target = {b: u for u, b in placement.items()}
    members = layout.members()
    blocks: list[bytes] = []
    n_ct = 0
    if O_S.backend is PirBackend.REFERENCE_LHE:
        sk = O_S.keys.sk
        for b, mem in enumerate(members):
            want = target.get(b)
            sel = [sk.encrypt(int(i == want), rng).to_bytes() for i in mem]
            n_ct += len(sel)
            blocks.append(b"".join(sel))
    else:
        for b in range(layout.buckets):
            want = target.get(b)
            blocks.append(wire.u8(want is not None) + wire.u64(want if want is not None else 0))
    q = PirQuery(O_S.backend, n_items, len(U), epoch, blocks, n_ct)
    return q, PirState(U, layout, placement)


def _chunk_bits(pk: PublicKey) -> int:
    return pk.plaintext_modulus.bit_length() - 1


def pir_resp(O_R: PirReceiverMaterial, K: Sequence[int], entry_bits: int,
             query: PirQuery) -> PirResponse:
    """Answer a bucketed query over integer entries of ``entry_bits`` bits."""
    if query.backend is not O_R.backend:
        raise PirError("backend mismatch")
    if len(K) != query.n_items:
        raise PirError(f"layout is for {query.n_items} entries, database has {len(K)}")
    layout = layout_for(query.n_items, query.batch, O_R.z, O_R.seed, query.epoch)
    if len(query.blocks) != layout.buckets:
        raise PirError("bucket count does not match the layout")
    members = layout.members()
    out: list[bytes] = []
    if O_R.backend is PirBackend.REFERENCE_LHE:
        pk = O_R.pk
        cb = _chunk_bits(pk)
        n_chunks = max(1, math.ceil(entry_bits / cb))
        cmask = (1 << cb) - 1
        width = pk.serialized_cipher_len
        for mem, block in zip(members, query.blocks):
            if len(block) != width * len(mem):
                raise PirError("selector block has the wrong length")
            sels = [pk.cipher_from_bytes(block[t * width:(t + 1) * width]).payload
                    for t in range(len(mem))]
            parts = []
            for c in range(n_chunks):
                acc = pk._zero()
                for i, s in zip(mem, sels):
                    chunk = (K[i] >> (c * cb)) & cmask
                    if chunk:
                        acc = pk._add(acc, pk._smul(chunk, s))
                parts.append(pk.wrap(acc).to_bytes())
            out.append(b"".join(parts))
        return PirResponse(O_R.backend, n_chunks, out, n_chunks * len(out))
    nbytes = max(1, (entry_bits + 7) // 8)
    for block in query.blocks:
        r = wire.Reader(block)
        real, idx = r.u8(), r.u64()
        if idx >= len(K):
            raise PirError("index outside the database")
        out.append(K[idx].to_bytes(nbytes, "big") if real else b"\0" * nbytes)
    return PirResponse(O_R.backend, 1, out)


def pir_decode(O_S: PirSenderMaterial, J: PirState, response: PirResponse) -> list[int]:
    """Entries K[u] for u in the queried order."""
    if len(response.buckets) != J.layout.buckets:
        raise PirError("response bucket count does not match the query")
    out = []
    if O_S.backend is PirBackend.REFERENCE_LHE:
        pk, sk = O_S.keys.pk, O_S.keys.sk
        cb = _chunk_bits(pk)
        width = pk.serialized_cipher_len
        for u in J.wanted:
            blob = response.buckets[J.bucket_of[u]]
            if len(blob) != width * response.n_chunks:
                raise PirError("corrupted response length")
            val = 0
            for c in range(response.n_chunks):
                val |= sk.decrypt(pk.cipher_from_bytes(blob[c * width:(c + 1) * width])) << (c * cb)
            out.append(val)
        return out
    for u in J.wanted:
        out.append(int.from_bytes(response.buckets[J.bucket_of[u]], "big"))
    return out
