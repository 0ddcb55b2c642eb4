"""Oblivious key homomorphic-encryption retrieval (OKHER).

The receiver freshly encrypts its values, encodes them in a split OKVS and
keeps the large half L.  The sender fetches the few L positions its keys
touch through batch PIR, receives the small half R in full, and recombines
``<l(q)||r(q), L||R>`` into a live ciphertext per query: the stored value
for a programmed key, a random-looking ciphertext otherwise.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from fuzzypsu import wire
from fuzzypsu.crypto import (CipherValue, KeyPair, PublicKey, SchemeDescriptor, e_setup,
                             public_key_from_bytes)
from fuzzypsu.pir import (PirBackend, PirQuery, PirReceiverMaterial, PirResponse,
                          PirSenderMaterial, PirState, pir_decode, pir_query, pir_resp, pir_setup)
from fuzzypsu.sokvs import (ALPHA, SokvsEncoder, SokvsParams, WellFormednessError, decode_right,
                            sokvs_encode, sokvs_setup)
from fuzzypsu.transcript import R_TO_S, S_TO_R, Channel


class OkherError(ValueError):
    pass


def nz_indices(v: Sequence[int], alpha: int = ALPHA) -> tuple[int, ...]:
    """Positions of the nonzero entries of a 0/1 row of weight ``alpha``."""
    out = tuple(i for i, x in enumerate(v) if x)
    if len(out) != alpha:
        raise OkherError(f"row has weight {len(out)}, expected {alpha}")
    return out


@dataclass(frozen=True)
class MergeResult:
    U: tuple[int, ...]
    beta: tuple[tuple[int, ...], ...]

    @property
    def M(self) -> int:
        return len(self.U)


def merge(rows: Sequence[Sequence[int]]) -> MergeResult:
    """Deduplicate the indices of all rows; ``U[beta[i][l]] == rows[i][l]``."""
    pos: dict[int, int] = {}
    beta = []
    for row in rows:
        beta.append(tuple(pos.setdefault(int(x), len(pos)) for x in row))
    return MergeResult(tuple(pos), tuple(beta))


@dataclass
class OkherReceiverSetup:
    keys: KeyPair
    encoder: SokvsEncoder
    pir: PirReceiverMaterial
    lam: int

    @property
    def params(self) -> SokvsParams:
        return self.encoder.params


@dataclass
class OkherSenderSetup:
    pk: PublicKey
    sokvs: SokvsParams
    pir: PirSenderMaterial
    lam: int


def cts_to_bytes(cts: Sequence[CipherValue]) -> bytes:
    return wire.blob_list([c.to_bytes() for c in cts])


def cts_from_bytes(pk: PublicKey, data: bytes | wire.Reader) -> list[CipherValue]:
    r = data if isinstance(data, wire.Reader) else wire.Reader(data)
    out = [pk.cipher_from_bytes(b) for b in r.blob_list()]
    if not isinstance(data, wire.Reader):
        r.done()
    return out


def okher_receiver_init(descriptor: SchemeDescriptor, lam: int, capacity: int,
                        rng: random.Random) -> tuple[KeyPair, SokvsEncoder, bytes]:
    keys = e_setup(descriptor, rng)
    encoder, params = sokvs_setup(descriptor.kappa, lam, capacity, rng)
    return keys, encoder, wire.blob(keys.pk.to_bytes()) + wire.blob(params.to_bytes())


def okher_sender_init(msg: bytes, lam: int, rng: random.Random,
                      pir_backend: PirBackend = PirBackend.REFERENCE_LHE,
                      pir_scheme: Optional[SchemeDescriptor] = None) -> tuple[OkherSenderSetup, bytes]:
    r = wire.Reader(msg)
    pk = public_key_from_bytes(r.blob())
    params = SokvsParams.from_bytes(r.blob())
    r.done()
    kappa = pir_scheme.kappa if pir_scheme is not None else None
    o_r, o_s = pir_setup(kappa, lam, rng, pir_backend, pir_scheme)
    return OkherSenderSetup(pk, params, o_s, lam), o_r.to_bytes()


def okher_receiver_complete(keys: KeyPair, encoder: SokvsEncoder, lam: int,
                            reply: bytes) -> OkherReceiverSetup:
    return OkherReceiverSetup(keys, encoder, PirReceiverMaterial.from_bytes(reply), lam)


def okher_setup(descriptor: SchemeDescriptor, lam: int, capacity: int,
                rng_r: random.Random, rng_s: random.Random,
                channel: Optional[Channel] = None,
                pir_backend: PirBackend = PirBackend.REFERENCE_LHE,
                pir_scheme: Optional[SchemeDescriptor] = None,
                tags: tuple[str, str] = ("SETUP-R", "SETUP-S"),
                ) -> tuple[OkherReceiverSetup, OkherSenderSetup]:
    """Both parties' setup: R sends pk and the OKVS params, S answers with PIR material."""
    channel = channel or Channel()
    keys, encoder, msg = okher_receiver_init(descriptor, lam, capacity, rng_r)
    msg = channel.send(R_TO_S, tags[0], msg, phase="setup")
    o_s, reply = okher_sender_init(msg, lam, rng_s, pir_backend, pir_scheme)
    reply = channel.send(S_TO_R, tags[1], reply, phase="setup")
    return okher_receiver_complete(keys, encoder, lam, reply), o_s


@dataclass
class OkherQueryState:
    keys: list[bytes]
    beta: tuple[tuple[int, ...], ...]
    pir_state: PirState

    @property
    def pir_indices(self) -> int:
        return len(self.pir_state.wanted)


def okher_query(O_S: OkherSenderSetup, Q: Sequence[bytes], rng: random.Random,
                pad: bool = True) -> tuple[PirQuery, OkherQueryState]:
    """PIR query for every left position touched by ``Q``.

    With ``pad`` the index batch is topped up with random unused positions
    to ``min(alpha*m, left_len)`` so its size does not depend on how many
    positions the keys happen to share.
    """
    if not Q:
        raise OkherError("need at least one query key")
    params = O_S.sokvs
    merged = merge([params.row_left(q) for q in Q])
    U = list(merged.U)
    if pad:
        target = min(params.alpha * len(Q), params.left_len)
        have = set(U)
        while len(U) < target:
            x = rng.randrange(params.left_len)
            if x not in have:
                have.add(x)
                U.append(x)
    query, J = pir_query(O_S.pir, U, params.left_len, rng)
    return query, OkherQueryState(list(Q), merged.beta, J)


@dataclass
class OkherResponse:
    R: list[CipherValue]
    pir: PirResponse

    @property
    def n_ciphertexts(self) -> int:
        return len(self.R) + self.pir.n_ciphertexts

    def to_bytes(self) -> bytes:
        return cts_to_bytes(self.R) + wire.blob(self.pir.to_bytes())

    @classmethod
    def from_bytes(cls, pk: PublicKey, data: bytes) -> "OkherResponse":
        r = wire.Reader(data)
        R = cts_from_bytes(pk, r)
        pir = PirResponse.from_bytes(r.blob())
        r.done()
        return cls(R, pir)


def okher_resp(O_R: OkherReceiverSetup, KV: Sequence[tuple[bytes, int]], query: PirQuery,
               rng: random.Random) -> OkherResponse:
    """Encrypt ``KV`` afresh, encode it and answer the PIR query over L."""
    keys = [k for k, _ in KV]
    if len(set(keys)) != len(keys):
        raise WellFormednessError("duplicate keys in the key-value set")
    sk = O_R.keys.sk
    KC = [(k, sk.encrypt(v, rng)) for k, v in KV]
    enc = sokvs_encode(O_R.encoder, KC, O_R.keys.pk, rng)
    if enc.params != O_R.params:
        raise OkherError("encoding reseeded after setup")
    pk = O_R.keys.pk
    entries = [c.payload for c in enc.L]
    resp = pir_resp(O_R.pir, entries, pk.cipher_modulus.bit_length(), query)
    return OkherResponse(enc.R, resp)


def okher_decode(O_S: OkherSenderSetup, response: OkherResponse,
                 state: OkherQueryState) -> list[CipherValue]:
    params, pk = O_S.sokvs, O_S.pk
    if len(response.R) != params.right_len:
        raise OkherError(f"R has {len(response.R)} entries, expected {params.right_len}")
    W = [pk.wrap(x) for x in pir_decode(O_S.pir, state.pir_state, response.pir)]
    out = []
    for q, row in zip(state.keys, state.beta):
        acc = W[row[0]]
        for j in row[1:]:
            acc = acc + W[j]
        out.append(decode_right(params, response.R, q, acc))
    return out
