import random

import pytest

from fuzzypsu.pir import (CuckooFailure, PirBackend, PirError, PirQuery, PirReceiverMaterial,
                          PirResponse, bucket_count, cuckoo_place, layout_for, pir_decode,
                          pir_query, pir_resp, pir_setup)

BACKENDS = list(PirBackend)


def _roundtrip(backend, K, U, bits, seed):
    rng = random.Random(seed)
    o_r, o_s = pir_setup(None, 40, rng, backend)
    o_r = PirReceiverMaterial.from_bytes(o_r.to_bytes())       # as received over the wire
    q, J = pir_query(o_s, U, len(K), rng)
    q = PirQuery.from_bytes(q.to_bytes())
    resp = PirResponse.from_bytes(pir_resp(o_r, K, bits, q).to_bytes())
    return pir_decode(o_s, J, resp), q, J


def test_bucket_count():
    assert [bucket_count(M) for M in (0, 1, 2, 3, 32)] == [1, 2, 3, 5, 48]


def test_setup_material():
    o_r, o_s = pir_setup(None, 40, random.Random(1))
    assert o_s.keys is not None and o_r.pk == o_s.keys.pk
    assert not hasattr(o_r, "sk") and not hasattr(o_r, "keys")
    o_r2, o_s2 = pir_setup(None, 40, random.Random(1))
    assert o_s2.seed == o_s.seed
    assert layout_for(100, 8, 3, o_s.seed, 0) == layout_for(100, 8, 3, o_s2.seed, 0)
    clear_r, clear_s = pir_setup(None, 40, random.Random(1), PirBackend.INSECURE_CLEAR)
    assert clear_r.pk is None and clear_s.keys is None


@pytest.mark.parametrize("backend", BACKENDS)
def test_known_entries(backend):
    K = [1000 + 17 * i for i in range(8)]
    got, q, J = _roundtrip(backend, K, [2, 5], 16, 3)
    assert got == [K[2], K[5]]
    assert len(q.blocks) == bucket_count(2)


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_index_structure(backend):
    got, q, J = _roundtrip(backend, list(range(8)), [1], 8, 4)
    assert got == [1]
    assert len(q.blocks) == bucket_count(1) and len(J.bucket_of) == 1


@pytest.mark.parametrize("backend", BACKENDS)
def test_empty_batch(backend):
    got, _, _ = _roundtrip(backend, list(range(8)), [], 8, 5)
    assert got == []


@pytest.mark.parametrize("backend", BACKENDS)
def test_composition_identity_random(backend):
    rng = random.Random(6)
    for trial in range(100):
        N = rng.randint(1, 4096)
        M = rng.randint(1, min(32, N))
        bits = rng.choice((8, 64, 130))
        K = [rng.getrandbits(bits) for _ in range(N)]
        U = rng.sample(range(N), M)
        got, q, J = _roundtrip(backend, K, U, bits, trial)
        assert got == [K[u] for u in U]
        buckets = list(J.bucket_of.values())
        assert len(buckets) == len(set(buckets))


def test_multi_chunk_entries():
    # entries wider than the mock PIR plaintext modulus split into several chunks
    rng = random.Random(7)
    K = [rng.getrandbits(4200) for _ in range(20)]
    got, _, _ = _roundtrip(PirBackend.REFERENCE_LHE, K, [0, 7, 19], 4200, 8)
    assert got == [K[0], K[7], K[19]]


def test_deterministic_assignment():
    _, q1, J1 = _roundtrip(PirBackend.REFERENCE_LHE, list(range(50)), [3, 9, 27], 8, 9)
    _, q2, J2 = _roundtrip(PirBackend.REFERENCE_LHE, list(range(50)), [3, 9, 27], 8, 9)
    assert J1.bucket_of == J2.bucket_of and q1.to_bytes() == q2.to_bytes()


def test_reference_query_has_no_plain_indices():
    rng = random.Random(10)
    o_r, o_s = pir_setup(None, 40, rng)
    q, J = pir_query(o_s, [5, 6], 64, rng)
    width = o_s.keys.pk.serialized_cipher_len
    for block, members in zip(q.blocks, J.layout.members()):
        assert len(block) == width * len(members)     # only pk1-ciphertexts
    assert q.n_ciphertexts == sum(len(m) for m in J.layout.members())


def test_cuckoo_at_most_one_per_bucket():
    rng = random.Random(11)
    for _ in range(200):
        M = rng.randint(1, 32)
        lay = layout_for(4096, M, 3, rng.getrandbits(64), 0)
        place = cuckoo_place(lay, rng.sample(range(4096), M), rng)
        if place is None:
            continue
        assert len(set(place.values())) == len(place)
        cand = lay.candidates()
        assert all(b in cand[u] for u, b in place.items())


def test_cuckoo_impossible_instance_fails():
    # two buckets total cannot host three indices
    lay = layout_for(10, 1, 3, 1, 0)
    assert lay.buckets == 2
    assert cuckoo_place(lay, [0, 1, 2], random.Random(0)) is None


def test_errors():
    rng = random.Random(12)
    o_r, o_s = pir_setup(None, 40, rng)
    with pytest.raises(PirError):
        pir_query(o_s, [1, 1], 8, rng)
    with pytest.raises(PirError):
        pir_query(o_s, [8], 8, rng)
    q, J = pir_query(o_s, [1], 8, rng)
    with pytest.raises(PirError):
        pir_resp(o_r, list(range(9)), 8, q)
    clear_r, _ = pir_setup(None, 40, rng, PirBackend.INSECURE_CLEAR)
    with pytest.raises(PirError):
        pir_resp(clear_r, list(range(8)), 8, q)
    resp = pir_resp(o_r, list(range(8)), 8, q)
    resp.buckets[J.bucket_of[1]] = resp.buckets[J.bucket_of[1]][:-1]
    with pytest.raises(PirError):
        pir_decode(o_s, J, resp)
    assert issubclass(CuckooFailure, PirError)
