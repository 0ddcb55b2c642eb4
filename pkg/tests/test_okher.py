import random

import pytest

from fuzzypsu.crypto import SchemeDescriptor
from fuzzypsu.okher import (OkherError, OkherResponse, merge, nz_indices, okher_decode,
                            okher_query, okher_resp, okher_setup)
from fuzzypsu.pir import PirBackend, PirQuery
from fuzzypsu.sokvs import WellFormednessError, right_width
from fuzzypsu.transcript import R_TO_S, S_TO_R, Channel


def _setup(N, seed=0, scheme=None, backend=PirBackend.REFERENCE_LHE, channel=None):
    rr, rs = random.Random(seed), random.Random(seed + 1000)
    o_r, o_s = okher_setup(scheme or SchemeDescriptor.mock(), 40, N, rr, rs, channel, backend)
    return o_r, o_s, rr, rs


def _exec(o_r, o_s, KV, Q, rr, rs):
    query, state = okher_query(o_s, Q, rs)
    query = PirQuery.from_bytes(query.to_bytes())
    resp = okher_resp(o_r, KV, query, rr)
    resp = OkherResponse.from_bytes(o_s.pk, resp.to_bytes())
    return okher_decode(o_s, resp, state), query, state, resp


def test_nz_indices():
    row = [0] * 10
    for i in (2, 7, 9):
        row[i] = 1
    assert nz_indices(row) == (2, 7, 9)
    with pytest.raises(OkherError):
        nz_indices([1, 1, 0, 0])


def test_merge_examples():
    r = merge([(1, 2, 3), (3, 4, 5)])
    assert r.U == (1, 2, 3, 4, 5)
    assert r.beta == ((0, 1, 2), (2, 3, 4))   # 0-based positions into U
    assert merge([(4, 6, 8), (4, 6, 8)]).M == 3


def test_merge_reexpansion_random():
    rng = random.Random(1)
    for _ in range(200):
        rows = [tuple(rng.sample(range(30), 3)) for _ in range(rng.randint(1, 12))]
        r = merge(rows)
        assert len(set(r.U)) == r.M <= 3 * len(rows)
        assert all(tuple(r.U[j] for j in b) == row for b, row in zip(r.beta, rows))


def test_setup_structure():
    ch = Channel()
    o_r, o_s, _, _ = _setup(20, channel=ch)
    assert hasattr(o_r.keys, "sk") and not hasattr(o_s, "sk") and not hasattr(o_s, "keys")
    assert o_r.keys.pk == o_s.pk and o_r.params == o_s.sokvs
    tr = ch.transcript
    assert [m.direction for m in tr.messages] == [R_TO_S, S_TO_R]
    assert tr.setup_round_trips == 1


def test_roundtrip_single_value():
    o_r, o_s, rr, rs = _setup(10)
    KV = [(b"key-%d" % i, 100 + i) for i in range(10)]
    KV[3] = (b"target", 7)
    out, *_ = _exec(o_r, o_s, KV, [b"target"], rr, rs)
    assert o_r.keys.sk.decrypt(out[0]) == 7
    # the retrieved value is a live ciphertext
    bumped = out[0] + o_s.pk.encrypt(1, rs)
    assert o_r.keys.sk.decrypt(bumped) == 8


def test_fresh_key_is_not_a_programmed_value():
    o_r, o_s, rr, rs = _setup(50, seed=2)
    KV = [(b"k%d" % i, i * 1000 + 1) for i in range(50)]
    vals = {v for _, v in KV}
    for t in range(100):
        out, *_ = _exec(o_r, o_s, KV, [b"fresh%d" % t], rr, rs)
        assert o_r.keys.sk.decrypt(out[0]) not in vals


def test_mixed_batch_against_map_lookup():
    o_r, o_s, rr, rs = _setup(1000, seed=3)
    rng = random.Random(4)
    KV = [(rng.randbytes(10), rng.randrange(1 << 40)) for _ in range(1000)]
    table = dict(KV)
    Q = [k for k, _ in rng.sample(KV, 10)] + [rng.randbytes(11) for _ in range(10)]
    rng.shuffle(Q)
    out, query, state, resp = _exec(o_r, o_s, KV, Q, rr, rs)
    for q, e in zip(Q, out):
        if q in table:
            assert o_r.keys.sk.decrypt(e) == table[q]
        else:
            assert o_r.keys.sk.decrypt(e) not in table.values()
    assert len(resp.R) == right_width(40, 1000)
    assert state.pir_indices <= 3 * len(Q)


def test_index_counts():
    o_r, o_s, rr, rs = _setup(100, seed=5)
    _, state = okher_query(o_s, [b"one"], rs)
    assert state.pir_indices == 3
    _, state = okher_query(o_s, [b"same", b"same"], rs, pad=False)
    assert state.pir_indices == 3
    rng = random.Random(6)
    for _ in range(20):
        Q = [rng.randbytes(8) for _ in range(rng.randint(1, 15))]
        _, state = okher_query(o_s, Q, rs)
        assert state.pir_indices == min(3 * len(Q), o_s.sokvs.left_len)


def test_r_width_independent_of_m():
    o_r, o_s, rr, rs = _setup(30, seed=7)
    KV = [(b"%d" % i, i) for i in range(30)]
    widths = {len(_exec(o_r, o_s, KV, [b"q%d" % j for j in range(m)], rr, rs)[3].R) for m in (1, 5, 12)}
    assert widths == {o_s.sokvs.right_len}


def test_single_pair_store_sizing():
    o_r, o_s, rr, rs = _setup(1, seed=8)
    out, query, state, resp = _exec(o_r, o_s, [(b"only", 5)], [b"only"], rr, rs)
    assert o_r.keys.sk.decrypt(out[0]) == 5
    assert len(resp.R) == right_width(40, 1)
    assert len(resp.pir.buckets) == len(query.blocks)


def test_fresh_encryption_per_execution():
    o_r, o_s, rr, rs = _setup(5, seed=9)
    KV = [(b"%d" % i, i) for i in range(5)]
    _, _, _, r1 = _exec(o_r, o_s, KV, [b"0"], rr, rs)
    _, _, _, r2 = _exec(o_r, o_s, KV, [b"0"], rr, rs)
    assert r1.to_bytes() != r2.to_bytes()


def _left_entries_in_response(backend, monkeypatch):
    import fuzzypsu.okher as okher_mod
    captured = []
    real = okher_mod.sokvs_encode

    def spy(*args, **kw):
        enc = real(*args, **kw)
        captured.append(enc)
        return enc

    monkeypatch.setattr(okher_mod, "sokvs_encode", spy)
    o_r, o_s, rr, rs = _setup(40, seed=10, backend=backend)
    KV = [(b"%d" % i, i) for i in range(40)]
    query, state = okher_query(o_s, [b"1", b"2"], rs)
    wire_bytes = okher_resp(o_r, KV, query, rr).to_bytes()
    (enc,) = captured
    width = o_s.pk.cipher_width
    found = 0
    for c in enc.L:
        raw = c.payload.to_bytes(width, "big")
        found += raw in wire_bytes
    return found, len(state.pir_state.wanted)


def test_left_vector_never_sent(monkeypatch):
    found, _ = _left_entries_in_response(PirBackend.REFERENCE_LHE, monkeypatch)
    assert found == 0


def test_clear_backend_leaks_exactly_the_requested_entries(monkeypatch):
    # positive control for the scan above
    found, wanted = _left_entries_in_response(PirBackend.INSECURE_CLEAR, monkeypatch)
    assert found == wanted


def test_paillier_and_clear_backend():
    o_r, o_s, rr, rs = _setup(20, seed=11, scheme=SchemeDescriptor.residuosity())
    KV = [(b"%d" % i, 3 * i) for i in range(20)]
    out, *_ = _exec(o_r, o_s, KV, [b"4", b"x"], rr, rs)
    assert o_r.keys.sk.decrypt(out[0]) == 12
    o_r, o_s, rr, rs = _setup(20, seed=12, backend=PirBackend.INSECURE_CLEAR)
    out, *_ = _exec(o_r, o_s, KV, [b"5"], rr, rs)
    assert o_r.keys.sk.decrypt(out[0]) == 15


def test_errors():
    o_r, o_s, rr, rs = _setup(4, seed=13)
    with pytest.raises(OkherError):
        okher_query(o_s, [], rs)
    query, state = okher_query(o_s, [b"a"], rs)
    with pytest.raises(WellFormednessError):
        okher_resp(o_r, [(b"a", 1), (b"a", 2)], query, rr)
    resp = okher_resp(o_r, [(b"a", 1)], query, rr)
    resp.R.pop()
    with pytest.raises(OkherError):
        okher_decode(o_s, resp, state)
