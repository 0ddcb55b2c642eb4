"""Acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line that the conftest prints in the terminal
summary under "acceptance criteria".
"""

import functools
import math
import random
import time

import pytest
from scipy.stats import chisquare

from conftest import ACCEPTANCE
from fuzzypsu.crypto import SchemeDescriptor, e_setup
from fuzzypsu.fpsu import Variant
from fuzzypsu.graph import (StripsFailed, build_induced_graph, degree_bound, dsatur,
                            strip_by_theorem, strips)
from fuzzypsu.harness import (DatasetSpec, Structure, gen_dataset, grid_spec, run_protocol,
                              run_trial)
from fuzzypsu.okher import okher_decode, okher_query, okher_resp, okher_setup
from fuzzypsu.pir import PirBackend, bucket_count, pir_decode, pir_query, pir_resp, pir_setup
from fuzzypsu.sokvs import EncodeFailure, right_width, sokvs_decode_local, sokvs_encode, sokvs_setup

from oracles import edge_labels, exclusive, labeled_degree, part_edge_free

TRIALS = 200
ALPHA = 3
MOCK_BUDGET_S = 300
LHE_BUDGET_S = 600


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kw):
            try:
                detail = fn(*args, **kw)
            except BaseException as exc:
                ACCEPTANCE[name] = (False, f"{type(exc).__name__}: {str(exc).splitlines()[0][:150]}"
                                    if str(exc) else type(exc).__name__)
                raise
            ACCEPTANCE[name] = (True, detail or "")
        return inner
    return wrap


_TRIALS: dict = {}


def _trials(variant, scheme=None, n_choices=(8, 16, 32)):
    key = (variant, scheme, n_choices)
    if key not in _TRIALS:
        t0 = time.perf_counter()
        outs = [run_trial(variant, s, scheme, n_choices) for s in range(TRIALS)]
        _TRIALS[key] = (outs, time.perf_counter() - t0)
    return _TRIALS[key]


# ---------------------------------------------------------------- 1, 2, 4

@pytest.mark.parametrize("variant", list(Variant), ids=lambda v: v.value)
def test_c1_oracle_equivalence_mock(variant):
    @criterion(f"1 oracle equivalence {variant.value} (mock-fhe)")
    def check():
        outs, secs = _trials(variant)
        ok = sum(o.matches for o in outs)
        assert ok == TRIALS, f"{ok}/{TRIALS} match, failing seeds {[o.seed for o in outs if not o.matches][:10]}"
        assert secs < MOCK_BUDGET_S, f"{secs:.0f}s over the {MOCK_BUDGET_S}s target"
        return f"{ok}/{TRIALS} in {secs:.0f}s"
    check()


def test_c1_oracle_equivalence_ng_residuosity():
    @criterion("1 oracle equivalence ng (residuosity LHE, n<=16)")
    def check():
        outs, secs = _trials(Variant.NG, SchemeDescriptor.residuosity(), (8, 16))
        ok = sum(o.matches for o in outs)
        assert ok == TRIALS, f"{ok}/{TRIALS} match"
        assert secs < LHE_BUDGET_S, f"{secs:.0f}s over the {LHE_BUDGET_S}s target"
        return f"{ok}/{TRIALS} in {secs:.0f}s"
    check()


@criterion("2 leakage law on every trial of 1")
def test_c2_leakage_law():
    total = 0
    for key in list(_TRIALS) or [(v, None, (8, 16, 32)) for v in Variant]:
        outs, _ = _trials(*key)
        bad = [o.seed for o in outs if o.zero_count != o.member_count]
        assert not bad, f"{key[0].value}: zero count differs on seeds {bad[:10]}"
        total += len(outs)
    return f"{total} trials, zero count == membership count"


@criterion("4 count laws on every trial of 1")
def test_c4_count_laws():
    checked = 0
    for variant in Variant:
        outs, _ = _trials(variant)
        for o in outs:
            s, c = o.spec, o.transcript.counters
            side = 2 * s.delta + 1
            if variant in (Variant.EXC, Variant.STR):
                cap, stores, per = side * side * s.n, s.d, ALPHA * s.m * (s.d - 1)
            elif variant is Variant.NF:
                cap, stores, per = side * s.n, s.d - 1, ALPHA * s.m
            else:
                cap, stores, per = side * s.n, s.d, ALPHA * s.m
            if variant is Variant.LAY:
                per *= c["chi"]
            assert c["store_entries"] == [cap] * stores, (variant, o.seed, c["store_entries"])
            assert len(c["pir_indices"]) == stores and max(c["pir_indices"]) <= per, (variant, o.seed)
            lam_okher = 40 + math.ceil(math.log2(s.d))
            assert c["right_len"] == lam_okher + math.ceil(math.log2(cap)) + 8, (variant, o.seed)
            assert o.transcript.rounds == (4 if variant is Variant.LAY else 3), (variant, o.seed)
            assert o.transcript.setup_round_trips == 1
            checked += 1
    return f"{checked} transcripts: entries, PIR indices, |R|, rounds"


# ---------------------------------------------------------------- 3

@criterion("3 OKHER N=1000 m=20 (10 matching) x100")
def test_c3_okher():
    rng = random.Random(3)
    hit_ok = miss_ok = 0
    for rep in range(100):
        rr, rs = random.Random(rng.getrandbits(64)), random.Random(rng.getrandbits(64))
        o_r, o_s = okher_setup(SchemeDescriptor.mock(), 40, 1000, rr, rs)
        KV = [(rng.randbytes(16), rng.randrange(1 << 56)) for _ in range(1000)]
        table = dict(KV)
        values = set(table.values())
        hits = [k for k, _ in rng.sample(KV, 10)]
        misses = [rng.randbytes(17) for _ in range(10)]
        Q = hits + misses
        rng.shuffle(Q)
        query, state = okher_query(o_s, Q, rs)
        out = okher_decode(o_s, okher_resp(o_r, KV, query, rr), state)
        dec = {q: o_r.keys.sk.decrypt(e) for q, e in zip(Q, out)}
        hit_ok += all(dec[k] == table[k] for k in hits)
        miss_ok += all(dec[k] not in values for k in misses)
    assert hit_ok == 100, f"matching correct in {hit_ok}/100"
    assert miss_ok == 100, f"non-matching clean in {miss_ok}/100"
    return "matching 100/100, non-matching 100/100"


# ---------------------------------------------------------------- 5

@criterion("5 SOKVS N=4096: success, roundtrip, dummy uniformity")
def test_c5_sokvs():
    kp = e_setup(SchemeDescriptor.mock(), random.Random(5))
    pk, sk = kp.pk, kp.sk
    rng = random.Random(55)
    N = 4096
    successes = 0
    last = None
    for rep in range(100):
        enc, params = sokvs_setup(None, 40, N, rng)
        KC = [(rng.randbytes(16), sk.encrypt(rng.randrange(pk.plaintext_modulus), rng)) for _ in range(N)]
        try:
            s = sokvs_encode(enc, KC, pk, rng)
        except EncodeFailure:
            continue
        successes += 1
        bad = sum(sk.decrypt(sokvs_decode_local(s, params, k)) != sk.decrypt(c) for k, c in KC)
        assert bad == 0, f"{bad} programmed keys decode wrongly in set {rep}"
        last = (s, params)
    assert successes >= 99, f"encode success {successes}/100"
    s, params = last
    counts = [0] * 256
    for i in range(10_000):
        counts[sk.decrypt(sokvs_decode_local(s, params, b"dummy-" + i.to_bytes(4, "big"))) & 255] += 1
    p = chisquare(counts).pvalue
    assert p > 0.01, f"chi-square p = {p:.4f}"
    return f"success {successes}/100, all roundtrips exact, chi-square p = {p:.3f}"


# ---------------------------------------------------------------- 6

@pytest.mark.parametrize("backend", list(PirBackend), ids=lambda b: b.value)
def test_c6_pir(backend):
    @criterion(f"6 PIR composition identity ({backend.value})")
    def check():
        rng = random.Random(6)
        for trial in range(100):
            N = rng.randint(1, 4096)
            M = rng.randint(1, min(32, N))
            K = [rng.getrandbits(128) for _ in range(N)]
            U = rng.sample(range(N), M)
            o_r, o_s = pir_setup(None, 40, rng, backend)
            q, J = pir_query(o_s, U, N, rng)
            got = pir_decode(o_s, J, pir_resp(o_r, K, 128, q))
            assert got == [K[u] for u in U], f"trial {trial}"
            used = list(J.bucket_of.values())
            assert len(used) == len(set(used)) and len(q.blocks) == bucket_count(M)
        return "100/100 instances, <= 1 real index per bucket"
    check()


# ---------------------------------------------------------------- 7

@criterion("7 graph suite")
def test_c7_graph():
    rng = random.Random(7)
    strips_ok = strips_failed = 0
    for _ in range(100):
        n, d, delta = rng.randint(2, 20), rng.randint(1, 4), rng.randint(0, 4)
        hi = rng.choice((20, 60, 200))
        pts = set()
        while len(pts) < n:
            pts.add(tuple(rng.randint(delta, delta + hi) for _ in range(d)))
        from fuzzypsu.geometry import FuzzyDataset
        X = FuzzyDataset(tuple(pts), delta, d, 16)
        G = build_induced_graph(X)
        labels = edge_labels(X.points, delta)
        assert {(i, j): G.label_set(i, j) for i, j, _ in G.edges()} == labels
        P = dsatur(G)
        assert all(part_edge_free(labels, p) for p in P.parts)
        assert len(P) <= labeled_degree(labels, n) + 1
        try:
            S = strips(G)
        except StripsFailed:
            strips_failed += 1
        else:
            strips_ok += 1
            assert S.covers(n) and all(exclusive(labels, a, p) for a, p in zip(S.axes, S.parts))
    for seed in range(100):
        r = random.Random(seed)
        d = r.choice((2, 3, 4))
        X, _ = gen_dataset(DatasetSpec(Structure.D_STRIPABLE, r.choice((8, 16, 20)), 2, d,
                                       r.choice((1, 2, 4)), 16, 0, 7000 + seed))
        labels = edge_labels(X.points, X.delta)
        assert labeled_degree(labels, X.n) <= degree_bound(d)
        P = strip_by_theorem(X)
        assert P.covers(X.n) and all(exclusive(labels, a, p) for a, p in zip(P.axes, P.parts))
    return f"labels/DSATUR 100/100, theorem 100/100, strips verified {strips_ok} (failed {strips_failed})"


# ---------------------------------------------------------------- 8

def _entries_and_indices(n, m, d, delta, seed=0):
    X, Y = gen_dataset(DatasetSpec(Structure.NULL_GRAPH, n, m, d, delta, 16, m // 2, seed))
    c = run_protocol(Variant.NG, X, Y, seed=seed).transcript.counters
    return sum(c["store_entries"]), c["store_entries"][0], sum(c["pir_indices"])


@criterion("8 scaling: doubling n")
def test_c8_doubling_n():
    for m, d, delta in ((4, 2, 1), (8, 3, 2), (2, 4, 4)):
        rows = [_entries_and_indices(n, m, d, delta) for n in (8, 16, 32, 64)]
        for (e1, _, p1), (e2, _, p2) in zip(rows, rows[1:]):
            assert e2 == 2 * e1 and p2 == p1, rows
    return "store entries x2, PIR index count unchanged"


@criterion("8 scaling: doubling delta multiplies ng entries by (4d+2)/(2d+1) [as stated]")
def test_c8_doubling_delta_as_stated():
    for delta in (1, 2, 4):
        _, a, _ = _entries_and_indices(16, 4, 2, delta)
        _, b, _ = _entries_and_indices(16, 4, 2, 2 * delta)
        assert b * (2 * delta + 1) == a * (4 * delta + 2), (
            f"delta {delta}->{2 * delta}: entries {a}->{b}, ratio {b / a:.4f} "
            f"vs stated {(4 * delta + 2) / (2 * delta + 1):.4f}")
    return "exact"


@criterion("8 scaling: doubling delta multiplies ng entries by (4d+1)/(2d+1) [count law of 4]")
def test_c8_doubling_delta_count_law():
    for delta in (1, 2, 4):
        _, a, _ = _entries_and_indices(16, 4, 2, delta)
        _, b, _ = _entries_and_indices(16, 4, 2, 2 * delta)
        assert b * (2 * delta + 1) == a * (4 * delta + 1), (delta, a, b)
    return "exact for delta in 1, 2, 4"


# ---------------------------------------------------------------- 9

@criterion("9 determinism: identical master seed, identical transcript bytes")
def test_c9_determinism():
    for variant in Variant:
        for seed in (1, 2):
            spec = grid_spec(variant, seed, (8, 16))
            X, Y = gen_dataset(spec)
            axis = spec.axis if variant is Variant.EXC else None
            a = run_protocol(variant, X, Y, seed=seed, axis=axis).transcript.to_bytes()
            b = run_protocol(variant, X, Y, seed=seed, axis=axis).transcript.to_bytes()
            assert a == b, (variant, seed)
    return "5 variants x 2 seeds"
