"""Split oblivious key-value store.

Each key q maps to a sparse left row l(q) (``alpha`` distinct positions in
``[left_len]``) and a dense right row r(q) (``rho`` random bits).  Encoding
solves ``<l(k)||r(k), L||R> = c`` for every programmed pair with ciphertext
unknowns.  Coefficients are 0/1 but the system is solved over the plaintext
ring of the scheme, since that is where decode sums live.

Solving order: a triangular pivot order is read off the sparse part (a
column touched by a single remaining row is pivoted on first), the rows
left over form a small core that is solved exactly over the integers with
the right-hand columns, and every unconstrained position gets a
``random_cipher``.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import gmpy2
import numpy as np

from fuzzypsu import kernels, wire
from fuzzypsu.crypto import CipherValue, PublicKey

ALPHA = 3
EXPANSION = 1.3
SLACK = 8
_ELIM_PRIME = (1 << 127) - 1


class WellFormednessError(ValueError):
    """Duplicate keys in a key-value set."""


class EncodeFailure(RuntimeError):
    """The linear system had no solution for this seed."""


def right_width(lam: int, capacity: int) -> int:
    return lam + max(1, math.ceil(math.log2(capacity))) + SLACK


@dataclass(frozen=True)
class SokvsParams:
    capacity: int
    alpha: int
    left_len: int
    right_len: int
    lam: int
    seed: bytes

    def row_left(self, q: bytes) -> tuple[int, ...]:
        """``alpha`` distinct sorted positions in ``[left_len]``."""
        out: list[int] = []
        ctr = 0
        while len(out) < self.alpha:
            h = hashlib.blake2b(q, key=self.seed, person=b"sokvs-left" + bytes([ctr % 256]) + b"\0" * 5,
                                digest_size=64).digest()
            for off in range(0, 64, 8):
                pos = int.from_bytes(h[off:off + 8], "big") % self.left_len
                if pos not in out:
                    out.append(pos)
                    if len(out) == self.alpha:
                        break
            ctr += 1
        return tuple(sorted(out))

    def row_right(self, q: bytes) -> int:
        """``right_len``-bit mask; bit ``j`` set means R[j] is in the sum."""
        nbytes = (self.right_len + 7) // 8
        chunks = []
        ctr = 0
        while sum(map(len, chunks)) < nbytes:
            chunks.append(hashlib.blake2b(q, key=self.seed, person=b"sokvs-right" + bytes([ctr % 256]) + b"\0" * 4,
                                          digest_size=64).digest())
            ctr += 1
        return int.from_bytes(b"".join(chunks)[:nbytes], "big") & ((1 << self.right_len) - 1)

    def row_dense(self, q: bytes) -> np.ndarray:
        """The full 0/1 row l(q)||r(q) (for tests and small instances)."""
        v = np.zeros(self.left_len + self.right_len, dtype=np.int8)
        v[list(self.row_left(q))] = 1
        mask = self.row_right(q)
        for j in range(self.right_len):
            if mask >> j & 1:
                v[self.left_len + j] = 1
        return v

    def reseed(self, rng: random.Random) -> "SokvsParams":
        return SokvsParams(self.capacity, self.alpha, self.left_len, self.right_len,
                           self.lam, rng.getrandbits(8 * len(self.seed)).to_bytes(len(self.seed), "big"))

    def to_bytes(self) -> bytes:
        return (wire.u32(self.capacity) + wire.u8(self.alpha) + wire.u32(self.left_len)
                + wire.u32(self.right_len) + wire.u32(self.lam) + wire.blob(self.seed))

    @classmethod
    def from_bytes(cls, data: bytes) -> "SokvsParams":
        r = wire.Reader(data)
        out = cls(r.u32(), r.u8(), r.u32(), r.u32(), r.u32(), r.blob())
        r.done()
        return out


@dataclass(frozen=True)
class SokvsEncoder:
    """Receiver-side view: the shared params plus encode workspace settings."""

    params: SokvsParams
    max_retries: int = 0


def sokvs_setup(kappa: Optional[int], lam: int, capacity: int, rng: random.Random,
                alpha: int = ALPHA, expansion: float = EXPANSION,
                max_retries: int = 0) -> tuple[SokvsEncoder, SokvsParams]:
    if capacity < 1:
        raise ValueError("capacity must be at least 1")
    seed_len = 16 if kappa is None else min(64, max(16, kappa // 8))
    params = SokvsParams(capacity, alpha, max(alpha, math.ceil(expansion * capacity)),
                         right_width(lam, capacity), lam,
                         rng.getrandbits(8 * seed_len).to_bytes(seed_len, "big"))
    return SokvsEncoder(params, max_retries), params


@dataclass
class SplitEncoding:
    L: list[CipherValue]
    R: list[CipherValue]
    params: SokvsParams


def _solve_unimodular(A: list[list[int]], n_cols: int):
    """Gauss-Jordan over Z pivoting only on entries +-1.

    When it gets through every row, the chosen k x k submatrix has
    determinant +-1 and its inverse is a (small) integer matrix, so the
    ciphertext solve needs no scalar wider than a few bits.
    """
    k = len(A)
    M = [row[:] for row in A]
    E = [[int(i == j) for j in range(k)] for i in range(k)]
    pivots: list[int] = []
    used: set[int] = set()
    for i in range(k):
        col = next((c for c in range(n_cols) if c not in used and abs(M[i][c]) == 1), None)
        if col is None:
            return None
        s = M[i][col]   # its own inverse
        pivots.append(col)
        used.add(col)
        for r in range(k):
            f = M[r][col] * s if r != i else 0
            if f:
                M[r] = [a - f * b for a, b in zip(M[r], M[i])]
                E[r] = [a - f * b for a, b in zip(E[r], E[i])]
    # M restricted to the pivots is diagonal with +-1 entries: A_P^{-1} = D E
    inv = [[0] * k for _ in range(k)]
    for i, col in enumerate(pivots):
        s = M[i][col]
        inv[i] = [s * x for x in E[i]]
    return pivots, inv, 1


def _solve_core(A: list[list[int]], n_cols: int) -> Optional[tuple[list[int], list[list[int]], int]]:
    """Pick pivot columns for the k x n_cols 0/1 matrix A.

    Returns (pivot columns, integer adjugate of A restricted to them, det),
    or None if A has dependent rows.  Row t of the adjugate belongs to the
    t-th pivot column.
    """
    quick = _solve_unimodular(A, n_cols)
    if quick is not None:
        return quick
    k = len(A)
    M = [row[:] for row in A]
    pivots: list[int] = []
    used = set()
    # pivot search mod a large prime; full rank there implies full rank over Q
    for i in range(k):
        col = next((c for c in range(n_cols) if c not in used and M[i][c] % _ELIM_PRIME), None)
        if col is None:
            return None
        pivots.append(col)
        used.add(col)
        inv = pow(M[i][col], -1, _ELIM_PRIME)
        for i2 in range(i + 1, k):
            f = M[i2][col] * inv % _ELIM_PRIME
            if f:
                M[i2] = [(a - f * b) % _ELIM_PRIME for a, b in zip(M[i2], M[i])]
    sub = [[Fraction(A[i][c]) for c in pivots] for i in range(k)]
    inv_m = [[Fraction(int(i == j)) for j in range(k)] for i in range(k)]
    det = Fraction(1)
    for c in range(k):
        p = next(r for r in range(c, k) if sub[r][c] != 0)
        if p != c:
            sub[c], sub[p] = sub[p], sub[c]
            inv_m[c], inv_m[p] = inv_m[p], inv_m[c]
            det = -det
        piv = sub[c][c]
        det *= piv
        sub[c] = [x / piv for x in sub[c]]
        inv_m[c] = [x / piv for x in inv_m[c]]
        for r in range(k):
            if r != c and sub[r][c] != 0:
                f = sub[r][c]
                sub[r] = [a - f * b for a, b in zip(sub[r], sub[c])]
                inv_m[r] = [a - f * b for a, b in zip(inv_m[r], inv_m[c])]
    det_i = int(det)
    adj = [[int(x * det_i) for x in row] for row in inv_m]
    return pivots, adj, det_i


def sokvs_encode(encoder: SokvsEncoder | SokvsParams, KC: Sequence[tuple[bytes, CipherValue]],
                 pk: PublicKey, rng: random.Random) -> SplitEncoding:
    """Encode key/ciphertext pairs so that decode(k) reproduces each ciphertext."""
    if isinstance(encoder, SokvsParams):
        encoder = SokvsEncoder(encoder)
    params = encoder.params
    keys = [k for k, _ in KC]
    if len(set(keys)) != len(keys):
        raise WellFormednessError("duplicate keys in the key-value set")
    if len(keys) > params.capacity:
        raise ValueError(f"{len(keys)} pairs exceed the capacity {params.capacity}")
    values = [c.payload for _, c in KC]
    for _, c in KC:
        if c.pk != pk:
            raise ValueError("value encrypted under a different key")
    for _ in range(encoder.max_retries + 1):
        out = _encode_once(params, keys, values, pk, rng)
        if out is not None:
            L, R = out
            return SplitEncoding([CipherValue(pk, x) for x in L], [CipherValue(pk, x) for x in R], params)
        params = params.reseed(rng)
    raise EncodeFailure(f"system singular after {encoder.max_retries} reseedings")


def _encode_once(params: SokvsParams, keys: list[bytes], values: list[int],
                 pk: PublicKey, rng: random.Random):
    n_rows, L_len, rho = len(keys), params.left_len, params.right_len
    lefts = [params.row_left(k) for k in keys]
    rights = [params.row_right(k) for k in keys]
    right_bits = [[j for j in range(rho) if m >> j & 1] for m in rights]
    X: list[Optional[int]] = [None] * (L_len + rho)   # R[j] lives at L_len + j
    add, neg = pk._add, pk._neg

    if n_rows:
        prow, pcol = kernels.peel_order(np.asarray(lefts, dtype=np.int64).reshape(n_rows, params.alpha), L_len)
    else:
        prow = pcol = np.empty(0, dtype=np.int64)
    peeled = set(prow.tolist())
    core = [i for i in range(n_rows) if i not in peeled]

    core_cols: list[int] = []
    pivots: list[int] = []
    solved = None
    if core:
        core_cols = sorted({c for i in core for c in lefts[i]}) + [L_len + j for j in range(rho)]
        index = {c: t for t, c in enumerate(core_cols)}
        A = []
        for i in core:
            row = [0] * len(core_cols)
            for c in lefts[i]:
                row[index[c]] = 1
            for j in right_bits[i]:
                row[index[L_len + j]] = 1
            A.append(row)
        if len(core) > len(core_cols):
            return None
        solved = _solve_core(A, len(core_cols))
        if solved is None:
            return None
        piv_idx, adj, det = solved
        if gmpy2.gcd(det, pk.plaintext_modulus) != 1:
            return None
        pivots = [core_cols[t] for t in piv_idx]

    determined = set(pcol.tolist()) | set(pivots)
    for c in range(L_len + rho):
        if c not in determined:
            X[c] = pk._rand(rng)

    if core:
        piv_idx, adj, det = solved
        pivot_set = set(pivots)
        b = []
        for i in core:
            acc = values[i]
            for c in list(lefts[i]) + [L_len + j for j in right_bits[i]]:
                if c not in pivot_set:
                    acc = add(acc, neg(X[c]))
            b.append(acc)
        det_inv = int(gmpy2.invert(det % pk.plaintext_modulus, pk.plaintext_modulus))
        for t, c in enumerate(pivots):
            acc = pk._zero()
            for i in range(len(core)):
                if adj[t][i]:
                    acc = add(acc, pk._smul(adj[t][i], b[i]))
            X[c] = pk._smul(det_inv, acc) if det_inv != 1 else acc

    for r, c in zip(reversed(prow.tolist()), reversed(pcol.tolist())):
        acc = None
        for c2 in lefts[r]:
            if c2 != c:
                acc = X[c2] if acc is None else add(acc, X[c2])
        for j in right_bits[r]:
            acc = X[L_len + j] if acc is None else add(acc, X[L_len + j])
        X[c] = values[r] if acc is None else add(values[r], neg(acc))
    return X[:L_len], X[L_len:]


def sokvs_decode_local(enc: SplitEncoding, params: SokvsParams, q: bytes) -> CipherValue:
    acc = None
    for i in params.row_left(q):
        acc = enc.L[i] if acc is None else acc + enc.L[i]
    mask = params.row_right(q)
    for j in range(params.right_len):
        if mask >> j & 1:
            acc = acc + enc.R[j]
    return acc


def decode_right(params: SokvsParams, R: Sequence[CipherValue], q: bytes,
                 start: Optional[CipherValue] = None) -> Optional[CipherValue]:
    """<r(q), R> added onto ``start``."""
    acc = start
    mask = params.row_right(q)
    for j in range(params.right_len):
        if mask >> j & 1:
            acc = R[j] if acc is None else acc + R[j]
    return acc
