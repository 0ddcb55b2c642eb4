"""Homomorphic encryption contract with two instantiations.

``lhe-residuosity`` is Paillier with ``g = n + 1`` (additive only).
``mock-fhe`` is a correctness-only stand-in for a levelled FHE: the
payload is ``m + p*r`` modulo ``p * 2**64`` which is closed under addition
and multiplication and decrypts by reduction mod ``p``.  It offers no
security whatsoever and exists so that products of encrypted shares can be
tested without an RLWE stack.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Optional

import gmpy2

from fuzzypsu import wire

MOCK_DEFAULT_MODULUS = (1 << 61) - 1
MOCK_MASK_BITS = 64
MIN_RESIDUOSITY_BITS = 2048


class CryptoError(Exception):
    pass


class SchemeMismatch(CryptoError):
    """Operands belong to different schemes or different keys."""


class UnsupportedOperation(CryptoError):
    pass


class NotInvertible(CryptoError):
    """A nonzero plaintext shares a factor with the composite modulus."""


class SchemeKind(enum.Enum):
    LHE_RESIDUOSITY = "lhe-residuosity"
    MOCK_FHE = "mock-fhe"

    @property
    def tag(self) -> int:
        return _TAGS[self]

    @property
    def supports_mul(self) -> bool:
        return self is SchemeKind.MOCK_FHE


_TAGS = {SchemeKind.LHE_RESIDUOSITY: 0x01, SchemeKind.MOCK_FHE: 0x02}
_KINDS = {v: k for k, v in _TAGS.items()}


@dataclass(frozen=True)
class SchemeDescriptor:
    """Scheme choice plus its sizing.

    ``kappa`` is the modulus size in bits for residuosity and ``None`` (toy)
    for the mock.  ``plaintext_modulus`` is only meaningful for the mock; the
    residuosity plaintext space is fixed by key generation.
    """

    kind: SchemeKind
    kappa: Optional[int] = None
    plaintext_modulus: Optional[int] = None

    @classmethod
    def mock(cls, modulus: int = MOCK_DEFAULT_MODULUS) -> "SchemeDescriptor":
        return cls(SchemeKind.MOCK_FHE, None, modulus)

    @classmethod
    def residuosity(cls, kappa: int = MIN_RESIDUOSITY_BITS) -> "SchemeDescriptor":
        return cls(SchemeKind.LHE_RESIDUOSITY, kappa, None)

    def plaintext_bits_lower_bound(self) -> int:
        """Bits guaranteed for the plaintext modulus before key generation."""
        if self.kind is SchemeKind.MOCK_FHE:
            return (self.plaintext_modulus or MOCK_DEFAULT_MODULUS).bit_length() - 1
        return (self.kappa or MIN_RESIDUOSITY_BITS) - 1


class PublicKey:
    """Base class; raw ``_op`` methods act on integer payloads."""

    kind: SchemeKind
    plaintext_modulus: int
    cipher_modulus: int

    @property
    def tag(self) -> int:
        return self.kind.tag

    @property
    def cipher_width(self) -> int:
        return (self.cipher_modulus.bit_length() + 7) // 8

    @property
    def serialized_cipher_len(self) -> int:
        return 5 + self.cipher_width

    # raw payload operations, overridden per scheme
    def _enc(self, m: int, rng: random.Random) -> int:
        raise NotImplementedError

    def _rand(self, rng: random.Random) -> int:
        raise NotImplementedError

    def _add(self, a: int, b: int) -> int:
        raise NotImplementedError

    def _neg(self, a: int) -> int:
        raise NotImplementedError

    def _smul(self, k: int, a: int) -> int:
        raise NotImplementedError

    def _mul(self, a: int, b: int) -> int:
        raise UnsupportedOperation(f"{self.kind.value} has no ciphertext product")

    def _zero(self) -> int:
        """A deterministic encryption of zero (the additive identity)."""
        raise NotImplementedError

    # wrapped API
    def encrypt(self, m: int, rng: random.Random) -> "CipherValue":
        return CipherValue(self, self._enc(m % self.plaintext_modulus, rng))

    def random_cipher(self, rng: random.Random) -> "CipherValue":
        return CipherValue(self, self._rand(rng))

    def wrap(self, payload: int) -> "CipherValue":
        if not 0 <= payload < self.cipher_modulus:
            raise CryptoError("payload outside the ciphertext space")
        return CipherValue(self, int(payload))

    def cipher_from_bytes(self, data: bytes) -> "CipherValue":
        r = wire.Reader(data)
        tag = r.u8()
        if tag != self.tag:
            raise SchemeMismatch(f"ciphertext tag {tag:#x} for a {self.kind.value} key")
        body = r.blob()
        r.done()
        if len(body) != self.cipher_width:
            raise CryptoError("ciphertext has the wrong width")
        return self.wrap(int.from_bytes(body, "big"))

    def to_bytes(self) -> bytes:
        raise NotImplementedError

    def _identity(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PublicKey) and self._identity() == other._identity()

    def __hash__(self) -> int:
        return hash(self._identity())


class SecretKey:
    pk: PublicKey

    def _dec(self, payload: int) -> int:
        raise NotImplementedError

    def decrypt(self, c: "CipherValue") -> int:
        if c.pk != self.pk:
            raise SchemeMismatch("ciphertext was produced under another key")
        return self._dec(c.payload)

    def encrypt(self, m: int, rng: random.Random) -> "CipherValue":
        return self.pk.encrypt(m, rng)


class CipherValue:
    """Opaque ciphertext bound to the public key that produced it."""

    __slots__ = ("pk", "payload")

    def __init__(self, pk: PublicKey, payload: int):
        self.pk = pk
        self.payload = payload

    @property
    def tag(self) -> int:
        return self.pk.tag

    @property
    def byte_length(self) -> int:
        return self.pk.serialized_cipher_len

    def to_bytes(self) -> bytes:
        return wire.u8(self.pk.tag) + wire.blob(
            int(self.payload).to_bytes(self.pk.cipher_width, "big"))

    def _check(self, other: "CipherValue") -> None:
        if not isinstance(other, CipherValue):
            raise TypeError("expected a CipherValue")
        if other.pk is not self.pk and other.pk != self.pk:
            raise SchemeMismatch("ciphertexts under different keys")

    def __add__(self, other: "CipherValue") -> "CipherValue":
        self._check(other)
        return CipherValue(self.pk, self.pk._add(self.payload, other.payload))

    def __neg__(self) -> "CipherValue":
        return CipherValue(self.pk, self.pk._neg(self.payload))

    def __sub__(self, other: "CipherValue") -> "CipherValue":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, CipherValue):
            self._check(other)
            return CipherValue(self.pk, self.pk._mul(self.payload, other.payload))
        if isinstance(other, int):
            return CipherValue(self.pk, self.pk._smul(other, self.payload))
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, CipherValue) and self.pk == other.pk
                and self.payload == other.payload)

    def __hash__(self) -> int:
        return hash((self.pk.tag, self.payload))

    def __repr__(self) -> str:
        return f"CipherValue({self.pk.kind.value}, {self.byte_length} bytes)"


# ---------------------------------------------------------------- Paillier

class PaillierPublicKey(PublicKey):
    kind = SchemeKind.LHE_RESIDUOSITY

    def __init__(self, n: int):
        self.n = gmpy2.mpz(n)
        self.nsquare = self.n * self.n
        self.plaintext_modulus = int(n)
        self.cipher_modulus = int(self.nsquare)

    def _enc(self, m, rng):
        r = _unit(rng, self.n)
        return int((1 + m * self.n) * gmpy2.powmod(r, self.n, self.nsquare) % self.nsquare)

    def _rand(self, rng):
        # uniform unit of Z*_{n^2}: decrypts to a uniform plaintext
        return int(_unit(rng, self.nsquare))

    def _add(self, a, b):
        return int(gmpy2.mpz(a) * b % self.nsquare)

    def _neg(self, a):
        return int(gmpy2.invert(a, self.nsquare))

    def _smul(self, k, a):
        k %= self.plaintext_modulus
        if k == 1:
            return a
        if k > self.plaintext_modulus // 2:
            return int(gmpy2.invert(gmpy2.powmod(a, self.plaintext_modulus - k, self.nsquare),
                                    self.nsquare))
        return int(gmpy2.powmod(a, k, self.nsquare))

    def _zero(self):
        return 1

    def to_bytes(self):
        return wire.u8(self.tag) + wire.big(int(self.n))

    def _identity(self):
        return (self.tag, int(self.n))


class PaillierSecretKey(SecretKey):
    def __init__(self, pk: PaillierPublicKey, p: int, q: int):
        if p == q or p * q != pk.n:
            raise CryptoError("inconsistent Paillier factors")
        self.pk = pk
        self.p, self.q = gmpy2.mpz(p), gmpy2.mpz(q)
        self.psquare, self.qsquare = self.p * self.p, self.q * self.q
        self.hp = self._h(self.p, self.psquare)
        self.hq = self._h(self.q, self.qsquare)
        self.p_inv_q = gmpy2.invert(self.p, self.q)
        self.psq_inv_qsq = gmpy2.invert(self.psquare, self.qsquare)

    def _h(self, x, xsquare):
        g = (self.pk.n + 1) % xsquare
        return gmpy2.invert((gmpy2.powmod(g, x - 1, xsquare) - 1) // x, x)

    def _dec(self, c):
        mp = (gmpy2.powmod(c, self.p - 1, self.psquare) - 1) // self.p * self.hp % self.p
        mq = (gmpy2.powmod(c, self.q - 1, self.qsquare) - 1) // self.q * self.hq % self.q
        return int(mp + ((mq - mp) * self.p_inv_q % self.q) * self.p)

    def encrypt(self, m: int, rng: random.Random) -> CipherValue:
        """Encryption using the factorization.

        r^n mod n^2 is uniform over the n-th residues.  Modulo p^2 that
        subgroup is {a^p : a in Z*_p} and a -> a^n, a -> a^p are both
        bijections onto it, so a^p for uniform a has the same law as r^n;
        likewise modulo q^2.  The halves are joined by CRT.
        """
        pk = self.pk
        xp = gmpy2.powmod(_unit(rng, self.p), self.p, self.psquare)
        xq = gmpy2.powmod(_unit(rng, self.q), self.q, self.qsquare)
        rn = xp + ((xq - xp) * self.psq_inv_qsq % self.qsquare) * self.psquare
        m %= pk.plaintext_modulus
        return CipherValue(pk, int((1 + m * pk.n) * rn % pk.nsquare))


def _unit(rng: random.Random, modulus) -> gmpy2.mpz:
    while True:
        r = gmpy2.mpz(rng.randrange(1, int(modulus)))
        if gmpy2.gcd(r, modulus) == 1:
            return r


def _prime(bits: int, rng: random.Random) -> gmpy2.mpz:
    while True:
        cand = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        p = gmpy2.next_prime(cand)
        if p.bit_length() == bits:
            return p


def paillier_keygen(kappa: int, rng: random.Random):
    half = kappa // 2
    while True:
        p, q = _prime(half, rng), _prime(kappa - half, rng)
        n = p * q
        if p != q and n.bit_length() == kappa and gmpy2.gcd(n, (p - 1) * (q - 1)) == 1:
            pk = PaillierPublicKey(int(n))
            return pk, PaillierSecretKey(pk, int(p), int(q))


# ---------------------------------------------------------------- mock FHE

class MockPublicKey(PublicKey):
    """Correctness-only FHE stand-in.  NOT SECURE: the payload reveals m mod p."""

    kind = SchemeKind.MOCK_FHE

    def __init__(self, p: int, key_id: int):
        self.p = p
        self.key_id = key_id
        self.plaintext_modulus = p
        self.cipher_modulus = p << MOCK_MASK_BITS

    def _enc(self, m, rng):
        return m + self.p * rng.getrandbits(MOCK_MASK_BITS)

    def _rand(self, rng):
        return rng.randrange(self.cipher_modulus)

    def _add(self, a, b):
        return (a + b) % self.cipher_modulus

    def _neg(self, a):
        return -a % self.cipher_modulus

    def _smul(self, k, a):
        return (k % self.p) * a % self.cipher_modulus

    def _mul(self, a, b):
        return a * b % self.cipher_modulus

    def _zero(self):
        return 0

    def to_bytes(self):
        return wire.u8(self.tag) + wire.big(self.p) + wire.u64(self.key_id)

    def _identity(self):
        return (self.tag, self.p, self.key_id)


class MockSecretKey(SecretKey):
    def __init__(self, pk: MockPublicKey):
        self.pk = pk

    def _dec(self, c):
        return c % self.pk.p


@dataclass(frozen=True)
class KeyPair:
    pk: PublicKey
    sk: SecretKey


def e_setup(descriptor: SchemeDescriptor, rng: random.Random) -> KeyPair:
    """Generate a key pair for ``descriptor``."""
    if descriptor.kind is SchemeKind.LHE_RESIDUOSITY:
        kappa = descriptor.kappa
        if kappa is None or kappa < MIN_RESIDUOSITY_BITS:
            raise CryptoError(f"residuosity needs kappa >= {MIN_RESIDUOSITY_BITS}, got {kappa}")
        if descriptor.plaintext_modulus is not None:
            raise CryptoError("residuosity plaintext modulus is fixed by key generation")
        pk, sk = paillier_keygen(kappa, rng)
        return KeyPair(pk, sk)
    if descriptor.kappa is not None:
        raise CryptoError("mock-fhe only supports toy parameters (kappa=None)")
    p = descriptor.plaintext_modulus or MOCK_DEFAULT_MODULUS
    if p < 3 or not gmpy2.is_prime(p):
        raise CryptoError("mock-fhe plaintext modulus must be an odd prime")
    pk = MockPublicKey(p, rng.getrandbits(64))
    return KeyPair(pk, MockSecretKey(pk))


def public_key_from_bytes(data: bytes) -> PublicKey:
    r = wire.Reader(data)
    kind = _KINDS.get(r.u8())
    if kind is SchemeKind.LHE_RESIDUOSITY:
        pk: PublicKey = PaillierPublicKey(r.big())
    elif kind is SchemeKind.MOCK_FHE:
        pk = MockPublicKey(r.big(), r.u64())
    else:
        raise CryptoError("unknown scheme tag")
    r.done()
    return pk


# functional aliases mirroring the contract

def encrypt(pk: PublicKey, m: int, rng: random.Random) -> CipherValue:
    return pk.encrypt(m, rng)


def decrypt(sk: SecretKey, c: CipherValue) -> int:
    return sk.decrypt(c)


def add_ct(c1: CipherValue, c2: CipherValue) -> CipherValue:
    return c1 + c2


def neg_ct(c: CipherValue) -> CipherValue:
    return -c


def scalar_mul(m: int, c: CipherValue) -> CipherValue:
    return CipherValue(c.pk, c.pk._smul(m, c.payload))


def mul_ct(c1: CipherValue, c2: CipherValue) -> CipherValue:
    c1._check(c2)
    return CipherValue(c1.pk, c1.pk._mul(c1.payload, c2.payload))


def random_cipher(pk: PublicKey, rng: random.Random) -> CipherValue:
    return pk.random_cipher(rng)


def invert_plaintext(t: int, modulus: int) -> int:
    """Inverse of ``t`` modulo the plaintext modulus, or NotInvertible."""
    try:
        return int(gmpy2.invert(t, modulus))
    except ZeroDivisionError:
        raise NotInvertible(f"gcd({t}, modulus) != 1") from None
