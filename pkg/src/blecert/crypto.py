"""Cryptographic primitives for certificate-authenticated BLE pairing.

Everything that needs randomness takes an ``rng`` argument: any object with a
``randbytes(n)`` method, so ``random.Random(seed)`` gives reproducible runs and
``random.SystemRandom()`` (the default) gives real entropy.

The AES block cipher and AES-CCM come from ``cryptography``; CMAC, ECDSA and
the P-256 arithmetic underneath are implemented here so the whole handshake
can be replayed deterministically from a seed.
"""

from __future__ import annotations

import hashlib
import hmac
import random
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESCCM
from cryptography.exceptions import InvalidTag

from . import p256
from .errors import (
    AuthFailure,
    IdentityResult,
    InvalidPoint,
    RandomnessFailure,
    ReplayDetected,
    ZeroSecret,
)

#: Key for the first CMAC stage of the LTK derivation.
SALT = bytes.fromhex("6C888391AAF5A53860370BDB5A6083BE")

BLOCK = 16
_RB = 0x87

_system_rng = random.SystemRandom()


def random_bytes(rng, n: int) -> bytes:
    """Draw ``n`` bytes from ``rng``, raising RandomnessFailure on any fault."""
    if rng is None:
        rng = _system_rng
    try:
        out = rng.randbytes(n)
    except Exception as exc:  # any failure of the source is fatal for key material
        raise RandomnessFailure(f"randomness source failed: {exc}") from exc
    if not isinstance(out, (bytes, bytearray)) or len(out) != n:
        raise RandomnessFailure(f"randomness source did not return {n} bytes")
    return bytes(out)


# ---------------------------------------------------------------------------
# Key material
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PublicKey:
    x: int
    y: int

    @property
    def point(self) -> tuple[int, int]:
        return (self.x, self.y)

    def is_valid(self) -> bool:
        return p256.is_on_curve(self.point)

    def validate(self) -> "PublicKey":
        if not self.is_valid():
            raise InvalidPoint(f"public key ({self.x:#x}, {self.y:#x}) is not on P-256")
        return self

    @property
    def x_bytes(self) -> bytes:
        return self.x.to_bytes(32, "big")

    def to_bytes(self) -> bytes:
        """Uncompressed 64-byte ``x || y`` encoding."""
        return self.x_bytes + self.y.to_bytes(32, "big")

    @classmethod
    def from_x(cls, data: bytes) -> "PublicKey":
        """Rebuild a key from its 32-byte x-coordinate, taking the even-y root."""
        if len(data) != 32:
            raise InvalidPoint(f"x-coordinate must be 32 bytes, got {len(data)}")
        point = p256.lift_x(int.from_bytes(data, "big"), odd=False)
        if point is None:
            raise InvalidPoint(f"no P-256 point has x = {data.hex()}")
        return cls(*point)

    def hex(self) -> str:
        return self.x_bytes.hex()


class KeyPair(NamedTuple):
    private: int
    public: PublicKey


@dataclass(frozen=True)
class Signature:
    r: int
    s: int

    def to_bytes(self) -> bytes:
        return self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        if len(data) != 64:
            raise ValueError(f"signature must be 64 bytes, got {len(data)}")
        return cls(int.from_bytes(data[:32], "big"), int.from_bytes(data[32:], "big"))


ADDR_PUBLIC = 0x00
ADDR_STATIC_RANDOM = 0x01

_MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")


@dataclass(frozen=True)
class DeviceAddress:
    addr: bytes
    addr_type: int = ADDR_PUBLIC

    def __post_init__(self):
        if len(self.addr) != 6:
            raise ValueError(f"device address must be 6 bytes, got {len(self.addr)}")
        if self.addr_type not in (ADDR_PUBLIC, ADDR_STATIC_RANDOM):
            raise ValueError(f"unknown address type {self.addr_type:#x}")

    def to_bytes(self) -> bytes:
        """The 56-bit form fed into key derivation: address then type."""
        return self.addr + bytes([self.addr_type])

    @classmethod
    def parse(cls, text: str, addr_type: int = ADDR_PUBLIC) -> "DeviceAddress":
        if not _MAC_RE.match(text):
            raise ValueError(f"not a MAC address: {text!r}")
        return cls(bytes.fromhex(text.replace(":", "")), addr_type)

    def __str__(self) -> str:
        return format_mac(self.addr)


def format_mac(addr: bytes) -> str:
    return ":".join(f"{b:02X}" for b in addr)


def _scalar_from(rng) -> int:
    while True:
        d = int.from_bytes(random_bytes(rng, 32), "big")
        if 1 <= d < p256.N:
            return d


def public_key_for(private: int) -> PublicKey:
    if not 1 <= private < p256.N:
        raise ValueError("private scalar out of range")
    return PublicKey(*p256.base_mul(private))


def generate_keypair(rng=None) -> KeyPair:
    """Generate a P-256 key pair whose public key has an even y-coordinate.

    Candidates with odd y are discarded so that the 32-byte x-coordinate alone
    identifies the key.
    """
    while True:
        d = _scalar_from(rng)
        pub = public_key_for(d)
        if pub.y & 1 == 0:
            return KeyPair(d, pub)


def ecdh(private: int, remote: PublicKey) -> bytes:
    """Return the 32-byte x-coordinate of ``private * remote``."""
    remote.validate()
    if not 1 <= private < p256.N:
        raise ValueError("private scalar out of range")
    shared = p256.mul(private, remote.point)
    if shared is None:
        raise IdentityResult("ECDH produced the point at infinity")
    return shared[0].to_bytes(32, "big")


# ---------------------------------------------------------------------------
# AES-CMAC and the pairing functions built on it
# ---------------------------------------------------------------------------

def _dbl(block: bytes) -> bytes:
    n = int.from_bytes(block, "big") << 1
    if n >> 128:
        n = (n ^ _RB) & ((1 << 128) - 1)
    return n.to_bytes(BLOCK, "big")


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def aes_cmac(key: bytes, message: bytes) -> bytes:
    """AES-128 CMAC as defined in RFC 4493."""
    if len(key) != 16:
        raise ValueError(f"AES-CMAC key must be 16 bytes, got {len(key)}")
    ecb = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    k1 = _dbl(ecb.update(bytes(BLOCK)))
    k2 = _dbl(k1)

    if message and len(message) % BLOCK == 0:
        head, last = message[:-BLOCK], _xor(message[-BLOCK:], k1)
    else:
        cut = len(message) - len(message) % BLOCK
        tail = message[cut:] + b"\x80"
        tail += bytes(BLOCK - len(tail))
        head, last = message[:cut], _xor(tail, k2)

    cbc = Cipher(algorithms.AES(key), modes.CBC(bytes(BLOCK))).encryptor()
    return cbc.update(head + last)[-BLOCK:]


def f4_confirm(pk_c: PublicKey, pk_p: PublicKey, n_p: bytes) -> bytes:
    """Peripheral confirm value: CMAC keyed by its nonce over both x-coordinates."""
    pk_c.validate()
    pk_p.validate()
    if len(n_p) != 16:
        raise ValueError("nonce must be 16 bytes")
    return aes_cmac(n_p, pk_c.x_bytes + pk_p.x_bytes)


def f5_ltk(secret: bytes, n_c: bytes, n_p: bytes, mac_c: DeviceAddress, mac_p: DeviceAddress) -> bytes:
    """Derive the 128-bit Long Term Key from the ECDH secret, nonces and addresses."""
    if len(secret) != 32:
        raise ValueError("ECDH secret must be 32 bytes")
    if not any(secret):
        raise ZeroSecret("ECDH secret is all zero")
    if len(n_c) != 16 or len(n_p) != 16:
        raise ValueError("nonces must be 16 bytes")
    t = aes_cmac(SALT, secret)
    return aes_cmac(t, n_c + n_p + mac_c.to_bytes() + mac_p.to_bytes())


# ---------------------------------------------------------------------------
# ECDSA over P-256 with SHA-256
# ---------------------------------------------------------------------------

def _digest_int(message: bytes) -> int:
    # 256-bit digest on a 256-bit group order: no truncation needed
    return int.from_bytes(hashlib.sha256(message).digest(), "big")


def _rfc6979_nonces(private: int, message: bytes) -> Iterator[int]:
    x = private.to_bytes(32, "big")
    h = (_digest_int(message) % p256.N).to_bytes(32, "big")
    v = b"\x01" * 32
    k = b"\x00" * 32
    k = hmac.new(k, v + b"\x00" + x + h, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    k = hmac.new(k, v + b"\x01" + x + h, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    while True:
        v = hmac.new(k, v, hashlib.sha256).digest()
        candidate = int.from_bytes(v, "big")
        if 1 <= candidate < p256.N:
            yield candidate
        k = hmac.new(k, v + b"\x00", hashlib.sha256).digest()
        v = hmac.new(k, v, hashlib.sha256).digest()


def _random_nonces(rng) -> Iterator[int]:
    while True:
        yield _scalar_from(rng)


def ecdsa_sign(private: int, message: bytes, rng=None, deterministic: bool = False) -> Signature:
    """Sign ``message`` with ECDSA-SHA256.

    The per-signature nonce is drawn from ``rng`` unless ``deterministic`` is
    set, in which case it is derived as in RFC 6979.
    """
    if not message:
        raise ValueError("refusing to sign an empty message")
    if not 1 <= private < p256.N:
        raise ValueError("private scalar out of range")
    z = _digest_int(message)
    nonces = _rfc6979_nonces(private, message) if deterministic else _random_nonces(rng)
    for k in nonces:
        r = p256.base_mul(k)[0] % p256.N
        if not r:
            continue
        s = pow(k, -1, p256.N) * (z + r * private) % p256.N
        if s:
            return Signature(r, s)
    raise AssertionError("unreachable")


def ecdsa_verify(public: PublicKey, message: bytes, sig: Signature) -> bool:
    """Return True iff ``sig`` is a valid ECDSA-SHA256 signature by ``public``."""
    if not public.is_valid():
        return False
    r, s = sig.r, sig.s
    if not (1 <= r < p256.N and 1 <= s < p256.N):
        return False
    w = pow(s, -1, p256.N)
    z = _digest_int(message)
    point = p256.mul_add(z * w, r * w, public.point)
    if point is None:
        return False
    return point[0] % p256.N == r


# ---------------------------------------------------------------------------
# Link encryption
# ---------------------------------------------------------------------------

SESSION_TAG_LEN = 16
_COUNTER = struct.Struct(">Q")


def _session_nonce(direction: int, counter: int) -> bytes:
    return bytes([direction & 0xFF]) + _COUNTER.pack(counter) + bytes(4)


def session_seal(ltk: bytes, counter: int, plaintext: bytes, direction: int = 0) -> bytes:
    """Encrypt one link-layer frame under the LTK: ``counter(8) || AES-CCM(...)``."""
    header = _COUNTER.pack(counter)
    body = AESCCM(bytes(ltk), tag_length=SESSION_TAG_LEN).encrypt(
        _session_nonce(direction, counter), plaintext, header
    )
    return header + body


def session_open(ltk: bytes, frame: bytes, direction: int = 0, last_counter: int = -1) -> tuple[int, bytes]:
    """Authenticate and decrypt ``frame``; returns ``(counter, plaintext)``.

    ``last_counter`` is the highest counter already accepted in this direction.
    """
    if len(frame) < _COUNTER.size + SESSION_TAG_LEN:
        raise AuthFailure("session frame too short")
    header = frame[: _COUNTER.size]
    (counter,) = _COUNTER.unpack(header)
    try:
        plaintext = AESCCM(bytes(ltk), tag_length=SESSION_TAG_LEN).decrypt(
            _session_nonce(direction, counter), frame[_COUNTER.size:], header
        )
    except InvalidTag:
        raise AuthFailure("session frame failed authentication") from None
    if counter <= last_counter:
        raise ReplayDetected(f"counter {counter} not above {last_counter}")
    return counter, plaintext


class SecureChannel:
    """One end of an encrypted link, tracking counters in both directions."""

    def __init__(self, ltk: bytes, outbound_direction: int):
        self._ltk = bytes(ltk)
        self._out_dir = outbound_direction
        self._in_dir = outbound_direction ^ 1
        self._tx = 0
        self._rx_last = -1

    def seal(self, plaintext: bytes) -> bytes:
        frame = session_seal(self._ltk, self._tx, plaintext, self._out_dir)
        self._tx += 1
        return frame

    def open(self, frame: bytes) -> bytes:
        counter, plaintext = session_open(self._ltk, frame, self._in_dir, self._rx_last)
        self._rx_last = counter
        return plaintext


# ---------------------------------------------------------------------------
# Key files
# ---------------------------------------------------------------------------

def write_private_key(path, private: int) -> None:
    Path(path).write_text(private.to_bytes(32, "big").hex() + "\n")


def read_private_key(path) -> int:
    text = Path(path).read_text().strip()
    if len(text) != 64:
        raise ValueError(f"{path}: expected 64 hex characters")
    d = int(text, 16)
    if not 1 <= d < p256.N:
        raise ValueError(f"{path}: private scalar out of range")
    return d


def write_public_key(path, public: PublicKey) -> None:
    Path(path).write_text(public.hex() + "\n")


def read_public_key(path) -> PublicKey:
    text = Path(path).read_text().strip()
    if len(text) != 64:
        raise ValueError(f"{path}: expected 64 hex characters")
    return PublicKey.from_x(bytes.fromhex(text))


def load_keypair(path) -> KeyPair:
    d = read_private_key(path)
    return KeyPair(d, public_key_for(d))

