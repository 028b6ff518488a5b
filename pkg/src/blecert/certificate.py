"""The 103-byte BLE-profiled certificate.

Layout (all fields fixed width, multi-byte values big-endian)::

    offset  size  field
    0       1     version (0x01)
    1       6     serial: the device's static MAC address
    7       32    subject public key: x-coordinate, even-y point implied
    39      64    ECDSA-SHA256 signature r || s over bytes [0, 39)

There is no issuer, validity or algorithm field. The verifier trusts exactly
one authority key, configured out of band.
"""

from __future__ import annotations

import enum
import string
from dataclasses import dataclass, field
from pathlib import Path

from .crypto import PublicKey, Signature, ecdsa_sign, ecdsa_verify, format_mac
from .errors import BadLength, BadVersion, InvalidPoint

VERSION = 0x01
CERT_SIZE = 103
TBS_SIZE = 39

_SERIAL = slice(1, 7)
_KEY = slice(7, 39)
_SIG = slice(39, 103)


@dataclass(frozen=True)
class BleCertificate:
    serial: bytes
    subject_key: bytes
    signature: Signature
    version: int = VERSION

    def __post_init__(self):
        if len(self.serial) != 6:
            raise ValueError("serial must be a 6-byte MAC address")
        if len(self.subject_key) != 32:
            raise ValueError("subject key must be a 32-byte x-coordinate")
        if not 0 <= self.version <= 0xFF:
            raise ValueError("version must fit in one byte")

    def tbs(self) -> bytes:
        """The signed prefix: version || serial || subject key."""
        return tbs_bytes(self.serial, self.subject_key, self.version)

    def encode(self) -> bytes:
        return self.tbs() + self.signature.to_bytes()

    def hex(self) -> str:
        return self.encode().hex()

    def public_key(self) -> PublicKey:
        """Reconstruct the subject key; raises InvalidPoint if x is not on the curve."""
        return PublicKey.from_x(self.subject_key)

    @property
    def mac(self) -> str:
        return format_mac(self.serial)


def tbs_bytes(serial: bytes, subject_key: bytes, version: int = VERSION) -> bytes:
    return bytes([version]) + serial + subject_key


def encode(cert: BleCertificate) -> bytes:
    return cert.encode()


def decode(data: bytes) -> BleCertificate:
    """Parse exactly 103 bytes. The signature is not checked here."""
    if len(data) != CERT_SIZE:
        raise BadLength(f"certificate must be {CERT_SIZE} bytes, got {len(data)}")
    if data[0] != VERSION:
        raise BadVersion(f"unsupported certificate version {data[0]:#04x}")
    return BleCertificate(
        serial=bytes(data[_SERIAL]),
        subject_key=bytes(data[_KEY]),
        signature=Signature.from_bytes(bytes(data[_SIG])),
        version=data[0],
    )


def sign_certificate(authority_private: int, serial: bytes, subject_key: bytes, rng=None,
                     deterministic: bool = True) -> BleCertificate:
    sig = ecdsa_sign(authority_private, tbs_bytes(serial, subject_key), rng, deterministic=deterministic)
    return BleCertificate(serial=serial, subject_key=subject_key, signature=sig)


class CertStatus(enum.Enum):
    VALID = "valid"
    BAD_POINT = "BadPoint"
    BAD_SIGNATURE = "BadSignature"

    @property
    def ok(self) -> bool:
        return self is CertStatus.VALID


def verify_cert(cert: BleCertificate, authority_key: PublicKey) -> CertStatus:
    try:
        cert.public_key()
    except InvalidPoint:
        return CertStatus.BAD_POINT
    if cert.version != VERSION or not ecdsa_verify(authority_key, cert.tbs(), cert.signature):
        return CertStatus.BAD_SIGNATURE
    return CertStatus.VALID


def verify_encoded(data: bytes, authority_key: PublicKey) -> CertStatus:
    """Decode-and-verify for raw bytes. Anything that fails to parse is a bad signature."""
    try:
        cert = decode(data)
    except (BadLength, BadVersion):
        return CertStatus.BAD_SIGNATURE
    return verify_cert(cert, authority_key)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

_HEX = set(string.hexdigits)


def read_certificate_bytes(path) -> bytes:
    """Load a certificate file, raw or hex-armored (206 hex chars on one line)."""
    raw = Path(path).read_bytes()
    if len(raw) == CERT_SIZE:
        return raw
    text = raw.strip()
    if text and all(chr(c) in _HEX for c in text) and len(text) % 2 == 0:
        return bytes.fromhex(text.decode())
    return raw


def load_certificate(path) -> BleCertificate:
    return decode(read_certificate_bytes(path))


def save_certificate(path, cert: BleCertificate, armored: bool = True) -> None:
    if armored:
        Path(path).write_text(cert.hex() + "\n")
    else:
        Path(path).write_bytes(cert.encode())


# ---------------------------------------------------------------------------
# Size comparison against an unprofiled X.509 v3 certificate
# ---------------------------------------------------------------------------

# (field, X.509 bytes, BLE profiled bytes): measured reference data
SIZE_TABLE = (
    ("Version", 5, 1),
    ("Serial Number", 18, 6),
    ("Signature", 15, 0),
    ("Issuer", 114, 0),
    ("Validity", 32, 0),
    ("Subject", 168, 0),
    ("Subject public key info", 294, 32),
    ("Issuer and subject unique ID", 0, 0),
    ("Extensions", 596, 0),
    ("Signature Algorithm", 15, 0),
    ("Signature Value", 261, 64),
)


@dataclass(frozen=True)
class CertSizeReport:
    rows: tuple = field(default=SIZE_TABLE)

    @property
    def x509_total(self) -> int:
        return sum(r[1] for r in self.rows)

    @property
    def ble_total(self) -> int:
        return sum(r[2] for r in self.rows)

    @property
    def reduction(self) -> float:
        return (self.x509_total - self.ble_total) / self.x509_total

    def to_dict(self) -> dict:
        return {
            "fields": [{"field": name, "x509_bytes": x, "ble_bytes": b} for name, x, b in self.rows],
            "x509_total": self.x509_total,
            "ble_total": self.ble_total,
            "reduction_percent": round(100 * self.reduction, 1),
        }

    def render(self) -> str:
        width = max(len(r[0]) for r in self.rows)
        lines = [f"{'Field':<{width}}  {'X.509':>6}  {'BLE':>4}", "-" * (width + 14)]
        lines += [f"{name:<{width}}  {x:>6}  {b:>4}" for name, x, b in self.rows]
        lines.append("-" * (width + 14))
        lines.append(f"{'Total':<{width}}  {self.x509_total:>6}  {self.ble_total:>4}")
        lines.append(f"Reduction: {100 * self.reduction:.1f}%")
        return "\n".join(lines)


def size_report() -> CertSizeReport:
    return CertSizeReport()
