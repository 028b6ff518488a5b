"""Certificate issuance: the BLE certification authority and chip manufacturers.

A manufacturer registers its signing key with the authority, then submits one
countersigned request per chip. The authority checks the countersignature,
refuses duplicate serials, signs the certificate and records it.

On disk an authority lives in a directory::

    root.key            private scalar, 64 hex chars
    root.pub            public key x-coordinate, 64 hex chars
    manufacturers.txt   "<registration-id> <key-x-hex>" per line
    registry.txt        "<serial-hex> <certificate-hex>" per line, append-only;
                        a later line for the same serial supersedes earlier ones
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .certificate import BleCertificate, decode, sign_certificate
from .crypto import (
    KeyPair,
    PublicKey,
    Signature,
    ecdsa_sign,
    ecdsa_verify,
    generate_keypair,
    load_keypair,
    write_private_key,
    write_public_key,
)
from .errors import (
    BadSubjectKey,
    DuplicateManufacturer,
    DuplicateSerial,
    InvalidPoint,
    RequestRejected,
    UnknownSerial,
)


def request_payload(serial: bytes, subject_key: bytes) -> bytes:
    """Bytes covered by a manufacturer's countersignature."""
    return bytes(serial) + bytes(subject_key)


def registration_id(key: PublicKey) -> str:
    return hashlib.sha256(key.x_bytes).hexdigest()[:16]


@dataclass(frozen=True)
class IssuanceRequest:
    serial: bytes
    subject_key: bytes
    manufacturer_signature: Signature


@dataclass
class Manufacturer:
    """A chip manufacturer: signs issuance requests and keeps per-device secrets."""

    keypair: KeyPair
    device_secrets: dict = field(default_factory=dict)

    @classmethod
    def create(cls, rng=None) -> "Manufacturer":
        return cls(generate_keypair(rng))

    @property
    def public_key(self) -> PublicKey:
        return self.keypair.public

    def request(self, serial: bytes, subject_key: bytes, rng=None) -> IssuanceRequest:
        sig = ecdsa_sign(self.keypair.private, request_payload(serial, subject_key), rng)
        return IssuanceRequest(bytes(serial), bytes(subject_key), sig)


def make_request_signature(manufacturer_private: int, serial: bytes, subject_key: bytes, rng=None) -> Signature:
    return ecdsa_sign(manufacturer_private, request_payload(serial, subject_key), rng)


class RootAuthority:
    """The single trust root. Mutations are serialized by an internal lock."""

    def __init__(self, keypair: KeyPair, home: Optional[Path] = None):
        self.keypair = keypair
        self.manufacturers: dict[str, PublicKey] = {}
        self._registry: dict[bytes, BleCertificate] = {}
        self._lock = threading.Lock()
        self.home = Path(home) if home is not None else None

    @classmethod
    def init_root(cls, rng=None, home=None) -> "RootAuthority":
        authority = cls(generate_keypair(rng), home)
        if authority.home is not None:
            authority._write_fresh()
        return authority

    @property
    def public_key(self) -> PublicKey:
        return self.keypair.public

    def __len__(self) -> int:
        return len(self._registry)

    def serials(self) -> list[bytes]:
        return list(self._registry)

    def register_manufacturer(self, key: PublicKey) -> str:
        key.validate()
        reg_id = registration_id(key)
        with self._lock:
            if reg_id in self.manufacturers:
                raise DuplicateManufacturer(f"manufacturer {reg_id} already registered")
            self.manufacturers[reg_id] = key
            if self.home is not None:
                with open(self.home / "manufacturers.txt", "a") as fh:
                    fh.write(f"{reg_id} {key.hex()}\n")
        return reg_id

    def _check_request(self, request: IssuanceRequest) -> None:
        payload = request_payload(request.serial, request.subject_key)
        if not any(ecdsa_verify(k, payload, request.manufacturer_signature) for k in self.manufacturers.values()):
            raise RequestRejected("request is not signed by a registered manufacturer")
        if len(request.serial) != 6 or len(request.subject_key) != 32:
            raise RequestRejected("malformed request fields")
        try:
            PublicKey.from_x(request.subject_key)
        except InvalidPoint as exc:
            raise BadSubjectKey(str(exc)) from None

    def issue(self, request: IssuanceRequest) -> BleCertificate:
        with self._lock:
            self._check_request(request)
            if request.serial in self._registry:
                raise DuplicateSerial(f"serial {request.serial.hex()} already has a certificate")
            return self._sign_and_record(request)

    def reissue(self, request: IssuanceRequest) -> BleCertificate:
        """Replace the certificate of an already enrolled serial (key rotation)."""
        with self._lock:
            self._check_request(request)
            if request.serial not in self._registry:
                raise UnknownSerial(f"serial {request.serial.hex()} was never issued")
            return self._sign_and_record(request)

    def _sign_and_record(self, request: IssuanceRequest) -> BleCertificate:
        cert = sign_certificate(self.keypair.private, request.serial, request.subject_key)
        self._registry[request.serial] = cert
        if self.home is not None:
            with open(self.home / "registry.txt", "a") as fh:
                fh.write(f"{request.serial.hex()} {cert.hex()}\n")
                fh.flush()
        return cert

    def lookup(self, serial: bytes) -> Optional[BleCertificate]:
        return self._registry.get(bytes(serial))

    # -- persistence --------------------------------------------------------

    def _write_fresh(self) -> None:
        self.home.mkdir(parents=True, exist_ok=True)
        write_private_key(self.home / "root.key", self.keypair.private)
        write_public_key(self.home / "root.pub", self.public_key)
        (self.home / "manufacturers.txt").touch()
        (self.home / "registry.txt").touch()

    @classmethod
    def load(cls, home) -> "RootAuthority":
        home = Path(home)
        authority = cls(load_keypair(home / "root.key"), home)
        mpath = home / "manufacturers.txt"
        if mpath.exists():
            for line in mpath.read_text().splitlines():
                if line.strip():
                    reg_id, key_hex = line.split()
                    authority.manufacturers[reg_id] = PublicKey.from_x(bytes.fromhex(key_hex))
        rpath = home / "registry.txt"
        if rpath.exists():
            for line in rpath.read_text().splitlines():
                if line.strip():
                    serial_hex, cert_hex = line.split()
                    authority._registry[bytes.fromhex(serial_hex)] = decode(bytes.fromhex(cert_hex))
        return authority
