"""Pushing a replacement key pair and certificate to a deployed device.

The manufacturer seals the new private scalar under a key derived from the
device's factory secret, binds it to the new certificate and a timestamp with
a CMAC tag, and hands the package to the companion app. The device accepts it
only if the tag checks, the timestamp is fresh and the scalar matches the
certificate; otherwise it drops the connection and keeps its old keys.

Package layout (175 bytes)::

    certificate(103) || iv(16) || encrypted scalar(32) || timestamp(8, BE) || tag(16)
"""

from __future__ import annotations

import enum
import hmac
import struct
import threading
from dataclasses import dataclass
from typing import Optional, Union

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import p256
from .certificate import CERT_SIZE, BleCertificate, decode
from .crypto import DeviceAddress, KeyPair, aes_cmac, public_key_for, random_bytes
from .errors import BleCertError, UnknownDevice

DEFAULT_WINDOW = 300
SEALED_SIZE = 48
PACKAGE_SIZE = CERT_SIZE + SEALED_SIZE + 8 + 16

_ENC_LABEL = b"blecert-update-enc"
_MAC_LABEL = b"blecert-update-mac"
_TS = struct.Struct(">Q")


def _derive(factory_secret: bytes) -> tuple[bytes, bytes]:
    return aes_cmac(factory_secret, _ENC_LABEL), aes_cmac(factory_secret, _MAC_LABEL)


def _ctr(key: bytes, iv: bytes, data: bytes) -> bytes:
    return Cipher(algorithms.AES(key), modes.CTR(iv)).encryptor().update(data)


@dataclass(frozen=True)
class UpdatePackage:
    certificate: bytes
    sealed_key: bytes
    timestamp: int
    tag: bytes

    def authenticated_part(self) -> bytes:
        return self.certificate + self.sealed_key + _TS.pack(self.timestamp)

    def encode(self) -> bytes:
        return self.authenticated_part() + self.tag

    @classmethod
    def decode(cls, data: bytes) -> "UpdatePackage":
        if len(data) != PACKAGE_SIZE:
            raise ValueError(f"update package must be {PACKAGE_SIZE} bytes, got {len(data)}")
        cut = CERT_SIZE + SEALED_SIZE
        return cls(
            certificate=bytes(data[:CERT_SIZE]),
            sealed_key=bytes(data[CERT_SIZE:cut]),
            timestamp=_TS.unpack(data[cut:cut + 8])[0],
            tag=bytes(data[cut + 8:]),
        )


class DeviceKeystore:
    """Key storage of one device. The factory secret never changes."""

    def __init__(self, address: DeviceAddress, factory_secret: bytes, keypair: KeyPair,
                 certificate: BleCertificate):
        self.address = address
        self._factory_secret = bytes(factory_secret)
        self._keypair = keypair
        self._certificate = certificate
        self.lock = threading.Lock()

    @property
    def serial(self) -> bytes:
        return self.address.addr

    @property
    def keypair(self) -> KeyPair:
        return self._keypair

    @property
    def certificate(self) -> BleCertificate:
        return self._certificate

    def snapshot(self) -> tuple[KeyPair, BleCertificate]:
        with self.lock:
            return self._keypair, self._certificate

    def pairing_context(self, role, peer_mac: bytes, root_key, rng=None, cert_auth: bool = True):
        from .pairing import PairingContext

        keypair, cert = self.snapshot()
        return PairingContext(role, keypair, self.address, peer_mac, cert, root_key, rng, cert_auth)

    def _swap(self, keypair: KeyPair, certificate: BleCertificate) -> None:
        self._keypair, self._certificate = keypair, certificate


def build_update(factory_secrets, device_serial: bytes, new_keypair: KeyPair,
                 certificate: BleCertificate, now: int, rng=None) -> UpdatePackage:
    """Seal ``new_keypair`` for the device with ``device_serial``.

    ``factory_secrets`` maps serials to factory secrets; a Manufacturer's
    ``device_secrets`` works, as does the Manufacturer itself.
    """
    secrets = getattr(factory_secrets, "device_secrets", factory_secrets)
    try:
        secret = secrets[bytes(device_serial)]
    except KeyError:
        raise UnknownDevice(f"no factory secret for {bytes(device_serial).hex()}") from None
    enc_key, mac_key = _derive(secret)
    iv = random_bytes(rng, 16)
    sealed = iv + _ctr(enc_key, iv, new_keypair.private.to_bytes(32, "big"))
    body = certificate.encode() + sealed + _TS.pack(int(now))
    return UpdatePackage(certificate.encode(), sealed, int(now), aes_cmac(mac_key, body))


class DisconnectReason(enum.Enum):
    BAD_AUTH = "BadAuth"
    STALE_TIMESTAMP = "StaleTimestamp"
    KEY_CERT_MISMATCH = "KeyCertMismatch"


@dataclass(frozen=True)
class UpdateResult:
    reason: Optional[DisconnectReason] = None

    @property
    def applied(self) -> bool:
        return self.reason is None

    def __str__(self) -> str:
        return "Applied" if self.applied else f"Disconnected({self.reason.value})"


APPLIED = UpdateResult()


def apply_update(keystore: DeviceKeystore, pkg: Union[UpdatePackage, bytes], now: int,
                 window: int = DEFAULT_WINDOW) -> UpdateResult:
    """Install a rotation package, or report why the device disconnected.

    The keystore is only touched when every check passes.
    """
    if not isinstance(pkg, UpdatePackage):
        try:
            pkg = UpdatePackage.decode(pkg)
        except ValueError:
            return UpdateResult(DisconnectReason.BAD_AUTH)

    enc_key, mac_key = _derive(keystore._factory_secret)
    if not hmac.compare_digest(aes_cmac(mac_key, pkg.authenticated_part()), pkg.tag):
        return UpdateResult(DisconnectReason.BAD_AUTH)
    if abs(int(now) - pkg.timestamp) > window:
        return UpdateResult(DisconnectReason.STALE_TIMESTAMP)

    try:
        cert = decode(pkg.certificate)
    except BleCertError:
        return UpdateResult(DisconnectReason.KEY_CERT_MISMATCH)
    iv, body = pkg.sealed_key[:16], pkg.sealed_key[16:]
    private = int.from_bytes(_ctr(enc_key, iv, body), "big")
    if not 1 <= private < p256.N or cert.serial != keystore.serial:
        return UpdateResult(DisconnectReason.KEY_CERT_MISMATCH)
    public = public_key_for(private)
    if public.y & 1 or public.x_bytes != cert.subject_key:
        return UpdateResult(DisconnectReason.KEY_CERT_MISMATCH)

    with keystore.lock:
        keystore._swap(KeyPair(private, public), cert)
    return APPLIED
