"""Central and peripheral state machines for certificate-authenticated pairing.

Message flow (certificate mode)::

    central                                   peripheral
    PAIRING_REQ (cert_auth=1)        ->
                                     <-       PAIRING_RSP (cert_auth=1)
    CERT_CENTRAL                     ->       verify, ECDH, pick N_p
                                     <-       CERT_PERIPHERAL
                                     <-       CONFIRM  C_p = f4(PK_c, PK_p, N_p)
    verify, ECDH, pick N_c
    NONCE_CENTRAL                    ->
                                     <-       NONCE_PERIPHERAL      (LTK derived)
    check C_p, derive LTK

With ``cert_auth=False`` the same machine runs plain LE Secure Connections
Just Works: raw public keys travel in PUBKEY_* frames and nothing
authenticates them. That mode exists as the unprotected control arm.

Each frame is ``opcode(1) || payload``; payload sizes are fixed per opcode
except SESSION_FRAME.
"""

from __future__ import annotations

import enum
import hmac
from dataclasses import dataclass
from typing import Optional, Union

from .certificate import BleCertificate, decode, verify_cert
from .crypto import (
    DeviceAddress,
    KeyPair,
    PublicKey,
    SecureChannel,
    ecdh,
    f4_confirm,
    f5_ltk,
    random_bytes,
)
from .errors import (
    CertificateFormatError,
    InvalidPoint,
    MalformedMessage,
    NotEstablished,
    WrongRole,
    WrongState,
)


class Opcode(enum.IntEnum):
    PAIRING_REQ = 0x01
    PAIRING_RSP = 0x02
    CERT_CENTRAL = 0x10
    CERT_PERIPHERAL = 0x11
    PUBKEY_CENTRAL = 0x12
    PUBKEY_PERIPHERAL = 0x13
    CONFIRM = 0x20
    NONCE_CENTRAL = 0x21
    NONCE_PERIPHERAL = 0x22
    SESSION_FRAME = 0x30
    FAIL = 0xFF


PAYLOAD_SIZE = {
    Opcode.PAIRING_REQ: 7,
    Opcode.PAIRING_RSP: 7,
    Opcode.CERT_CENTRAL: 103,
    Opcode.CERT_PERIPHERAL: 103,
    Opcode.PUBKEY_CENTRAL: 32,
    Opcode.PUBKEY_PERIPHERAL: 32,
    Opcode.CONFIRM: 16,
    Opcode.NONCE_CENTRAL: 16,
    Opcode.NONCE_PERIPHERAL: 16,
    Opcode.SESSION_FRAME: None,
    Opcode.FAIL: 1,
}


class FailReason(enum.IntEnum):
    INVALID_CERTIFICATE = 0x01
    CONFIRM_MISMATCH = 0x02
    UNSUPPORTED_PEER = 0x03
    MALFORMED_MESSAGE = 0x04
    WRONG_STATE = 0x05

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.name.split("_"))


@dataclass(frozen=True)
class WireMessage:
    opcode: Opcode
    payload: bytes = b""

    def encode(self) -> bytes:
        return bytes([self.opcode]) + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "WireMessage":
        if not data:
            raise MalformedMessage("empty frame")
        try:
            opcode = Opcode(data[0])
        except ValueError:
            raise MalformedMessage(f"unknown opcode {data[0]:#04x}") from None
        payload = bytes(data[1:])
        size = PAYLOAD_SIZE[opcode]
        if size is not None and len(payload) != size:
            raise MalformedMessage(f"{opcode.name} payload must be {size} bytes, got {len(payload)}")
        if opcode is Opcode.FAIL and payload[0] not in FailReason._value2member_map_:
            raise MalformedMessage(f"unknown failure reason {payload[0]:#04x}")
        return cls(opcode, payload)

    def describe(self) -> str:
        if self.opcode is Opcode.FAIL:
            return f"FAIL({FailReason(self.payload[0]).label})"
        return f"{self.opcode.name}[{len(self.payload)}]"


# ---------------------------------------------------------------------------
# Feature exchange
# ---------------------------------------------------------------------------

IO_NO_INPUT_NO_OUTPUT = 0x03
CERT_AUTH_BIT = 5


@dataclass(frozen=True)
class AuthReq:
    bonding: int = 0b01
    mitm: bool = False
    sc: bool = True
    keypress: bool = False
    cert_auth: bool = True

    def to_byte(self) -> int:
        return (
            (self.bonding & 0b11)
            | self.mitm << 2
            | self.sc << 3
            | self.keypress << 4
            | self.cert_auth << CERT_AUTH_BIT
        )

    @classmethod
    def from_byte(cls, value: int) -> "AuthReq":
        if value & 0b1100_0000:
            raise MalformedMessage(f"reserved AuthReq bits set in {value:#04x}")
        return cls(
            bonding=value & 0b11,
            mitm=bool(value >> 2 & 1),
            sc=bool(value >> 3 & 1),
            keypress=bool(value >> 4 & 1),
            cert_auth=bool(value >> CERT_AUTH_BIT & 1),
        )


@dataclass(frozen=True)
class PairingFeatures:
    """The 7-byte feature-exchange body.

    io_capability, oob_flag, auth_req, max_key_size, initiator_key_dist,
    responder_key_dist, then the sender's address type.
    """

    auth_req: AuthReq
    addr_type: int = 0
    io_capability: int = IO_NO_INPUT_NO_OUTPUT
    oob: int = 0
    max_key_size: int = 16
    initiator_key_dist: int = 0
    responder_key_dist: int = 0

    def to_bytes(self) -> bytes:
        return bytes([
            self.io_capability,
            self.oob,
            self.auth_req.to_byte(),
            self.max_key_size,
            self.initiator_key_dist,
            self.responder_key_dist,
            self.addr_type,
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> "PairingFeatures":
        if len(data) != 7:
            raise MalformedMessage("feature body must be 7 bytes")
        if data[6] not in (0, 1):
            raise MalformedMessage(f"bad address type {data[6]:#04x}")
        if not 7 <= data[3] <= 16:
            raise MalformedMessage(f"bad max key size {data[3]}")
        return cls(
            auth_req=AuthReq.from_byte(data[2]),
            addr_type=data[6],
            io_capability=data[0],
            oob=data[1],
            max_key_size=data[3],
            initiator_key_dist=data[4],
            responder_key_dist=data[5],
        )


# ---------------------------------------------------------------------------
# State machine
# ---------------------------------------------------------------------------

class Role(enum.Enum):
    CENTRAL = "central"
    PERIPHERAL = "peripheral"


class State(enum.IntEnum):
    IDLE = 0
    FEATURE_EXCHANGED = 1
    CERT_SENT = 2
    CERT_VERIFIED = 3
    CONFIRM_EXCHANGED = 4
    NONCES_EXCHANGED = 5
    ESTABLISHED = 6
    FAILED = 7

    @property
    def terminal(self) -> bool:
        return self in (State.ESTABLISHED, State.FAILED)


class _Abort(Exception):
    def __init__(self, reason: FailReason):
        self.reason = reason


Frame = Union[WireMessage, bytes]


class PairingContext:
    """One endpoint of a pairing.

    ``peer_mac`` is the 6-byte address the link layer reports for the other
    side. In certificate mode the peer's certificate serial must match it.
    """

    def __init__(
        self,
        role: Role,
        keypair: KeyPair,
        address: DeviceAddress,
        peer_mac: bytes,
        certificate: Optional[BleCertificate] = None,
        root_key: Optional[PublicKey] = None,
        rng=None,
        cert_auth: bool = True,
    ):
        if cert_auth and (certificate is None or root_key is None):
            raise ValueError("certificate mode needs a certificate and a trusted root key")
        if cert_auth and certificate.subject_key != keypair.public.x_bytes:
            raise ValueError("certificate does not carry this endpoint's public key")
        self.role = role
        self.cert_auth = cert_auth
        self.rng = rng
        self.address = address
        self.peer_mac = bytes(peer_mac)
        self.state = State.IDLE
        self.history = [State.IDLE]
        self.failure: Optional[FailReason] = None
        self.failed_locally = False

        self._keypair = keypair
        self.certificate = certificate
        self.root_key = root_key
        self.peer_certificate: Optional[BleCertificate] = None
        self.peer_key: Optional[PublicKey] = None
        self.peer_address: Optional[DeviceAddress] = None
        self._peer_addr_type: Optional[int] = None
        self.local_nonce: Optional[bytes] = None
        self.remote_nonce: Optional[bytes] = None
        self.confirm: Optional[bytes] = None
        self._secret: Optional[bytearray] = None
        self._ltk: Optional[bytearray] = None

    # -- public API ---------------------------------------------------------

    @property
    def public_key(self) -> PublicKey:
        return self._keypair.public

    def features(self) -> PairingFeatures:
        return PairingFeatures(AuthReq(cert_auth=self.cert_auth), addr_type=self.address.addr_type)

    def start_pairing(self) -> WireMessage:
        if self.role is not Role.CENTRAL:
            raise WrongRole("only the central initiates pairing")
        if self.state is not State.IDLE:
            raise WrongState(f"cannot start pairing from {self.state.name}")
        self._advance(State.FEATURE_EXCHANGED)
        return WireMessage(Opcode.PAIRING_REQ, self.features().to_bytes())

    def handle_message(self, frame: Frame) -> list[WireMessage]:
        """Consume one inbound frame and return the frames to send back.

        Protocol violations never raise: they move the context to FAILED and
        produce a single FAIL frame carrying the reason.
        """
        if self.state.terminal:
            return []
        try:
            msg = frame if isinstance(frame, WireMessage) else WireMessage.decode(frame)
        except MalformedMessage:
            return self._fail(FailReason.MALFORMED_MESSAGE)
        if msg.opcode is Opcode.FAIL:
            self.failure = FailReason(msg.payload[0])
            self._advance(State.FAILED)
            self._wipe()
            return []
        handler = self._handlers().get((self.state, msg.opcode))
        if handler is None:
            return self._fail(FailReason.WRONG_STATE)
        try:
            return handler(msg.payload)
        except _Abort as abort:
            return self._fail(abort.reason)
        except MalformedMessage:
            return self._fail(FailReason.MALFORMED_MESSAGE)

    def ltk(self) -> bytes:
        if self.state is not State.ESTABLISHED or self._ltk is None:
            raise NotEstablished(f"no LTK in state {self.state.name}")
        return bytes(self._ltk)

    def channel(self) -> SecureChannel:
        """Encrypted link keyed by the LTK, directions fixed by role."""
        return SecureChannel(self.ltk(), 0 if self.role is Role.CENTRAL else 1)

    def discard(self) -> None:
        """Zeroize derived key material."""
        self._wipe(keep_ltk=False)

    # -- internals ----------------------------------------------------------

    def _handlers(self):
        cert_op, peer_cert_op = (
            (Opcode.CERT_CENTRAL, Opcode.CERT_PERIPHERAL)
            if self.cert_auth
            else (Opcode.PUBKEY_CENTRAL, Opcode.PUBKEY_PERIPHERAL)
        )
        if self.role is Role.CENTRAL:
            return {
                (State.FEATURE_EXCHANGED, Opcode.PAIRING_RSP): self._central_on_response,
                (State.CERT_SENT, peer_cert_op): self._central_on_peer_key,
                (State.CERT_VERIFIED, Opcode.CONFIRM): self._central_on_confirm,
                (State.CONFIRM_EXCHANGED, Opcode.NONCE_PERIPHERAL): self._central_on_nonce,
            }
        return {
            (State.IDLE, Opcode.PAIRING_REQ): self._peripheral_on_request,
            (State.FEATURE_EXCHANGED, cert_op): self._peripheral_on_peer_key,
            (State.CONFIRM_EXCHANGED, Opcode.NONCE_CENTRAL): self._peripheral_on_nonce,
        }

    def _advance(self, state: State) -> None:
        self.state = state
        self.history.append(state)

    def _fail(self, reason: FailReason) -> list[WireMessage]:
        self.failure = reason
        self.failed_locally = True
        self._advance(State.FAILED)
        self._wipe()
        return [WireMessage(Opcode.FAIL, bytes([reason]))]

    def _wipe(self, keep_ltk: bool = True) -> None:
        if self._secret is not None:
            self._secret[:] = bytes(len(self._secret))
            self._secret = None
        if self._ltk is not None and not (keep_ltk and self.state is State.ESTABLISHED):
            self._ltk[:] = bytes(len(self._ltk))
            self._ltk = None

    def _own_key_frame(self) -> WireMessage:
        central = self.role is Role.CENTRAL
        if self.cert_auth:
            op = Opcode.CERT_CENTRAL if central else Opcode.CERT_PERIPHERAL
            return WireMessage(op, self.certificate.encode())
        op = Opcode.PUBKEY_CENTRAL if central else Opcode.PUBKEY_PERIPHERAL
        return WireMessage(op, self.public_key.x_bytes)

    def _check_features(self, payload: bytes) -> None:
        features = PairingFeatures.from_bytes(payload)
        if self.cert_auth and not features.auth_req.cert_auth:
            raise _Abort(FailReason.UNSUPPORTED_PEER)
        self._peer_addr_type = features.addr_type

    def _accept_peer_key(self, payload: bytes) -> None:
        if self.cert_auth:
            try:
                cert = decode(payload)
            except CertificateFormatError:
                raise _Abort(FailReason.INVALID_CERTIFICATE) from None
            if not verify_cert(cert, self.root_key).ok or cert.serial != self.peer_mac:
                raise _Abort(FailReason.INVALID_CERTIFICATE)
            self.peer_certificate = cert
            self.peer_key = cert.public_key()
        else:
            try:
                self.peer_key = PublicKey.from_x(payload)
            except InvalidPoint:
                raise _Abort(FailReason.MALFORMED_MESSAGE) from None
        self.peer_address = DeviceAddress(self.peer_mac, self._peer_addr_type)
        self._secret = bytearray(ecdh(self._keypair.private, self.peer_key))

    def _keys_in_order(self) -> tuple[PublicKey, PublicKey]:
        if self.role is Role.CENTRAL:
            return self.public_key, self.peer_key
        return self.peer_key, self.public_key

    def _derive_ltk(self) -> None:
        if self.role is Role.CENTRAL:
            n_c, n_p = self.local_nonce, self.remote_nonce
            mac_c, mac_p = self.address, self.peer_address
        else:
            n_c, n_p = self.remote_nonce, self.local_nonce
            mac_c, mac_p = self.peer_address, self.address
        self._ltk = bytearray(f5_ltk(bytes(self._secret), n_c, n_p, mac_c, mac_p))
        self._secret[:] = bytes(32)
        self._secret = None
        self._advance(State.ESTABLISHED)

    # central

    def _central_on_response(self, payload: bytes) -> list[WireMessage]:
        self._check_features(payload)
        self._advance(State.CERT_SENT)
        return [self._own_key_frame()]

    def _central_on_peer_key(self, payload: bytes) -> list[WireMessage]:
        self._accept_peer_key(payload)
        self._advance(State.CERT_VERIFIED)
        return []

    def _central_on_confirm(self, payload: bytes) -> list[WireMessage]:
        self.confirm = payload
        self.local_nonce = random_bytes(self.rng, 16)
        self._advance(State.CONFIRM_EXCHANGED)
        return [WireMessage(Opcode.NONCE_CENTRAL, self.local_nonce)]

    def _central_on_nonce(self, payload: bytes) -> list[WireMessage]:
        self.remote_nonce = payload
        expected = f4_confirm(*self._keys_in_order(), payload)
        if not hmac.compare_digest(expected, self.confirm):
            raise _Abort(FailReason.CONFIRM_MISMATCH)
        self._advance(State.NONCES_EXCHANGED)
        self._derive_ltk()
        return []

    # peripheral

    def _peripheral_on_request(self, payload: bytes) -> list[WireMessage]:
        self._check_features(payload)
        self._advance(State.FEATURE_EXCHANGED)
        return [WireMessage(Opcode.PAIRING_RSP, self.features().to_bytes())]

    def _peripheral_on_peer_key(self, payload: bytes) -> list[WireMessage]:
        self._accept_peer_key(payload)
        self._advance(State.CERT_VERIFIED)
        self.local_nonce = random_bytes(self.rng, 16)
        self.confirm = f4_confirm(*self._keys_in_order(), self.local_nonce)
        self._advance(State.CONFIRM_EXCHANGED)
        # commit to N_p before N_c is known
        return [self._own_key_frame(), WireMessage(Opcode.CONFIRM, self.confirm)]

    def _peripheral_on_nonce(self, payload: bytes) -> list[WireMessage]:
        self.remote_nonce = payload
        self._advance(State.NONCES_EXCHANGED)
        self._derive_ltk()
        return [WireMessage(Opcode.NONCE_PERIPHERAL, self.local_nonce)]
