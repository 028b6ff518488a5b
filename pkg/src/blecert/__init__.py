"""Certificate-based authentication for BLE Just Works pairing."""

from .certificate import BleCertificate, CertStatus, decode, encode, size_report, verify_cert
from .crypto import (
    SALT,
    DeviceAddress,
    KeyPair,
    PublicKey,
    Signature,
    aes_cmac,
    ecdh,
    ecdsa_sign,
    ecdsa_verify,
    f4_confirm,
    f5_ltk,
    generate_keypair,
)
from .pairing import PairingContext, Role, State

__version__ = "0.1.0"
