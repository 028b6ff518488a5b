"""Energy cost of the certificate exchange and the extra public-key operations.

Per-event radio energy follows the four-phase connection-event model
(wake-up, transmit, receive, post-processing/sleep):

    E_T = E_WU + n*l_HDR*E_RX + (2n-1)*E_IFS + (n*l_HDR + l_P)*E_TX + E_SLP
    E_R = E_WU + (n*l_HDR + l_P)*E_RX + (2n-1)*E_IFS + n*l_HDR*E_TX + E_SLP

All arithmetic is in microjoules. Millijoules appear only in reports.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import BadFragmentCount

BLE_HEADER_BYTES = 14
BLE_MAX_PAYLOAD = 251


@dataclass(frozen=True)
class EnergyParams:
    """Radio constants in µJ (per byte for E_TX / E_RX). No defaults: they are hardware specific."""

    e_wu: float
    e_tx: float
    e_rx: float
    e_ifs: float
    e_slp: float
    l_hdr: int = BLE_HEADER_BYTES

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    @classmethod
    def from_file(cls, path) -> "EnergyParams":
        """Read flat ``key = value`` text; ``#`` starts a comment."""
        values = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            values[key.strip().lower()] = value.strip()
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"{path}: unknown parameters {sorted(unknown)}")
        missing = known - set(values) - {"l_hdr"}
        if missing:
            raise ValueError(f"{path}: missing parameters {sorted(missing)}")
        kwargs = {k: float(v) for k, v in values.items() if k != "l_hdr"}
        if "l_hdr" in values:
            kwargs["l_hdr"] = int(values["l_hdr"])
        return cls(**kwargs)


@dataclass(frozen=True)
class CryptoCostTable:
    """Measured cost of each primitive on an ARM Cortex-M0+, in µJ."""

    ecdhe_per_op: float = 34130.0
    ecdsa_sign_per_op: float = 11860.0
    ecdsa_verify_per_op: float = 35090.0
    sha256_digest_per_byte: float = 0.041
    sha256_hmac_per_byte: float = 0.056
    aes128_per_byte: float = 0.134

    def to_dict(self) -> dict:
        """Report units: mJ per operation for ECC, µJ per byte for the rest."""
        return {
            "P-256 ECDHE (mJ/op)": self.ecdhe_per_op / 1000,
            "P-256 ECDSA-Sign (mJ/op)": self.ecdsa_sign_per_op / 1000,
            "P-256 ECDSA-Verify (mJ/op)": self.ecdsa_verify_per_op / 1000,
            "SHA-256 Message Digest (uJ/B)": self.sha256_digest_per_byte,
            "SHA-256 HMAC 64-byte key (uJ/B)": self.sha256_hmac_per_byte,
            "AES-128 (uJ/B)": self.aes128_per_byte,
        }


DEFAULT_COSTS = CryptoCostTable()


def _check(n: int, payload: int) -> None:
    if n < 1:
        raise BadFragmentCount(f"fragment count must be at least 1, got {n}")
    if payload < 0:
        raise ValueError("payload length must be non-negative")


def tx_energy(params: EnergyParams, payload_bytes: int, fragments: int = 1) -> float:
    """Energy (µJ) for sending ``payload_bytes`` split over ``fragments`` packets."""
    _check(fragments, payload_bytes)
    n, p = fragments, params
    return (
        p.e_wu
        + n * p.l_hdr * p.e_rx
        + (2 * n - 1) * p.e_ifs
        + (n * p.l_hdr + payload_bytes) * p.e_tx
        + p.e_slp
    )


def rx_energy(params: EnergyParams, payload_bytes: int, fragments: int = 1) -> float:
    """Energy (µJ) for receiving; the mirror image of :func:`tx_energy`."""
    _check(fragments, payload_bytes)
    n, p = fragments, params
    return (
        p.e_wu
        + (n * p.l_hdr + payload_bytes) * p.e_rx
        + (2 * n - 1) * p.e_ifs
        + n * p.l_hdr * p.e_tx
        + p.e_slp
    )


def fragments_for(size: int, max_payload: int = BLE_MAX_PAYLOAD) -> int:
    return max(1, math.ceil(size / max_payload))


def cert_transfer_energy(params: EnergyParams, cert_size: int, max_payload: int = BLE_MAX_PAYLOAD) -> tuple[float, float]:
    """(send, receive) energy in µJ for one certificate."""
    if cert_size <= 0:
        raise ValueError("certificate size must be positive")
    n = fragments_for(cert_size, max_payload)
    return tx_energy(params, cert_size, n), rx_energy(params, cert_size, n)


def pairing_overhead_uj(table: CryptoCostTable = DEFAULT_COSTS, signs: int = 0, verifies: int = 0,
                        ecdh_ops: int = 0) -> float:
    if min(signs, verifies, ecdh_ops) < 0:
        raise ValueError("operation counts must be non-negative")
    return signs * table.ecdsa_sign_per_op + verifies * table.ecdsa_verify_per_op + ecdh_ops * table.ecdhe_per_op


def pairing_overhead(table: CryptoCostTable = DEFAULT_COSTS, signs: int = 0, verifies: int = 0,
                     ecdh_ops: int = 0) -> float:
    """Public-key work of a handshake in mJ."""
    return pairing_overhead_uj(table, signs, verifies, ecdh_ops) / 1000


def energy_report(params: EnergyParams, cert_size: int = 103, table: CryptoCostTable = DEFAULT_COSTS,
                  max_payload: int = BLE_MAX_PAYLOAD) -> dict:
    tx, rx = cert_transfer_energy(params, cert_size, max_payload)
    return {
        "params": asdict(params),
        "cert_size": cert_size,
        "fragments": fragments_for(cert_size, max_payload),
        "cert_tx_uJ": tx,
        "cert_rx_uJ": rx,
        "crypto_costs": table.to_dict(),
        "handshake_mJ": {
            "verify_only": pairing_overhead(table, verifies=1),
            "sign_only": pairing_overhead(table, signs=1),
            "per_endpoint": pairing_overhead(table, verifies=1, ecdh_ops=1),
            "per_endpoint_with_sign": pairing_overhead(table, signs=1, verifies=1, ecdh_ops=1),
        },
    }


def render_report(report: dict) -> str:
    lines = [
        f"certificate size     {report['cert_size']} B in {report['fragments']} fragment(s)",
        f"transmit energy      {report['cert_tx_uJ']:.3f} uJ",
        f"receive energy       {report['cert_rx_uJ']:.3f} uJ",
        "",
        "crypto cost table",
    ]
    width = max(len(k) for k in report["crypto_costs"])
    lines += [f"  {k:<{width}}  {v:g}" for k, v in report["crypto_costs"].items()]
    lines.append("")
    lines.append("handshake public-key work (mJ)")
    lines += [f"  {k:<24}{v:.2f}" for k, v in report["handshake_mJ"].items()]
    return "\n".join(lines)
