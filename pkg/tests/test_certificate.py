import random

import pytest
from hypothesis import given, settings, strategies as st

from blecert.certificate import (
    CERT_SIZE,
    BleCertificate,
    CertStatus,
    decode,
    encode,
    load_certificate,
    save_certificate,
    sign_certificate,
    size_report,
    verify_cert,
    verify_encoded,
)
from blecert.crypto import Signature, generate_keypair
from blecert.errors import BadLength, BadVersion

import oracles

ROOT = generate_keypair(random.Random("cert-root"))
SUBJECT = generate_keypair(random.Random("cert-subject"))
SERIAL = bytes.fromhex("A4C138000001")


@pytest.fixture(scope="module")
def cert():
    return sign_certificate(ROOT.private, SERIAL, SUBJECT.public.x_bytes)


def test_layout(cert):
    raw = cert.encode()
    assert len(raw) == CERT_SIZE == 103
    assert raw[0] == 0x01
    assert raw[1:7] == SERIAL
    assert raw[7:39] == SUBJECT.public.x_bytes
    assert raw[39:] == cert.signature.to_bytes()
    assert cert.tbs() == raw[:39]


def test_signature_is_oracle_checkable(cert):
    sig = cert.signature
    assert oracles.ecdsa_verify_oracle(ROOT.public.x, ROOT.public.y, cert.tbs(), sig.r, sig.s)
    assert (sig.r, sig.s) == oracles.ecdsa_sign_deterministic(ROOT.private, cert.tbs())


def test_round_trip_and_valid(cert):
    assert decode(encode(cert)) == cert
    assert verify_cert(cert, ROOT.public) is CertStatus.VALID
    assert cert.public_key() == SUBJECT.public
    assert cert.mac == "A4:C1:38:00:00:01"


@settings(max_examples=100)
@given(st.binary(min_size=6, max_size=6), st.binary(min_size=32, max_size=32),
       st.integers(min_value=1, max_value=oracles.N - 1), st.integers(min_value=1, max_value=oracles.N - 1))
def test_codec_round_trip(serial, key, r, s):
    c = BleCertificate(serial, key, Signature(r, s))
    raw = c.encode()
    assert len(raw) == 103
    assert decode(raw) == c


@given(st.binary(max_size=300).filter(lambda b: len(b) != 103))
def test_bad_length(data):
    with pytest.raises(BadLength):
        decode(data)


@given(st.integers(min_value=0, max_value=255).filter(lambda v: v != 1))
def test_bad_version(version):
    raw = bytearray(sign_certificate(ROOT.private, SERIAL, SUBJECT.public.x_bytes).encode())
    raw[0] = version
    with pytest.raises(BadVersion):
        decode(bytes(raw))
    assert verify_encoded(bytes(raw), ROOT.public) is CertStatus.BAD_SIGNATURE


def test_wrong_root(cert):
    other = generate_keypair(random.Random("other-root"))
    assert verify_cert(cert, other.public) is CertStatus.BAD_SIGNATURE


def test_bad_point_detected():
    x = next(x for x in range(1, 1000) if not oracles.is_quadratic_residue(x ** 3 - 3 * x + oracles.B))
    forged = sign_certificate(ROOT.private, SERIAL, x.to_bytes(32, "big"))
    assert verify_cert(forged, ROOT.public) is CertStatus.BAD_POINT


def test_every_bit_flip_rejected(cert):
    raw = cert.encode()
    for bit in range(len(raw) * 8):
        flipped = bytearray(raw)
        flipped[bit // 8] ^= 0x80 >> (bit % 8)
        assert verify_encoded(bytes(flipped), ROOT.public) is not CertStatus.VALID, bit


def test_files_raw_and_armored(cert, tmp_path):
    armored, raw = tmp_path / "a.cert", tmp_path / "r.cert"
    save_certificate(armored, cert)
    save_certificate(raw, cert, armored=False)
    assert armored.read_text().strip() == cert.hex()
    assert raw.read_bytes() == cert.encode()
    assert load_certificate(armored) == load_certificate(raw) == cert


def test_truncated_file(cert, tmp_path):
    path = tmp_path / "short.cert"
    path.write_text(cert.hex()[:50])
    with pytest.raises(BadLength):
        load_certificate(path)


def test_size_report():
    report = size_report()
    assert report.x509_total == 1518
    assert report.ble_total == 103
    assert report.to_dict()["reduction_percent"] == 93.2
    assert round(100 * report.reduction) == 93
    text = report.render()
    assert "1518" in text and "93.2%" in text
