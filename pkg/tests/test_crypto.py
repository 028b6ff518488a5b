import random

import pytest
from hypothesis import given, settings, strategies as st

from blecert import p256
from blecert.crypto import (
    SALT,
    DeviceAddress,
    PublicKey,
    SecureChannel,
    Signature,
    aes_cmac,
    ecdh,
    ecdsa_sign,
    ecdsa_verify,
    f4_confirm,
    f5_ltk,
    generate_keypair,
    public_key_for,
    random_bytes,
    session_open,
    session_seal,
)
from blecert.errors import AuthFailure, InvalidPoint, RandomnessFailure, ReplayDetected, ZeroSecret

import oracles

RFC4493_KEY = bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c")
RFC4493_MSG = bytes.fromhex(
    "6bc1bee22e409f96e93d7e117393172a"
    "ae2d8a571e03ac9c9eb76fac45af8e51"
    "30c81c46a35ce411e5fbc1191a0a52ef"
    "f69f2445df4f9b17ad2b417be66c3710"
)
RFC4493_VECTORS = [
    (0, "bb1d6929e95937287fa37d129b756746"),
    (16, "070a16b46b4d4144f79bdd9dd04a287c"),
    (40, "dfa66747de9ae63030ca32611497c827"),
    (64, "51f0bebf7e3b9d92fc49741779363cfe"),
]

# NIST CAVP KAS ECC CDH, P-256, COUNT = 0
CAVP_QCAVS = (
    0x700C48F77F56584C5CC632CA65640DB91B6BACCE3A4DF6B42CE7CC838833D287,
    0xDB71E509E3FD9B060DDB20BA5C51DCC5948D46FBF640DFE0441782CAB85FA4AC,
)
CAVP_D_IUT = 0x7D7DC5F71EB29DDAF80D6214632EEAE03D9058AF1FB6D22ED80BADB62BC1A534
CAVP_QIUT_X = 0xEAD218590119E8876B29146FF89CA61770C4EDBBF97D38CE385ED281D8A6B230
CAVP_Z = "46fc62106420ff012e54a434fbdd2d25ccc5852060561e68040dd7778997bd7b"


class _FixedRng:
    """Replays the given byte strings in order."""

    def __init__(self, *chunks):
        self.chunks = list(chunks)

    def randbytes(self, n):
        return self.chunks.pop(0)


class _DeadRng:
    def randbytes(self, n):
        raise OSError("entropy source unavailable")


# -- curve ------------------------------------------------------------------

def test_curve_constants_match_reference():
    assert (p256.P, p256.N, p256.B, p256.GX, p256.GY) == (oracles.P, oracles.N, oracles.B, oracles.GX, oracles.GY)
    assert p256.is_on_curve(p256.G)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=oracles.N - 1))
def test_base_mul_matches_affine_reference(k):
    assert p256.base_mul(k) == oracles.scalar_mult(k, (oracles.GX, oracles.GY))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=oracles.N - 1), st.integers(min_value=1, max_value=oracles.N - 1))
def test_mul_add_matches_reference(u1, u2):
    q = oracles.scalar_mult(7, (oracles.GX, oracles.GY))
    expected = oracles.affine_add(oracles.scalar_mult(u1, (oracles.GX, oracles.GY)), oracles.scalar_mult(u2, q))
    assert p256.mul_add(u1, u2, q) == expected


def test_order_times_generator_is_identity():
    assert p256.base_mul(p256.N) is None
    assert p256.mul(p256.N, p256.G) is None


# -- key generation and ECDH ---------------------------------------------------

def test_keygen_is_seeded_and_even_y():
    a = generate_keypair(random.Random(1))
    b = generate_keypair(random.Random(1))
    assert a == b
    for seed in range(200):
        kp = generate_keypair(random.Random(seed))
        assert kp.public.y % 2 == 0
        assert 1 <= kp.private < p256.N
        assert oracles.on_curve(kp.public.x, kp.public.y)


def test_keygen_skips_odd_y_candidate():
    # d = 1 gives G, whose y is odd, so the generator must draw again
    assert p256.GY % 2 == 1
    k = next(k for k in range(2, 100) if oracles.scalar_mult(k, (oracles.GX, oracles.GY))[1] % 2 == 0)
    kp = generate_keypair(_FixedRng((1).to_bytes(32, "big"), k.to_bytes(32, "big")))
    assert kp.private == k
    assert kp.public.y % 2 == 0


def test_keygen_rejects_out_of_range_scalars():
    k = next(k for k in range(2, 100) if oracles.scalar_mult(k, (oracles.GX, oracles.GY))[1] % 2 == 0)
    kp = generate_keypair(_FixedRng(b"\x00" * 32, b"\xff" * 32, k.to_bytes(32, "big")))
    assert kp.private == k


def test_cavp_ecdh_vector():
    assert public_key_for(CAVP_D_IUT).x == CAVP_QIUT_X
    remote = PublicKey(*CAVP_QCAVS)
    assert ecdh(CAVP_D_IUT, remote).hex() == CAVP_Z


def test_ecdh_symmetry_and_oracle():
    rng = random.Random(2024)
    for _ in range(100):
        a, b = generate_keypair(rng), generate_keypair(rng)
        ab = ecdh(a.private, b.public)
        assert ab == ecdh(b.private, a.public)
        assert ab == oracles.ecdh_oracle(a.private, b.public.x, b.public.y)


def test_ecdh_rejects_off_curve_point():
    kp = generate_keypair(random.Random(3))
    bad = PublicKey(kp.public.x, (kp.public.y + 1) % p256.P)
    with pytest.raises(InvalidPoint):
        ecdh(kp.private, bad)
    with pytest.raises(InvalidPoint):
        ecdh(kp.private, PublicKey(p256.P, 0))


def test_from_x_rejects_non_residue():
    x = next(x for x in range(1, 1000) if not oracles.is_quadratic_residue(x ** 3 - 3 * x + oracles.B))
    with pytest.raises(InvalidPoint):
        PublicKey.from_x(x.to_bytes(32, "big"))


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_from_x_restores_even_y_key(seed):
    kp = generate_keypair(random.Random(seed))
    assert PublicKey.from_x(kp.public.x_bytes) == kp.public


# -- CMAC and the derived functions ----------------------------------------

@pytest.mark.parametrize("length,expected", RFC4493_VECTORS)
def test_cmac_rfc4493(length, expected):
    msg = RFC4493_MSG[:length]
    assert aes_cmac(RFC4493_KEY, msg).hex() == expected
    assert oracles.cmac_oracle(RFC4493_KEY, msg).hex() == expected


@given(st.binary(min_size=16, max_size=16), st.binary(max_size=100))
def test_cmac_matches_oracle(key, msg):
    assert aes_cmac(key, msg) == oracles.cmac_oracle(key, msg)


def test_f4_composition():
    rng = random.Random(11)
    pk_c, pk_p = generate_keypair(rng).public, generate_keypair(rng).public
    n_p = rng.randbytes(16)
    assert f4_confirm(pk_c, pk_p, n_p) == oracles.cmac_oracle(n_p, pk_c.x_bytes + pk_p.x_bytes)


def test_f4_every_bit_of_nonce_matters():
    rng = random.Random(12)
    pk_c, pk_p = generate_keypair(rng).public, generate_keypair(rng).public
    n_p = rng.randbytes(16)
    base = f4_confirm(pk_c, pk_p, n_p)
    x = pk_c.x_bytes
    for bit in range(256):
        flipped = bytearray(x)
        flipped[bit // 8] ^= 0x80 >> (bit % 8)
        assert oracles.cmac_oracle(n_p, bytes(flipped) + pk_p.x_bytes) != base
    for bit in range(128):
        flipped = bytearray(n_p)
        flipped[bit // 8] ^= 0x80 >> (bit % 8)
        assert f4_confirm(pk_c, pk_p, bytes(flipped)) != base


def test_f5_two_stage_composition():
    rng = random.Random(13)
    secret, n_c, n_p = rng.randbytes(32), rng.randbytes(16), rng.randbytes(16)
    mac_c = DeviceAddress(bytes.fromhex("C0FFEE000001"), 0)
    mac_p = DeviceAddress(bytes.fromhex("C0FFEE000002"), 1)
    expected = oracles.ltk_oracle(secret, n_c, n_p, mac_c.to_bytes(), mac_p.to_bytes())
    assert f5_ltk(secret, n_c, n_p, mac_c, mac_p) == expected
    assert SALT.hex().upper() == "6C888391AAF5A53860370BDB5A6083BE"
    assert mac_p.to_bytes() == bytes.fromhex("C0FFEE00000201")


def test_f5_depends_on_every_input():
    rng = random.Random(14)
    secret, n_c, n_p = rng.randbytes(32), rng.randbytes(16), rng.randbytes(16)
    a, b = DeviceAddress(b"\x01" * 6), DeviceAddress(b"\x02" * 6)
    base = f5_ltk(secret, n_c, n_p, a, b)
    assert f5_ltk(secret, n_p, n_c, a, b) != base
    assert f5_ltk(secret, n_c, n_p, b, a) != base
    assert f5_ltk(secret, n_c, n_p, a, DeviceAddress(b"\x02" * 6, 1)) != base
    assert f5_ltk(bytes(31) + b"\x01", n_c, n_p, a, b) != base
    with pytest.raises(ZeroSecret):
        f5_ltk(bytes(32), n_c, n_p, a, b)


# -- ECDSA ------------------------------------------------------------------

def test_deterministic_signature_matches_oracle():
    rng = random.Random(21)
    for i in range(20):
        kp = generate_keypair(rng)
        msg = f"message {i}".encode()
        sig = ecdsa_sign(kp.private, msg, deterministic=True)
        assert (sig.r, sig.s) == oracles.ecdsa_sign_deterministic(kp.private, msg)


def test_random_nonce_signatures_verify_under_oracle():
    rng = random.Random(22)
    kp = generate_keypair(rng)
    for i in range(20):
        msg = rng.randbytes(39)
        sig = ecdsa_sign(kp.private, msg, rng)
        assert ecdsa_verify(kp.public, msg, sig)
        assert oracles.ecdsa_verify_oracle(kp.public.x, kp.public.y, msg, sig.r, sig.s)


def test_oracle_signatures_verify_here():
    rng = random.Random(23)
    kp = generate_keypair(rng)
    r, s = oracles.ecdsa_sign_deterministic(kp.private, b"cross-check")
    assert ecdsa_verify(kp.public, b"cross-check", Signature(r, s))


def test_signature_bit_flips_rejected():
    rng = random.Random(24)
    kp = generate_keypair(rng)
    msg = b"flip every bit of me"
    raw = ecdsa_sign(kp.private, msg, rng).to_bytes()
    for bit in range(512):
        flipped = bytearray(raw)
        flipped[bit // 8] ^= 0x80 >> (bit % 8)
        assert not ecdsa_verify(kp.public, msg, Signature.from_bytes(bytes(flipped)))


def test_signature_rejects_degenerate_values():
    kp = generate_keypair(random.Random(25))
    sig = ecdsa_sign(kp.private, b"m", deterministic=True)
    for r, s in [(0, sig.s), (sig.r, 0), (p256.N, sig.s), (sig.r, p256.N)]:
        assert not ecdsa_verify(kp.public, b"m", Signature(r, s))


def test_signature_wrong_key_or_message():
    rng = random.Random(26)
    a, b = generate_keypair(rng), generate_keypair(rng)
    sig = ecdsa_sign(a.private, b"hello", rng)
    assert not ecdsa_verify(b.public, b"hello", sig)
    assert not ecdsa_verify(a.public, b"hellp", sig)


def test_sign_empty_message_rejected():
    with pytest.raises(ValueError):
        ecdsa_sign(5, b"", deterministic=True)


# -- session link ---------------------------------------------------------

@given(st.binary(max_size=200), st.integers(min_value=0, max_value=2**40))
def test_session_round_trip(plaintext, counter):
    ltk = bytes(range(16))
    frame = session_seal(ltk, counter, plaintext)
    assert session_open(ltk, frame) == (counter, plaintext)


def test_session_tamper_detected():
    rng = random.Random(31)
    ltk = rng.randbytes(16)
    for _ in range(100):
        frame = bytearray(session_seal(ltk, 1, rng.randbytes(rng.randrange(1, 64))))
        pos = rng.randrange(len(frame))
        frame[pos] ^= 1 << rng.randrange(8)
        with pytest.raises((AuthFailure, ReplayDetected)):
            session_open(ltk, bytes(frame), last_counter=0)


def test_session_direction_bound():
    ltk = bytes(16)
    with pytest.raises(AuthFailure):
        session_open(ltk, session_seal(ltk, 0, b"x", direction=0), direction=1)


def test_channel_replay_detected():
    ltk = random.Random(32).randbytes(16)
    central, peripheral = SecureChannel(ltk, 0), SecureChannel(ltk, 1)
    first = central.seal(b"one")
    assert peripheral.open(first) == b"one"
    assert peripheral.open(central.seal(b"two")) == b"two"
    with pytest.raises(ReplayDetected):
        peripheral.open(first)


# -- randomness ---------------------------------------------------------------

def test_randomness_failure_surfaces():
    with pytest.raises(RandomnessFailure):
        random_bytes(_DeadRng(), 16)
    with pytest.raises(RandomnessFailure):
        generate_keypair(_DeadRng())


def test_short_randomness_is_a_failure():
    with pytest.raises(RandomnessFailure):
        random_bytes(_FixedRng(b"\x00" * 3), 16)
