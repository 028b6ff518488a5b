"""NIST P-256 (prime256v1) group arithmetic.

Points are affine ``(x, y)`` tuples, with ``None`` standing for the point at
infinity. Internally multiplication runs in Jacobian coordinates; the base
point uses a precomputed fixed-window table. Not constant time.
"""

from __future__ import annotations

from typing import Optional, Tuple

Point = Optional[Tuple[int, int]]

P = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
N = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
A = P - 3
B = 0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B
GX = 0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296
GY = 0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5
G = (GX, GY)

_WINDOW = 4
_base_table: list[list[Point]] | None = None


def is_on_curve(point: Point) -> bool:
    if point is None:
        return False
    x, y = point
    if not (0 <= x < P and 0 <= y < P):
        return False
    return (y * y - (x * x * x + A * x + B)) % P == 0


def lift_x(x: int, odd: bool = False) -> Point:
    """Recover the point with abscissa ``x`` and the requested y parity.

    Returns ``None`` when ``x`` is out of range or ``x^3 + ax + b`` is a
    quadratic non-residue.
    """
    if not 0 <= x < P:
        return None
    rhs = (x * x * x + A * x + B) % P
    # p = 3 mod 4, so a square root is rhs^((p+1)/4)
    y = pow(rhs, (P + 1) // 4, P)
    if y * y % P != rhs:
        return None
    # y == 0 would need a point of order 2, which P-256 does not have
    if (y & 1) != odd:
        y = P - y
    return (x, y)


def negate(point: Point) -> Point:
    if point is None:
        return None
    return (point[0], (-point[1]) % P)


# Jacobian helpers: (X, Y, Z) represents (X/Z^2, Y/Z^3); Z == 0 is infinity.

def _jdouble(X1, Y1, Z1):
    if not Y1 or not Z1:
        return 0, 1, 0
    # a = -3 shortcut
    delta = Z1 * Z1 % P
    gamma = Y1 * Y1 % P
    beta = X1 * gamma % P
    alpha = 3 * (X1 - delta) * (X1 + delta) % P
    X3 = (alpha * alpha - 8 * beta) % P
    Z3 = ((Y1 + Z1) ** 2 - gamma - delta) % P
    Y3 = (alpha * (4 * beta - X3) - 8 * gamma * gamma) % P
    return X3, Y3, Z3


def _jadd(X1, Y1, Z1, X2, Y2, Z2):
    if not Z1:
        return X2, Y2, Z2
    if not Z2:
        return X1, Y1, Z1
    Z1Z1 = Z1 * Z1 % P
    Z2Z2 = Z2 * Z2 % P
    U1 = X1 * Z2Z2 % P
    U2 = X2 * Z1Z1 % P
    S1 = Y1 * Z2 * Z2Z2 % P
    S2 = Y2 * Z1 * Z1Z1 % P
    H = (U2 - U1) % P
    r = (S2 - S1) % P
    if not H:
        if not r:
            return _jdouble(X1, Y1, Z1)
        return 0, 1, 0
    HH = H * H % P
    HHH = H * HH % P
    V = U1 * HH % P
    X3 = (r * r - HHH - 2 * V) % P
    Y3 = (r * (V - X3) - S1 * HHH) % P
    Z3 = Z1 * Z2 * H % P
    return X3, Y3, Z3


def _jadd_affine(X1, Y1, Z1, x2, y2):
    """Mixed addition with an affine second operand."""
    if not Z1:
        return x2, y2, 1
    Z1Z1 = Z1 * Z1 % P
    U2 = x2 * Z1Z1 % P
    S2 = y2 * Z1 * Z1Z1 % P
    H = (U2 - X1) % P
    r = (S2 - Y1) % P
    if not H:
        if not r:
            return _jdouble(X1, Y1, Z1)
        return 0, 1, 0
    HH = H * H % P
    HHH = H * HH % P
    V = X1 * HH % P
    X3 = (r * r - HHH - 2 * V) % P
    Y3 = (r * (V - X3) - Y1 * HHH) % P
    Z3 = Z1 * H % P
    return X3, Y3, Z3


def _to_affine(X, Y, Z) -> Point:
    if not Z:
        return None
    zinv = pow(Z, -1, P)
    zinv2 = zinv * zinv % P
    return X * zinv2 % P, Y * zinv2 * zinv % P


def _build_base_table() -> list[list[Point]]:
    # table[i][j] = j * 16^i * G
    table = []
    base = (GX, GY, 1)
    for _ in range(256 // _WINDOW):
        row: list[Point] = [None]
        acc = (0, 1, 0)
        for _ in range(1, 1 << _WINDOW):
            acc = _jadd(*acc, *base)
            row.append(_to_affine(*acc))
        table.append(row)
        for _ in range(_WINDOW):
            base = _jdouble(*base)
    return table


def _base_mul_jacobian(k: int):
    global _base_table
    if _base_table is None:
        _base_table = _build_base_table()
    acc = (0, 1, 0)
    mask = (1 << _WINDOW) - 1
    i = 0
    while k:
        digit = k & mask
        if digit:
            x, y = _base_table[i][digit]
            acc = _jadd_affine(*acc, x, y)
        k >>= _WINDOW
        i += 1
    return acc


def _mul_jacobian(k: int, point: Tuple[int, int]):
    x, y = point
    # small window table of 0..15 * point
    pre = [(0, 1, 0), (x, y, 1)]
    for _ in range(2, 1 << _WINDOW):
        pre.append(_jadd(*pre[-1], x, y, 1))
    acc = (0, 1, 0)
    nibbles = []
    while k:
        nibbles.append(k & 0xF)
        k >>= 4
    for digit in reversed(nibbles):
        for _ in range(_WINDOW):
            acc = _jdouble(*acc)
        if digit:
            acc = _jadd(*acc, *pre[digit])
    return acc


def base_mul(k: int) -> Point:
    """Return ``k * G``."""
    k %= N
    if not k:
        return None
    return _to_affine(*_base_mul_jacobian(k))


def mul(k: int, point: Point) -> Point:
    """Return ``k * point``. The caller is responsible for validating ``point``."""
    k %= N
    if not k or point is None:
        return None
    return _to_affine(*_mul_jacobian(k, point))


def mul_add(u1: int, u2: int, point: Tuple[int, int]) -> Point:
    """Return ``u1 * G + u2 * point`` (the ECDSA verification combination)."""
    lhs = _base_mul_jacobian(u1 % N)
    rhs = _mul_jacobian(u2 % N, point)
    return _to_affine(*_jadd(*lhs, *rhs))


def add(p1: Point, p2: Point) -> Point:
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    return _to_affine(*_jadd(p1[0], p1[1], 1, p2[0], p2[1], 1))
