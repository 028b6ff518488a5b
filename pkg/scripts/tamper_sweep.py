#!/usr/bin/env python3
"""Flip every bit of freshly issued certificates and count verifier verdicts."""

import argparse
import random
from collections import Counter

from blecert.certificate import sign_certificate, verify_encoded
from blecert.crypto import generate_keypair, random_bytes


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--certs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    root = generate_keypair(rng)
    verdicts = Counter()
    by_field = Counter()
    fields = [("version", 0, 8), ("serial", 8, 56), ("key", 56, 312), ("signature", 312, 824)]
    for _ in range(args.certs):
        cert = sign_certificate(root.private, random_bytes(rng, 6), generate_keypair(rng).public.x_bytes)
        raw = cert.encode()
        for bit in range(len(raw) * 8):
            flipped = bytearray(raw)
            flipped[bit // 8] ^= 0x80 >> (bit % 8)
            status = verify_encoded(bytes(flipped), root.public)
            verdicts[status.value] += 1
            field = next(name for name, lo, hi in fields if lo <= bit < hi)
            by_field[field, status.value] += 1

    total = sum(verdicts.values())
    print(f"{total} flipped certificates")
    for status, count in sorted(verdicts.items()):
        print(f"  {status:<14}{count}")
    print("by field:")
    for (field, status), count in sorted(by_field.items()):
        print(f"  {field:<10}{status:<14}{count}")


if __name__ == "__main__":
    main()
