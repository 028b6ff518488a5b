#!/usr/bin/env python3
"""Compare the radio cost of sending a compact certificate vs. a full X.509 one.

Radio constants are hardware specific, so they come from a key=value file
(see ``blecert energy --help``). Without one, a unit radio is used: 1 uJ per
byte each way and nothing else, which makes the numbers read as byte counts.
"""

import argparse

from blecert.certificate import size_report
from blecert.energy import (
    BLE_MAX_PAYLOAD,
    DEFAULT_COSTS,
    EnergyParams,
    cert_transfer_energy,
    fragments_for,
    pairing_overhead,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--params", help="radio parameter file")
    parser.add_argument("--max-payload", type=int, default=BLE_MAX_PAYLOAD)
    args = parser.parse_args()

    params = EnergyParams.from_file(args.params) if args.params else EnergyParams(0, 1, 1, 0, 0)
    sizes = size_report()

    print(f"{'certificate':<12}{'bytes':>7}{'frags':>7}{'tx uJ':>12}{'rx uJ':>12}")
    results = {}
    for name, size in (("compact", sizes.ble_total), ("X.509", sizes.x509_total)):
        tx, rx = cert_transfer_energy(params, size, args.max_payload)
        results[name] = tx + rx
        print(f"{name:<12}{size:>7}{fragments_for(size, args.max_payload):>7}{tx:>12.3f}{rx:>12.3f}")
    if results["X.509"]:
        print(f"\nradio saving per exchange: {100 * (1 - results['compact'] / results['X.509']):.1f}%")

    print("\npublic-key work per endpoint (mJ)")
    print(f"  verify peer certificate   {pairing_overhead(verifies=1):.2f}")
    print(f"  ECDH                      {pairing_overhead(ecdh_ops=1):.2f}")
    print(f"  both                      {pairing_overhead(verifies=1, ecdh_ops=1):.2f}")
    print(f"  signing (authority side)  {pairing_overhead(signs=1):.2f}")
    print(f"\nAES-128 at {DEFAULT_COSTS.aes128_per_byte} uJ/B: 16-byte confirm costs "
          f"{16 * DEFAULT_COSTS.aes128_per_byte:.3f} uJ")


if __name__ == "__main__":
    main()
