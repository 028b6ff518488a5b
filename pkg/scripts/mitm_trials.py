#!/usr/bin/env python3
"""Run every adversary against both handshake modes and tabulate outcomes.

    python3 scripts/mitm_trials.py --trials 200 --json results.json
"""

import argparse
import json
import time
from collections import Counter

from blecert.adversary import STRATEGIES, run_trials


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--strategies", nargs="+", default=sorted(STRATEGIES), choices=sorted(STRATEGIES))
    parser.add_argument("--json", metavar="PATH", help="also write per-cell counts here")
    args = parser.parse_args()

    rows = []
    for strategy in args.strategies:
        for baseline in (False, True):
            t0 = time.perf_counter()
            reports = run_trials(strategy, args.seed, args.trials, baseline)
            outcomes = Counter(
                f"{r.outcome.value}({r.abort_reason})" if r.abort_reason else r.outcome.value for r in reports
            )
            rows.append({
                "strategy": strategy,
                "mode": "just-works" if baseline else "cert-auth",
                "trials": args.trials,
                "outcomes": dict(outcomes),
                "keys_on_wire": sum(r.keys_on_wire for r in reports),
                "seconds": round(time.perf_counter() - t0, 2),
            })

    print(f"{'strategy':<14}{'mode':<12}outcomes")
    for row in rows:
        cells = ", ".join(f"{k} x{v}" for k, v in sorted(row["outcomes"].items()))
        print(f"{row['strategy']:<14}{row['mode']:<12}{cells}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
