#!/usr/bin/env python3
"""Independent Monte Carlo oracle for per-round dropout fractions.

Models the poll exchange abstractly, without importing the simulator:
a leaflet value reaches the base station only if four independent frame
deliveries succeed (poll to the cluster head, poll to the leaflet, the
leaflet's reply, and the head's aggregate); the head's own value needs
two. Compares empirical NULL fractions against the closed forms
1-(1-p)^4 and 1-(1-p)^2.

Run: python scripts/dropout_monte_carlo.py [loss_prob] [rounds]
"""

import random
import sys


def simulate(loss_prob: float, rounds: int, seed: int = 20240601):
    rng = random.Random(seed)
    ok = lambda: rng.random() >= loss_prob

    leaflet_nulls = 0
    head_nulls = 0
    leaflet_obs = 0
    head_obs = 0
    for _ in range(rounds):
        for _head in range(2):
            ic_head = ok()
            # head's own value: poll to head + aggregate back
            leaflet_results = []
            if ic_head:
                for _leaf in range(2):
                    got = ok() and ok()  # poll to leaflet, reply back
                    leaflet_results.append(got)
                agg = ok()
            else:
                leaflet_results = [False, False]
                agg = False
            head_numeric = ic_head and agg
            head_obs += 1
            head_nulls += 0 if head_numeric else 1
            for got in leaflet_results:
                leaflet_obs += 1
                leaflet_nulls += 0 if (got and head_numeric) else 1
    return leaflet_nulls / leaflet_obs, head_nulls / head_obs


def main() -> None:
    p = float(sys.argv[1]) if len(sys.argv) > 1 else 0.05
    rounds = int(sys.argv[2]) if len(sys.argv) > 2 else 10_000
    leaf_frac, head_frac = simulate(p, rounds)
    leaf_expect = 1 - (1 - p) ** 4
    head_expect = 1 - (1 - p) ** 2
    print(f"loss_prob={p} rounds={rounds}")
    print(f"leaflet NULL fraction: {leaf_frac:.5f}  analytic {leaf_expect:.5f}  delta {leaf_frac - leaf_expect:+.5f}")
    print(f"head    NULL fraction: {head_frac:.5f}  analytic {head_expect:.5f}  delta {head_frac - head_expect:+.5f}")


if __name__ == "__main__":
    main()
