"""Compiled size versus n * 2^(w+1) on random networks.

Prints one row per network and the largest observed ratio, which must stay
below the documented constant.
"""
import argparse
import time

import numpy as np

from netpoly.compiler import SIZE_CONSTANT, min_fill_order, ve_compile
from netpoly.engine import differentiate
from netpoly.generate import random_evidence, random_network


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--networks", type=int, default=50)
    ap.add_argument("--max-vars", type=int, default=30)
    ap.add_argument("--max-parents", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print("n\twidth\tnodes\tedges\tratio\tpasses_ms")
    worst = 0.0
    for _ in range(args.networks):
        n = int(rng.integers(2, args.max_vars + 1))
        net = random_network(rng, n, max_parents=args.max_parents, edge_prob=float(rng.uniform(0.1, 0.6)))
        order = min_fill_order(net)
        circuit = ve_compile(net, order)
        start = time.perf_counter()
        state = differentiate(circuit, random_evidence(rng, net), net)
        ms = (time.perf_counter() - start) * 1e3
        assert state.edge_visits == 2 * circuit.num_edges
        ratio = len(circuit) / (n * 2 ** (order.width + 1))
        worst = max(worst, ratio)
        print(f"{n}\t{order.width}\t{len(circuit)}\t{circuit.num_edges}\t{ratio:.3f}\t{ms:.2f}")
    print(f"\nmax ratio {worst:.3f} (constant {SIZE_CONSTANT})")


if __name__ == "__main__":
    main()
