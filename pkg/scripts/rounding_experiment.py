"""Single- versus double-precision evaluation against the first-order rounding bound."""
import argparse

import numpy as np

from netpoly.compiler import ve_compile
from netpoly.engine import differentiate, evaluate_at, rounding_error_bound
from netpoly.generate import random_evidence, random_network
from netpoly.model import leaf_assignment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--vars", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    eps = 2.0 ** -24
    ratios = []
    for _ in range(args.trials):
        net = random_network(rng, args.vars, max_parents=3)
        circuit = ve_compile(net)
        e = random_evidence(rng, net)
        point = {k: float(np.float32(v)) for k, v in leaf_assignment(net, e).items()}
        err = abs(float(evaluate_at(circuit, point, dtype=np.float32)) - evaluate_at(circuit, point))
        bound = rounding_error_bound(differentiate(circuit, e, net), eps)
        ratios.append(err / bound if bound > 0 else (0.0 if err == 0 else np.inf))
    ratios = np.array(ratios)
    print(f"trials {args.trials}")
    print(f"within bound {np.mean(ratios <= 1):.3%}")
    for q in (0.5, 0.9, 0.99, 1.0):
        print(f"error / bound, quantile {q:.2f}: {np.quantile(ratios, q):.4f}")


if __name__ == "__main__":
    main()
