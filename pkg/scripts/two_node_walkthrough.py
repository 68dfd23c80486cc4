"""Walk through the two-variable A -> B network: compile, both passes, every query kind."""
import argparse
from pathlib import Path

from netpoly import (
    Evidence, Indicator, MetaParameter, Parameter, QuerySession, differentiate,
    load_network, parse_evidence, rounding_error_bound, serialize_circuit, ve_compile,
)

DATA = Path(__file__).resolve().parents[1] / "data" / "two_node.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--network", default=str(DATA))
    ap.add_argument("--show-circuit", action="store_true")
    args = ap.parse_args()

    net = load_network(args.network)
    circuit = ve_compile(net, ["B", "A"])
    print(f"circuit: {len(circuit)} nodes, {circuit.num_edges} edges")
    if args.show_circuit:
        print(serialize_circuit(circuit), end="")

    e = parse_evidence("A=true", net)
    state = differentiate(circuit, e, net)
    print(f"\nevidence A=true: F = {state.value:.6g}")
    for leaf, d in state.leaf_derivatives().items():
        print(f"  dF/d[{leaf}] = {d:.6g}")
    print(f"  rounding bound (eps = 2^-53): {rounding_error_bound(state, 2.0 ** -53):.3e}")

    s = QuerySession(circuit, net, e)
    print(f"\nPr(B | A=true) = {s.posterior_marginal('B')}")
    total, post = s.retraction("A")
    print(f"retract A: Pr(e-A) = {total:.6g}, Pr(A | e-A) = {post}")
    print(f"what if A=false: Pr(A=false, e-A) = {s.what_if('A', 'false'):.6g}")

    prior = QuerySession(circuit, net, Evidence())
    b = Indicator("B", "true")
    print(f"\nprior Pr(B) = {prior.posterior_marginal('B')}")
    print(f"dPr(b)/dtheta_a = {prior.sensitivity_theta(b, Parameter('A', 'true')):.6g}")
    meta = MetaParameter("A", (), {"true": 1.0, "false": -1.0})
    print(f"dPr(b)/dtau_A   = {prior.sensitivity_meta(b, meta):.6g}")
    res = prior.tweak_binary(b, Parameter("A", "true"))
    print(f"make Pr(b) <= Pr(bbar): {res.direction} theta_a by {res.delta_min:.5f} to {res.theta_prime_min:.5f}")


if __name__ == "__main__":
    main()
