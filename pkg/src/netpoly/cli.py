"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 input parse/validation, 3 numeric/query condition.
Reports go to stdout as ``key<TAB>value`` lines; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import math
import sys

from netpoly.compiler import (
    CircuitError, load_circuit, make_order, min_fill_order,
    serialize_circuit, size_bound, ve_compile, Add, Mul,
)
from netpoly.model import (
    EvidenceError, Indicator, NetworkError, Parameter, load_network,
    parse_assignments, parse_evidence, parse_parameter,
)
from netpoly.oracle import OracleSizeError, oracle_marginals, oracle_prob
from netpoly.queries import QueryError, QuerySession, ZeroProbabilityError


class UsageError(Exception):
    pass


class ConditionError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    if x == 0:
        x = 0.0
    return f"{x:.12g}"


def _emit(out, key: str, value) -> None:
    out.write(f"{key}\t{value if isinstance(value, str) else fmt(value)}\n")


def _target(text: str, network) -> Indicator:
    pair = parse_assignments(text)
    if len(pair) != 1:
        raise UsageError(f"expected exactly one Var=value, got {text!r}")
    (name, value), = pair.items()
    network.variable(name).index(value)
    return Indicator(name, value)


def _load(args):
    network = load_network(args.network)
    circuit = load_circuit(args.circuit)
    evidence = parse_evidence(args.evidence, network)
    return network, circuit, evidence


def cmd_compile(args, out) -> int:
    network = load_network(args.input)
    if args.order:
        names = [s.strip() for s in args.order.split(",") if s.strip()]
        try:
            order = make_order(network, names)
        except (ValueError, EvidenceError) as exc:
            raise UsageError(f"bad --order: {exc}") from None
    else:
        order = min_fill_order(network)
    circuit = ve_compile(network, order)
    text = serialize_circuit(circuit)
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    print(f"nodes {len(circuit)} edges {circuit.num_edges} width {order.width} "
          f"order {','.join(order.names(network))}", file=sys.stderr)
    return 0


def cmd_query(args, out) -> int:
    network, circuit, evidence = _load(args)
    session = QuerySession(circuit, network, evidence)
    failed = False
    show_prob = args.prob or not (args.marginals or args.families or args.retract or args.what_if)

    if show_prob:
        _emit(out, "P(e)", session.prob_evidence())
    for item in args.what_if:
        x = _target(item, network)
        _emit(out, f"P({x},e-{x.var})", session.what_if(x.var, x.value))
    for var in args.retract:
        network.variable(var)
        try:
            total, post = session.retraction(var)
        except ZeroProbabilityError:
            _emit(out, f"P(e-{var})", 0.0)
            failed = True
            continue
        _emit(out, f"P(e-{var})", total)
        for x, p in post.items():
            _emit(out, f"P({var}={x}|e-{var})", p)
    if args.marginals:
        try:
            for v in network.variables:
                for x, p in session.posterior_marginal(v.name).items():
                    _emit(out, f"P({v.name}={x}|e)", p)
        except ZeroProbabilityError:
            failed = True
    if args.families:
        try:
            for v in network.variables:
                for f, p in session.family_marginals(v.name).items():
                    head = ",".join([f"{f.child}={f.value}"] + [f"{a}={b}" for a, b in f.parents])
                    _emit(out, f"Pf({head}|e)", p)
        except ZeroProbabilityError:
            failed = True
    if failed:
        print("evidence has probability zero; conditional outputs omitted", file=sys.stderr)
        return 3
    return 0


def _param_key(f: Parameter) -> str:
    return f"theta({f})"


def cmd_sensitivity(args, out) -> int:
    network, circuit, evidence = _load(args)
    session = QuerySession(circuit, network, evidence)
    if args.all_targets:
        targets = [Indicator(v.name, x) for i, v in enumerate(network.variables)
                   if i not in evidence for x in v.values]
    elif args.target:
        targets = [_target(args.target, network)]
    else:
        raise UsageError("need --target or --all-targets")
    if args.all_params:
        params = network.parameters()
    elif args.param:
        params = [parse_parameter(args.param, network)]
    else:
        raise UsageError("need --param or --all-params")
    try:
        for y in targets:
            for f in params:
                _emit(out, f"dP({y}|e)/d{_param_key(f)}", session.sensitivity_theta(y, f))
    except QueryError as exc:
        raise ConditionError(str(exc)) from None
    return 0


def cmd_tweak(args, out) -> int:
    network, circuit, evidence = _load(args)
    y = _target(args.target, network)
    f = parse_parameter(args.param, network)
    if network.variable(y.var).card != 2 or network.variable(f.child).card != 2:
        raise UsageError("tweak needs binary target and binary parameter variable")
    session = QuerySession(circuit, network, evidence)
    try:
        res = session.tweak_binary(y, f)
    except QueryError as exc:
        raise ConditionError(str(exc)) from None
    if not res.feasible:
        _emit(out, "status", "INFEASIBLE")
        bound = res.theta_prime_min
        _emit(out, "theta_bound", "none" if math.isnan(bound) else round(bound, 5))
        return 0
    _emit(out, "delta_min", round(res.delta_min, 5))
    _emit(out, "theta_prime_min", round(res.theta_prime_min, 5))
    _emit(out, "direction", res.direction)
    if args.verify:
        xvar = network.variable(f.child)
        f_bar = Parameter(f.child, xvar.values[1 - xvar.index(f.value)], f.parents)
        tweaked = network.with_parameters({f: res.theta_prime_min, f_bar: 1.0 - res.theta_prime_min})
        try:
            pe = oracle_prob(tweaked, evidence)
            yvar = network.variable(y.var)
            y_bar = yvar.values[1 - yvar.index(y.value)]
            named = evidence.named(network)
            py = oracle_prob(tweaked, {**named, y.var: y.value}) / pe
            pyb = oracle_prob(tweaked, {**named, y.var: y_bar}) / pe
        except OracleSizeError as exc:
            print(f"verify skipped: {exc}", file=sys.stderr)
            return 0
        _emit(out, f"verify_P({y}|e)", py)
        _emit(out, f"verify_P({y.var}={y_bar}|e)", pyb)
        _emit(out, "verify", "OK" if py <= pyb + 1e-9 else "FAIL")
    return 0


def cmd_stats(args, out) -> int:
    circuit = load_circuit(args.circuit)
    n_add = sum(isinstance(n, Add) for n in circuit.nodes)
    n_mul = sum(isinstance(n, Mul) for n in circuit.nodes)
    n_ind = sum(isinstance(n, Indicator) for n in circuit.nodes)
    _emit(out, "nodes", str(len(circuit)))
    _emit(out, "edges", str(circuit.num_edges))
    _emit(out, "indicators", str(n_ind))
    _emit(out, "parameters", str(len(circuit) - n_add - n_mul - n_ind))
    _emit(out, "adds", str(n_add))
    _emit(out, "muls", str(n_mul))
    if args.network:
        network = load_network(args.network)
        order = min_fill_order(network)
        if args.order:
            names = [s.strip() for s in args.order.split(",") if s.strip()]
            try:
                order = make_order(network, names)
            except (ValueError, EvidenceError) as exc:
                raise UsageError(f"bad --order: {exc}") from None
        _emit(out, "variables", str(len(network)))
        _emit(out, "width", str(order.width))
        _emit(out, "size_bound", str(size_bound(len(network), order.width)))
    return 0


def cmd_oracle(args, out) -> int:
    network = load_network(args.network)
    evidence = parse_evidence(args.evidence, network)
    try:
        pe = oracle_prob(network, evidence)
        _emit(out, "P(e)", pe)
        if pe <= 0:
            return 3
        for var, post in oracle_marginals(network, evidence).items():
            for x, p in post.items():
                _emit(out, f"P({var}={x}|e)", p)
    except OracleSizeError as exc:
        raise ConditionError(str(exc)) from None
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netpoly", description="Compile Bayesian networks to arithmetic circuits and query them.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="compile a network file to a circuit file")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output")
    p.add_argument("--order", help="comma-separated elimination order (default: min-fill)")
    p.set_defaults(func=cmd_compile)

    def session_args(p):
        p.add_argument("-c", "--circuit", required=True)
        p.add_argument("-n", "--network", required=True)
        p.add_argument("-e", "--evidence", default="")

    p = sub.add_parser("query", help="probability of evidence, marginals, retraction, what-if")
    session_args(p)
    p.add_argument("--prob", action="store_true")
    p.add_argument("--marginals", action="store_true")
    p.add_argument("--families", action="store_true")
    p.add_argument("--retract", action="append", default=[], metavar="X")
    p.add_argument("--what-if", action="append", default=[], metavar="X=v")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("sensitivity", help="dPr(y|e)/dtheta rows")
    session_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--target", metavar="Y=v")
    g.add_argument("--all-targets", action="store_true")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--param", metavar="X=x|U=u,...")
    g.add_argument("--all-params", action="store_true")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("tweak", help="minimal parameter change flipping a binary ranking")
    session_args(p)
    p.add_argument("--target", required=True, metavar="Y=v")
    p.add_argument("--param", required=True, metavar="X=x|U=u,...")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_tweak)

    p = sub.add_parser("stats", help="circuit size statistics")
    p.add_argument("-c", "--circuit", required=True)
    p.add_argument("-n", "--network")
    p.add_argument("--order")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("oracle")
    p.add_argument("-n", "--network", required=True)
    p.add_argument("-e", "--evidence", default="")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"netpoly: {exc}", file=sys.stderr)
        return 1
    except (NetworkError, EvidenceError, CircuitError, OSError) as exc:
        print(f"netpoly: {exc}", file=sys.stderr)
        return 2
    except ConditionError as exc:
        print(f"netpoly: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
