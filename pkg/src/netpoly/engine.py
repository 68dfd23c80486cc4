"""Upward (value) and downward (derivative) passes over a compiled circuit.

The downward pass accumulates ``pd`` into per-node slots in reverse node order.
Mul nodes hand each child the product of its siblings' values using prefix and
suffix products, so a zero-valued child never forces a division.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

from netpoly.compiler import Add, Circuit, CircuitError, Mul
from netpoly.model import Evidence, EvidenceError, Indicator, Leaf, Network

_IND, _PAR, _ADD, _MUL = range(4)


@dataclass(frozen=True)
class _Program:
    kinds: tuple[int, ...]
    # children for internal nodes, dense leaf address (var, value | table index) for leaves
    args: tuple[tuple[int, ...], ...]
    root: int
    num_edges: int


@lru_cache(maxsize=128)
def _bind(circuit: Circuit, network: Network | None) -> _Program:
    kinds, args = [], []
    for node in circuit.nodes:
        if isinstance(node, Add):
            kinds.append(_ADD)
            args.append(node.children)
        elif isinstance(node, Mul):
            kinds.append(_MUL)
            args.append(node.children)
        else:
            kinds.append(_IND if isinstance(node, Indicator) else _PAR)
            if network is None:
                args.append(())
                continue
            try:
                args.append(network.resolve(node))
            except EvidenceError as exc:
                raise CircuitError(f"circuit leaf {node} does not match the network: {exc}") from None
    return _Program(tuple(kinds), tuple(args), circuit.root, circuit.num_edges)


@dataclass
class PassState:
    """Per-query workspace: node values, node derivatives, and an edge counter."""

    circuit: Circuit
    network: Network
    evidence: Evidence
    val: list[float]
    pd: list[float] | None = None
    pins: Mapping[int, float] = field(default_factory=dict)
    edge_visits: int = 0

    @property
    def value(self) -> float:
        return self.val[self.circuit.root]

    def leaf_value(self, leaf: Leaf) -> float:
        return self.val[self.circuit.leaf_index[leaf]]

    def derivative(self, leaf: Leaf) -> float:
        if self.pd is None:
            raise RuntimeError("downward pass has not run")
        return self.pd[self.circuit.leaf_index[leaf]]

    def leaf_derivatives(self) -> dict[Leaf, float]:
        if self.pd is None:
            raise RuntimeError("downward pass has not run")
        return {leaf: self.pd[i] for leaf, i in self.circuit.leaf_index.items()}


def _forward(prog: _Program, leaf_val: Callable[[int, int, tuple], float],
             cast: Callable = float) -> tuple[list, int]:
    kinds, args = prog.kinds, prog.args
    val = [0.0] * len(kinds)
    edges = 0
    for i, kind in enumerate(kinds):
        a = args[i]
        if kind == _ADD:
            s = val[a[0]]
            for c in a[1:]:
                s = cast(s + val[c])
            val[i] = s
            edges += len(a)
        elif kind == _MUL:
            s = val[a[0]]
            for c in a[1:]:
                s = cast(s * val[c])
            val[i] = s
            edges += len(a)
        else:
            val[i] = cast(leaf_val(i, kind, a))
    return val, edges


def upward_pass(circuit: Circuit, evidence: Evidence, network: Network,
                pins: Mapping[Leaf, float] | None = None) -> PassState:
    """Set every node's value under (evidence, network CPTs).

    ``pins`` overrides individual leaf values without touching the circuit.
    """
    prog = _bind(circuit, network)
    pinned = {circuit.leaf_index[leaf]: float(v) for leaf, v in (pins or {}).items()}
    tables = [f.table for f in network.families]
    ind = evidence.indicator

    def leaf_val(i, kind, addr):
        if i in pinned:
            return pinned[i]
        if kind == _IND:
            return ind(*addr)
        return tables[addr[0]][addr[1]]

    val, edges = _forward(prog, leaf_val)
    return PassState(circuit, network, evidence, val, pins=pinned, edge_visits=edges)


def downward_pass(state: PassState) -> PassState:
    """Fill ``state.pd`` with the derivative of the root with respect to every node."""
    prog = _bind(state.circuit, state.network)
    kinds, args, val = prog.kinds, prog.args, state.val
    pd = [0.0] * len(kinds)
    pd[prog.root] = 1.0
    edges = 0
    for i in range(len(kinds) - 1, -1, -1):
        kind = kinds[i]
        if kind == _ADD:
            p = pd[i]
            for c in args[i]:
                pd[c] += p
            edges += len(args[i])
        elif kind == _MUL:
            p = pd[i]
            ch = args[i]
            k = len(ch)
            suffix = [1.0] * (k + 1)
            for j in range(k - 1, 0, -1):
                suffix[j] = suffix[j + 1] * val[ch[j]]
            prefix = p
            for j in range(k):
                pd[ch[j]] += prefix * suffix[j + 1]
                prefix *= val[ch[j]]
            edges += k
    state.pd = pd
    state.edge_visits += edges
    return state


def differentiate(circuit: Circuit, evidence: Evidence, network: Network,
                  pins: Mapping[Leaf, float] | None = None) -> PassState:
    return downward_pass(upward_pass(circuit, evidence, network, pins))


def evaluate_at(circuit: Circuit, assignment: Mapping[Leaf, float], dtype=float) -> float:
    """Polynomial value at an arbitrary leaf point.

    With ``dtype=numpy.float32`` every leaf and every intermediate result is
    rounded to single precision.
    """
    prog = _bind(circuit, None)
    nodes = circuit.nodes

    def leaf_val(i, kind, addr):
        try:
            return assignment[nodes[i]]
        except KeyError:
            raise KeyError(f"no value assigned to leaf {nodes[i]}") from None

    val, _ = _forward(prog, leaf_val, dtype)
    return val[circuit.root]


def second_derivatives_for(circuit: Circuit, evidence: Evidence, network: Network,
                           b: Leaf) -> dict[Leaf, float]:
    """d2F / da db at (e, theta) for every leaf a, with b fixed.

    F is affine in b, so dF/da is too: the mixed partial is the difference of
    dF/da with b pinned to 1 and to 0.  Costs two up/down sweeps.
    """
    if b not in circuit.leaf_index:
        raise KeyError(f"leaf {b} is not in the circuit")
    hi = differentiate(circuit, evidence, network, {b: 1.0})
    lo = differentiate(circuit, evidence, network, {b: 0.0})
    out = {a: hi.pd[i] - lo.pd[i] for a, i in circuit.leaf_index.items()}
    out[b] = 0.0
    return out


def second_derivative(circuit: Circuit, evidence: Evidence, network: Network,
                      a: Leaf, b: Leaf) -> float:
    if a == b:
        return 0.0
    if a not in circuit.leaf_index:
        raise KeyError(f"leaf {a} is not in the circuit")
    return second_derivatives_for(circuit, evidence, network, b)[a]


def rounding_error_bound(state: PassState, epsilon: float) -> float:
    """epsilon * sum over internal nodes of |pd(i) * val(i)|."""
    if state.pd is None:
        raise RuntimeError("downward pass has not run")
    kinds = _bind(state.circuit, state.network).kinds
    total = sum(abs(state.pd[i] * state.val[i]) for i, k in enumerate(kinds) if k >= _ADD)
    return epsilon * total

