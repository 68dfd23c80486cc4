"""Variable-elimination compilation of a network into an arithmetic circuit.

Tables hold circuit node ids instead of numbers, so multiplying and summing out
builds Mul and Add nodes rather than doing arithmetic.  Leaves are shared (one
node per indicator and per parameter); internal nodes are not hashed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence, Union

from netpoly.model import Indicator, Leaf, Network, Parameter

# Node-count bound for binary networks: size <= SIZE_CONSTANT * n * 2**(w + 1).
# Per eliminated variable the compiler creates at most 2**(w+1) parameter leaves,
# 2**(w+1) parameter*indicator products, 2**(w+1) table products, 2**w sums and
# 2 indicators, i.e. 3.5 * 2**(w+1) + 2 <= 4.5 * 2**(w+1); one extra Mul may join
# disconnected components.
SIZE_CONSTANT = 5


class CircuitError(ValueError):
    """Malformed circuit or circuit file."""


@dataclass(frozen=True, slots=True)
class Add:
    children: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Mul:
    children: tuple[int, ...]


Node = Union[Indicator, Parameter, Add, Mul]


@dataclass(frozen=True)
class Circuit:
    """Append-only DAG; children always precede their parent."""

    nodes: tuple[Node, ...]
    root: int
    leaf_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.nodes:
            raise CircuitError("empty circuit")
        if not 0 <= self.root < len(self.nodes):
            raise CircuitError(f"root {self.root} is not a node")
        index = {}
        for i, node in enumerate(self.nodes):
            if isinstance(node, (Add, Mul)):
                if not node.children:
                    raise CircuitError(f"node {i} has no children")
                if any(not 0 <= c < i for c in node.children):
                    raise CircuitError(f"node {i} references a child that does not precede it")
            elif isinstance(node, (Indicator, Parameter)):
                if node in index:
                    raise CircuitError(f"leaf {node} appears twice")
                index[node] = i
            else:
                raise CircuitError(f"node {i} has unknown type {type(node).__name__}")
        object.__setattr__(self, "leaf_index", index)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return sum(len(n.children) for n in self.nodes if isinstance(n, (Add, Mul)))

    @property
    def leaves(self) -> list[Leaf]:
        return list(self.leaf_index)

    def is_leaf(self, i: int) -> bool:
        return isinstance(self.nodes[i], (Indicator, Parameter))


class CircuitBuilder:
    def __init__(self):
        self.nodes: list[Node] = []
        self._leaves: dict[Leaf, int] = {}

    def leaf(self, leaf: Leaf) -> int:
        i = self._leaves.get(leaf)
        if i is None:
            i = self._leaves[leaf] = len(self.nodes)
            self.nodes.append(leaf)
        return i

    def _op(self, cls, children: Sequence[int]) -> int:
        if len(children) == 1:
            return children[0]
        self.nodes.append(cls(tuple(children)))
        return len(self.nodes) - 1

    def add(self, children: Sequence[int]) -> int:
        return self._op(Add, children)

    def mul(self, children: Sequence[int]) -> int:
        return self._op(Mul, children)

    def build(self, root: int) -> Circuit:
        return Circuit(tuple(self.nodes), root)


@dataclass(frozen=True)
class SymbolicTable:
    """Node ids indexed by instantiations of ``scope`` (first variable outermost)."""

    scope: tuple[int, ...]
    entries: tuple[int, ...]


def _strides(network: Network, scope: Sequence[int]) -> list[int]:
    strides = [1] * len(scope)
    for k in range(len(scope) - 2, -1, -1):
        strides[k] = strides[k + 1] * network.variables[scope[k + 1]].card
    return strides


def parameterize_cpts(network: Network, builder: CircuitBuilder) -> list[SymbolicTable]:
    """One table per family over (parents..., child); entry xu is theta_xu * lambda_x."""
    tables = []
    for i, fam in enumerate(network.families):
        var = network.variables[i]
        entries = []
        for u in network.parent_instantiations(i):
            for x in range(var.card):
                theta = builder.leaf(network.parameter(i, x, u))
                lam = builder.leaf(Indicator(var.name, var.values[x]))
                entries.append(builder.mul([theta, lam]))
        tables.append(SymbolicTable((*fam.parents, i), tuple(entries)))
    return tables


def multiply_tables(network: Network, builder: CircuitBuilder,
                    tables: Sequence[SymbolicTable]) -> SymbolicTable:
    if not tables:
        raise ValueError("nothing to multiply")
    if len(tables) == 1:
        return tables[0]
    scope: list[int] = []
    for t in tables:
        scope.extend(v for v in t.scope if v not in scope)
    pos = {v: k for k, v in enumerate(scope)}
    plans = [([pos[v] for v in t.scope], _strides(network, t.scope)) for t in tables]
    entries = []
    for inst in product(*(range(network.variables[v].card) for v in scope)):
        children = []
        for t, (where, strides) in zip(tables, plans):
            children.append(t.entries[sum(inst[w] * s for w, s in zip(where, strides))])
        entries.append(builder.mul(children))
    return SymbolicTable(tuple(scope), tuple(entries))


def sum_out(network: Network, builder: CircuitBuilder, table: SymbolicTable, var: int) -> SymbolicTable:
    if var not in table.scope:
        raise ValueError(f"variable {network.variables[var].name!r} is not in the table scope")
    k = table.scope.index(var)
    rest = table.scope[:k] + table.scope[k + 1:]
    strides = _strides(network, table.scope)
    card = network.variables[var].card
    entries = []
    for inst in product(*(range(network.variables[v].card) for v in rest)):
        full = inst[:k] + (0,) + inst[k:]
        base = sum(i * s for i, s in zip(full, strides))
        entries.append(builder.add([table.entries[base + j * strides[k]] for j in range(card)]))
    return SymbolicTable(rest, tuple(entries))


# -- elimination orders --------------------------------------------------------


@dataclass(frozen=True)
class EliminationOrder:
    order: tuple[int, ...]
    width: int

    def names(self, network: Network) -> list[str]:
        return [network.variables[i].name for i in self.order]


def _as_indices(network: Network, order: Sequence) -> tuple[int, ...]:
    idx = tuple(network.index(v) if isinstance(v, str) else int(v) for v in order)
    if sorted(idx) != list(range(len(network))):
        raise ValueError("elimination order must list every variable exactly once")
    return idx


def order_width(network: Network, order: Sequence) -> int:
    """Largest (neighbours at elimination time) over the moral graph, i.e. clique size - 1."""
    idx = _as_indices(network, order)
    adj = network.moral_graph()
    width = 0
    for v in idx:
        nbrs = adj[v]
        width = max(width, len(nbrs))
        for a in nbrs:
            adj[a] |= nbrs
            adj[a].discard(a)
            adj[a].discard(v)
        adj[v] = set()
    return width


def make_order(network: Network, order: Sequence) -> EliminationOrder:
    idx = _as_indices(network, order)
    return EliminationOrder(idx, order_width(network, idx))


def min_fill_order(network: Network) -> EliminationOrder:
    """Greedy min-fill on the moral graph; ties go to the smallest variable index."""
    adj = network.moral_graph()
    remaining = set(range(len(network)))
    order = []
    width = 0
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            nb = sorted(adj[v])
            fill = sum(1 for a in range(len(nb)) for b in range(a + 1, len(nb))
                       if nb[b] not in adj[nb[a]])
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nbrs = adj[best]
        width = max(width, len(nbrs))
        for a in nbrs:
            adj[a] |= nbrs
            adj[a].discard(a)
            adj[a].discard(best)
        adj[best] = set()
        remaining.remove(best)
        order.append(best)
    return EliminationOrder(tuple(order), width)


# -- compilation ----------------------------------------------------------------


def ve_compile(network: Network, order: EliminationOrder | Sequence | None = None) -> Circuit:
    if order is None:
        order = min_fill_order(network)
    idx = order.order if isinstance(order, EliminationOrder) else _as_indices(network, order)
    builder = CircuitBuilder()
    # list position doubles as creation index
    tables = parameterize_cpts(network, builder)
    for var in idx:
        touching = [t for t in tables if var in t.scope]
        tables = [t for t in tables if var not in t.scope]
        tables.append(sum_out(network, builder, multiply_tables(network, builder, touching), var))
    final = multiply_tables(network, builder, tables)
    assert final.scope == () and len(final.entries) == 1
    return builder.build(final.entries[0])


def size_bound(n: int, width: int) -> int:
    return SIZE_CONSTANT * n * 2 ** (width + 1)


# -- text format ------------------------------------------------------------------

MAGIC = "dac 1"


def _format_leaf(leaf: Leaf) -> str:
    return f"l {leaf}" if isinstance(leaf, Indicator) else f"p {leaf}"


def serialize_circuit(circuit: Circuit) -> str:
    lines = [MAGIC, f"n {len(circuit)}"]
    for node in circuit.nodes:
        if isinstance(node, (Add, Mul)):
            op = "+" if isinstance(node, Add) else "*"
            lines.append(f"{op} {len(node.children)} " + " ".join(map(str, node.children)))
        else:
            lines.append(_format_leaf(node))
    lines.append(f"r {circuit.root}")
    return "\n".join(lines) + "\n"


def _pair(text: str, lineno: int) -> tuple[str, str]:
    name, eq, value = text.partition("=")
    if not eq or not name or not value:
        raise CircuitError(f"line {lineno}: expected Var=value, got {text!r}")
    return name, value


def deserialize_circuit(text: str) -> Circuit:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CircuitError("empty circuit file")
    if lines[0] != MAGIC:
        raise CircuitError(f"bad header {lines[0]!r}")
    if len(lines) < 3 or not lines[1].startswith("n "):
        raise CircuitError("missing node count")
    try:
        count = int(lines[1][2:])
    except ValueError:
        raise CircuitError(f"bad node count {lines[1]!r}") from None
    body = lines[2:]
    if not body[-1].startswith("r "):
        raise CircuitError("last line must be the root ('r <index>')")
    if len(body) - 1 != count:
        raise CircuitError(f"header announces {count} nodes, file has {len(body) - 1}")
    nodes: list[Node] = []
    for k, line in enumerate(body[:-1]):
        lineno = k + 3
        tag, _, rest = line.partition(" ")
        if tag == "l":
            nodes.append(Indicator(*_pair(rest, lineno)))
        elif tag == "p":
            head, bar, tail = rest.partition("|")
            if not bar:
                raise CircuitError(f"line {lineno}: parameter needs '|'")
            parents = tuple(_pair(s, lineno) for s in tail.split(",") if s)
            nodes.append(Parameter(*_pair(head, lineno), parents))
        elif tag in ("+", "*"):
            try:
                nums = [int(s) for s in rest.split()]
            except ValueError:
                raise CircuitError(f"line {lineno}: non-integer child index") from None
            if not nums or nums[0] != len(nums) - 1 or nums[0] < 1:
                raise CircuitError(f"line {lineno}: child count does not match")
            if any(not 0 <= c < k for c in nums[1:]):
                raise CircuitError(f"line {lineno}: forward or invalid child reference")
            nodes.append((Add if tag == "+" else Mul)(tuple(nums[1:])))
        else:
            raise CircuitError(f"line {lineno}: unknown node tag {tag!r}")
    try:
        root = int(body[-1][2:])
    except ValueError:
        raise CircuitError(f"bad root line {body[-1]!r}") from None
    if not 0 <= root < len(nodes):
        raise CircuitError(f"dangling root {root}")
    return Circuit(tuple(nodes), root)


def load_circuit(path) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return deserialize_circuit(fh.read())


def is_decomposable(circuit: Circuit) -> bool:
    """No leaf reaches a Mul node through two different children (implies multilinearity)."""
    support: list[frozenset] = []
    for node in circuit.nodes:
        if isinstance(node, Add):
            support.append(frozenset().union(*(support[c] for c in node.children)))
        elif isinstance(node, Mul):
            sets = [support[c] for c in node.children]
            if sum(map(len, sets)) != len(frozenset().union(*sets)):
                return False
            support.append(frozenset().union(*sets))
        else:
            support.append(frozenset([node]))
    return True

