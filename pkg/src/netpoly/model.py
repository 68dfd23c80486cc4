"""Discrete Bayesian networks, evidence, and the leaf identities of their polynomials.

CPT layout: parents vary in listed order with the first parent outermost, the
child value innermost.  For a family ``X | U1, U2`` the entry for
``(x, u1, u2)`` lives at ``((u1 * |U2| + u2) * |X|) + x``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

NORMALIZATION_TOL = 1e-9


class NetworkError(ValueError):
    """Malformed or invalid network document."""


class EvidenceError(ValueError):
    """Evidence that does not fit the network."""


class Indicator(NamedTuple):
    """Evidence indicator for ``var = value``."""

    var: str
    value: str

    def __str__(self) -> str:
        return f"{self.var}={self.value}"


class Parameter(NamedTuple):
    """Network parameter for the family instantiation ``child=value | parents``."""

    child: str
    value: str
    parents: tuple[tuple[str, str], ...] = ()

    def __str__(self) -> str:
        u = ",".join(f"{p}={v}" for p, v in self.parents)
        return f"{self.child}={self.value}|{u}"


Leaf = Union[Indicator, Parameter]


@dataclass(frozen=True)
class Variable:
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) < 2:
            raise NetworkError(f"variable {self.name!r} needs at least two values")
        if len(set(self.values)) != len(self.values):
            raise NetworkError(f"variable {self.name!r} has duplicate value labels")

    @property
    def card(self) -> int:
        return len(self.values)

    def index(self, value: str) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise EvidenceError(f"unknown value {value!r} for variable {self.name!r}") from None


@dataclass(frozen=True)
class Family:
    """A child variable, its parents (dense indices), and its CPT in flat layout."""

    child: int
    parents: tuple[int, ...]
    table: tuple[float, ...]


@dataclass(frozen=True)
class Network:
    variables: tuple[Variable, ...]
    families: tuple[Family, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for i, v in enumerate(self.variables):
            if v.name in index:
                raise NetworkError(f"duplicate variable name {v.name!r}")
            index[v.name] = i
        object.__setattr__(self, "_index", MappingProxyType(index))
        if len(self.families) != len(self.variables):
            raise NetworkError("every variable needs exactly one family")
        for i, fam in enumerate(self.families):
            if fam.child != i:
                raise NetworkError("families must be listed in variable order")
            self._check_family(fam)
        self.topological_order()

    def _check_family(self, fam: Family) -> None:
        child = self.variables[fam.child]
        if fam.child in fam.parents or len(set(fam.parents)) != len(fam.parents):
            raise NetworkError(f"family of {child.name!r} has repeated parents")
        expected = child.card * math.prod(self.variables[p].card for p in fam.parents)
        if len(fam.table) != expected:
            raise NetworkError(
                f"CPT of {child.name!r} has {len(fam.table)} entries, expected {expected}"
            )
        for k, x in enumerate(fam.table):
            if not (0.0 <= x <= 1.0) or math.isnan(x):
                raise NetworkError(f"CPT of {child.name!r} entry {k} = {x} is not in [0, 1]")
        for col, u in enumerate(self.parent_instantiations(fam.child)):
            s = math.fsum(fam.table[col * child.card:(col + 1) * child.card])
            if abs(s - 1.0) > NORMALIZATION_TOL:
                where = ",".join(f"{self.variables[p].name}={self.variables[p].values[j]}"
                                 for p, j in zip(fam.parents, u)) or "(no parents)"
                raise NetworkError(
                    f"CPT of {child.name!r} does not sum to 1 for parents {where}: sum = {s:.12g}"
                )

    # -- lookups -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise EvidenceError(f"unknown variable {name!r}") from None

    def variable(self, name: str) -> Variable:
        return self.variables[self.index(name)]

    def parents(self, i: int) -> tuple[int, ...]:
        return self.families[i].parents

    def parent_instantiations(self, i: int) -> Iterator[tuple[int, ...]]:
        """Parent value-index tuples in CPT column order."""
        return product(*(range(self.variables[p].card) for p in self.families[i].parents))

    def table_index(self, i: int, x: int, u: Sequence[int]) -> int:
        fam = self.families[i]
        col = 0
        for p, j in zip(fam.parents, u):
            col = col * self.variables[p].card + j
        return col * self.variables[i].card + x

    def topological_order(self) -> list[int]:
        """Kahn order; raises on a cycle."""
        n = len(self.variables)
        indeg = [len(f.parents) for f in self.families]
        kids: list[list[int]] = [[] for _ in range(n)]
        for f in self.families:
            for p in f.parents:
                kids[p].append(f.child)
        ready = [i for i in range(n) if indeg[i] == 0]
        order = []
        while ready:
            i = ready.pop(0)
            order.append(i)
            for k in kids[i]:
                indeg[k] -= 1
                if indeg[k] == 0:
                    ready.append(k)
        if len(order) != n:
            raise NetworkError("parent relation contains a cycle")
        return order

    # -- leaves --------------------------------------------------------------

    def indicators(self) -> list[Indicator]:
        return [Indicator(v.name, x) for v in self.variables for x in v.values]

    def parameter(self, i: int, x: int, u: Sequence[int]) -> Parameter:
        fam = self.families[i]
        v = self.variables[i]
        parents = tuple((self.variables[p].name, self.variables[p].values[j])
                        for p, j in zip(fam.parents, u))
        return Parameter(v.name, v.values[x], parents)

    def parameters(self, i: int | None = None) -> list[Parameter]:
        """Parameters of one family (or all), in CPT layout order."""
        idx = range(len(self.variables)) if i is None else [i]
        out = []
        for k in idx:
            for u in self.parent_instantiations(k):
                for x in range(self.variables[k].card):
                    out.append(self.parameter(k, x, u))
        return out

    def resolve(self, leaf: Leaf) -> tuple[int, int]:
        """Dense address of a leaf.

        Indicators map to ``(var, value)``; parameters to ``(child, table index)``.
        """
        if isinstance(leaf, Indicator):
            i = self.index(leaf.var)
            return i, self.variables[i].index(leaf.value)
        i = self.index(leaf.child)
        fam = self.families[i]
        if len(leaf.parents) != len(fam.parents):
            raise EvidenceError(f"parameter {leaf} does not match the parents of {leaf.child!r}")
        u = []
        for (pname, pval), p in zip(leaf.parents, fam.parents):
            if self.index(pname) != p:
                raise EvidenceError(f"parameter {leaf} does not match the parents of {leaf.child!r}")
            u.append(self.variables[p].index(pval))
        return i, self.table_index(i, self.variables[i].index(leaf.value), u)

    def theta(self, param: Parameter) -> float:
        i, k = self.resolve(param)
        return self.families[i].table[k]

    def with_parameters(self, changes: Mapping[Parameter, float]) -> "Network":
        """Copy with some CPT entries replaced (no renormalization is applied)."""
        tables = [list(f.table) for f in self.families]
        for param, value in changes.items():
            i, k = self.resolve(param)
            tables[i][k] = float(value)
        fams = tuple(Family(f.child, f.parents, tuple(t)) for f, t in zip(self.families, tables))
        return Network(self.variables, fams)

    def moral_graph(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in self.variables]
        for f in self.families:
            members = (f.child, *f.parents)
            for a in members:
                for b in members:
                    if a != b:
                        adj[a].add(b)
        return adj


@dataclass(frozen=True)
class Evidence:
    """Partial instantiation, stored as variable index -> value index."""

    assignments: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assignments", MappingProxyType(dict(self.assignments)))

    def __contains__(self, var: int) -> bool:
        return var in self.assignments

    def __len__(self) -> int:
        return len(self.assignments)

    def __hash__(self) -> int:
        return hash(frozenset(self.assignments.items()))

    def __eq__(self, other) -> bool:
        return isinstance(other, Evidence) and dict(self.assignments) == dict(other.assignments)

    def indicator(self, var: int, value: int) -> int:
        """Indicator value e(x) on dense indices: 1 unless X is observed with another value."""
        observed = self.assignments.get(var)
        return 1 if observed is None or observed == value else 0

    def without(self, *variables: int) -> "Evidence":
        return Evidence({v: x for v, x in self.assignments.items() if v not in variables})

    def named(self, network: Network) -> dict[str, str]:
        return {network.variables[v].name: network.variables[v].values[x]
                for v, x in sorted(self.assignments.items())}

    @classmethod
    def from_names(cls, network: Network, assignments: Mapping[str, str]) -> "Evidence":
        dense = {}
        for name, value in assignments.items():
            i = network.index(name)
            dense[i] = network.variables[i].index(value)
        return cls(dense)


def indicator_value(network: Network, evidence: Evidence, x: Indicator) -> int:
    i, j = network.resolve(x)
    return evidence.indicator(i, j)


def consistent(a: Mapping, b: Mapping) -> bool:
    """True iff no variable is assigned different values by ``a`` and ``b``."""
    if len(b) < len(a):
        a, b = b, a
    return all(b.get(k, v) == v for k, v in a.items())


def leaf_assignment(network: Network, evidence: Evidence) -> dict[Leaf, float]:
    """Indicators at e(x), parameters at their CPT values."""
    out: dict[Leaf, float] = {}
    for i, v in enumerate(network.variables):
        for j, x in enumerate(v.values):
            out[Indicator(v.name, x)] = float(evidence.indicator(i, j))
    for i in range(len(network)):
        for p, theta in zip(network.parameters(i), network.families[i].table):
            out[p] = theta
    return out


# -- text formats ------------------------------------------------------------


def parse_network(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "variables" not in doc or "cpts" not in doc:
        raise NetworkError("document needs 'variables' and 'cpts'")
    try:
        variables = tuple(Variable(str(v["name"]), tuple(str(x) for x in v["values"]))
                          for v in doc["variables"])
    except (KeyError, TypeError):
        raise NetworkError("each variable needs 'name' and 'values'") from None
    index = {}
    for i, v in enumerate(variables):
        if v.name in index:
            raise NetworkError(f"duplicate variable name {v.name!r}")
        index[v.name] = i

    tables: dict[int, Family] = {}
    for cpt in doc["cpts"]:
        try:
            child = index[cpt["child"]]
            parents = tuple(index[p] for p in cpt.get("parents", []))
            table = tuple(float(x) for x in cpt["table"])
        except KeyError as exc:
            raise NetworkError(f"CPT refers to unknown variable or lacks a field: {exc}") from None
        except (TypeError, ValueError):
            raise NetworkError(f"CPT of {cpt.get('child')!r} has a non-numeric table") from None
        if child in tables:
            raise NetworkError(f"duplicate CPT for {cpt['child']!r}")
        tables[child] = Family(child, parents, table)
    missing = [variables[i].name for i in range(len(variables)) if i not in tables]
    if missing:
        raise NetworkError(f"no CPT for {', '.join(missing)}")
    return Network(variables, tuple(tables[i] for i in range(len(variables))))


def serialize_network(network: Network) -> str:
    doc = {
        "variables": [{"name": v.name, "values": list(v.values)} for v in network.variables],
        "cpts": [
            {
                "child": network.variables[f.child].name,
                "parents": [network.variables[p].name for p in f.parents],
                "table": list(f.table),
            }
            for f in network.families
        ],
    }
    return json.dumps(doc, indent=1)


def load_network(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


def parse_assignments(text: str) -> dict[str, str]:
    """``Var=value,Var=value`` -> dict; whitespace around tokens is ignored."""
    out: dict[str, str] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise EvidenceError(f"expected Var=value, got {item!r}")
        name, value = (s.strip() for s in item.split("=", 1))
        if out.get(name, value) != value:
            raise EvidenceError(f"conflicting values for {name!r}")
        out[name] = value
    return out


def parse_evidence(text: str, network: Network) -> Evidence:
    return Evidence.from_names(network, parse_assignments(text))


def parse_parameter(text: str, network: Network) -> Parameter:
    """``X=x|U1=u1,U2=u2`` -> Parameter with parents in family order."""
    head, _, tail = text.partition("|")
    child = parse_assignments(head)
    if len(child) != 1:
        raise EvidenceError(f"parameter needs exactly one child assignment: {text!r}")
    (name, value), = child.items()
    given = parse_assignments(tail)
    i = network.index(name)
    network.variables[i].index(value)
    fam = network.families[i]
    pnames = [network.variables[p].name for p in fam.parents]
    if set(given) != set(pnames):
        raise EvidenceError(
            f"parameter {text!r} must instantiate exactly the parents of {name!r}: {pnames}"
        )
    for p in pnames:
        network.variable(p).index(given[p])
    return Parameter(name, value, tuple((p, given[p]) for p in pnames))


def instantiations(network: Network, variables: Iterable[int] | None = None) -> Iterator[tuple[int, ...]]:
    idx = range(len(network)) if variables is None else list(variables)
    return product(*(range(network.variables[i].card) for i in idx))
