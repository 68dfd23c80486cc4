"""Brute-force ground truth: the canonical polynomial and the full joint table.

Nothing here touches circuits.  Everything is exponential in the number of
variables, so networks above ``MAX_VARIABLES`` are refused.
"""

from __future__ import annotations

import string
from functools import lru_cache
from typing import Mapping

import numpy as np

from netpoly.model import Evidence, Indicator, Leaf, Network, leaf_assignment

MAX_VARIABLES = 12


class OracleSizeError(ValueError):
    pass


def _guard(network: Network) -> None:
    if len(network) > MAX_VARIABLES:
        raise OracleSizeError(
            f"oracle enumerates all instantiations; {len(network)} variables exceeds {MAX_VARIABLES}"
        )


@lru_cache(maxsize=64)
def joint_table(network: Network) -> np.ndarray:
    """Pr(x) for every full instantiation; axis k is variable k (read-only, cached)."""
    _guard(network)
    letters = string.ascii_letters
    operands, subs = [], []
    for fam in network.families:
        axes = (*fam.parents, fam.child)
        shape = [network.variables[a].card for a in axes]
        operands.append(np.asarray(fam.table, dtype=float).reshape(shape))
        subs.append("".join(letters[a] for a in axes))
    out = letters[:len(network)]
    joint = np.einsum(",".join(subs) + "->" + out, *operands)
    joint.flags.writeable = False
    return joint


def oracle_prob(network: Network, event: Mapping[str, str] | Evidence) -> float:
    """Sum of joint entries consistent with ``event``."""
    if isinstance(event, Evidence):
        dense = dict(event.assignments)
    else:
        dense = {}
        for name, value in event.items():
            i = network.index(name)
            dense[i] = network.variables[i].index(value)
    joint = joint_table(network)
    index = tuple(dense.get(i, slice(None)) for i in range(len(network)))
    return float(np.sum(joint[index]))


@lru_cache(maxsize=64)
def _monomials(network: Network) -> tuple[dict, np.ndarray]:
    """Leaf ids and the (instantiation x 2n) matrix of leaves in each monomial."""
    _guard(network)
    cards = [v.card for v in network.variables]
    grid = np.indices(cards).reshape(len(cards), -1).T
    ids: dict[Leaf, int] = {}
    ind_offset, par_offset = [], []
    for v in network.variables:
        ind_offset.append(len(ids))
        for x in v.values:
            ids[Indicator(v.name, x)] = len(ids)
    for i in range(len(network)):
        par_offset.append(len(ids))
        for p in network.parameters(i):
            ids[p] = len(ids)
    cols = []
    for i, fam in enumerate(network.families):
        cols.append(ind_offset[i] + grid[:, i])
        col = np.zeros(len(grid), dtype=np.int64)
        for p in fam.parents:
            col = col * cards[p] + grid[:, p]
        cols.append(par_offset[i] + col * cards[i] + grid[:, i])
    return ids, np.stack(cols, axis=1)


def _values(network: Network, ids: dict, assignment: Mapping[Leaf, float]) -> np.ndarray:
    vals = np.empty(len(ids))
    for leaf, k in ids.items():
        try:
            vals[k] = assignment[leaf]
        except KeyError:
            raise KeyError(f"no value assigned to leaf {leaf}") from None
    return vals


def canonical_eval(network: Network, assignment: Mapping[Leaf, float]) -> float:
    """Sum over x of the product of consistent parameters and indicators."""
    ids, mono = _monomials(network)
    vals = _values(network, ids, assignment)
    return float(np.prod(vals[mono], axis=1).sum())


def _drop_and_sum(mono: np.ndarray, vals: np.ndarray, drop: list[int]) -> float:
    rows = np.all([np.any(mono == d, axis=1) for d in drop], axis=0)
    sub = mono[rows]
    v = vals[sub]
    for d in drop:
        v[sub == d] = 1.0
    return float(np.prod(v, axis=1).sum())


def oracle_derivative(network: Network, evidence: Evidence, leaf: Leaf,
                      assignment: Mapping[Leaf, float] | None = None) -> float:
    """dF/d(leaf) by deleting the leaf from every monomial that contains it."""
    ids, mono = _monomials(network)
    vals = _values(network, ids, assignment or leaf_assignment(network, evidence))
    return _drop_and_sum(mono, vals, [ids[leaf]])


def oracle_second(network: Network, evidence: Evidence, a: Leaf, b: Leaf,
                  assignment: Mapping[Leaf, float] | None = None) -> float:
    if a == b:
        return 0.0
    ids, mono = _monomials(network)
    vals = _values(network, ids, assignment or leaf_assignment(network, evidence))
    return _drop_and_sum(mono, vals, [ids[a], ids[b]])


def oracle_marginals(network: Network, evidence: Evidence) -> dict[str, dict[str, float]]:
    """Pr(x | e) for every variable, by enumeration."""
    joint = joint_table(network)
    index = tuple(evidence.assignments.get(i, slice(None)) for i in range(len(network)))
    mask = np.zeros_like(joint)
    mask[index] = 1.0
    restricted = joint * mask
    pe = restricted.sum()
    out = {}
    for i, v in enumerate(network.variables):
        axes = tuple(k for k in range(len(network)) if k != i)
        m = restricted.sum(axis=axes) / pe
        out[v.name] = dict(zip(v.values, map(float, m)))
    return out
