"""Random networks and evidence for property tests and experiments."""

from __future__ import annotations

import math

import numpy as np

from netpoly.model import Evidence, Family, Network, Variable


def random_network(rng: np.random.Generator, n: int, max_parents: int = 2,
                   cards: tuple[int, int] = (2, 2), edge_prob: float = 0.5,
                   zero_prob: float = 0.0) -> Network:
    """Random DAG over ``n`` variables (topologically numbered) with Dirichlet CPTs.

    ``zero_prob`` is the chance that a CPT column gets one entry forced to 0.
    """
    variables = []
    for i in range(n):
        k = int(rng.integers(cards[0], cards[1] + 1))
        variables.append(Variable(f"X{i}", tuple(f"v{j}" for j in range(k))))
    families = []
    for i in range(n):
        candidates = [j for j in range(i) if rng.random() < edge_prob]
        rng.shuffle(candidates)
        parents = tuple(sorted(candidates[:max_parents]))
        card = variables[i].card
        cols = math.prod(variables[p].card for p in parents)
        table = []
        for _ in range(cols):
            col = rng.dirichlet(np.ones(card))
            if zero_prob and rng.random() < zero_prob:
                col[rng.integers(card)] = 0.0
                col = col / col.sum()
            table.extend(float(x) for x in col)
        families.append(Family(i, parents, tuple(table)))
    return Network(tuple(variables), tuple(families))


def random_evidence(rng: np.random.Generator, network: Network, max_size: int | None = None) -> Evidence:
    n = len(network)
    size = int(rng.integers(0, (max_size if max_size is not None else n) + 1))
    chosen = rng.choice(n, size=min(size, n), replace=False)
    return Evidence({int(i): int(rng.integers(network.variables[i].card)) for i in chosen})
