"""Exact inference on discrete Bayesian networks.

Variable elimination answers single-variable queries; :func:`brute_force_joint`
materialises the full joint and serves as an independent check in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bn import BayesianNetwork, Dag

__all__ = [
    "Factor",
    "ZeroProbabilityEvidence",
    "MarkovBlanket",
    "eliminate",
    "all_marginals",
    "brute_force_joint",
    "brute_force_marginal",
    "min_degree_order",
    "markov_blanket",
    "blanket_nodes",
]

JOINT_CELL_LIMIT = 10**6


class ZeroProbabilityEvidence(ValueError):
    """The evidence has zero probability under the network."""


@dataclass(frozen=True)
class Factor:
    scope: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != len(self.scope):
            raise ValueError("factor table rank differs from its scope")

    def _aligned(self, scope: Sequence[str]) -> np.ndarray:
        """Values transposed and broadcast to ``scope`` (a superset of ours)."""
        present = [v for v in scope if v in self.scope]
        arr = np.transpose(self.values, [self.scope.index(v) for v in present])
        shape = [arr.shape[present.index(v)] if v in self.scope else 1 for v in scope]
        return arr.reshape(shape)

    def __mul__(self, other: "Factor") -> "Factor":
        scope = tuple(self.scope) + tuple(v for v in other.scope if v not in self.scope)
        return Factor(scope, self._aligned(scope) * other._aligned(scope))

    def sum_out(self, var: str) -> "Factor":
        i = self.scope.index(var)
        return Factor(self.scope[:i] + self.scope[i + 1:], self.values.sum(axis=i))

    def reduce(self, var: str, state: int) -> "Factor":
        i = self.scope.index(var)
        return Factor(self.scope[:i] + self.scope[i + 1:], np.take(self.values, state, axis=i))


@dataclass(frozen=True)
class MarkovBlanket:
    target: str
    parents: tuple[str, ...]
    children: tuple[str, ...]
    spouses: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    @property
    def members(self) -> tuple[str, ...]:
        return self.parents + self.children + self.spouses

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "parents": list(self.parents),
            "children": list(self.children),
            "spouses": list(self.spouses),
            "edges": [list(e) for e in self.edges],
        }


def _state_index(bn: BayesianNetwork, var: str, state) -> int:
    if isinstance(state, (int, np.integer)):
        if not 0 <= state < bn.cardinality(var):
            raise ValueError(f"state {state} out of range for {var!r}")
        return int(state)
    try:
        return bn.alphabets[var].index(state)
    except ValueError:
        raise ValueError(f"{state!r} is not a category of {var!r}") from None


def _cpt_factors(bn: BayesianNetwork) -> list[Factor]:
    out = []
    for v in bn.nodes:
        scope, table = bn.factor_table(v)
        out.append(Factor(tuple(scope), table))
    return out


def min_degree_order(bn: BayesianNetwork, eliminate_vars: Sequence[str]) -> list[str]:
    """Greedy min-degree order on the moral graph; ties go to the smaller name."""
    adj: dict[str, set[str]] = {v: set() for v in bn.nodes}
    for v in bn.nodes:
        family = [*bn.dag.parents(v), v]
        for a in family:
            for b in family:
                if a != b:
                    adj[a].add(b)
    remaining = set(eliminate_vars)
    order = []
    while remaining:
        v = min(remaining, key=lambda u: (len(adj[u]), u))
        order.append(v)
        remaining.discard(v)
        nbrs = adj.pop(v)
        for a in nbrs:
            adj[a].discard(v)
            adj[a] |= nbrs - {a}
    return order


def eliminate(bn: BayesianNetwork, query: str, evidence: Mapping[str, object] | None = None,
              order: Sequence[str] | None = None) -> np.ndarray:
    """Posterior ``P(query | evidence)`` by variable elimination.

    Parameters
    ----------
    bn : BayesianNetwork
    query : str
        Variable to query; must not be observed.
    evidence : mapping, optional
        Variable -> observed category (name or index).
    order : sequence, optional
        Elimination order over the hidden variables. Defaults to min-degree.

    Returns
    -------
    numpy.ndarray
        Distribution over ``bn.alphabets[query]``.
    """
    evidence = dict(evidence or {})
    if query not in bn.alphabets:
        raise KeyError(f"unknown query variable {query!r}")
    if query in evidence:
        raise ValueError(f"query {query!r} is also observed")
    observed = {v: _state_index(bn, v, s) for v, s in evidence.items()}
    factors = _cpt_factors(bn)
    for v, s in observed.items():
        factors = [f.reduce(v, s) if v in f.scope else f for f in factors]
    hidden = [v for v in bn.nodes if v != query and v not in observed]
    if order is None:
        order = min_degree_order(bn, hidden)
    elif sorted(order) != sorted(hidden):
        raise ValueError("elimination order must cover exactly the hidden variables")
    for var in order:
        touching = [f for f in factors if var in f.scope]
        if not touching:
            continue
        factors = [f for f in factors if var not in f.scope]
        product = touching[0]
        for f in touching[1:]:
            product = product * f
        factors.append(product.sum_out(var))
    result = Factor((query,), np.ones(bn.cardinality(query)))
    for f in factors:
        result = result * f
    unnorm = result._aligned((query,)).reshape(-1)
    total = unnorm.sum()
    if total <= 0:
        raise ZeroProbabilityEvidence(f"evidence {evidence} has zero probability")
    return unnorm / total


def all_marginals(bn: BayesianNetwork) -> dict[str, np.ndarray]:
    """Prior marginal of every node."""
    return {v: eliminate(bn, v) for v in bn.nodes}


def brute_force_joint(bn: BayesianNetwork) -> Factor:
    """Full joint table, one axis per node in ``bn.nodes`` order."""
    cells = math.prod(bn.cardinality(v) for v in bn.nodes)
    if cells > JOINT_CELL_LIMIT:
        raise ValueError(f"joint table would have {cells} cells (limit {JOINT_CELL_LIMIT})")
    joint = np.ones([bn.cardinality(v) for v in bn.nodes])
    for v in bn.nodes:
        scope, table = bn.factor_table(v)
        axes = [bn.nodes.index(u) for u in scope]
        # move the CPT's axes into node order, then broadcast over the rest
        perm = np.argsort(axes)
        shape = [1] * len(bn.nodes)
        for a in axes:
            shape[a] = bn.cardinality(bn.nodes[a])
        joint = joint * np.transpose(table, perm).reshape(shape)
    return Factor(tuple(bn.nodes), joint)


def brute_force_marginal(bn: BayesianNetwork, query: str,
                         evidence: Mapping[str, object] | None = None) -> np.ndarray:
    joint = brute_force_joint(bn)
    table = joint.values
    index: list = [slice(None)] * len(bn.nodes)
    for v, s in (evidence or {}).items():
        index[bn.nodes.index(v)] = _state_index(bn, v, s)
    table = table[tuple(index)]
    kept = [v for v in bn.nodes if v not in (evidence or {})]
    q = kept.index(query)
    dist = table.sum(axis=tuple(i for i in range(len(kept)) if i != q))
    total = dist.sum()
    if total <= 0:
        raise ZeroProbabilityEvidence(f"evidence {evidence} has zero probability")
    return dist / total


def markov_blanket(dag: Dag, target: str) -> MarkovBlanket:
    if target not in dag:
        raise KeyError(f"unknown target {target!r}")
    parents = dag.parents(target)
    children = dag.children(target)
    taken = {target, *parents, *children}
    spouses = []
    for c in children:
        for p in dag.parents(c):
            if p not in taken:
                taken.add(p)
                spouses.append(p)
    order = {n: i for i, n in enumerate(dag.nodes)}
    spouses.sort(key=order.__getitem__)
    edges = tuple(e for e in dag.sorted_edges() if e[0] in taken and e[1] in taken)
    return MarkovBlanket(target, tuple(parents), tuple(children), tuple(spouses), edges)


def blanket_nodes(dag: Dag, target: str, depth: int = 1) -> list[str]:
    """Target plus its blanket; each extra depth adds the blankets of current members."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    frontier, kept = [target], {target}
    for _ in range(depth):
        nxt = []
        for node in frontier:
            for m in markov_blanket(dag, node).members:
                if m not in kept:
                    kept.add(m)
                    nxt.append(m)
        frontier = nxt
    return [n for n in dag.nodes if n in kept]
