"""Discrete Bayesian networks: structure, BIC scoring, greedy search and CPT fitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .discretizer import DiscreteDataset

__all__ = [
    "CycleError",
    "Dag",
    "Cpt",
    "BayesianNetwork",
    "SearchConfig",
    "Move",
    "family_bic",
    "network_bic",
    "hill_climb",
    "fit_parameters",
    "FamilyScorer",
]

# gains closer than this are treated as ties; also the minimum gain for a move
GAIN_TOL = 1e-7


class CycleError(ValueError):
    pass


class Dag:
    """Mutable DAG over an ordered node list; acyclicity is checked on every mutation."""

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]] = ()):
        self.nodes: tuple[str, ...] = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node names")
        self._order = {n: i for i, n in enumerate(self.nodes)}
        self._parents: dict[str, set[str]] = {n: set() for n in self.nodes}
        self._children: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in edges:
            self.add_edge(u, v)

    def __contains__(self, node) -> bool:
        return node in self._order

    def __eq__(self, other) -> bool:
        return isinstance(other, Dag) and self.nodes == other.nodes and self.edges == other.edges

    def __repr__(self) -> str:
        return f"Dag({list(self.nodes)}, {sorted(self.edges)})"

    def copy(self) -> "Dag":
        return Dag(self.nodes, sorted(self.edges))

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return frozenset((p, c) for c, ps in self._parents.items() for p in ps)

    def sorted_edges(self) -> list[tuple[str, str]]:
        return sorted(self.edges, key=lambda e: (self._order[e[0]], self._order[e[1]]))

    def parents(self, node: str) -> list[str]:
        return sorted(self._parents[node], key=self._order.__getitem__)

    def children(self, node: str) -> list[str]:
        return sorted(self._children[node], key=self._order.__getitem__)

    def has_edge(self, u: str, v: str) -> bool:
        return u in self._parents.get(v, ())

    def in_degree(self, node: str) -> int:
        return len(self._parents[node])

    def out_degree(self, node: str) -> int:
        return len(self._children[node])

    def has_path(self, src: str, dst: str, skip: tuple[str, str] | None = None) -> bool:
        """Directed path ``src ~> dst``, optionally ignoring one edge."""
        stack, seen = [src], {src}
        while stack:
            u = stack.pop()
            for w in self._children[u]:
                if skip == (u, w):
                    continue
                if w == dst:
                    return True
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False

    def _check(self, u: str, v: str) -> None:
        if u not in self._order or v not in self._order:
            raise KeyError(f"unknown node in edge {(u, v)}")

    def add_edge(self, u: str, v: str) -> None:
        self._check(u, v)
        if u == v:
            raise CycleError(f"self-loop on {u!r}")
        if self.has_edge(u, v):
            raise ValueError(f"duplicate edge {(u, v)}")
        if self.has_edge(v, u) or self.has_path(v, u):
            raise CycleError(f"edge {u}->{v} would close a cycle")
        self._parents[v].add(u)
        self._children[u].add(v)

    def remove_edge(self, u: str, v: str) -> None:
        self._check(u, v)
        if not self.has_edge(u, v):
            raise KeyError(f"no edge {(u, v)}")
        self._parents[v].discard(u)
        self._children[u].discard(v)

    def reverse_edge(self, u: str, v: str) -> None:
        self.remove_edge(u, v)
        try:
            self.add_edge(v, u)
        except CycleError:
            self.add_edge(u, v)
            raise

    def is_acyclic(self) -> bool:
        indeg = {n: len(self._parents[n]) for n in self.nodes}
        ready = [n for n, d in indeg.items() if d == 0]
        seen = 0
        while ready:
            u = ready.pop()
            seen += 1
            for w in self._children[u]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        return seen == len(self.nodes)

    def topological_order(self) -> list[str]:
        indeg = {n: len(self._parents[n]) for n in self.nodes}
        order = []
        ready = [n for n in self.nodes if indeg[n] == 0]
        while ready:
            u = ready.pop(0)
            order.append(u)
            for w in self.children(u):
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        return order

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Dag":
        return cls(doc["nodes"], [tuple(e) for e in doc["edges"]])


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def _xlogx_sum(counts: np.ndarray) -> float:
    c = counts[counts > 0].astype(float)
    return float(np.sum(c * np.log(c)))


def _family_counts(data: DiscreteDataset, child: int, parents: Sequence[int]) -> np.ndarray:
    """Count table of shape (parent configurations, child states)."""
    sizes = [len(data.alphabets[p]) for p in parents]
    r = len(data.alphabets[child])
    q = math.prod(sizes)
    idx = np.zeros(data.n_rows, dtype=np.int64)
    for p, size in zip(parents, sizes):
        idx = idx * size + data.data[:, p]
    flat = np.bincount(idx * r + data.data[:, child], minlength=q * r)
    return flat.reshape(q, r)


def _family_bic_idx(data: DiscreteDataset, child: int, parents: Sequence[int]) -> float:
    counts = _family_counts(data, child, parents)
    loglik = _xlogx_sum(counts) - _xlogx_sum(counts.sum(axis=1))
    n_params = (counts.shape[1] - 1) * counts.shape[0]
    return loglik - 0.5 * math.log(data.n_rows) * n_params


def family_bic(data: DiscreteDataset, child: str, parents: Sequence[str]) -> float:
    """BIC contribution of one node family.

    ``sum_rows log P(child | parents) - log(n)/2 * (|child| - 1) * prod |parent|``,
    with maximum-likelihood probabilities from counts and natural logs.
    """
    return _family_bic_idx(data, data.index(child), [data.index(p) for p in parents])


def network_bic(data: DiscreteDataset, dag: Dag) -> float:
    return math.fsum(family_bic(data, v, dag.parents(v)) for v in dag.nodes)


class FamilyScorer:
    """Memoised family scores keyed by (child, parent set)."""

    def __init__(self, data: DiscreteDataset):
        self.data = data
        self._cache: dict[tuple[int, frozenset[int]], float] = {}

    def __call__(self, child: int, parents: Iterable[int]) -> float:
        key = (child, frozenset(parents))
        score = self._cache.get(key)
        if score is None:
            score = _family_bic_idx(self.data, child, sorted(key[1]))
            self._cache[key] = score
        return score


# ---------------------------------------------------------------------------
# structure search
# ---------------------------------------------------------------------------

OPERATORS = ("add", "remove", "reverse")


@dataclass(frozen=True)
class SearchConfig:
    max_parents: int | None = 4
    max_iterations: int = 1000
    operators: tuple[str, ...] = OPERATORS

    def __post_init__(self):
        if self.max_parents is not None and self.max_parents < 1:
            raise ValueError("max_parents must be at least 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        bad = set(self.operators) - set(OPERATORS)
        if bad:
            raise ValueError(f"unknown operators {sorted(bad)}")


@dataclass(frozen=True, order=True)
class Move:
    """Single-edge move on ``parent -> child``; ``reverse`` turns it into ``child -> parent``."""

    operator: str
    parent: str
    child: str

    def apply(self, dag: Dag) -> None:
        if self.operator == "add":
            dag.add_edge(self.parent, self.child)
        elif self.operator == "remove":
            dag.remove_edge(self.parent, self.child)
        else:
            dag.reverse_edge(self.parent, self.child)


@dataclass
class SearchStep:
    move: Move
    gain: float
    score: float


@dataclass
class SearchTrace:
    initial_score: float = 0.0
    steps: list[SearchStep] = field(default_factory=list)


def _candidate_moves(dag: Dag, idx: dict[str, int], scorer: FamilyScorer, cfg: SearchConfig):
    limit = cfg.max_parents
    pa = {v: {idx[p] for p in dag.parents(v)} for v in dag.nodes}
    current = {v: scorer(idx[v], pa[v]) for v in dag.nodes}
    if "add" in cfg.operators:
        for v in dag.nodes:
            if limit is not None and len(pa[v]) >= limit:
                continue
            for u in dag.nodes:
                if u == v or dag.has_edge(u, v) or dag.has_edge(v, u) or dag.has_path(v, u):
                    continue
                gain = scorer(idx[v], pa[v] | {idx[u]}) - current[v]
                yield Move("add", u, v), gain
    for u, v in dag.sorted_edges():
        if "remove" in cfg.operators:
            gain = scorer(idx[v], pa[v] - {idx[u]}) - current[v]
            yield Move("remove", u, v), gain
        if "reverse" in cfg.operators:
            if limit is not None and len(pa[u]) >= limit:
                continue
            if dag.has_path(u, v, skip=(u, v)):
                continue
            gain = (scorer(idx[v], pa[v] - {idx[u]}) - current[v]
                    + scorer(idx[u], pa[u] | {idx[v]}) - current[u])
            yield Move("reverse", u, v), gain


def hill_climb(data: DiscreteDataset, cfg: SearchConfig = SearchConfig(),
               trace: SearchTrace | None = None) -> Dag:
    """Greedy hill climbing over DAGs from the empty graph.

    Each step scores every legal add/remove/reverse move by the change in the
    touched families only, then applies the best strictly improving one.
    Gains within ``GAIN_TOL`` of the best are ties, resolved by the smallest
    ``(operator, parent, child)``. Stops at a local optimum or after
    ``cfg.max_iterations`` moves.
    """
    dag = Dag(data.names)
    idx = {n: i for i, n in enumerate(data.names)}
    scorer = FamilyScorer(data)
    score = math.fsum(scorer(i, ()) for i in range(len(data.names)))
    if trace is not None:
        trace.initial_score = score
    for _ in range(cfg.max_iterations):
        candidates = list(_candidate_moves(dag, idx, scorer, cfg))
        if not candidates:
            break
        best_gain = max(g for _, g in candidates)
        if best_gain <= GAIN_TOL:
            break
        move, gain = min((mg for mg in candidates if mg[1] >= best_gain - GAIN_TOL),
                         key=lambda mg: mg[0])
        move.apply(dag)
        assert dag.is_acyclic()
        score += gain
        if trace is not None:
            trace.steps.append(SearchStep(move, gain, score))
    return dag


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cpt:
    """``table[j, k] = P(child = k | parents = j)``; ``j`` is row-major over the parent alphabets."""

    child: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        sums = self.table.sum(axis=1)
        if not np.allclose(sums, 1.0, rtol=0, atol=1e-9):
            raise ValueError(f"CPT rows of {self.child!r} do not sum to 1")
        if np.any(self.table < 0):
            raise ValueError(f"negative entry in CPT of {self.child!r}")


class BayesianNetwork:
    def __init__(self, dag: Dag, cpts: dict[str, Cpt], alphabets: dict[str, tuple[str, ...]]):
        self.dag = dag
        self.cpts = cpts
        self.alphabets = {k: tuple(v) for k, v in alphabets.items()}
        for v in dag.nodes:
            cpt = cpts[v]
            if list(cpt.parents) != dag.parents(v):
                raise ValueError(f"CPT parents of {v!r} differ from the graph")
            rows = math.prod(len(self.alphabets[p]) for p in cpt.parents)
            if cpt.table.shape != (rows, len(self.alphabets[v])):
                raise ValueError(f"CPT of {v!r} has shape {cpt.table.shape}")

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.dag.nodes

    def cardinality(self, v: str) -> int:
        return len(self.alphabets[v])

    def factor_table(self, v: str) -> tuple[list[str], np.ndarray]:
        """CPT of ``v`` as a dense array over ``parents + [v]``."""
        cpt = self.cpts[v]
        scope = [*cpt.parents, v]
        return scope, cpt.table.reshape([self.cardinality(u) for u in scope])

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.dag.nodes),
            "edges": [list(e) for e in self.dag.sorted_edges()],
            "alphabets": {v: list(self.alphabets[v]) for v in self.dag.nodes},
            "cpts": {
                v: {"parents": list(self.cpts[v].parents), "rows": self.cpts[v].table.tolist()}
                for v in self.dag.nodes
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BayesianNetwork":
        dag = Dag(doc["nodes"], [tuple(e) for e in doc["edges"]])
        cpts = {
            v: Cpt(v, tuple(c["parents"]), np.asarray(c["rows"], dtype=float))
            for v, c in doc["cpts"].items()
        }
        return cls(dag, cpts, {k: tuple(a) for k, a in doc["alphabets"].items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def fit_parameters(data: DiscreteDataset, dag: Dag, alpha: float = 1.0) -> BayesianNetwork:
    """Smoothed maximum-likelihood CPTs: ``(N_jk + alpha) / (N_j + alpha * r)``.

    Parent configurations never observed get a uniform row.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    cpts = {}
    for v in dag.nodes:
        parents = dag.parents(v)
        counts = _family_counts(data, data.index(v), [data.index(p) for p in parents]).astype(float)
        r = counts.shape[1]
        num = counts + alpha
        den = num.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            table = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0 / r)
        cpts[v] = Cpt(v, tuple(parents), table)
    alphabets = {n: data.alphabets[i] for i, n in enumerate(data.names)}
    return BayesianNetwork(dag.copy(), cpts, alphabets)
