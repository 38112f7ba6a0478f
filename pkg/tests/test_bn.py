import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localbn.bn import (
    CycleError,
    Dag,
    Move,
    SearchConfig,
    SearchTrace,
    family_bic,
    fit_parameters,
    hill_climb,
    network_bic,
)
from localbn.discretizer import DiscreteDataset

from oracles import (
    all_dags,
    best_dag_by_enumeration,
    bic_family_oracle,
    sample_v_structure,
)

STRONG = [[0.05, 0.7], [0.8, 0.97]]


def random_dataset(rng, n_vars, n_rows, max_card=4):
    cards = rng.integers(1, max_card + 1, n_vars)
    data = np.column_stack([rng.integers(0, c, n_rows) for c in cards])
    names = tuple(f"v{i}" for i in range(n_vars))
    alphabets = tuple(tuple(str(k) for k in range(c)) for c in cards)
    return DiscreteDataset(names, alphabets, data)


def random_dag(rng, names, p=0.4):
    order = list(rng.permutation(len(names)))
    edges = [(names[order[i]], names[order[j]]) for j in range(len(names)) for i in range(j) if rng.random() < p]
    return Dag(names, edges)


def rows_of(data):
    return [tuple(r) for r in data.data.tolist()]


class TestDag:
    def test_cycle_rejected(self):
        d = Dag("abc", [("a", "b"), ("b", "c")])
        with pytest.raises(CycleError):
            d.add_edge("c", "a")
        assert d.edges == {("a", "b"), ("b", "c")}

    def test_self_loop_and_duplicate(self):
        d = Dag("ab", [("a", "b")])
        with pytest.raises(CycleError):
            d.add_edge("a", "a")
        with pytest.raises(ValueError):
            d.add_edge("a", "b")

    def test_reverse_rolls_back_on_cycle(self):
        d = Dag("abc", [("a", "b"), ("b", "c"), ("a", "c")])
        with pytest.raises(CycleError):
            d.reverse_edge("a", "c")
        assert d.edges == {("a", "b"), ("b", "c"), ("a", "c")}

    def test_all_dags_count(self):
        assert len(all_dags(3)) == 25
        assert len(all_dags(2)) == 3


class TestFamilyBic:
    def test_uniform_binary_no_parents(self):
        data = DiscreteDataset(("c",), (("0", "1"),), np.array([[0]] * 4 + [[1]] * 4))
        # loglik = 8 ln 0.5, penalty = ln(8)/2 * 1
        expected = -5.545177444479562 - 1.0397207708399179
        assert family_bic(data, "c", []) == pytest.approx(expected, abs=1e-12)
        assert bic_family_oracle(rows_of(data), 0, [], [2]) == pytest.approx(expected, abs=1e-12)

    def test_deterministic_child(self):
        a = np.array([0, 1, 0, 1, 1, 0, 0, 1])
        data = DiscreteDataset(("a", "c"), (("0", "1"),) * 2, np.column_stack([a, a]))
        # MLE is exact so loglik = 0; penalty = ln(8)/2 * (2-1) * 2 = ln 8
        assert family_bic(data, "c", ["a"]) == pytest.approx(-2.0794415416798357, abs=1e-12)

    def test_irrelevant_parent_lowers_score(self):
        rng = np.random.default_rng(11)
        data = DiscreteDataset(("a", "b"), (("0", "1"),) * 2, rng.integers(0, 2, (10_000, 2)))
        assert family_bic(data, "b", ["a"]) < family_bic(data, "b", [])

    def test_parent_order_irrelevant(self):
        data = random_dataset(np.random.default_rng(2), 4, 200)
        assert family_bic(data, "v0", ["v1", "v3"]) == pytest.approx(family_bic(data, "v0", ["v3", "v1"]), abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        data = random_dataset(rng, 4, int(rng.integers(1, 80)))
        parents = [p for p in (1, 2, 3) if rng.random() < 0.5]
        cards = [len(a) for a in data.alphabets]
        got = family_bic(data, "v0", [f"v{p}" for p in parents])
        assert got == pytest.approx(bic_family_oracle(rows_of(data), 0, parents, cards), abs=1e-9)


class TestNetworkBic:
    def test_empty_graph_is_sum_of_roots(self):
        data = random_dataset(np.random.default_rng(4), 5, 100)
        dag = Dag(data.names)
        assert network_bic(data, dag) == pytest.approx(sum(family_bic(data, v, []) for v in data.names), abs=1e-9)

    def test_decomposability_random(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            data = random_dataset(rng, 5, 60)
            dag = random_dag(rng, data.names)
            total = sum(family_bic(data, v, dag.parents(v)) for v in data.names)
            assert network_bic(data, dag) == pytest.approx(total, abs=1e-9)

    def test_enumeration_best_matches(self):
        data = sample_v_structure(np.random.default_rng(8), 200, STRONG)
        scored = best_dag_by_enumeration(data)
        for score, edges in scored:
            dag = Dag(data.names, [(data.names[u], data.names[v]) for u, v in edges])
            assert network_bic(data, dag) == pytest.approx(score, abs=1e-9)


class TestHillClimb:
    def test_single_variable(self):
        data = DiscreteDataset(("a",), (("0", "1"),), np.array([[0], [1], [1]]))
        assert hill_climb(data).edges == frozenset()

    def test_v_structure(self):
        data = sample_v_structure(np.random.default_rng(0), 10_000, STRONG)
        best_score, best_edges = best_dag_by_enumeration(data)[0]
        assert sorted(best_edges) == [(0, 2), (1, 2)]
        dag = hill_climb(data)
        assert dag.edges == {("X1", "Y"), ("X2", "Y")}
        assert network_bic(data, dag) == pytest.approx(best_score, abs=1e-6)

    def test_independent_coins(self):
        rng = np.random.default_rng(1)
        data = DiscreteDataset(("A", "B"), (("0", "1"),) * 2, rng.integers(0, 2, (10_000, 2)))
        assert hill_climb(data).edges == frozenset()

    def test_trace_is_consistent(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            data = random_dataset(rng, 5, 300, max_card=3)
            # plant dependencies so the search actually moves
            data.data[:, 1] = np.minimum(data.data[:, 0], len(data.alphabets[1]) - 1)
            trace = SearchTrace()
            replay = Dag(data.names)
            dag = hill_climb(data, SearchConfig(max_parents=2), trace)
            prev = trace.initial_score
            assert prev == pytest.approx(network_bic(data, replay), abs=1e-9)
            for step in trace.steps:
                step.move.apply(replay)
                assert replay.is_acyclic()
                assert step.score > prev
                assert step.score == pytest.approx(network_bic(data, replay), abs=1e-9)
                prev = step.score
            assert replay == dag
            assert all(dag.in_degree(v) <= 2 for v in dag.nodes)

    def test_local_optimum(self):
        data = sample_v_structure(np.random.default_rng(3), 300, STRONG)
        dag = hill_climb(data)
        base = network_bic(data, dag)
        for u in data.names:
            for v in data.names:
                if u == v:
                    continue
                for op in ("add", "remove", "reverse"):
                    trial = dag.copy()
                    try:
                        Move(op, u, v).apply(trial)
                    except (ValueError, KeyError):
                        continue
                    assert network_bic(data, trial) <= base + 1e-7

    def test_determinism(self):
        data = random_dataset(np.random.default_rng(12), 6, 300, 3)
        assert hill_climb(data) == hill_climb(data)

    def test_max_iterations(self):
        data = sample_v_structure(np.random.default_rng(0), 2000, STRONG)
        assert len(hill_climb(data, SearchConfig(max_iterations=1)).edges) == 1
        assert hill_climb(data, SearchConfig(max_iterations=0)).edges == frozenset()


class TestFitParameters:
    def test_laplace(self):
        data = DiscreteDataset(("c",), (("0", "1"),), np.array([[0], [0], [0], [1]]))
        bn = fit_parameters(data, Dag(("c",)), alpha=1.0)
        np.testing.assert_allclose(bn.cpts["c"].table, [[4 / 6, 2 / 6]], atol=1e-15)

    def test_unobserved_parent_row_uniform(self):
        data = DiscreteDataset(("p", "c"), (("0", "1"), ("0", "1", "2")), np.array([[0, 0], [0, 1]]))
        bn = fit_parameters(data, Dag(("p", "c"), [("p", "c")]), alpha=1.0)
        np.testing.assert_allclose(bn.cpts["c"].table[1], [1 / 3] * 3, atol=1e-15)
        bn0 = fit_parameters(data, Dag(("p", "c"), [("p", "c")]), alpha=0.0)
        np.testing.assert_allclose(bn0.cpts["c"].table[1], [1 / 3] * 3, atol=1e-15)

    def test_alpha_zero_is_mle(self):
        data = DiscreteDataset(("c",), (("0", "1", "2"),), np.array([[0], [1], [1], [2], [2], [2]]))
        bn = fit_parameters(data, Dag(("c",)), alpha=0.0)
        np.testing.assert_allclose(bn.cpts["c"].table, [[1 / 6, 2 / 6, 3 / 6]], atol=1e-15)

    def test_rows_normalised_and_positive(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            data = random_dataset(rng, 5, 50)
            bn = fit_parameters(data, random_dag(rng, data.names))
            for cpt in bn.cpts.values():
                np.testing.assert_allclose(cpt.table.sum(axis=1), 1.0, atol=1e-9)
                assert np.all(cpt.table > 0)

    def test_row_major_parent_layout(self):
        # parents (a, b) binary; row index = 2*a + b
        data = DiscreteDataset(("a", "b", "c"), (("0", "1"),) * 3,
                               np.array([[1, 0, 1]] * 3 + [[0, 1, 0]] * 3))
        bn = fit_parameters(data, Dag(("a", "b", "c"), [("a", "c"), ("b", "c")]), alpha=0.0)
        np.testing.assert_allclose(bn.cpts["c"].table[2], [0, 1])
        np.testing.assert_allclose(bn.cpts["c"].table[1], [1, 0])

    def test_serialisation_round_trip(self):
        data = random_dataset(np.random.default_rng(1), 4, 80)
        bn = fit_parameters(data, random_dag(np.random.default_rng(2), data.names))
        back = type(bn).from_dict(bn.to_dict())
        assert back.dag == bn.dag
        assert back.to_json() == bn.to_json()

