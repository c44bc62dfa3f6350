"""Load initialization, stepping, operator powers, and linear decomposition."""

import numpy as np
import pytest

from bikeflow import (
    MobilityGraph,
    SeedSet,
    TransitionOperator,
    build_operator,
    init_loads,
    linearity_decompose,
    one_step_matrix,
    propagate,
    random_instance,
    read_loads_csv,
    step,
    write_loads_csv,
)

from conftest import chain_graph, fan_graph


def naive_power(graph: MobilityGraph, tau: int) -> np.ndarray:
    """Oracle: explicit repeated dense multiplication, no squaring tricks."""
    w = one_step_matrix(graph).toarray()
    out = np.eye(graph.n)
    for _ in range(tau):
        out = w @ out
    return out


class TestSeedSet:
    def test_sorted_dedup_contract(self):
        s = SeedSet((5, 1, 3), 10)
        assert s.nodes == (1, 3, 5)
        assert s.k == 3 and s.total_bikes == 30

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            SeedSet((1, 1), 10)

    def test_bikes_per_node_positive(self):
        with pytest.raises(ValueError):
            SeedSet((1,), 0)

    def test_empty_seed_allowed(self):
        s = SeedSet((), 10)
        assert s.k == 0 and s.total_bikes == 0


class TestInitLoads:
    def test_single_seed(self):
        g = random_instance(5, 2.0, rng_seed=1)
        loads = init_loads(SeedSet((3,), 100), g)
        assert loads.tolist() == [0, 0, 0, 100, 0]

    def test_all_nodes(self):
        g = random_instance(4, 2.0, rng_seed=1)
        loads = init_loads(SeedSet(tuple(range(4)), 1), g)
        assert loads.tolist() == [1, 1, 1, 1]

    def test_empty_seed_zero_vector(self):
        g = fan_graph()
        assert init_loads(SeedSet((), 5), g).tolist() == [0, 0, 0]

    def test_unknown_node_rejected(self):
        with pytest.raises(KeyError):
            init_loads(SeedSet((9,), 1), fan_graph())


class TestStep:
    def test_self_loop_fixed_point(self):
        g = MobilityGraph([(0, 0, 1.0)])
        loads = np.array([42.0])
        for _ in range(3):
            loads = step(loads, g)
        assert loads.tolist() == [42.0]

    def test_full_transfer(self):
        g = MobilityGraph([(0, 1, 1.0), (1, 1, 1.0)])
        assert step(np.array([7.0, 0.0]), g).tolist() == [0.0, 7.0]

    def test_three_node_split(self):
        # 10 bikes at the fan root: keeps 2, sends 5 and 3 to the leaves
        out = step(np.array([10.0, 0.0, 0.0]), fan_graph())
        assert np.allclose(out, [2.0, 5.0, 3.0])
        w = one_step_matrix(fan_graph()).toarray()
        assert np.allclose(w @ np.array([10.0, 0.0, 0.0]), [2.0, 5.0, 3.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            step(np.zeros(2), fan_graph())

    def test_conservation_many_steps(self):
        g = random_instance(37, 4.0, rng_seed=11)
        loads = init_loads(SeedSet((0, 5, 9), 100), g)
        for _ in range(1000):
            loads = step(loads, g)
        assert abs(loads.sum() - 300.0) <= 1e-6
        assert loads.min() >= 0.0


class TestPropagate:
    def test_tau_zero_is_init(self):
        g = fan_graph()
        seed = SeedSet((0,), 10)
        assert propagate(seed, g, 0).tolist() == init_loads(seed, g).tolist()

    def test_deterministic_chain(self):
        assert propagate(SeedSet((0,), 1), chain_graph(), 2).tolist() == [0.0, 0.0, 1.0]

    def test_matches_naive_power(self):
        g = random_instance(10, 3.0, rng_seed=5)
        seed = SeedSet((2, 7), 50)
        x = init_loads(seed, g)
        for tau in (1, 3, 7):
            assert np.allclose(propagate(seed, g, tau), naive_power(g, tau) @ x, atol=1e-9)

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            propagate(SeedSet((0,), 1), fan_graph(), -1)


class TestTransitionOperator:
    def test_tau_zero_identity(self):
        op = build_operator(fan_graph(), 0)
        assert np.allclose(op.matrix(), np.eye(3))

    def test_tau_one_is_step_matrix(self):
        g = random_instance(8, 3.0, rng_seed=2)
        op = build_operator(g, 1)
        assert np.allclose(op.matrix(), one_step_matrix(g).toarray())

    def test_tau_five_matches_naive(self):
        g = random_instance(8, 3.0, rng_seed=3)
        op = build_operator(g, 5)
        assert np.allclose(op.matrix(), naive_power(g, 5), atol=1e-12)

    def test_columns_are_single_seed_loads(self):
        g = random_instance(12, 3.0, rng_seed=4)
        op = build_operator(g, 4)
        for u in (0, 5, 11):
            direct = propagate(SeedSet((u,), 1), g, 4)
            assert np.allclose(op.column(u), direct, atol=1e-12)
        cols = op.columns([0, 5, 11])
        assert cols.shape == (12, 3)
        assert np.allclose(cols[:, 1], op.column(5))

    def test_column_stochastic(self):
        g = random_instance(25, 5.0, rng_seed=6)
        for tau in (1, 2, 9):
            m = build_operator(g, tau).matrix()
            assert np.allclose(m.sum(axis=0), 1.0, atol=1e-9)
            assert m.min() >= 0.0

    def test_sparse_path_agrees_with_dense(self):
        g = random_instance(30, 4.0, rng_seed=8)
        seed = SeedSet((1, 4, 20), 10)
        dense = TransitionOperator(g, 6)
        sparse_op = TransitionOperator(g, 6, dense_max_n=0)
        assert dense.is_dense and not sparse_op.is_dense
        assert np.allclose(dense.seed_loads(seed), sparse_op.seed_loads(seed), atol=1e-9)
        assert np.allclose(dense.column(4), sparse_op.column(4), atol=1e-9)

    def test_apply_matches_iterated_step(self):
        g = random_instance(15, 4.0, rng_seed=9)
        op = build_operator(g, 7)
        seed = SeedSet((3, 8), 100)
        loads = init_loads(seed, g)
        for _ in range(7):
            loads = step(loads, g)
        assert np.allclose(op.apply(init_loads(seed, g)), loads, atol=1e-9)


class TestLinearityDecompose:
    def test_empty_base_is_single_seed(self):
        g = random_instance(9, 3.0, rng_seed=10)
        op = build_operator(g, 3)
        got = linearity_decompose(np.zeros(9), op.column(4), 25)
        assert np.allclose(got, propagate(SeedSet((4,), 25), g, 3), atol=1e-12)

    def test_matches_direct_propagation(self):
        g = random_instance(14, 4.0, rng_seed=12)
        op = build_operator(g, 5)
        base = propagate(SeedSet((1, 6), 40), g, 5)
        got = linearity_decompose(base, op.column(9), 40)
        want = propagate(SeedSet((1, 6, 9), 40), g, 5)
        assert np.allclose(got, want, atol=1e-9)

    def test_three_node_assembly(self):
        g = random_instance(11, 3.0, rng_seed=13)
        op = build_operator(g, 2)
        loads = np.zeros(11)
        for u in (2, 5, 7):
            loads = linearity_decompose(loads, op.column(u), 30)
        assert np.allclose(loads, propagate(SeedSet((2, 5, 7), 30), g, 2), atol=1e-9)

    def test_rejects_node_already_in_seed(self):
        g = random_instance(6, 2.0, rng_seed=14)
        op = build_operator(g, 1)
        with pytest.raises(ValueError):
            linearity_decompose(np.zeros(6), op.column(2), 10, seed_nodes=(1, 2), node=2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            linearity_decompose(np.zeros(3), np.zeros(4), 1)


class TestLoadsCsv:
    def test_round_trip_12_digits(self, tmp_path):
        g = MobilityGraph(
            [(0, 0, 1.0 / 3.0), (0, 1, 2.0 / 3.0), (1, 1, 1.0)],
            node_meta={0: (0, 0), 1: (0, 1)},
        )
        loads = propagate(SeedSet((0,), 100), g, 3)
        path = tmp_path / "loads.csv"
        write_loads_csv(str(path), g, loads)
        back = read_loads_csv(str(path), g)
        assert np.allclose(back, loads, rtol=1e-12, atol=0)

    def test_reader_skips_comment_lines(self, tmp_path):
        g = fan_graph()
        loads = np.array([1.0, 2.0, 3.0])
        path = tmp_path / "loads.csv"
        write_loads_csv(str(path), g, loads)
        path.write_text("# tool v0\n# config {}\n" + path.read_text())
        assert read_loads_csv(str(path), g).tolist() == [1.0, 2.0, 3.0]
