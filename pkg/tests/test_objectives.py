"""Spread objectives: threshold count and sum of square roots."""

import math

import numpy as np
import pytest

from bikeflow import (
    MobilityGraph,
    SeedSet,
    SpreadObjective,
    evaluate,
    propagate,
    random_instance,
    s_spread,
    t_spread,
)


class TestThresholdSpread:
    def test_uniform_loads_all_qualify(self):
        n, B = 8, 40
        assert t_spread(np.full(n, B / n), gamma=B / n) == n

    def test_all_zero(self):
        assert t_spread(np.zeros(5), gamma=1.0) == 0

    def test_indifferent_to_surplus(self):
        # doubling everywhere vs piling the surplus on one node: same score
        n, gamma = 6, 2.0
        flat = np.full(n, 2 * gamma)
        skew = np.full(n, gamma)
        skew[-1] = (n + 1) * gamma
        assert t_spread(flat, gamma) == t_spread(skew, gamma) == n

    def test_tolerance_on_closed_inequality(self):
        gamma = 1.0
        assert t_spread(np.array([gamma]), gamma) == 1
        assert t_spread(np.array([gamma - 1e-10]), gamma) == 1
        assert t_spread(np.array([gamma - 1e-7]), gamma) == 0

    def test_returns_int(self):
        assert isinstance(t_spread(np.array([2.0, 0.0]), 1.0), int)


class TestSqrtSpread:
    def test_uniform_is_sqrt_nB(self):
        n, B = 9, 36
        assert s_spread(np.full(n, B / n)) == pytest.approx(math.sqrt(n * B))

    def test_single_pile(self):
        assert s_spread(np.array([49.0, 0.0, 0.0])) == pytest.approx(7.0)

    def test_all_ones(self):
        q = 4
        assert s_spread(np.ones(3 * q)) == pytest.approx(3 * q)

    def test_negative_load_rejected(self):
        with pytest.raises(ValueError):
            s_spread(np.array([1.0, -0.5]))

    def test_cauchy_schwarz_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            loads = rng.uniform(0, 10, size=rng.integers(2, 30))
            assert s_spread(loads) <= math.sqrt(loads.size * loads.sum()) + 1e-9


class TestEvaluateDispatch:
    def test_threshold(self):
        obj = SpreadObjective.threshold(1.0)
        assert evaluate(obj, np.array([1.0, 0.0, 2.0])) == 2.0

    def test_sqrt(self):
        obj = SpreadObjective.sqrt()
        assert evaluate(obj, np.array([4.0, 9.0])) == pytest.approx(5.0)

    def test_evaluate_returns_float(self):
        v = evaluate(SpreadObjective.threshold(1.0), np.array([3.0]))
        assert isinstance(v, float)

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError):
            SpreadObjective(kind="cubic", gamma=None)

    def test_threshold_needs_positive_gamma(self):
        with pytest.raises(ValueError):
            SpreadObjective.threshold(0.0)
        with pytest.raises(ValueError):
            SpreadObjective(kind="threshold", gamma=None)

    def test_sqrt_takes_no_gamma(self):
        with pytest.raises(ValueError):
            SpreadObjective(kind="sqrt", gamma=1.0)

    def test_evaluate_columns_matches_scalar(self):
        rng = np.random.default_rng(3)
        mat = rng.uniform(0, 5, size=(7, 4))
        for obj in (SpreadObjective.threshold(1.5), SpreadObjective.sqrt()):
            cols = obj.evaluate_columns(mat)
            assert cols.shape == (4,)
            for j in range(4):
                assert cols[j] == pytest.approx(obj.evaluate(mat[:, j]))


def spread_of(objective, seed_nodes, graph, tau, L):
    return evaluate(objective, propagate(SeedSet(tuple(seed_nodes), L), graph, tau))


class TestSeedSetProperties:
    def test_monotone_in_seed_set(self):
        rng = np.random.default_rng(42)
        for t in range(30):
            g = random_instance(12, 3.0, rng_seed=200 + t)
            nodes = list(g.node_ids)
            s = sorted(rng.choice(nodes, size=3, replace=False).tolist())
            v = next(u for u in nodes if u not in s)
            for obj in (SpreadObjective.sqrt(), SpreadObjective.threshold(1.0)):
                lo = spread_of(obj, s, g, 2, 10)
                hi = spread_of(obj, s + [v], g, 2, 10)
                assert hi >= lo - 1e-9

    def test_sqrt_diminishing_gains(self):
        rng = np.random.default_rng(43)
        obj = SpreadObjective.sqrt()
        for t in range(30):
            g = random_instance(10, 3.0, rng_seed=300 + t)
            nodes = list(g.node_ids)
            perm = rng.permutation(nodes).tolist()
            s, extra, v = perm[:2], perm[2:4], perm[4]
            tee = s + extra
            gain_s = spread_of(obj, s + [v], g, 2, 10) - spread_of(obj, s, g, 2, 10)
            gain_t = spread_of(obj, tee + [v], g, 2, 10) - spread_of(obj, tee, g, 2, 10)
            assert gain_s >= gain_t - 1e-9

    def test_threshold_gains_can_grow(self):
        # two feeders must combine before the middle node crosses gamma = 1,
        # so the second feeder's gain jumps from 0 to 1: not diminishing
        g = MobilityGraph(
            [
                (0, 0, 0.4), (0, 2, 0.6),
                (1, 1, 0.4), (1, 2, 0.6),
                (2, 2, 1.0),
            ]
        )
        obj = SpreadObjective.threshold(1.0)
        gain_empty = spread_of(obj, [1], g, 1, 1) - 0.0
        gain_after_a = spread_of(obj, [0, 1], g, 1, 1) - spread_of(obj, [0], g, 1, 1)
        assert gain_empty == 0.0
        assert gain_after_a == 1.0
        assert gain_after_a > gain_empty  # violates the diminishing-gain inequality
