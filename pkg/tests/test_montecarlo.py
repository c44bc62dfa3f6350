"""Atomic-bike simulation against the deterministic expectation engine."""

import math

import numpy as np
import pytest
from scipy import stats

from bikeflow import (
    MobilityGraph,
    SeedSet,
    compare,
    propagate,
    random_instance,
    s_spread,
    simulate,
    validate_against_engine,
)

from conftest import chain_graph


class TestDeterministicGraphs:
    def test_chain_matches_exactly(self):
        seed = SeedSet((0,), 25)
        sim = simulate(seed, chain_graph(), tau=2, trials=50, rng_seed=0)
        assert sim.mean_loads.tolist() == [0.0, 0.0, 25.0]
        assert sim.std_loads.tolist() == [0.0, 0.0, 0.0]

    def test_zero_z_scores(self):
        seed = SeedSet((0,), 10)
        sim, report = validate_against_engine(seed, chain_graph(), 2, trials=20, rng_seed=1)
        assert np.all(report.z_scores == 0.0)
        assert report.max_abs_deviation == 0.0
        assert report.t_spread_sim == report.t_spread_expected


class TestBinomialCase:
    # coin-flip node: half the bikes stay, half move to an absorbing node
    def graph(self):
        return MobilityGraph([(0, 0, 0.5), (0, 1, 0.5), (1, 1, 1.0)])

    def test_mean_and_std(self):
        trials = 4000
        sim = simulate(SeedSet((0,), 100), self.graph(), 1, trials, rng_seed=7)
        se = 5.0 / math.sqrt(trials)
        assert abs(sim.mean_loads[1] - 50.0) <= 4 * se
        # per-trial std of binomial(100, 1/2) is 5
        assert sim.std_loads[1] == pytest.approx(5.0, rel=0.05)

    def test_methods_agree_statistically(self):
        trials = 3000
        a = simulate(SeedSet((0,), 100), self.graph(), 1, trials, rng_seed=2, method="multinomial")
        b = simulate(SeedSet((0,), 100), self.graph(), 1, trials, rng_seed=2, method="per_bike")
        assert abs(a.mean_loads[1] - b.mean_loads[1]) <= 4 * 5.0 * math.sqrt(2.0 / trials)


class TestStreamContracts:
    def test_reproducible(self):
        g = random_instance(12, 3.0, rng_seed=0)
        seed = SeedSet((0, 3), 20)
        a = simulate(seed, g, 3, trials=40, rng_seed=9)
        b = simulate(seed, g, 3, trials=40, rng_seed=9)
        assert np.array_equal(a.mean_loads, b.mean_loads)
        assert np.array_equal(a.std_loads, b.std_loads)

    def test_trial_streams_are_independent_of_count(self):
        # the first 10 trials of a 40-trial run equal a 10-trial run
        g = random_instance(8, 3.0, rng_seed=1)
        seed = SeedSet((2,), 30)
        small = simulate(seed, g, 2, trials=10, rng_seed=4)
        big = simulate(seed, g, 2, trials=40, rng_seed=4)
        # means over disjoint prefixes differ, but determinism per trial means
        # rerunning the small count reproduces exactly
        again = simulate(seed, g, 2, trials=10, rng_seed=4)
        assert np.array_equal(small.mean_loads, again.mean_loads)
        assert not np.array_equal(small.mean_loads, big.mean_loads)

    def test_conservation_of_mean(self):
        g = random_instance(15, 4.0, rng_seed=2)
        sim = simulate(SeedSet((0, 7), 50), g, 4, trials=100, rng_seed=5)
        assert sim.mean_loads.sum() == pytest.approx(100.0, abs=1e-9)

    def test_bad_arguments(self):
        g = random_instance(4, 2.0, rng_seed=3)
        with pytest.raises(ValueError):
            simulate(SeedSet((0,), 5), g, 1, trials=0, rng_seed=0)
        with pytest.raises(ValueError):
            simulate(SeedSet((0,), 5), g, -1, trials=5, rng_seed=0)
        with pytest.raises(ValueError):
            simulate(SeedSet((0,), 5), g, 1, trials=5, rng_seed=0, method="quantum")


class TestMethodEquivalence:
    def test_chi_square_on_terminal_distribution(self):
        # 3 bikes on a 3-way splitter: the terminal count vector is one of 10
        # compositions; both samplers must draw from the same distribution
        g = MobilityGraph(
            [(0, 1, 0.3), (0, 2, 0.5), (0, 0, 0.2), (1, 1, 1.0), (2, 2, 1.0)]
        )
        seed = SeedSet((0,), 3)
        counts = {}
        trials = 3000
        for method in ("multinomial", "per_bike"):
            tally = {}
            for t in range(trials):
                sim = simulate(seed, g, 1, trials=1, rng_seed=10_000 * (method == "per_bike") + t)
                key = tuple(int(x) for x in sim.mean_loads)
                tally[key] = tally.get(key, 0) + 1
            counts[method] = tally
        keys = sorted(set(counts["multinomial"]) | set(counts["per_bike"]))
        table = np.array(
            [[counts[m].get(k, 0) for k in keys] for m in ("multinomial", "per_bike")]
        )
        _, p, _, _ = stats.chi2_contingency(table)
        assert p > 0.001

    def test_per_bike_matches_expectation(self):
        g = random_instance(10, 3.0, rng_seed=6)
        seed = SeedSet((0, 4), 25)
        sim, report = validate_against_engine(
            seed, g, 2, trials=2000, rng_seed=11, method="per_bike"
        )
        finite = np.isfinite(report.z_scores)
        assert np.all(np.abs(report.z_scores[finite]) <= 5.0)


class TestConvergence:
    def test_deviation_shrinks_with_trials(self):
        g = random_instance(12, 4.0, rng_seed=8)
        seed = SeedSet((1, 5), 40)
        expected = propagate(seed, g, 3)
        dev = {}
        for trials in (100, 10_000):
            sim = simulate(seed, g, 3, trials=trials, rng_seed=13)
            dev[trials] = float(np.max(np.abs(sim.mean_loads - expected)))
        # O(1/sqrt(trials)): a 100x trial budget should cut the error well down
        assert dev[10_000] < dev[100]


class TestCompare:
    def test_dimension_mismatch(self):
        sim = simulate(SeedSet((0,), 5), chain_graph(), 1, trials=3, rng_seed=0)
        with pytest.raises(ValueError):
            compare(sim, np.zeros(7))

    def test_low_confidence_flag(self):
        sim = simulate(SeedSet((0,), 5), chain_graph(), 1, trials=1, rng_seed=0)
        report = compare(sim, propagate(SeedSet((0,), 5), chain_graph(), 1))
        assert report.low_confidence
        d = report.as_dict()
        assert d["low_confidence"] and d["trials"] == 1

    def test_jensen_gap_direction(self):
        g = random_instance(14, 3.0, rng_seed=9)
        seed = SeedSet((0, 6), 30)
        sim, report = validate_against_engine(seed, g, 3, trials=500, rng_seed=21)
        assert report.mean_sqrt_spread <= report.s_spread_sim + 1e-9
        assert report.s_spread_expected == pytest.approx(s_spread(propagate(seed, g, 3)))
