from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcatalyst.graph import Graph, complete_graph, star_graph
from netcatalyst.lab import (ExperimentConfig, InterventionError, InterventionPlan, apply_intervention, generate_ba, mark_newcomers,
                             generate_gnm, growth_panel, metric_degree_gini, metric_target_degree,
                             metric_target_share, paired_permutation_test, run_experiment)
from netcatalyst.saom import SaomSpec

from conftest import random_graphs

SPEC = SaomSpec.of("density", "transTriad", "inPop", beta=[-1.5, 0.2, 0.1])


class TestGenerators:
    @pytest.mark.parametrize("n,m", [(10, 2), (25, 1), (40, 3), (7, 6)])
    def test_edge_count(self, n, m):
        assert generate_ba(n, m, seed=n).num_edges == comb(m, 2) + (n - m) * m

    def test_example_count(self):
        assert generate_ba(10, 2, seed=0).num_edges == 17

    def test_n_equals_m_plus_one(self):
        assert generate_ba(6, 5, seed=1) == complete_graph(6)

    def test_bounds(self):
        for n, m in [(5, 0), (5, 5)]:
            with pytest.raises(InterventionError):
                generate_ba(n, m, seed=0)

    def test_deterministic(self):
        assert generate_ba(50, 2, 9) == generate_ba(50, 2, 9)

    def test_hubs_versus_random(self):
        wins = 0
        for r in range(100):
            ba = generate_ba(500, 2, seed=r)
            er = generate_gnm(500, ba.num_edges, seed=10_000 + r)
            wins += ba.degrees().max() > er.degrees().max()
        assert wins >= 95

    def test_growth_panel(self):
        p = growth_panel(generate_ba(20, 2, seed=3))
        assert len(p.waves) == 3
        assert list(np.bincount(p.entry)) == [10, 5, 5]
        assert not p.waves[0].adjacency[10:].any()

    def test_newcomer_covariate(self):
        p = mark_newcomers(growth_panel(generate_ba(20, 2, seed=3)))
        for k, a in enumerate(p.attributes):
            assert np.array_equal(a.numeric["newcomer"], (p.entry == k + 1).astype(float))
        assert p.attributes[0].numeric["newcomer"].sum() == 5


class TestIntervention:
    def test_clique_on_empty(self):
        g = apply_intervention(Graph.empty(6), InterventionPlan(targets=(0, 2, 4)))
        assert g.num_edges == 3

    def test_hub(self):
        g = apply_intervention(Graph.empty(8), InterventionPlan(targets=(0, 1, 2, 3, 4), mode="nao-hub"))
        assert g.n == 9 and g.num_edges == 5 and set(g.aux) == {8}
        again = apply_intervention(g, InterventionPlan(targets=(0, 1, 2, 3, 4), mode="nao-hub"))
        assert again == g

    def test_hub_capacity(self):
        with pytest.raises(InterventionError):
            apply_intervention(Graph.empty(8), InterventionPlan(targets=(0,), mode="nao-hub", capacity=8))

    def test_idempotent_clique(self):
        plan = InterventionPlan(targets=(0, 1, 2))
        g = apply_intervention(Graph.empty(5), plan)
        assert apply_intervention(g, plan) == g

    def test_budget(self):
        plan = InterventionPlan(targets=(0, 1, 2, 3), mode="link-budget", budget=4, seed=3)
        g = apply_intervention(Graph.empty(6), plan)
        assert g.num_edges == 4 and apply_intervention(g, plan) == g
        with pytest.raises(InterventionError):
            InterventionPlan(targets=(0, 1, 2), mode="link-budget", budget=4)

    def test_plan_validation(self):
        with pytest.raises(InterventionError):
            InterventionPlan(targets=())
        with pytest.raises(InterventionError):
            InterventionPlan(targets=(1,), mode="rewire")
        with pytest.raises(InterventionError):
            apply_intervention(Graph.empty(3), InterventionPlan(targets=(5,)))

    @given(random_graphs(min_n=5, max_n=9), st.sampled_from(["nao-clique", "nao-hub", "link-budget"]),
           st.integers(0, 2**16))
    @settings(max_examples=60, deadline=None)
    def test_monotone_and_idempotent(self, g, mode, seed):
        plan = InterventionPlan(targets=(0, 2, 4), mode=mode, budget=2, seed=seed)
        h = apply_intervention(g, plan)
        assert np.all(h.degrees()[: g.n] >= g.degrees())
        assert np.all(h.adjacency[: g.n, : g.n] >= g.adjacency)
        assert apply_intervention(h, plan) == h


class TestMetrics:
    def test_examples(self):
        assert metric_target_share(complete_graph(3), [0]) == pytest.approx(1 / 3)
        assert metric_degree_gini(complete_graph(5)) == 0
        assert metric_degree_gini(star_graph(4)) == pytest.approx(0.25)
        assert metric_target_degree(star_graph(4), [0, 1]) == 2.0

    def test_empty_share(self):
        with pytest.raises(InterventionError):
            metric_target_share(Graph.empty(3), [0])

    @given(random_graphs(min_n=2, max_n=9), st.randoms(use_true_random=False))
    @settings(max_examples=60, deadline=None)
    def test_properties(self, g, r):
        gini = metric_degree_gini(g)
        assert 0 <= gini <= 1
        perm = list(range(g.n))
        r.shuffle(perm)
        assert metric_degree_gini(g.permute(perm)) == pytest.approx(gini, abs=1e-12)
        if g.num_edges:
            assert metric_target_share(g, range(g.n)) == pytest.approx(1.0)

    @given(random_graphs(min_n=2, max_n=9))
    @settings(max_examples=60, deadline=None)
    def test_gini_brute_force(self, g):
        d = g.degrees().astype(float)
        expected = 0.0 if d.sum() == 0 else np.abs(d[:, None] - d[None, :]).sum() / (2 * len(d) ** 2 * d.mean())
        assert metric_degree_gini(g) == pytest.approx(expected, abs=1e-12)

    def test_hub_excluded_from_metrics(self):
        g = apply_intervention(Graph.from_edges(4, [(0, 1), (2, 3)]), InterventionPlan(targets=(0, 2), mode="nao-hub"))
        assert metric_target_share(g, [0, 2]) == pytest.approx(0.5)
        assert metric_target_degree(g, [0, 2]) == 1.0


class TestPermutation:
    def test_range_and_direction(self, rng):
        d = rng.normal(1.0, 1.0, size=50)
        assert 0 < paired_permutation_test(d, seed=1) < 0.01
        assert paired_permutation_test(-d, seed=1) > 0.99
        assert paired_permutation_test(np.zeros(10)) == 1.0

    def test_null_uniformish(self):
        ps = [paired_permutation_test(np.random.default_rng(s).normal(size=30), 2000, s) for s in range(200)]
        assert 0.02 < np.mean(np.array(ps) < 0.05) < 0.1


class TestExperiment:
    def test_requires_two_replicates(self):
        with pytest.raises(InterventionError):
            run_experiment(ExperimentConfig(10, 2, SPEC, 1.0, 1, None, 0))

    def test_null_config(self):
        rep = run_experiment(ExperimentConfig(20, 3, SPEC, 2.0, 50, None, seed=4, resamples=500))
        for m, diff in rep.mean_diff.items():
            assert np.all(diff == 0)
            assert np.all((rep.p_values[m] >= 0) & (rep.p_values[m] <= 1))
            assert np.array_equal(rep.control[m], rep.treated[m], equal_nan=True)

    def test_disabled_plan_bit_identical(self):
        plan = InterventionPlan(targets=(0, 1, 2), active_waves=frozenset())
        rep = run_experiment(ExperimentConfig(20, 3, SPEC, 2.0, 20, plan, seed=1, resamples=200))
        for m in rep.control:
            assert np.array_equal(rep.control[m], rep.treated[m], equal_nan=True)

    def test_shapes_and_determinism(self):
        plan = InterventionPlan(targets=(0, 1, 2, 3), active_waves={1})
        cfg = ExperimentConfig(20, 3, SPEC, 2.0, 30, plan, seed=8, resamples=500)
        a, b = run_experiment(cfg), run_experiment(cfg)
        assert a.control["target_share"].shape == (30, 4)
        assert a.replicates == 30 and len(a.seeds) == 30
        for m in a.control:
            assert np.array_equal(a.treated[m], b.treated[m], equal_nan=True)

    def test_worker_count_invariant(self):
        plan = InterventionPlan(targets=(0, 1, 2, 3), active_waves={1})
        base = dict(n=20, waves=3, spec=SPEC, rate=2.0, replicates=30, plan=plan, seed=8, resamples=500)
        a = run_experiment(ExperimentConfig(**base))
        b = run_experiment(ExperimentConfig(**base, workers=3))
        for m in a.control:
            assert np.array_equal(a.treated[m], b.treated[m], equal_nan=True)
            assert np.array_equal(a.p_values[m], b.p_values[m])

    def test_membership_fits(self):
        plan = InterventionPlan(targets=(0, 1, 2, 3, 4), active_waves={1})
        rep = run_experiment(ExperimentConfig(20, 2, SPEC, 3.0, 2, plan, seed=2, resamples=100, fit_replicates=1))
        assert set(rep.membership_effects) == {"control", "treated"}
        assert rep.membership_effects["treated"].shape == (1, 2)
