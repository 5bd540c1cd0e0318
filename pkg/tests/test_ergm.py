from math import log

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcatalyst.approx import RMSettings
from netcatalyst.ergm import (BoundaryError, ErgmEffect, ErgmError, ErgmSpec, change_stats, enumerate_graphs,
                              ergm_stats, exact_distribution, exact_mle, exact_moments, fit_ergm, mcmc_sample,
                              mcmc_stats)
from netcatalyst.graph import Graph, NodeAttributes, complete_graph, diamond_graph, toggle_edge

from conftest import random_graphs

E = ErgmEffect


def all_effects_spec():
    return ErgmSpec.of(E("edges"), E("gwdegree", decay=0.7), E("gwesp", decay=0.5), E("triangles"),
                       E("nodefactor", "grp", "b"), E("nodematch", "grp"))


def grp_attrs(n):
    return NodeAttributes(n, categorical={"grp": np.array(["a", "b", "c"] * 3)[:n]}, levels={"grp": ("a", "b", "c")})


class TestStats:
    def test_examples(self):
        assert list(ergm_stats(complete_graph(3), ErgmSpec.of(E("edges")))) == [3]
        s = ergm_stats(diamond_graph(), ErgmSpec.of(E("edges"), E("gwesp", decay=0.5)))
        assert s == pytest.approx([5, 5.3935], abs=1e-3)
        attrs = NodeAttributes(3, categorical={"member": ["yes", "no", "no"]})
        spec = ErgmSpec.of(E("nodefactor", "member", "yes"), E("nodematch", "member"))
        assert list(ergm_stats(Graph.from_edges(3, [(0, 1)]), spec, attrs)) == [1, 0]

    def test_unknown_attribute_or_level(self):
        g = Graph.empty(3)
        with pytest.raises(ErgmError):
            ergm_stats(g, ErgmSpec.of(E("nodematch", "nope")), NodeAttributes(3))
        with pytest.raises(ErgmError):
            ergm_stats(g, ErgmSpec.of(E("nodefactor", "c", "z")), NodeAttributes(3, categorical={"c": ["a"] * 3}))

    def test_spec_invariants(self):
        with pytest.raises(ErgmError):
            ErgmSpec(())
        with pytest.raises(ErgmError):
            ErgmSpec.of(E("edges"), E("edges"))
        with pytest.raises(ErgmError):
            ErgmSpec.of(E("edges"), params=[1.0, 2.0])
        with pytest.raises(ErgmError):
            E("twopath")


class TestChangeStats:
    def test_examples(self):
        spec = ErgmSpec.of(E("edges"), E("triangles"), E("gwesp", decay=0.5))
        g = toggle_edge(complete_graph(3), 0, 1)
        assert change_stats(g, 0, 1, spec)[:2] == pytest.approx([1, 1])
        assert change_stats(Graph.empty(5), 1, 3, spec)[2] == 0

    @given(random_graphs(min_n=3, max_n=9, forbidden=True), st.data())
    @settings(max_examples=200, deadline=None)
    def test_matches_brute_force(self, g, data):
        pi, pj = g.toggleable_pairs()
        if len(pi) == 0:
            return
        q = data.draw(st.integers(0, len(pi) - 1))
        i, j = int(pi[q]), int(pj[q])
        spec, attrs = all_effects_spec(), grp_attrs(g.n)
        on = g if g.has_edge(i, j) else toggle_edge(g, i, j)
        off = toggle_edge(on, i, j)
        brute = ergm_stats(on, spec, attrs) - ergm_stats(off, spec, attrs)
        assert change_stats(g, i, j, spec, attrs) == pytest.approx(brute, abs=1e-10)


class TestExact:
    def test_moments_examples(self):
        mean, _ = exact_moments(ErgmSpec.of(E("edges")), None, [0.0], 3)
        assert mean[0] == pytest.approx(1.5)
        mean, _ = exact_moments(ErgmSpec.of(E("edges"), E("triangles")), None, [0.0, log(2)], 3)
        assert mean == pytest.approx([15 / 9, 2 / 9])
        theta = 0.37
        mean, logk = exact_moments(ErgmSpec.of(E("edges")), None, [theta], 2)
        assert mean[0] == pytest.approx(1 / (1 + np.exp(-theta)))
        assert logk == pytest.approx(np.log1p(np.exp(theta)))

    def test_enumeration_agrees_with_stats(self):
        spec, attrs = all_effects_spec(), grp_attrs(5)
        bits, stats, pairs = enumerate_graphs(spec, attrs, 5)
        rng = np.random.default_rng(0)
        for s in rng.choice(len(bits), size=40, replace=False):
            g = Graph.from_edges(5, [p for p, b in zip(pairs, bits[s]) if b])
            assert stats[s] == pytest.approx(ergm_stats(g, spec, attrs), abs=1e-10)

    def test_forbidden_pairs_skipped(self):
        forb = Graph.from_edges(3, [], forbidden=[(0, 1)])
        mean, _ = exact_moments(ErgmSpec.of(E("edges")), None, [0.0], 3, forb)
        assert mean[0] == pytest.approx(1.0)

    def test_size_limit(self):
        with pytest.raises(ErgmError):
            exact_moments(ErgmSpec.of(E("edges")), None, [0.0], 8)

    def test_exact_mle_edges_closed_form(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        eta = exact_mle(g, ErgmSpec.of(E("edges")))
        assert eta[0] == pytest.approx(log(4 / 2), abs=1e-8)


class TestSampler:
    def test_needs_a_pair(self):
        with pytest.raises(ErgmError):
            mcmc_sample(ErgmSpec.of(E("edges")), None, Graph.empty(1), 10, 1, 1, 0)

    @pytest.mark.parametrize("eta,rho", [(0.0, 0.5), (log(3), 0.75)])
    def test_edges_density(self, eta, rho):
        g0 = Graph.empty(10)
        stats = mcmc_stats(ErgmSpec.of(E("edges")), None, g0, 2000, 45, 4000, seed=3, eta=[eta])
        dens = stats[:, 0] / 45
        se = np.sqrt(rho * (1 - rho) / 45 / len(dens))
        assert abs(dens.mean() - rho) < 3 * se * 1.5  # mild allowance for residual autocorrelation

    def test_deterministic_and_respects_forbidden(self):
        g0 = Graph.from_edges(5, [], forbidden=[(0, 1), (2, 3)])
        spec = ErgmSpec.of(E("edges"), params=[1.0])
        a = mcmc_sample(spec, None, g0, 50, 5, 30, seed=9)
        b = mcmc_sample(spec, None, g0, 50, 5, 30, seed=9)
        assert a == b
        assert not any(g.has_edge(0, 1) or g.has_edge(2, 3) for g in a)

    def test_distribution_matches_exact(self):
        from scipy.stats import chisquare
        spec = ErgmSpec.of(E("edges"), E("gwesp", decay=0.5))
        eta = [-0.4, 0.6]
        bits, prob, pairs = exact_distribution(spec, None, eta, 3)
        graphs = mcmc_sample(spec, None, Graph.empty(3), 300, 6, 30000, seed=5, eta=eta)
        codes = [sum(int(g.has_edge(*p)) << q for q, p in enumerate(pairs)) for g in graphs]
        counts = np.bincount(codes, minlength=len(prob))
        assert chisquare(counts, prob * len(codes)).pvalue > 0.01


class TestFit:
    def test_density_half(self):
        rng = np.random.default_rng(1)
        n = 20
        iu = np.triu_indices(n, 1)
        pick = rng.choice(len(iu[0]), size=len(iu[0]) // 2, replace=False)
        g = Graph.from_edges(n, list(zip(iu[0][pick], iu[1][pick])))
        res = fit_ergm(g, ErgmSpec.of(E("edges")), seed=1)
        assert res.converged and abs(res.estimates[0]) < 2 * res.standard_errors[0]
        assert res.standard_errors[0] == pytest.approx(1 / np.sqrt(len(iu[0]) * 0.25), rel=0.15)

    def test_boundary(self):
        with pytest.raises(BoundaryError):
            fit_ergm(Graph.empty(5), ErgmSpec.of(E("edges")))
        with pytest.raises(BoundaryError):
            fit_ergm(complete_graph(5), ErgmSpec.of(E("edges")))

    def test_deterministic_and_converged_honest(self):
        g = diamond_graph()
        spec = ErgmSpec.of(E("edges"), E("triangles"))
        a = fit_ergm(g, spec, seed=11)
        b = fit_ergm(g, spec, seed=11)
        assert np.array_equal(a.estimates, b.estimates) and np.array_equal(a.standard_errors, b.standard_errors)
        assert a.converged == bool(np.all(np.abs(a.tratios) < 0.1) and a.overall_ratio < 0.25)
        assert np.all(a.standard_errors > 0)

    def test_se_permutation_invariant(self):
        g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5)])
        spec = ErgmSpec.of(E("edges"), E("gwesp", decay=0.5))
        rm = RMSettings(phase3_draws=20000)
        a = fit_ergm(g, spec, rm=rm, seed=2)
        b = fit_ergm(g.permute([5, 3, 1, 0, 2, 4]), spec, rm=rm, seed=2)
        assert a.standard_errors == pytest.approx(b.standard_errors, rel=0.1)

    def test_fixed_effect(self):
        g = diamond_graph()
        spec = ErgmSpec(tuple([E("edges"), E("triangles")]), np.array([0.0, 0.3]), (False, True))
        res = fit_ergm(g, spec, seed=0)
        assert res.estimates[1] == 0.3 and res.standard_errors[1] == 0
