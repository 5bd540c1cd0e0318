"""Simulation-based goodness of fit on out-of-model statistics.

Observed degree, edgewise-shared-partner and triad-census counts are
compared bin by bin with percentile bands from graphs simulated at the
fitted parameters.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .approx import EstimationResult
from .ergm import ErgmSpec, default_burnin, default_thin, mcmc_sample
from .graph import TRIAD_CLASSES, Graph, NodeAttributes, degree_distribution, esp_distribution, triad_census
from .saom import Panel, SaomSpec, _kinds, _periods, _simulate

FAMILIES = ("degree", "esp", "triad")
MIN_SIMS = 20


class GofError(ValueError):
    pass


def _pooled_bins(dist: np.ndarray, max_k: int) -> np.ndarray:
    out = np.zeros(max_k + 1, dtype=float)
    head = min(len(dist), max_k)
    out[:head] = dist[:head]
    out[max_k] += dist[max_k:].sum()
    return out


def aux_vector(g: Graph, max_k: int = 15) -> np.ndarray:
    """Concatenated degree, ESP (each ``max_k + 1`` bins, tail pooled) and triad counts.

    Unlike :func:`graph.aux_statistics` the bin count does not depend on the
    graph size, so vectors from rosters of different sizes can be summed.
    """
    return np.concatenate([_pooled_bins(degree_distribution(g), max_k),
                           _pooled_bins(esp_distribution(g), max_k),
                           triad_census(g).astype(float)])


def bin_labels(max_k: int = 15) -> list[tuple[str, str]]:
    labels = []
    for fam in ("degree", "esp"):
        labels += [(fam, str(k)) for k in range(max_k)] + [(fam, f"{max_k}+")]
    labels += [("triad", c) for c in TRIAD_CLASSES]
    return labels


@dataclass
class GofReport:
    """Per-bin observed values against simulated percentile bands.

    ``simulated`` keeps the raw ensemble, shape ``(nsims, bins)``, so bands at
    another coverage can be recomputed with :meth:`bands`.
    """

    model: str
    labels: list[tuple[str, str]]
    observed: np.ndarray
    simulated: np.ndarray
    coverage: float = 0.95

    @property
    def nsims(self) -> int:
        return self.simulated.shape[0]

    def bands(self, coverage: float | None = None) -> np.ndarray:
        """``(bins, 3)`` array of lower, median and upper percentiles."""
        c = self.coverage if coverage is None else coverage
        if not 0 < c < 1:
            raise GofError("coverage must lie strictly between 0 and 1")
        q = 100 * np.array([(1 - c) / 2, 0.5, (1 + c) / 2])
        return np.percentile(self.simulated, q, axis=0).T

    def inside(self, coverage: float | None = None) -> np.ndarray:
        b = self.bands(coverage)
        return (self.observed >= b[:, 0]) & (self.observed <= b[:, 2])

    def inside_fraction(self, coverage: float | None = None) -> float:
        return float(self.inside(coverage).mean())

    def family(self, name: str) -> np.ndarray:
        return np.array([f == name for f, _ in self.labels])

    def rows(self):
        """``(family, bin, observed, lo, median, hi, inside)`` per bin."""
        b = self.bands()
        ins = self.inside()
        return [(f, lab, float(o), float(lo), float(md), float(hi), bool(i))
                for (f, lab), o, (lo, md, hi), i in zip(self.labels, self.observed, b, ins)]


def report_from_draws(model: str, observed: np.ndarray, draws, max_k: int = 15,
                      coverage: float = 0.95) -> GofReport:
    sims = np.asarray(draws, dtype=float)
    if sims.ndim != 2 or sims.shape[0] < MIN_SIMS:
        raise GofError(f"need at least {MIN_SIMS} simulated draws, got {0 if sims.ndim != 2 else sims.shape[0]}")
    return GofReport(model, bin_labels(max_k), np.asarray(observed, dtype=float), sims, coverage)


def _check_nsims(nsims: int) -> None:
    if nsims < MIN_SIMS:
        raise GofError(f"nsims must be at least {MIN_SIMS}, got {nsims}")


def gof_ergm(fit: EstimationResult, spec: ErgmSpec, attrs: NodeAttributes | None, g_obs: Graph,
             nsims: int = 100, seed: int = 0, max_k: int = 15, coverage: float = 0.95,
             burnin: int | None = None, thin: int | None = None) -> GofReport:
    """Bands from ``nsims`` chain draws at the fitted parameters, started at ``g_obs``."""
    _check_nsims(nsims)
    burnin = default_burnin(g_obs) if burnin is None else burnin
    thin = default_thin(g_obs) if thin is None else thin
    graphs = mcmc_sample(spec, attrs, g_obs, burnin, thin, nsims, seed, eta=fit.estimates)
    sims = np.stack([aux_vector(g, max_k) for g in graphs])
    return report_from_draws("ergm: " + " + ".join(spec.names), aux_vector(g_obs, max_k), sims, max_k, coverage)


def _active_subgraph(adj: np.ndarray, actors: np.ndarray) -> Graph:
    return Graph(len(actors), adj[np.ix_(actors, actors)])


def gof_saom(fit: EstimationResult, spec: SaomSpec, panel: Panel, nsims: int = 100, seed: int = 0,
             max_k: int = 15, coverage: float = 0.95, workers: int = 1) -> GofReport:
    """Bands from forward simulations of every period, pooled over end waves.

    Each draw simulates all periods from their observed start waves and sums
    the end-wave statistics over periods, restricted to each period's actors.
    """
    _check_nsims(nsims)
    m = panel.n_periods
    if len(spec.rates) != m:
        spec = spec.with_rates(np.ones(m))
    fitted = spec.with_theta(fit.estimates)
    periods = _periods(panel, fitted)
    observed = np.zeros(len(bin_labels(max_k)))
    for k in range(m):
        act = np.flatnonzero(panel.period_active(k))
        observed += aux_vector(_active_subgraph(panel.waves[k + 1].adjacency, act), max_k)

    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=(nsims, m))

    kinds = _kinds(fitted)
    beta = np.asarray(fitted.beta, dtype=float)

    def draw(r: int) -> np.ndarray:
        total = np.zeros_like(observed)
        for k, per in enumerate(periods):
            adj = per.start.copy()
            _simulate(adj, per.actors, per.forbidden, kinds, per.cov, beta, float(fitted.rates[k]),
                      int(seeds[r, k]), False, np.zeros(len(beta)))
            total += aux_vector(_active_subgraph(adj.astype(bool), per.actors), max_k)
        return total

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            sims = np.stack(list(ex.map(draw, range(nsims))))
    else:
        sims = np.stack([draw(r) for r in range(nsims)])
    return report_from_draws("saom: " + " + ".join(spec.names[m:]), observed, sims, max_k, coverage)
