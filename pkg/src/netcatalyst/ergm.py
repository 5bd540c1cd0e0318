"""Exponential random graph models for undirected networks.

Covers the statistic vector, change statistics, a Metropolis toggle
sampler, an exhaustive-enumeration oracle for tiny graphs, and a
stochastic-approximation fit of the moment equation ``E_eta[g] = g_obs``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import exp

import numba
import numpy as np

from .approx import EstimationError, EstimationResult, RMSettings, solve
from .graph import (ForbiddenPairError, Graph, NodeAttributes, _check_pair, stat_gwdegree,
                    stat_gwesp, triangle_count)

EDGES, GWDEGREE, GWESP, TRIANGLES, NODEFACTOR, NODEMATCH = range(6)
KIND_CODES = {"edges": EDGES, "gwdegree": GWDEGREE, "gwesp": GWESP,
              "triangles": TRIANGLES, "nodefactor": NODEFACTOR, "nodematch": NODEMATCH}
ATTRIBUTE_KINDS = {"nodefactor", "nodematch"}
MAX_EXACT_N = 7


class ErgmError(ValueError):
    pass


class BoundaryError(EstimationError):
    """Observed statistics sit on the edge of their support; no finite MLE."""


@dataclass(frozen=True)
class ErgmEffect:
    kind: str
    attr: str | None = None
    level: str | None = None
    decay: float = 0.5

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ErgmError(f"unknown ERGM effect {self.kind!r}")
        if self.kind in ATTRIBUTE_KINDS and self.attr is None:
            raise ErgmError(f"{self.kind} needs an attribute")
        if self.kind == "nodefactor" and self.level is None:
            raise ErgmError("nodefactor needs a level")

    @property
    def key(self):
        return (self.kind, self.attr, self.level)

    @property
    def name(self) -> str:
        if self.kind in ("gwdegree", "gwesp"):
            return f"{self.kind}({self.decay:g})"
        if self.kind == "nodefactor":
            return f"nodefactor.{self.attr}.{self.level}"
        if self.kind == "nodematch":
            return f"nodematch.{self.attr}"
        return self.kind


@dataclass(frozen=True)
class ErgmSpec:
    effects: tuple[ErgmEffect, ...]
    params: np.ndarray = None
    fixed: tuple[bool, ...] = None

    def __post_init__(self):
        effects = tuple(self.effects)
        if not effects:
            raise ErgmError("an ERGM needs at least one effect")
        keys = [e.key for e in effects]
        if len(set(keys)) != len(keys):
            raise ErgmError("duplicate effect descriptor")
        params = np.zeros(len(effects)) if self.params is None else np.asarray(self.params, dtype=float)
        if params.shape != (len(effects),):
            raise ErgmError(f"expected {len(effects)} parameters, got {params.shape}")
        fixed = (False,) * len(effects) if self.fixed is None else tuple(bool(f) for f in self.fixed)
        if len(fixed) != len(effects):
            raise ErgmError("fixed mask length differs from effect count")
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "fixed", fixed)

    @classmethod
    def of(cls, *effects, params=None) -> "ErgmSpec":
        return cls(tuple(effects), params)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.effects]

    def with_params(self, params) -> "ErgmSpec":
        return ErgmSpec(self.effects, np.asarray(params, dtype=float), self.fixed)


def _compile(spec: ErgmSpec, attrs: NodeAttributes | None, n: int):
    """Effect arrays consumed by the kernels: kind codes, decays, per-node columns."""
    kinds = np.array([KIND_CODES[e.kind] for e in spec.effects], dtype=np.int64)
    decays = np.array([e.decay for e in spec.effects], dtype=float)
    cols = np.zeros((len(spec.effects), n))
    for k, e in enumerate(spec.effects):
        if e.kind not in ATTRIBUTE_KINDS:
            continue
        if attrs is None or not attrs.has(e.attr):
            raise ErgmError(f"unknown attribute {e.attr!r} in effect {e.name}")
        if attrs.n != n:
            raise ErgmError(f"attributes cover {attrs.n} nodes, graph has {n}")
        try:
            col = attrs.indicator(e.attr, e.level) if e.kind == "nodefactor" else attrs.codes(e.attr)
        except KeyError:
            raise ErgmError(f"unknown level {e.level!r} for attribute {e.attr!r}") from None
        if np.isnan(col).any():
            raise ErgmError(f"attribute {e.attr!r} has missing values")
        cols[k] = col
    return kinds, decays, cols


def ergm_stats(g: Graph, spec: ErgmSpec, attrs: NodeAttributes | None = None) -> np.ndarray:
    """Statistic vector ``g_A(y)`` in the spec's effect order."""
    _, _, cols = _compile(spec, attrs, g.n)
    a = g.adjacency
    iu, ju = np.nonzero(np.triu(a, 1))
    out = np.empty(len(spec.effects))
    for k, e in enumerate(spec.effects):
        if e.kind == "edges":
            out[k] = len(iu)
        elif e.kind == "gwdegree":
            out[k] = stat_gwdegree(g, e.decay)
        elif e.kind == "gwesp":
            out[k] = stat_gwesp(g, e.decay)
        elif e.kind == "triangles":
            out[k] = triangle_count(g)
        elif e.kind == "nodefactor":
            out[k] = (cols[k][iu] + cols[k][ju]).sum()
        else:
            out[k] = (cols[k][iu] == cols[k][ju]).sum()
    return out


@numba.njit(cache=True)
def _change(adj, deg, sp, i, j, kinds, decays, cols, out):
    """Change statistics for adding (i, j) to a graph where it is absent."""
    n = adj.shape[0]
    for k in range(kinds.shape[0]):
        kind = kinds[k]
        if kind == 0:
            out[k] = 1.0
        elif kind == 1:
            r = 1.0 - np.exp(-decays[k])
            out[k] = r ** deg[i] + r ** deg[j]
        elif kind == 2:
            r = 1.0 - np.exp(-decays[k])
            v = np.exp(decays[k]) * (1.0 - r ** sp[i, j])
            for h in range(n):
                if adj[i, h] and adj[j, h]:
                    v += r ** sp[i, h] + r ** sp[j, h]
            out[k] = v
        elif kind == 3:
            out[k] = sp[i, j]
        elif kind == 4:
            out[k] = cols[k, i] + cols[k, j]
        else:
            out[k] = 1.0 if cols[k, i] == cols[k, j] else 0.0


@numba.njit(cache=True)
def _flip(adj, deg, sp, i, j):
    """Toggle (i, j) and keep degree and shared-partner tables in sync."""
    n = adj.shape[0]
    s = 1 if adj[i, j] == 0 else -1
    adj[i, j] = adj[j, i] = 1 if s == 1 else 0
    deg[i] += s
    deg[j] += s
    for h in range(n):
        if adj[j, h] and h != i:
            sp[i, h] += s
            sp[h, i] += s
        if adj[i, h] and h != j:
            sp[j, h] += s
            sp[h, j] += s


@numba.njit(cache=True)
def _tables(adj):
    n = adj.shape[0]
    deg = np.zeros(n, dtype=np.int64)
    sp = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for h in range(n):
            if adj[i, h]:
                deg[i] += 1
                for j in range(n):
                    if adj[h, j] and j != i:
                        sp[i, j] += 1
    return deg, sp


@numba.njit(cache=True)
def _chain(adj, pi, pj, kinds, decays, cols, eta, stats, burnin, thin, count, seed, keep):
    """Metropolis toggle chain; ``adj`` and ``stats`` are advanced in place."""
    np.random.seed(seed)
    n = adj.shape[0]
    p = kinds.shape[0]
    npairs = pi.shape[0]
    deg, sp = _tables(adj)
    delta = np.empty(p)
    out = np.empty((count, p))
    graphs = np.zeros((count if keep else 0, n, n), dtype=np.uint8)
    total = burnin + thin * count
    emitted = 0
    for step in range(total):
        q = np.random.randint(npairs)
        i = pi[q]
        j = pj[q]
        present = adj[i, j] == 1
        if present:
            _flip(adj, deg, sp, i, j)
        _change(adj, deg, sp, i, j, kinds, decays, cols, delta)
        sign = -1.0 if present else 1.0
        logr = 0.0
        for k in range(p):
            logr += sign * eta[k] * delta[k]
        accept = logr >= 0.0 or np.random.random() < np.exp(logr)
        if accept:
            if not present:
                _flip(adj, deg, sp, i, j)
            for k in range(p):
                stats[k] += sign * delta[k]
        elif present:
            _flip(adj, deg, sp, i, j)
        if step >= burnin and (step - burnin + 1) % thin == 0:
            out[emitted] = stats
            if keep:
                graphs[emitted] = adj
            emitted += 1
    return out, graphs


def change_stats(g: Graph, i: int, j: int, spec: ErgmSpec, attrs: NodeAttributes | None = None) -> np.ndarray:
    """``g_A(y + ij) - g_A(y - ij)`` for every effect."""
    _check_pair(g.n, i, j)
    if g.forbidden[i, j]:
        raise ForbiddenPairError(f"pair ({i}, {j}) is a structural zero")
    kinds, decays, cols = _compile(spec, attrs, g.n)
    adj = g.adjacency.astype(np.uint8)
    adj[i, j] = adj[j, i] = 0
    deg = adj.sum(axis=1).astype(np.int64)
    sp = adj.astype(np.int64) @ adj.astype(np.int64)
    out = np.empty(len(kinds))
    _change(adj, deg, sp, i, j, kinds, decays, cols, out)
    return out


def default_burnin(g: Graph) -> int:
    return 10 * _n_pairs(g)


def default_thin(g: Graph) -> int:
    return max(10, _n_pairs(g))


def _n_pairs(g: Graph) -> int:
    return len(g.toggleable_pairs()[0])


class _Sampler:
    """Persistent chain state so successive calls continue one trajectory."""

    def __init__(self, g0: Graph, spec: ErgmSpec, attrs):
        pi, pj = g0.toggleable_pairs()
        if len(pi) == 0:
            raise ErgmError("no toggleable pair: the chain cannot move")
        self.pi = pi.astype(np.int64)
        self.pj = pj.astype(np.int64)
        self.kinds, self.decays, self.cols = _compile(spec, attrs, g0.n)
        self.adj = g0.adjacency.astype(np.uint8)
        self.stats = ergm_stats(g0, spec, attrs)
        self.template = g0

    def run(self, eta, burnin: int, thin: int, count: int, seed: int, keep: bool = False):
        eta = np.asarray(eta, dtype=float)
        return _chain(self.adj, self.pi, self.pj, self.kinds, self.decays, self.cols, eta,
                      self.stats, int(burnin), int(thin), int(count), int(seed), keep)


def mcmc_sample(spec: ErgmSpec, attrs: NodeAttributes | None, g0: Graph, burnin: int, thin: int,
                count: int, seed: int, eta=None) -> list[Graph]:
    """Draw ``count`` graphs from the ERGM with parameters ``eta`` (default: the spec's).

    Proposals pick a uniformly random non-forbidden pair; the toggle is
    accepted with probability ``min(1, exp(+-eta . delta))``.
    """
    if count < 1 or thin < 1 or burnin < 0:
        raise ErgmError("need count >= 1, thin >= 1, burnin >= 0")
    sampler = _Sampler(g0, spec, attrs)
    eta = spec.params if eta is None else eta
    _, graphs = sampler.run(eta, burnin, thin, count, seed, keep=True)
    return [g0.with_adjacency(a.astype(bool)) for a in graphs]


def mcmc_stats(spec: ErgmSpec, attrs, g0: Graph, burnin: int, thin: int, count: int, seed: int,
               eta=None) -> np.ndarray:
    """Statistic vectors of a chain without materialising the graphs."""
    sampler = _Sampler(g0, spec, attrs)
    eta = spec.params if eta is None else eta
    stats, _ = sampler.run(eta, burnin, thin, count, seed)
    return stats


# exhaustive oracle -------------------------------------------------------

def enumerate_graphs(spec: ErgmSpec, attrs: NodeAttributes | None, n: int, forbidden: Graph | None = None):
    """Statistics of every labelled graph on ``n`` nodes.

    Returns ``(bits, stats)``: ``bits[s, q]`` tells whether pair ``q`` (in
    ``itertools.combinations`` order over allowed pairs) is tied in state
    ``s``, and ``stats[s]`` is the statistic vector. Built from per-node
    and per-pair sums, independently of the distribution-based path used
    by :func:`ergm_stats`.
    """
    if n > MAX_EXACT_N:
        raise ErgmError(f"exact enumeration supports n <= {MAX_EXACT_N}, got {n}")
    if n < 2:
        raise ErgmError("exact enumeration needs at least two nodes")
    _, _, cols = _compile(spec, attrs, n)
    pairs = [(i, j) for i, j in combinations(range(n), 2)
             if forbidden is None or not forbidden.forbidden[i, j]]
    index = {pq: q for q, pq in enumerate(pairs)}
    P = len(pairs)
    states = np.arange(2 ** P, dtype=np.int64)
    bits = ((states[:, None] >> np.arange(P)) & 1).astype(np.int8)

    def tie(i, j):
        q = index.get((min(i, j), max(i, j)))
        return bits[:, q] if q is not None else np.zeros(len(states), dtype=np.int8)

    deg = np.stack([sum(tie(v, u).astype(np.int64) for u in range(n) if u != v) for v in range(n)], axis=1)
    sp = {pq: sum(tie(pq[0], h).astype(np.int64) * tie(pq[1], h) for h in range(n) if h not in pq)
          for pq in pairs}
    out = np.zeros((len(states), len(spec.effects)))
    for k, e in enumerate(spec.effects):
        if e.kind == "edges":
            out[:, k] = bits.sum(axis=1)
        elif e.kind == "triangles":
            out[:, k] = sum(tie(a, b).astype(np.int64) * tie(b, c) * tie(a, c)
                            for a, b, c in combinations(range(n), 3))
        elif e.kind == "gwdegree":
            r = 1.0 - exp(-e.decay)
            out[:, k] = exp(e.decay) * (1.0 - r ** deg).sum(axis=1)
        elif e.kind == "gwesp":
            r = 1.0 - exp(-e.decay)
            out[:, k] = sum(exp(e.decay) * tie(*pq) * (1.0 - r ** sp[pq]) for pq in pairs)
        elif e.kind == "nodefactor":
            out[:, k] = sum(tie(i, j) * (cols[k, i] + cols[k, j]) for i, j in pairs)
        else:
            out[:, k] = sum(tie(i, j) * float(cols[k, i] == cols[k, j]) for i, j in pairs)
    return bits, out, pairs


def _exact_weights(stats: np.ndarray, eta):
    logw = stats @ np.asarray(eta, dtype=float)
    m = logw.max()
    w = np.exp(logw - m)
    z = w.sum()
    return w / z, m + np.log(z)


def exact_moments(spec: ErgmSpec, attrs: NodeAttributes | None, eta, n: int, forbidden: Graph | None = None):
    """Exact ``E_eta[g]`` and log normalising constant by full enumeration."""
    _, stats, _ = enumerate_graphs(spec, attrs, n, forbidden)
    prob, log_k = _exact_weights(stats, eta)
    return prob @ stats, float(log_k)


def exact_distribution(spec: ErgmSpec, attrs, eta, n: int, forbidden: Graph | None = None):
    """State probabilities with the bit patterns and pair order that index them."""
    bits, stats, pairs = enumerate_graphs(spec, attrs, n, forbidden)
    prob, _ = _exact_weights(stats, eta)
    return bits, prob, pairs


def exact_mle(g_obs: Graph, spec: ErgmSpec, attrs=None, init=None, tol: float = 1e-10, max_iter: int = 200):
    """Newton iteration on the exact moment equation (``n <= 7``)."""
    _, stats, _ = enumerate_graphs(spec, attrs, g_obs.n, g_obs)
    target = ergm_stats(g_obs, spec, attrs)
    eta = np.zeros(len(target)) if init is None else np.asarray(init, dtype=float).copy()
    for _ in range(max_iter):
        prob, _ = _exact_weights(stats, eta)
        mean = prob @ stats
        centred = stats - mean
        cov = centred.T @ (centred * prob[:, None])
        step = np.linalg.solve(cov, target - mean)
        # halve until the log-likelihood improves
        ll_old = eta @ target - _exact_weights(stats, eta)[1]
        t = 1.0
        while t > 1e-8:
            cand = eta + t * step
            if cand @ target - _exact_weights(stats, cand)[1] >= ll_old - 1e-12:
                break
            t /= 2
        eta = cand
        if np.max(np.abs(t * step)) < tol:
            break
    return eta


# fitting -----------------------------------------------------------------

class _ErgmProblem:
    def __init__(self, g_obs: Graph, spec: ErgmSpec, attrs, settings: RMSettings):
        self.names = spec.names
        self.observed = ergm_stats(g_obs, spec, attrs)
        self.sampler = _Sampler(g_obs, spec, attrs)
        self.burnin = settings.burnin if settings.burnin is not None else default_burnin(g_obs)
        self.thin = settings.thin if settings.thin is not None else default_thin(g_obs)
        self.settings = settings

    def simulate(self, theta, seeds):
        stats, _ = self.sampler.run(theta, 0, self.thin, len(seeds), seeds[0])
        return stats

    def derivative(self, theta, seeds, free):
        stats, _ = self.sampler.run(theta, self.burnin, self.thin, len(seeds), seeds[0])
        return stats, np.atleast_2d(np.cov(stats, rowvar=False))

    def constrain(self, theta, proposal):
        return proposal


def _check_boundary(g_obs: Graph, spec: ErgmSpec, observed: np.ndarray) -> None:
    n_pairs = _n_pairs(g_obs)
    for k, e in enumerate(spec.effects):
        if spec.fixed[k]:
            continue
        if e.kind == "edges" and observed[k] in (0, n_pairs):
            raise BoundaryError(f"observed edge count {int(observed[k])} is at the boundary (0 or {n_pairs})")
        if not np.isfinite(observed[k]):
            raise BoundaryError(f"observed statistic for {e.name} is not finite")


def fit_ergm(g_obs: Graph, spec: ErgmSpec, attrs: NodeAttributes | None = None, init=None,
             rm: RMSettings | None = None, seed: int = 0) -> EstimationResult:
    """Method-of-moments (equivalently maximum-likelihood) ERGM fit.

    Phase 1 estimates ``Cov_eta[g]`` from a chain started at the observed
    graph, phase 2 runs Robbins-Monro sub-phases with halving gain, and
    phase 3 checks convergence and yields standard errors from the inverse
    simulated covariance.
    """
    rm = rm or RMSettings()
    problem = _ErgmProblem(g_obs, spec, attrs, rm)
    _check_boundary(g_obs, spec, problem.observed)
    if init is None:
        init = spec.params.copy()
        kinds = [e.kind for e in spec.effects]
        if not init.any() and "edges" in kinds:
            # start the edges term at the logit of the observed density
            k = kinds.index("edges")
            rho = float(np.clip(problem.observed[k] / _n_pairs(g_obs), 1e-3, 1 - 1e-3))
            init[k] = np.log(rho / (1 - rho))
    init = np.asarray(init, dtype=float)
    if init.shape != (len(spec.effects),):
        raise ErgmError("init has wrong length")
    return solve(problem, init, rm, seed, fixed=np.array(spec.fixed))
