"""Stochastic actor-oriented models for undirected network panels.

Actors get opportunities at Poisson-distributed times (one-sided
initiative). The chosen actor picks one tie to toggle, or none, through a
multinomial logit on its objective function. New ties need the partner's
confirmation with probability ``logistic(delta f_partner)``; dissolution is
unilateral. Nodes outside the composition of a period are structural
zeros.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .approx import EstimationResult, RMSettings, convergence_check, solve
from .graph import Graph, NodeAttributes

log = logging.getLogger(__name__)

DENSITY, TRANS_TRIAD, IN_POP, EGO_PLUS_ALT, SAME = range(5)
KIND_CODES = {"density": DENSITY, "transTriad": TRANS_TRIAD, "inPop": IN_POP,
              "egoPlusAltX": EGO_PLUS_ALT, "sameX": SAME}
ALIASES = {"degree": "density"}
COVARIATE_KINDS = {"egoPlusAltX", "sameX"}
RATE_FLOOR = 1e-3

__all__ = ["SaomEffect", "SaomSpec", "Panel", "effect_stat", "objective", "microstep_probs",
           "confirm_prob", "simulate_period", "simulate_panel", "target_statistics", "fit_saom", "convergence_check"]


class SaomError(ValueError):
    pass


class AbsentActorError(SaomError):
    pass


@dataclass(frozen=True)
class SaomEffect:
    kind: str
    attr: str | None = None

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in KIND_CODES:
            raise SaomError(f"unknown SAOM effect {self.kind!r}")
        if kind in COVARIATE_KINDS and self.attr is None:
            raise SaomError(f"{kind} needs a covariate")
        object.__setattr__(self, "kind", kind)

    @property
    def name(self) -> str:
        return f"{self.kind}.{self.attr}" if self.attr else self.kind


@dataclass(frozen=True)
class SaomSpec:
    """Evaluation effects with parameters ``beta`` and per-period rates."""

    effects: tuple[SaomEffect, ...]
    beta: np.ndarray = None
    rates: np.ndarray = (1.0,)
    fixed: tuple[bool, ...] = None

    def __post_init__(self):
        effects = tuple(self.effects)
        if sum(e.kind == "density" for e in effects) != 1:
            raise SaomError("exactly one density effect is required")
        if len({e.name for e in effects}) != len(effects):
            raise SaomError("duplicate effect")
        beta = np.zeros(len(effects)) if self.beta is None else np.asarray(self.beta, dtype=float)
        if beta.shape != (len(effects),):
            raise SaomError(f"expected {len(effects)} effect parameters")
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if np.any(rates <= 0):
            raise SaomError("rate parameters must be positive")
        p = len(rates) + len(effects)
        fixed = (False,) * p if self.fixed is None else tuple(bool(f) for f in self.fixed)
        if len(fixed) != p:
            raise SaomError("fixed mask must cover rates then effects")
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "fixed", fixed)

    @classmethod
    def of(cls, *names, beta=None, rates=(1.0,), **kw) -> "SaomSpec":
        effects = [n if isinstance(n, SaomEffect) else SaomEffect(n) for n in names]
        return cls(tuple(effects), beta, rates, **kw)

    @property
    def names(self) -> list[str]:
        return [f"rate {m + 1}" for m in range(len(self.rates))] + [e.name for e in self.effects]

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.rates, self.beta])

    def with_theta(self, theta) -> "SaomSpec":
        theta = np.asarray(theta, dtype=float)
        m = len(self.rates)
        return SaomSpec(self.effects, theta[m:], theta[:m], self.fixed)

    def with_rates(self, rates) -> "SaomSpec":
        rates = np.atleast_1d(np.asarray(rates, dtype=float))
        fixed = self.fixed[len(self.rates):]
        return SaomSpec(self.effects, self.beta, rates, (False,) * len(rates) + tuple(fixed))


@dataclass(frozen=True)
class Panel:
    """Waves over a fixed roster with per-wave attributes and composition.

    ``entry[i]``/``exit[i]`` are the first and last waves (0-based) in which
    node ``i`` is present. Waves carry structural zeros for absent nodes.
    """

    node_ids: tuple[str, ...]
    waves: tuple[Graph, ...]
    attributes: tuple[NodeAttributes, ...] = None
    entry: np.ndarray = None
    exit: np.ndarray = None

    def __post_init__(self):
        waves = tuple(self.waves)
        n = len(self.node_ids)
        if len(waves) < 2:
            raise SaomError("a panel needs at least two waves")
        if any(w.n != n for w in waves):
            raise SaomError("all waves must share the roster")
        entry = np.zeros(n, dtype=np.int64) if self.entry is None else np.asarray(self.entry, dtype=np.int64)
        exit_ = np.full(n, len(waves) - 1, dtype=np.int64) if self.exit is None else np.asarray(self.exit, dtype=np.int64)
        attrs = self.attributes
        if attrs is None:
            attrs = tuple(NodeAttributes(n) for _ in waves)
        attrs = tuple(attrs)
        if len(attrs) != len(waves):
            raise SaomError("need one attribute table per wave")
        object.__setattr__(self, "waves", waves)
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "entry", entry)
        object.__setattr__(self, "exit", exit_)
        for w, g in enumerate(waves):
            absent = ~self.present(w)
            if g.adjacency[absent].any():
                raise SaomError(f"wave {w + 1} has ties on absent nodes")
            zeros = absent[:, None] | absent[None, :]
            np.fill_diagonal(zeros, False)
            if not g.forbidden[zeros].all():
                object.__setattr__(self, "waves", self.waves[:w] + (g.with_forbidden(g.forbidden | zeros),)
                                   + self.waves[w + 1:])

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def n_periods(self) -> int:
        return len(self.waves) - 1

    def present(self, wave: int) -> np.ndarray:
        return (self.entry <= wave) & (self.exit >= wave)

    def period_active(self, m: int) -> np.ndarray:
        """Actors of period ``m``: nodes present at its end wave."""
        return self.present(m + 1)

    def period_start(self, m: int) -> Graph:
        """Start state of period ``m`` with non-actors' rows cleared and frozen."""
        active = self.period_active(m)
        a = self.waves[m].adjacency & active[:, None] & active[None, :]
        forb = ~(active[:, None] & active[None, :]) | self.waves[m + 1].forbidden
        np.fill_diagonal(forb, False)
        return Graph(self.n, a & ~forb, forb)


# actor-level statistics -------------------------------------------------

def _covariate(attrs: NodeAttributes, effect: SaomEffect, n: int) -> np.ndarray:
    if effect.kind not in COVARIATE_KINDS:
        return np.zeros(n)
    if attrs is None or not attrs.has(effect.attr):
        raise SaomError(f"unknown covariate {effect.attr!r}")
    if effect.kind == "egoPlusAltX" and effect.attr not in attrs.numeric:
        raise SaomError(f"egoPlusAltX needs a numeric covariate, {effect.attr!r} is categorical")
    col = attrs.codes(effect.attr)
    missing = np.isnan(col)
    if missing.any():
        fill = float(np.nanmean(col)) if (~missing).any() else 0.0
        warnings.warn(f"covariate {effect.attr!r}: {int(missing.sum())} missing values set to the mean {fill:.4g}",
                      stacklevel=3)
        col = np.where(missing, fill, col)
    return col


def _kinds(spec: SaomSpec) -> np.ndarray:
    return np.array([KIND_CODES[e.kind] for e in spec.effects], dtype=np.int64)


def _compile(spec: SaomSpec, attrs: NodeAttributes | None, n: int):
    kinds = _kinds(spec)
    cov = np.stack([_covariate(attrs, e, n) for e in spec.effects]) if spec.effects else np.zeros((0, n))
    return kinds, cov


def effect_stat(x: Graph, i: int, effect: SaomEffect | str, attrs: NodeAttributes | None = None) -> float:
    """Actor ``i``'s value ``s_ik(x)`` of one effect."""
    if isinstance(effect, str):
        effect = SaomEffect(effect)
    if not 0 <= i < x.n:
        raise SaomError(f"node {i} outside roster")
    a = x.adjacency
    nb = np.flatnonzero(a[i])
    if effect.kind == "density":
        return float(len(nb))
    if effect.kind == "transTriad":
        return float(a[np.ix_(nb, nb)].sum() // 2)
    if effect.kind == "inPop":
        return float(x.degrees()[nb].sum())
    v = _covariate(attrs, effect, x.n)
    if effect.kind == "egoPlusAltX":
        return float((v[i] + v[nb]).sum())
    return float((v[nb] == v[i]).sum())


def objective(x: Graph, i: int, spec: SaomSpec, attrs: NodeAttributes | None = None) -> float:
    """``f_i(x) = sum_k beta_k s_ik(x)``."""
    return float(sum(b * effect_stat(x, i, e, attrs) for b, e in zip(spec.beta, spec.effects)))


@numba.njit(cache=True)
def _tie_stats(adj, deg, sp, i, j, kinds, cov, out):
    """Signed change statistics of f_i for toggling (i, j)."""
    adding = adj[i, j] == 0
    for k in range(kinds.shape[0]):
        kind = kinds[k]
        if kind == 0:
            d = 1.0
        elif kind == 1:
            d = float(sp[i, j])
        elif kind == 2:
            d = float(deg[j] + 1) if adding else float(deg[j])
        elif kind == 3:
            d = cov[k, i] + cov[k, j]
        else:
            d = 1.0 if cov[k, i] == cov[k, j] else 0.0
        out[k] = d if adding else -d


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
def _flip(adj, deg, sp, i, j):
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
def _options(adj, deg, sp, i, actors, forb, kinds, cov, beta, dmat, vals):
    """Fill change statistics and objective changes; row 0 is keep, row k+1 is actors[k]."""
    p = kinds.shape[0]
    for k in range(p):
        dmat[0, k] = 0.0
    vals[0] = 0.0
    for a in range(actors.shape[0]):
        j = actors[a]
        if j == i or forb[i, j]:
            vals[a + 1] = -np.inf
            for k in range(p):
                dmat[a + 1, k] = 0.0
        else:
            _tie_stats(adj, deg, sp, i, j, kinds, cov, dmat[a + 1])
            v = 0.0
            for k in range(p):
                v += beta[k] * dmat[a + 1, k]
            vals[a + 1] = v


@numba.njit(cache=True)
def _poisson_ppf(u, mu):
    """Inverse CDF of Poisson(mu); monotone in mu for a fixed u."""
    if mu <= 0.0:
        return 0
    k = 0
    logp = -mu
    cdf = np.exp(logp)
    limit = int(mu + 40.0 * np.sqrt(mu) + 40.0)
    while cdf < u and k < limit:
        k += 1
        logp += np.log(mu) - np.log(k)
        cdf += np.exp(logp)
    return k


@numba.njit(cache=True, nogil=True)
def _simulate(adj, actors, forb, kinds, cov, beta, rate, seed, debug, score):
    """Run one period in place.

    Every opportunity consumes exactly three uniforms (actor, option,
    confirmation) so runs at nearby parameters stay coupled. The path score
    with respect to ``beta`` is added into ``score``; the number of
    opportunities is returned.
    """
    np.random.seed(seed)
    na = actors.shape[0]
    if na == 0 or rate <= 0.0:
        return 0
    p = kinds.shape[0]
    deg, sp = _tables(adj)
    vals = np.empty(na + 1)
    dmat = np.empty((na + 1, p))
    dj = np.empty(p)
    steps = _poisson_ppf(np.random.random(), na * rate)
    for _ in range(steps):
        u_actor = np.random.random()
        u_option = np.random.random()
        u_confirm = np.random.random()
        i = actors[min(int(u_actor * na), na - 1)]
        _options(adj, deg, sp, i, actors, forb, kinds, cov, beta, dmat, vals)
        top = vals.max()
        total = 0.0
        for c in range(na + 1):
            vals[c] = np.exp(vals[c] - top)
            total += vals[c]
        u = u_option * total
        c = 0
        acc = vals[0]
        while acc < u and c < na:
            c += 1
            acc += vals[c]
        while vals[c] == 0.0:
            c -= 1
        for k in range(p):
            mean_k = 0.0
            for o in range(na + 1):
                mean_k += vals[o] * dmat[o, k]
            score[k] += dmat[c, k] - mean_k / total
        if c == 0:
            continue
        j = actors[c - 1]
        if adj[i, j] == 0:
            _tie_stats(adj, deg, sp, j, i, kinds, cov, dj)
            f = 0.0
            for k in range(p):
                f += beta[k] * dj[k]
            prob = 1.0 / (1.0 + np.exp(-f))
            if u_confirm >= prob:
                for k in range(p):
                    score[k] -= prob * dj[k]
                continue
            for k in range(p):
                score[k] += (1.0 - prob) * dj[k]
        _flip(adj, deg, sp, i, j)
        if debug and forb[i, j]:
            raise RuntimeError("structural zero violated")
    return steps


@numba.njit(cache=True)
def _stat_sums(adj, actors, kinds, cov):
    """Sum over actors of each effect statistic."""
    deg, sp = _tables(adj)
    out = np.zeros(kinds.shape[0])
    for a in range(actors.shape[0]):
        i = actors[a]
        for j in range(adj.shape[0]):
            if not adj[i, j]:
                continue
            for k in range(kinds.shape[0]):
                kind = kinds[k]
                if kind == 0:
                    out[k] += 1.0
                elif kind == 1:
                    out[k] += 0.5 * sp[i, j]
                elif kind == 2:
                    out[k] += deg[j]
                elif kind == 3:
                    out[k] += cov[k, i] + cov[k, j]
                elif cov[k, i] == cov[k, j]:
                    out[k] += 1.0
    return out


def _actors(x: Graph, active=None) -> np.ndarray:
    if active is None:
        active = np.array([k not in x.aux for k in range(x.n)])
    return np.flatnonzero(active).astype(np.int64)


def microstep_probs(x: Graph, i: int, spec: SaomSpec, attrs: NodeAttributes | None = None, active=None):
    """Choice probabilities of one micro-step for actor ``i``.

    Returns ``(options, probs)`` where ``options[0]`` is ``None`` (keep the
    network) and the rest are the partners ``j`` whose tie may be toggled.
    """
    actors = _actors(x, active)
    others = actors[actors != i]
    if i not in actors or (len(others) and x.forbidden[i, others].all()):
        raise AbsentActorError(f"actor {i} is not present in this period")
    kinds, cov = _compile(spec, attrs, x.n)
    adj = x.adjacency.astype(np.uint8)
    deg, sp = _tables(adj)
    vals = np.empty(len(actors) + 1)
    dmat = np.empty((len(actors) + 1, len(kinds)))
    _options(adj, deg, sp, i, actors, x.forbidden, kinds, cov, spec.beta, dmat, vals)
    keep = np.isfinite(vals)
    v = vals[keep]
    w = np.exp(v - v.max())
    options = [None] + [int(j) for j in actors]
    return [o for o, k in zip(options, keep) if k], w / w.sum()


def confirm_prob(x: Graph, j: int, i: int, spec: SaomSpec, attrs: NodeAttributes | None = None) -> float:
    """Probability that ``j`` accepts a new tie proposed by ``i``."""
    if x.has_edge(i, j):
        raise SaomError("confirmation only applies to tie creation")
    kinds, cov = _compile(spec, attrs, x.n)
    adj = x.adjacency.astype(np.uint8)
    deg, sp = _tables(adj)
    dj = np.empty(len(kinds))
    _tie_stats(adj, deg, sp, j, i, kinds, cov, dj)
    return float(1.0 / (1.0 + np.exp(-(dj @ spec.beta))))


def simulate_period(x0: Graph, rate: float, spec: SaomSpec, attrs: NodeAttributes | None = None,
                    active=None, seed: int = 0, debug: bool = False) -> Graph:
    """Evolve ``x0`` over one period with opportunity rate ``rate`` per actor.

    ``active`` masks the actors (default: every non-auxiliary node); ties of
    inactive nodes are frozen. Forbidden pairs of ``x0`` are never tied.
    """
    if rate < 0:
        raise SaomError("rate must be non-negative")
    if rate == 0:
        return x0
    kinds, cov = _compile(spec, attrs, x0.n)
    adj = x0.adjacency.astype(np.uint8)
    _simulate(adj, _actors(x0, active), x0.forbidden, kinds, cov, spec.beta, float(rate), int(seed), debug,
              np.zeros(len(kinds)))
    end = x0.with_adjacency(adj.astype(bool))
    return end


def simulate_panel(spec: SaomSpec, n: int, n_waves: int, seed: int, attrs: NodeAttributes | None = None,
                   burnin_rate: float = 20.0, x0: Graph | None = None) -> Panel:
    """Synthetic panel: burn in from ``x0`` (default empty), then one period per rate.

    ``spec.rates`` is cycled if it has fewer entries than periods.
    """
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31 - 1, size=n_waves)
    x = Graph.empty(n) if x0 is None else x0
    if burnin_rate > 0:
        x = simulate_period(x, burnin_rate, spec, attrs, seed=int(seeds[0]))
    waves = [x]
    for m in range(n_waves - 1):
        rate = spec.rates[m % len(spec.rates)]
        waves.append(simulate_period(waves[-1], rate, spec, attrs, seed=int(seeds[m + 1])))
    ids = tuple(str(k) for k in range(n))
    a = attrs if attrs is not None else NodeAttributes(n)
    return Panel(ids, tuple(waves), tuple(a for _ in waves))


# estimation -------------------------------------------------------------

@dataclass
class _Period:
    start: np.ndarray
    actors: np.ndarray
    forbidden: np.ndarray
    cov: np.ndarray
    allowed: np.ndarray


def _periods(panel: Panel, spec: SaomSpec) -> list[_Period]:
    out = []
    for m in range(panel.n_periods):
        start = panel.period_start(m)
        actors = np.flatnonzero(panel.period_active(m)).astype(np.int64)
        _, cov = _compile(spec, panel.attributes[m], panel.n)
        allowed = np.triu(~start.forbidden, 1)
        out.append(_Period(start.adjacency.astype(np.uint8), actors, start.forbidden, cov, allowed))
    return out


def target_statistics(panel: Panel, spec: SaomSpec) -> np.ndarray:
    """Observed moment targets: Hamming distance per period, then effect sums.

    Effect targets are ``sum_m sum_i s_ik(x(t_{m+1}))`` using the period's
    start-wave covariates.
    """
    kinds = _kinds(spec)
    rates = []
    effects = np.zeros(len(spec.effects))
    for m, per in enumerate(_periods(panel, spec)):
        end = panel.waves[m + 1].adjacency.astype(np.uint8)
        rates.append(float(((per.start != end) & per.allowed).sum()))
        effects += _stat_sums(end, per.actors, kinds, per.cov)
    return np.concatenate([rates, effects])


class _SaomProblem:
    # rates and strongly collinear structural effects make the full inverse
    # overshoot along ridges; a partial diagonal blend keeps phase 2 stable
    diagonalize = 0.2

    def __init__(self, panel: Panel, spec: SaomSpec, settings: RMSettings):
        self.names = spec.names
        self.spec = spec
        self.kinds = _kinds(spec)
        self.periods = _periods(panel, spec)
        self.observed = target_statistics(panel, spec)
        self.m = panel.n_periods
        self.settings = settings

    def _one(self, theta, seed):
        """Simulated statistics and path score at ``theta`` for one seed."""
        rates, beta = theta[: self.m], theta[self.m:]
        stats = np.empty(len(theta))
        score = np.zeros(len(theta))
        beta_score = np.zeros(len(beta))
        effects = np.zeros(len(beta))
        for m, per in enumerate(self.periods):
            adj = per.start.copy()
            steps = _simulate(adj, per.actors, per.forbidden, self.kinds, per.cov, beta, rates[m],
                              (int(seed) + 7919 * m) % (2**31 - 1), False, beta_score)
            stats[m] = ((adj != per.start) & per.allowed).sum()
            score[m] = steps / rates[m] - len(per.actors) if rates[m] > 0 else 0.0
            effects += _stat_sums(adj, per.actors, self.kinds, per.cov)
        stats[self.m:] = effects
        score[self.m:] = beta_score
        return stats, score

    def _batch(self, thetas, seeds):
        """Statistics and scores for every (seed, theta), shapes ``(S, T, p)``."""
        def work(s):
            pairs = [self._one(t, s) for t in thetas]
            return np.stack([a for a, _ in pairs]), np.stack([b for _, b in pairs])
        if self.settings.workers > 1 and len(seeds) > 1:
            with ThreadPoolExecutor(self.settings.workers) as ex:
                out = list(ex.map(work, seeds))
        else:
            out = [work(s) for s in seeds]
        return np.stack([a for a, _ in out]), np.stack([b for _, b in out])

    def simulate(self, theta, seeds):
        return self._batch([theta], seeds)[0][:, 0, :]

    def derivative(self, theta, seeds, free):
        if self.settings.derivative == "score":
            stats, score = self._batch([theta], seeds)
            stats, score = stats[:, 0, :], score[:, 0, :]
            centred = stats - stats.mean(axis=0)
            D = centred.T @ score / len(seeds)
            D[:, ~free] = 0.0
            return stats, D
        eps = self.settings.fd_epsilon
        thetas = [theta]
        idx = np.flatnonzero(free)
        for k in idx:
            t = theta.copy()
            t[k] += eps
            thetas.append(t)
        sims, _ = self._batch(thetas, seeds)
        base = sims[:, 0, :]
        D = np.zeros((len(theta), len(theta)))
        for c, k in enumerate(idx):
            D[:, k] = (sims[:, c + 1, :] - base).mean(axis=0) / eps
        return base, D

    def constrain(self, theta, proposal):
        out = proposal.copy()
        low = out[: self.m] <= 0
        out[: self.m][low] = theta[: self.m][low] / 2.0
        return out

    def flags(self, theta):
        return [f"rate {m + 1} at boundary" for m in range(self.m) if theta[m] < RATE_FLOOR]


def default_init(panel: Panel, spec: SaomSpec) -> np.ndarray:
    """Starting values: rates from observed change, density from mean degree.

    Fixed parameters keep the values carried by ``spec``.
    """
    targets = target_statistics(panel, spec)
    theta = spec.theta.copy()
    fixed = np.array(spec.fixed)
    for m in range(panel.n_periods):
        if not fixed[m]:
            na = panel.period_active(m).sum()
            theta[m] = max(0.1, 2.0 * targets[m] / max(na, 1))
    k = panel.n_periods + [e.kind for e in spec.effects].index("density")
    if fixed[k]:
        return theta
    dens = []
    for m in range(panel.n_periods):
        act = panel.period_active(m)
        na = act.sum()
        if na > 1:
            dens.append(panel.waves[m + 1].adjacency[np.ix_(act, act)].sum() / (na * (na - 1)))
    rho = float(np.clip(np.mean(dens) if dens else 0.1, 0.01, 0.99))
    theta[k] = np.log(rho / (1 - rho)) / 2
    return theta


def fit_saom(panel: Panel, spec: SaomSpec, init=None, rm: RMSettings | None = None, seed: int = 0) -> EstimationResult:
    """Method-of-moments fit conditioned on each period's observed start wave.

    Parameters are ordered rates first, then evaluation effects. The
    derivative of expected statistics comes from the path score by default
    (``RMSettings(derivative="fd")`` switches to common-random-number finite
    differences); standard errors use the phase-3 covariance through it.
    """
    rm = rm or RMSettings()
    if len(spec.rates) != panel.n_periods:
        spec = spec.with_rates(np.ones(panel.n_periods))
    problem = _SaomProblem(panel, spec, rm)
    fixed = np.array(spec.fixed)
    theta0 = default_init(panel, spec) if init is None else np.asarray(init, dtype=float)
    stuck = [m for m in range(panel.n_periods) if problem.observed[m] == 0 and not fixed[m]]
    if stuck:
        theta = theta0.copy()
        theta[stuck] = 0.0
        p = len(theta)
        return EstimationResult(spec.names, theta, np.full(p, np.inf), np.zeros(p), float("inf"), False, 0,
                                int(seed), fixed, [f"rate {m + 1} at boundary" for m in stuck],
                                [{"phase": 0, "note": "no observed change"}])
    return solve(problem, theta0, rm, seed, fixed=fixed)
