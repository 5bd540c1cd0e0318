"""Synthetic testbed for preferential attachment and link-addition
interventions.

Treated and control arms evolve under the same SAOM with common random
numbers; the treated arm additionally receives an intervention at the
start of each active wave. Per-wave concentration metrics are compared
with a paired sign-flip permutation test.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .approx import RMSettings
from .graph import Graph, NodeAttributes
from .saom import Panel, SaomEffect, SaomSpec, fit_saom, simulate_period

MODES = ("nao-clique", "nao-hub", "link-budget")
METRICS = ("target_share", "degree_gini", "target_degree")


class InterventionError(ValueError):
    pass


@dataclass(frozen=True)
class InterventionPlan:
    """Which nodes receive added ties, how, and at which waves.

    ``budget`` applies to ``link-budget``; ``seed`` fixes which target
    pairs the budget picks; ``capacity`` caps the roster size that
    ``nao-hub`` may grow to.
    """

    targets: tuple[int, ...]
    mode: str = "nao-clique"
    active_waves: frozenset[int] = frozenset({1, 2})
    budget: int = 0
    seed: int = 0
    capacity: int | None = None

    def __post_init__(self):
        targets = tuple(sorted(set(int(t) for t in self.targets)))
        if not targets:
            raise InterventionError("target set is empty")
        if self.mode not in MODES:
            raise InterventionError(f"unknown intervention mode {self.mode!r}")
        if self.mode == "link-budget" and not 0 <= self.budget <= len(targets) * (len(targets) - 1) // 2:
            raise InterventionError("link budget exceeds the number of target pairs")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "active_waves", frozenset(int(w) for w in self.active_waves))


def generate_ba(n: int, m: int, seed: int) -> Graph:
    """Barabasi-Albert growth from a complete seed graph on ``m`` nodes.

    Each new node ties to ``m`` distinct existing nodes drawn one at a time
    with probability proportional to degree; degrees are frozen while one
    node's batch is drawn.
    """
    if not 1 <= m < n:
        raise InterventionError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    adj = np.zeros((n, n), dtype=bool)
    adj[:m, :m] = True
    np.fill_diagonal(adj, False)
    deg = adj.sum(axis=1).astype(float)
    for v in range(m, n):
        weights = deg[:v].copy()
        chosen = []
        for _ in range(m):
            total = weights.sum()
            if total > 0:
                u = rng.choice(v, p=weights / total)
            else:
                pool = np.setdiff1d(np.arange(v), chosen)
                u = rng.choice(pool)
            chosen.append(int(u))
            weights[u] = 0.0
        for u in chosen:
            adj[v, u] = adj[u, v] = True
        deg[chosen] += 1
        deg[v] = m
    return Graph(n, adj)


def generate_gnm(n: int, n_edges: int, seed: int) -> Graph:
    """Uniform random graph with exactly ``n_edges`` ties."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    pick = rng.choice(len(iu), size=n_edges, replace=False)
    adj = np.zeros((n, n), dtype=bool)
    adj[iu[pick], ju[pick]] = True
    return Graph(n, adj | adj.T)


def growth_panel(final: Graph, fractions=(0.5, 0.75, 1.0)) -> Panel:
    """Snapshots of the subgraphs induced by the first ``f * n`` nodes.

    Nodes enter at the first snapshot that contains them and never leave.
    """
    n = final.n
    sizes = [int(round(f * n)) for f in fractions]
    waves = []
    entry = np.zeros(n, dtype=np.int64)
    for w, size in enumerate(sizes):
        present = np.arange(n) < size
        a = final.adjacency & present[:, None] & present[None, :]
        waves.append(Graph(n, a))
        if w:
            entry[(np.arange(n) >= sizes[w - 1]) & present] = w
    return Panel(tuple(str(k) for k in range(n)), tuple(waves), entry=entry)


NEWCOMER = "newcomer"


def mark_newcomers(panel: Panel, name: str = NEWCOMER) -> Panel:
    """Add a numeric covariate flagging the nodes that enter during each period.

    Wave ``k`` carries ``1`` for nodes whose entry wave is ``k + 1``, so the
    covariate seen by period ``k`` (start-wave value) marks that period's
    entrants. Paired with ``egoPlusAltX`` it absorbs the tie activity that
    entry forces on newcomers, leaving ``inPop`` to measure where their ties go.
    """
    attrs = tuple(a.with_numeric(name, (panel.entry == k + 1).astype(float))
                  for k, a in enumerate(panel.attributes))
    return Panel(panel.node_ids, panel.waves, attrs, panel.entry, panel.exit)


def preferential_attachment_spec(rates=(1.0, 1.0)) -> SaomSpec:
    """density + inPop + newcomer activity, the model fitted to growth panels."""
    return SaomSpec.of("density", "inPop", SaomEffect("egoPlusAltX", NEWCOMER), rates=rates)


def apply_intervention(g: Graph, plan: InterventionPlan) -> Graph:
    """Add the plan's ties; never removes any. Repeated application is idempotent."""
    focal = [k for k in range(g.n) if k not in g.aux]
    bad = [t for t in plan.targets if t >= g.n or t < 0 or t in g.aux]
    if bad:
        raise InterventionError(f"unknown target ids {bad}")
    adj = g.adjacency.copy()
    if plan.mode == "nao-clique":
        pairs = list(combinations(plan.targets, 2))
    elif plan.mode == "link-budget":
        every = list(combinations(plan.targets, 2))
        rng = np.random.default_rng(plan.seed)
        pairs = [every[k] for k in sorted(rng.choice(len(every), size=plan.budget, replace=False))]
    else:
        if g.aux:
            hub = min(g.aux)
            pairs = [(hub, t) for t in plan.targets]
        else:
            if plan.capacity is not None and g.n + 1 > plan.capacity:
                raise InterventionError(f"roster is at capacity {plan.capacity}")
            n = g.n + 1
            grown = np.zeros((n, n), dtype=bool)
            grown[: g.n, : g.n] = adj
            forb = np.zeros((n, n), dtype=bool)
            forb[: g.n, : g.n] = g.forbidden
            for t in plan.targets:
                grown[g.n, t] = grown[t, g.n] = True
            return Graph(n, grown, forb, aux=set(g.aux) | {g.n})
    for i, j in pairs:
        if g.forbidden[i, j]:
            raise InterventionError(f"pair ({i}, {j}) is a structural zero")
        adj[i, j] = adj[j, i] = True
    del focal
    return Graph(g.n, adj, g.forbidden, g.aux)


def _focal(g: Graph) -> Graph:
    if not g.aux:
        return g
    return g.subgraph([k for k in range(g.n) if k not in g.aux])


def metric_target_share(g: Graph, targets) -> float:
    """Share of total degree held by the targets (auxiliary nodes excluded)."""
    f = _focal(g)
    if f.num_edges == 0:
        raise InterventionError("target share is undefined on an empty graph")
    deg = f.degrees()
    return float(deg[list(targets)].sum() / (2 * f.num_edges))


def metric_degree_gini(g: Graph) -> float:
    """Gini coefficient of the focal degree sequence (0 when all degrees vanish)."""
    deg = np.sort(_focal(g).degrees().astype(float))
    n = len(deg)
    if deg.sum() == 0:
        return 0.0
    # sum_{i,j} |d_i - d_j| via the sorted-sequence identity
    ranks = np.arange(1, n + 1)
    diff_sum = 2.0 * ((2 * ranks - n - 1) * deg).sum()
    return float(diff_sum / (2 * n * n * deg.mean()))


def metric_target_degree(g: Graph, targets) -> float:
    return float(_focal(g).degrees()[list(targets)].mean())


def _metrics(g: Graph, targets) -> dict[str, float]:
    try:
        share = metric_target_share(g, targets)
    except InterventionError:
        share = float("nan")
    return {"target_share": share, "degree_gini": metric_degree_gini(g),
            "target_degree": metric_target_degree(g, targets)}


def paired_permutation_test(diffs, resamples: int = 10_000, seed: int = 0) -> float:
    """One-sided sign-flip p-value for ``mean(diffs) > 0``."""
    d = np.asarray(diffs, dtype=float)
    d = d[np.isfinite(d)]
    if len(d) == 0:
        return 1.0
    observed = d.mean()
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(resamples, len(d)))
    perm = (signs * d).mean(axis=1)
    return float((1 + np.count_nonzero(perm >= observed - 1e-12)) / (resamples + 1))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    waves: int
    spec: SaomSpec
    rate: float
    replicates: int
    plan: InterventionPlan | None
    seed: int
    burnin_rate: float = 20.0
    resamples: int = 10_000
    fit_replicates: int = 0
    fit_settings: RMSettings = field(default_factory=lambda: RMSettings(phase3_draws=300, max_runs=2))
    workers: int = 1


@dataclass
class ExperimentReport:
    """Per-arm metric ensembles, shape ``(replicates, waves + 1)`` each."""

    config: ExperimentConfig
    control: dict[str, np.ndarray]
    treated: dict[str, np.ndarray]
    mean_diff: dict[str, np.ndarray]
    paired_se: dict[str, np.ndarray]
    p_values: dict[str, np.ndarray]
    seeds: np.ndarray
    membership_effects: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return len(self.seeds)

    def gap(self, metric: str = "target_share") -> np.ndarray:
        return self.treated[metric] - self.control[metric]

    def gap_shrink_fraction(self, metric: str = "target_share") -> float:
        """Fraction of replicates whose final-wave gap is below the last active wave's."""
        plan = self.config.plan
        if plan is None or not plan.active_waves:
            return float("nan")
        last = max(plan.active_waves)
        gap = self.gap(metric)
        return float(np.mean(gap[:, -1] < gap[:, last]))


def _replicate(config: ExperimentConfig, seed: int, targets):
    rng = np.random.default_rng(seed)
    period_seeds = rng.integers(0, 2**31 - 1, size=config.waves + 1)
    attrs = _target_attrs(config.n, targets)
    x0 = simulate_period(Graph.empty(config.n), config.burnin_rate, config.spec,
                         attrs if _needs_attrs(config.spec) else None, seed=int(period_seeds[0]))
    arms = {}
    for arm in ("control", "treated"):
        x = x0
        states = []
        for w in range(config.waves + 1):
            if arm == "treated" and config.plan is not None and w in config.plan.active_waves:
                x = apply_intervention(x, config.plan)
            states.append(x)
            if w == config.waves:
                break
            a = _target_attrs(x.n, targets) if _needs_attrs(config.spec) else None
            x = simulate_period(x, config.rate, config.spec, a, seed=int(period_seeds[w + 1]))
        arms[arm] = states
    return arms


def _needs_attrs(spec: SaomSpec) -> bool:
    return any(e.attr is not None for e in spec.effects)


def _target_attrs(n: int, targets) -> NodeAttributes:
    col = np.zeros(n)
    col[list(targets)] = 1.0
    return NodeAttributes(n, numeric={"target": col})


def _membership_fits(states, targets, config: ExperimentConfig, seed: int) -> np.ndarray:
    """Fitted target-membership effect for each consecutive pair of waves."""
    base = [e for e in config.spec.effects]
    spec = SaomSpec(tuple(base) + (SaomEffect("egoPlusAltX", "target"),), rates=(config.rate,))
    out = []
    for w in range(len(states) - 1):
        a, b = _focal(states[w]), _focal(states[w + 1])
        attrs = _target_attrs(a.n, targets)
        panel = Panel(tuple(str(k) for k in range(a.n)), (a, b), (attrs, attrs))
        try:
            res = fit_saom(panel, spec, rm=config.fit_settings, seed=seed + w)
            out.append(res.estimates[-1])
        except Exception:  # noqa: BLE001 - a failed replicate fit is reported as missing
            out.append(np.nan)
    return np.array(out)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Evolve paired control/treated ensembles and test per-wave differences."""
    if config.replicates < 2:
        raise InterventionError("need at least two replicates")
    targets = config.plan.targets if config.plan is not None else (0,)
    rng = np.random.default_rng(config.seed)
    seeds = rng.integers(0, 2**31 - 1, size=config.replicates)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            runs = list(ex.map(lambda s: _replicate(config, int(s), targets), seeds))
    else:
        runs = [_replicate(config, int(s), targets) for s in seeds]

    shape = (config.replicates, config.waves + 1)
    control = {m: np.zeros(shape) for m in METRICS}
    treated = {m: np.zeros(shape) for m in METRICS}
    for r, arms in enumerate(runs):
        for w in range(config.waves + 1):
            for arm, store in (("control", control), ("treated", treated)):
                for m, v in _metrics(arms[arm][w], targets).items():
                    store[m][r, w] = v

    mean_diff, paired_se, p_values = {}, {}, {}
    for m in METRICS:
        d = treated[m] - control[m]
        mean_diff[m] = np.nanmean(d, axis=0)
        paired_se[m] = np.nanstd(d, axis=0, ddof=1) / np.sqrt(np.sum(np.isfinite(d), axis=0))
        p_values[m] = np.array([paired_permutation_test(d[:, w], config.resamples, config.seed + w)
                                for w in range(config.waves + 1)])

    effects = {}
    if config.fit_replicates > 0:
        k = min(config.fit_replicates, config.replicates)
        for arm in ("control", "treated"):
            effects[arm] = np.stack([_membership_fits(runs[r][arm], targets, config, int(seeds[r]))
                                     for r in range(k)])
    return ExperimentReport(config, control, treated, mean_diff, paired_se, p_values, seeds, effects)
