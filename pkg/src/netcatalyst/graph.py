"""Undirected binary graphs and the network statistics shared by the
ERGM and SAOM layers.

Adjacency is stored densely as a symmetric boolean matrix. Structural
zeros (pairs whose tie is fixed absent) live on the graph itself as a
second symmetric mask, so every layer that mutates a graph respects them
without consulting composition tables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, exp
from typing import Iterable, Mapping, Sequence

import numpy as np


class GraphError(ValueError):
    """Base class for invalid graph operations."""


class SelfLoopError(GraphError):
    pass


class NodeRangeError(GraphError):
    pass


class ForbiddenPairError(GraphError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Graph:
    """Undirected, loop-free graph over nodes ``0..n-1``.

    Parameters
    ----------
    n : int
        Node count.
    adjacency : array_like, optional
        Symmetric boolean ``(n, n)`` matrix. Defaults to the empty graph.
    forbidden : array_like, optional
        Symmetric boolean ``(n, n)`` mask of structurally zero pairs.
    aux : iterable of int, optional
        Auxiliary (non-focal) nodes, e.g. an intervention hub. They are
        ordinary nodes for every statistic; metrics and actor sets may
        choose to skip them.

    Instances are treated as immutable: the arrays are read-only and every
    mutating operation returns a new graph.
    """

    __slots__ = ("n", "_adj", "_forbidden", "aux")

    def __init__(self, n: int, adjacency=None, forbidden=None, aux: Iterable[int] = ()):
        if n < 1:
            raise GraphError(f"node count must be >= 1, got {n}")
        self.n = int(n)
        if adjacency is None:
            adj = np.zeros((n, n), dtype=bool)
        else:
            adj = np.array(adjacency, dtype=bool, copy=True)
            if adj.shape != (n, n):
                raise GraphError(f"adjacency shape {adj.shape} does not match n={n}")
            if not np.array_equal(adj, adj.T):
                raise GraphError("adjacency must be symmetric")
            if adj.diagonal().any():
                raise SelfLoopError("adjacency has self-loops")
        if forbidden is None:
            forb = np.zeros((n, n), dtype=bool)
        else:
            forb = np.array(forbidden, dtype=bool, copy=True)
            if forb.shape != (n, n) or not np.array_equal(forb, forb.T):
                raise GraphError("forbidden mask must be a symmetric (n, n) matrix")
            np.fill_diagonal(forb, False)
        if (adj & forb).any():
            i, j = np.argwhere(adj & forb)[0]
            raise ForbiddenPairError(f"edge ({i}, {j}) lies on a forbidden pair")
        self._adj = _frozen(adj)
        self._forbidden = _frozen(forb)
        self.aux = frozenset(int(a) for a in aux)
        if any(a < 0 or a >= n for a in self.aux):
            raise NodeRangeError("auxiliary node outside the roster")

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]],
                   forbidden: Iterable[tuple[int, int]] = (), aux: Iterable[int] = ()) -> "Graph":
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            _check_pair(n, i, j)
            adj[i, j] = adj[j, i] = True
        forb = np.zeros((n, n), dtype=bool)
        for i, j in forbidden:
            _check_pair(n, i, j)
            forb[i, j] = forb[j, i] = True
        return cls(n, adj, forb, aux)

    @property
    def adjacency(self) -> np.ndarray:
        return self._adj

    @property
    def forbidden(self) -> np.ndarray:
        return self._forbidden

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[i, j])

    def is_forbidden(self, i: int, j: int) -> bool:
        return bool(self._forbidden[i, j])

    def edges(self) -> list[tuple[int, int]]:
        """Present edges as sorted ``(i, j)`` pairs with ``i < j``."""
        iu, ju = np.nonzero(np.triu(self._adj, 1))
        return list(zip(iu.tolist(), ju.tolist()))

    def forbidden_pairs(self) -> list[tuple[int, int]]:
        iu, ju = np.nonzero(np.triu(self._forbidden, 1))
        return list(zip(iu.tolist(), ju.tolist()))

    def toggleable_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Row/column indices (``i < j``) of every non-forbidden pair."""
        allowed = np.triu(~self._forbidden, 1)
        return np.nonzero(allowed)

    @property
    def num_edges(self) -> int:
        return int(self._adj.sum() // 2)

    def degrees(self) -> np.ndarray:
        return self._adj.sum(axis=1).astype(np.int64)

    def toggle(self, i: int, j: int) -> "Graph":
        return toggle_edge(self, i, j)

    def with_adjacency(self, adjacency) -> "Graph":
        """Same roster, forbidden mask and aux set, new tie pattern."""
        return Graph(self.n, adjacency, self._forbidden, self.aux)

    def with_forbidden(self, forbidden) -> "Graph":
        return Graph(self.n, self._adj, forbidden, self.aux)

    def permute(self, perm: Sequence[int]) -> "Graph":
        """Relabel node ``k`` as ``perm[k]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        adj = self._adj[np.ix_(inv, inv)]
        forb = self._forbidden[np.ix_(inv, inv)]
        return Graph(self.n, adj, forb, (int(perm[a]) for a in self.aux))

    def subgraph(self, nodes: Sequence[int]) -> "Graph":
        """Induced subgraph, nodes renumbered in the given order."""
        idx = np.asarray(nodes, dtype=np.int64)
        return Graph(len(idx), self._adj[np.ix_(idx, idx)], self._forbidden[np.ix_(idx, idx)])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self._adj, other._adj)
                and np.array_equal(self._forbidden, other._forbidden) and self.aux == other.aux)

    def __hash__(self):
        return hash((self.n, self._adj.tobytes(), self._forbidden.tobytes(), self.aux))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges}, forbidden={int(self._forbidden.sum() // 2)})"


def _check_pair(n: int, i: int, j: int) -> None:
    if not (0 <= i < n and 0 <= j < n):
        raise NodeRangeError(f"pair ({i}, {j}) outside roster of size {n}")
    if i == j:
        raise SelfLoopError(f"self-loop requested at node {i}")


def toggle_edge(g: Graph, i: int, j: int) -> Graph:
    """Return a copy of ``g`` with the tie between ``i`` and ``j`` flipped."""
    _check_pair(g.n, i, j)
    if g.forbidden[i, j]:
        raise ForbiddenPairError(f"pair ({i}, {j}) is a structural zero")
    adj = g.adjacency.copy()
    adj[i, j] = adj[j, i] = not adj[i, j]
    return Graph(g.n, adj, g.forbidden, g.aux)


@dataclass(frozen=True)
class NodeAttributes:
    """Per-node covariates.

    ``categorical`` maps a column name to an array of string labels;
    ``numeric`` maps a column name to a float array with ``nan`` marking
    missing values. ``levels`` holds the declared level set of each
    categorical column.
    """

    n: int
    categorical: Mapping[str, np.ndarray] = field(default_factory=dict)
    numeric: Mapping[str, np.ndarray] = field(default_factory=dict)
    levels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        cat = {k: np.asarray(v, dtype=object) for k, v in self.categorical.items()}
        num = {k: np.asarray(v, dtype=float) for k, v in self.numeric.items()}
        levels = dict(self.levels)
        for name, col in cat.items():
            if col.shape != (self.n,):
                raise ValueError(f"categorical column {name!r} needs {self.n} rows")
            declared = levels.setdefault(name, tuple(sorted({str(v) for v in col})))
            bad = {str(v) for v in col} - set(declared)
            if bad:
                raise ValueError(f"column {name!r} has undeclared levels {sorted(bad)}")
        for name, col in num.items():
            if col.shape != (self.n,):
                raise ValueError(f"numeric column {name!r} needs {self.n} rows")
        overlap = set(cat) & set(num)
        if overlap:
            raise ValueError(f"columns declared both categorical and numeric: {sorted(overlap)}")
        object.__setattr__(self, "categorical", cat)
        object.__setattr__(self, "numeric", num)
        object.__setattr__(self, "levels", {k: tuple(v) for k, v in levels.items()})

    def has(self, name: str) -> bool:
        return name in self.categorical or name in self.numeric

    def codes(self, name: str) -> np.ndarray:
        """Column as floats: level index for categoricals, raw values otherwise."""
        if name in self.categorical:
            lookup = {lvl: k for k, lvl in enumerate(self.levels[name])}
            return np.array([lookup[str(v)] for v in self.categorical[name]], dtype=float)
        if name in self.numeric:
            return self.numeric[name].copy()
        raise KeyError(name)

    def indicator(self, name: str, level: str) -> np.ndarray:
        if name in self.categorical:
            if level not in self.levels[name]:
                raise KeyError(f"{name}={level}")
            return np.array([str(v) == level for v in self.categorical[name]], dtype=float)
        if name in self.numeric:
            return (self.numeric[name] == float(level)).astype(float)
        raise KeyError(name)

    def with_numeric(self, name: str, values) -> "NodeAttributes":
        num = dict(self.numeric)
        num[name] = np.asarray(values, dtype=float)
        return NodeAttributes(self.n, self.categorical, num, self.levels)

    def subset(self, nodes: Sequence[int]) -> "NodeAttributes":
        idx = np.asarray(nodes, dtype=np.int64)
        return NodeAttributes(len(idx), {k: v[idx] for k, v in self.categorical.items()},
                              {k: v[idx] for k, v in self.numeric.items()}, self.levels)


@dataclass(frozen=True)
class AuxStats:
    """Out-of-model statistics used for goodness of fit."""

    degree_dist: np.ndarray
    esp_dist: np.ndarray
    triad_census: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.degree_dist, self.esp_dist, self.triad_census]).astype(float)


TRIAD_CLASSES = ("empty", "one-edge", "two-path", "triangle")


def stat_edges(g: Graph) -> int:
    return g.num_edges


def shared_partners(g: Graph) -> np.ndarray:
    a = g.adjacency.astype(np.int64)
    return a @ a


def degree_distribution(g: Graph) -> np.ndarray:
    """Counts ``D_k`` of nodes with degree ``k`` for ``k = 0..n-1``."""
    return np.bincount(g.degrees(), minlength=g.n)[: g.n]


def esp_distribution(g: Graph) -> np.ndarray:
    """Counts ``EP_k`` of edges with exactly ``k`` shared partners, ``k = 0..n-2``."""
    size = max(g.n - 1, 1)
    iu, ju = np.nonzero(np.triu(g.adjacency, 1))
    if len(iu) == 0:
        return np.zeros(size, dtype=np.int64)
    sp = shared_partners(g)[iu, ju]
    return np.bincount(sp, minlength=size)[:size]


def triangle_count(g: Graph) -> int:
    a = g.adjacency.astype(np.int64)
    return int(np.einsum("ij,jk,ki->", a, a, a) // 6)


def triad_census(g: Graph) -> np.ndarray:
    """Counts of node triples with 0, 1, 2 and 3 ties."""
    n = g.n
    deg = g.degrees()
    tri = triangle_count(g)
    two_star = int((deg * (deg - 1) // 2).sum())
    closed_two = two_star - 3 * tri
    iu, ju = np.nonzero(np.triu(g.adjacency, 1))
    sp = shared_partners(g)[iu, ju]
    # third node adjacent to neither endpoint
    one = int((n - 2 - (deg[iu] - 1) - (deg[ju] - 1) + sp).sum())
    total = comb(n, 3)
    return np.array([total - one - closed_two - tri, one, closed_two, tri], dtype=np.int64)


def _geometric_weights(decay: float, kmax: int) -> np.ndarray:
    """``e^decay * (1 - (1 - e^-decay)^k)`` for ``k = 0..kmax``."""
    r = 1.0 - exp(-decay)
    k = np.arange(kmax + 1)
    return exp(decay) * (1.0 - r ** k)


def stat_gwdegree(g: Graph, decay: float = 0.5) -> float:
    """Geometrically weighted degree; isolates contribute nothing."""
    dist = degree_distribution(g)
    w = _geometric_weights(decay, len(dist) - 1)
    return float((w[1:] * dist[1:]).sum())


def stat_gwesp(g: Graph, decay: float = 0.5) -> float:
    """Geometrically weighted edgewise shared partners."""
    dist = esp_distribution(g)
    w = _geometric_weights(decay, len(dist) - 1)
    return float((w[1:] * dist[1:]).sum())


def _bin_tail(dist: np.ndarray, max_k: int) -> np.ndarray:
    out = np.zeros(max_k + 1, dtype=np.int64)
    head = dist[: max_k + 1]
    out[: len(head)] = head
    if len(dist) > max_k + 1:
        out[max_k] += dist[max_k + 1:].sum()
    return out


def aux_statistics(g: Graph, max_k: int | None = None) -> AuxStats:
    """Degree, edgewise-shared-partner and triad-census summaries.

    With ``max_k`` given, both distributions have ``max_k + 1`` bins and
    the last bin pools the tail.
    """
    if max_k is None:
        max_k = g.n - 1
    if max_k > g.n - 1 or max_k < 0:
        raise ValueError(f"max_k must lie in [0, {g.n - 1}], got {max_k}")
    return AuxStats(_bin_tail(degree_distribution(g), max_k),
                    _bin_tail(esp_distribution(g), max_k),
                    triad_census(g))


def complete_graph(n: int) -> Graph:
    adj = ~np.eye(n, dtype=bool)
    return Graph(n, adj)


def star_graph(n: int) -> Graph:
    """Hub ``0`` tied to leaves ``1..n-1``."""
    return Graph.from_edges(n, [(0, k) for k in range(1, n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(k, k + 1) for k in range(n - 1)])


def diamond_graph() -> Graph:
    """K4 minus the edge (2, 3)."""
    return Graph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)])
