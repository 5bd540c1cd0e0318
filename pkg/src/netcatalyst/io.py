"""Panel files, model-spec files and experiment configs.

All tables are UTF-8, tab separated, with a header row:

* edges: ``wave  node_a  node_b`` (waves numbered 1, 2, ...)
* nodes: ``node_id  country  <numeric columns...>``; an empty cell is missing
* composition: ``node_id  entry_wave  exit_wave``; nodes without a row are
  present in every wave
* membership: ``wave  node_id``; one row per member per wave, exposed as
  the numeric covariate ``member``
"""
from __future__ import annotations

import configparser
import csv
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ergm import ErgmEffect, ErgmSpec
from .graph import Graph, NodeAttributes
from .lab import ExperimentConfig, InterventionPlan
from .saom import Panel, SaomEffect, SaomSpec

log = logging.getLogger(__name__)

EDGE_HEADER = ("wave", "node_a", "node_b")
COMPOSITION_HEADER = ("node_id", "entry_wave", "exit_wave")
MEMBERSHIP_HEADER = ("wave", "node_id")
MEMBER_COLUMN = "member"


class DataError(ValueError):
    """Malformed or inconsistent input data; the message names file and line."""

    def __init__(self, path, line: int | None, message: str):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


class MissingFileError(DataError):
    pass


class FormatError(DataError):
    pass


class UnknownNodeError(DataError):
    pass


class SelfLoopError(DataError):
    pass


class WaveGapError(DataError):
    pass


class CompositionError(DataError):
    pass


class SpecFileError(ValueError):
    """Unusable model-spec or config file (a usage error, not a data error)."""


def _rows(path, header: tuple[str, ...] | None = None, min_cols: int = 1):
    """Yield ``(line_number, cells)`` after checking the header."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(path, None, "file not found")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            head = next(reader)
        except StopIteration:
            raise FormatError(path, 1, "empty file, expected a header row") from None
        head = [h.strip() for h in head]
        if header is not None and tuple(head[: len(header)]) != header:
            raise FormatError(path, 1, f"expected header {' '.join(header)!r}, got {' '.join(head)!r}")
        yield 1, head
        for cells in reader:
            line = reader.line_num
            if not cells or all(not c.strip() for c in cells):
                continue
            cells = [c.strip() for c in cells]
            if len(cells) < min_cols:
                raise FormatError(path, line, f"expected {min_cols} columns, got {len(cells)}")
            yield line, cells


def _int(path, line, text, what):
    try:
        return int(text)
    except ValueError:
        raise FormatError(path, line, f"{what} must be an integer, got {text!r}") from None


def read_nodes(path) -> tuple[list[str], NodeAttributes]:
    rows = _rows(path, min_cols=1)
    _, head = next(rows)
    if not head or head[0] != "node_id":
        raise FormatError(path, 1, "first column must be node_id")
    ids, cells = [], []
    for line, row in rows:
        if row[0] in ids:
            raise FormatError(path, line, f"duplicate node id {row[0]!r}")
        ids.append(row[0])
        cells.append((line, row + [""] * (len(head) - len(row))))
    n = len(ids)
    categorical, numeric = {}, {}
    for c, name in enumerate(head[1:], start=1):
        if name == "country":
            categorical[name] = np.array([r[c] if r[c] else "NA" for _, r in cells], dtype=object)
            continue
        col = np.full(n, np.nan)
        for k, (line, r) in enumerate(cells):
            if r[c]:
                try:
                    col[k] = float(r[c])
                except ValueError:
                    raise FormatError(path, line, f"column {name!r} must be numeric, got {r[c]!r}") from None
        numeric[name] = col
    return ids, NodeAttributes(n, categorical, numeric)


def load_panel(edges_path, nodes_path, composition_path=None, membership_path=None) -> Panel:
    """Read a panel from the tab-separated files described in the module docstring."""
    ids, base_attrs = read_nodes(nodes_path)
    index = {v: k for k, v in enumerate(ids)}
    n = len(ids)

    edges: dict[int, set] = {}
    seen_line: dict[tuple, int] = {}
    rows = _rows(edges_path, EDGE_HEADER, min_cols=3)
    next(rows)
    for line, (w, a, b, *_) in rows:
        wave = _int(edges_path, line, w, "wave")
        for v in (a, b):
            if v not in index:
                raise UnknownNodeError(edges_path, line, f"unknown node id {v!r}")
        if a == b:
            raise SelfLoopError(edges_path, line, f"self-loop on node {a!r}")
        i, j = sorted((index[a], index[b]))
        key = (wave, i, j)
        if key in seen_line:
            log.warning("%s:%d: duplicate of line %d dropped", edges_path, line, seen_line[key])
            continue
        seen_line[key] = line
        edges.setdefault(wave, set()).add((i, j))
    if not edges:
        raise FormatError(edges_path, None, "no edge rows")
    first_line = {}
    for (w, _, _), line in seen_line.items():
        first_line[w] = min(first_line.get(w, line), line)
    n_waves = max(edges)
    for w in sorted(edges):
        if w < 1:
            raise WaveGapError(edges_path, first_line[w], f"waves are numbered from 1, got {w}")
    missing = sorted(set(range(1, n_waves + 1)) - set(edges))
    if missing:
        after = min(w for w in edges if w > missing[0])
        raise WaveGapError(edges_path, first_line[after], f"wave {missing[0]} has no rows before wave {after}")

    entry = np.zeros(n, dtype=np.int64)
    exit_ = np.full(n, n_waves - 1, dtype=np.int64)
    if composition_path is not None:
        rows = _rows(composition_path, COMPOSITION_HEADER, min_cols=3)
        next(rows)
        for line, (v, e, x, *_) in rows:
            if v not in index:
                raise UnknownNodeError(composition_path, line, f"unknown node id {v!r}")
            e, x = _int(composition_path, line, e, "entry_wave"), _int(composition_path, line, x, "exit_wave")
            if not 1 <= e <= x <= n_waves:
                raise CompositionError(composition_path, line, f"need 1 <= entry <= exit <= {n_waves}, got {e}, {x}")
            entry[index[v]], exit_[index[v]] = e - 1, x - 1
    for (w, i, j), line in seen_line.items():
        for v in (i, j):
            if not entry[v] <= w - 1 <= exit_[v]:
                raise CompositionError(edges_path, line, f"node {ids[v]!r} is absent in wave {w}")

    member = np.zeros((n_waves, n))
    if membership_path is not None:
        rows = _rows(membership_path, MEMBERSHIP_HEADER, min_cols=2)
        next(rows)
        for line, (w, v, *_) in rows:
            wave = _int(membership_path, line, w, "wave")
            if not 1 <= wave <= n_waves:
                raise WaveGapError(membership_path, line, f"wave {wave} outside 1..{n_waves}")
            if v not in index:
                raise UnknownNodeError(membership_path, line, f"unknown node id {v!r}")
            member[wave - 1, index[v]] = 1.0

    waves, attrs = [], []
    for w in range(n_waves):
        pairs = sorted(edges[w + 1])
        waves.append(Graph.from_edges(n, pairs))
        a = base_attrs.with_numeric(MEMBER_COLUMN, member[w]) if membership_path is not None else base_attrs
        attrs.append(a)
    return Panel(tuple(ids), tuple(waves), tuple(attrs), entry, exit_)


def _write_tsv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _cell(v: float) -> str:
    return "" if np.isnan(v) else f"{v:.6g}"


def save_panel(panel: Panel, directory) -> dict[str, Path]:
    """Write the canonical form: waves ascending, node pairs sorted by roster order.

    Returns the paths keyed ``edges``, ``nodes``, ``composition`` and, when
    a ``member`` covariate exists, ``membership``.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ids = panel.node_ids
    paths = {"edges": d / "edges.tsv", "nodes": d / "nodes.tsv", "composition": d / "composition.tsv"}
    _write_tsv(paths["edges"], EDGE_HEADER,
               [(w + 1, ids[i], ids[j]) for w, g in enumerate(panel.waves) for i, j in g.edges()])
    base = panel.attributes[0]
    cat = sorted(base.categorical)
    num = sorted(k for k in base.numeric if k != MEMBER_COLUMN)
    _write_tsv(paths["nodes"], ["node_id"] + cat + num,
               [[ids[k]] + [str(base.categorical[c][k]) for c in cat] + [_cell(base.numeric[c][k]) for c in num]
                for k in range(panel.n)])
    last = panel.n_periods
    _write_tsv(paths["composition"], COMPOSITION_HEADER,
               [(ids[k], panel.entry[k] + 1, panel.exit[k] + 1) for k in range(panel.n)
                if panel.entry[k] != 0 or panel.exit[k] != last])
    if any(MEMBER_COLUMN in a.numeric for a in panel.attributes):
        paths["membership"] = d / "membership.tsv"
        _write_tsv(paths["membership"], MEMBERSHIP_HEADER,
                   [(w + 1, ids[k]) for w, a in enumerate(panel.attributes)
                    for k in np.flatnonzero(a.numeric.get(MEMBER_COLUMN, np.zeros(panel.n)) > 0)])
    return paths


# model spec files -----------------------------------------------------------

@dataclass
class EffectLine:
    name: str
    line: int
    attr: str | None = None
    level: str | None = None
    decay: float | None = None
    fix: float | None = None
    init: float | None = None


@dataclass
class ModelFile:
    path: str
    effects: list[EffectLine] = field(default_factory=list)
    rates: dict[int, tuple[float, bool, int]] = field(default_factory=dict)

    def ergm_spec(self) -> ErgmSpec:
        if self.rates:
            line = min(v[2] for v in self.rates.values())
            raise SpecFileError(f"{self.path}:{line}: rate lines only apply to fit-saom")
        effects, params, fixed = [], [], []
        for e in self.effects:
            kw = {"attr": e.attr, "level": e.level}
            if e.decay is not None:
                kw["decay"] = e.decay
            try:
                effects.append(ErgmEffect(e.name, **kw))
            except ValueError as exc:
                raise SpecFileError(f"{self.path}:{e.line}: {exc}") from None
            params.append(e.fix if e.fix is not None else (e.init or 0.0))
            fixed.append(e.fix is not None)
        try:
            return ErgmSpec(tuple(effects), np.array(params), tuple(fixed))
        except ValueError as exc:
            raise SpecFileError(f"{self.path}: {exc}") from None

    def has_inits(self) -> bool:
        return any(e.init is not None or e.fix is not None for e in self.effects) or bool(self.rates)

    def saom_spec(self, n_periods: int) -> SaomSpec:
        effects, beta, fixed = [], [], []
        for e in self.effects:
            if e.decay is not None or e.level is not None:
                raise SpecFileError(f"{self.path}:{e.line}: decay/level do not apply to {e.name}")
            try:
                effects.append(SaomEffect(e.name, e.attr))
            except ValueError as exc:
                raise SpecFileError(f"{self.path}:{e.line}: {exc}") from None
            beta.append(e.fix if e.fix is not None else (e.init or 0.0))
            fixed.append(e.fix is not None)
        for m, (_, _, line) in self.rates.items():
            if not 1 <= m <= n_periods:
                raise SpecFileError(f"{self.path}:{line}: period {m} outside 1..{n_periods}")
        rates = [self.rates.get(m + 1, (1.0, False, 0))[0] for m in range(n_periods)]
        rfixed = [self.rates.get(m + 1, (1.0, False, 0))[1] for m in range(n_periods)]
        try:
            return SaomSpec(tuple(effects), np.array(beta), np.array(rates), tuple(rfixed + fixed))
        except ValueError as exc:
            raise SpecFileError(f"{self.path}: {exc}") from None


_KEYS = {"attr", "level", "decay", "fix", "init"}


def parse_model_file(path) -> ModelFile:
    """Parse ``effect <name> key=value...`` and ``rate <period> init=<x>`` lines.

    ``#`` starts a comment. Effect names are checked later, against the
    model family that consumes the file.
    """
    path = Path(path)
    if not path.is_file():
        raise SpecFileError(f"{path}: file not found")
    model = ModelFile(str(path))
    for line, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        words = text.split()
        kind, args = words[0], words[1:]
        if kind not in ("effect", "rate") or not args:
            raise SpecFileError(f"{path}:{line}: expected 'effect <name> ...' or 'rate <period> ...', got {text!r}")
        opts = {}
        for a in args[1:]:
            key, sep, val = a.partition("=")
            if not sep or key not in _KEYS:
                raise SpecFileError(f"{path}:{line}: bad option {a!r}")
            opts[key] = val
        try:
            nums = {k: float(opts[k]) for k in ("decay", "fix", "init") if k in opts}
        except ValueError:
            raise SpecFileError(f"{path}:{line}: non-numeric option value") from None
        if kind == "rate":
            if not re.fullmatch(r"\d+", args[0]) or set(opts) - {"init", "fix"}:
                raise SpecFileError(f"{path}:{line}: expected 'rate <period> init=<value>'")
            fixed = "fix" in nums
            value = nums.get("fix", nums.get("init", 1.0))
            if value <= 0:
                raise SpecFileError(f"{path}:{line}: rates must be positive")
            model.rates[int(args[0])] = (value, fixed, line)
        else:
            model.effects.append(EffectLine(args[0], line, opts.get("attr"), opts.get("level"), **nums))
    if not model.effects:
        raise SpecFileError(f"{path}: no effect lines")
    return model


# experiment configs ---------------------------------------------------------

def _parse_effects(text: str, where: str) -> tuple[list[SaomEffect], list[float]]:
    effects, beta = [], []
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, val = item.partition("=")
        if not sep:
            raise SpecFileError(f"{where}: effect {item!r} needs '=<value>'")
        name, attr = (name.strip().split(".", 1) + [None])[:2]
        try:
            effects.append(SaomEffect(name, attr))
            beta.append(float(val))
        except ValueError as exc:
            raise SpecFileError(f"{where}: {exc}") from None
    return effects, beta


def parse_experiment_config(path, seed: int, workers: int = 1) -> ExperimentConfig:
    """Read an INI-style experiment config.

    Example::

        [experiment]
        n = 30
        waves = 4
        rate = 2
        replicates = 200
        effects = density=-1.5, transTriad=0.2, inPop=0.1

        [intervention]
        mode = nao-clique
        targets = 0 1 2 3 4
        active_waves = 1 2

    Omitting ``[intervention]`` runs the null experiment.
    """
    path = Path(path)
    if not path.is_file():
        raise SpecFileError(f"{path}: file not found")
    cp = configparser.ConfigParser()
    try:
        cp.read(path, encoding="utf-8")
        ex = cp["experiment"]
        absent = [k for k in ("n", "waves", "rate", "replicates", "effects") if k not in ex]
        if absent:
            raise SpecFileError(f"{path}: [experiment] is missing {', '.join(absent)}")
        effects, beta = _parse_effects(ex["effects"], f"{path} [experiment] effects")
        spec = SaomSpec(tuple(effects), np.array(beta))
        plan = None
        if cp.has_section("intervention"):
            iv = cp["intervention"]
            plan = InterventionPlan(
                targets=tuple(int(t) for t in iv["targets"].split()),
                mode=iv.get("mode", "nao-clique"),
                active_waves=frozenset(int(w) for w in iv.get("active_waves", "").split()),
                budget=iv.getint("budget", 0),
                seed=iv.getint("seed", seed),
                capacity=iv.getint("capacity") if "capacity" in iv else None)
        return ExperimentConfig(n=ex.getint("n"), waves=ex.getint("waves"), spec=spec, rate=ex.getfloat("rate"),
                                replicates=ex.getint("replicates"), plan=plan, seed=seed,
                                burnin_rate=ex.getfloat("burnin_rate", 20.0),
                                resamples=ex.getint("resamples", 10_000),
                                fit_replicates=ex.getint("fit_replicates", 0), workers=workers)
    except SpecFileError:
        raise
    except (configparser.Error, KeyError, TypeError, ValueError) as exc:
        raise SpecFileError(f"{path}: {exc}") from None


def thread_count(flag: int | None) -> int:
    """Worker count: the flag wins, then NETCATALYST_THREADS, then the CPU count."""
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get("NETCATALYST_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
