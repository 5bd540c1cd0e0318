"""Regression-table formatting: ``estimate<stars> (SE) [p]`` cells."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import norm

from .approx import EstimationResult

STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))
NOTE = ("*** p < 0.001, ** p < 0.01, * p < 0.05; exact p-values in brackets; "
        "0.000 is used for p-values below 0.001; standard errors in parentheses")


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class ReportRow:
    effect: str
    estimate: float
    se: float
    fixed: bool = False

    @property
    def p_value(self) -> float:
        """Two-sided normal p-value of ``estimate / se``."""
        if self.fixed:
            return float("nan")
        if not self.se > 0:
            raise ReportError(f"standard error of {self.effect!r} must be positive, got {self.se}")
        return float(2.0 * norm.sf(abs(self.estimate / self.se)))

    @property
    def stars(self) -> str:
        if self.fixed:
            return ""
        p = self.p_value
        for level, mark in STAR_LEVELS:
            if p < level:
                return mark
        return ""

    def cell(self) -> str:
        return format_cell(self.estimate, self.se, self.fixed)


def format_p(p: float) -> str:
    """Three decimals, truncated, so anything below 0.001 prints as ``0.000``."""
    # the small guard absorbs binary representation error at exact thousandths
    return f"{math.floor(p * 1000 + 1e-9) / 1000:.3f}"


def format_cell(estimate: float, se: float, fixed: bool = False) -> str:
    """One table cell, e.g. ``-3.998*** (0.069) [0.000]``."""
    if fixed:
        return f"{estimate:.3f} (fixed)"
    row = ReportRow("", estimate, se)
    p = row.p_value
    se_text = "inf" if math.isinf(se) else f"{se:.3f}"
    return f"{estimate:.3f}{row.stars} ({se_text}) [{format_p(p)}]"


def rows_from_result(result: EstimationResult) -> list[ReportRow]:
    return [ReportRow(n, e, s, f) for n, e, s, f in result.rows()]


def format_report(models, titles=None) -> str:
    """Side-by-side columns, one per model, effects as rows.

    ``models`` is a list of :class:`EstimationResult` or of lists of
    :class:`ReportRow`. Effects missing from a model leave a blank cell.
    """
    tables = [rows_from_result(m) if isinstance(m, EstimationResult) else list(m) for m in models]
    titles = list(titles) if titles is not None else [f"Model {k + 1}" for k in range(len(tables))]
    order: list[str] = []
    for t in tables:
        for r in t:
            if r.effect not in order:
                order.append(r.effect)
    cells = [{r.effect: r.cell() for r in t} for t in tables]
    width0 = max([len("Effect")] + [len(e) for e in order])
    widths = [max([len(title)] + [len(c) for c in col.values()]) for title, col in zip(titles, cells)]
    lines = ["  ".join(["Effect".ljust(width0)] + [t.ljust(w) for t, w in zip(titles, widths)]).rstrip()]
    lines.append("-" * len(lines[0]))
    for e in order:
        parts = [e.ljust(width0)] + [col.get(e, "").ljust(w) for col, w in zip(cells, widths)]
        lines.append("  ".join(parts).rstrip())
    for k, m in enumerate(models):
        if isinstance(m, EstimationResult):
            free = ~m.fixed
            tmax = float(max(abs(t) for t in m.tratios[free])) if free.any() else 0.0
            status = "converged" if m.converged else "NOT converged"
            lines.append(f"{titles[k]}: {status}; max |t| = {tmax:.3f}; overall ratio = {m.overall_ratio:.3f}; "
                         f"iterations = {m.iterations}; seed = {m.seed}")
            for flag in m.flags:
                lines.append(f"{titles[k]}: flag: {flag}")
    lines.append(NOTE)
    return "\n".join(lines) + "\n"
