"""Three-phase Robbins-Monro solver for simulated moment equations.

Both the ERGM and the SAOM fits reduce to finding ``theta`` such that
``E_theta[z] = z_obs`` where ``z`` is a vector of simulated statistics.
The model side supplies a :class:`MomentProblem`; this module owns the
phase schedule, the convergence diagnostics and the standard errors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

log = logging.getLogger(__name__)

TRATIO_LIMIT = 0.1
OVERALL_LIMIT = 0.25


class EstimationError(RuntimeError):
    pass


class SingularDerivativeError(EstimationError):
    pass


class DegeneracyError(EstimationError):
    pass


@dataclass(frozen=True)
class RMSettings:
    """Tuning of the stochastic approximation.

    ``phase1_draws`` and ``phase3_draws`` count simulated statistic
    vectors; ``burnin``/``thin`` only matter for Markov-chain simulators
    (``None`` picks a size-dependent default). ``diagonalize`` blends the
    phase-2 update matrix toward the diagonal of ``D``; ``None`` defers to the
    model's own default. ``refine`` adds that many Newton corrections
    ``theta -= D^-1 (mean z - z_obs)`` after the last run, each followed by a
    fresh phase-3 batch; useful when a tighter fit than the t-ratio gate
    is wanted.
    """

    gain: float = 0.2
    n_subphases: int = 4
    phase1_draws: int | None = None
    phase3_draws: int = 1000
    max_runs: int = 4
    subphase_extra: int = 200
    diagonalize: float | None = None
    fd_epsilon: float = 0.1
    derivative: str = "score"
    max_step_sd: float = 5.0
    burnin: int | None = None
    thin: int | None = None
    workers: int = 1
    refine: int = 0

    def n1(self, p: int) -> int:
        return self.phase1_draws if self.phase1_draws is not None else max(50, 7 + 3 * p)


@dataclass
class EstimationResult:
    names: list[str]
    estimates: np.ndarray
    standard_errors: np.ndarray
    tratios: np.ndarray
    overall_ratio: float
    converged: bool
    iterations: int
    seed: int
    fixed: np.ndarray = None
    flags: list[str] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)
    covariance: np.ndarray | None = None

    def __post_init__(self):
        if self.fixed is None:
            self.fixed = np.zeros(len(self.names), dtype=bool)

    def rows(self):
        """``(name, estimate, se, fixed)`` tuples for report formatting."""
        return [(n, float(e), float(s), bool(f)) for n, e, s, f in
                zip(self.names, self.estimates, self.standard_errors, self.fixed)]


def convergence_check(tratios, overall: float) -> bool:
    """True iff every ``|t| < 0.1`` and the overall ratio is below 0.25."""
    t = np.asarray(tratios, dtype=float)
    if t.size == 0:
        raise ValueError("no t-ratios supplied")
    return bool(np.all(np.abs(t) < TRATIO_LIMIT) and overall < OVERALL_LIMIT)


def convergence_ratios(sims: np.ndarray, observed: np.ndarray, free=None):
    """Per-statistic t-ratios and the overall maximum ratio.

    The overall ratio is the largest t-ratio over unit linear combinations,
    ``sqrt(m' S^-1 m)`` for mean deviation ``m`` and deviation covariance ``S``.
    """
    dev = sims - observed
    mean = dev.mean(axis=0)
    sd = dev.std(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(sd > 0, mean / sd, np.where(mean == 0, 0.0, np.inf))
    idx = np.arange(len(mean)) if free is None else np.flatnonzero(free)
    cov = np.atleast_2d(np.cov(dev[:, idx], rowvar=False))
    m = mean[idx]
    try:
        overall = float(np.sqrt(max(m @ np.linalg.solve(cov, m), 0.0)))
    except np.linalg.LinAlgError:
        overall = float("inf")
    return t, overall


class MomentProblem(Protocol):
    names: list[str]
    observed: np.ndarray

    def simulate(self, theta: np.ndarray, seeds: np.ndarray) -> np.ndarray:
        """One statistic vector per seed, shape ``(len(seeds), p)``."""

    def derivative(self, theta: np.ndarray, seeds: np.ndarray, free: np.ndarray):
        """Return ``(stats, D)`` with ``D[k, l] = d E[z_k] / d theta_l``."""

    def constrain(self, theta: np.ndarray, proposal: np.ndarray) -> np.ndarray:
        """Project a proposed update back into the parameter space."""


def _seeds(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.integers(0, 2**31 - 1, size=count, dtype=np.int64)


def _check_derivative(D: np.ndarray, names, free) -> np.ndarray:
    sub = D[np.ix_(free, free)]
    if not np.all(np.isfinite(sub)):
        raise SingularDerivativeError("derivative matrix has non-finite entries")
    cond = np.linalg.cond(sub)
    if not np.isfinite(cond) or cond > 1e12:
        bad = [names[k] for k in np.flatnonzero(free) if abs(D[k, k]) < 1e-12]
        raise SingularDerivativeError(
            "derivative matrix is numerically singular" + (f" (flat in {', '.join(bad)})" if bad else ""))
    return sub


def _update_matrix(D: np.ndarray, diagonalize: float) -> np.ndarray:
    Dd = np.diag(np.diag(D))
    return np.linalg.inv((1.0 - diagonalize) * D + diagonalize * Dd)


def solve(problem: MomentProblem, theta0, settings: RMSettings, seed: int, fixed=None) -> EstimationResult:
    """Run the phase 1/2/3 schedule, restarting until converged or capped."""
    observed = np.asarray(problem.observed, dtype=float)
    theta = np.asarray(theta0, dtype=float).copy()
    p = len(theta)
    fixed = np.zeros(p, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool)
    free = ~fixed
    if not free.any():
        raise EstimationError("every parameter is fixed")
    rng = np.random.default_rng(seed)
    history: list[dict] = []
    iterations = 0
    D = None

    for run in range(settings.max_runs):
        if D is None:
            stats, D = problem.derivative(theta, _seeds(rng, settings.n1(p)), free)
            iterations += len(stats)
            _check_variance(stats, problem.names, free)
            history.append({"phase": 1, "run": run, "draws": len(stats), "theta": theta.tolist()})
        sub = _check_derivative(D, problem.names, free)
        diag = settings.diagonalize if settings.diagonalize is not None else getattr(problem, "diagonalize", 0.0)
        step_matrix = _update_matrix(sub, diag)
        sd = np.maximum(stats.std(axis=0, ddof=1), 1e-12)

        gain = settings.gain
        for k in range(settings.n_subphases):
            n_min = int(2 ** (4 * k / 3) * (7 + int(free.sum())))
            n_max = n_min + settings.subphase_extra
            total = np.zeros(p)
            prev = None
            cross = np.zeros(p)
            count = 0
            for it in range(n_max):
                z = problem.simulate(theta, _seeds(rng, 1))[0] - observed
                iterations += 1
                z = np.clip(z, -settings.max_step_sd * sd, settings.max_step_sd * sd)
                step = np.zeros(p)
                step[free] = gain * (step_matrix @ z[free])
                theta = problem.constrain(theta, theta - step)
                total += theta
                count += 1
                if prev is not None:
                    cross += z * prev
                prev = z
                if it + 1 >= n_min and np.all(cross[free] < 0):
                    break
            theta = total / count
            theta[fixed] = np.asarray(theta0, dtype=float)[fixed]
            history.append({"phase": 2, "run": run, "subphase": k + 1, "gain": gain,
                            "iterations": count, "theta": theta.tolist()})
            log.debug("run %d subphase %d gain %.4g iters %d theta %s", run, k + 1, gain, count, theta)
            gain /= 2.0

        stats, D = problem.derivative(theta, _seeds(rng, settings.phase3_draws), free)
        iterations += len(stats)
        tratios, overall = convergence_ratios(stats, observed, free)
        converged = convergence_check(tratios[free], overall)
        history.append({"phase": 3, "run": run, "draws": len(stats), "max_abs_t": float(np.max(np.abs(tratios[free]))),
                        "overall": overall, "theta": theta.tolist()})
        if converged:
            break

    for r in range(settings.refine):
        dev = stats.mean(axis=0) - observed
        sub = _check_derivative(D, problem.names, free)
        step = np.zeros(p)
        step[free] = np.linalg.solve(sub, dev[free])
        theta = problem.constrain(theta, theta - step)
        theta[fixed] = np.asarray(theta0, dtype=float)[fixed]
        stats, D = problem.derivative(theta, _seeds(rng, settings.phase3_draws), free)
        iterations += len(stats)
        tratios, overall = convergence_ratios(stats, observed, free)
        converged = convergence_check(tratios[free], overall)
        history.append({"phase": 3, "refine": r + 1, "draws": len(stats),
                        "max_abs_t": float(np.max(np.abs(tratios[free]))), "overall": overall,
                        "theta": theta.tolist()})

    flags = problem.flags(theta) if hasattr(problem, "flags") else []
    if flags:
        converged = False
    se, cov = _standard_errors(D, stats, free)
    return EstimationResult(list(problem.names), theta, se, tratios, overall, bool(converged),
                            iterations, int(seed), fixed, flags, history, cov)


def _check_variance(stats: np.ndarray, names, free) -> None:
    var = stats.var(axis=0)
    for k in np.flatnonzero(free):
        if var[k] < 1e-12:
            raise DegeneracyError(f"simulated statistic for {names[k]!r} has no variance")


def _standard_errors(D: np.ndarray, stats: np.ndarray, free: np.ndarray):
    """Delta-method covariance ``D^-1 S D^-T`` over the free parameters."""
    p = len(free)
    idx = np.flatnonzero(free)
    se = np.zeros(p)
    cov = np.zeros((p, p))
    S = np.atleast_2d(np.cov(stats[:, idx], rowvar=False))
    try:
        Dinv = np.linalg.inv(D[np.ix_(idx, idx)])
        c = Dinv @ S @ Dinv.T
    except np.linalg.LinAlgError:
        c = np.full((len(idx), len(idx)), np.inf)
    cov[np.ix_(idx, idx)] = c
    se[idx] = np.sqrt(np.abs(np.diag(c)))
    return se, cov
