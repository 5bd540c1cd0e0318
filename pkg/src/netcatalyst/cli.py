"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 the fit did not
converge (outputs are still written).
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .approx import EstimationError, EstimationResult, RMSettings
from .ergm import ErgmError, fit_ergm
from .gof import GofReport, gof_ergm, gof_saom
from .io import (DataError, SpecFileError, load_panel, parse_experiment_config, parse_model_file, save_panel,
                 thread_count)
from .lab import METRICS, InterventionError, run_experiment
from .plotting import plot_experiment, plot_gof
from .report import ReportRow, format_report
from .saom import SaomError, default_init, fit_saom, simulate_panel

log = logging.getLogger("netcatalyst")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _g(v: float) -> str:
    return f"{v:.6g}"


def _write_tsv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_estimates(result: EstimationResult, out: Path) -> None:
    rows = []
    for (name, est, se, fixed), t in zip(result.rows(), result.tratios):
        p = float("nan") if fixed or not se > 0 else ReportRow(name, est, se).p_value
        rows.append((name, _g(est), _g(se), _g(p), _g(float(t)), int(fixed)))
    _write_tsv(out / "estimates.tsv", ("effect", "estimate", "std_error", "p_value", "t_ratio", "fixed"), rows)


def write_gof(report: GofReport, out: Path) -> None:
    lo, hi = 100 * (1 - report.coverage) / 2, 100 * (1 + report.coverage) / 2
    _write_tsv(out / "gof.tsv", ("family", "bin", "observed", f"p{lo:g}", "p50", f"p{hi:g}", "inside"),
               [(f, b, _g(o), _g(a), _g(m), _g(z), int(i)) for f, b, o, a, m, z, i in report.rows()])
    plot_gof(report, out)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, required=True, help="root random seed")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker count (default: NETCATALYST_THREADS, else the CPU count)")


def _add_panel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--panel", required=True, help="edges TSV: wave, node_a, node_b")
    p.add_argument("--nodes", required=True, help="nodes TSV: node_id, country, numeric columns")
    p.add_argument("--composition", help="composition TSV: node_id, entry_wave, exit_wave")
    p.add_argument("--membership", help="membership TSV: wave, node_id")
    p.add_argument("--spec", required=True, help="model spec file")
    p.add_argument("--gof", type=int, default=0, metavar="NSIMS", help="run goodness of fit with NSIMS draws")
    p.add_argument("--max-k", type=int, default=15, help="last degree/ESP bin of the fit report (pooled tail)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netcatalyst", description="Network ERGM/SAOM estimation and intervention experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit-ergm", help="fit an ERGM to one wave of a panel")
    _add_panel(p)
    p.add_argument("--wave", type=int, default=None, help="wave to fit (default: the last)")
    _add_common(p)

    p = sub.add_parser("fit-saom", help="fit a SAOM to a panel")
    _add_panel(p)
    _add_common(p)

    p = sub.add_parser("experiment", help="run a treated/control intervention experiment")
    p.add_argument("--config", required=True, help="experiment config (INI)")
    _add_common(p)

    p = sub.add_parser("simulate-panel", help="simulate a synthetic SAOM panel")
    p.add_argument("--spec", required=True, help="model spec file; init= values are the true parameters")
    p.add_argument("--n", type=int, required=True, help="roster size")
    p.add_argument("--waves", type=int, required=True, help="number of waves")
    p.add_argument("--burnin-rate", type=float, default=20.0, help="rate of the burn-in before wave 1")
    _add_common(p)
    return parser


def _rm(threads: int) -> RMSettings:
    return RMSettings(workers=threads)


def cmd_fit_ergm(args, threads: int) -> int:
    model = parse_model_file(args.spec)
    spec = model.ergm_spec()
    panel = load_panel(args.panel, args.nodes, args.composition, args.membership)
    wave = len(panel.waves) if args.wave is None else args.wave
    if not 1 <= wave <= len(panel.waves):
        raise UsageError(f"--wave must lie in 1..{len(panel.waves)}")
    g, attrs = panel.waves[wave - 1], panel.attributes[wave - 1]
    init = spec.params if model.has_inits() else None
    result = fit_ergm(g, spec, attrs, init=init, rm=_rm(threads), seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_estimates(result, args.out)
    (args.out / "report.txt").write_text(format_report([result], [f"ERGM wave {wave}"]), encoding="utf-8")
    if args.gof:
        write_gof(gof_ergm(result, spec, attrs, g, args.gof, args.seed, max_k=min(args.max_k, g.n - 1)), args.out)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_fit_saom(args, threads: int) -> int:
    model = parse_model_file(args.spec)
    panel = load_panel(args.panel, args.nodes, args.composition, args.membership)
    spec = model.saom_spec(panel.n_periods)
    init = default_init(panel, spec)
    m = panel.n_periods
    for period, (value, _, _) in model.rates.items():
        init[period - 1] = value
    for k, e in enumerate(model.effects):
        if e.fix is not None or e.init is not None:
            init[m + k] = e.fix if e.fix is not None else e.init
    result = fit_saom(panel, spec, init=init, rm=_rm(threads), seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_estimates(result, args.out)
    (args.out / "report.txt").write_text(format_report([result], ["SAOM"]), encoding="utf-8")
    if args.gof and np.all(np.isfinite(result.estimates)) and np.all(result.estimates[:m] > 0):
        write_gof(gof_saom(result, spec, panel, args.gof, args.seed, max_k=args.max_k, workers=threads), args.out)
    elif args.gof:
        log.warning("goodness of fit skipped: a rate estimate is at the boundary")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_experiment(args, threads: int) -> int:
    config = parse_experiment_config(args.config, args.seed, threads)
    report = run_experiment(config)
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for m in METRICS:
        for w in range(config.waves + 1):
            rows.append((w, m, _g(np.nanmean(report.control[m][:, w])), _g(np.nanmean(report.treated[m][:, w])),
                         _g(report.mean_diff[m][w]), _g(report.paired_se[m][w]), _g(report.p_values[m][w])))
    _write_tsv(args.out / "experiment.tsv",
               ("wave", "metric", "control_mean", "treated_mean", "mean_diff", "paired_se", "p_value"), rows)
    plot_experiment(report, args.out)
    lines = [f"replicates: {report.replicates}", f"seed: {config.seed}"]
    if config.plan is not None:
        lines.append(f"intervention: {config.plan.mode} on {len(config.plan.targets)} targets, "
                     f"active waves {sorted(config.plan.active_waves)}")
        lines.append(f"target-share gap smaller at the final wave than at the last active wave: "
                     f"{report.gap_shrink_fraction():.3f} of replicates")
    else:
        lines.append("intervention: none")
    for arm, est in report.membership_effects.items():
        means = np.nanmean(est, axis=0)
        lines.append(f"{arm} membership effect by period: " + " ".join(f"{v:.3f}" for v in means))
    (args.out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_simulate_panel(args, threads: int) -> int:
    model = parse_model_file(args.spec)
    if args.waves < 2 or args.n < 2:
        raise UsageError("need --n >= 2 and --waves >= 2")
    spec = model.saom_spec(args.waves - 1)
    panel = simulate_panel(spec, args.n, args.waves, args.seed, burnin_rate=args.burnin_rate)
    save_panel(panel, args.out)
    return EXIT_OK


COMMANDS = {"fit-ergm": cmd_fit_ergm, "fit-saom": cmd_fit_saom, "experiment": cmd_experiment,
            "simulate-panel": cmd_simulate_panel}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        threads = thread_count(args.threads)
        return COMMANDS[args.command](args, threads)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SpecFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SaomError, ErgmError, InterventionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
