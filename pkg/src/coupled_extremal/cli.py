"""Command-line front end.

Every subcommand reads a config (``--config`` file or ``--preset`` name),
writes ``summary.json`` plus optional field dumps into the output
directory, and exits with 0 on success, 2 when an assertion fails, 3 when
a solver does not converge, and 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .beta import maximizer_check, solve_beta
from .config import PRESETS, RunConfig, load_config, preset
from .continuation import check_conditions, regularity_report, solve_extremal, sum_bound_monitor
from .envelope import project, sum_form_envelope
from .errors import (BoundViolated, ConfigError, ExponentClampWarning, ExtremalError,
                     LadderStalled, NoConvergence)
from .fieldio import dump_field
from .verification import concavity_test, differentiability_test, uniqueness_test

OUT_ENV = "COUPLED_EXTREMAL_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_ASSERT, EXIT_SOLVER = 0, 1, 2, 3


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


class Run:
    """Output directory and summary document of one invocation."""

    def __init__(self, command: str, cfg: RunConfig, out: str, seed: int, threads: int):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.threads = threads
        self.ladder = []
        self.results = {}
        self.assertions = {}
        os.makedirs(out, exist_ok=True)

    def dump(self, name, f):
        dump_field(f, os.path.join(self.out, name))

    def ladder_row(self, record, sol=None):
        row = {k: record.get(k) for k in ("beta", "residual", "sup_gap", "sum_bound",
                                         "energies", "newton_iters", "increment")}
        self.ladder.append(row)
        if sol is not None and self.cfg.get("outputs.dump_every_rung"):
            for j, p in enumerate(sol.potentials, start=1):
                self.dump(f"rung{len(self.ladder):02d}_phi{j}.txt", p)

    def write(self, status: str, error: str | None = None, elapsed: float = 0.0):
        doc = {
            "command": self.command,
            "version": __version__,
            "config": self.cfg.resolved_text().splitlines(),
            "input_sha256": self.cfg.digest(),
            "seed": self.seed,
            "threads": self.threads,
            "ladder": self.ladder,
            "results": self.results,
            "assertions": self.assertions,
            "status": status,
            "error": error,
            "elapsed_s": round(elapsed, 3),
        }
        with open(os.path.join(self.out, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, indent=2)
            fh.write("\n")


def _solve(run: Run, data):
    cfg = run.cfg
    return solve_extremal(data, cfg.schedule, tol=cfg.get("solver.tol"),
                          max_newton=cfg.get("solver.max_newton"),
                          prefactor=cfg.get("solver.energy_prefactor"),
                          on_rung=run.ladder_row)


def _record_extremal(run: Run, data, result):
    cfg = run.cfg
    cond = check_conditions(result, data, cfg.get("check.tol"))
    run.results["conditions"] = cond.as_dict()
    run.results["admissibility"] = result.admissibility
    run.results["beta_final"] = result.beta_final
    run.results["measure_spread"] = result.measure_spread
    run.assertions.update({k: v for k, v in result.assertions.items() if isinstance(v, bool)})
    run.assertions["conditions"] = cond.passed
    if cfg.get("outputs.dump_fields"):
        for j, p in enumerate(result.potentials, start=1):
            run.dump(f"phi{j}.txt", p)
        run.dump("mu_eq.txt", result.mu_eq.density)


def cmd_solve(run: Run, data):
    result = _solve(run, data)
    _record_extremal(run, data, result)


def cmd_solve_beta(run: Run, data):
    cfg = run.cfg
    beta = cfg.get("beta.value")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ExponentClampWarning)
        sol = solve_beta(data, beta, tol=cfg.get("solver.tol"),
                         max_newton=cfg.get("solver.max_newton"))
    run.results.update({
        "beta": beta, "residual_sup": sol.residual_sup, "residual_floor": sol.residual_floor,
        "newton_iters": sol.newton_iters, "exponent_clamped": sol.exponent_clamped,
        "unit_mass": sol.unit_mass(data), "clamp_warnings": len(caught),
    })
    accept = max(cfg.get("solver.tol"), sol.residual_floor)
    run.assertions["residual"] = sol.residual_sup <= 10 * accept
    run.assertions["unit_mass"] = abs(sol.unit_mass(data) - 1) <= 10 * max(sol.residual_sup, 1e-14)
    run.assertions["normalized"] = all(abs(p.sup()) <= 1e-12 for p in sol.potentials[1:])
    if data.grid.ndim == 1:
        report = maximizer_check(sol, data, trials=20, seed=run.seed)
        run.results["maximizer_check"] = {"violations": report.violations,
                                          "worst_gain": report.worst_gain}
        run.assertions["maximizer"] = report.violations == 0
    if cfg.get("outputs.dump_fields"):
        for j, p in enumerate(sol.potentials, start=1):
            run.dump(f"phi{j}.txt", p)


def cmd_envelope(run: Run, data):
    tol = run.cfg.get("envelope.tol")
    sol = sum_form_envelope(data, tol=tol)
    run.results.update({"residuals": sol.residuals, "iterations": sol.iterations,
                        "contact_points": int(sol.contact_mask.sum()),
                        "density_sup": sol.density_sup})
    run.assertions["residuals"] = max(sol.residuals.values()) <= tol
    run.dump("envelope.txt", sol.u)
    run.dump("contact_mask.txt", data.grid.field(sol.contact_mask.astype(float)))


def cmd_check(run: Run, data):
    cfg = run.cfg
    result = _solve(run, data)
    _record_extremal(run, data, result)
    # the bounded-sum and Laplacian bounds are only claimed for smooth weights
    try:
        series = sum_bound_monitor(result)
        bounded = True
    except BoundViolated as exc:
        series, bounded = exc.series, False
    run.results["sum_bound_series"] = list(series)
    run.results["sum_bound_passed"] = bounded
    if data.weight.smooth:
        run.assertions["sum_bound"] = bounded
    reg = regularity_report(data, result)
    run.results["regularity"] = reg
    mode = cfg.get("check.laplacian_reference")
    if data.weight.smooth:
        run.assertions["laplacian_bound"] = reg["laplacian_bound"][mode]["passed"]
    run.assertions["density_finite"] = reg["density_finite"]
    if cfg.concavity_terms:
        other = cfg.field_from_terms(cfg.concavity_terms)
        rep = concavity_test(data, data.phi, other, 3, cfg.schedule, cfg.get("solver.tol"),
                             threads=run.threads)
        run.results["concavity"] = rep.as_dict()
        run.assertions["concavity"] = rep.passed


def cmd_derivative(run: Run, data):
    cfg = run.cfg
    grid = data.grid
    if cfg.get("derivative.direction") == "one":
        v = grid.constant(1.0)
    elif cfg.derivative_terms:
        v = cfg.field_from_terms(cfg.derivative_terms)
    else:
        raise ConfigError("derivative needs derivative.term lines or derivative.direction = one")
    rep = differentiability_test(data, v, cfg.get("derivative.steps"), cfg.schedule,
                                 cfg.get("solver.tol"), threads=run.threads)
    run.results["derivative"] = rep.as_dict()
    run.assertions["derivative"] = rep.passed


def cmd_uniqueness(run: Run, data):
    cfg = run.cfg
    rep = uniqueness_test(data, cfg.get("uniqueness.n_starts"), cfg.schedule, seed=run.seed,
                          beta=cfg.get("uniqueness.beta"), tol=cfg.get("solver.tol"),
                          threads=run.threads)
    run.results["uniqueness"] = rep.as_dict()
    run.assertions["uniqueness"] = rep.passed


def _sweep_one(args):
    cfg, n, out = args
    sub = cfg.with_values(grid_N=n)
    data = sub.build()
    result = solve_extremal(data, sub.schedule, tol=sub.get("solver.tol"))
    row = {"N": n, "beta_final": result.beta_final}
    if data.m == 1 and data.grid.ndim == 1:
        env = project(data.forms[0], data.phi, tol=sub.get("envelope.tol"))
        row["oracle_error"] = (result.potentials[0] - env.u).sup_norm()
    os.makedirs(out, exist_ok=True)
    if sub.get("outputs.dump_fields"):
        dump_field(result.potentials[0], os.path.join(out, "phi1.txt"))
    return row


def cmd_sweep(run: Run, data):
    cfg = run.cfg
    betas = cfg.get("sweep.beta")
    if betas:
        rows = []
        for beta in betas:
            sol = solve_beta(data, beta, tol=cfg.get("solver.tol"))
            gap = (sol.total - data.phi).sup()
            rows.append({"beta": beta, "residual": sol.residual_sup, "sup_gap": gap,
                         "sum_bound": beta * gap, "newton_iters": sol.newton_iters})
        run.results["beta_sweep"] = rows
        return
    sizes = cfg.get("sweep.N") or [32, 64, 128]
    jobs = [(cfg, n, os.path.join(run.out, f"N{n}")) for n in sizes]
    if run.threads > 1:
        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    run.results["grid_sweep"] = rows
    errs = [r["oracle_error"] for r in rows if "oracle_error" in r]
    if len(errs) == len(rows) and len(errs) > 1:
        run.assertions["refinement"] = all(b < a for a, b in zip(errs, errs[1:]))


COMMANDS = {
    "solve": cmd_solve,
    "solve-beta": cmd_solve_beta,
    "envelope": cmd_envelope,
    "check": cmd_check,
    "derivative": cmd_derivative,
    "uniqueness": cmd_uniqueness,
    "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coupled-extremal",
                     description="Coupled extremal potentials on a flat torus.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="config file")
        src.add_argument("--preset", choices=sorted(PRESETS), help="built-in config")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
    p = sub.add_parser("presets", help="print a preset's config text")
    p.add_argument("name", nargs="?", choices=sorted(PRESETS))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        if args.name:
            sys.stdout.write(PRESETS[args.name])
        else:
            print("\n".join(sorted(PRESETS)))
        return EXIT_OK
    try:
        cfg = load_config(args.config) if args.config else preset(args.preset)
        data = cfg.build()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed < 0:
        print("config error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    base = cfg.get("outputs.dir") or os.environ.get(OUT_ENV) or "runs"
    out = args.out or os.path.join(base, args.command)
    run = Run(args.command, cfg, out, args.seed, max(1, args.threads))
    start = time.perf_counter()
    try:
        COMMANDS[args.command](run, data)
    except (NoConvergence, LadderStalled) as exc:
        diag = getattr(exc, "diagnostics", None)
        if diag:
            run.results["diagnostics"] = diag
        run.write("no_convergence", str(exc), time.perf_counter() - start)
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExtremalError as exc:
        run.write("error", str(exc), time.perf_counter() - start)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    ok = all(run.assertions.values())
    run.write("ok" if ok else "assertion_failed", None, time.perf_counter() - start)
    failed = [k for k, v in run.assertions.items() if not v]
    print(f"{args.command}: {'ok' if ok else 'FAILED ' + ', '.join(failed)} -> {out}")
    return EXIT_OK if ok else EXIT_ASSERT
