"""Command-line entry point: ``sdcoag simulate | verify | kernels``.

Exit codes are a stable contract::

    0  success
    1  at least one gating experiment failed
    2  configuration error (missing file, bad JSON, unknown or invalid field)
    3  runtime error (integrator failure or other infrastructure fault)

The ``SD_SEED`` environment variable is reserved; nothing in the current
deterministic core reads it.
"""
from __future__ import annotations

import argparse
import inspect
import json
import sys
import time
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import ConfigError, IntegrationError, SDError, ValidationError
from .experiments import EXPERIMENTS, SUITES, Case, decode_params, run_cases
from .integrator import SolverConfig, integrate
from .io import summarize, write_json, write_report, write_trajectory
from .kernel import FAMILIES, KernelSpec
from .rhs import BACKEND
from .state import InitialCondition

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

_RUN_FIELDS = {"kernel", "initial", "solver", "experiment", "output_dir"}
_VERIFY_FIELDS = {"solver", "cases"}


def load_json(path) -> dict:
    """Read a JSON object, turning every failure into a ConfigError with a location."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _check_fields(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")


# -- simulate --------------------------------------------------------------

def parse_run_config(d: dict, base_dir: Optional[Path] = None):
    """Validate a run config completely before anything is computed."""
    _check_fields(d, _RUN_FIELDS, "config")
    for key in ("kernel", "initial", "solver"):
        if key not in d:
            raise ConfigError(f"config.{key}: required")
    kernel = KernelSpec.from_dict(d["kernel"], base_dir=base_dir)
    init_d = d["initial"]
    initial = InitialCondition.from_dict(init_d)
    n = init_d.get("n") if isinstance(init_d, dict) else None
    if n is None and initial.kind != "custom":
        raise ConfigError("initial.n: required")
    if n is not None and not (isinstance(n, int) and n >= 1):
        raise ConfigError(f"initial.n: expected an integer >= 1, got {n!r}")
    try:
        state = initial.build(n)
    except SDError as exc:
        raise ConfigError(f"initial: {exc}") from exc
    cfg = SolverConfig.from_dict(d["solver"])
    experiment = d.get("experiment")
    if experiment is not None:
        experiment = _parse_experiment(experiment, d)
    return kernel, initial, state, cfg, experiment


def _parse_experiment(exp, run: dict) -> Case:
    if not isinstance(exp, dict):
        raise ConfigError("experiment: expected an object")
    _check_fields(exp, {"name", "params"}, "experiment")
    name = exp.get("name")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment.name: expected one of {sorted(EXPERIMENTS)}, got {name!r}")
    params = dict(exp.get("params") or {})
    accepted = inspect.signature(EXPERIMENTS[name]).parameters
    # inherit the run's kernel and initial data unless the experiment overrides them
    if "kernel" in accepted:
        params.setdefault("kernel", run["kernel"])
    if "initial" in accepted:
        init = {k: v for k, v in run["initial"].items() if k != "n"}
        params.setdefault("initial", init)
    case = Case(name, name, params)
    validate_case(case)
    return case


def validate_case(case: Case):
    """Raise ConfigError if a case's parameters cannot even be bound."""
    fn = EXPERIMENTS[case.experiment]
    where = f"cases.{case.name}"
    try:
        kw = decode_params(case.params)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    try:
        inspect.signature(fn).bind(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    solver = dict(kw.get("solver") or {})
    solver["t_end"] = kw.get("t_end", 1.0)
    try:
        SolverConfig.from_dict(solver)
    except ConfigError as exc:
        raise ConfigError(f"{where}.{exc}") from exc


def cmd_simulate(config_path, out: Optional[str] = None, backend: Optional[str] = None) -> int:
    cfg_path = Path(config_path)
    raw = load_json(cfg_path)
    kernel, initial, state, cfg, experiment = parse_run_config(raw, base_dir=cfg_path.parent)
    out_dir = out or raw.get("output_dir")
    if not out_dir:
        raise ConfigError("output directory missing: pass --out or set output_dir")
    out_dir = Path(out_dir)

    traj = integrate(kernel, state, cfg, backend=backend)
    manifest = {
        "version": __version__,
        "backend": backend or BACKEND,
        "config": raw,
        "kernel": kernel.to_dict(),
        "initial": initial.to_dict(),
        "n": state.n,
        "solver": cfg.to_dict(),
    }
    write_trajectory(out_dir, traj, manifest)
    print(f"samples: {len(traj.times)}")
    print(f"final mass drift: {traj.diagnostics[-1].mass_drift:.3e}")
    print(f"max mass drift: {traj.max_mass_drift():.3e}")

    if experiment is not None:
        rep = experiment.run()
        write_report(out_dir, rep)
        print(rep.summary_line())
        if not rep.exploratory and not rep.passed:
            return EXIT_FAIL
    return EXIT_OK


# -- verify ----------------------------------------------------------------

def build_suite(suite: str, overrides: dict) -> list[Case]:
    """Apply verify-config overrides to a named suite.

    Precedence for solver fields: per-case override, then the global
    ``solver`` block, then the suite's own defaults.
    """
    if suite not in SUITES:
        raise ConfigError(f"suite: expected one of {sorted(SUITES)}, got {suite!r}")
    _check_fields(overrides, _VERIFY_FIELDS, "config")
    global_solver = overrides.get("solver") or {}
    if not isinstance(global_solver, dict):
        raise ConfigError("solver: expected an object")
    if "t_end" in global_solver:
        raise ConfigError("solver.t_end: set per case, not globally")
    per_case = overrides.get("cases") or {}
    if not isinstance(per_case, dict):
        raise ConfigError("cases: expected an object keyed by case name")
    names = {c.name for c in SUITES[suite]}
    unknown = set(per_case) - names
    if unknown:
        raise ConfigError(f"cases: unknown case(s) {sorted(unknown)} for suite {suite!r}")

    cases = []
    for base in SUITES[suite]:
        params = json.loads(json.dumps(base.params))  # deep copy
        extra = per_case.get(base.name) or {}
        if not isinstance(extra, dict):
            raise ConfigError(f"cases.{base.name}: expected an object")
        solver = dict(params.get("solver") or {})
        solver.update(global_solver)
        solver.update(extra.get("solver") or {})
        params.update({k: v for k, v in extra.items() if k != "solver"})
        if solver:
            params["solver"] = solver
        case = Case(base.name, base.experiment, params)
        validate_case(case)
        cases.append(case)
    return cases


def cmd_verify(suite: str, config_path: Optional[str], out: str, jobs: Optional[int] = None) -> int:
    overrides = load_json(config_path) if config_path else {}
    cases = build_suite(suite, overrides)
    out_dir = Path(out)
    t0 = time.perf_counter()
    reports = run_cases(cases, jobs=jobs)
    elapsed = time.perf_counter() - t0

    files = []
    for rep in reports:
        write_report(out_dir / "reports", rep)
        files.append(f"reports/{rep.name}.json")
        print(rep.summary_line())
    summary = summarize(reports)
    summary.update({
        "suite": suite,
        "version": __version__,
        "backend": BACKEND,
        "elapsed_seconds": elapsed,
        "reports": files,
    })
    write_json(out_dir / "summary.json", summary)
    print(f"{summary['passed']}/{summary['total']} passed, {summary['failed']} failed "
          f"({len(summary['exploratory'])} exploratory) in {elapsed:.1f}s")
    return EXIT_OK if summary["failed"] == 0 else EXIT_FAIL


# -- kernels ---------------------------------------------------------------

_KERNEL_TABLE = (
    ("constant", "c >= 0", "bounded: V <= c",
     "V <= C(i+j) with C = c/2; moment bound with alpha = 0"),
    ("sum", "scale C_V >= 0", "sum-linear: V = C_V(i+j)",
     "existence, mass and density conservation class; uniqueness when C_V also dominates a min-power bound"),
    ("alpha_sum", "alpha in [0, 1]", "V = i^alpha + j^alpha",
     "(alpha+1)-moment bound class, 0 <= alpha <= 1; V <= i+j"),
    ("min_power", "scale C_V >= 0, eta in [0, 2]", "V = C_V min(i, j)^eta",
     "second half of the uniqueness hypothesis, 0 <= eta <= 2; sum-linear only when eta <= 1"),
    ("product", "scale >= 0", "unclassified: V = scale*i*j",
     "none; exploratory only (gelling), excluded from pass/fail"),
    ("tabulated", "table (n_max x n_max, symmetrized)", "unclassified",
     "checked per table with verify_hypothesis; V <= C(i+j) with C = max V/(i+j) on the table"),
)


def cmd_kernels() -> int:
    assert tuple(row[0] for row in _KERNEL_TABLE) == FAMILIES
    for family, params, growth, hyp in _KERNEL_TABLE:
        print(f"{family}: {growth}")
        print(f"    params: {params}")
        print(f"    hypotheses: {hyp}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sdcoag",
        description="Truncated pulverizing-coagulation simulator and property checks.",
        epilog="Exit codes: 0 ok, 1 verification failed, 2 config error, 3 runtime error.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="integrate one configuration and write its trajectory")
    sp.add_argument("--config", required=True, help="run config JSON")
    sp.add_argument("--out", help="output directory (overrides output_dir in the config)")
    sp.add_argument("--backend", choices=("cython", "python"), help="RHS backend (default: best available)")

    vp = sub.add_parser("verify", help="run an experiment suite and write reports")
    vp.add_argument("--suite", default="all", choices=sorted(SUITES))
    vp.add_argument("--config", help="overrides JSON: {\"solver\": {...}, \"cases\": {name: {...}}}")
    vp.add_argument("--out", default="sdcoag-reports", help="output directory (default: %(default)s)")
    vp.add_argument("--jobs", type=int, default=None, help="worker processes (default: logical cores)")

    sub.add_parser("kernels", help="list kernel families and the hypotheses they satisfy")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.backend)
        if args.command == "verify":
            if args.jobs is not None and args.jobs < 1:
                raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
            return cmd_verify(args.suite, args.config, args.out, args.jobs)
        return cmd_kernels()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (SDError, OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
