"""
Command handlers for the gradfamily CLI.
Each handler takes the parsed arguments and a RunContext and returns an exit code.
"""
import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from gradfamily.core.config import AppConfig, ConfigService
from gradfamily.core.logging import get_logger
from gradfamily.models.bench import GridSpec
from gradfamily.models.problem import SpectrumSpec
from gradfamily.models.psi import PsiFunction
from gradfamily.models.schedule import SolverConfig, parse_schedule
from gradfamily.services import asymptotics
from gradfamily.services.bench_harness import (
    BenchmarkReport,
    aggregate,
    performance_profile,
    run_grid,
    summary_table,
)
from gradfamily.services.csv_export import read_csv, render_csv, write_csv
from gradfamily.services.error_handling import STATUS_EXIT_CODES, EXIT_OK
from gradfamily.services.quadratic_model import RNG_NAME, QuadraticProblem, make_problem
from gradfamily.services.solver import finite_termination_2d, run

logger = get_logger("cli")


@dataclass
class RunContext:
    config: AppConfig
    run_id: str


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _pairs(text: str) -> List[Tuple[int, int]]:
    out = []
    for token in text.split(","):
        km, _, ks = token.strip().partition("x")
        out.append((int(km), int(ks)))
    return out


def _psi_exponent(token: str) -> int:
    schedule = parse_schedule(f"alt:{token}")
    return schedule.u


def _spectrum_spec(args: argparse.Namespace, ctx: RunContext) -> SpectrumSpec:
    if args.set is not None:
        n = args.n if args.n is not None else ctx.config.dimension
        return SpectrumSpec(set_id=args.set, n=n, kappa=args.kappa, seed=args.seed)
    n = args.n if args.n is not None else (2 if args.spectrum == "twodim" else ctx.config.dimension)
    return SpectrumSpec(named=args.spectrum, n=n, kappa=args.kappa, seed=args.seed)


def _b_range(args: argparse.Namespace, spec: SpectrumSpec, ctx: RunContext) -> Optional[Tuple[float, float]]:
    """Explicit --b-range, else the configured range for sets and b=0 for named spectra."""
    if args.b_range is None:
        return ctx.config.b_range if spec.set_id is not None else None
    if args.b_range == "zero":
        return None
    return ConfigService.parse_interval(args.b_range)


def _problem(args: argparse.Namespace, ctx: RunContext, representation: Optional[str] = None) -> Tuple[QuadraticProblem, Dict[str, str]]:
    spec = _spectrum_spec(args, ctx)
    b_range = _b_range(args, spec, ctx)
    if representation is None:
        representation = args.representation or ("rotated" if spec.set_id is not None else "diagonal")
    problem = make_problem(spec, b_range, representation=representation)
    meta = spec.to_metadata(b_range)
    meta["b_range"] = meta.get("b_range", "zero")
    meta.update({
        "representation": representation,
        "rng": RNG_NAME,
        "problem_hash": problem.fingerprint(),
        "x0": "ones",
    })
    return problem, meta


def _write_or_print(out: str, frame: pd.DataFrame, meta: Dict[str, str]) -> None:
    if out == "-":
        sys.stdout.write(render_csv(frame, meta))
    else:
        write_csv(out, frame, meta)


def cmd_solve(args: argparse.Namespace, ctx: RunContext) -> int:
    """Run one schedule on one problem and write its trace."""
    schedule = parse_schedule(args.schedule)
    config = SolverConfig(
        epsilon=args.eps,
        max_iter=args.max_iter if args.max_iter is not None else ctx.config.max_iter,
        trace_level=args.trace_level,
        alpha0_rule=args.alpha0,
        track_tilde=args.track_tilde,
    )
    problem, meta = _problem(args, ctx)
    trace = run(problem, schedule, config, np.ones(problem.n), run_id=ctx.run_id)

    meta.update({
        "command": "solve",
        "schedule": schedule.label,
        "epsilon": repr(config.epsilon),
        "max_iter": str(config.max_iter),
        "trace_level": config.trace_level,
        "alpha0": config.alpha0_rule,
        "status": trace.status,
        "iterations": str(trace.iterations),
        "run_id": ctx.run_id,
    })
    _write_or_print(args.out, trace.to_frame(), meta)
    return STATUS_EXIT_CODES[trace.status]


def _diagnosis_summary(
    trace, psi: PsiFunction, problem: QuadraticProblem, tail: int, exclusion: str
) -> pd.DataFrame:
    lam = problem.spectrum
    entries: List[Tuple[str, object]] = []

    estimate = asymptotics.estimate_c(trace, psi, lam, tail=tail)
    entries += [
        ("c", estimate.c), ("c_odd", estimate.c_odd),
        ("c_discrepancy", estimate.discrepancy), ("c_sign_consistent", estimate.sign_consistent),
    ]

    predicted = asymptotics.predict_rates(estimate.c, problem.kappa, psi.evaluate(lam[0]), psi.evaluate(lam[-1]))
    observed = asymptotics.observed_rates(trace, tail=tail)
    for name in ("r_f1", "r_f2", "r_g1", "r_g2", "product"):
        entries.append((f"predicted_{name}", getattr(predicted, name)))
        entries.append((f"observed_{name}", getattr(observed, name)))
    entries.append(("worst_rate", asymptotics.worst_rate(problem.kappa)))

    even, odd = asymptotics.predict_alpha_limits(estimate.c, psi, lam[0], lam[-1])
    entries += [("predicted_alpha_even", even), ("predicted_alpha_odd", odd)]

    q0 = asymptotics.simplex_from_log_mu(trace.log_mu[0])
    try:
        bound = asymptotics.c_bound(lam, psi, q0, alphas=trace.alpha, exclusion=exclusion)
        entries += [
            ("sigma", bound.sigma), ("phi_sigma", bound.phi_sigma),
            ("c2_lower", bound.lower), ("c2_upper", bound.upper),
            ("c2_in_bound", bound.lower <= estimate.c ** 2 <= bound.upper),
        ]
    except asymptotics.DynamicsError as e:
        logger.warning(f"c-bound unavailable: {e}")
        entries.append(("sigma", ""))

    try:
        cycle, k_cycle = asymptotics.iterate_to_cycle(q0, psi, lam)
        entries += [("cycle_c", cycle.c), ("cycle_k", k_cycle)]
    except asymptotics.DynamicsError as e:
        logger.warning(f"Simplex orbit did not settle: {e}")

    return pd.DataFrame(entries, columns=["quantity", "value"])


def cmd_diagnose(args: argparse.Namespace, ctx: RunContext) -> int:
    """Family run on a diagonal problem plus two-cycle diagnostics."""
    u = _psi_exponent(args.psi)
    psi = PsiFunction.monomial(u)
    schedule = parse_schedule(f"family:{u}")
    config = SolverConfig(
        epsilon=args.eps,
        max_iter=args.max_iter if args.max_iter is not None else ctx.config.max_iter,
        trace_level="eigen",
    )
    problem, meta = _problem(args, ctx, representation="diagonal")
    trace = run(problem, schedule, config, np.ones(problem.n), run_id=ctx.run_id)

    meta.update({
        "command": "diagnose",
        "psi": psi.label,
        "epsilon": repr(config.epsilon),
        "max_iter": str(config.max_iter),
        "tail": str(args.tail),
        "exclusion": args.exclusion,
        "status": trace.status,
        "iterations": str(trace.iterations),
        "run_id": ctx.run_id,
    })
    out = Path(args.out)
    write_csv(out / "dynamics.csv", asymptotics.dynamics_frame(trace, psi, problem.spectrum), meta)
    summary = _diagnosis_summary(trace, psi, problem, args.tail, args.exclusion)
    write_csv(out / "diagnose_summary.csv", summary, meta)
    return STATUS_EXIT_CODES[trace.status]


def cmd_ft2d(args: argparse.Namespace, ctx: RunContext) -> int:
    """Three-step finite termination on diag{1, lambda}."""
    rng = np.random.Generator(np.random.PCG64(args.seed))
    rows = []
    for lam in _floats(args.lambdas):
        gnorm, fval = finite_termination_2d(lam, args.starts, rng)
        rows.append({"lambda": lam, "mean_gnorm3": gnorm, "mean_f3": fval})
    meta = {
        "command": "ft2d",
        "lambdas": args.lambdas,
        "starts": str(args.starts),
        "seed": str(args.seed),
        "rng": RNG_NAME,
        "run_id": ctx.run_id,
    }
    _write_or_print(args.out, pd.DataFrame(rows, columns=["lambda", "mean_gnorm3", "mean_f3"]), meta)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, ctx: RunContext) -> int:
    """Benchmark grid with report, profile and summary tables."""
    fields = {
        "replicates": args.replicates,
        "n": args.n if args.n is not None else ctx.config.dimension,
        "base_seed": args.seed,
        "max_iter": args.max_iter if args.max_iter is not None else ctx.config.max_iter,
        "workers": args.workers if args.workers is not None else ctx.config.workers,
        "b_range": ctx.config.b_range,
        "kb_policy": args.kb,
    }
    if args.sets:
        fields["sets"] = _ints(args.sets)
    if args.kappas:
        fields["kappas"] = _floats(args.kappas)
    if args.epsilons:
        fields["epsilons"] = _floats(args.epsilons)
    if args.methods:
        fields["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.km_ks:
        fields["km_ks"] = _pairs(args.km_ks)
    spec = GridSpec(**fields)

    report = run_grid(spec, run_id=ctx.run_id)
    meta = dict(report.metadata, run_id=ctx.run_id)
    out = Path(args.out)
    write_csv(out / "report.csv", report.rows, meta)
    write_csv(out / "profile_iterations.csv", performance_profile(report, "iterations"), meta)
    write_csv(out / "summary.csv", summary_table(aggregate(report), report.labels), meta)
    return EXIT_OK


def cmd_profile(args: argparse.Namespace, ctx: RunContext) -> int:
    """Performance profile of an existing report.csv."""
    rows, meta = read_csv(args.input)
    report = BenchmarkReport(rows=rows, metadata=meta)
    profile = performance_profile(report, args.metric)
    meta = dict(meta, command="profile", metric=args.metric, source=str(args.input), run_id=ctx.run_id)
    out = args.out if args.out is not None else str(Path(args.input).with_name(f"profile_{args.metric}.csv"))
    _write_or_print(out, profile, meta)
    return EXIT_OK
