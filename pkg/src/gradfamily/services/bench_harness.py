"""
Benchmark harness: instance grid, iteration-count report, aggregation and
performance profiles.
"""
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from gradfamily.core.logging import get_logger
from gradfamily.models.bench import GridSpec
from gradfamily.models.problem import SpectrumSpec
from gradfamily.models.schedule import Schedule, SolverConfig, parse_schedule
from gradfamily.services.quadratic_model import RNG_NAME, derive_seed, make_rotated
from gradfamily.services.solver import CONVERGED, run

logger = get_logger("bench_harness")

REPORT_COLUMNS = [
    "set", "kappa", "epsilon", "method", "params", "kb",
    "replicate", "iterations", "status", "problem_hash",
]
INSTANCE_KEY = ["set", "kappa", "epsilon", "replicate"]


class GridError(Exception):
    """Raised when a benchmark grid cannot be set up."""
    pass


class ProfileError(Exception):
    """Raised when a performance profile cannot be computed."""
    pass


@dataclass
class BenchmarkReport:
    """One row per (instance, method) run."""
    rows: pd.DataFrame
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def labels(self) -> List[str]:
        return list(dict.fromkeys(method_labels(self.rows)))


@dataclass
class Aggregation:
    cell_means: pd.DataFrame
    set_means: pd.DataFrame
    totals: pd.DataFrame


def method_labels(rows: pd.DataFrame) -> pd.Series:
    """Column label per row: method, with its params in brackets when present."""
    params = rows["params"].fillna("").astype(str)
    method = rows["method"].astype(str)
    return method.where(params == "", method + "[" + params + "]")


def expand_methods(spec: GridSpec, set_id: int) -> List[Schedule]:
    """
    Schedules run on a set. A bare alg1:<bb>:<psi> expands over spec.km_ks
    with Kb from the set's policy.
    """
    out = []
    for text in spec.methods:
        schedule = parse_schedule(text)
        if schedule.variant == "periodic" and text.count(":") == 2:
            kb = spec.kb_for(set_id)
            out.extend(
                schedule.model_copy(update={"kb": kb, "km": km, "ks": ks})
                for km, ks in spec.km_ks
            )
        else:
            out.append(schedule)
    keys = [(s.method_name, s.params) for s in out]
    if len(set(keys)) != len(keys):
        duplicates = sorted({f"{m}[{p}]" if p else m for m, p in keys if keys.count((m, p)) > 1})
        raise GridError(f"methods repeat on set {set_id}: {', '.join(duplicates)}")
    return out


def _run_instance(spec: GridSpec, set_id: int, kappa: float, epsilon: float, replicate: int) -> List[dict]:
    seed = derive_seed(spec.base_seed, set_id, kappa, epsilon, replicate)
    schedules = expand_methods(spec, set_id)
    base = {"set": set_id, "kappa": kappa, "epsilon": epsilon, "replicate": replicate}
    try:
        problem = make_rotated(
            SpectrumSpec(set_id=set_id, n=spec.n, kappa=kappa, seed=seed), spec.b_range
        )
    except Exception as e:
        logger.warning(f"Instance {base} could not be built: {e}")
        return [
            {**base, "method": s.method_name, "params": s.params,
             "kb": s.kb if s.variant == "periodic" else None,
             "iterations": spec.max_iter, "status": "error", "problem_hash": ""}
            for s in schedules
        ]

    x0 = np.ones(spec.n)
    config = SolverConfig(epsilon=epsilon, max_iter=spec.max_iter, trace_level="summary")
    rows = []
    for schedule in schedules:
        try:
            trace = run(problem, schedule, config, x0)
            iterations, status = trace.iterations, trace.status
        except Exception as e:
            logger.warning(f"Run {schedule.label} on {base} failed: {e}")
            iterations, status = spec.max_iter, "error"
        if status != CONVERGED:
            logger.warning(f"Run {schedule.label} on {base} ended with status {status}")
        rows.append({
            **base,
            "method": schedule.method_name,
            "params": schedule.params,
            "kb": schedule.kb if schedule.variant == "periodic" else None,
            "iterations": iterations,
            "status": status,
            "problem_hash": problem.fingerprint(),
        })
    return rows


def grid_metadata(spec: GridSpec) -> Dict[str, str]:
    return {
        "command": "bench",
        "sets": ",".join(str(s) for s in spec.sets),
        "kappas": ",".join(repr(k) for k in spec.kappas),
        "epsilons": ",".join(repr(e) for e in spec.epsilons),
        "replicates": str(spec.replicates),
        "n": str(spec.n),
        "seed": str(spec.base_seed),
        "methods": ",".join(spec.methods),
        "km_ks": ",".join(f"{km}x{ks}" for km, ks in spec.km_ks),
        "kb_policy": str(spec.kb_policy),
        "b_range": f"{spec.b_range[0]!r}:{spec.b_range[1]!r}",
        "max_iter": str(spec.max_iter),
        "x0": "ones",
        "rng": RNG_NAME,
    }


def run_grid(spec: GridSpec, run_id: str = "-") -> BenchmarkReport:
    """
    Run every method on every instance of the grid.

    Instances are independent jobs on a thread pool; rows are assembled in
    grid order, so the report does not depend on the worker count. Failed
    runs become rows with a non-converged status.

    Raises:
        GridError: Two methods share a report label on some set
    """
    keys: List[Tuple[int, float, float, int]] = [
        (set_id, kappa, epsilon, replicate)
        for set_id in spec.sets
        for kappa in spec.kappas
        for epsilon in spec.epsilons
        for replicate in range(spec.replicates)
    ]
    for set_id in spec.sets:
        expand_methods(spec, set_id)
    logger.info(f"Running {len(keys)} instances with {spec.workers} workers [run_id: {run_id}]")

    results: Dict[Tuple[int, float, float, int], List[dict]] = {}
    with ThreadPoolExecutor(max_workers=spec.workers) as executor:
        futures = {executor.submit(_run_instance, spec, *key): key for key in keys}
        for future in as_completed(futures):
            results[futures[future]] = future.result()

    rows = [row for key in keys for row in results[key]]
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    frame["kb"] = frame["kb"].astype("Int64")
    failed = int((frame["status"] != CONVERGED).sum())
    logger.info(f"Grid finished: {len(frame)} runs, {failed} not converged [run_id: {run_id}]")
    return BenchmarkReport(rows=frame, metadata=grid_metadata(spec))


def cost_table(report: BenchmarkReport, metric: str = "iterations") -> pd.DataFrame:
    """Instances x method labels; failed runs cost +inf."""
    rows = report.rows
    if metric not in rows.columns:
        raise ProfileError(f"unknown metric '{metric}'")
    if rows.empty:
        raise ProfileError("empty report")
    cost = rows[metric].astype(float).where(rows["status"] == CONVERGED, np.inf)
    frame = rows[INSTANCE_KEY].copy()
    frame["label"] = method_labels(rows)
    frame["cost"] = cost
    table = frame.pivot_table(index=INSTANCE_KEY, columns="label", values="cost", aggfunc="first")
    return table[report.labels]


def performance_profile(report: BenchmarkReport, metric: str = "iterations") -> pd.DataFrame:
    """
    Dolan-More profiles: for each method, the fraction of instances whose cost
    is within a factor rho of the best method's, evaluated at every breakpoint.
    Instances on which every method failed are dropped with a warning.
    """
    table = cost_table(report, metric)
    all_failed = np.isinf(table).all(axis=1)
    if all_failed.any():
        logger.warning(f"Dropping {int(all_failed.sum())} instances where every method failed")
        table = table[~all_failed]
    if table.empty:
        raise ProfileError("no instance was solved by any method")

    costs = table.to_numpy(dtype=float)
    best = costs.min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(best > 0, costs / best, np.where(costs == 0, 1.0, np.inf))

    finite = ratios[np.isfinite(ratios)]
    breakpoints = np.unique(np.concatenate(([1.0], finite)))
    curves = {"rho": breakpoints}
    for j, label in enumerate(table.columns):
        column = ratios[:, j]
        curves[label] = [(column <= rho).mean() for rho in breakpoints]
    return pd.DataFrame(curves)


def totals(set_means: pd.DataFrame) -> pd.DataFrame:
    """Sum of set means per (epsilon, method label)."""
    return (
        set_means.groupby(["epsilon", "label"], sort=False)["iterations"]
        .sum()
        .reset_index()
    )


def aggregate(report: BenchmarkReport) -> Aggregation:
    """
    Mean iterations over replicates per (set, kappa, epsilon, method), then
    over kappa per (set, epsilon, method); totals sum the set means per epsilon.
    A cell is flagged capped when any of its runs did not converge.
    """
    rows = report.rows.copy()
    rows["label"] = method_labels(rows)
    rows["capped"] = rows["status"] != CONVERGED

    cell = (
        rows.groupby(["set", "kappa", "epsilon", "label"], sort=False)
        .agg(iterations=("iterations", "mean"), capped=("capped", "any"))
        .reset_index()
    )
    set_means = (
        cell.groupby(["set", "epsilon", "label"], sort=False)
        .agg(iterations=("iterations", "mean"), capped=("capped", "any"))
        .reset_index()
    )
    total = totals(set_means)
    total["capped"] = (
        set_means.groupby(["epsilon", "label"], sort=False)["capped"].any().to_numpy()
    )
    return Aggregation(cell_means=cell, set_means=set_means, totals=total)


def _format_cell(value: float, capped: bool) -> str:
    return f"{value:.17g}" + ("*" if capped else "")


def summary_table(agg: Aggregation, labels: Optional[List[str]] = None) -> pd.DataFrame:
    """
    Table-shaped summary: one row per (epsilon, set) plus a total row per
    epsilon, one column per method; capped cells carry a trailing '*'.
    """
    set_means = agg.set_means
    if labels is None:
        labels = list(dict.fromkeys(set_means["label"]))
    out = []
    for epsilon in dict.fromkeys(set_means["epsilon"]):
        block = set_means[set_means["epsilon"] == epsilon]
        for set_id in dict.fromkeys(block["set"]):
            cells = block[block["set"] == set_id].set_index("label")
            row = {"epsilon": repr(epsilon), "set": str(set_id)}
            for label in labels:
                row[label] = _format_cell(cells.at[label, "iterations"], bool(cells.at[label, "capped"]))
            out.append(row)
        tot = agg.totals[agg.totals["epsilon"] == epsilon].set_index("label")
        row = {"epsilon": repr(epsilon), "set": "total"}
        for label in labels:
            row[label] = _format_cell(tot.at[label, "iterations"], bool(tot.at[label, "capped"]))
        out.append(row)
    return pd.DataFrame(out, columns=["epsilon", "set"] + labels)
