"""
Test the benchmark grid, aggregation and performance profiles.
"""
import pytest
import numpy as np
import pandas as pd
from pathlib import Path
import sys

# Add the src directory to Python path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from gradfamily.models.bench import GridSpec
from gradfamily.services.bench_harness import (
    REPORT_COLUMNS,
    BenchmarkReport,
    GridError,
    ProfileError,
    aggregate,
    cost_table,
    expand_methods,
    method_labels,
    performance_profile,
    run_grid,
    summary_table,
    totals,
)


def _report(costs):
    """Report with one instance per row of `costs`; None marks a failed run."""
    rows = []
    for replicate, per_method in enumerate(costs):
        for method, cost in per_method.items():
            rows.append({
                "set": 1, "kappa": 1e4, "epsilon": 1e-6, "method": method, "params": "",
                "kb": None, "replicate": replicate,
                "iterations": 20000 if cost is None else cost,
                "status": "iter_cap" if cost is None else "converged",
                "problem_hash": f"h{replicate}",
            })
    return BenchmarkReport(rows=pd.DataFrame(rows, columns=REPORT_COLUMNS))


def _small_grid(**overrides):
    fields = dict(
        sets=[1, 3], kappas=[1e3], epsilons=[1e-6], replicates=2, n=50,
        methods=["bb1", "alg1:bb1:sd"], km_ks=[(9, 9), (15, 15)],
    )
    fields.update(overrides)
    return GridSpec(**fields)


def test_expand_methods():
    """Test bare alg1 methods expand over the (Km, Ks) grid with the set's Kb."""
    spec = _small_grid(methods=["bb1", "alg1:bb1:sd", "alg1:bb2:mg:7:3:2"])

    on_set_1 = expand_methods(spec, 1)
    assert [s.label for s in on_set_1] == [
        "bb1", "alg1:bb1:sd:100:9:9", "alg1:bb1:sd:100:15:15", "alg1:bb2:mg:7:3:2",
    ]
    assert [s.kb for s in expand_methods(spec, 3)][1:3] == [30, 30]

    fixed = _small_grid(kb_policy="50")
    assert {s.kb for s in expand_methods(fixed, 1)[1:]} == {50}


def test_repeated_methods_rejected():
    """Test that methods sharing a report label on a set raise before any run."""
    spec = _small_grid(methods=["bb1", "alg1:bb1:sd", "alg1:bb1:sd:30:9:9"])

    with pytest.raises(GridError, match=r"alg1:bb1:sd\[Km=9;Ks=9\]"):
        expand_methods(spec, 3)
    with pytest.raises(GridError):
        run_grid(spec)
    with pytest.raises(GridError, match="bb1"):
        expand_methods(_small_grid(methods=["bb1", "BB1"]), 1)


def test_run_grid_report_shape():
    """Test one row per (instance, method) with Kb and problem hashes."""
    report = run_grid(_small_grid())
    rows = report.rows

    assert list(rows.columns) == REPORT_COLUMNS
    assert len(rows) == 12
    assert set(rows["status"]) == {"converged"}
    assert (rows["iterations"] > 0).all()

    periodic = rows[rows["method"] == "alg1:bb1:sd"]
    assert set(periodic.loc[periodic["set"] == 1, "kb"]) == {100}
    assert set(periodic.loc[periodic["set"] == 3, "kb"]) == {30}
    assert rows.loc[rows["method"] == "bb1", "kb"].isna().all()
    assert set(periodic["params"]) == {"Km=9;Ks=9", "Km=15;Ks=15"}

    for _, instance in rows.groupby(["set", "replicate"]):
        assert instance["problem_hash"].nunique() == 1
    assert rows["problem_hash"].nunique() == 4

    assert report.metadata["km_ks"] == "9x9,15x15"
    assert report.metadata["x0"] == "ones"


def test_run_grid_is_independent_of_worker_count():
    """Test that parallel execution gives the same report as a single worker."""
    serial = run_grid(_small_grid(workers=1))
    parallel = run_grid(_small_grid(workers=3))

    pd.testing.assert_frame_equal(serial.rows, parallel.rows)


def test_run_grid_records_iteration_cap():
    """Test that non-converged runs stay in the report with their status."""
    report = run_grid(_small_grid(sets=[1], replicates=1, methods=["sd"], max_iter=5))

    assert list(report.rows["status"]) == ["iter_cap"]
    assert list(report.rows["iterations"]) == [5]


def test_method_labels():
    """Test labels carry params in brackets when present."""
    rows = pd.DataFrame({"method": ["bb1", "alg1:bb1:sd"], "params": ["", "Km=9;Ks=9"]})

    assert list(method_labels(rows)) == ["bb1", "alg1:bb1:sd[Km=9;Ks=9]"]


def test_profile_two_methods():
    """Test the profile of two methods that each win once."""
    profile = performance_profile(_report([{"A": 10, "B": 20}, {"A": 20, "B": 10}]))

    assert list(profile["rho"]) == [1.0, 2.0]
    assert list(profile["A"]) == [0.5, 1.0]
    assert list(profile["B"]) == [0.5, 1.0]


def test_profile_three_methods_by_hand():
    """Test breakpoints and fractions with failures and ties."""
    report = _report([
        {"A": 10, "B": 20, "C": 40},
        {"A": 30, "B": 15, "C": 15},
        {"A": 5, "B": None, "C": 10},
        {"A": 8, "B": 8, "C": None},
    ])
    profile = performance_profile(report)

    assert list(profile["rho"]) == [1.0, 2.0, 4.0]
    assert list(profile["A"]) == [0.75, 1.0, 1.0]
    assert list(profile["B"]) == [0.5, 0.75, 0.75]
    assert list(profile["C"]) == [0.25, 0.5, 0.75]

    for label in "ABC":
        assert profile[label].is_monotonic_increasing
        assert profile[label].between(0.0, 1.0).all()


def test_profile_single_method():
    """Test that a lone method is at 1 from rho = 1."""
    profile = performance_profile(_report([{"A": 12}, {"A": 40}]))

    assert list(profile["rho"]) == [1.0]
    assert list(profile["A"]) == [1.0]


def test_profile_drops_instances_all_methods_failed(caplog):
    """Test that unsolved instances are dropped with a warning."""
    report = _report([{"A": 10, "B": 20}, {"A": None, "B": None}])
    profile = performance_profile(report)

    assert list(profile["A"]) == [1.0, 1.0]
    assert list(profile["B"]) == [0.0, 1.0]
    assert "every method failed" in caplog.text


def test_profile_errors():
    """Test unknown metrics and reports with nothing solved."""
    with pytest.raises(ProfileError):
        performance_profile(_report([{"A": 10}]), metric="seconds")
    with pytest.raises(ProfileError):
        performance_profile(_report([{"A": None, "B": None}]))


def test_cost_table_marks_failures_infinite():
    """Test that failed runs cost +inf."""
    table = cost_table(_report([{"A": 10, "B": None}]))

    assert table.iloc[0]["A"] == 10.0
    assert np.isinf(table.iloc[0]["B"])


def test_aggregate_means():
    """Test replicate and kappa averaging."""
    rows = []
    for kappa, values in ((1e4, (100, 200)), (1e5, (240, 260))):
        for replicate, iterations in enumerate(values):
            rows.append({
                "set": 2, "kappa": kappa, "epsilon": 1e-6, "method": "bb1", "params": "",
                "kb": None, "replicate": replicate, "iterations": iterations,
                "status": "converged", "problem_hash": "h",
            })
    agg = aggregate(BenchmarkReport(rows=pd.DataFrame(rows, columns=REPORT_COLUMNS)))

    assert list(agg.cell_means["iterations"]) == [150.0, 250.0]
    assert list(agg.set_means["iterations"]) == [200.0]
    assert list(agg.totals["iterations"]) == [200.0]
    assert not agg.totals["capped"].any()


def test_totals_sum_set_means():
    """Test the per-epsilon total over seven sets."""
    means = [458.7, 455.7, 495.6, 715.0, 1091.5, 257.0, 893.7]
    set_means = pd.DataFrame({
        "set": range(1, 8), "epsilon": [1e-6] * 7, "label": ["bb1"] * 7, "iterations": means,
    })
    result = totals(set_means)

    assert len(result) == 1
    assert result.iloc[0]["iterations"] == pytest.approx(4367.2)


def test_summary_table_marks_capped_cells():
    """Test the summary layout, the total row and the capped marker."""
    report = _report([{"A": 100, "B": None}, {"A": 200, "B": 300}])
    table = summary_table(aggregate(report))

    assert list(table.columns) == ["epsilon", "set", "A", "B"]
    assert list(table["set"]) == ["1", "total"]
    assert table.iloc[0]["A"] == "150"
    assert table.iloc[0]["B"] == "10150*"
    assert table.iloc[1]["B"].endswith("*")
    assert table.iloc[0]["epsilon"] == "1e-06"


def test_periodic_variants_against_baselines():
    """Test the four periodic variants against BB1 and DY at n=100, kappa=1e4."""
    periodic = ["alg1:bb1:sd", "alg1:bb2:sd", "alg1:bb1:mg", "alg1:bb2:mg"]
    spec = GridSpec(
        sets=[1, 3, 7], kappas=[1e4], epsilons=[1e-6, 1e-9], replicates=10, n=100,
        methods=["bb1", "dy"] + periodic, max_iter=20000, workers=4,
    )
    report = run_grid(spec)

    assert len(report.rows) == 3 * 2 * 10 * (2 + 4 * 9)
    assert (report.rows["status"] == "converged").all()

    means = aggregate(report).set_means.pivot_table(
        index=["set", "epsilon"], columns="label", values="iterations"
    )
    variants = [label for label in means.columns if label.startswith("alg1:")]
    assert len(variants) == 36
    ratios_bb1 = means[variants].div(means["bb1"], axis=0)
    ratios_dy = means[variants].div(means["dy"], axis=0)

    assert (ratios_bb1 < 1.0).all().all()
    # DY wins a few (Km, Ks) cells on sets 3 and 7, never by much
    assert (ratios_dy < 1.0).to_numpy().mean() >= 0.85
    assert (ratios_dy < 1.15).all().all()
