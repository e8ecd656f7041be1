import csv
import io
import math

import numpy as np
import pytest

from src.config.models import RunConfig, SweepSpec
from src.core.rng import PROBE_STREAM, seeded_rng
from src.data.distributions import ContaminatedUniformMean
from src.harness.probes import dp_demo, lower_bound_probe, lower_bound_threshold
from src.harness.report import format_cell, render_csv
from src.harness.sweep import run_cell, run_sweep
from src.subset.probes import rss_success_probability, rss_vector_success_probability

CONTAMINATED = ContaminatedUniformMean(theta=np.array([0.5]))


def test_dp_demo_image_sets():
    report = dp_demo()
    assert report.image == frozenset({(10.0,), (0.0, 10.0)})
    assert report.neighbour_image == frozenset({(0.0,)})
    assert report.disjoint
    assert [case.target for case in report.cases] == [0.0, 5.0, 5.0, 0.0, 0.0, 5.0]
    assert report.to_dict()["cases"][1] == {
        "batch": [0.0, 10.0, 10.0], "R_index": 2, "target": 5.0, "retained": [0.0, 10.0],
    }


def test_lower_bound_threshold():
    assert lower_bound_threshold(6, 1e-4) == pytest.approx(13.7739, abs=1e-3)
    with pytest.raises(ValueError):
        lower_bound_threshold(1, 1e-4)
    with pytest.raises(ValueError):
        lower_bound_threshold(6, 0.5)


def test_genie_probe_below_the_threshold_fails_often():
    assert 8 < lower_bound_threshold(6, 1e-4)
    assert lower_bound_probe(6, 8, 1e-4, 500, seeded_rng(0, PROBE_STREAM)) >= 2 / 3


def test_genie_probe_with_a_loose_tolerance_never_fails():
    assert lower_bound_probe(2, 4, 1e6, 50, seeded_rng(0, PROBE_STREAM)) == 0.0
    with pytest.raises(ValueError):
        lower_bound_probe(9, 4, 1e-4, 10, seeded_rng(0, PROBE_STREAM))


def test_rss_probe_trivial_cases():
    # the empty sum is already within 1/2 of every target
    assert rss_success_probability(1, 2.0, 200, seeded_rng(0, PROBE_STREAM)) == 1.0
    assert rss_success_probability(2, 1e-6, 500, seeded_rng(0, PROBE_STREAM)) <= 0.01
    with pytest.raises(ValueError):
        rss_success_probability(41, 1e-3, 10, seeded_rng(0, PROBE_STREAM))


def test_vector_rss_probe():
    assert rss_vector_success_probability(3, 2, 10.0, 50, seeded_rng(0, PROBE_STREAM)) == 1.0
    with pytest.raises(ValueError):
        rss_vector_success_probability(21, 2, 0.1, 10, seeded_rng(0, PROBE_STREAM))
    with pytest.raises(ValueError):
        rss_vector_success_probability(5, 4, 0.1, 10, seeded_rng(0, PROBE_STREAM))


def test_format_cell():
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(True) == "true"
    assert format_cell(None) == ""
    assert format_cell(math.nan) == "nan"
    assert render_csv(("a", "b"), [(1, 2.5)]) == "a,b\n1,2.5\n"


@pytest.fixture
def small_sweep():
    return SweepSpec(base=RunConfig(m=8, T=5, seed=10, distribution=CONTAMINATED), axis="T", values=(3, 6), seeds=3)


def test_sweep_rows_and_aggregates(small_sweep):
    table = run_sweep(small_sweep, workers=1)
    assert [(r.value, r.seed) for r in table.rows] == [(3, 10), (3, 11), (3, 12), (6, 10), (6, 11), (6, 12)]
    assert all(r.status == "ok" and r.compliance_ok for r in table.rows)
    agg = table.aggregate(6)
    errors = [r.sq_error for r in table.rows if r.value == 6]
    assert agg.runs == 3
    assert agg.mean == pytest.approx(np.mean(errors))
    assert agg.stderr == pytest.approx(np.std(errors, ddof=1) / math.sqrt(3))


def test_sweep_csv_layout(small_sweep):
    rows = list(csv.reader(io.StringIO(run_sweep(small_sweep, workers=1).to_csv())))
    assert rows[0] == ["algorithm", "axis", "value", "seed", "sq_error", "max_encoding_error", "compliance_ok", "status"]
    assert len(rows) == 1 + 6 + 4
    assert rows[7][3:4] == ["mean"] and rows[8][3:4] == ["stderr"]
    assert rows[8][7] == "aggregate of 3"


def test_sweep_output_does_not_depend_on_workers(small_sweep):
    assert run_sweep(small_sweep, workers=2).to_csv() == run_sweep(small_sweep, workers=1).to_csv()


def test_failed_cell_becomes_a_status():
    row = run_cell(("alg2", "T", 5, RunConfig(m=8, T=5, distribution=CONTAMINATED)))
    assert row.status.startswith("error: ")
    assert math.isnan(row.sq_error) and not row.compliance_ok


@pytest.mark.slow
def test_subset_sum_success_grows_with_n():
    probabilities = [
        rss_success_probability(n, 1e-3, 500, seeded_rng(0, PROBE_STREAM)) for n in (10, 15, 20, 25)
    ]
    assert probabilities[-1] >= 0.95
    slack = 2 * math.sqrt(0.25 / 500)
    assert all(a <= b + slack for a, b in zip(probabilities, probabilities[1:]))


def test_genie_failure_rate_does_not_rise_with_tolerance():
    rates = [lower_bound_probe(3, 8, eps, 300, seeded_rng(2, PROBE_STREAM)) for eps in (1e-3, 1e-2, 1e-1)]
    # same seed, same batches: only the tolerance moves
    assert rates[0] >= rates[1] >= rates[2]


def test_genie_failure_rate_does_not_rise_with_memory():
    rates = [lower_bound_probe(3, m, 1e-2, 300, seeded_rng(3, PROBE_STREAM)) for m in (4, 8, 12)]
    slack = 2 * math.sqrt(2 * 0.25 / 300)
    assert all(b <= a + slack for a, b in zip(rates, rates[1:]))


def test_subset_sum_success_grows_with_tolerance():
    rates = [rss_success_probability(10, eps, 400, seeded_rng(4, PROBE_STREAM)) for eps in (1e-3, 1e-2, 1e-1)]
    assert rates[0] <= rates[1] <= rates[2]


def weighted_slope(x, means, stderrs):
    """Least-squares slope of ``means`` on ``x`` and its standard error."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    scale = np.sum(x * x)
    slope = np.sum(x * (np.asarray(means) - np.mean(means))) / scale
    return slope, math.sqrt(np.sum(x * x * np.asarray(stderrs) ** 2)) / scale


@pytest.mark.slow
def test_alg1_error_falls_with_horizon_while_the_baseline_stays_flat():
    base = RunConfig(m=20, T=50, seed=0, distribution=CONTAMINATED)
    values = (50, 100, 200, 400)
    ours = run_sweep(SweepSpec(base=base, axis="T", values=values, seeds=200, algorithm="alg1"))
    keep_all = run_sweep(SweepSpec(base=base, axis="T", values=values, seeds=200, algorithm="baseline_mean"))

    means = [ours.aggregate(v).mean for v in values]
    assert all(b < a for a, b in zip(means, means[1:]))

    flat = [keep_all.aggregate(v) for v in values]
    slope, slope_se = weighted_slope(np.log2(values), [a.mean for a in flat], [a.stderr for a in flat])
    assert abs(slope) <= 2 * slope_se


@pytest.mark.slow
def test_alg1_error_does_not_rise_with_memory():
    base = RunConfig(m=8, T=200, seed=0, distribution=CONTAMINATED)
    table = run_sweep(SweepSpec(base=base, axis="m", values=(8, 16, 24), seeds=200, algorithm="alg1"))
    aggs = [table.aggregate(v) for v in (8, 16, 24)]
    assert all(b.mean <= a.mean + 2 * math.hypot(a.stderr, b.stderr) for a, b in zip(aggs, aggs[1:]))
