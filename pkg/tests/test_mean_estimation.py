import itertools
import math

import numpy as np
import pytest

from conftest import batch_of

from src.algorithms.base import execute_batched
from src.algorithms.mean_estimation import (
    KeepAll,
    PerCoordinateSubsampling,
    SimpleSubsampling,
    alg1_step,
    baseline_run,
    outlier_persistence,
    run_alg1,
    run_improved,
)
from src.config.models import EtaSchedule, RunConfig
from src.core.rng import round_rng
from src.core.types import SampleState, items_matrix
from src.data.distributions import ContaminatedUniformMean, GaussianMean, PointMass, draw_batch

CONTAMINATED = ContaminatedUniformMean(theta=np.zeros(1), gamma=1.0, p=0.5, sigma=1.0)


def drawn(cfg, t):
    return draw_batch(cfg.distribution_for("mean"), cfg.m, round_rng(cfg.seed, t), t)


def test_step_targets_the_gradient_point(make_batch):
    cfg = RunConfig(m=4, T=2, b=2, eta_schedule=EtaSchedule("constant", 0.5))
    state = SampleState(items=tuple(make_batch([1.0, 3.0])))
    batch = make_batch([4.0, 6.0, 0.0, 2.5], round_index=2)
    new_state, record = alg1_step(state, batch, 2, cfg)
    # s = 2, y = 5, z = 2 + 0.5 * 3
    np.testing.assert_array_equal(record.z_t, [3.5])
    assert [it.values[0] for it in new_state.items] == [2.5]
    assert record.encoding_error == 1.0
    assert set(new_state.items) <= set(batch[2:])


def test_step_rejects_round_one_and_short_batches(make_batch, scalar_cfg):
    with pytest.raises(ValueError):
        alg1_step(SampleState(), make_batch([0.0] * 12), 2, scalar_cfg)
    with pytest.raises(ValueError):
        alg1_step(SampleState(items=tuple(make_batch([0.0]))), make_batch([0.0] * 5), 2, scalar_cfg)


def test_second_round_matches_direct_computation(scalar_cfg):
    cfg = RunConfig(m=scalar_cfg.m, T=2, d=1, seed=scalar_cfg.seed)
    trace = execute_batched(SimpleSubsampling(cfg), cfg)

    first = items_matrix(drawn(cfg, 1)).mean(axis=0)
    second = drawn(cfg, 2)
    held = items_matrix(second[:6]).mean(axis=0)
    z = first + 0.5 * (held - first)
    rest = items_matrix(second[6:])[:, 0]
    best = min(
        (abs(float(np.mean(rest[list(combo)])) - z[0]), combo)
        for size in range(1, 7)
        for combo in itertools.combinations(range(6), size)
    )[1]
    assert trace.final_state.items == tuple(second[6 + p] for p in best)
    np.testing.assert_allclose(trace.rounds[0].z_t, z, rtol=0, atol=1e-15)


def test_zero_learning_rate_keeps_targeting_the_state_average():
    cfg = RunConfig(m=10, T=6, seed=2, eta_schedule=EtaSchedule("constant", 0.0))
    trace = execute_batched(SimpleSubsampling(cfg), cfg)
    for record in trace.rounds:
        np.testing.assert_array_equal(record.z_t, record.s_prev)


def test_single_round_returns_the_first_batch_mean():
    cfg = RunConfig(m=12, T=1, seed=3)
    result = run_alg1(cfg)
    np.testing.assert_allclose(result.estimate, items_matrix(drawn(cfg, 1)).mean(axis=0))
    assert result.per_round_encoding_error == ()


def test_point_mass_is_recovered_exactly():
    cfg = RunConfig(m=8, T=10, seed=5, distribution=PointMass(theta=np.array([2.0])))
    result = run_alg1(cfg)
    assert result.estimate == (2.0,)
    assert result.squared_error == 0.0
    assert result.max_encoding_error == 0.0


def test_result_reports_engine_and_squared_error(scalar_cfg):
    result = run_alg1(scalar_cfg)
    assert (result.algorithm, result.engine, result.fallback_rounds) == ("alg1", "exact", 0)
    assert len(result.per_round_encoding_error) == scalar_cfg.T - 1
    assert result.squared_error == math.fsum(v * v for v in result.estimate)


def test_runs_replay_per_seed(scalar_cfg):
    assert run_alg1(scalar_cfg) == run_alg1(scalar_cfg)
    assert run_alg1(scalar_cfg) != run_alg1(scalar_cfg.with_seed(12))


def test_vector_mean_uses_the_exact_engine():
    cfg = RunConfig(m=16, T=5, d=3, seed=4, distribution=GaussianMean(theta=np.ones(3), cov=np.eye(3)))
    result = run_alg1(cfg)
    assert len(result.estimate) == 3
    assert result.engine == "exact"


def test_improved_variant_reduces_to_alg1_in_one_dimension(scalar_cfg):
    simple = run_alg1(scalar_cfg)
    improved = run_improved(scalar_cfg)
    assert improved.estimate == simple.estimate
    assert improved.per_round_encoding_error == simple.per_round_encoding_error


def test_improved_segments_stay_in_their_blocks():
    spec = ContaminatedUniformMean(theta=np.array([0.0, 1.0, -1.0, 2.0]))
    cfg = RunConfig(m=48, T=4, d=4, seed=8, distribution=spec)
    algorithm = PerCoordinateSubsampling(cfg)
    trace = execute_batched(algorithm, cfg)
    state = trace.final_state
    assert len(state.segments) == 4
    for i in range(4):
        offsets = [it.offset for it in state.segment(i)]
        assert offsets and all(12 * i + 6 <= o < 12 * (i + 1) for o in offsets)
        assert all(it.arrival_round == 4 for it in state.segment(i))
    assert len(trace.result.estimate) == 4


def test_improved_uses_mitm_for_long_scalar_blocks():
    cfg = RunConfig(m=120, T=2, d=2, seed=1, distribution=ContaminatedUniformMean(theta=np.zeros(2)))
    assert run_improved(cfg).engine == "mitm"


def test_baseline_is_the_latest_batch_mean(scalar_cfg):
    result = baseline_run(scalar_cfg)
    np.testing.assert_allclose(result.estimate, items_matrix(drawn(scalar_cfg, scalar_cfg.T)).mean(axis=0))
    assert result.algorithm == "baseline_mean"
    assert result.per_round_encoding_error == ()


def test_outlier_leaves_the_state_but_moves_the_estimate():
    report = outlier_persistence(m=12, rounds=20, outlier=50.0, seed=0)
    assert report.outlier_retained_after == 1
    assert report.rounds == tuple(range(1, 21))
    assert report.gaps[0] > 0
    assert any(gap != 0 for gap in report.gaps[1:])
    assert report.to_dict()["gap"] == list(report.gaps)


@pytest.mark.parametrize("seed", range(100))
def test_every_round_is_one_batch_recent(seed):
    cfg = RunConfig(m=8, T=5, seed=seed, distribution=CONTAMINATED)
    for algorithm in (SimpleSubsampling(cfg), KeepAll(cfg)):
        result = execute_batched(algorithm, cfg, check=True).result
        assert result.compliance_ok
        assert result.compliance.max_staleness == 1


def paired_errors(runner, cfg, seeds):
    return np.array([runner(cfg.with_seed(seed)).squared_error for seed in range(seeds)])


def stderr(values):
    return values.std(ddof=1) / math.sqrt(len(values))


@pytest.mark.slow
def test_subsampling_beats_keeping_the_batch():
    cfg = RunConfig(m=20, T=500, d=1, distribution=CONTAMINATED)
    ours = paired_errors(run_alg1, cfg, 200)
    baseline = paired_errors(baseline_run, cfg, 200)
    assert 0.03 <= baseline.mean() <= 0.08
    assert ours.mean() + 2 * stderr(ours) <= (baseline.mean() - 2 * stderr(baseline)) / 5


def coordinate_block_hook(spec, m, seed, i, block):
    """Feed a scalar run the coordinate-i values of block i of each d-dimensional batch."""
    def hook(t, batch):
        full = draw_batch(spec, m, round_rng(seed, t), t)
        return batch_of([it.values[i] for it in full[i * block:(i + 1) * block]], round_index=t)
    return hook


@pytest.mark.slow
def test_per_coordinate_error_adds_up():
    spec = ContaminatedUniformMean(theta=np.zeros(4), gamma=1.0, p=0.5, sigma=1.0)
    cfg = RunConfig(m=48, T=400, d=4, distribution=spec)
    seeds = 200
    improved = paired_errors(run_improved, cfg, seeds)
    baseline = paired_errors(baseline_run, cfg, seeds)

    scalar = np.empty((seeds, 4))
    for seed in range(seeds):
        scalar_cfg = RunConfig(m=12, T=400, d=1, seed=seed, distribution=CONTAMINATED)
        for i in range(4):
            hook = coordinate_block_hook(spec, cfg.m, seed, i, 12)
            trace = execute_batched(SimpleSubsampling(scalar_cfg), scalar_cfg, batch_hook=hook)
            scalar[seed, i] = trace.result.squared_error
    # each coordinate's block is an independent scalar run on 12-item batches
    np.testing.assert_allclose(improved, scalar.sum(axis=1), rtol=1e-12, atol=0)

    per_coordinate = scalar.ravel()
    gap = abs(improved.mean() - 4 * per_coordinate.mean())
    assert gap <= 2 * math.hypot(stderr(improved), 4 * stderr(per_coordinate))
    assert 3 * improved.mean() <= baseline.mean()


def test_improved_engines_agree():
    spec = ContaminatedUniformMean(theta=np.zeros(2))
    exact = run_improved(RunConfig(m=40, T=5, d=2, seed=6, distribution=spec))
    mitm = run_improved(RunConfig(m=40, T=5, d=2, seed=6, distribution=spec, engine="mitm"))
    assert (exact.engine, mitm.engine) == ("exact", "mitm")
    assert mitm.estimate == exact.estimate
    assert mitm.per_round_encoding_error == exact.per_round_encoding_error


@pytest.mark.parametrize(("m", "engine"), [(48, "exact"), (80, "mitm")])
def test_improved_recovers_a_point_mass_at_full_engine_budget(m, engine):
    cfg = RunConfig(m=m, T=2, d=1, seed=0, distribution=PointMass(theta=np.array([2.0])))
    trace = execute_batched(PerCoordinateSubsampling(cfg), cfg)
    assert trace.result.estimate == (2.0,)
    assert trace.result.engine == engine
    assert trace.rounds[0].chosen[0].indices == (1,)


@pytest.mark.parametrize("seed", range(100))
def test_improved_rounds_are_one_batch_recent(seed):
    cfg = RunConfig(m=8, T=5, d=2, seed=seed, distribution=ContaminatedUniformMean(theta=np.zeros(2)))
    result = run_improved(cfg, check_compliance=True)
    assert result.compliance_ok
    assert result.compliance.max_staleness == 1
