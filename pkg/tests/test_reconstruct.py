"""Histogram reconstruction from repeated mechanism queries."""

import csv

import numpy as np
import pytest

from pateprobe import (
    InitMode,
    MonteCarloEstimate,
    NoiseSpec,
    OptimizerConfig,
    QuerySample,
    RealHistogram,
    StopMode,
    StopReason,
    VoteHistogram,
    estimate_distribution,
    l1_error,
    load_fixtures,
    loss,
    outcome_distribution,
    reconstruct,
    sample,
)

NEGATIVE_ONLY = OptimizerConfig(stop_mode=StopMode.NEGATIVE_ENTRY)


class TestEstimateDistribution:
    def test_frequencies_and_errors(self):
        labels = (0,) * 600 + (1,) * 300 + (2,) * 100
        s = QuerySample(labels=labels, counts=(600, 300, 100), m=1000)
        est = estimate_distribution(s)
        assert est.q_bar == (0.6, 0.3, 0.1)
        assert est.std_err[0] == pytest.approx(np.sqrt(0.6 * 0.4 / 1000))

    def test_round_trip_from_sampler(self):
        h = VoteHistogram((100, 90, 60))
        s = sample(h, NoiseSpec(sigma=40.0, seed=2), m=5000)
        est = estimate_distribution(s)
        assert sum(est.q_bar) == pytest.approx(1.0)
        assert est.m == 5000


class TestLoss:
    def test_zero_at_exact_match(self):
        h = VoteHistogram((100, 90, 60))
        target = outcome_distribution(h, 40.0)
        value, grad = loss(RealHistogram.from_array(h.as_array()), target, 40.0)
        assert value == 0.0
        np.testing.assert_array_equal(grad, np.zeros(3))

    def test_positive_away_from_target(self):
        target = outcome_distribution(VoteHistogram((100, 90, 60)), 40.0)
        value, _ = loss(RealHistogram((90.0, 100.0, 60.0)), target, 40.0)
        assert value > 0.0

    def test_shift_invariant(self):
        target = outcome_distribution(VoteHistogram((100, 90, 60)), 40.0)
        v0, _ = loss(RealHistogram((90.0, 100.0, 60.0)), target, 40.0)
        v1, _ = loss(RealHistogram((90.0 + 25, 100.0 + 25, 60.0 + 25)), target, 40.0)
        assert v1 == pytest.approx(v0, abs=1e-9)

    def test_gradient_matches_finite_differences(self):
        target = outcome_distribution(VoteHistogram((100, 90, 60)), 40.0)
        point = np.array([95.0, 85.0, 70.0])
        _, grad = loss(RealHistogram.from_array(point), target, 40.0)
        delta = 1e-4
        for j in range(3):
            bump = np.zeros(3)
            bump[j] = delta
            hi, _ = loss(RealHistogram.from_array(point + bump), target, 40.0)
            lo, _ = loss(RealHistogram.from_array(point - bump), target, 40.0)
            fd = (hi - lo) / (2 * delta)
            assert grad[j] == pytest.approx(fd, abs=1e-6)

    def test_gradient_sums_to_zero(self):
        # A level shift of the estimate never changes the loss, so the
        # gradient has no component along the all-ones direction.
        target = outcome_distribution(VoteHistogram((100, 90, 60)), 40.0)
        _, grad = loss(RealHistogram((95.0, 85.0, 70.0)), target, 40.0)
        assert abs(grad.sum()) < 1e-6 * np.max(np.abs(grad))

    def test_dimension_mismatch(self):
        target = outcome_distribution(VoteHistogram((100, 90, 60)), 40.0)
        with pytest.raises(ValueError):
            loss(RealHistogram((95.0, 85.0)), target, 40.0)


class TestReconstruct:
    def test_noiseless_target_recovers_fixture(self):
        # Feeding the model's own distribution back as the target removes
        # sampling noise entirely; inversion should land almost exactly.
        h = load_fixtures("mnist")[1]
        target = outcome_distribution(h, 40.0)
        res = reconstruct(target, 40.0, h.n_teachers, cfg=NEGATIVE_ONLY, truth=h)
        assert res.error is not None
        assert res.error <= 0.03
        assert res.stop_reason in (StopReason.NEGATIVE_ENTRY, StopReason.STALLED)

    def test_estimate_sums_to_teacher_count(self):
        h = VoteHistogram((100, 90, 60))
        s = sample(h, NoiseSpec(sigma=40.0, seed=4), m=10_000)
        res = reconstruct(estimate_distribution(s), 40.0, 250, cfg=NEGATIVE_ONLY)
        assert sum(res.estimate.values) == pytest.approx(250.0, abs=1e-6)

    def test_loss_threshold_mode_stops_above_floor(self):
        h = VoteHistogram((100, 90, 60))
        s = sample(h, NoiseSpec(sigma=40.0, seed=4), m=10_000)
        cfg = OptimizerConfig(stop_mode=StopMode.LOSS_THRESHOLD)
        res = reconstruct(estimate_distribution(s), 40.0, 250, cfg=cfg)
        assert res.stop_reason is StopReason.LOSS_THRESHOLD
        assert res.final_loss < cfg.loss_threshold

    def test_deterministic(self):
        h = VoteHistogram((100, 90, 60))
        s = sample(h, NoiseSpec(sigma=40.0, seed=4), m=10_000)
        est = estimate_distribution(s)
        a = reconstruct(est, 40.0, 250, cfg=NEGATIVE_ONLY, truth=h)
        b = reconstruct(est, 40.0, 250, cfg=NEGATIVE_ONLY, truth=h)
        assert a == b

    def test_trace_is_strictly_decreasing(self):
        h = VoteHistogram((100, 90, 60))
        s = sample(h, NoiseSpec(sigma=40.0, seed=4), m=10_000)
        res = reconstruct(estimate_distribution(s), 40.0, 250, cfg=NEGATIVE_ONLY)
        trace = np.asarray(res.loss_trace)
        assert np.all(np.diff(trace) < 0)

    def test_trace_file(self, tmp_path):
        h = VoteHistogram((100, 90, 60))
        s = sample(h, NoiseSpec(sigma=40.0, seed=4), m=10_000)
        path = tmp_path / "trace.csv"
        res = reconstruct(
            estimate_distribution(s), 40.0, 250, cfg=NEGATIVE_ONLY, trace_path=path
        )
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration", "loss", "lr_numerator"]
        # The file keeps every accepted iterate; the in-memory trace may
        # be thinned, so the file can only be at least as long.
        assert len(rows) - 1 >= len(res.loss_trace)
        assert float(rows[1][1]) == res.loss_trace[0]
        assert float(rows[-1][1]) == res.loss_trace[-1]

    def test_max_iters_cap(self):
        h = VoteHistogram((100, 90, 60))
        s = sample(h, NoiseSpec(sigma=40.0, seed=4), m=10_000)
        cfg = OptimizerConfig(stop_mode=StopMode.NEGATIVE_ENTRY, max_iters=3)
        res = reconstruct(estimate_distribution(s), 40.0, 250, cfg=cfg)
        assert res.stop_reason is StopReason.MAX_ITERS
        assert res.iterations == 3

    def test_uniform_init_also_converges(self):
        h = load_fixtures("mnist")[1]
        target = outcome_distribution(h, 40.0)
        cfg = OptimizerConfig(stop_mode=StopMode.NEGATIVE_ENTRY, init=InitMode.UNIFORM_N)
        res = reconstruct(target, 40.0, h.n_teachers, cfg=cfg, truth=h)
        assert res.error <= 0.03

    def test_error_requires_truth(self):
        h = VoteHistogram((100, 90, 60))
        s = sample(h, NoiseSpec(sigma=40.0, seed=4), m=10_000)
        res = reconstruct(estimate_distribution(s), 40.0, 250, cfg=NEGATIVE_ONLY)
        assert res.error is None

    def test_one_hot_truth_still_identifies_winner(self):
        # A unanimous vote saturates the answer distribution, so exact
        # counts are hopeless, but the winning class must still dominate.
        h = VoteHistogram((250, 0, 0))
        s = sample(h, NoiseSpec(sigma=40.0, seed=6), m=10_000)
        res = reconstruct(estimate_distribution(s), 40.0, 250, cfg=NEGATIVE_ONLY)
        assert int(np.argmax(res.estimate.values)) == 0

    def test_error_shrinks_with_more_queries(self):
        # Median over five seeds isolates the trend from sampling noise.
        h = load_fixtures("svhn")[7]
        errs = {}
        for m in (1_000, 100_000):
            per_seed = []
            for rep in range(5):
                s = sample(h, NoiseSpec(sigma=40.0, seed=rep), m=m)
                res = reconstruct(
                    estimate_distribution(s),
                    40.0,
                    h.n_teachers,
                    cfg=NEGATIVE_ONLY,
                    truth=h,
                )
                per_seed.append(res.error)
            errs[m] = float(np.median(per_seed))
        assert errs[100_000] < errs[1_000]

    def test_rejects_bad_teacher_count(self):
        target = outcome_distribution(VoteHistogram((100, 90, 60)), 40.0)
        with pytest.raises(ValueError):
            reconstruct(target, 40.0, 0)


def test_monte_carlo_estimate_as_array():
    est = MonteCarloEstimate(q_bar=(0.5, 0.5), m=10, std_err=(0.1, 0.1))
    np.testing.assert_array_equal(est.as_array(), [0.5, 0.5])


def test_reconstruction_error_uses_l1_metric():
    h = VoteHistogram((240, 10))
    est = RealHistogram((250.0, 0.0))
    assert l1_error(h, est) == pytest.approx(0.04)
