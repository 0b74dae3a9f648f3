"""Consensus-threshold group inference and the synthetic population."""

import numpy as np
import pytest
from scipy.special import ndtr

from pateprobe import (
    AttributeMetrics,
    Group,
    RealHistogram,
    SynthPopulationSpec,
    VoteHistogram,
    classify_by_consensus,
    evaluate,
    generate_population,
)


class TestClassify:
    def test_high_consensus_is_majority(self):
        assert classify_by_consensus(VoteHistogram((240, 10))) is Group.MAJORITY

    def test_low_consensus_is_minority(self):
        assert classify_by_consensus(VoteHistogram((100, 90, 60))) is Group.MINORITY

    def test_exact_threshold_is_minority(self):
        # consensus = 0.75 exactly; the comparison is strict.
        assert classify_by_consensus(VoteHistogram((75, 25)), tau=0.75) is Group.MINORITY

    def test_accepts_real_valued_histograms(self):
        est = RealHistogram((239.6, 5.2, 5.2))
        assert classify_by_consensus(est) is Group.MAJORITY

    def test_custom_threshold(self):
        h = VoteHistogram((150, 100))
        assert classify_by_consensus(h, tau=0.5) is Group.MAJORITY
        assert classify_by_consensus(h, tau=0.7) is Group.MINORITY

    def test_permutation_invariant(self):
        a = VoteHistogram((10, 40, 200))
        b = VoteHistogram((200, 10, 40))
        assert classify_by_consensus(a) is classify_by_consensus(b)

    def test_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            classify_by_consensus(VoteHistogram((1, 2)), tau=0.0)
        with pytest.raises(ValueError):
            classify_by_consensus(VoteHistogram((1, 2)), tau=1.0)


class TestEvaluate:
    def test_hand_computed_confusion_matrix(self):
        truths = {
            "a": Group.MINORITY,
            "b": Group.MINORITY,
            "c": Group.MAJORITY,
            "d": Group.MAJORITY,
        }
        preds = {
            "a": Group.MINORITY,  # tp
            "b": Group.MAJORITY,  # fn
            "c": Group.MINORITY,  # fp
            "d": Group.MAJORITY,  # tn
        }
        m = evaluate(preds, truths)
        assert (m.true_positives, m.false_positives) == (1, 1)
        assert (m.true_negatives, m.false_negatives) == (1, 1)
        assert m.precision == 0.5
        assert m.recall == 0.5
        assert m.accuracy == 0.5
        assert not m.degenerate_precision

    def test_degenerate_precision_flagged(self):
        truths = {"a": Group.MINORITY}
        preds = {"a": Group.MAJORITY}
        m = evaluate(preds, truths)
        assert m.precision == 0.0
        assert m.degenerate_precision

    def test_rejects_id_mismatch(self):
        with pytest.raises(ValueError):
            evaluate({"a": Group.MINORITY}, {"b": Group.MINORITY})

    def test_perfect_predictions(self):
        truths = {"a": Group.MINORITY, "b": Group.MAJORITY}
        m = evaluate(dict(truths), truths)
        assert m.precision == m.recall == m.accuracy == 1.0


class TestSpecValidation:
    def test_defaults_are_valid(self):
        spec = SynthPopulationSpec()
        assert spec.n_teachers == 250
        assert spec.minority_consensus_mean < spec.majority_consensus_mean

    def test_rejects_equal_or_inverted_means(self):
        with pytest.raises(ValueError):
            SynthPopulationSpec(
                majority_consensus_mean=0.7, minority_consensus_mean=0.7
            )
        with pytest.raises(ValueError):
            SynthPopulationSpec(
                majority_consensus_mean=0.5, minority_consensus_mean=0.9
            )

    def test_rejects_infeasible_means(self):
        with pytest.raises(ValueError):
            SynthPopulationSpec(minority_consensus_mean=0.05)

    def test_rejects_bad_fraction(self):
        with pytest.raises(ValueError):
            SynthPopulationSpec(minority_fraction=0.0)


class TestGeneratePopulation:
    def test_deterministic(self):
        spec = SynthPopulationSpec(seed=3)
        assert generate_population(spec, 40) == generate_population(spec, 40)

    def test_seed_matters(self):
        a = generate_population(SynthPopulationSpec(seed=1), 40)
        b = generate_population(SynthPopulationSpec(seed=2), 40)
        assert a != b

    def test_counts_and_structure(self):
        spec = SynthPopulationSpec(minority_fraction=0.3, seed=5)
        members = generate_population(spec, 50)
        assert len(members) == 50
        minority = [m for m in members if m.group is Group.MINORITY]
        assert len(minority) == 15  # round(0.3 * 50)
        assert len({m.id for m in members}) == 50
        for m in members:
            assert m.histogram.n_teachers == spec.n_teachers
            assert m.histogram.n_classes == spec.n_classes

    def test_rejects_empty_population(self):
        with pytest.raises(ValueError):
            generate_population(SynthPopulationSpec(), 0)

    def test_separated_groups_classify_cleanly(self):
        # Means 0.55 and 0.95 sit far on either side of tau=0.75, so the
        # threshold recovers the labels almost perfectly.
        members = generate_population(SynthPopulationSpec(seed=7), 300)
        preds = {m.id: classify_by_consensus(m.histogram) for m in members}
        truths = {m.id: m.group for m in members}
        metrics = evaluate(preds, truths)
        assert metrics.precision >= 0.95
        assert metrics.recall >= 0.95
        assert metrics.accuracy >= 0.95

    def test_overlapping_groups_give_chance_precision(self):
        # With both means essentially at the threshold the classifier
        # cannot beat the base rate, so precision sits near 1/2.
        spec = SynthPopulationSpec(
            majority_consensus_mean=0.7501,
            minority_consensus_mean=0.7499,
            spread=0.05,
            seed=9,
        )
        members = generate_population(spec, 400)
        preds = {m.id: classify_by_consensus(m.histogram) for m in members}
        truths = {m.id: m.group for m in members}
        metrics = evaluate(preds, truths)
        assert abs(metrics.precision - 0.5) < 0.15

    def test_misclassification_rates_match_gaussian_tails(self):
        # The generator draws each member's consensus from a Gaussian, so
        # the fraction of majority members falling below tau should match
        # the normal tail mass at (tau - mean)/spread, up to sampling
        # error and the 1/N vote rounding.
        spec = SynthPopulationSpec(
            majority_consensus_mean=0.80,
            minority_consensus_mean=0.70,
            spread=0.05,
            seed=13,
        )
        size = 2000
        members = generate_population(spec, size)
        tau = 0.75
        majority = [m for m in members if m.group is Group.MAJORITY]
        minority = [m for m in members if m.group is Group.MINORITY]
        maj_low = np.mean(
            [classify_by_consensus(m.histogram, tau) is Group.MINORITY for m in majority]
        )
        min_high = np.mean(
            [classify_by_consensus(m.histogram, tau) is Group.MAJORITY for m in minority]
        )
        expected = float(ndtr((tau - 0.80) / 0.05))  # = 1 - ndtr((tau-0.70)/0.05)
        se = np.sqrt(expected * (1 - expected) / len(majority))
        assert abs(maj_low - expected) < 4 * se + 0.02
        assert abs(min_high - expected) < 4 * se + 0.02


def test_metrics_dataclass_is_frozen():
    m = AttributeMetrics(
        precision=1.0,
        recall=1.0,
        accuracy=1.0,
        true_positives=1,
        false_positives=0,
        true_negatives=1,
        false_negatives=0,
    )
    with pytest.raises(AttributeError):
        m.precision = 0.5
