import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latefuse.evaluation import (
    ClassCounts,
    EvalReport,
    SkillProfile,
    emit_report,
    evaluate,
    format_score_table,
    generate_synthetic_modality,
    micro_f1,
    per_class_counts,
    threshold_predictions,
    top_misclassified,
)


def brute_f1(pred, truth):
    tp = fp = fn = 0
    for p_row, t_row in zip(pred.tolist(), truth.tolist()):
        for p, t in zip(p_row, t_row):
            tp += p and t
            fp += p and not t
            fn += t and not p
    return 1.0 if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)


class TestThreshold:
    def test_boundary_inclusive(self):
        assert threshold_predictions(np.array([[0.5, 0.49]]), 0.5).tolist() == [[1, 0]]

    @pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
    def test_zeros(self, tau):
        assert threshold_predictions(np.zeros((2, 3)), tau).sum() == 0

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.2])
    def test_tau_range(self, tau):
        with pytest.raises(ValueError):
            threshold_predictions(np.zeros((1, 1)), tau)

    @given(arrays(np.float64, (4, 5), elements=st.floats(0, 1)), st.floats(0.01, 0.98), st.floats(0.001, 0.5))
    def test_monotone_in_tau(self, probs, tau, step):
        lo, hi = tau, min(tau + step, 0.99)
        assert np.all(threshold_predictions(probs, hi) <= threshold_predictions(probs, lo))


class TestMicroF1:
    truth = np.array([[1, 1, 0], [0, 0, 1]])

    def test_perfect(self):
        assert micro_f1(self.truth, self.truth) == 1.0

    def test_disjoint(self):
        assert micro_f1(1 - self.truth, self.truth) == 0.0

    def test_toy(self):
        pred = np.array([[1, 0, 0], [0, 1, 1]])
        assert micro_f1(pred, self.truth) == pytest.approx(4 / 6)

    def test_degenerate(self):
        assert micro_f1(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            micro_f1(np.zeros((2, 2)), np.zeros((2, 3)))

    @settings(max_examples=200)
    @given(st.data())
    def test_matches_brute_force(self, data):
        shape = (data.draw(st.integers(1, 12)), data.draw(st.integers(1, 8)))
        bits = arrays(np.int8, shape, elements=st.integers(0, 1))
        pred, truth = data.draw(bits), data.draw(bits)
        assert micro_f1(pred, truth) == brute_f1(pred, truth)
        perm = np.random.default_rng(0).permutation(shape[0])
        assert micro_f1(pred[perm], truth[perm]) == micro_f1(pred, truth)


class TestPerClass:
    def test_toy(self):
        counts = per_class_counts(np.array([[1], [0], [0]]), np.array([[1], [1], [0]]), ["a"])
        assert counts == [ClassCounts("a", tp=1, fp=0, fn=1)]
        assert counts[0].support == 2

    def test_perfect(self):
        truth = np.eye(3, dtype=int)
        assert all(c.fn == 0 for c in per_class_counts(truth, truth, "abc"))

    @given(arrays(np.int8, (6, 4), elements=st.integers(0, 1)), arrays(np.int8, (6, 4), elements=st.integers(0, 1)))
    def test_support_sums_to_assignments(self, pred, truth):
        counts = per_class_counts(pred, truth, "abcd")
        assert sum(c.tp + c.fn for c in counts) == truth.sum()


TOY = [ClassCounts("a", 1, 0, 9), ClassCounts("b", 5, 0, 5), ClassCounts("c", 90, 0, 10)]


class TestTopMisclassified:
    def test_ratio_sort(self):
        assert [c.cell() for c in top_misclassified(TOY, 2)] == ["a (9/10)", "b (5/10)"]

    def test_k_larger_than_classes(self):
        assert len(top_misclassified(TOY, 10)) == 3

    def test_zero_support_excluded(self):
        ranked = top_misclassified(TOY + [ClassCounts("z", 0, 4, 0)], 10)
        assert "z" not in [c.label for c in ranked]

    def test_ties_by_label(self):
        tied = [ClassCounts("b", 1, 0, 1), ClassCounts("a", 2, 0, 2)]
        assert [c.label for c in top_misclassified(tied, 2)] == ["a", "b"]


class TestEmitReport:
    def report(self, ranked):
        return EvalReport("toy", 0.6667, 0.5, tuple(TOY), tuple(ranked))

    @pytest.mark.parametrize("fmt, n_header", [("tsv", 2), ("markdown", 4)])
    def test_empty_table_header_only(self, fmt, n_header):
        assert len(emit_report(self.report([]), fmt).splitlines()) == n_header

    def test_toy_rows_in_order(self):
        ranked = top_misclassified(TOY, 2)
        tsv = emit_report(self.report(ranked), "tsv").splitlines()
        assert tsv[2:] == ["1\ta\t9\t10\t0.9000", "2\tb\t5\t10\t0.5000"]
        md = emit_report(self.report(ranked), "markdown").splitlines()
        assert md[4:] == ["| 1 | a (9/10) |", "| 2 | b (5/10) |"]

    def test_formats_agree_on_score(self):
        text = {fmt: emit_report(self.report(TOY), fmt) for fmt in ("tsv", "markdown")}
        assert "micro_f1=0.6667" in text["tsv"]
        assert "micro-F1 = 0.6667" in text["markdown"]

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report(self.report([]), "html")


def test_evaluate_end_to_end():
    probs = np.array([[0.9, 0.2, 0.1], [0.1, 0.7, 0.8]])
    truth = np.array([[1, 1, 0], [0, 0, 1]])
    report = evaluate("x", probs, truth, ["a", "b", "c"], tau=0.5, k=15)
    assert report.micro_f1 == pytest.approx(4 / 6)
    assert [c.label for c in report.ranked] == ["b", "a", "c"]


def test_score_table():
    table = format_score_table([("Image", 0.5), ("Max", 0.6543)])
    assert table.splitlines()[2:] == ["| Image | 50.0 |", "| Max | 65.4 |"]


class TestSynthetic:
    truth = (np.random.default_rng(0).random((1000, 10)) < 0.3).astype(np.int8)

    def test_saturated(self):
        m = generate_synthetic_modality(self.truth, SkillProfile(np.ones(10), 0.0), seed=1)
        np.testing.assert_array_equal(m.values, np.where(self.truth == 1, 0.99, 0.01))

    def test_coin_flip_matches_random_baseline(self):
        m = generate_synthetic_modality(self.truth, SkillProfile(np.full(10, 0.5), 0.5), seed=2)
        pred = threshold_predictions(m)
        # baseline: predictions independent of truth with the same positive rate
        rng = np.random.default_rng(3)
        baseline = (rng.random(self.truth.shape) < pred.mean()).astype(np.int8)
        assert abs(micro_f1(pred, self.truth) - micro_f1(baseline, self.truth)) <= 0.05

    def test_same_seed(self):
        profile = SkillProfile(np.linspace(0.5, 1, 10), 0.3)
        a = generate_synthetic_modality(self.truth, profile, seed=5, modality="x")
        b = generate_synthetic_modality(self.truth, profile, seed=5, modality="x")
        assert a.values.tobytes() == b.values.tobytes()
        c = generate_synthetic_modality(self.truth, profile, seed=5, modality="y")
        assert a.values.tobytes() != c.values.tobytes()

    def test_skill_sets_accuracy(self):
        skills = np.array([1.0, 0.9, 0.7, 0.5, 0.2, 1.0, 0.9, 0.7, 0.5, 0.2])
        m = generate_synthetic_modality(self.truth, SkillProfile(skills, 0.5), seed=6)
        accuracy = (threshold_predictions(m) == self.truth).mean(axis=0)
        np.testing.assert_allclose(accuracy, skills, atol=0.05)
        assert np.all(np.abs(m.values - 0.5) >= 0.01)

    def test_profile_size_mismatch(self):
        with pytest.raises(ValueError):
            generate_synthetic_modality(self.truth, SkillProfile(np.ones(3)), seed=0)

    def test_bad_profile(self):
        with pytest.raises(ValueError):
            SkillProfile(np.array([1.2]))
        with pytest.raises(ValueError):
            SkillProfile(np.array([0.5]), -1.0)
