import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latefuse.fusion import (
    AlignmentError,
    PolicyNetworkSpec,
    RidgeModel,
    SingularSystemError,
    align,
    apply_policy_network,
    apply_ridge,
    bimodal_policy_spec,
    build_policy_network,
    fuse_max,
    fuse_mean,
    load_fusion_model,
    ridge_scores,
    save_fusion_model,
    train_policy_network,
    train_ridge,
    trimodal_policy_spec,
)
from latefuse.matrix import PredictionMatrix
from latefuse.nn_engine import TrainConfig


def pm(values, ids=None, name="m"):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    ids = ids or [f"r{i}" for i in range(len(values))]
    return PredictionMatrix(name, tuple(ids), values)


def ridge_oracle(X, y, alpha):
    """Least squares on the stacked system [X; sqrt(alpha) I] w = [y; 0]."""
    d = X.shape[1]
    A = np.vstack([X, np.sqrt(alpha) * np.eye(d)])
    b = np.vstack([y, np.zeros((d, y.shape[1]))])
    return np.linalg.lstsq(A, b, rcond=None)[0]


class TestAlign:
    def test_intersection(self):
        a = pm(np.zeros((3, 2)), ["a", "b", "c"], "x")
        b = pm(np.ones((3, 2)), ["d", "c", "b"], "y")
        (a2, b2), dropped = align([a, b])
        assert a2.ids == b2.ids == ("b", "c")
        assert dropped == {"x": ["a"], "y": ["d"]}
        np.testing.assert_array_equal(b2.values, np.ones((2, 2)))

    def test_identical(self):
        a = pm(np.eye(2), ["a", "b"])
        (a2, b2), dropped = align([a, pm(np.eye(2)[::-1], ["b", "a"], "y")])
        assert a2.ids == ("a", "b")
        np.testing.assert_array_equal(b2.values, np.eye(2))
        assert dropped == {"m": [], "y": []}

    def test_disjoint(self):
        with pytest.raises(AlignmentError):
            align([pm([[0.1]], ["a"]), pm([[0.1]], ["b"], "y")])

    def test_needs_two(self):
        with pytest.raises(AlignmentError):
            align([pm([[0.1]])])


TRIPLE = [pm([[0.2, 0.9]], name="a"), pm([[0.7, 0.1]], name="b"), pm([[0.5, 0.5]], name="c")]


class TestStaticPolicies:
    def test_max_example(self):
        np.testing.assert_array_equal(fuse_max(TRIPLE).values, [[0.7, 0.9]])

    def test_mean_example(self):
        np.testing.assert_allclose(fuse_mean(TRIPLE).values, [[(0.2 + 0.7 + 0.5) / 3, 0.5]], rtol=1e-15)
        assert fuse_mean(TRIPLE).values[0, 0] == pytest.approx(0.4667, abs=1e-4)

    def test_identical_inputs(self):
        x = pm(np.random.default_rng(0).random((5, 4)))
        for policy in (fuse_max, fuse_mean):
            np.testing.assert_array_equal(policy([x, x, x]).values, x.values)

    def test_max_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            mats = [pm(rng.random((3, 4)), name=str(i)) for i in range(3)]
            out = fuse_max(mats).values
            for r in range(3):
                for c in range(4):
                    best = mats[0].values[r, c]
                    for m in mats[1:]:
                        if m.values[r, c] > best:
                            best = m.values[r, c]
                    assert out[r, c] == best

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            fuse_max([pm(np.zeros((2, 2))), pm(np.zeros((2, 3)))])

    def test_unaligned(self):
        with pytest.raises(AlignmentError):
            fuse_mean([pm([[0.1]], ["a"]), pm([[0.1]], ["b"])])

    @given(arrays(np.float64, (3, 4, 5), elements=st.floats(0, 1)), st.permutations(range(3)))
    def test_permutation_and_bounds(self, stack, perm):
        mats = [pm(stack[i], name=str(i)) for i in range(3)]
        shuffled = [mats[i] for i in perm]
        for policy in (fuse_max, fuse_mean):
            assert policy(mats).values.tobytes() == policy(shuffled).values.tobytes()
        mean, mx = fuse_mean(mats).values, fuse_max(mats).values
        assert np.all(stack.min(axis=0) <= mean)
        assert np.all(mean <= mx)
        assert np.all(mx == stack.max(axis=0))


class TestRidge:
    def test_one_feature_exact(self):
        model = train_ridge([pm([[0.5], [1.0]], name="a")], np.array([[0.5], [1.0]]), alpha=0.0)
        assert model.weights[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_huge_alpha_shrinks(self):
        rng = np.random.default_rng(0)
        mats = [pm(rng.random((30, 3)), name=str(i)) for i in range(2)]
        model = train_ridge(mats, rng.integers(0, 2, (30, 3)), alpha=1e9)
        assert np.abs(model.weights).max() < 1e-6

    def test_random_system_matches_oracle(self):
        rng = np.random.default_rng(7)
        mats = [pm(rng.random((20, 3)), name=str(i)) for i in range(2)]
        y = rng.integers(0, 2, (20, 3)).astype(float)
        model = train_ridge(mats, y, alpha=0.1)
        X = np.hstack([m.values for m in mats])
        np.testing.assert_allclose(model.weights, ridge_oracle(X, y, 0.1), atol=1e-8)
        residual = (X.T @ X + 0.1 * np.eye(6)) @ model.weights - X.T @ y
        assert np.abs(residual).max() < 1e-8

    def test_singular_without_alpha(self):
        col = np.random.default_rng(0).random((6, 1))
        mats = [pm(np.hstack([col, col]), name="a"), pm(np.hstack([col, col]), name="b")]
        with pytest.raises(SingularSystemError):
            train_ridge(mats, np.ones((6, 2)), alpha=0.0)

    def test_hand_built_mean(self):
        rng = np.random.default_rng(3)
        mats = [pm(rng.random((5, 4)), name=str(i)) for i in range(2)]
        W = np.vstack([np.eye(4) / 2, np.eye(4) / 2])
        out = apply_ridge(RidgeModel(W, 0.0, 2, 4), mats)
        np.testing.assert_allclose(out.values, fuse_mean(mats).values, atol=1e-15)

    def test_consistent_system_refit(self):
        rng = np.random.default_rng(4)
        mats = [pm(rng.random((10, 2)), name=str(i)) for i in range(2)]
        X = np.hstack([m.values for m in mats])
        y = X @ rng.normal(size=(4, 2))
        model = train_ridge(mats, y, alpha=0.0)
        np.testing.assert_allclose(ridge_scores(model, mats), y, atol=1e-8)

    def test_clamped_output(self):
        mats = [pm(np.random.default_rng(5).random((8, 2)), name=str(i)) for i in range(2)]
        W = np.random.default_rng(6).normal(scale=5, size=(4, 2))
        out = apply_ridge(RidgeModel(W, 1.0, 2, 2), mats).values
        assert out.min() >= 0.0 and out.max() <= 1.0
        assert {0.0, 1.0} <= set(out.ravel())

    def test_intercept_flag(self):
        rng = np.random.default_rng(8)
        mats = [pm(rng.random((40, 2)), name=str(i)) for i in range(2)]
        y = np.full((40, 2), 0.3)
        model = train_ridge(mats, y, alpha=1.0, fit_intercept=True)
        assert model.weights.shape == (5, 2)
        np.testing.assert_allclose(ridge_scores(model, mats), y, atol=1e-2)

    def test_arity_mismatch(self):
        mats = [pm(np.zeros((2, 2)), name=str(i)) for i in range(3)]
        with pytest.raises(ValueError):
            ridge_scores(RidgeModel(np.zeros((4, 2)), 1.0, 2, 2), mats)


class TestPolicySpecs:
    def test_bimodal(self):
        spec = bimodal_policy_spec(122)
        assert spec.sizes == (200, 150, 122)
        assert spec.activations == ("sigmoid",) * 3
        assert spec.arity == 2
        assert bimodal_policy_spec(5).sizes[-1] == 5

    def test_trimodal(self):
        spec = trimodal_policy_spec(122)
        assert spec.activations == ("sigmoid", "tanh", "sigmoid")
        assert len(spec.sizes) == 3
        assert spec.sizes[:2] == (200, 150)
        assert spec.arity == 3

    def test_output_must_be_sigmoid(self):
        with pytest.raises(ValueError):
            PolicyNetworkSpec(2, (4, 3), ("sigmoid", "tanh"))


def _three(rng, n=60, L=4):
    return [pm(rng.random((n, L)), [f"p{i}" for i in range(n)], str(k)) for k in range(3)]


class TestPolicyNetwork:
    def test_untrained_outputs_near_half(self):
        rng = np.random.default_rng(0)
        mats = _three(rng)
        model = train_policy_network(trimodal_policy_spec(4), mats, rng.integers(0, 2, (60, 4)), TrainConfig(epochs=0))
        out = apply_policy_network(model, mats).values
        logits = np.log(out / (1 - out))
        assert np.abs(logits).max() < 2.0

    def test_same_seed_same_weights(self):
        rng = np.random.default_rng(1)
        mats, y = _three(rng), rng.integers(0, 2, (60, 4))
        cfg = TrainConfig(epochs=3, batch_size=16, seed=4)
        a = train_policy_network(trimodal_policy_spec(4, (8, 6)), mats, y, cfg)
        b = train_policy_network(trimodal_policy_spec(4, (8, 6)), mats, y, cfg)
        for (_, p), (_, q) in zip(a.network.named_params(), b.network.named_params()):
            assert p.tobytes() == q.tobytes()

    def test_inputs_not_mutated(self):
        rng = np.random.default_rng(2)
        mats, y = _three(rng), rng.integers(0, 2, (60, 4))
        before = [m.values.copy() for m in mats]
        y_before = y.copy()
        train_policy_network(trimodal_policy_spec(4, (8, 6)), mats, y, TrainConfig(epochs=2))
        for m, b in zip(mats, before):
            np.testing.assert_array_equal(m.values, b)
        np.testing.assert_array_equal(y, y_before)

    def test_row_independence(self):
        rng = np.random.default_rng(3)
        mats = _three(rng, n=10)
        model = build_policy_network(trimodal_policy_spec(4, (8, 6)), seed=0)
        out = apply_policy_network(model, mats).values
        assert np.all((out > 0) & (out < 1))
        perm = rng.permutation(10)
        permuted = [PredictionMatrix(m.modality, tuple(np.array(m.ids)[perm]), m.values[perm]) for m in mats]
        np.testing.assert_array_equal(apply_policy_network(model, permuted).values, out[perm])
        dup = [PredictionMatrix(m.modality, ("a", "b"), m.values[[0, 0]]) for m in mats]
        dup_out = apply_policy_network(model, dup).values
        np.testing.assert_array_equal(dup_out[0], dup_out[1])

    def test_arity_mismatch(self):
        rng = np.random.default_rng(4)
        model = build_policy_network(trimodal_policy_spec(4, (8, 6)), seed=0)
        with pytest.raises(ValueError):
            apply_policy_network(model, _three(rng)[:2])


def test_fusion_models_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    mats = _three(rng, n=30)
    y = rng.integers(0, 2, (30, 4))
    ridge = train_ridge(mats, y, alpha=0.5)
    save_fusion_model(tmp_path / "r.model", ridge)
    back, manifest = load_fusion_model(tmp_path / "r.model")
    assert manifest["model"] == "ridge"
    np.testing.assert_array_equal(back.weights, ridge.weights)
    assert back.alpha == 0.5

    mlp = train_policy_network(trimodal_policy_spec(4, (6, 5)), mats, y, TrainConfig(epochs=1))
    save_fusion_model(tmp_path / "m.model", mlp)
    back, manifest = load_fusion_model(tmp_path / "m.model")
    assert manifest["activations"] == ["sigmoid", "tanh", "sigmoid"]
    np.testing.assert_array_equal(apply_policy_network(back, mats).values, apply_policy_network(mlp, mats).values)
