import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nfdp.gradcheck import run_gradcheck
from nfdp.learner import (
    Batch,
    KnowledgeMode,
    LossKind,
    MlpModel,
    TrainingDivergedError,
    TrainSpec,
    accuracy,
    forward,
    init_model,
    load_model,
    log_softmax,
    loss_and_grad,
    predict_knowledge,
    save_model,
    softmax,
    train,
)
from nfdp.rng import derive_stream


def stream(label="learner", seed=0):
    return derive_stream(seed, (label,))


class TestInit:
    def test_glorot_range(self):
        model = init_model((4, 3), stream())
        s = np.sqrt(6.0 / 7.0)
        assert np.all(np.abs(model.weights[0]) <= s)
        assert np.all(model.biases[0] == 0.0)

    def test_deterministic(self):
        a = init_model((5, 4, 3), stream())
        b = init_model((5, 4, 3), stream())
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_shape_chain(self):
        model = init_model((2, 5, 3), stream())
        assert model.weights[0].shape == (2, 5)
        assert model.weights[1].shape == (5, 3)
        assert model.biases[0].shape == (5,)
        assert model.biases[1].shape == (3,)

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            init_model((4,), stream())
        with pytest.raises(ValueError):
            init_model((4, 0, 2), stream())


class TestForward:
    def test_zero_model_gives_zero_logits(self):
        model = init_model((3, 4, 2), stream())
        for w in model.weights:
            w[:] = 0.0
        x = stream("x").normal_block(15).reshape(5, 3)
        np.testing.assert_array_equal(forward(model, x), np.zeros((5, 2)))

    def test_identity_single_layer(self):
        model = MlpModel((2, 2), [np.eye(2)], [np.zeros(2)])
        out = forward(model, np.array([[3.0, -1.0]]))
        np.testing.assert_array_equal(out, np.array([[3.0, -1.0]]))

    def test_matches_independent_reference(self):
        model = init_model((6, 8, 5, 3), stream("ref"))
        x = stream("refx").normal_block(4 * 6).reshape(4, 6)
        # independently coded reference: explicit per-layer loop
        a = x
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            z = a.dot(w) + b
            a = np.where(z > 0, z, 0.0) if i < len(model.weights) - 1 else z
        np.testing.assert_allclose(forward(model, x), a, rtol=0, atol=1e-12)

    def test_shape_mismatch(self):
        model = init_model((3, 2), stream())
        with pytest.raises(ValueError):
            forward(model, np.zeros((4, 5)))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.array([0.0, 0.0, 0.0])), np.full(3, 1 / 3))

    def test_no_overflow(self):
        p = softmax(np.array([[1000.0, 0.0]]))
        assert np.all(np.isfinite(p))
        assert p[0, 0] == pytest.approx(1.0)

    def test_closed_form(self):
        np.testing.assert_allclose(softmax(np.array([np.log(2.0), 0.0])), [2 / 3, 1 / 3], rtol=1e-15)

    @given(st.lists(st.floats(min_value=-700, max_value=700), min_size=2, max_size=10))
    @settings(max_examples=100)
    def test_rows_are_distributions_and_shift_invariant(self, row):
        z = np.array([row])
        p = softmax(z)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-9
        np.testing.assert_allclose(softmax(z + 3.7), p, atol=1e-12)


class TestLossAndGrad:
    def test_soft_ce_zero_grad_at_own_softmax(self):
        model = init_model((4, 5, 3), stream("sc"))
        x = stream("scx").normal_block(6 * 4).reshape(6, 4)
        q = softmax(forward(model, x))
        _, (gw, gb) = loss_and_grad(model, Batch(x, q, LossKind.SOFT_CROSS_ENTROPY), LossKind.SOFT_CROSS_ENTROPY)
        # dz = softmax - q = 0, so every gradient vanishes
        for g in gw + gb:
            np.testing.assert_allclose(g, 0.0, atol=1e-12)

    def test_logit_mse_fixed_point(self):
        model = init_model((4, 3), stream("mse"))
        x = stream("msex").normal_block(5 * 4).reshape(5, 4)
        targets = forward(model, x)
        value, (gw, gb) = loss_and_grad(model, Batch(x, targets, LossKind.LOGIT_MSE), LossKind.LOGIT_MSE)
        assert value == 0.0
        for g in gw + gb:
            np.testing.assert_array_equal(g, 0.0)

    def test_hard_ce_value(self):
        model = MlpModel((2, 2), [np.eye(2)], [np.zeros(2)])
        x = np.array([[1.0, 0.0]])
        y = np.array([0])
        value, _ = loss_and_grad(model, Batch(x, y, LossKind.HARD_CROSS_ENTROPY), LossKind.HARD_CROSS_ENTROPY)
        assert value == pytest.approx(-log_softmax(np.array([1.0, 0.0]))[0])

    def test_kind_mismatch_rejected(self):
        model = init_model((3, 2), stream())
        x = np.zeros((2, 3))
        batch = Batch(x, np.zeros((2, 2)), LossKind.LOGIT_MSE)
        with pytest.raises(ValueError):
            loss_and_grad(model, batch, LossKind.SOFT_CROSS_ENTROPY)

    def test_batch_validation(self):
        with pytest.raises(ValueError):
            Batch(np.zeros((2, 3)), np.array([[0.5, 0.6]] * 2), LossKind.SOFT_CROSS_ENTROPY)
        with pytest.raises(ValueError):
            Batch(np.zeros((2, 3)), np.zeros((3, 2)), LossKind.LOGIT_MSE)
        with pytest.raises(ValueError):
            Batch(np.zeros((2, 3)), np.array([0.0, 1.0]), LossKind.HARD_CROSS_ENTROPY)

    def test_hard_labels_out_of_range(self):
        model = init_model((3, 2), stream())
        batch = Batch(np.zeros((1, 3)), np.array([5]), LossKind.HARD_CROSS_ENTROPY)
        with pytest.raises(ValueError):
            loss_and_grad(model, batch, LossKind.HARD_CROSS_ENTROPY)


class TestGradientOracle:
    def test_finite_difference_sweep(self):
        report = run_gradcheck(trials=100, tolerance=1e-6, seed=0)
        assert report.passed, report.worst

    def test_impossible_tolerance_fails(self):
        report = run_gradcheck(trials=3, tolerance=0.0, seed=0)
        assert not report.passed

    def test_report_is_deterministic(self):
        a = run_gradcheck(trials=1, tolerance=1e-6, seed=7)
        b = run_gradcheck(trials=1, tolerance=1e-6, seed=7)
        assert a == b


class TestTrain:
    def _blob_batch(self, n=200, seed=3):
        s = derive_stream(seed, ("blobs",))
        half = n // 2
        x0 = s.normal_block(half * 2).reshape(half, 2) + np.array([3.0, 3.0])
        x1 = s.normal_block(half * 2).reshape(half, 2) + np.array([-3.0, -3.0])
        x = np.vstack([x0, x1])
        y = np.array([0] * half + [1] * half)
        return Batch(x, y, LossKind.HARD_CROSS_ENTROPY)

    def test_zero_learning_rate_is_noop(self):
        model = init_model((2, 4, 2), stream("lr0"))
        data = self._blob_batch()
        spec = TrainSpec(learning_rate=0.0, batch_size=32, epochs=3, loss=LossKind.HARD_CROSS_ENTROPY)
        trained, losses = train(model, data, spec, stream("lr0s"))
        for w0, w1 in zip(model.weights, trained.weights):
            np.testing.assert_array_equal(w0, w1)
        assert max(losses) - min(losses) < 1e-12

    def test_converges_on_separable_blobs(self):
        model = init_model((2, 8, 2), stream("conv"))
        data = self._blob_batch()
        spec = TrainSpec(learning_rate=0.05, batch_size=32, epochs=50, loss=LossKind.HARD_CROSS_ENTROPY)
        trained, losses = train(model, data, spec, stream("convs"))
        assert accuracy(trained, data.inputs, data.targets) >= 0.99
        assert losses[-1] < losses[0]

    def test_same_seed_bit_identical(self):
        data = self._blob_batch()
        spec = TrainSpec(learning_rate=0.05, batch_size=16, epochs=5, loss=LossKind.HARD_CROSS_ENTROPY)
        a, _ = train(init_model((2, 4, 2), stream("det")), data, spec, stream("dets"))
        b, _ = train(init_model((2, 4, 2), stream("det")), data, spec, stream("dets"))
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_partial_final_batch_kept(self):
        data = self._blob_batch(n=70)
        spec = TrainSpec(learning_rate=0.01, batch_size=32, epochs=1, loss=LossKind.HARD_CROSS_ENTROPY)
        model = init_model((2, 4, 2), stream("pb"))
        trained, _ = train(model, data, spec, stream("pbs"))
        # 70 = 32 + 32 + 6: three updates happen; weights must have moved
        assert any(np.any(w0 != w1) for w0, w1 in zip(model.weights, trained.weights))

    def test_empty_dataset_rejected(self):
        model = init_model((2, 2), stream())
        empty = Batch(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), LossKind.HARD_CROSS_ENTROPY)
        spec = TrainSpec(learning_rate=0.1, batch_size=4, epochs=1, loss=LossKind.HARD_CROSS_ENTROPY)
        with pytest.raises(ValueError):
            train(model, empty, spec, stream())

    def test_divergence_aborts_with_diagnostic(self):
        model = init_model((2, 4, 2), stream("dv"))
        x = stream("dvx").normal_block(16 * 2).reshape(16, 2) * 1e3
        data = Batch(x, x @ np.ones((2, 2)) * 1e150, LossKind.LOGIT_MSE)
        spec = TrainSpec(learning_rate=1e200, batch_size=16, epochs=5, loss=LossKind.LOGIT_MSE)
        with pytest.raises(TrainingDivergedError):
            train(model, data, spec, stream("dvs"))

    @pytest.mark.parametrize("loss", list(LossKind))
    def test_full_batch_loss_nonincreasing_small_lr(self, loss):
        s = derive_stream(1, ("mono", loss.value))
        model = init_model((3, 6, 4), s)
        x = s.normal_block(20 * 3).reshape(20, 3)
        if loss is LossKind.HARD_CROSS_ENTROPY:
            targets = s.integers_block(20, 4)
        elif loss is LossKind.SOFT_CROSS_ENTROPY:
            targets = softmax(s.normal_block(20 * 4).reshape(20, 4))
        else:
            targets = s.normal_block(20 * 4).reshape(20, 4)
        data = Batch(x, targets, loss)
        spec = TrainSpec(learning_rate=1e-3, batch_size=20, epochs=10, loss=loss)
        _, losses = train(model, data, spec, s)
        assert all(a >= b - 1e-12 for a, b in zip(losses, losses[1:]))


class TestPredictKnowledge:
    def test_argmax_tie_breaks_low(self):
        model = MlpModel((2, 2), [np.eye(2)], [np.zeros(2)])
        out = predict_knowledge(model, np.array([[2.0, 2.0]]), KnowledgeMode.ARGMAX)
        assert out[0] == 0

    def test_softmax_rows_normalized(self):
        model = init_model((3, 5, 4), stream("pk"))
        x = stream("pkx").normal_block(10 * 3).reshape(10, 3)
        p = predict_knowledge(model, x, KnowledgeMode.SOFTMAX)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(p >= 0)

    def test_logits_round_trips_forward(self):
        model = init_model((3, 4), stream("pk2"))
        x = stream("pk2x").normal_block(6 * 3).reshape(6, 3)
        np.testing.assert_array_equal(predict_knowledge(model, x, KnowledgeMode.LOGITS), forward(model, x))

    @given(scale=st.floats(min_value=0.1, max_value=50.0), shift=st.floats(min_value=-20, max_value=20))
    @settings(max_examples=50)
    def test_argmax_invariant_to_monotone_transform(self, scale, shift):
        model = init_model((3, 4), stream("pk3"))
        x = stream("pk3x").normal_block(8 * 3).reshape(8, 3)
        logits = forward(model, x)
        base = np.argmax(logits, axis=1)
        np.testing.assert_array_equal(np.argmax(scale * logits + shift, axis=1), base)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        model = init_model((4, 6, 3), stream("ckpt"))
        path = str(tmp_path / "model.bin")
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.layer_dims == model.layer_dims
        for a, b in zip(model.weights, loaded.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(model.biases, loaded.biases):
            np.testing.assert_array_equal(a, b)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE1234")
        with pytest.raises(ValueError):
            load_model(str(path))
