import numpy as np
import pytest

from anticipation import (
    NetworkConfig,
    backward,
    compute_loss,
    compute_targets,
    forward,
    init_params,
    load_params,
    mc_predict,
    sample_masks,
    save_params,
    train,
)
from anticipation.errors import NumericError
from anticipation.network import (
    Adam,
    loss_and_gradients,
    n_params,
    smooth_l1,
)
from anticipation.workflow import (
    FeatureSpec,
    PhaseSpec,
    SimConfig,
    TriggerRule,
    UsageRule,
    generate_dataset,
)


def tiny_config(**overrides):
    fields = dict(
        input_dim=3, instruments=2, hidden=5, encoder=(4,),
        dropout=0.25, horizon=3.0, lambda_cls=0.5, weight_decay=1e-3,
    )
    fields.update(overrides)
    return NetworkConfig(**fields)


def random_batch(rng, config, n=10):
    feats = rng.normal(size=(n, config.input_dim))
    remaining = rng.uniform(0, config.horizon, size=(n, config.instruments))
    classes = rng.integers(0, 3, size=(n, config.instruments)).astype(np.int8)
    return feats, remaining, classes


def finite_difference(loss_fn, params, eps=1e-5):
    grads = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        flat = value.ravel()
        gflat = g.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            fp = loss_fn()
            flat[idx] = orig - eps
            fm = loss_fn()
            flat[idx] = orig
            gflat[idx] = (fp - fm) / (2 * eps)
        grads[name] = g
    return grads


def max_relative_error(a, b, floor=1e-4):
    return max(
        float(np.max(np.abs(a[k] - b[k]) / np.maximum.reduce(
            [np.abs(a[k]), np.abs(b[k]), np.full_like(a[k], floor)]
        )))
        for k in a
    )


class TestInit:
    def test_deterministic(self):
        config = tiny_config()
        a = init_params(config, seed=9)
        b = init_params(config, seed=9)
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])

    def test_finite_and_bounded(self):
        params = init_params(tiny_config(), seed=1)
        for value in params.values():
            assert np.isfinite(value).all()
            assert np.abs(value).max() <= 1.0

    def test_forget_gate_bias_is_one(self):
        config = tiny_config(hidden=7)
        b = init_params(config, seed=0)["lstm_b"]
        np.testing.assert_array_equal(b[7:14], 1.0)
        assert (b[:7] == 0).all() and (b[14:] == 0).all()

    def test_fan_in_variance(self):
        """Uniform(-1/sqrt(fan), 1/sqrt(fan)) has variance 1/(3 fan)."""
        config = tiny_config(input_dim=50, encoder=(300,))
        w = init_params(config, seed=3)["enc0_W"]  # 15000 draws, fan_in 50
        expected = 1.0 / (3 * 50)
        assert abs(w.var() - expected) / expected < 0.1


class TestMasks:
    def test_zero_rate_all_ones(self):
        masks = sample_masks(tiny_config(dropout=0.0), seed=0)
        for m in (masks.encoder_input, masks.recurrent_input, masks.recurrent_hidden):
            np.testing.assert_array_equal(m, 1.0)

    def test_values_and_mean(self):
        config = tiny_config(input_dim=40000, dropout=0.2)
        masks = sample_masks(config, seed=1)
        m = masks.encoder_input
        assert set(np.unique(m)) <= {0.0, 1.25}
        se = np.sqrt(0.2 / 0.8 / m.size)
        assert abs(m.mean() - 1.0) < 3 * se

    def test_deterministic(self):
        config = tiny_config()
        a = sample_masks(config, seed=5)
        b = sample_masks(config, seed=5)
        np.testing.assert_array_equal(a.encoder_input, b.encoder_input)
        np.testing.assert_array_equal(a.recurrent_hidden, b.recurrent_hidden)


class TestForward:
    def test_prefix_invariance(self):
        """Causality: outputs over a prefix equal the prefix of the outputs."""
        rng = np.random.default_rng(0)
        for trial in range(10):
            config = tiny_config(phase_classes=int(rng.choice([0, 3])))
            params = init_params(config, seed=trial)
            masks = sample_masks(config, seed=trial + 100)
            feats = rng.normal(size=(30, config.input_dim))
            cut = int(rng.integers(1, 30))
            full, _ = forward(params, masks, feats, config)
            part, _ = forward(params, masks, feats[:cut], config)
            np.testing.assert_allclose(part.regression, full.regression[:cut], atol=1e-10)
            np.testing.assert_allclose(part.class_logits, full.class_logits[:cut], atol=1e-10)

    def test_zero_weight_net_outputs_head_bias(self):
        config = tiny_config(input_dim=1, instruments=1, hidden=1, encoder=(), dropout=0.0)
        params = {k: np.zeros_like(v) for k, v in init_params(config, seed=0).items()}
        params["reg_b"] = np.array([0.75])
        out, state = forward(params, sample_masks(config, 0), np.ones((6, 1)), config)
        np.testing.assert_array_equal(out.regression[:, 0], 0.75)
        np.testing.assert_array_equal(state[0], 0.0)

    def test_zero_dropout_equals_unmasked(self):
        config = tiny_config(dropout=0.0)
        params = init_params(config, seed=2)
        rng = np.random.default_rng(3)
        feats = rng.normal(size=(12, config.input_dim))
        a, _ = forward(params, sample_masks(config, 0), feats, config)
        b, _ = forward(params, sample_masks(config, 999), feats, config)
        np.testing.assert_array_equal(a.regression, b.regression)

    def test_window_split_equals_full_pass(self):
        """Carrying state across windows with the same masks reproduces the
        single-pass outputs (the mask set is constant through time)."""
        config = tiny_config()
        params = init_params(config, seed=4)
        masks = sample_masks(config, seed=5)
        rng = np.random.default_rng(6)
        feats = rng.normal(size=(25, config.input_dim))
        full, _ = forward(params, masks, feats, config)
        state = None
        chunks = []
        for start in range(0, 25, 8):
            out, state = forward(params, masks, feats[start:start + 8], config, state=state)
            chunks.append(out.regression)
        np.testing.assert_allclose(np.concatenate(chunks), full.regression, atol=1e-12)

    def test_dimension_mismatch(self):
        config = tiny_config()
        params = init_params(config, seed=0)
        masks = sample_masks(config, seed=0)
        with pytest.raises(ValueError, match="features"):
            forward(params, masks, np.zeros((5, config.input_dim + 1)), config)

    def test_scaled_sigmoid_range(self):
        config = tiny_config(output_mode="scaled_sigmoid")
        params = init_params(config, seed=1)
        out, _ = forward(params, sample_masks(config, 1),
                         np.random.default_rng(0).normal(size=(20, 3)) * 5, config)
        assert (out.regression > 0).all() and (out.regression < 3.0).all()


class TestLoss:
    def test_smooth_l1_values(self):
        np.testing.assert_allclose(smooth_l1(np.array([0.5, -0.5, 2.0])), [0.125, 0.125, 1.5])

    def test_single_frame_half_minute_error(self):
        config = tiny_config(instruments=1, lambda_cls=0.0, weight_decay=0.0)
        params = init_params(config, seed=0)
        out, _ = forward(params, sample_masks(config, 0), np.zeros((1, 3)), config)
        remaining = out.regression - 0.5
        total, terms = compute_loss(out, remaining, np.zeros((1, 1), dtype=np.int8),
                                    params, 0.0, 0.0)
        assert total == pytest.approx(0.125)
        assert terms["regression"] == pytest.approx(0.125)

    def test_perfect_fit_leaves_only_l2(self):
        config = tiny_config()
        params = init_params(config, seed=1)
        rng = np.random.default_rng(2)
        feats = rng.normal(size=(8, 3))
        out, _ = forward(params, sample_masks(config, 3), feats, config)
        classes = rng.integers(0, 3, size=(8, 2)).astype(np.int8)
        boosted = out.class_logits.copy()
        np.put_along_axis(boosted, classes[:, :, None].astype(np.int64), 50.0, axis=2)
        perfect = type(out)(regression=out.regression, class_logits=boosted, phase_logits=None)
        l2 = config.weight_decay * sum(float((v * v).sum()) for v in params.values())
        total, _ = compute_loss(perfect, out.regression, classes, params,
                                config.lambda_cls, config.weight_decay)
        assert total == pytest.approx(l2, abs=1e-6)

    def test_decomposition_and_nonnegativity(self):
        config = tiny_config(phase_classes=4)
        params = init_params(config, seed=5)
        rng = np.random.default_rng(6)
        feats, remaining, classes = random_batch(rng, config, n=15)
        phase = rng.integers(0, 4, size=15)
        out, _ = forward(params, sample_masks(config, 7), feats, config)
        total, terms = compute_loss(out, remaining, classes, params,
                                    config.lambda_cls, config.weight_decay,
                                    phase_labels=phase, lambda_phase=config.lambda_phase)
        assert total == pytest.approx(sum(terms.values()), rel=1e-15)
        assert all(v >= 0.0 for v in terms.values())
        assert set(terms) == {"regression", "classification", "l2", "phase"}

    def test_length_mismatch(self):
        config = tiny_config()
        params = init_params(config, seed=0)
        out, _ = forward(params, sample_masks(config, 0), np.zeros((4, 3)), config)
        with pytest.raises(ValueError):
            compute_loss(out, np.zeros((3, 2)), np.zeros((3, 2), dtype=np.int8),
                         params, 0.1, 0.0)


class TestGradients:
    def test_matches_finite_differences(self):
        """Randomized small nets, all parameters, central differences."""
        rng = np.random.default_rng(123)
        for trial in range(4):
            config = tiny_config(
                input_dim=int(rng.integers(2, 5)),
                instruments=int(rng.integers(1, 3)),
                hidden=int(rng.integers(3, 7)),
                encoder=tuple(int(rng.integers(3, 6)) for _ in range(int(rng.integers(0, 3)))),
                phase_classes=int(rng.choice([0, 3])),
                dropout=float(rng.choice([0.0, 0.3])),
                output_mode=str(rng.choice(["linear_clamped", "scaled_sigmoid"])),
            )
            params = init_params(config, seed=trial)
            masks = sample_masks(config, seed=trial + 50)
            n = int(rng.integers(4, 16))
            feats, remaining, classes = random_batch(rng, config, n=n)
            phase = rng.integers(0, 3, size=n) if config.phase_classes else None
            state = (rng.normal(size=config.hidden) * 0.2, rng.normal(size=config.hidden) * 0.2)

            _, _, grads, _ = loss_and_gradients(params, masks, feats, remaining, classes,
                                                config, phase_labels=phase, state=state)

            def loss_fn():
                out, _ = forward(params, masks, feats, config, state=state)
                total, _ = compute_loss(out, remaining, classes, params,
                                        config.lambda_cls, config.weight_decay,
                                        phase_labels=phase, lambda_phase=config.lambda_phase)
                return total

            fd = finite_difference(loss_fn, params)
            assert max_relative_error(grads, fd) < 1e-4

    def test_l2_only_gradient_is_exact(self):
        """With a perfect fit and zero class weight the gradient is 2*gamma*theta."""
        config = tiny_config(lambda_cls=0.0, weight_decay=1e-3)
        params = init_params(config, seed=8)
        rng = np.random.default_rng(9)
        feats = rng.normal(size=(6, 3))
        masks = sample_masks(config, seed=10)
        out, _ = forward(params, masks, feats, config)
        classes = np.zeros((6, 2), dtype=np.int8)
        grads = backward(params, masks, feats, out.regression, classes, config)
        for name in params:
            np.testing.assert_array_equal(grads[name], 2e-3 * params[name])

    def test_zero_gradient_at_perfect_fit_without_l2(self):
        config = tiny_config(lambda_cls=0.0, weight_decay=0.0)
        params = init_params(config, seed=11)
        feats = np.random.default_rng(12).normal(size=(5, 3))
        masks = sample_masks(config, seed=13)
        out, _ = forward(params, masks, feats, config)
        grads = backward(params, masks, feats, out.regression,
                         np.zeros((5, 2), dtype=np.int8), config)
        np.testing.assert_array_equal(grads["reg_W"], 0.0)
        np.testing.assert_array_equal(grads["reg_b"], 0.0)

    def test_non_finite_gradient_reported_with_name(self):
        config = tiny_config()
        params = init_params(config, seed=0)
        params["reg_W"][0, 0] = np.inf
        masks = sample_masks(config, seed=0)
        feats = np.ones((3, 3))
        with np.errstate(all="ignore"), pytest.raises(NumericError, match="non-finite gradient in parameter '\\w+"):
            backward(params, masks, feats, np.ones((3, 2)),
                     np.zeros((3, 2), dtype=np.int8), config)


class TestTraining:
    def _trigger_video(self, seed=0):
        config = SimConfig(
            instruments=2, phases=2, duration_mean=300.0, duration_std=0.0,
            phase_plan=(PhaseSpec(150.0), PhaseSpec(150.0)),
            usage_rules=(UsageRule(0, 0, 1.0, length_mean=20.0),
                         UsageRule(0, 1, 1.0, length_mean=20.0)),
            trigger_rules=(TriggerRule(0, 1, delay_mean=45.0, length_mean=12.0),),
            features=FeatureSpec(noise_std=0.02),
        )
        return generate_dataset(config, 1, seed=seed)[0]

    def test_single_video_overfit(self):
        """Fixed-seed smoke run: train wMAE well under 0.1 h after overfitting."""
        from anticipation.metrics import wmae

        video = self._trigger_video(seed=1)
        config = NetworkConfig(
            input_dim=video.feature_dim, instruments=2, hidden=24, encoder=(24,),
            dropout=0.1, horizon=3.0, lambda_cls=0.05, weight_decay=1e-6,
            learning_rate=4e-3, window=128, accum_steps=3, epochs=200, seed=0,
        )
        params, log = train([video], config)
        assert log[-1]["total"] < log[0]["total"]
        summary = mc_predict(params, config, video.features, samples=10, seed=0)
        targets = compute_targets(video, 3.0)
        scores = wmae(summary.reg_mean, targets.remaining, 3.0)
        assert np.nanmax(scores) < 0.3

    def test_training_is_deterministic(self):
        video = self._trigger_video(seed=2)
        config = NetworkConfig(
            input_dim=video.feature_dim, instruments=2, hidden=8, encoder=(8,),
            horizon=3.0, learning_rate=1e-3, epochs=2, seed=7,
        )
        a, log_a = train([video], config)
        b, log_b = train([video], config)
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])
        assert log_a == log_b

    def test_rejects_missing_features(self):
        from anticipation.workflow import ProcedureSequence

        seq = ProcedureSequence(id="x", presence=np.zeros((10, 2), dtype=bool))
        config = tiny_config()
        with pytest.raises(ValueError, match="features"):
            train([seq], config)

    def test_phase_head_training(self):
        video = self._trigger_video(seed=5)
        config = NetworkConfig(
            input_dim=video.feature_dim, instruments=2, hidden=8, encoder=(8,),
            phase_classes=2, horizon=3.0, learning_rate=1e-3, epochs=2, seed=0,
        )
        _, log = train([video], config)
        assert "phase" in log[0] and log[0]["phase"] >= 0.0

    def test_rejects_phase_labels_beyond_head(self):
        video = self._trigger_video(seed=5)  # phases 0 and 1
        config = NetworkConfig(
            input_dim=video.feature_dim, instruments=2, hidden=8, encoder=(8,),
            phase_classes=1, horizon=3.0, epochs=1,
        )
        with pytest.raises(ValueError, match="phase index"):
            train([video], config)

    def test_adam_moves_toward_minimum(self):
        params = {"w": np.array([5.0])}
        adam = Adam(params, lr=0.1)
        for _ in range(400):
            adam.step(params, {"w": 2.0 * params["w"]})
        assert abs(params["w"][0]) < 1e-3


class TestCheckpoints:
    def test_exact_round_trip(self, tmp_path):
        config = tiny_config(phase_classes=3)
        params = init_params(config, seed=21)
        path = str(tmp_path / "model.bin")
        save_params(params, path, config)
        again = load_params(path, config)
        assert list(again) == list(params)
        for k in params:
            np.testing.assert_array_equal(again[k], params[k])

    def test_config_hash_mismatch_rejected(self, tmp_path):
        config = tiny_config()
        params = init_params(config, seed=0)
        path = str(tmp_path / "model.bin")
        save_params(params, path, config)
        other = tiny_config(hidden=6)
        with pytest.raises(ValueError, match="different configuration"):
            load_params(path, other)

    def test_param_count(self):
        config = tiny_config(input_dim=2, instruments=1, hidden=2, encoder=())
        assert n_params(init_params(config, seed=0)) == (
            2 * 8 + 2 * 8 + 8   # lstm Wx, Wh, b
            + 2 * 1 + 1         # regression head
            + 2 * 3 + 3         # class head
        )
