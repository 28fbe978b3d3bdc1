import math

import numpy as np
import pytest

from emoface.diffusion import (
    Conditioning,
    DenoiserConfig,
    DenoiserWeights,
    NoiseSchedule,
    OptimizerState,
    TrainStepConfig,
    adamw_update,
    build_schedule,
    cosine_lr,
    denoiser_forward,
    posterior_coefficients,
    prepare_sample,
    q_sample,
    sample,
    sample_loss_t,
    training_step,
)
from emoface.losses import LossWeights, TrainMode
from emoface.numerics import ParamStore, grad_check

# Hand-evaluated posterior values for the beta=(0.1, 0.2) schedule at t=1
# (recorded before the build): ab = (0.9, 0.72).
POST_C_X0 = 0.6776309271789384
POST_C_XT = 0.31943828249996996
POST_VAR = 0.07142857142857142

# Hand-executed AdamW step: w=1, g=1, lr=1e-4, wd=1e-5 (recorded before the build).
ADAMW_ONE_STEP = 0.999899999001


class TestSchedule:
    def test_analytic_two_step(self):
        with pytest.warns(UserWarning, match="coarse"):
            s = build_schedule(2, 0.1, 0.2)
        assert np.allclose(s.beta, [0.1, 0.2], atol=1e-15)
        assert np.allclose(s.alpha_bar, [0.9, 0.72], atol=1e-15)

    def test_alpha_bar_strictly_decreasing(self):
        s = build_schedule(50, 1e-4, 0.02)
        assert np.all(np.diff(s.alpha_bar) < 0)
        assert s.alpha_bar[0] > 0.99

    def test_loop_product_oracle(self):
        s = build_schedule(37, 3e-4, 0.015)
        prod = 1.0
        for t in range(37):
            prod *= 1.0 - s.beta[t]
            assert abs(s.alpha_bar[t] - prod) <= 1e-15

    def test_preconditions(self):
        with pytest.raises(ValueError):
            build_schedule(1, 0.1, 0.2)
        with pytest.raises(ValueError):
            build_schedule(10, 0.0, 0.2)
        with pytest.raises(ValueError):
            build_schedule(10, 0.3, 0.2)
        with pytest.raises(ValueError):
            build_schedule(10, 0.5, 1.0)


class TestQSample:
    def test_zero_noise(self):
        s = build_schedule(10, 1e-3, 0.1)
        x0 = np.random.default_rng(0).standard_normal((4, 3))
        out = q_sample(x0, 4, np.zeros_like(x0), s)
        assert np.max(np.abs(out - math.sqrt(s.alpha_bar[4]) * x0)) == 0.0

    def test_injected_unit_alpha_bar(self):
        s = NoiseSchedule(beta=np.array([0.0, 0.1]), alpha=np.array([1.0, 0.9]),
                          alpha_bar=np.array([1.0, 0.9]))
        x0 = np.random.default_rng(1).standard_normal((2, 2))
        eps = np.random.default_rng(2).standard_normal((2, 2))
        assert np.array_equal(q_sample(x0, 0, eps, s), x0)

    def test_out_of_range(self):
        s = build_schedule(5, 1e-3, 0.1)
        with pytest.raises(IndexError):
            q_sample(np.zeros((1, 1)), 5, np.zeros((1, 1)), s)

    def test_monte_carlo_variance(self):
        s = build_schedule(20, 1e-3, 0.05)
        t = 12
        rng = np.random.default_rng(3)
        draws = np.stack([q_sample(np.zeros((2, 2)), t, rng.standard_normal((2, 2)), s)
                          for _ in range(10000)])
        target = 1.0 - s.alpha_bar[t]
        emp = draws.var(axis=0)
        assert np.all(np.abs(emp - target) <= 0.05 * target)


@pytest.fixture()
def small_weights():
    cfg = DenoiserConfig(d_param=6, d_audio=3, d_emotion=5, n_identity=2,
                         d_model=8, n_heads=2, ff_hidden=12, time_dim=4, time_hidden=6, seed=2)
    return DenoiserWeights(cfg)


def small_cond(rng, frames=5):
    return Conditioning(audio=rng.standard_normal((frames, 3)),
                        emotion=rng.standard_normal(5),
                        identity=rng.standard_normal(2))


class TestDenoiser:
    def test_output_shape(self, small_weights):
        rng = np.random.default_rng(0)
        out = denoiser_forward(small_weights, rng.standard_normal((5, 6)), 3, small_cond(rng))
        assert out.shape == (5, 6)

    def test_zero_init_output_gate(self, small_weights):
        rng = np.random.default_rng(1)
        cond = small_cond(rng)
        x = rng.standard_normal((5, 6))
        out = denoiser_forward(small_weights, x, 2, cond).value
        assert np.array_equal(out, np.zeros((5, 6)))
        doubled = Conditioning(audio=cond.audio, emotion=2.0 * cond.emotion, identity=cond.identity)
        out2 = denoiser_forward(small_weights, x, 2, doubled).value
        assert np.array_equal(out2, np.zeros((5, 6)))

    def test_attention_rows_sum_to_one(self, small_weights):
        rng = np.random.default_rng(2)
        _, attn_maps = denoiser_forward(
            small_weights, rng.standard_normal((5, 6)), 1, small_cond(rng), return_attn=True
        )
        assert len(attn_maps) == 2  # one map per head
        for attn in attn_maps:
            assert attn.shape == (5, 2)
            assert np.max(np.abs(attn.sum(axis=1) - 1.0)) <= 1e-12
            assert np.all(attn >= 0)

    def test_shape_validation(self, small_weights):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            denoiser_forward(small_weights, rng.standard_normal((5, 7)), 0, small_cond(rng))
        with pytest.raises(ValueError, match="audio frame count"):
            denoiser_forward(small_weights, rng.standard_normal((5, 6)), 0, small_cond(rng, frames=4))


class TestAdamW:
    def test_zero_grad_no_decay_keeps_params(self):
        store = ParamStore()
        w = store.add("w", np.array([1.0, -2.0]))
        opt = OptimizerState(store)
        adamw_update(store, opt, lr=1e-2, weight_decay=0.0)
        assert np.array_equal(w.value, [1.0, -2.0])

    def test_zero_grad_pure_decay(self):
        store = ParamStore()
        w = store.add("w", np.array([1.0, -2.0]))
        opt = OptimizerState(store)
        lr, wd = 1e-2, 0.1
        adamw_update(store, opt, lr=lr, weight_decay=wd)
        assert np.max(np.abs(w.value - np.array([1.0, -2.0]) * (1 - lr * wd))) <= 1e-15

    def test_hand_executed_single_step(self):
        store = ParamStore()
        w = store.add("w", np.array([1.0]))
        w.grad[...] = 1.0
        opt = OptimizerState(store)
        adamw_update(store, opt, lr=1e-4, weight_decay=1e-5)
        assert abs(w.value[0] - ADAMW_ONE_STEP) <= 1e-15
        # independent re-execution of the update equations
        m = 0.1 * 1.0
        v = 0.001 * 1.0
        m_hat = m / (1 - 0.9)
        v_hat = v / (1 - 0.999)
        expected = 1.0 - 1e-4 * (m_hat / (math.sqrt(v_hat) + 1e-8) + 1e-5 * 1.0)
        assert abs(w.value[0] - expected) <= 1e-15

    def test_nonfinite_gradient_names_parameter(self):
        store = ParamStore()
        w = store.add("bad", np.array([1.0]))
        w.grad[...] = np.nan
        with pytest.raises(ValueError, match="bad"):
            adamw_update(store, OptimizerState(store), lr=1e-3)


class TestCosineLr:
    def test_endpoints_and_midpoint(self):
        assert cosine_lr(0, 100, 3e-4) == 3e-4
        assert abs(cosine_lr(100, 100, 3e-4)) <= 1e-19
        assert abs(cosine_lr(50, 100, 3e-4) - 1.5e-4) <= 1e-19

    def test_validation(self):
        with pytest.raises(ValueError):
            cosine_lr(5, 4, 1e-3)
        with pytest.raises(ValueError):
            cosine_lr(0, 0, 1e-3)


class TestPosteriorAndSampler:
    def test_posterior_coefficients_hand_values(self):
        with pytest.warns(UserWarning):
            s = build_schedule(2, 0.1, 0.2)
        c_x0, c_xt, var = posterior_coefficients(s, 1)
        assert abs(c_x0 - POST_C_X0) <= 1e-15
        assert abs(c_xt - POST_C_XT) <= 1e-15
        assert abs(var - POST_VAR) <= 1e-15

    def test_final_step_collapses_to_x0(self):
        with pytest.warns(UserWarning):
            s = build_schedule(2, 0.1, 0.2)
        c_x0, c_xt, var = posterior_coefficients(s, 0)
        assert abs(c_x0 - 1.0) <= 1e-12
        assert abs(c_xt) <= 1e-15 and abs(var) <= 1e-15

    def test_deterministic_sampling_reproducible(self, small_weights):
        rng_c = np.random.default_rng(4)
        cond = small_cond(rng_c)
        s = build_schedule(12, 1e-3, 0.05)
        out1 = sample(small_weights, cond, s, np.random.default_rng(9), mode="deterministic")
        out2 = sample(small_weights, cond, s, np.random.default_rng(9), mode="deterministic")
        assert np.array_equal(out1, out2)
        out3 = sample(small_weights, cond, s, np.random.default_rng(9), mode="ancestral")
        out4 = sample(small_weights, cond, s, np.random.default_rng(9), mode="ancestral")
        assert np.array_equal(out3, out4)

    def test_constant_denoiser_fixed_point(self, small_weights):
        # zero every weight, then set the output bias: the network output is
        # the constant row x* for every frame and timestep
        rng = np.random.default_rng(5)
        x_star_row = rng.standard_normal(6)
        for _, t in small_weights.store.items():
            t.value[...] = 0.0
        small_weights.out_b.value[...] = x_star_row[None, :]
        s = build_schedule(30, 1e-4, 0.02)
        out = sample(small_weights, small_cond(rng), s, np.random.default_rng(0), mode="deterministic")
        expected = np.tile(x_star_row, (5, 1))
        assert np.max(np.abs(out - expected)) <= 1e-6

    def test_unknown_mode(self, small_weights):
        with pytest.raises(ValueError, match="unknown sampling mode"):
            sample(small_weights, small_cond(np.random.default_rng(1)),
                   build_schedule(5, 1e-3, 0.05), np.random.default_rng(0), mode="turbo")


def make_training_setup(tiny_model, tiny_synth_cfg, tiny_samples, tiny_dictionary, tiny_networks,
                        dual=True, weights=None):
    store, w, mapping = tiny_networks
    cfg = TrainStepConfig(
        weights=weights or LossWeights(),
        dual_train=dual,
        mapping=mapping,
        model=tiny_model,
        dictionary=tiny_dictionary,
    )
    prepared = [prepare_sample(tiny_model, s.params_gt, s.audio, s.e_gt, s.mask)
                for s in tiny_samples]
    return store, w, cfg, prepared


class TestTrainingStep:
    def test_dual_train_off_all_original(self, tiny_model, tiny_synth_cfg, tiny_samples,
                                         tiny_dictionary, tiny_networks, tiny_schedule):
        store, w, cfg, prepared = make_training_setup(
            tiny_model, tiny_synth_cfg, tiny_samples, tiny_dictionary, tiny_networks, dual=False
        )
        opt = OptimizerState(store)
        rng = np.random.default_rng(0)
        for _ in range(20):
            res = training_step(w, opt, prepared[:3], tiny_schedule, rng, cfg, lr=1e-4)
            assert res.mode_counts["edited"] == 0
            assert res.mode_counts["original"] == 3

    def test_dual_train_mixes_modes(self, tiny_model, tiny_synth_cfg, tiny_samples,
                                    tiny_dictionary, tiny_networks, tiny_schedule):
        store, w, cfg, prepared = make_training_setup(
            tiny_model, tiny_synth_cfg, tiny_samples, tiny_dictionary, tiny_networks
        )
        opt = OptimizerState(store)
        rng = np.random.default_rng(0)
        counts = {"original": 0, "edited": 0}
        for _ in range(30):
            res = training_step(w, opt, prepared[:4], tiny_schedule, rng, cfg, lr=1e-4)
            for k, v in res.mode_counts.items():
                counts[k] += v
        assert counts["edited"] > 0 and counts["original"] > 0

    def test_zero_emo_weight_edited_mode_zero_grads(self, tiny_model, tiny_synth_cfg,
                                                    tiny_samples, tiny_dictionary,
                                                    tiny_networks, tiny_schedule):
        store, w, cfg, prepared = make_training_setup(
            tiny_model, tiny_synth_cfg, tiny_samples, tiny_dictionary, tiny_networks,
            weights=LossWeights(emo=0.0),
        )
        sample_ = prepared[0]
        rng = np.random.default_rng(1)
        eps = rng.standard_normal(sample_.params.shape)
        loss, _ = sample_loss_t(w, sample_, 3, eps, tiny_schedule, cfg,
                                TrainMode.EDITED, sample_.emotion, sample_.emotion)
        store.zero_grad()
        loss.backward()
        assert loss.item() == 0.0
        for _, t in store.items():
            assert np.all(t.grad == 0.0)

    def test_loss_decreases_on_fixed_batch(self, tiny_model, tiny_synth_cfg, tiny_samples,
                                           tiny_dictionary, tiny_networks, tiny_schedule):
        # run-and-record oracle: with this seed the last-10 moving average
        # falls well below half of the first-10 moving average
        store, w, cfg, prepared = make_training_setup(
            tiny_model, tiny_synth_cfg, tiny_samples, tiny_dictionary, tiny_networks
        )
        opt = OptimizerState(store)
        rng = np.random.default_rng(42)
        losses = [training_step(w, opt, prepared, tiny_schedule, rng, cfg, lr=2e-3).total
                  for _ in range(50)]
        assert np.mean(losses[-10:]) <= 0.5 * np.mean(losses[:10])

    def test_bit_reproducible(self, tiny_model, tiny_synth_cfg, tiny_samples,
                              tiny_dictionary, tiny_schedule):
        from emoface.losses import MappingNetwork

        def run():
            store = ParamStore()
            dcfg = DenoiserConfig(d_param=tiny_model.D, d_audio=tiny_synth_cfg.d_audio,
                                  d_emotion=tiny_synth_cfg.d_emotion, n_identity=tiny_model.n_id,
                                  d_model=16, n_heads=2, ff_hidden=24, time_dim=8,
                                  time_hidden=12, seed=1)
            w = DenoiserWeights(dcfg, store=store)
            mapping = MappingNetwork(store, n_inputs=tiny_model.n_exp,
                                     d_emotion=tiny_synth_cfg.d_emotion, hidden=8,
                                     rng=np.random.default_rng(5))
            cfg = TrainStepConfig(weights=LossWeights(), dual_train=True, mapping=mapping,
                                  model=tiny_model, dictionary=tiny_dictionary)
            prepared = [prepare_sample(tiny_model, s.params_gt, s.audio, s.e_gt, s.mask)
                        for s in tiny_samples]
            opt = OptimizerState(store)
            rng = np.random.default_rng(7)
            for _ in range(5):
                training_step(w, opt, prepared, tiny_schedule, rng, cfg, lr=1e-3)
            return {name: t.value.copy() for name, t in store.items()}

        w1, w2 = run(), run()
        for name in w1:
            assert np.array_equal(w1[name], w2[name])

    def test_empty_batch_rejected(self, tiny_model, tiny_synth_cfg, tiny_samples,
                                  tiny_dictionary, tiny_networks, tiny_schedule):
        store, w, cfg, _ = make_training_setup(
            tiny_model, tiny_synth_cfg, tiny_samples, tiny_dictionary, tiny_networks
        )
        with pytest.raises(ValueError, match="empty batch"):
            training_step(w, OptimizerState(store), [], tiny_schedule,
                          np.random.default_rng(0), cfg, lr=1e-4)


class TestFullObjectiveGradient:
    def test_grad_check_original_mode(self, tiny_model, tiny_synth_cfg, tiny_samples,
                                      tiny_dictionary, tiny_networks, tiny_schedule):
        store, w, cfg, prepared = make_training_setup(
            tiny_model, tiny_synth_cfg, tiny_samples, tiny_dictionary, tiny_networks
        )
        rng = np.random.default_rng(3)
        sample_ = prepared[0]
        eps = rng.standard_normal(sample_.params.shape)

        def f(ps):
            loss, _ = sample_loss_t(w, sample_, 2, eps, tiny_schedule, cfg,
                                    TrainMode.ORIGINAL, sample_.emotion, sample_.emotion)
            return loss

        assert grad_check(f, store, eps=1e-4) <= 1e-4
