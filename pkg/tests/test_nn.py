"""Neural substrate: forward semantics plus finite-difference gradient
oracles (central differences, h = 1e-5) for every layer type."""

import numpy as np
import pytest

from handact import nn
from handact.errors import (EmptySequence, InvalidRate, NonFiniteGradient,
                            ShapeMismatch)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


class TestLinear:
    def test_identity_weights(self, rng):
        x = nn.Tensor(rng.standard_normal((4, 3)))
        w = nn.Parameter(np.eye(3), "w")
        b = nn.Parameter(np.zeros(3), "b")
        assert np.array_equal(nn.linear(x, w, b).data, x.data)

    def test_zero_input_gives_bias(self, rng):
        x = nn.Tensor(np.zeros((2, 3)))
        w = nn.Parameter(rng.standard_normal((5, 3)), "w")
        b = nn.Parameter(rng.standard_normal(5), "b")
        out = nn.linear(x, w, b).data
        assert np.array_equal(out, np.broadcast_to(b.data, (2, 5)))

    def test_gradients_match_finite_differences(self, rng):
        x = nn.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        lin = nn.Linear(3, 4, rng, "lin")
        targets = rng.integers(0, 4, size=2)

        def loss():
            return nn.softmax_cross_entropy(lin(x), targets)

        report = nn.gradient_check(loss, {"x": x, "w": lin.w, "b": lin.b})
        assert report.max_rel_error < 1e-6

    def test_shape_mismatch(self, rng):
        x = nn.Tensor(np.zeros((2, 3)))
        w = nn.Parameter(np.zeros((4, 5)), "w")
        with pytest.raises(ShapeMismatch):
            nn.matmul_t(x, w)


class TestElementwiseOps:
    def test_relu_semantics(self):
        x = nn.Tensor([[-1.0, 0.0, 2.0]])
        assert nn.relu(x).data.tolist() == [[0.0, 0.0, 2.0]]

    def test_concat_and_backward(self, rng):
        a = nn.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        b = nn.Tensor(rng.standard_normal((2, 2)), requires_grad=True)

        def loss():
            return nn.l2_loss(nn.concat([a, b], axis=1), np.zeros((2, 5)))

        report = nn.gradient_check(loss, {"a": a, "b": b})
        assert report.max_rel_error < 1e-6

    def test_stack_mean(self, rng):
        ts = [nn.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
              for _ in range(4)]
        out = nn.stack_mean(ts)
        expected = np.mean([t.data for t in ts], axis=0)
        np.testing.assert_allclose(out.data, expected, rtol=1e-12)

        def loss():
            return nn.l2_loss(nn.stack_mean(ts), np.zeros((2, 3)))

        report = nn.gradient_check(loss, {f"t{i}": t for i, t in enumerate(ts)})
        assert report.max_rel_error < 1e-6


class TestDropout:
    def test_rate_zero_identity_both_modes(self, rng):
        x = nn.Tensor(rng.standard_normal((3, 4)))
        assert np.array_equal(nn.dropout(x, 0.0, True, rng).data, x.data)
        assert np.array_equal(nn.dropout(x, 0.0, False).data, x.data)

    def test_eval_mode_identity(self, rng):
        x = nn.Tensor(rng.standard_normal((3, 4)))
        assert np.array_equal(nn.dropout(x, 0.7, False).data, x.data)

    def test_invalid_rate(self, rng):
        x = nn.Tensor(np.ones((2, 2)))
        with pytest.raises(InvalidRate):
            nn.dropout(x, 1.0, True, rng)
        with pytest.raises(InvalidRate):
            nn.dropout(x, -0.1, True, rng)

    def test_preserves_expectation(self):
        r = np.random.default_rng(7)
        x = nn.Tensor(np.ones((100000, 1)))
        out = nn.dropout(x, 0.3, True, r)
        assert abs(out.data.mean() - 1.0) < 0.01

    def test_backward_uses_same_mask(self, rng):
        x = nn.Tensor(np.ones((50, 4)), requires_grad=True)
        out = nn.dropout(x, 0.5, True, rng)
        out.backward(seed=np.ones_like(out.data))
        np.testing.assert_allclose(x.grad, out.data)


class TestBatchNorm:
    def test_train_mode_normalizes(self, rng):
        x = nn.Tensor(rng.standard_normal((64, 5)) * 3.0 + 2.0)
        gamma = nn.Parameter(np.ones(5), "g")
        beta = nn.Parameter(np.zeros(5), "b")
        state = nn.BatchNormState.for_dim(5)
        out = nn.batchnorm1d(x, gamma, beta, state, train=True)
        assert np.abs(out.data.mean(axis=0)).max() < 1e-10
        assert np.abs(out.data.std(axis=0) - 1.0).max() < 1e-2

    def test_gradient_check(self, rng):
        x = nn.Tensor(rng.standard_normal((6, 3)), requires_grad=True)
        gamma = nn.Parameter(rng.standard_normal(3), "g")
        beta = nn.Parameter(rng.standard_normal(3), "b")
        target = rng.standard_normal((6, 3))

        def loss():
            state = nn.BatchNormState.for_dim(3)
            out = nn.batchnorm1d(x, gamma, beta, state, train=True)
            # relu breaks the standardization invariance so dx is nonzero
            return nn.l2_loss(nn.relu(out), target)

        report = nn.gradient_check(loss, {"x": x, "gamma": gamma, "beta": beta})
        assert report.max_rel_error < 1e-4

    def test_eval_uses_running_stats(self, rng):
        gamma = nn.Parameter(np.ones(2), "g")
        beta = nn.Parameter(np.zeros(2), "b")
        state = nn.BatchNormState(mean=np.array([1.0, -1.0]),
                                  var=np.array([4.0, 0.25]))
        x = nn.Tensor(np.array([[1.0, -1.0], [3.0, -0.5]]))
        out = nn.batchnorm1d(x, gamma, beta, state, train=False)
        np.testing.assert_allclose(out.data[0], [0.0, 0.0], atol=1e-5)


class TestLosses:
    def test_uniform_logits_give_log_c(self):
        logits = nn.Tensor(np.zeros((1, 36)))
        loss = nn.softmax_cross_entropy(logits, [11])
        assert loss.item() == pytest.approx(np.log(36.0), rel=1e-12)

    def test_cross_entropy_nonnegative_and_near_zero_for_confident(self):
        logits = np.zeros((1, 5))
        logits[0, 2] = 50.0
        val = nn.softmax_cross_entropy(nn.Tensor(logits), [2]).item()
        assert 0.0 <= val < 1e-12
        wrong = nn.softmax_cross_entropy(nn.Tensor(logits), [1]).item()
        assert wrong > 1.0

    def test_cross_entropy_matches_log_softmax_arithmetic(self, rng):
        logits = rng.standard_normal((4, 7))
        targets = rng.integers(0, 7, size=4)
        val = nn.softmax_cross_entropy(nn.Tensor(logits), targets).item()
        # independent recomputation
        expected = 0.0
        for b in range(4):
            z = logits[b]
            expected += -(z[targets[b]] - np.log(np.exp(z - z.max()).sum()) - z.max())
        assert val == pytest.approx(expected / 4.0, rel=1e-12)

    def test_cross_entropy_gradcheck(self, rng):
        logits = nn.Tensor(rng.standard_normal((3, 5)), requires_grad=True)
        targets = rng.integers(0, 5, size=3)

        def loss():
            return nn.softmax_cross_entropy(logits, targets)

        assert nn.gradient_check(loss, {"logits": logits}).max_rel_error < 1e-6

    def test_l2_perfect_prediction(self, rng):
        t = rng.standard_normal((2, 6))
        assert nn.l2_loss(nn.Tensor(t), t).item() == 0.0

    def test_l2_mask_excludes_entries(self):
        pred = nn.Tensor(np.ones((1, 4)))
        target = np.zeros((1, 4))
        mask = np.array([True, False, False, True])
        assert nn.l2_loss(pred, target, mask).item() == pytest.approx(2.0)

    def test_l2_is_per_sample_sum_batch_mean(self):
        pred = nn.Tensor(np.ones((2, 3)))
        target = np.zeros((2, 3))
        assert nn.l2_loss(pred, target).item() == pytest.approx(3.0)

    def test_l2_gradcheck_with_mask(self, rng):
        pred = nn.Tensor(rng.standard_normal((2, 5)), requires_grad=True)
        target = rng.standard_normal((2, 5))
        mask = np.array([False, True, False, False, True])

        def loss():
            return nn.l2_loss(pred, target, mask)

        assert nn.gradient_check(loss, {"pred": pred}).max_rel_error < 1e-6


class TestConvAndPool:
    def test_gradient_check(self, rng):
        conv = nn.Conv2d(2, 3, 3, rng, "c", pad=1)
        x = nn.Tensor(rng.standard_normal((2, 2, 4, 4)), requires_grad=True)

        def loss():
            y = nn.avgpool2d(nn.relu(conv(x)), 2)
            return nn.l2_loss(nn.flatten(y), np.zeros((2, 12)))

        report = nn.gradient_check(loss, {"w": conv.w, "b": conv.b, "x": x})
        assert report.max_rel_error < 1e-4

    def test_conv_matches_direct_correlation(self, rng):
        # independent oracle: quadruple loop correlation
        x = rng.standard_normal((1, 2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        out = nn.conv2d(nn.Tensor(x), nn.Tensor(w), nn.Tensor(b)).data
        expected = np.zeros((1, 3, 3, 3))
        for o in range(3):
            for i in range(3):
                for j in range(3):
                    expected[0, o, i, j] = (x[0, :, i:i + 3, j:j + 3] * w[o]).sum() + b[o]
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_avgpool_shape_guard(self, rng):
        x = nn.Tensor(rng.standard_normal((1, 1, 5, 4)))
        with pytest.raises(ShapeMismatch):
            nn.avgpool2d(x, 2)


class TestGRU:
    def test_zero_everything_stays_zero(self, rng):
        p = nn.GRUCellParams(3, 4, rng, "cell")
        for q in p.params():
            q.data[...] = 0.0
        out = nn.gru_cell(nn.Tensor(np.ones((1, 3))), nn.Tensor(np.zeros((1, 4))), p)
        assert np.array_equal(out.data, np.zeros((1, 4)))

    def test_saturated_update_gate_returns_candidate(self, rng):
        p = nn.GRUCellParams(3, 4, rng, "cell")
        for q in p.params():
            q.data[...] = 0.0
        p.b_z.data[...] = 50.0
        h = nn.Tensor(rng.standard_normal((1, 4)))
        out = nn.gru_cell(nn.Tensor(np.ones((1, 3))), h, p)
        # candidate is tanh(0) = 0 and z saturates at 1
        np.testing.assert_allclose(out.data, np.zeros((1, 4)), atol=1e-18)

    def test_gradient_check(self, rng):
        p = nn.GRUCellParams(3, 4, rng, "cell")
        x = nn.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        h = nn.Tensor(rng.standard_normal((2, 4)), requires_grad=True)

        def loss():
            return nn.l2_loss(nn.gru_cell(x, h, p), np.zeros((2, 4)))

        tensors = {q.name: q for q in p.params()}
        tensors.update({"x": x, "h": h})
        assert nn.gradient_check(loss, tensors).max_rel_error < 1e-5

    def test_shape_mismatch(self, rng):
        p = nn.GRUCellParams(3, 4, rng, "cell")
        with pytest.raises(ShapeMismatch):
            nn.gru_cell(nn.Tensor(np.zeros((1, 3))), nn.Tensor(np.zeros((1, 5))), p)


class TestBiGRU:
    def test_output_count_and_width(self, rng):
        bg = nn.BiGRU(3, 5, 2, rng, "bg")
        seq = [nn.Tensor(rng.standard_normal((2, 3))) for _ in range(4)]
        outs = bg(seq)
        assert len(outs) == 4
        assert all(o.data.shape == (2, 10) for o in outs)

    def test_single_frame_sequence(self, rng):
        bg = nn.BiGRU(3, 4, 2, rng, "bg")
        outs = bg([nn.Tensor(rng.standard_normal((1, 3)))])
        assert len(outs) == 1 and outs[0].data.shape == (1, 8)

    def test_zero_params_zero_outputs(self, rng):
        bg = nn.BiGRU(3, 4, 2, rng, "bg")
        for p in bg.params():
            p.data[...] = 0.0
        outs = bg([nn.Tensor(np.ones((1, 3))) for _ in range(3)])
        assert all(np.array_equal(o.data, np.zeros((1, 8))) for o in outs)

    def test_empty_sequence(self, rng):
        bg = nn.BiGRU(3, 4, 1, rng, "bg")
        with pytest.raises(EmptySequence):
            bg([])

    def test_reversal_swaps_direction_halves(self, rng):
        # with the two directions' parameters tied, reversing the input
        # reverses the step order and swaps the forward/backward halves
        bg = nn.BiGRU(3, 4, 1, rng, "bg")
        fwd_cell, bwd_cell = bg.layers[0]
        for pf, pb in zip(fwd_cell.params(), bwd_cell.params()):
            pb.data[...] = pf.data
        seq = [nn.Tensor(rng.standard_normal((2, 3))) for _ in range(5)]
        fwd = [o.data for o in bg(seq)]
        rev = [o.data for o in bg(list(reversed(seq)))]
        for t in range(5):
            swapped = np.concatenate([rev[4 - t][:, 4:], rev[4 - t][:, :4]], axis=1)
            assert np.array_equal(fwd[t], swapped)

    def test_gradient_check(self, rng):
        bg = nn.BiGRU(2, 3, 2, rng, "bg")
        seq = [nn.Tensor(rng.standard_normal((2, 2))) for _ in range(3)]

        def loss():
            outs = bg(seq)
            return nn.l2_loss(outs[-1], np.zeros((2, 6)))

        report = nn.gradient_check(loss, {p.name: p for p in bg.params()})
        assert report.max_rel_error < 1e-4


class TestSgd:
    def test_schedule_paper_values(self):
        s = nn.SgdSchedule(base_lr=0.001, halving_period=50)
        assert s.lr(0) == 0.001
        assert s.lr(50) == 0.0005
        assert s.lr(120) == 0.00025

    def test_step_and_zeroing(self, rng):
        p = nn.Parameter(np.ones(3), "p")
        p.grad[...] = 2.0
        nn.sgd_step([p], nn.SgdSchedule(base_lr=0.1, halving_period=10), epoch=0)
        np.testing.assert_allclose(p.data, 0.8)
        assert np.array_equal(p.grad, np.zeros(3))

    def test_zero_grad_leaves_params(self):
        p = nn.Parameter(np.full(3, 1.5), "p")
        nn.sgd_step([p], nn.SgdSchedule(), epoch=0)
        assert np.array_equal(p.data, np.full(3, 1.5))

    def test_nonfinite_gradient_rejected(self):
        p = nn.Parameter(np.ones(2), "p")
        p.grad[0] = np.nan
        with pytest.raises(NonFiniteGradient):
            nn.sgd_step([p], nn.SgdSchedule(), epoch=0)


class TestGradientCheckHarness:
    def test_corrupted_backward_is_flagged(self, rng):
        w = nn.Parameter(rng.standard_normal((3, 3)), "w")
        x = rng.standard_normal((2, 3))

        def loss():
            base = nn.matmul_t(nn.Tensor(x), w)
            # deliberately wrong backward: scales the true gradient by 1.2
            bad = nn.Tensor(base.data, parents=(w,),
                            backward=lambda g: (1.2 * (g.T @ x),))
            return nn.l2_loss(bad, np.zeros((2, 3)))

        report = nn.gradient_check(loss, {"w": w})
        assert report.max_rel_error > 1e-2

    def test_requires_float64_mode(self, rng):
        w = nn.Parameter(np.ones((2, 2)), "w")
        nn.set_precision("train")
        try:
            with pytest.raises(ShapeMismatch):
                nn.gradient_check(lambda: nn.l2_loss(w, np.zeros((2, 2))), {"w": w})
        finally:
            nn.set_precision("test")


class TestDeterminism:
    def _train_once(self):
        rng = np.random.default_rng(123)
        lin = nn.Linear(4, 3, rng, "lin")
        sched = nn.SgdSchedule(base_lr=0.05, halving_period=10)
        data_rng = np.random.default_rng(9)
        x = data_rng.standard_normal((16, 4))
        y = data_rng.integers(0, 3, size=16)
        for epoch in range(5):
            loss = nn.softmax_cross_entropy(lin(nn.Tensor(x)), y)
            loss.backward()
            nn.sgd_step(lin.params(), sched, epoch)
        return lin.w.data.copy(), lin.b.data.copy()

    def test_identical_seeds_identical_trajectories(self):
        w1, b1 = self._train_once()
        w2, b2 = self._train_once()
        assert np.array_equal(w1, w2) and np.array_equal(b1, b2)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        named = {"a.w": nn.Parameter(rng.standard_normal((3, 4)), "a.w"),
                 "a.b": nn.Parameter(rng.standard_normal(3), "a.b"),
                 "z": rng.standard_normal((2, 2, 2))}
        path = tmp_path / "model.ckpt"
        nn.save_checkpoint(path, named)
        loaded = nn.load_checkpoint(path)
        assert set(loaded) == set(named)
        for name in named:
            arr = named[name].data if isinstance(named[name], nn.Tensor) else named[name]
            assert np.array_equal(loaded[name], arr)

    def test_save_is_name_ordered_and_reproducible(self, tmp_path, rng):
        named = {"b": np.ones(2), "a": np.zeros(3)}
        p1, p2 = tmp_path / "1.ckpt", tmp_path / "2.ckpt"
        nn.save_checkpoint(p1, named)
        nn.save_checkpoint(p2, dict(reversed(list(named.items()))))
        assert p1.read_bytes() == p2.read_bytes()

    def test_load_into_shape_mismatch(self, tmp_path):
        nn.save_checkpoint(tmp_path / "c.ckpt", {"p": np.zeros((2, 2))})
        p = nn.Parameter(np.zeros((3, 3)), "p")
        with pytest.raises(ShapeMismatch):
            nn.load_into({"p": p}, nn.load_checkpoint(tmp_path / "c.ckpt"))

    def test_load_into_missing_name(self, tmp_path):
        nn.save_checkpoint(tmp_path / "c.ckpt", {"q": np.zeros(2)})
        p = nn.Parameter(np.zeros(2), "p")
        with pytest.raises(KeyError):
            nn.load_into({"p": p}, nn.load_checkpoint(tmp_path / "c.ckpt"))
