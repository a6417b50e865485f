import math

import numpy as np
import pytest

from pulsegan.errors import ShapeError
from pulsegan.gradsuite import CASES, Stack
from pulsegan.nn import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    LeakyReLU,
    Linear,
    ParamStore,
    PReLU,
    Tanh,
    ReduceLROnPlateau,
    adam_step,
    concat_channels,
    conv1d_forward,
    conv_out_len,
    grad_check,
    rel_error,
    split_channels,
    tconv1d_forward,
    tconv_out_len,
)


def naive_conv(x, w, b, stride, pad):
    bsz, cin, n = x.shape
    cout, _, k = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    lout = (n + 2 * pad - k) // stride + 1
    y = np.zeros((bsz, cout, lout))
    for bi in range(bsz):
        for o in range(cout):
            for t in range(lout):
                y[bi, o, t] = b[o] + np.sum(w[o] * xp[bi, :, t * stride:t * stride + k])
    return y


def naive_tconv(x, w, b, stride, pad, op):
    bsz, cin, n = x.shape
    _, cout, k = w.shape
    full = np.zeros((bsz, cout, (n - 1) * stride + k + op))
    for bi in range(bsz):
        for i in range(cin):
            for t in range(n):
                full[bi, :, t * stride:t * stride + k] += x[bi, i, t] * w[i]
    lout = (n - 1) * stride - 2 * pad + k + op
    return full[:, :, pad:pad + lout] + b[None, :, None]


class TestConvolutions:
    @pytest.mark.parametrize("seed", range(5))
    def test_conv_matches_loops(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 3, 17))
        w = rng.normal(size=(4, 3, 5))
        b = rng.normal(size=4)
        stride, pad = 1 + seed % 2, seed % 3
        y, _ = conv1d_forward(x, w, b, stride, pad)
        np.testing.assert_allclose(y, naive_conv(x, w, b, stride, pad), atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_tconv_matches_loops(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 3, 9))
        w = rng.normal(size=(3, 2, 5))
        b = rng.normal(size=2)
        stride, pad = 2, 2
        op = seed % 2
        y, _ = tconv1d_forward(x, w, b, stride, pad, op)
        np.testing.assert_allclose(y, naive_tconv(x, w, b, stride, pad, op), atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_adjoint_identity(self, seed):
        """<conv(x), y> == <x, tconv(y)> with shared weights, no bias."""
        rng = np.random.default_rng(seed)
        k = int(rng.choice([3, 5, 31]))
        stride = int(rng.integers(1, 3))
        pad = (k - 1) // 2
        n = int(rng.integers(k, 80))
        lout = conv_out_len(n, k, stride, pad)
        op = n - tconv_out_len(lout, k, stride, pad)
        if not 0 <= op <= pad:
            pytest.skip("lengths not reachable with this output padding")
        w = rng.normal(size=(3, 2, k))
        x = rng.normal(size=(2, 2, n))
        y = rng.normal(size=(2, 3, lout))
        ax, _ = conv1d_forward(x, w, None, stride, pad)
        aty, _ = tconv1d_forward(y, w, None, stride, pad, op)
        lhs, rhs = np.sum(ax * y), np.sum(x * aty)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))

    def test_network_length_plan(self):
        lengths = [320]
        for _ in range(6):
            lengths.append(conv_out_len(lengths[-1], 31, 2, 15))
        assert lengths == [320, 160, 80, 40, 20, 10, 5]
        up = [5]
        for _ in range(6):
            up.append(tconv_out_len(up[-1], 31, 2, 15, 1))
        assert up == lengths[::-1]

    def test_against_torch(self):
        torch = pytest.importorskip("torch")
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 3, 40))
        w = rng.normal(size=(4, 3, 31))
        b = rng.normal(size=4)
        y, _ = conv1d_forward(x, w, b, 2, 15)
        ref = torch.nn.functional.conv1d(torch.from_numpy(x), torch.from_numpy(w), torch.from_numpy(b),
                                         stride=2, padding=15).numpy()
        np.testing.assert_allclose(y, ref, atol=1e-10)
        wt = rng.normal(size=(4, 3, 31))
        yt, _ = tconv1d_forward(y, wt, b[:3], 2, 15, 1)
        ref = torch.nn.functional.conv_transpose1d(torch.from_numpy(y), torch.from_numpy(wt),
                                                   torch.from_numpy(b[:3]), stride=2, padding=15,
                                                   output_padding=1).numpy()
        np.testing.assert_allclose(yt, ref, atol=1e-10)

    def test_shape_errors(self):
        store = ParamStore()
        conv = Conv1d(store, "c", 2, 3, 3)
        with pytest.raises(ShapeError):
            conv.forward(np.zeros((1, 3, 10)))
        with pytest.raises(ShapeError):
            conv.forward(np.zeros((3, 10)))


# Every layer, 20 seeded configurations each, at h = 1e-5 and tolerance 1e-4.
LAYER_CASES = ["conv1d", "tconv1d", "prelu", "leaky_relu", "tanh", "sigmoid",
               "batchnorm_train", "batchnorm_eval", "linear", "concat", "conv_prelu_stack"]


class TestLayerGradients:
    @pytest.mark.parametrize("case", LAYER_CASES)
    def test_twenty_seeds(self, case):
        names = list(CASES)
        for s in range(20):
            frag, x = CASES[case](np.random.default_rng([0, s, names.index(case)]))
            rep = grad_check(frag, x, h=1e-5, seed=s)
            assert rep.max_rel_error < 1e-4, (case, s, rep.errors)

    def test_prelu_slope_gradient_by_hand(self):
        store = ParamStore()
        act = PReLU(store, "p", 0.25)
        x = np.array([[[-2.0, 3.0, -1.0]]])
        act.forward(x)
        gx = act.backward(np.ones_like(x))
        assert act.a.grad[0] == -3.0
        np.testing.assert_array_equal(gx, [[[0.25, 1.0, 0.25]]])


class TestGradCheck:
    def test_detects_broken_backward(self):
        store = ParamStore()
        conv = Conv1d(store, "c", 1, 2, 3, 1, 1, np.random.default_rng(0))
        frag = Stack(store, conv)
        good = grad_check(frag, np.random.default_rng(1).normal(size=(2, 1, 8)))
        assert good.passed()
        original = conv.backward
        conv.backward = lambda gy: 1.1 * original(gy)
        bad = grad_check(frag, np.random.default_rng(1).normal(size=(2, 1, 8)))
        assert not bad.passed()
        assert bad.errors["input"] > 1e-2

    def test_rel_error_floor(self):
        assert rel_error(0.0, 0.0) == 0.0
        assert rel_error(1e-12, 0.0) == pytest.approx(1e-6)
        assert rel_error(2.0, 1.0) == pytest.approx(0.5)

    def test_kink_crossing_probes_are_skipped(self):
        store = ParamStore()
        act = PReLU(store, "p", 0.25)
        x = np.array([[[3e-6, 1.0, -1.0]]])  # first entry within h of the kink
        rep = grad_check(Stack(store, act), x, h=1e-5)
        assert rep.skipped == 1
        assert rep.passed()


class TestBatchNorm:
    def test_train_normalizes_and_tracks_running_stats(self, rng):
        store = ParamStore()
        bn = BatchNorm1d(store, "bn", 2)
        x = rng.normal(3.0, 2.0, size=(4, 2, 10))
        y = bn.forward(x)
        np.testing.assert_allclose(y.mean(axis=(0, 2)), 0.0, atol=1e-12)
        np.testing.assert_allclose(y.var(axis=(0, 2)), 1.0, atol=1e-3)
        n = 40
        np.testing.assert_allclose(bn.running_mean, 0.1 * x.mean(axis=(0, 2)), atol=1e-12)
        np.testing.assert_allclose(bn.running_var, 0.9 + 0.1 * x.var(axis=(0, 2)) * n / (n - 1),
                                   atol=1e-12)
        assert store.buffers["bn.running_mean"] is bn.running_mean

    def test_eval_uses_running_stats(self):
        store = ParamStore()
        bn = BatchNorm1d(store, "bn", 1)
        bn.running_mean[:] = 2.0
        bn.running_var[:] = 4.0
        bn.training = False
        y = bn.forward(np.full((1, 1, 3), 6.0))
        np.testing.assert_allclose(y, 4.0 / np.sqrt(4.0 + 1e-5))

    def test_single_value_per_channel_rejected(self):
        bn = BatchNorm1d(ParamStore(), "bn", 1)
        with pytest.raises(ShapeError):
            bn.forward(np.zeros((1, 1, 1)))


class TestLinearAndConcat:
    def test_zero_init(self):
        fc = Linear(ParamStore(), "fc", 5, 1, zero_init=True)
        np.testing.assert_array_equal(fc.forward(np.ones((3, 5))), 0.0)

    def test_uniform_init_bounds(self):
        fc = Linear(ParamStore(), "fc", 16, 8, np.random.default_rng(0))
        assert np.all(np.abs(fc.w.value) <= 0.25)

    def test_concat_split_roundtrip(self, rng):
        a, b = rng.normal(size=(2, 3, 5)), rng.normal(size=(2, 4, 5))
        ga, gb = split_channels(concat_channels(a, b), 3)
        np.testing.assert_array_equal(ga, a)
        np.testing.assert_array_equal(gb, b)
        with pytest.raises(ShapeError):
            concat_channels(a, rng.normal(size=(2, 4, 6)))

    def test_duplicate_names_rejected(self):
        store = ParamStore()
        store.add("x", np.zeros(1))
        with pytest.raises(KeyError):
            store.add("x", np.zeros(1))


class TestAdam:
    def test_matches_recurrence(self, rng):
        store = ParamStore()
        p = store.add("w", rng.normal(size=4))
        w = p.value.copy()
        m = np.zeros(4)
        v = np.zeros(4)
        for t in range(1, 6):
            g = rng.normal(size=4)
            p.grad[:] = g
            adam_step(store, 1e-3)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            w = w - 1e-3 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
            np.testing.assert_allclose(p.value, w, atol=1e-15)
        assert p.step == 5
        np.testing.assert_array_equal(p.grad, 0.0)

    def test_matches_torch(self, rng):
        torch = pytest.importorskip("torch")
        w0 = rng.normal(size=6)
        store = ParamStore()
        p = store.add("w", w0)
        tw = torch.tensor(w0, requires_grad=True)
        opt = torch.optim.Adam([tw], lr=1e-3)
        for _ in range(10):
            g = rng.normal(size=6)
            p.grad[:] = g
            adam_step(store, 1e-3)
            opt.zero_grad()
            tw.grad = torch.tensor(g)
            opt.step()
        np.testing.assert_allclose(p.value, tw.detach().numpy(), atol=1e-12)

    def test_first_step_moves_by_lr(self):
        store = ParamStore()
        p = store.add("w", np.array([1.0, -1.0]))
        p.grad[:] = [3.0, -0.5]
        adam_step(store, 0.01)
        np.testing.assert_allclose(p.value, [0.99, -0.99], atol=1e-8)


class TestPlateau:
    def test_three_bad_epochs_then_reduce_on_fourth(self):
        s = ReduceLROnPlateau(1e-3, 0.1, 3)
        assert s.step(1.0) == 1e-3
        assert s.step(1.0) == 1e-3
        assert s.step(1.0) == 1e-3
        assert s.step(1.0) == 1e-3
        assert s.step(1.0) == pytest.approx(1e-4)

    def test_improvement_resets(self):
        s = ReduceLROnPlateau(1e-3, 0.1, 3)
        for v in [1.0, 1.0, 1.0, 1.0, 0.5, 0.6, 0.6, 0.6]:
            s.step(v)
        assert s.lr == 1e-3
        assert s.step(0.6) == pytest.approx(1e-4)

    def test_threshold_is_relative(self):
        s = ReduceLROnPlateau(1.0, 0.5, 1)
        s.step(1.0)
        s.step(0.99995)   # within 1e-4 relative: not an improvement
        assert s.num_bad == 1

    def test_matches_torch(self):
        torch = pytest.importorskip("torch")
        vals = list(np.random.default_rng(3).uniform(0.5, 1.0, 40))
        opt = torch.optim.SGD([torch.zeros(1, requires_grad=True)], lr=1e-3)
        ref = torch.optim.lr_scheduler.ReduceLROnPlateau(opt, factor=0.1, patience=3)
        ours = ReduceLROnPlateau(1e-3, 0.1, 3)
        for v in vals:
            ref.step(v)
            ours.step(v)
            assert math.isclose(ours.lr, opt.param_groups[0]["lr"], rel_tol=1e-12)

    def test_state_roundtrip(self):
        s = ReduceLROnPlateau(1e-3)
        for v in [1.0, 0.9, 0.95]:
            s.step(v)
        t = ReduceLROnPlateau(5.0)
        t.load_state_dict(s.state_dict())
        assert t.state_dict() == s.state_dict()

    @pytest.mark.parametrize("kw", [{"factor": 1.0}, {"factor": 0.0}, {"patience": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ReduceLROnPlateau(1e-3, **kw)


class TestTransposedLayer:
    def test_output_length_formula(self):
        store = ParamStore()
        layer = ConvTranspose1d(store, "t", 2, 1, 31, 2, 15, 1, np.random.default_rng(0))
        assert layer.forward(np.zeros((1, 2, 10))).shape == (1, 1, 20)


class TestHandExamples:
    def test_identity_conv(self, rng):
        x = rng.normal(size=(2, 1, 7))
        y, _ = conv1d_forward(x, np.ones((1, 1, 1)), np.zeros(1), 1, 0)
        np.testing.assert_array_equal(y, x)

    def test_windowed_sums(self):
        y, _ = conv1d_forward(np.ones((1, 1, 4)), np.ones((1, 1, 3)), np.zeros(1), 1, 1)
        np.testing.assert_array_equal(y[0, 0], [2.0, 3.0, 3.0, 2.0])

    def test_identity_tconv(self, rng):
        x = rng.normal(size=(2, 1, 7))
        y, _ = tconv1d_forward(x, np.ones((1, 1, 1)), np.zeros(1), 1, 0, 0)
        np.testing.assert_array_equal(y, x)

    def test_activations(self):
        act = PReLU(ParamStore(), "p", 0.25)
        np.testing.assert_array_equal(act.forward(np.array([[[-2.0, 3.0]]])), [[[-0.5, 3.0]]])
        assert Tanh().forward(np.zeros((1, 1, 1)))[0, 0, 0] == 0.0
        x = np.array([[[0.0, 2.5, -1.0]]])
        np.testing.assert_array_equal(LeakyReLU(0.2).forward(x), [[[0.0, 2.5, -0.2]]])

    def test_batchnorm_eval_identity(self, rng):
        bn = BatchNorm1d(ParamStore(), "bn", 2)
        bn.training = False
        x = rng.normal(size=(3, 2, 5))
        np.testing.assert_allclose(bn.forward(x), x / np.sqrt(1 + 1e-5), atol=1e-15)

    def test_linear_known_product(self):
        fc = Linear(ParamStore(), "fc", 2, 2)
        fc.w.value[:] = np.eye(2)
        fc.b.value[:] = 0.0
        x = np.array([[3.0, -4.0]])
        np.testing.assert_array_equal(fc.forward(x), x)
        fc.w.value[:] = [[1.0, 2.0], [3.0, 4.0]]
        np.testing.assert_array_equal(fc.forward(np.array([[1.0, 0.5]])), [[2.0, 5.0]])

    def test_concat_shapes(self, rng):
        assert concat_channels(rng.normal(size=(2, 2, 4)), rng.normal(size=(2, 3, 4))).shape == (2, 5, 4)

    def test_linear_gradient_is_tight(self):
        store = ParamStore()
        frag = Stack(store, Linear(store, "fc", 6, 3, np.random.default_rng(0)))
        assert grad_check(frag, np.random.default_rng(1).normal(size=(4, 6))).max_rel_error < 1e-7

    def test_adam_zero_gradient_is_a_no_op(self):
        store = ParamStore()
        p = store.add("w", np.array([0.3, -2.0]))
        adam_step(store, 0.1)
        np.testing.assert_array_equal(p.value, [0.3, -2.0])

    def test_adam_unit_gradient_first_step(self):
        store = ParamStore()
        p = store.add("w", np.array([0.0]))
        p.grad[:] = 1.0
        adam_step(store, 0.1)
        assert p.value[0] == pytest.approx(-0.1, rel=1e-6)

    def test_adam_descends_quadratic(self):
        store = ParamStore()
        p = store.add("w", np.array([1.0]))
        f = []
        for _ in range(10):
            f.append(p.value[0] ** 2)
            p.grad[:] = 2 * p.value
            adam_step(store, 0.05)
        assert all(b < a for a, b in zip(f[1:], f[2:]))
