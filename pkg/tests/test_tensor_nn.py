import numpy as np
import pytest

from danae.errors import ConfigError, ShapeError, StateError
from danae.tensor_nn import (
    AdamState,
    ConvSpec,
    Tensor,
    activation,
    adam_step,
    add,
    backward,
    conv1d,
    conv1d_transposed,
    l2_loss,
    read_checkpoint,
    write_checkpoint,
)

from helpers import conv1d_reference, conv1d_transposed_reference


def _rand_conv_case(rng, transposed=False):
    in_ch = int(rng.integers(1, 4))
    out_ch = int(rng.integers(1, 4))
    k = int(rng.choice([1, 3, 5]))
    dilation = int(rng.integers(1, 4))
    padding = int(rng.integers(0, dilation * (k - 1) + 1))
    length = int(rng.integers(dilation * (k - 1) + 1, 14))
    spec = ConvSpec(in_ch, out_ch, k, dilation=dilation, padding=padding,
                    transposed=transposed)
    if spec.out_length(length) < 1:
        length = length + spec.span
    w = rng.normal(size=spec.weight_shape())
    b = rng.normal(size=out_ch)
    x = rng.normal(size=(in_ch, length))
    return spec, w, b, x


class TestConv1d:
    def test_identity_kernel(self):
        spec = ConvSpec(1, 1, 3, padding=1)
        y = conv1d(Tensor([[1.0, 2.0, 3.0, 4.0]]),
                   Tensor([[[0.0, 1.0, 0.0]]]), Tensor([0.0]), spec)
        assert np.array_equal(y.data, [[1.0, 2.0, 3.0, 4.0]])

    def test_box_kernel_hand_sum(self):
        spec = ConvSpec(1, 1, 3, padding=1)
        y = conv1d(Tensor([[1.0, 1.0, 1.0, 1.0]]),
                   Tensor(np.ones((1, 1, 3))), Tensor([0.0]), spec)
        assert np.array_equal(y.data, [[2.0, 3.0, 3.0, 2.0]])

    def test_dilated_against_triple_loop(self):
        # frozen from the naive oracle on this exact input
        spec = ConvSpec(1, 1, 3, dilation=2, padding=2)
        x = np.array([[1.0, 0.0, 0.0, 0.0, 1.0]])
        w = np.ones((1, 1, 3))
        want = conv1d_reference(x, w, None, 2, 2)
        assert np.array_equal(want, [[1.0, 0.0, 2.0, 0.0, 1.0]])
        y = conv1d(Tensor(x), Tensor(w), None, spec)
        assert np.array_equal(y.data, want)

    def test_matches_oracle_on_random_cases(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            spec, w, b, x = _rand_conv_case(rng)
            y = conv1d(Tensor(x), Tensor(w), Tensor(b), spec)
            want = conv1d_reference(x, w, b, spec.padding, spec.dilation)
            assert y.data.shape == want.shape
            assert np.max(np.abs(y.data - want)) < 1e-12

    def test_trailing_batch_axis_agrees_with_per_sample(self):
        rng = np.random.default_rng(12)
        spec = ConvSpec(2, 3, 3, dilation=2, padding=2)
        w = Tensor(rng.normal(size=spec.weight_shape()))
        b = Tensor(rng.normal(size=3))
        batch = rng.normal(size=(2, 9, 4))  # (channels, length, batch)
        stacked = conv1d(Tensor(batch), w, b, spec).data
        for i in range(4):
            single = conv1d(Tensor(batch[:, :, i]), w, b, spec).data
            assert np.array_equal(stacked[:, :, i], single)

    def test_length_preservation_lemma(self):
        # padding = dilation * (k - 1) / 2 keeps the length for odd k
        rng = np.random.default_rng(13)
        for d in (1, 2, 4, 8):
            for k in (1, 3, 5):
                pad = d * (k - 1) // 2
                spec = ConvSpec(1, 1, k, dilation=d, padding=pad)
                x = rng.normal(size=(1, 20))
                y = conv1d(Tensor(x), Tensor(rng.normal(size=(1, 1, k))), None, spec)
                assert y.data.shape == (1, 20)

    def test_impossible_length_rejected(self):
        spec = ConvSpec(1, 1, 5, dilation=3, padding=0)
        with pytest.raises(ShapeError):
            conv1d(Tensor(np.ones((1, 4))), Tensor(np.ones((1, 1, 5))), None, spec)

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            ConvSpec(1, 1, 4)  # even kernel
        with pytest.raises(ConfigError):
            ConvSpec(1, 1, 3, dilation=0)
        with pytest.raises(ConfigError):
            ConvSpec(1, 1, 3, stride=2)


class TestConv1dTransposed:
    def test_single_sample_scatter(self):
        spec = ConvSpec(1, 1, 3, padding=0, transposed=True)
        y = conv1d_transposed(Tensor([[1.0]]), Tensor(np.ones((1, 1, 3))),
                              Tensor([0.0]), spec)
        assert np.array_equal(y.data, [[1.0, 1.0, 1.0]])

    def test_identity_round_trip(self):
        spec = ConvSpec(1, 1, 3, padding=1)
        spec_t = ConvSpec(1, 1, 3, padding=1, transposed=True)
        ident = Tensor(np.array([[[0.0, 1.0, 0.0]]]))
        x = Tensor([[0.5, -1.0, 2.0, 0.0, 3.0]])
        y = conv1d(x, ident, None, spec)
        back = conv1d_transposed(y, ident, None, spec_t)
        assert np.allclose(back.data, x.data)

    def test_matches_oracle_on_random_cases(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            spec, w, b, x = _rand_conv_case(rng, transposed=True)
            y = conv1d_transposed(Tensor(x), Tensor(w), Tensor(b), spec)
            want = conv1d_transposed_reference(x, w, b, spec.padding, spec.dilation)
            assert y.data.shape == want.shape
            assert np.max(np.abs(y.data - want)) < 1e-12

    def test_adjoint_identity_random_specs(self):
        # <conv(x), y> == <x, conv_t(y)> with shared weights, no bias
        rng = np.random.default_rng(31)
        for _ in range(100):
            spec, w, _, x = _rand_conv_case(rng)
            y_len = spec.out_length(x.shape[1])
            y = rng.normal(size=(spec.out_channels, y_len))
            spec_t = ConvSpec(spec.out_channels, spec.in_channels,
                              spec.kernel_size, dilation=spec.dilation,
                              padding=spec.padding, transposed=True)
            lhs = float(np.sum(conv1d(Tensor(x), Tensor(w), None, spec).data * y))
            rhs = float(np.sum(x * conv1d_transposed(Tensor(y), Tensor(w), None,
                                                     spec_t).data))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs), abs(rhs))


class TestActivation:
    def test_zero_fixed_point(self):
        y = activation(Tensor([[0.0, 0.0, 0.0]]))
        assert np.array_equal(y.data, [[0.0, 0.0, 0.0]])

    def test_definition(self):
        y = activation(Tensor([[1.0, -1.0]]))
        assert np.array_equal(y.data, [[1.0, -0.01]])

    def test_monotone(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(2, 30))
        b = a + np.abs(rng.normal(size=(2, 30)))
        assert np.all(activation(Tensor(a)).data <= activation(Tensor(b)).data)


class TestL2Loss:
    def test_perfect_reconstruction(self):
        x = np.ones((1, 5))
        assert l2_loss(Tensor(x), x).item() == 0.0

    def test_constant_offset(self):
        pred = Tensor(np.full((2, 10), 0.1))
        assert l2_loss(pred, np.zeros((2, 10))).item() == pytest.approx(0.01)

    def test_hand_arithmetic(self):
        assert l2_loss(Tensor([[1.0, 2.0]]), [[0.0, 0.0]]).item() == pytest.approx(2.5)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            l2_loss(Tensor(np.ones((1, 3))), np.ones((1, 4)))

    def test_gradient_is_scaled_residual(self):
        pred = Tensor([[1.0, 2.0]])
        loss = l2_loss(pred, [[0.0, 0.0]])
        backward(loss)
        assert np.allclose(pred.grad, [[1.0, 2.0]])  # 2 * diff / N


class TestBackward:
    def test_backward_on_leaf_rejected(self):
        with pytest.raises(StateError):
            backward(Tensor([[1.0]]))

    def test_non_scalar_root_rejected(self):
        y = activation(Tensor([[1.0, 2.0]]))
        with pytest.raises(ShapeError):
            backward(y)

    def test_zero_network_zero_gradients(self):
        spec = ConvSpec(1, 1, 3, padding=1)
        w = Tensor(np.zeros((1, 1, 3)))
        b = Tensor(np.zeros(1))
        x = Tensor(np.random.default_rng(0).normal(size=(1, 8)))
        loss = l2_loss(conv1d(x, w, b, spec), np.zeros((1, 8)))
        backward(loss)
        assert np.array_equal(w.grad, np.zeros((1, 1, 3)))
        assert np.array_equal(b.grad, np.zeros(1))

    def test_fanout_doubles_gradient(self):
        spec = ConvSpec(1, 1, 3, padding=1)
        rng = np.random.default_rng(9)
        w = Tensor(rng.normal(size=(1, 1, 3)))
        b = Tensor(rng.normal(size=1))
        x = Tensor(rng.normal(size=(1, 6)))
        target = rng.normal(size=(1, 6))

        y = conv1d(x, w, b, spec)
        loss = l2_loss(add(y, y), 2.0 * target)
        backward(loss)
        doubled_w = w.grad.copy()

        w.zero_grad(), b.zero_grad(), x.zero_grad()
        loss_single = l2_loss(conv1d(x, w, b, spec), target)
        backward(loss_single)
        # d/dw mean((2y-2t)^2) = 4 * d/dw mean((y-t)^2)
        assert np.allclose(doubled_w, 4.0 * w.grad)

    def test_grad_accumulates_across_calls(self):
        spec = ConvSpec(1, 1, 3, padding=1)
        w = Tensor(np.ones((1, 1, 3)))
        x = Tensor(np.ones((1, 4)))
        for expected_scale in (1.0, 2.0):
            loss = l2_loss(conv1d(x, w, None, spec), np.zeros((1, 4)))
            backward(loss)
            assert np.allclose(w.grad, expected_scale * _single_pass_grad())


def _single_pass_grad():
    spec = ConvSpec(1, 1, 3, padding=1)
    w = Tensor(np.ones((1, 1, 3)))
    x = Tensor(np.ones((1, 4)))
    loss = l2_loss(conv1d(x, w, None, spec), np.zeros((1, 4)))
    backward(loss)
    return w.grad


def finite_difference_check(build_loss, params, rng, coords_per_param=20,
                            h=1e-5, tol=1e-4):
    """Central differences on randomly chosen parameter coordinates.

    The loss is piecewise quadratic in any single coordinate (one parameter
    feeds a chain of convolutions and leaky rectifiers), so the central
    difference is exact unless the +-h interval crosses a rectifier kink.
    Crossings are detected by comparing the h and h/2 estimates and those
    coordinates are resampled.
    """

    def central(flat, idx, orig, step):
        flat[idx] = orig + step
        up = build_loss().item()
        flat[idx] = orig - step
        down = build_loss().item()
        flat[idx] = orig
        return (up - down) / (2.0 * step)

    def estimate(flat, idx, orig):
        # shrink the step until the two estimates agree, which pushes any
        # kink at finite distance out of the interval
        for step in (h, h / 8.0, h / 64.0):
            full = central(flat, idx, orig, step)
            half = central(flat, idx, orig, step / 2.0)
            if abs(full - half) <= 1e-6 * max(abs(full), abs(half), 1e-3):
                return half
        return None

    loss = build_loss()
    backward(loss)
    grads = [p.grad.copy() for p in params]
    for p, g in zip(params, grads):
        flat = p.data.reshape(-1)
        n_coords = min(coords_per_param, flat.size)
        order = rng.permutation(flat.size)
        checked = cursor = 0
        while checked < n_coords and cursor < flat.size:
            idx = order[cursor]
            cursor += 1
            numeric = estimate(flat, idx, flat[idx])
            if numeric is None:
                continue  # coordinate sits essentially on a kink
            checked += 1
            analytic = g.reshape(-1)[idx]
            denom = max(abs(numeric), abs(analytic), 1e-6)
            assert abs(numeric - analytic) / denom < tol, (
                f"grad mismatch at coord {idx}: analytic {analytic}, numeric {numeric}"
            )
        assert checked >= max(1, n_coords - 2), "too many kink coordinates"
        p.zero_grad()


class TestGradientsAgainstFiniteDifferences:
    def test_conv1d_layer(self):
        rng = np.random.default_rng(100)
        spec = ConvSpec(2, 3, 3, dilation=2, padding=2)
        w = Tensor(rng.normal(size=spec.weight_shape()))
        b = Tensor(rng.normal(size=3))
        x = Tensor(rng.normal(size=(2, 9)))
        target = rng.normal(size=(3, 9))
        finite_difference_check(
            lambda: l2_loss(conv1d(x, w, b, spec), target), [w, b, x], rng)

    def test_conv1d_transposed_layer(self):
        rng = np.random.default_rng(101)
        spec = ConvSpec(3, 2, 3, dilation=2, padding=1, transposed=True)
        w = Tensor(rng.normal(size=spec.weight_shape()))
        b = Tensor(rng.normal(size=2))
        x = Tensor(rng.normal(size=(3, 7)))
        target = rng.normal(size=(2, spec.out_length(7)))
        finite_difference_check(
            lambda: l2_loss(conv1d_transposed(x, w, b, spec), target), [w, b, x], rng)

    def test_activation_and_skip_sum(self):
        rng = np.random.default_rng(102)
        spec = ConvSpec(2, 2, 3, padding=1)
        w = Tensor(rng.normal(size=spec.weight_shape()))
        b = Tensor(rng.normal(size=2))
        x = Tensor(rng.normal(size=(2, 8)))
        target = rng.normal(size=(2, 8))

        def build():
            y = activation(conv1d(x, w, b, spec))
            return l2_loss(add(y, x), target)

        finite_difference_check(build, [w, b, x], rng)


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = Tensor(np.array([1.0, -2.0, 3.0]))
        before = p.data.copy()
        state = AdamState.for_params([p])
        adam_step([p], [np.zeros(3)], state)
        assert np.array_equal(p.data, before)
        assert state.step_count == 1

    def test_first_step_magnitude(self):
        p = Tensor(np.array([0.0]))
        state = AdamState.for_params([p], lr=0.002)
        adam_step([p], [np.array([1.0])], state)
        assert p.data[0] == pytest.approx(-0.002 / (1.0 + 1e-8), abs=1e-12)

    def test_first_step_is_scale_free(self):
        deltas = []
        for g in (10.0, 0.1):
            p = Tensor(np.array([0.0]))
            state = AdamState.for_params([p], lr=0.002)
            adam_step([p], [np.array([g])], state)
            deltas.append(abs(p.data[0]))
        assert abs(deltas[0] - deltas[1]) < 1e-6

    def test_second_moment_stays_nonnegative(self):
        rng = np.random.default_rng(3)
        p = Tensor(rng.normal(size=(4, 4)))
        state = AdamState.for_params([p])
        for _ in range(25):
            adam_step([p], [rng.normal(size=(4, 4))], state)
            assert np.all(state.v[0] >= 0)
        assert state.step_count == 25

    def test_zero_lr_keeps_params_bitwise(self):
        rng = np.random.default_rng(8)
        p = Tensor(rng.normal(size=5))
        before = p.data.copy()
        state = AdamState.for_params([p], lr=0.0)
        for _ in range(3):
            adam_step([p], [rng.normal(size=5)], state)
        assert np.array_equal(p.data, before)


class TestDeterminism:
    def test_forward_is_bitwise_reproducible(self):
        rng = np.random.default_rng(77)
        spec = ConvSpec(2, 2, 3, dilation=2, padding=2)
        w = rng.normal(size=spec.weight_shape())
        b = rng.normal(size=2)
        x = rng.normal(size=(2, 16))
        first = conv1d(Tensor(x), Tensor(w), Tensor(b), spec).data
        second = conv1d(Tensor(x), Tensor(w), Tensor(b), spec).data
        assert np.array_equal(first, second)


class TestCheckpointFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "state.ckpt"
        arrays = {"a.w": np.arange(6.0).reshape(2, 3), "a.b": np.zeros(2)}
        write_checkpoint(path, {"kind": "test", "n": 2}, arrays)
        meta, loaded = read_checkpoint(path)
        assert meta == {"kind": "test", "n": 2}
        assert set(loaded) == {"a.w", "a.b"}
        assert np.array_equal(loaded["a.w"], arrays["a.w"])

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 32)
        with pytest.raises(ConfigError, match="magic"):
            read_checkpoint(path)

    def test_truncated_payload_rejected(self, tmp_path):
        from danae.errors import DataError
        path = tmp_path / "state.ckpt"
        write_checkpoint(path, {}, {"w": np.ones(4)})
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(DataError, match="truncated"):
            read_checkpoint(path)

    def test_deterministic_bytes(self, tmp_path):
        a = {"w": np.arange(12.0).reshape(3, 4)}
        p1, p2 = tmp_path / "one.ckpt", tmp_path / "two.ckpt"
        write_checkpoint(p1, {"seed": 5}, a)
        write_checkpoint(p2, {"seed": 5}, a)
        assert p1.read_bytes() == p2.read_bytes()
