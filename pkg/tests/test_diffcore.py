import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffcore import ops
from diffcore.adam import AdamState, adam_step
from diffcore.gradcheck import check_gradients, relative_error
from diffcore.layers import MLP
from diffcore.tensor import Tape, Tensor, backward
from utility.errors import VNNumericalError, VNShapeError, VNValueError


def _composite_loss(tape, x, W, b, c):
    """A small graph touching most primitives."""
    h = ops.linear(tape, x, W, b)
    h = ops.silu(tape, h)
    gate = ops.tanh_act(tape, ops.slice_last(tape, h, 0, 2))
    rest = ops.exp(tape, ops.scale(tape, ops.slice_last(tape, h, 2, 4), 0.3))
    joined = ops.concat(tape, [ops.mul(tape, gate, rest), ops.square(tape, rest)])
    stacked = ops.stack(tape, [joined, ops.shift(tape, joined, 0.5)])
    return ops.add(
        tape,
        ops.mean_axes(tape, stacked, (0, 1, 2, 3)),
        ops.dot_const(tape, ops.exp_excess(tape, ops.slice_last(tape, h, 0, 1)), c),
    )


class TestBackward:
    def test_loss_must_be_scalar(self):
        tape = Tape()
        x = Tensor.parameter(np.ones(3), "x")
        y = ops.square(tape, x)
        with pytest.raises(VNValueError):
            backward(tape, y)

    def test_loss_must_come_from_the_tape(self):
        x = Tensor.parameter(np.ones(3), "x")
        other = Tape()
        loss = ops.sum_all(other, x)
        with pytest.raises(VNValueError):
            backward(Tape(), loss)

    def test_unreached_tensor_gets_zero_gradient(self):
        tape = Tape()
        x = Tensor.parameter(np.array([1.0, 2.0]), "x")
        unused = Tensor.parameter(np.array([3.0]), "unused")
        grads = backward(tape, ops.sum_all(tape, ops.square(tape, x)))
        assert np.array_equal(grads.of(x), [2.0, 4.0])
        assert not grads.reached(unused)
        assert np.array_equal(grads.of(unused), [0.0])

    def test_no_tape_records_nothing(self):
        x = Tensor.parameter(np.ones(2), "x")
        y = ops.square(None, x)
        assert not y.requires_grad

    def test_shared_input_accumulates(self):
        tape = Tape()
        x = Tensor.parameter(np.array([3.0]), "x")
        loss = ops.sum_all(tape, ops.mul(tape, x, x))
        assert backward(tape, loss).of(x)[0] == pytest.approx(6.0)

    def test_repeated_backward_is_bitwise_identical(self):
        gen = np.random.default_rng(4)
        x = Tensor.parameter(gen.standard_normal((2, 3, 5)), "x")
        W = Tensor.parameter(0.5 * gen.standard_normal((4, 5)), "W")
        b = Tensor.parameter(0.5 * gen.standard_normal(4), "b")
        tape = Tape()
        loss = _composite_loss(tape, x, W, b, gen.standard_normal((2, 3, 1)))
        named = [("x", x), ("W", W), ("b", b)]
        first = backward(tape, loss).collect(named)
        second = backward(tape, loss).collect(named)
        for name in first:
            assert np.array_equal(first[name], second[name]), name

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_composite_graph_matches_central_differences(self, seed):
        gen = np.random.default_rng(seed)
        x = Tensor.parameter(gen.standard_normal((2, 3, 5)), "x")
        W = Tensor.parameter(0.5 * gen.standard_normal((4, 5)), "W")
        b = Tensor.parameter(0.5 * gen.standard_normal(4), "b")
        c = gen.standard_normal((2, 3, 1))
        tape = Tape()
        loss = _composite_loss(tape, x, W, b, c)
        named = [("x", x), ("W", W), ("b", b)]
        analytic = backward(tape, loss).collect(named)

        def loss_value():
            return _composite_loss(None, x, W, b, c).item()

        report = check_gradients(
            loss_value, {n: t.data for n, t in named}, analytic, 40, gen, step=1e-5
        )
        assert report.passed(1e-4), report.to_dict()


class TestOps:
    def test_shape_error_names_both_shapes(self):
        with pytest.raises(VNShapeError) as info:
            ops.add(None, Tensor(np.zeros(2)), Tensor(np.zeros(3)))
        assert "(2,)" in str(info.value) and "(3,)" in str(info.value)

    def test_tanh_output_is_strictly_inside(self):
        out = ops.tanh_act(None, Tensor(np.array([50.0, -50.0, 1e3, 0.0]))).data
        assert np.all(np.abs(out) < 1.0)

    def test_clamp_blocks_gradient_outside_range(self):
        tape = Tape()
        x = Tensor.parameter(np.array([-20.0, 0.5, 20.0]), "x")
        loss = ops.sum_all(tape, ops.clamp(tape, x, -10.0, 10.0))
        assert np.array_equal(backward(tape, loss).of(x), [0.0, 1.0, 0.0])

    def test_take_rows_accumulates_repeated_rows(self):
        tape = Tape()
        table = Tensor.parameter(np.arange(6.0).reshape(3, 2), "table")
        rows = ops.take_rows(tape, table, np.array([0, 2, 0]))
        grad = backward(tape, ops.sum_all(tape, rows)).of(table)
        assert np.array_equal(grad, [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])

    def test_take_rows_rejects_out_of_range(self):
        with pytest.raises(VNValueError):
            ops.take_rows(None, Tensor(np.zeros((3, 2))), 3)

    def test_expand_sums_gradient(self):
        tape = Tape()
        x = Tensor.parameter(np.array([1.0, -1.0]), "x")
        out = ops.expand(tape, x, 4)
        assert out.shape == (4, 2)
        assert np.array_equal(backward(tape, ops.sum_all(tape, out)).of(x), [4.0, 4.0])

    @given(st.floats(-30.0, 30.0, allow_nan=False))
    def test_exp_excess_is_nonnegative(self, x):
        value = ops.exp_excess(None, Tensor(np.array([x]))).data[0]
        assert value >= 0.0
        if abs(x) >= 1e-3:
            assert value == pytest.approx(np.expm1(x) - x, rel=1e-9)
        else:
            assert value == pytest.approx(0.5 * x * x, rel=1e-3, abs=1e-300)

    def test_linear_identity(self):
        out = ops.linear(None, Tensor([3.0, -1.0]), Tensor(np.eye(2)), Tensor(np.zeros(2)))
        assert np.array_equal(out.data, [3.0, -1.0])

    def test_silu_asymptote(self):
        assert abs(ops.silu(None, Tensor([20.0])).data[0] - 20.0) < 1e-7

    def test_linear_accepts_leading_axes(self):
        x = Tensor(np.ones((2, 3, 5)))
        W = Tensor(np.ones((4, 5)))
        b = Tensor(np.zeros(4))
        out = ops.linear(None, x, W, b)
        assert out.shape == (2, 3, 4)
        assert np.all(out.data == 5.0)


class TestMLP:
    def test_init_bounds_and_names(self):
        net = MLP.init_uniform("enc", (8, 16, 3), np.random.default_rng(0))
        assert sorted(net.parameters()) == ["enc.0.bias", "enc.0.weight", "enc.1.bias", "enc.1.weight"]
        W0 = net.parameters()["enc.0.weight"].data
        assert W0.shape == (16, 8)
        assert np.max(np.abs(W0)) <= np.sqrt(1.0 / 8)

    def test_zero_network_outputs_zero(self):
        net = MLP("z", (3, 4, 2))
        out = net(None, Tensor(np.ones((5, 3))), ops.tanh_act)
        assert out.shape == (5, 2)
        assert np.all(out.data == 0.0)

    def test_rejects_single_size(self):
        with pytest.raises(VNValueError):
            MLP("bad", (3,))


class TestAdam:
    def test_first_step_matches_hand_computation(self):
        params = {"p": np.array([1.0])}
        state = AdamState.create(params, lr=0.1)
        adam_step(params, {"p": np.array([0.5])}, state)
        # m_hat = 0.5, v_hat = 0.25
        assert params["p"][0] == pytest.approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8), abs=1e-12)
        assert state.t == 1

    def test_zero_learning_rate_leaves_parameters(self):
        params = {"p": np.array([1.5, -2.0])}
        before = params["p"].copy()
        state = AdamState.create(params, lr=0.0)
        for _ in range(3):
            adam_step(params, {"p": np.array([0.3, -0.7])}, state)
        assert np.array_equal(params["p"], before)

    def test_non_finite_gradient_aborts_before_update(self):
        params = {"a": np.array([1.0]), "b": np.array([2.0])}
        state = AdamState.create(params)
        with pytest.raises(VNNumericalError) as info:
            adam_step(params, {"a": np.array([0.1]), "b": np.array([np.nan])}, state)
        assert "b" in str(info.value)
        assert params["a"][0] == 1.0 and state.t == 0

    def test_shape_mismatch(self):
        params = {"a": np.zeros(2)}
        with pytest.raises(VNShapeError):
            adam_step(params, {"a": np.zeros(3)}, AdamState.create(params))

    def test_state_survives_serialization(self):
        params = {"w": np.array([[0.3, -0.1]])}
        state = AdamState.create(params, lr=0.01)
        adam_step(params, {"w": np.array([[0.2, 0.4]])}, state)
        restored = AdamState.from_dict(state.to_dict())
        assert restored.t == state.t and restored.lr == state.lr
        assert np.array_equal(restored.m["w"], state.m["w"])
        assert np.array_equal(restored.v["w"], state.v["w"])


class TestGradcheck:
    def test_detects_a_wrong_gradient(self):
        arrays = {"x": np.array([1.0, 2.0])}

        def loss_value():
            return float(np.sum(arrays["x"] ** 2))

        wrong = {"x": np.array([2.0, 0.0])}
        report = check_gradients(loss_value, arrays, wrong, 2, np.random.default_rng(0))
        assert report.checked == 2
        assert not report.passed(1e-3)
        assert report.worst_parameter == "x" and report.worst_index == (1,)
        assert np.array_equal(arrays["x"], [1.0, 2.0])

    def test_relative_error_floor(self):
        assert relative_error(0.0, 1e-9) == pytest.approx(1e-4)
