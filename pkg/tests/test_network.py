import math

import numpy as np
import pytest

from skidctl.errors import ContractError, DegenerateRangeError, InvalidParameterError
from skidctl.network import (
    Batch,
    Network,
    NormParams,
    flatten,
    forward,
    forward_batch,
    init_network,
    mse,
    norm_apply,
    norm_fit,
    norm_reverse,
    param_count,
    unflatten,
)


def reference_forward(net, x):
    """Independently written forward pass: plain python loops."""
    a = [x]
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = []
        for i in range(w.shape[0]):
            acc = float(b[i])
            for j in range(w.shape[1]):
                acc += float(w[i, j]) * a[j]
            z.append(acc)
        if layer < len(net.weights) - 1:
            a = [math.tanh(v) for v in z]
        else:
            a = z
    return a[0]


class TestForward:
    def test_zero_parameters_give_zero(self):
        net = init_network([1, 4, 3, 1], seed=0)
        for w in net.weights:
            w[:] = 0.0
        for x in (-2.0, 0.0, 5.5):
            assert forward(net, x) == 0.0

    def test_single_unit_is_tanh(self):
        net = Network(layer_sizes=[1, 1, 1],
                      weights=[np.array([[1.0]]), np.array([[1.0]])],
                      biases=[np.zeros(1), np.zeros(1)])
        for x in (-1.3, 0.0, 0.4, 2.0):
            assert forward(net, x) == pytest.approx(math.tanh(x), abs=1e-15)

    def test_matches_independent_reimplementation(self):
        net = init_network([1, 3, 2, 1], seed=99)
        rng = np.random.default_rng(7)
        for b in net.biases:
            b[:] = rng.uniform(-0.5, 0.5, size=b.shape)
        for x in rng.uniform(-2, 2, size=20):
            assert forward(net, float(x)) == pytest.approx(reference_forward(net, float(x)), abs=1e-14)

    def test_hidden_activations_strictly_inside_unit_interval(self):
        # strict in exact arithmetic; float64 tanh saturates to exactly 1.0
        # only beyond |z| ~ 19, so probe the representable regime and keep
        # the closed bound for the saturated one
        rng = np.random.default_rng(3)
        net = init_network([1, 8, 8, 1], seed=3)
        for x in rng.uniform(-15.0, 15.0, size=50):
            a = np.array([[float(x)]])
            for w, b in zip(net.weights[:-1], net.biases[:-1]):
                z = w @ a + b[:, None]
                a = np.tanh(z)
                assert (np.abs(a[np.abs(z) < 19.0]) < 1.0).all()
                assert (np.abs(a) <= 1.0).all()

    def test_nonfinite_input_rejected(self):
        net = init_network([1, 2, 1], seed=0)
        with pytest.raises(ContractError):
            forward(net, math.inf)


class TestForwardBatch:
    def test_identical_inputs_identical_outputs(self):
        net = init_network([1, 5, 4, 1], seed=11)
        out = forward_batch(net, np.full(17, 0.37))
        assert (out == out[0]).all()

    def test_single_sample_reduces_to_forward(self):
        net = init_network([1, 6, 1], seed=2)
        assert forward_batch(net, np.array([0.9]))[0] == forward(net, 0.9)

    def test_batch_equals_per_column_loop_exactly(self):
        net = init_network([1, 7, 5, 3, 1], seed=21)
        v = np.random.default_rng(8).uniform(-1.5, 1.5, size=64)
        batch_out = forward_batch(net, v)
        loop_out = np.array([forward(net, float(x)) for x in v])
        assert (batch_out == loop_out).all()

    def test_empty_batch_rejected(self):
        net = init_network([1, 2, 1], seed=0)
        with pytest.raises(ContractError):
            forward_batch(net, np.array([]))


class TestMse:
    def test_equal_inputs_give_zero(self):
        x = np.array([1.0, -2.0, 3.0])
        assert mse(x, x) == 0.0

    def test_single_sample_squares_difference(self):
        assert mse(np.array([3.0]), np.array([1.0])) == pytest.approx(4.0)

    def test_matches_naive_two_pass_oracle(self):
        rng = np.random.default_rng(17)
        out = rng.standard_normal(257)
        tgt = rng.standard_normal(257)
        naive = 0.0
        for o, t in zip(out, tgt):
            naive += (o - t) ** 2
        naive /= out.size
        assert mse(out, tgt) == pytest.approx(naive, rel=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            mse(np.zeros(3), np.zeros(4))


class TestFlatten:
    def test_small_network_length(self):
        net = init_network([1, 2, 1], seed=0)
        assert flatten(net).size == (2 + 2) + (2 + 1) == 7

    def test_round_trip_identity(self):
        net = init_network([1, 5, 4, 1], seed=33)
        rng = np.random.default_rng(33)
        for b in net.biases:
            b[:] = rng.standard_normal(b.shape)
        rebuilt = unflatten(net.layer_sizes, flatten(net))
        for w0, w1 in zip(net.weights, rebuilt.weights):
            assert (w0 == w1).all()
        for b0, b1 in zip(net.biases, rebuilt.biases):
            assert (b0 == b1).all()

    def test_reference_architecture_parameter_count(self):
        sizes = [1, 30, 25, 15, 10, 5, 1]
        # per-layer terms summed by hand
        terms = [30 * 1 + 30, 25 * 30 + 25, 15 * 25 + 15, 10 * 15 + 10, 5 * 10 + 5, 1 * 5 + 1]
        assert terms == [60, 775, 390, 160, 55, 6]
        assert param_count(sizes) == sum(terms) == 1446
        assert flatten(init_network(sizes, seed=0)).size == 1446

    def test_param_count_matches_flatten_for_random_architectures(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            depth = int(rng.integers(1, 5))
            sizes = [1] + [int(rng.integers(1, 12)) for _ in range(depth)] + [1]
            assert flatten(init_network(sizes, seed=1)).size == param_count(sizes)

    def test_flatten_order_is_rowmajor_weights_then_biases(self):
        w1 = np.array([[1.0], [2.0]])
        b1 = np.array([3.0, 4.0])
        w2 = np.array([[5.0, 6.0]])
        b2 = np.array([7.0])
        net = Network(layer_sizes=[1, 2, 1], weights=[w1, w2], biases=[b1, b2])
        assert (flatten(net) == np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])).all()

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            unflatten([1, 2, 1], np.zeros(6))


class TestNormalization:
    def test_endpoints_map_to_unit_interval(self):
        p = norm_fit(np.array([2.0, 5.0, 3.0]))
        assert norm_apply(p, 2.0) == -1.0
        assert norm_apply(p, 5.0) == 1.0

    def test_midpoint_maps_to_zero(self):
        p = NormParams(lo=-4.0, hi=10.0)
        assert norm_apply(p, 3.0) == 0.0

    def test_round_trip_within_tolerance(self):
        rng = np.random.default_rng(9)
        data = rng.uniform(-800, 1200, size=500)
        p = norm_fit(data)
        back = norm_reverse(p, norm_apply(p, data))
        assert np.abs(back - data).max() < 1e-12

    def test_degenerate_range_rejected(self):
        with pytest.raises(DegenerateRangeError):
            norm_fit(np.array([1.0, 1.0, 1.0]))


class TestBatchAndNetworkValidation:
    def test_batch_length_mismatch(self):
        with pytest.raises(InvalidParameterError):
            Batch(inputs=np.zeros(3), targets=np.zeros(2))

    def test_dimension_chain_checked(self):
        with pytest.raises(InvalidParameterError):
            Network(layer_sizes=[1, 2, 1],
                    weights=[np.zeros((2, 1)), np.zeros((1, 3))],
                    biases=[np.zeros(2), np.zeros(1)])

    def test_nonfinite_parameters_rejected(self):
        with pytest.raises(InvalidParameterError):
            Network(layer_sizes=[1, 1],
                    weights=[np.array([[math.nan]])],
                    biases=[np.zeros(1)])
