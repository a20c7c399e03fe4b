import math

import numpy as np
import pytest

from genconv.core.numeric import (
    Activation,
    AffineLayer,
    FilterNetwork,
    leaky_relu,
    mlp_backward,
    mlp_forward,
    parameter_count,
    softmax,
    softmax_cross_entropy,
)
from genconv.errors import ShapeError, StateError


def _net(widths, seed=0, precision="float64", output_activation=False):
    return FilterNetwork.initialize(
        widths, np.random.default_rng(seed), 0.01, output_activation, precision
    )


def _straight_line(net, x):
    h = np.asarray(x, dtype=np.float64)
    for layer in net.layers:
        z = layer.weight @ h + layer.bias
        if layer.activation is Activation.LEAKY_RELU:
            z = np.array([v if v >= 0 else layer.slope * v for v in z])
        h = z
    return h


@pytest.mark.parametrize("x, expected", [(5.0, 5.0), (-2.0, -0.02), (0.0, 0.0)])
def test_leaky_relu_scalars(x, expected):
    assert leaky_relu(x, 0.01) == pytest.approx(expected)


def test_zero_network_gives_zero_output():
    net = _net([4, 6, 3])
    for p in net.parameters():
        p[...] = 0.0
    out = mlp_forward(net, np.array([1.0, -2.0, 3.0, 0.5]))
    assert np.array_equal(out, np.zeros(3))


def test_identity_layer_passes_input_through():
    net = FilterNetwork([AffineLayer(np.eye(2), np.zeros(2), Activation.IDENTITY)])
    assert np.array_equal(mlp_forward(net, np.array([3.0, 4.0])), [3.0, 4.0])


def test_forward_matches_straight_line_reevaluation(rng):
    net = _net([3, 5, 2], seed=7)
    for _ in range(20):
        x = rng.normal(size=3)
        assert np.allclose(mlp_forward(net, x), _straight_line(net, x), rtol=1e-12, atol=1e-14)


def test_batch_forward_matches_rowwise(rng):
    net = _net([4, 8, 3], seed=2)
    rows = rng.normal(size=(10, 4))
    batch = net.forward(rows)
    for i, row in enumerate(rows):
        assert np.allclose(batch[i], net.forward(row), rtol=1e-12)


def test_width_mismatch_raises():
    net = _net([3, 4])
    with pytest.raises(ShapeError):
        mlp_forward(net, np.ones(5))


def test_adjacent_widths_must_chain():
    with pytest.raises(ShapeError):
        FilterNetwork(
            [
                AffineLayer(np.ones((4, 3)), np.zeros(4)),
                AffineLayer(np.ones((2, 5)), np.zeros(2)),
            ]
        )


def test_bias_length_checked():
    with pytest.raises(ShapeError):
        AffineLayer(np.ones((4, 3)), np.zeros(3))


def test_backward_before_forward_is_a_state_error():
    with pytest.raises(StateError):
        mlp_backward(_net([3, 2]), np.ones(2))


def test_zero_upstream_gives_zero_gradients(rng):
    net = _net([3, 5, 2], seed=1)
    mlp_forward(net, rng.normal(size=3))
    grads, input_grad = mlp_backward(net, np.zeros(2))
    assert all(not g.any() for g in grads)
    assert not input_grad.any()


def test_identity_layer_input_grad_is_weight_transpose(rng):
    w = rng.normal(size=(3, 4))
    net = FilterNetwork([AffineLayer(w, np.zeros(3), Activation.IDENTITY)])
    mlp_forward(net, rng.normal(size=4))
    upstream = rng.normal(size=3)
    _, input_grad = mlp_backward(net, upstream)
    assert np.allclose(input_grad, w.T @ upstream, rtol=1e-13)


def test_parameter_gradients_match_central_differences(rng):
    h = 1e-5
    checked = skipped = 0
    for seed in range(100):
        net = _net([3, 6, 4, 2], seed=seed)
        x = rng.normal(size=3)
        upstream = rng.normal(size=2)

        def objective():
            return float(upstream @ net.forward(x))

        objective()
        grads, _ = net.backward(upstream)
        for p, g in zip(net.parameters(), grads):
            for idx in np.ndindex(p.shape):
                orig = p[idx]
                p[idx] = orig + h
                up = objective()
                p[idx] = orig - h
                down = objective()
                p[idx] = orig
                base = objective()
                fwd, bwd = (up - base) / h, (base - down) / h
                # a leaky-ReLU kink sits between the probes
                if abs(fwd - bwd) > 1e-8 * (1.0 + abs(fwd)):
                    skipped += 1
                    continue
                numeric = (up - down) / (2 * h)
                assert abs(numeric - g[idx]) <= 1e-6 * max(abs(numeric), abs(g[idx])) + 1e-8
                checked += 1
    assert skipped <= 0.05 * (checked + skipped)


def test_parameter_count_matches_formula():
    assert parameter_count(_net([3, 8, 4])) == 3 * 8 + 8 + 8 * 4 + 4 == 76


def test_parameter_count_of_nothing_is_zero():
    assert parameter_count(None) == 0
    assert parameter_count([]) == 0


def test_parameter_count_unchanged_by_forward_backward(rng):
    net = _net([3, 8, 4])
    before = parameter_count(net)
    net.forward(rng.normal(size=(5, 3)))
    net.backward(np.ones((5, 4)))
    assert parameter_count(net) == before


def test_uniform_logits_loss_is_log_class_count():
    loss, grad = softmax_cross_entropy(np.zeros(10), 4)
    assert loss == pytest.approx(math.log(10), abs=1e-9)
    assert abs(grad.sum()) < 1e-12


def test_extreme_logits_do_not_overflow():
    loss, grad = softmax_cross_entropy(np.array([1000.0, -1000.0]), 0)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(grad))


def test_cross_entropy_gradient_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(10):
        logits = rng.normal(size=6)
        label = int(rng.integers(6))
        _, grad = softmax_cross_entropy(logits, label)
        assert abs(grad.sum()) < 1e-12
        for i in range(6):
            bumped = logits.copy()
            bumped[i] += h
            up, _ = softmax_cross_entropy(bumped, label)
            bumped[i] -= 2 * h
            down, _ = softmax_cross_entropy(bumped, label)
            assert (up - down) / (2 * h) == pytest.approx(grad[i], abs=1e-6)


def test_empty_logits_are_rejected():
    with pytest.raises(ShapeError):
        softmax_cross_entropy(np.array([]), 0)


def test_softmax_sums_to_one(rng):
    p = softmax(rng.normal(size=7) * 50)
    assert p.sum() == pytest.approx(1.0)


def test_forward_is_deterministic(rng):
    net = _net([4, 8, 3], seed=5, precision="float32")
    x = rng.normal(size=(16, 4))
    assert np.array_equal(net.forward(x), net.forward(x))
