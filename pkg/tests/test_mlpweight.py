import numpy as np
import pytest

from atfinterp import mlpweight
from atfinterp.mlpweight import MLPParams, backprop, forward, forward_grid
from atfinterp.sphere import tdesign


def zero_params(layer_sizes=(6, 3, 1)):
    ws = []
    bs = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        ws.append(np.zeros((fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return MLPParams(weights=tuple(ws), biases=tuple(bs))


def test_init_deterministic_and_scaled():
    a = mlpweight.init(5, 0.3)
    b = mlpweight.init(5, 0.3)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    c = mlpweight.init(6, 0.3)
    assert any(not np.array_equal(wa, wc)
               for wa, wc in zip(a.weights, c.weights))
    z = mlpweight.init(5, 0.0)
    assert all(np.all(w == 0) for w in z.weights)


def test_default_layer_sizes():
    theta = mlpweight.init(0)
    assert theta.layer_sizes == mlpweight.DEFAULT_LAYER_SIZES


def test_forward_nonnegative():
    rng = np.random.default_rng(1)
    theta = mlpweight.init(2, 1.0)
    for _ in range(30):
        rhat = rng.standard_normal(3)
        shat = rng.standard_normal(3)
        rhat /= np.linalg.norm(rhat)
        shat /= np.linalg.norm(shat)
        assert forward(theta, rhat, shat) >= 0.0


def test_zero_network_outputs_zero():
    theta = zero_params()
    assert forward(theta, np.array([1.0, 0, 0]), np.array([0, 1.0, 0])) == 0.0
    grid = forward_grid(theta, tdesign(3), tdesign(3))
    assert np.all(grid == 0.0)


def test_forward_grid_matches_pointwise():
    theta = mlpweight.init(3, 0.8)
    qr = tdesign(3)
    qs = tdesign(4)
    grid = forward_grid(theta, qr, qs)
    assert grid.shape == (16, 25)
    rng = np.random.default_rng(0)
    for _ in range(3):
        i = int(rng.integers(16))
        j = int(rng.integers(25))
        assert np.isclose(grid[i, j],
                          forward(theta, qr.nodes[i], qs.nodes[j]))


def test_invalid_shapes_rejected():
    with pytest.raises(ValueError):
        MLPParams(weights=(np.zeros((3, 5)), np.zeros((1, 3))),
                  biases=(np.zeros(3), np.zeros(1)))
    with pytest.raises(ValueError):
        MLPParams(weights=(np.zeros((3, 6)), np.zeros((2, 3))),
                  biases=(np.zeros(3), np.zeros(2)))
    with pytest.raises(ValueError):
        mlpweight.init(0, layer_sizes=(6, 4))


def test_backprop_zero_upstream():
    theta = mlpweight.init(4, 0.5, layer_sizes=(6, 3, 1))
    qr = tdesign(3)
    grad = backprop(theta, qr, qr, np.zeros((16, 16)))
    assert grad.norm() == 0.0


def test_backprop_linear_in_upstream():
    theta = mlpweight.init(4, 0.5, layer_sizes=(6, 3, 1))
    qr = tdesign(3)
    rng = np.random.default_rng(2)
    upstream = rng.standard_normal((16, 16))
    g1 = backprop(theta, qr, qr, upstream)
    g3 = backprop(theta, qr, qr, 3.0 * upstream)
    diff = g3.shifted(g1, -3.0)
    assert diff.norm() < 1e-12 * max(g1.norm(), 1.0)


def test_backprop_matches_finite_differences():
    # scalar objective sum(upstream * w_grid); check every parameter
    theta = mlpweight.init(7, 0.9, layer_sizes=(6, 3, 1))
    qr = tdesign(3)
    rng = np.random.default_rng(5)
    upstream = rng.standard_normal((16, 16))
    grad = backprop(theta, qr, qr, upstream)
    h = 1e-5

    def objective(params):
        return float(np.sum(upstream * forward_grid(params, qr, qr)))

    worst = 0.0
    for layer in range(len(theta.weights)):
        for idx in np.ndindex(theta.weights[layer].shape):
            bump = [np.zeros_like(w) for w in theta.weights]
            bump[layer][idx] = h
            probe = MLPParams(weights=tuple(bump),
                              biases=tuple(np.zeros_like(b)
                                           for b in theta.biases))
            fd = (objective(theta.shifted(probe)) -
                  objective(theta.shifted(probe, -1.0))) / (2 * h)
            err = abs(fd - grad.weights[layer][idx])
            worst = max(worst, err / max(abs(fd), 1e-12))
        for j in range(theta.biases[layer].size):
            bump = [np.zeros_like(b) for b in theta.biases]
            bump[layer][j] = h
            probe = MLPParams(weights=tuple(np.zeros_like(w)
                                            for w in theta.weights),
                              biases=tuple(bump))
            fd = (objective(theta.shifted(probe)) -
                  objective(theta.shifted(probe, -1.0))) / (2 * h)
            err = abs(fd - grad.biases[layer][j])
            worst = max(worst, err / max(abs(fd), 1e-12))
    assert worst < 1e-5


def test_params_roundtrip(tmp_path):
    theta = mlpweight.init(9, 0.4)
    path = tmp_path / "theta.txt"
    mlpweight.save_params(theta, path)
    back = mlpweight.load_params(path)
    assert back.layer_sizes == theta.layer_sizes
    for wa, wb in zip(theta.weights, back.weights):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(theta.biases, back.biases):
        assert np.array_equal(ba, bb)


def test_params_algebra():
    a = mlpweight.init(1, 0.5, layer_sizes=(6, 2, 1))
    b = mlpweight.init(2, 0.5, layer_sizes=(6, 2, 1))
    s = a.shifted(b, 2.0)
    assert np.allclose(s.weights[0], a.weights[0] + 2.0 * b.weights[0])
    assert np.isclose(a.dot(b), b.dot(a))
    assert np.isclose(a.scaled(2.0).norm(), 2.0 * a.norm())
