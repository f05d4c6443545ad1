"""Small multilayer perceptron emitting a nonnegative directional weight.

The network maps a concatenated direction pair (rhat, shat) in R^6 through
tanh hidden layers to a single output whose absolute value is the weight.
Everything is plain numpy with handwritten forward and reverse passes; the
reverse pass returns parameter gradients in the same container shape as the
parameters themselves, which keeps the optimizer generic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LAYER_SIZES = (6, 20, 20, 1)


@dataclass(frozen=True)
class MLPParams:
    """Weights (out, in) and biases per layer; input dim 6, output dim 1."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        # copy so the caller's arrays are never locked
        ws = tuple(np.array(w, dtype=float, order="C") for w in self.weights)
        bs = tuple(np.array(b, dtype=float, order="C") for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise ValueError("need one bias vector per weight matrix")
        if ws[0].shape[1] != 6:
            raise ValueError("first layer must take 6 inputs (rhat, shat)")
        if ws[-1].shape[0] != 1:
            raise ValueError("last layer must emit a single output")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: bias shape {b.shape} does not match {w.shape}")
            if i > 0 and w.shape[1] != ws[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input dim does not chain")
        for a in (*ws, *bs):
            a.flags.writeable = False
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def scaled(self, factor: float) -> "MLPParams":
        return MLPParams(weights=tuple(factor * w for w in self.weights),
                         biases=tuple(factor * b for b in self.biases))

    def shifted(self, other: "MLPParams", factor: float = 1.0) -> "MLPParams":
        """self + factor * other, elementwise over all parameters."""
        return MLPParams(
            weights=tuple(w + factor * o for w, o in zip(self.weights, other.weights)),
            biases=tuple(b + factor * o for b, o in zip(self.biases, other.biases)))

    def dot(self, other: "MLPParams") -> float:
        total = 0.0
        for w, o in zip(self.weights, other.weights):
            total += float(np.vdot(w, o))
        for b, o in zip(self.biases, other.biases):
            total += float(np.vdot(b, o))
        return total

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))


def init(seed: int, scale: float = 1.0,
         layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES) -> MLPParams:
    """Random parameters: weights uniform in +-scale/sqrt(fan_in), biases zero.

    scale=0 gives the identically-zero weight function.
    """
    if len(layer_sizes) < 2 or layer_sizes[0] != 6 or layer_sizes[-1] != 1:
        raise ValueError("layer sizes must run from 6 inputs to 1 output")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = scale / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights=tuple(weights), biases=tuple(biases))


def _forward_batch(theta: MLPParams, x: np.ndarray):
    """Forward pass on rows of x; returns activations for the reverse pass."""
    acts = [x]
    z = None
    for w, b in zip(theta.weights, theta.biases):
        z = acts[-1] @ w.T + b
        if w is not theta.weights[-1]:
            acts.append(np.tanh(z))
    return np.abs(z[:, 0]), z[:, 0], acts


def forward(theta: MLPParams, rhat, shat) -> float:
    """Weight w(rhat, shat) = |mlp([rhat, shat])| for one direction pair."""
    x = np.concatenate([np.asarray(rhat, dtype=float),
                        np.asarray(shat, dtype=float)])[None, :]
    if x.shape[1] != 6:
        raise ValueError("rhat and shat must each have 3 components")
    return float(_forward_batch(theta, x)[0][0])


def _grid_inputs(quad_r, quad_s) -> np.ndarray:
    nr, ns = len(quad_r), len(quad_s)
    x = np.empty((nr * ns, 6))
    x[:, :3] = np.repeat(quad_r.nodes, ns, axis=0)
    x[:, 3:] = np.tile(quad_s.nodes, (nr, 1))
    return x


def forward_grid(theta: MLPParams, quad_r, quad_s) -> np.ndarray:
    """Weights at all node pairs of two direction sets, shape (nr, ns)."""
    out, _, _ = _forward_batch(theta, _grid_inputs(quad_r, quad_s))
    return out.reshape(len(quad_r), len(quad_s))


def backprop(theta: MLPParams, quad_r, quad_s, upstream) -> MLPParams:
    """Gradient of sum_ij upstream[i, j] * w(r_i, s_j) with respect to theta.

    The absolute value at the output uses subgradient 0 at exactly 0.
    Returns gradients packed as an MLPParams.
    """
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (len(quad_r), len(quad_s)):
        raise ValueError("upstream must have shape (n_quad_r, n_quad_s)")
    x = _grid_inputs(quad_r, quad_s)
    _, z_out, acts = _forward_batch(theta, x)
    delta = (upstream.ravel() * np.sign(z_out))[:, None]
    grad_w, grad_b = [], []
    for layer in range(len(theta.weights) - 1, -1, -1):
        grad_w.append(delta.T @ acts[layer])
        grad_b.append(delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ theta.weights[layer]) * (1.0 - acts[layer] ** 2)
    return MLPParams(weights=tuple(reversed(grad_w)), biases=tuple(reversed(grad_b)))


def save_params(theta: MLPParams, path) -> None:
    """Text serialization: layer-size header, then one double per line."""
    with open(path, "w") as fh:
        fh.write("# mlp weight parameters\n")
        fh.write(" ".join(str(s) for s in theta.layer_sizes) + "\n")
        for w, b in zip(theta.weights, theta.biases):
            for v in w.ravel():
                fh.write(f"{float(v)!r}\n")
            for v in b:
                fh.write(f"{float(v)!r}\n")


def load_params(path) -> MLPParams:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    sizes = tuple(int(tok) for tok in lines[0].split())
    values = iter(float(ln) for ln in lines[1:])
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(np.asarray([next(values) for _ in range(fan_out * fan_in)])
                       .reshape(fan_out, fan_in))
        biases.append(np.asarray([next(values) for _ in range(fan_out)]))
    leftover = sum(1 for _ in values)
    if leftover:
        raise ValueError(f"{path}: {leftover} extra values beyond the declared layout")
    return MLPParams(weights=tuple(weights), biases=tuple(biases))
