"""Feedforward network with tanh hidden layers and a linear scalar output.

The network maps one wheel velocity (m/s) to one rpm command.  Values are
immutable once constructed; the trainer works on flattened copies of the
parameters.  The public forward pass accumulates each affine transform
sequentially over the input index, which makes a batched evaluation
bit-identical to evaluating its columns one at a time (BLAS matmul does
not guarantee that).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractError,
    DegenerateRangeError,
    InvalidParameterError,
    NumericFaultError,
)


@dataclass
class Network:
    """Layered weights/biases with fixed activation tags.

    layer_sizes runs [1, n_1, ..., n_L, 1]; weights[l] has shape
    (n_{l+1}, n_l) and biases[l] shape (n_{l+1},).
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "tanh"
    output_activation: str = "linear"

    def __post_init__(self):
        sizes = [int(s) for s in self.layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise InvalidParameterError(f"bad layer_sizes {self.layer_sizes!r}")
        if sizes[0] != 1 or sizes[-1] != 1:
            raise InvalidParameterError("input and output layers must have size 1")
        if self.hidden_activation != "tanh" or self.output_activation != "linear":
            raise InvalidParameterError("only tanh hidden / linear output supported")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise InvalidParameterError("weights/biases must have one entry per layer")
        self.layer_sizes = sizes
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.shape != (sizes[layer + 1], sizes[layer]):
                raise InvalidParameterError(
                    f"layer {layer} weight shape {w.shape} != {(sizes[layer + 1], sizes[layer])}"
                )
            if b.shape != (sizes[layer + 1],):
                raise InvalidParameterError(
                    f"layer {layer} bias shape {b.shape} != {(sizes[layer + 1],)}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise InvalidParameterError(f"layer {layer} has non-finite parameters")
            self.weights[layer] = w
            self.biases[layer] = b

    @property
    def n_params(self) -> int:
        return param_count(self.layer_sizes)


def param_count(layer_sizes: list[int]) -> int:
    """Total trainable parameter count: sum of n_l*n_{l-1} + n_l per layer."""
    return sum(
        layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1]
        for l in range(len(layer_sizes) - 1)
    )


def init_network(layer_sizes: list[int], seed: int) -> Network:
    """Seeded initialization: weights uniform on +-1/sqrt(fan_in), biases zero.

    Keeps tanh pre-activations in the near-linear region at the start of
    training.
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for l in range(len(layer_sizes) - 1):
        fan_in = layer_sizes[l]
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(layer_sizes[l + 1], fan_in)))
        biases.append(np.zeros(layer_sizes[l + 1]))
    return Network(layer_sizes=list(layer_sizes), weights=weights, biases=biases)


def _affine_columnwise(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Sequential accumulation over the input index: each output element is
    # built in a fixed order regardless of batch width, so column p of the
    # result is bit-identical to the single-column evaluation.
    z = np.repeat(b[:, None], a.shape[1], axis=1)
    for j in range(w.shape[1]):
        z += w[:, j : j + 1] * a[j : j + 1, :]
    return z


def forward_batch(net: Network, v: np.ndarray) -> np.ndarray:
    """Evaluate the network on a batch of inputs (shape (P,) -> (P,))."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ContractError(f"expected a 1-D batch with P >= 1, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise ContractError("inputs must be finite")
    a = v[None, :]
    last = len(net.weights) - 1
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = _affine_columnwise(w, a, b)
        a = z if layer == last else np.tanh(z)
    out = a[0]
    if not np.isfinite(out).all():
        raise NumericFaultError("forward pass produced non-finite output")
    return out


def forward(net: Network, x: float) -> float:
    """Evaluate the network on one input."""
    return float(forward_batch(net, np.array([x], dtype=np.float64))[0])


def mse(outputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error (1/P) * sum((output - target)^2)."""
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if outputs.shape != targets.shape:
        raise ContractError(f"shape mismatch {outputs.shape} vs {targets.shape}")
    diff = outputs - targets
    return float(diff @ diff / diff.size)


def flatten(net: Network) -> np.ndarray:
    """Concatenate all parameters: per layer, weights row-major then biases."""
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(w.ravel(order="C"))
        parts.append(b)
    return np.concatenate(parts)


def unflatten(layer_sizes: list[int], w_flat: np.ndarray) -> Network:
    """Rebuild a Network from a flattened parameter vector."""
    w_flat = np.asarray(w_flat, dtype=np.float64)
    expected = param_count(layer_sizes)
    if w_flat.shape != (expected,):
        raise ContractError(f"parameter vector has length {w_flat.shape}, expected ({expected},)")
    weights, biases, pos = [], [], 0
    for l in range(len(layer_sizes) - 1):
        rows, cols = layer_sizes[l + 1], layer_sizes[l]
        weights.append(w_flat[pos : pos + rows * cols].reshape(rows, cols).copy())
        pos += rows * cols
        biases.append(w_flat[pos : pos + rows].copy())
        pos += rows
    return Network(layer_sizes=list(layer_sizes), weights=weights, biases=biases)


@dataclass(frozen=True)
class NormParams:
    """Affine map fitted on training data only: [lo, hi] -> [-1, +1]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise DegenerateRangeError(f"degenerate range [{self.lo!r}, {self.hi!r}]")


def norm_fit(data: np.ndarray) -> NormParams:
    """Fit scaling parameters to a data vector (its min/max)."""
    data = np.asarray(data, dtype=np.float64)
    lo, hi = float(data.min()), float(data.max())
    return NormParams(lo=lo, hi=hi)


def norm_apply(p: NormParams, x):
    """Map raw values into the [-1, +1] training range."""
    return (np.asarray(x, dtype=np.float64) - p.lo) * (2.0 / (p.hi - p.lo)) - 1.0


def norm_reverse(p: NormParams, y):
    """Map normalized values back to raw units."""
    return (np.asarray(y, dtype=np.float64) + 1.0) * ((p.hi - p.lo) / 2.0) + p.lo


@dataclass
class Batch:
    """Paired velocity inputs (m/s) and rpm targets, one column per sample."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64).reshape(-1)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if self.inputs.size != self.targets.size:
            raise InvalidParameterError(
                f"inputs ({self.inputs.size}) and targets ({self.targets.size}) differ in length"
            )
        if self.inputs.size < 1:
            raise InvalidParameterError("batch must contain at least one sample")

    def __len__(self) -> int:
        return int(self.inputs.size)
