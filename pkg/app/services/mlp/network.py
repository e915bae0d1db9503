"""
Scalar radial force network F(r; theta_F).

A multi-layer perceptron with one input and one output, LeakyReLU hidden
units and no activation on the output layer. The flat parameter vector is
laid out layer-major; within a layer the weight matrix (n_out x n_in) comes
first in row-major order, followed by the bias when the layer has one.

The reverse pass is written out by hand: the forward pass keeps every
pre-activation and activation, the backward pass walks the layers in
reverse and yields both dF/dr and dF/dtheta_F in one sweep.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.exception_handling.error_handler import InvalidArgumentError

DEFAULT_HIDDEN = (100, 100, 100)


@dataclass(frozen=True)
class MlpSpec:
    """
    Architecture of the radial force network.

    Attributes:
        layer_sizes: Widths from input to output, first and last equal to 1
        leaky_slope: Slope of the LeakyReLU on the negative side
        bias_mask: One flag per weight layer; all layers but the last are biased
    """

    layer_sizes: Tuple[int, ...] = (1, *DEFAULT_HIDDEN, 1)
    leaky_slope: float = 0.01
    bias_mask: Optional[Tuple[bool, ...]] = field(default=None)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2 or sizes[0] != 1 or sizes[-1] != 1:
            raise InvalidArgumentError(
                "Force network must map one input to one output",
                layer_sizes=list(sizes),
            )
        if any(n < 1 for n in sizes):
            raise InvalidArgumentError("Layer widths must be positive", layer_sizes=list(sizes))
        object.__setattr__(self, "layer_sizes", sizes)
        mask = self.bias_mask
        if mask is None:
            mask = tuple([True] * (len(sizes) - 2) + [False])
        if len(mask) != len(sizes) - 1:
            raise InvalidArgumentError("bias_mask needs one entry per weight layer")
        object.__setattr__(self, "bias_mask", tuple(bool(b) for b in mask))

    @classmethod
    def from_hidden(cls, hidden: Sequence[int], leaky_slope: float = 0.01) -> "MlpSpec":
        """Build a spec from hidden widths only."""
        return cls(layer_sizes=(1, *hidden, 1), leaky_slope=leaky_slope)

    @property
    def n_layers(self) -> int:
        """Number of weight layers."""
        return len(self.layer_sizes) - 1

    def param_count(self) -> int:
        """Sum of n_i * n_{i+1} plus the widths of biased layers."""
        sizes = self.layer_sizes
        weights = sum(sizes[i] * sizes[i + 1] for i in range(self.n_layers))
        biases = sum(sizes[i + 1] for i in range(self.n_layers) if self.bias_mask[i])
        return weights + biases


def _unpack(spec: MlpSpec, theta) -> List[Tuple[np.ndarray, Optional[np.ndarray]]]:
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != spec.param_count():
        raise InvalidArgumentError(
            "Parameter vector length does not match the network",
            expected=spec.param_count(),
            actual=int(theta.size),
        )
    layers = []
    offset = 0
    for i in range(spec.n_layers):
        n_in, n_out = spec.layer_sizes[i], spec.layer_sizes[i + 1]
        w = theta[offset : offset + n_in * n_out].reshape(n_out, n_in)
        offset += n_in * n_out
        b = None
        if spec.bias_mask[i]:
            b = theta[offset : offset + n_out]
            offset += n_out
        layers.append((w, b))
    return layers


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z >= 0.0, z, slope * z)


def _leaky_derivative(z: np.ndarray, slope: float) -> np.ndarray:
    # kink at zero takes the positive-side derivative
    return np.where(z >= 0.0, 1.0, slope)


def init_weights(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """
    Glorot-uniform initial weights with zero biases.

    Args:
        spec: Network architecture
        rng: Random generator

    Returns:
        np.ndarray: Flat parameter vector
    """
    parts = []
    for i in range(spec.n_layers):
        n_in, n_out = spec.layer_sizes[i], spec.layer_sizes[i + 1]
        limit = np.sqrt(6.0 / (n_in + n_out))
        parts.append(rng.uniform(-limit, limit, size=n_in * n_out))
        if spec.bias_mask[i]:
            parts.append(np.zeros(n_out))
    return np.concatenate(parts)


def _forward(spec: MlpSpec, layers, r: float):
    a = np.array([float(r)])
    memory = []
    for i, (w, b) in enumerate(layers):
        z = w @ a
        if b is not None:
            z = z + b
        last = i == len(layers) - 1
        memory.append((a, z))
        a = z if last else _leaky(z, spec.leaky_slope)
    return memory, float(a[0])


def mlp_forward(spec: MlpSpec, theta_f, r: float) -> float:
    """
    Evaluate F(r; theta_F).

    Args:
        spec: Network architecture
        theta_f: Flat parameter vector
        r: Radius

    Returns:
        float: Scalar force magnitude

    Raises:
        InvalidArgumentError: If theta_f has the wrong length
    """
    _, out = _forward(spec, _unpack(spec, theta_f), r)
    return out


def mlp_grads(spec: MlpSpec, theta_f, r: float) -> Tuple[float, np.ndarray]:
    """
    Derivatives of F(r; theta_F) in r and in theta_F from one reverse pass.

    Args:
        spec: Network architecture
        theta_f: Flat parameter vector
        r: Radius

    Returns:
        Tuple[float, np.ndarray]: dF/dr and the flat dF/dtheta_F
    """
    layers = _unpack(spec, theta_f)
    memory, _ = _forward(spec, layers, r)

    grads: List[np.ndarray] = []
    delta = np.array([1.0])  # dF/dz at the output layer
    for i in reversed(range(len(layers))):
        w, b = layers[i]
        a_in, _ = memory[i]
        layer_grads = [np.outer(delta, a_in).ravel()]
        if b is not None:
            layer_grads.append(delta.copy())
        grads[:0] = layer_grads
        da = w.T @ delta
        if i > 0:
            _, z_prev = memory[i - 1]
            delta = da * _leaky_derivative(z_prev, spec.leaky_slope)
        else:
            delta = da
    return float(delta[0]), np.concatenate(grads)
