# src/genconv/core/numeric.py
"""
Dense numeric building blocks for the filter network f.

Matrices are row-major numpy arrays. Precision is chosen per model
("float32" by default, "float64" for gradient checks) and every parameter
and cache inherits it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ShapeError, StateError

DEFAULT_SLOPE = 0.01
PRECISIONS = {"float32": np.float32, "float64": np.float64}


def resolve_dtype(precision: str | np.dtype | type) -> np.dtype:
    if isinstance(precision, str):
        try:
            return np.dtype(PRECISIONS[precision])
        except KeyError:
            raise ShapeError(f"unknown precision: {precision}") from None
    return np.dtype(precision)


# ─────────────────────────────────────────────
# ⚡ ACTIVATIONS
# ─────────────────────────────────────────────
class Activation(str, Enum):
    LEAKY_RELU = "leaky_relu"
    IDENTITY = "identity"


def leaky_relu(x, slope: float = DEFAULT_SLOPE):
    """x if x >= 0 else slope * x; scalars stay scalars."""
    if np.isscalar(x):
        return x if x >= 0 else slope * x
    x = np.asarray(x)
    return np.where(x >= 0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, slope: float = DEFAULT_SLOPE) -> np.ndarray:
    x = np.asarray(x)
    return np.where(x >= 0, np.ones_like(x), np.full_like(x, slope))


# ─────────────────────────────────────────────
# 🧮 AFFINE LAYER
# ─────────────────────────────────────────────
@dataclass
class AffineLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: Activation = Activation.IDENTITY
    slope: float = DEFAULT_SLOPE

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ShapeError(f"weight must be 2-D, got shape {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"bias length {self.bias.shape} does not match weight rows {self.weight.shape[0]}"
            )

    @property
    def in_width(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_width(self) -> int:
        return int(self.weight.shape[0])

    @property
    def parameter_count(self) -> int:
        return int(self.weight.size + self.bias.size)


# ─────────────────────────────────────────────
# 🧠 FILTER NETWORK
# ─────────────────────────────────────────────
@dataclass
class _ForwardCache:
    inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    squeeze: bool = False


class FilterNetwork:
    """
    The small MLP f mapping one relation row (Δ, distance, features) to D′ channels.

    ``forward`` accepts a single vector or a batch of rows and remembers what
    ``backward`` needs; one instance therefore serves one forward/backward pair
    at a time.
    """

    def __init__(self, layers: Sequence[AffineLayer]):
        self.layers: List[AffineLayer] = list(layers)
        if not self.layers:
            raise ShapeError("a filter network needs at least one layer")
        for i in range(1, len(self.layers)):
            if self.layers[i].in_width != self.layers[i - 1].out_width:
                raise ShapeError(
                    f"layer {i} expects width {self.layers[i].in_width}, "
                    f"previous layer emits {self.layers[i - 1].out_width}"
                )
        self._cache: Optional[_ForwardCache] = None

    @classmethod
    def initialize(
        cls,
        widths: Sequence[int],
        rng: np.random.Generator,
        slope: float = DEFAULT_SLOPE,
        output_activation: bool = False,
        precision: str = "float32",
        output_scale: float = 1.0,
    ) -> "FilterNetwork":
        """Uniform ±sqrt(6/fan_in) weights, zero biases; leaky ReLU between layers.

        ``output_scale`` multiplies the last layer's bound.
        """
        if len(widths) < 2:
            raise ShapeError("need at least input and output widths")
        dtype = resolve_dtype(precision)
        layers = []
        n = len(widths) - 1
        for i in range(n):
            fan_in, fan_out = widths[i], widths[i + 1]
            bound = np.sqrt(6.0 / fan_in) if fan_in > 0 else 0.0
            last = i == n - 1
            if last:
                bound *= output_scale
            weight = rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype)
            act = Activation.LEAKY_RELU if (not last or output_activation) else Activation.IDENTITY
            layers.append(AffineLayer(weight, np.zeros(fan_out, dtype=dtype), act, slope))
        return cls(layers)

    # ---- shape info ----
    @property
    def input_width(self) -> int:
        return self.layers[0].in_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].out_width

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0].weight.dtype

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def parameters(self) -> List[np.ndarray]:
        """Weights and biases in declared order: W0, b0, W1, b1, ..."""
        params: List[np.ndarray] = []
        for layer in self.layers:
            params.extend((layer.weight, layer.bias))
        return params

    # ---- forward ----
    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_width:
            raise ShapeError(
                f"filter expects rows of width {self.input_width}, got shape {x.shape}"
            )
        cache = _ForwardCache(squeeze=squeeze)
        h = x
        for layer in self.layers:
            cache.inputs.append(h)
            z = h @ layer.weight.T + layer.bias
            cache.pre_activations.append(z)
            h = leaky_relu(z, layer.slope) if layer.activation is Activation.LEAKY_RELU else z
        self._cache = cache
        return h[0] if squeeze else h

    __call__ = forward

    # ---- backward ----
    def backward(self, upstream: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """Return (param grads aligned with ``parameters()``, input grad) for the last forward."""
        if self._cache is None:
            raise StateError("backward called before forward")
        cache = self._cache
        g = np.asarray(upstream, dtype=self.dtype)
        if cache.squeeze:
            g = g.reshape(1, -1)
        expected = cache.pre_activations[-1].shape
        if g.shape != expected:
            raise ShapeError(f"upstream gradient shape {g.shape} != output shape {expected}")

        grads: List[np.ndarray] = [None] * (2 * len(self.layers))  # type: ignore[list-item]
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if layer.activation is Activation.LEAKY_RELU:
                g = g * leaky_relu_grad(cache.pre_activations[i], layer.slope)
            grads[2 * i] = g.T @ cache.inputs[i]
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.weight
        return grads, (g[0] if cache.squeeze else g)

    def clear_cache(self) -> None:
        self._cache = None


def mlp_forward(net: FilterNetwork, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def mlp_backward(net: FilterNetwork, upstream: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
    return net.backward(upstream)


# ─────────────────────────────────────────────
# 🎯 LOSS
# ─────────────────────────────────────────────
def softmax_cross_entropy(logits: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
    """Stable softmax + negative log-likelihood; returns (loss, d loss / d logits)."""
    logits = np.asarray(logits)
    if logits.ndim != 1 or logits.size == 0:
        raise ShapeError(f"logits must be a non-empty vector, got shape {logits.shape}")
    if not 0 <= label < logits.size:
        raise ShapeError(f"label {label} out of range for {logits.size} classes")
    shifted = logits - logits.max()
    log_norm = np.log(np.exp(shifted).sum())
    loss = max(float(log_norm - shifted[label]), 0.0)
    grad = np.exp(shifted - log_norm)
    grad[label] -= 1.0
    return loss, grad


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.asarray(logits) - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


# ─────────────────────────────────────────────
# 🔢 PARAMETER COUNTING
# ─────────────────────────────────────────────
def parameter_count(obj) -> int:
    """Total weights + biases of a FilterNetwork, a model, or an iterable of either."""
    if obj is None:
        return 0
    if hasattr(obj, "parameters"):
        return int(sum(p.size for p in obj.parameters()))
    if isinstance(obj, Iterable):
        return int(sum(parameter_count(o) for o in obj))
    raise TypeError(f"cannot count parameters of {type(obj).__name__}")
