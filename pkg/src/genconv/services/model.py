# src/genconv/services/model.py
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..core.cloud import PointCloud
from ..core.numeric import resolve_dtype
from ..core.optim import OptimizerState
from ..core.rng import derive_int_seed, random_stream
from ..domain.models import ModelConfig
from ..errors import ConfigError, ShapeError
from ..layers.genconv_layer import GenConvLayer
from ..logging import get_component_logger

log = get_component_logger("model")


@dataclass
class TrainingState:
    """Everything beyond the weights that a resumed run needs."""

    optimizer: Optional[OptimizerState] = None
    epoch: int = 0
    rng_state: Optional[Dict[str, Any]] = None


@dataclass
class ForwardTrace:
    """Per-layer outputs of the last forward pass (query counts, widths, activations)."""

    clouds: List[PointCloud] = field(default_factory=list)

    @property
    def query_counts(self) -> List[int]:
        return [c.n_points for c in self.clouds]

    @property
    def column_widths(self) -> List[int]:
        return [c.spatial_dims + c.feature_dims for c in self.clouds]


class GenConvModel:
    """
    A stack of generalized convolutions followed by the origin-query global head.

    Parameters are exposed in declared order (layer 0 W0, b0, W1, b1, ..., then
    the head), which is also the checkpoint blob order.
    """

    def __init__(self, config: ModelConfig, layers: List[GenConvLayer], head: GenConvLayer):
        self.config = config
        self.layers = layers
        self.head = head
        self.training_state: Optional[TrainingState] = None
        self.last_trace = ForwardTrace()

    # ---- parameters ----
    @property
    def dtype(self) -> np.dtype:
        return resolve_dtype(self.config.precision)

    def parameters(self) -> List[np.ndarray]:
        params: List[np.ndarray] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        params.extend(self.head.parameters())
        return params

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def flat_parameters(self) -> np.ndarray:
        params = self.parameters()
        if not params:
            return np.empty(0, dtype=self.dtype)
        return np.concatenate([p.ravel() for p in params])

    def load_flat_parameters(self, blob: np.ndarray) -> None:
        blob = np.asarray(blob)
        if blob.size != self.parameter_count:
            raise ShapeError(f"parameter blob holds {blob.size} values, model has {self.parameter_count}")
        offset = 0
        for p in self.parameters():
            p[...] = blob[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    def clone(self) -> "GenConvModel":
        return copy.deepcopy(self)

    # ---- forward / backward ----
    def layer_seed(self, seed: int, layer_index: int) -> int:
        return derive_int_seed(seed, "stride", layer_index)

    def prepare(self, cloud: PointCloud) -> PointCloud:
        if cloud.spatial_dims != self.config.spatial_dims:
            raise ShapeError(
                f"model expects S={self.config.spatial_dims}, cloud has S={cloud.spatial_dims}"
            )
        return cloud if cloud.dtype == self.dtype else cloud.astype(self.dtype)

    def forward(self, cloud: PointCloud, seed: int = 0) -> np.ndarray:
        """Pre-softmax logits; ``seed`` drives the per-layer query sampling."""
        current = self.prepare(cloud)
        trace = ForwardTrace()
        for i, layer in enumerate(self.layers):
            current = layer.forward(current, self.layer_seed(seed, i))
            trace.clouds.append(current)
        self.last_trace = trace
        return self.head.head_forward(current)

    def backward(self, grad_logits: np.ndarray) -> List[np.ndarray]:
        """Parameter gradients aligned with ``parameters()``."""
        head_grads, feature_grad = self.head.head_backward(grad_logits)
        per_layer: List[List[np.ndarray]] = []
        for layer in reversed(self.layers):
            grads, feature_grad = layer.backward(feature_grad)
            per_layer.append(grads)
        out: List[np.ndarray] = []
        for grads in reversed(per_layer):
            out.extend(grads)
        out.extend(head_grads)
        return out

    def predict(self, cloud: PointCloud, seed: int = 0) -> int:
        # np.argmax returns the lowest index among ties
        return int(np.argmax(self.forward(cloud, seed)))

    def dump_activations(self, cloud: PointCloud, layer_index: int, seed: int = 0) -> PointCloud:
        if not 0 <= layer_index < len(self.layers):
            raise ShapeError(f"layer index {layer_index} out of range for {len(self.layers)} layers")
        self.forward(cloud, seed)
        return self.last_trace.clouds[layer_index]

    def clear_caches(self) -> None:
        for layer in self.layers:
            layer.clear_cache()
        self.head.clear_cache()


def _check_chain(config: ModelConfig) -> None:
    in_features = config.input_features
    for i, spec in enumerate(config.layers):
        if spec.in_features is not None and spec.in_features != in_features:
            raise ConfigError(
                f"declares {spec.in_features} input features but receives {in_features}",
                layer_index=i,
            )
        in_features = spec.out_channels
    head = config.head
    if head.in_features is not None and head.in_features != in_features:
        raise ConfigError(
            f"head declares {head.in_features} input features but receives {in_features}",
            layer_index=len(config.layers),
        )


def build_model(config: ModelConfig) -> GenConvModel:
    """Layer stack + global head with fresh weights drawn from the "init" stream."""
    _check_chain(config)
    rng = random_stream(config.seed, "init")
    layers: List[GenConvLayer] = []
    in_features = config.input_features
    for spec in config.layers:
        layers.append(
            GenConvLayer.from_spec(
                spec,
                in_features,
                config.spatial_dims,
                rng,
                slope=config.activation_slope,
                filter_output_activation=config.filter_output_activation,
                precision=config.precision,
                sampling=config.sampling,
            )
        )
        in_features = spec.out_channels
    head = GenConvLayer.head_from_spec(
        config.head,
        in_features,
        config.num_classes,
        config.spatial_dims,
        rng,
        slope=config.activation_slope,
        filter_output_activation=config.filter_output_activation,
        precision=config.precision,
    )
    model = GenConvModel(config, layers, head)
    log.info(
        "model_built",
        layers=len(layers),
        classes=config.num_classes,
        parameters=model.parameter_count,
        precision=config.precision,
    )
    return model
