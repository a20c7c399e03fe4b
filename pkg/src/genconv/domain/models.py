from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LayerSpec(_Strict):
    """One generalized convolution: neighbor count, striding and the filter MLP shape."""

    k: int = Field(ge=1)
    stride_fraction: float = Field(default=1.0, gt=0.0, le=1.0)
    hidden_widths: List[int] = Field(default_factory=list)
    out_channels: int = Field(ge=1)
    concat_coords: bool = True
    # Declared incoming feature width; checked against the chain when given
    in_features: Optional[int] = Field(default=None, ge=0)

    @field_validator("hidden_widths")
    @classmethod
    def _positive_widths(cls, v: List[int]) -> List[int]:
        if any(w < 1 for w in v):
            raise ValueError("hidden widths must be >= 1")
        return v


class HeadSpec(_Strict):
    hidden_widths: List[int] = Field(default_factory=list)
    in_features: Optional[int] = Field(default=None, ge=0)
    dense: bool = False
    # Shrinks the initial logits; the head sums over every point of the cloud
    output_init_scale: float = Field(default=0.1, gt=0.0, le=1.0)


class OptimizerSpec(_Strict):
    kind: Literal["adam", "sgd"] = "adam"
    lr: float = Field(default=1e-3, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    accumulate_every: int = Field(default=1, ge=1)


class ModelConfig(_Strict):
    spatial_dims: Literal[2, 3] = 2
    num_classes: int = Field(ge=1)
    input_features: int = Field(default=0, ge=0)
    layers: List[LayerSpec] = Field(default_factory=list)
    head: HeadSpec = Field(default_factory=HeadSpec)
    activation_slope: float = Field(default=0.01, gt=0.0, lt=1.0)
    filter_output_activation: bool = False
    sampling: Literal["uniform", "farthest"] = "uniform"
    precision: Literal["float32", "float64"] = "float32"
    optimizer: OptimizerSpec = Field(default_factory=OptimizerSpec)
    epochs: int = Field(default=20, ge=0)
    seed: int = Field(default=0, ge=0)


class DataSpec(_Strict):
    train_dir: Optional[str] = None
    test_dir: Optional[str] = None
    modelnet_root: Optional[str] = None
    cache_dir: Optional[str] = None
    points_per_cloud: int = Field(default=1000, ge=1)
    # toy generator
    toy_points: int = Field(default=100, ge=8)
    toy_jitter: float = Field(default=0.02, ge=0.0)
    n_train: int = Field(default=1000, ge=0)
    n_test: int = Field(default=500, ge=0)


class RunConfig(_Strict):
    model: ModelConfig
    data: DataSpec = Field(default_factory=DataSpec)
    out_dir: str = "runs/default"
    seed: Optional[int] = None
    threads: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _propagate_seed(self) -> "RunConfig":
        # A top-level seed wins over the model seed so one root drives every stream
        if self.seed is not None:
            self.model.seed = self.seed
        return self
