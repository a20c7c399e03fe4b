import numpy as np
import pytest

from genconv.core.cloud import PointCloud
from genconv.domain.models import HeadSpec, LayerSpec, ModelConfig
from genconv.services.model import build_model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_cloud():
    """Factory: seeded cloud with N points, S dims and D feature channels."""

    def make(n=50, spatial_dims=2, features=0, seed=0, dtype=np.float64, scale=1.0):
        r = np.random.default_rng(seed)
        coords = r.uniform(-scale, scale, size=(n, spatial_dims))
        feats = r.normal(size=(n, features))
        return PointCloud.from_coords(coords, feats, dtype=dtype)

    return make


@pytest.fixture
def toy_model_config():
    return ModelConfig(
        spatial_dims=2,
        num_classes=2,
        layers=[LayerSpec(k=8, hidden_widths=[16, 16], out_channels=8)],
        head=HeadSpec(hidden_widths=[32]),
        epochs=2,
        seed=3,
    )


@pytest.fixture
def tiny_config():
    """Miniature float64 model used by gradient checks and round-trip tests."""
    return ModelConfig(
        spatial_dims=2,
        num_classes=3,
        layers=[
            LayerSpec(k=4, stride_fraction=0.5, hidden_widths=[6], out_channels=5),
            LayerSpec(k=4, hidden_widths=[8], out_channels=4),
        ],
        head=HeadSpec(hidden_widths=[6]),
        precision="float64",
        seed=11,
    )


@pytest.fixture
def tiny_model(tiny_config):
    return build_model(tiny_config)
