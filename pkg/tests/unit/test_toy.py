import numpy as np
import pytest

from genconv.datasets.toy import TOY_CLASSES, gen_toy_cloud, make_toy_dataset
from genconv.errors import ShapeError


def test_circle_points_sit_on_the_radius():
    item = gen_toy_cloud("circle", 200, center=(0.3, -0.2), size=0.8, seed=1, dtype=np.float64)
    r = np.linalg.norm(item.cloud.coords - [0.3, -0.2], axis=1)
    assert np.allclose(r, 0.8, atol=1e-6)
    assert item.label == TOY_CLASSES.index("circle")
    assert item.cloud.feature_dims == 0


def test_square_points_sit_on_the_perimeter():
    item = gen_toy_cloud("square", 200, center=(1.0, 2.0), size=0.6, seed=2, dtype=np.float64)
    cheb = np.max(np.abs(item.cloud.coords - [1.0, 2.0]), axis=1)
    assert np.allclose(cheb, 0.3, atol=1e-6)


def test_same_seed_is_bit_identical():
    a = gen_toy_cloud("square", 100, jitter=0.05, seed=7)
    b = gen_toy_cloud("square", 100, jitter=0.05, seed=7)
    assert a.cloud.coords.tobytes() == b.cloud.coords.tobytes()


def test_jitter_moves_points_off_the_shape():
    item = gen_toy_cloud("circle", 500, size=1.0, jitter=0.05, seed=3, dtype=np.float64)
    spread = np.std(np.linalg.norm(item.cloud.coords, axis=1) - 1.0)
    assert 0.03 < spread < 0.07


@pytest.mark.parametrize(
    "kwargs",
    [
        {"shape": "triangle"},
        {"shape": "circle", "n_points": 4},
        {"shape": "circle", "size": 0.0},
        {"shape": "square", "jitter": -0.1},
    ],
)
def test_invalid_arguments_rejected(kwargs):
    with pytest.raises(ShapeError):
        gen_toy_cloud(**kwargs)


def test_dataset_is_balanced_and_deterministic():
    a = make_toy_dataset(11, seed=5, n_points=20)
    b = make_toy_dataset(11, seed=5, n_points=20)
    labels = [item.label for item in a]
    assert abs(labels.count(0) - labels.count(1)) <= 1
    assert all(x.cloud.coords.tobytes() == y.cloud.coords.tobytes() for x, y in zip(a, b))
    assert a[3].source == "train/00003"


def test_splits_draw_different_clouds():
    train = make_toy_dataset(4, seed=5, n_points=20, split="train")
    test = make_toy_dataset(4, seed=5, n_points=20, split="test")
    assert not np.array_equal(train[0].cloud.coords, test[0].cloud.coords)
