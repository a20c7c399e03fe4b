from .cache import CloudDataset, read_dataset, read_pcld, write_dataset, write_pcld
from .modelnet import LoadReport, load_modelnet10
from .off_mesh import TriangleMesh, normalize_cloud, parse_off, read_off, sample_mesh
from .toy import TOY_CLASSES, gen_toy_cloud, make_toy_dataset

__all__ = [
    "CloudDataset",
    "LoadReport",
    "TOY_CLASSES",
    "TriangleMesh",
    "gen_toy_cloud",
    "load_modelnet10",
    "make_toy_dataset",
    "normalize_cloud",
    "parse_off",
    "read_dataset",
    "read_off",
    "read_pcld",
    "sample_mesh",
    "write_dataset",
    "write_pcld",
]
