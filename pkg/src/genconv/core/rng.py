import zlib

import numpy as np


def stream_seed(root_seed: int, name: str, *extra: int) -> np.random.SeedSequence:
    """Named sub-stream of one root seed; components can be varied independently."""
    return np.random.SeedSequence([int(root_seed), zlib.crc32(name.encode("utf-8")), *map(int, extra)])


def random_stream(root_seed: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(stream_seed(root_seed, name, *extra))


def derive_int_seed(root_seed: int, name: str, *extra: int) -> int:
    return int(stream_seed(root_seed, name, *extra).generate_state(1, dtype=np.uint32)[0])


def path_seed(root_seed: int, path: str) -> int:
    """Seed keyed on a file path so parallel loading order does not matter."""
    return derive_int_seed(root_seed, "data", zlib.crc32(path.replace("\\", "/").encode("utf-8")))
