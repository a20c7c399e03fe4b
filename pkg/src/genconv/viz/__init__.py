from .filter_probe import FilterImage, probe_filter
from .image_writer import write_image

__all__ = ["FilterImage", "probe_filter", "write_image"]
