"""Generalized point-cloud convolution: KNN continuous filters, training, visualization and benchmarks."""

__version__ = "0.1.0"
