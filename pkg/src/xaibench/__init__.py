"""Ground-truth benchmarking of attribution methods on exactly-known
convolutional models compiled from logical concept and class definitions."""

__version__ = "0.1.0"
