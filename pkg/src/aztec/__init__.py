"""Two-periodic Aztec diamond: exact sampling, squishing, heights and kernels."""

__version__ = "0.1.0"
