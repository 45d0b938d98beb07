"""Entropy-regularized optimal transport with sparse, Nyström and locally corrected Nyström kernels."""

__version__ = "0.1.0"
