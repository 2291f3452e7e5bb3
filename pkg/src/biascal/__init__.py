"""Bias amplification metrics and corpus-level calibration of structured predictions."""
from .kernels import BACKEND

__version__ = "0.1.0"
