"""Particle-in-cell load-balancing harness with virtual ranks."""
from .kernels import BACKEND

__version__ = "0.1.0"
