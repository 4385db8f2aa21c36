"""Multimodal neuron planner: learned next-configuration sampling for motion planning."""
from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
