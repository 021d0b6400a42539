from . import autograd, checkpoint
from .autograd import GraphCycleError, NonFiniteError, Tensor, backward
from .layers import BiGRU, Dense, GRUCell, LayerNorm, Module, TransformerLayer, sinusoidal_pe

__all__ = [
    "autograd",
    "checkpoint",
    "Tensor",
    "backward",
    "NonFiniteError",
    "GraphCycleError",
    "Module",
    "Dense",
    "LayerNorm",
    "TransformerLayer",
    "GRUCell",
    "BiGRU",
    "sinusoidal_pe",
]
