"""Mask-aware sleep staging from partially acquired single-channel EEG."""

from .evaluation import EvalReport, evaluate, mask_sweep, metrics, score
from .masking import AMPLIFIERS, MaskPlan, gen_mask, power_estimate, signal_integrity
from .model import ForwardOutput, MassConfig, MassParams, forward, forward_batch
from .spectral import SpectralEpochs, epoch_psd, featurize

__version__ = "0.1.0"

__all__ = [
    "AMPLIFIERS",
    "EvalReport",
    "ForwardOutput",
    "MaskPlan",
    "MassConfig",
    "MassParams",
    "SpectralEpochs",
    "epoch_psd",
    "evaluate",
    "featurize",
    "forward",
    "forward_batch",
    "gen_mask",
    "mask_sweep",
    "metrics",
    "power_estimate",
    "score",
    "signal_integrity",
]
