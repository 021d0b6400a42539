"""Synthetic single-channel sleep recordings for desk-scale experiments.

Each stage is a band-limited noise burst plus a tone in its own frequency
band over a weak white background; stages follow a sticky Markov chain so
transitions are rare but present.
"""

from __future__ import annotations

import numpy as np

from .epochs import EPOCH_SAMPLES
from .resample import TARGET_HZ
from .types import NUM_CLASSES, EpochedSignal, StageLabel

# (low, high) Hz of the dominant band per stage
SIGNATURE_BANDS = {
    StageLabel.W: (8.0, 11.0),  # alpha
    StageLabel.N1: (4.0, 7.0),  # theta
    StageLabel.N2: (12.5, 15.0),  # sigma / spindles
    StageLabel.N3: (0.5, 2.5),  # delta
    StageLabel.REM: (18.0, 28.0),  # beta
}

STAY_PROB = 0.9
# where the chain goes when it leaves a stage (rows sum to 1)
_LEAVE = np.array(
    [
        [0.00, 0.60, 0.30, 0.00, 0.10],
        [0.20, 0.00, 0.60, 0.00, 0.20],
        [0.10, 0.20, 0.00, 0.45, 0.25],
        [0.05, 0.05, 0.90, 0.00, 0.00],
        [0.30, 0.30, 0.40, 0.00, 0.00],
    ]
)
TRANSITIONS = STAY_PROB * np.eye(NUM_CLASSES) + (1 - STAY_PROB) * _LEAVE

BAND_UV = 20.0
TONE_UV = 10.0
BACKGROUND_UV = 2.0


def _stage_chain(rng, n):
    labels = np.empty(n, dtype=np.int64)
    labels[0] = StageLabel.W
    u = rng.random(n)
    cdf = np.cumsum(TRANSITIONS, axis=1)
    for i in range(1, n):
        labels[i] = min(int(np.searchsorted(cdf[labels[i - 1]], u[i], side="right")), NUM_CLASSES - 1)
    return labels


def _band_noise(rng, low, high):
    spec = np.fft.rfft(rng.standard_normal(EPOCH_SAMPLES))
    freqs = np.fft.rfftfreq(EPOCH_SAMPLES, 1.0 / TARGET_HZ)
    spec[(freqs < low) | (freqs > high)] = 0.0
    x = np.fft.irfft(spec, n=EPOCH_SAMPLES)
    return x / x.std()


def synth_epoch(rng, stage):
    low, high = SIGNATURE_BANDS[StageLabel(stage)]
    t = np.arange(EPOCH_SAMPLES) / TARGET_HZ
    gain = rng.uniform(0.7, 1.3)
    tone_f = rng.uniform(low, high)
    phase = rng.uniform(0, 2 * np.pi)
    return (
        BAND_UV * gain * _band_noise(rng, low, high)
        + TONE_UV * np.sin(2 * np.pi * tone_f * t + phase)
        + BACKGROUND_UV * rng.standard_normal(EPOCH_SAMPLES)
    )


def synth_dataset(seed: int, n_records: int, e_per_record: int) -> list:
    """Generate ``n_records`` deterministic recordings of ``e_per_record`` epochs.

    For ``e_per_record >= 100`` the stage chain is redrawn (from the same
    seeded stream) until every class appears.
    """
    if n_records < 1 or e_per_record < 3:
        raise ValueError("need n_records >= 1 and e_per_record >= 3")
    root = np.random.SeedSequence(seed)
    out = []
    for r, child in enumerate(root.spawn(n_records)):
        rng = np.random.default_rng(child)
        labels = _stage_chain(rng, e_per_record)
        while e_per_record >= 100 and len(np.unique(labels)) < NUM_CLASSES:
            labels = _stage_chain(rng, e_per_record)
        epochs = np.stack([synth_epoch(rng, s) for s in labels])
        out.append(EpochedSignal(epochs, labels, TARGET_HZ, name=f"synth-{seed}-{r:03d}"))
    return out
