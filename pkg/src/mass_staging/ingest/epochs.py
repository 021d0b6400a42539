"""Cut a recording into scored 30-s epochs at 100 Hz."""

from __future__ import annotations

import numpy as np

from .resample import TARGET_HZ, resample_100hz
from .types import (
    EXCLUDED,
    Annotation,
    Channel,
    EpochedSignal,
    NoScoredEpochs,
    RawRecording,
    StageLabel,
    normalize_label,
)

EPOCH_S = 30.0
EPOCH_SAMPLES = int(EPOCH_S * TARGET_HZ)
WAKE_CONTEXT_EPOCHS = 60  # 30 min on either side of the sleep period


def hypnogram_grid(annotations, n_epochs):
    """Expand stage annotations onto the 30-s grid.

    Returns ``(grid, snapped)`` where ``grid`` holds a StageLabel, ``EXCLUDED``
    or ``None`` (unscored) per epoch and ``snapped`` counts annotations whose
    onset was off-grid and moved to the nearest grid point.
    """
    grid = [None] * n_epochs
    snapped = 0
    for ann in annotations:
        label = normalize_label(ann.label)
        if label is None:
            continue
        start_f = ann.onset_s / EPOCH_S
        start = int(round(start_f))
        if abs(start_f - start) > 1e-6:
            snapped += 1
        count = max(1, int(round(ann.duration_s / EPOCH_S)))
        for i in range(start, min(start + count, n_epochs)):
            grid[i] = label
    return grid, snapped


def segment_epochs(rec: RawRecording, channel: str) -> EpochedSignal:
    """Epoch one channel of ``rec`` using its hypnogram annotations.

    Wake is trimmed to 30 min before the first and after the last sleep
    epoch (less is kept when less exists), unknown and movement epochs are
    dropped, N4 becomes N3 and a trailing partial epoch is discarded.
    """
    ch = rec.channel(channel)
    x = resample_100hz(ch.samples, ch.rate_hz)
    n_full = len(x) // EPOCH_SAMPLES
    grid, snapped = hypnogram_grid(rec.annotations, n_full)

    scored = [i for i, g in enumerate(grid) if g is not None]
    if not scored:
        raise NoScoredEpochs(f"no scored epochs on channel {channel!r}")
    sleep = [i for i, g in enumerate(grid) if isinstance(g, StageLabel) and g != StageLabel.W]
    if sleep:
        lo = max(0, sleep[0] - WAKE_CONTEXT_EPOCHS)
        hi = min(n_full, sleep[-1] + WAKE_CONTEXT_EPOCHS + 1)
    else:
        lo, hi = 0, n_full

    keep = [i for i in range(lo, hi) if isinstance(grid[i], StageLabel)]
    if not keep:
        raise NoScoredEpochs(f"every scored epoch on channel {channel!r} was excluded")
    idx = np.asarray(keep)
    epochs = x[: n_full * EPOCH_SAMPLES].reshape(n_full, EPOCH_SAMPLES)[idx]
    labels = np.array([int(grid[i]) for i in keep])
    return EpochedSignal(epochs, labels, TARGET_HZ, name=channel, snapped_annotations=snapped)


def to_recording(sig: EpochedSignal, channel="EEG Fpz-Cz") -> RawRecording:
    """Inverse of :func:`segment_epochs` for already-clean epochs."""
    ann = [
        Annotation(i * EPOCH_S, EPOCH_S, f"Sleep stage {_RK_NAMES[int(lab)]}")
        for i, lab in enumerate(sig.labels)
    ]
    ch = Channel(channel, sig.epochs.reshape(-1), TARGET_HZ, dimension="uV")
    return RawRecording([ch], ann, record_duration_s=EPOCH_S)


_RK_NAMES = {0: "W", 1: "1", 2: "2", 3: "3", 4: "R"}
