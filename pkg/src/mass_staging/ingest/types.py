from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class StageLabel(IntEnum):
    W = 0
    N1 = 1
    N2 = 2
    N3 = 3
    REM = 4


NUM_CLASSES = len(StageLabel)

# Sentinel for epochs that are scored but must be dropped (unknown, movement).
EXCLUDED = "EXCLUDED"

_STAGE_ALIASES = {
    "W": StageLabel.W,
    "WAKE": StageLabel.W,
    "1": StageLabel.N1,
    "N1": StageLabel.N1,
    "S1": StageLabel.N1,
    "2": StageLabel.N2,
    "N2": StageLabel.N2,
    "S2": StageLabel.N2,
    "3": StageLabel.N3,
    "N3": StageLabel.N3,
    "S3": StageLabel.N3,
    "4": StageLabel.N3,
    "N4": StageLabel.N3,
    "S4": StageLabel.N3,
    "R": StageLabel.REM,
    "REM": StageLabel.REM,
}
_EXCLUDED_ALIASES = {"?", "UNKNOWN", "UNSCORED", "MOVEMENT", "MOVEMENT TIME", "M", "MT"}


def normalize_label(text):
    """Map a hypnogram annotation to a :class:`StageLabel`.

    Returns :data:`EXCLUDED` for unknown/movement epochs and ``None`` for
    annotations that are not stage labels at all (lights off, events, ...).
    Bare digits follow Rechtschaffen-Kales numbering (``Sleep stage 4``);
    N4 is merged into N3.
    """
    if isinstance(text, StageLabel):
        return text
    key = str(text).strip().upper()
    key = re.sub(r"^SLEEP[ _]STAGE[ _]*", "", key)
    key = re.sub(r"^STAGE[ _]*", "", key)
    if key in _STAGE_ALIASES:
        return _STAGE_ALIASES[key]
    if key in _EXCLUDED_ALIASES:
        return EXCLUDED
    return None


@dataclass
class Channel:
    name: str
    samples: np.ndarray
    rate_hz: float
    # EDF calibration, carried so a parsed file can be written back exactly
    physical_min: float | None = None
    physical_max: float | None = None
    digital_min: int | None = None
    digital_max: int | None = None
    dimension: str = ""
    transducer: str = ""
    prefilter: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.rate_hz <= 0:
            raise ValueError(f"channel {self.name!r}: rate must be positive")
        if self.samples.size == 0:
            raise ValueError(f"channel {self.name!r} is empty")


@dataclass(frozen=True)
class Annotation:
    onset_s: float
    duration_s: float
    label: str


@dataclass
class RawRecording:
    channels: list
    annotations: list = field(default_factory=list)
    patient: str = ""
    recording: str = ""
    start_date: str = "01.01.00"
    start_time: str = "00.00.00"
    record_duration_s: float = 30.0

    def __post_init__(self):
        for ann in self.annotations:
            if ann.onset_s < 0:
                raise ValueError(f"annotation onset {ann.onset_s} is negative")
        if self.channels and self.annotations:
            end = self.duration_s
            for ann in self.annotations:
                if ann.onset_s > end + 1e-9:
                    raise ValueError(f"annotation onset {ann.onset_s} beyond recording end {end}")

    @property
    def duration_s(self):
        return max(len(c.samples) / c.rate_hz for c in self.channels)

    def channel(self, name):
        for c in self.channels:
            if c.name == name:
                return c
        raise ChannelNotFound(name)


class ChannelNotFound(KeyError):
    pass


class NoScoredEpochs(ValueError):
    pass


@dataclass
class EpochedSignal:
    """Fixed 30-s epochs at 100 Hz: ``epochs`` is ``[n, 3000]``."""

    epochs: np.ndarray
    labels: np.ndarray
    source_rate_hz: float = 100.0
    name: str = ""
    snapped_annotations: int = 0

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.epochs.ndim != 2 or self.epochs.shape[1] != 3000:
            raise ValueError(f"epochs must be [n, 3000], got {self.epochs.shape}")
        if len(self.labels) != len(self.epochs):
            raise ValueError("label count does not match epoch count")

    def __len__(self):
        return len(self.labels)
