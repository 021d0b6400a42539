"""Per-second log-magnitude spectra of 30-s epochs.

Each 3000-sample epoch (100 Hz) becomes 30 one-second patches; every patch
is Hamming-windowed, zero-padded to 256 points and turned into
``20*log10(|X| + 1e-8)`` over bins 0..127 (0 to just under 50 Hz).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PATCHES = 30
PATCH_SAMPLES = 100
NFFT = 256
BINS = 128
EPS = 1e-8
FLOOR_DB = 20.0 * np.log10(EPS)


class WrongLength(ValueError):
    pass


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window ``0.54 - 0.46 cos(2 pi k / (n - 1))``."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    k = np.arange(n)
    w = 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))
    # mirror so the window is bit-symmetric despite cos rounding
    half = (n + 1) // 2
    w[n - half :] = w[:half][::-1]
    return w


_WINDOW = hamming_window(PATCH_SAMPLES)


def epoch_psd(epoch) -> np.ndarray:
    """``[30, 128]`` dB spectra for one 3000-sample epoch."""
    x = np.asarray(epoch, dtype=np.float64)
    if x.shape != (PATCHES * PATCH_SAMPLES,):
        raise WrongLength(f"epoch must have {PATCHES * PATCH_SAMPLES} samples, got {x.shape}")
    return batch_psd(x[None])[0]


def batch_psd(epochs) -> np.ndarray:
    """Vectorised :func:`epoch_psd` over ``[n, 3000]``."""
    x = np.asarray(epochs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != PATCHES * PATCH_SAMPLES:
        raise WrongLength(f"expected [n, {PATCHES * PATCH_SAMPLES}], got {x.shape}")
    seg = x.reshape(len(x), PATCHES, PATCH_SAMPLES) * _WINDOW
    mag = np.abs(np.fft.rfft(seg, n=NFFT, axis=-1)[..., :BINS])
    return 20.0 * np.log10(mag + EPS)


@dataclass
class SpectralEpochs:
    psd: np.ndarray  # [e, 30, 128] dB
    labels: np.ndarray  # [e]
    name: str = ""

    def __post_init__(self):
        self.psd = np.asarray(self.psd, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.psd.ndim != 3 or self.psd.shape[1:] != (PATCHES, BINS):
            raise ValueError(f"psd must be [e, {PATCHES}, {BINS}], got {self.psd.shape}")
        if len(self.labels) != len(self.psd):
            raise ValueError("label count does not match epoch count")

    def __len__(self):
        return len(self.labels)


def featurize(sig) -> SpectralEpochs:
    return SpectralEpochs(batch_psd(sig.epochs), sig.labels, sig.name)


# ---------------------------------------------------------------- feature cache
#
# 16-byte header, little-endian:
#   magic   4s   b"MPSD"
#   epochs  I    e
#   patches H    30
#   bins    H    128
#   dtype   B    1 = float32, 2 = float64
#   pad     3x
# followed by psd[e, patches, bins] in C order, then labels as uint8[e].

CACHE_MAGIC = b"MPSD"
_CACHE_HEADER = struct.Struct("<4sIHHB3x")
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


def dump_features(features: SpectralEpochs, path, dtype=np.float64):
    code = 2 if np.dtype(dtype) == np.float64 else 1
    e, p, b = features.psd.shape
    with open(path, "wb") as fh:
        fh.write(_CACHE_HEADER.pack(CACHE_MAGIC, e, p, b, code))
        fh.write(np.ascontiguousarray(features.psd, dtype=_DTYPES[code]).tobytes())
        fh.write(features.labels.astype(np.uint8).tobytes())


def load_features(path) -> SpectralEpochs:
    buf = Path(path).read_bytes()
    magic, e, p, b, code = _CACHE_HEADER.unpack_from(buf, 0)
    if magic != CACHE_MAGIC or code not in _DTYPES:
        raise ValueError(f"{path}: not a feature cache file")
    dt = _DTYPES[code]
    n = e * p * b
    expected = _CACHE_HEADER.size + n * dt.itemsize + e
    if len(buf) != expected:
        raise ValueError(f"{path}: size {len(buf)} != expected {expected}")
    psd = np.frombuffer(buf, dtype=dt, count=n, offset=_CACHE_HEADER.size).reshape(e, p, b)
    labels = np.frombuffer(buf, dtype=np.uint8, count=e, offset=_CACHE_HEADER.size + n * dt.itemsize)
    return SpectralEpochs(psd.astype(np.float64), labels.astype(np.int64), Path(path).stem)
