"""Rational polyphase resampling to 100 Hz."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.signal import firwin, upfirdn

TARGET_HZ = 100.0
KAISER_BETA = 8.0
CUTOFF_FRACTION = 0.9
# half-length of the prototype filter, in units of the slower rate's samples
HALF_TAPS = 16


class NonPositiveRate(ValueError):
    pass


def design_filter(up, down):
    """Kaiser-windowed sinc prototype for ``up/down`` resampling.

    Cutoff sits at 0.9 of the lower Nyquist rate.  Each of the ``up``
    polyphase branches is normalised to unit sum, so DC passes exactly.
    """
    factor = max(up, down)
    # keep the group delay a whole number of output samples
    half = -(-HALF_TAPS * factor // down) * down
    h = firwin(2 * half + 1, CUTOFF_FRACTION / factor, window=("kaiser", KAISER_BETA))
    for phase in range(up):
        h[phase::up] /= h[phase::up].sum()
    return h


def resample_100hz(signal, rate_hz) -> np.ndarray:
    """Resample ``signal`` from ``rate_hz`` to 100 Hz.

    Output length is ``round(len(signal) * 100 / rate_hz)``; 100 Hz input is
    returned unchanged.
    """
    x = np.asarray(signal, dtype=np.float64)
    if rate_hz <= 0:
        raise NonPositiveRate(f"sample rate must be positive, got {rate_hz}")
    if rate_hz == TARGET_HZ:
        return x.copy()
    ratio = Fraction(int(TARGET_HZ)) / Fraction(rate_hz).limit_denominator(1000)
    up, down = ratio.numerator, ratio.denominator
    n_out = int(round(len(x) * TARGET_HZ / rate_hz))
    h = design_filter(up, down)
    delay = (len(h) - 1) // 2
    y = upfirdn(h, x, up, down)
    start = delay // down
    out = y[start : start + n_out]
    if len(out) < n_out:
        out = np.concatenate([out, np.zeros(n_out - len(out))])
    return out
