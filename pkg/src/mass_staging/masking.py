"""Multi-level mask plans and the acquisition power model.

A plan first keeps ``floor(e * (1 - r_e))`` whole epochs of a sequence and
then ``floor(30 * (1 - r_a))`` one-second patches inside each kept epoch.
Sampling is uniform without replacement from numpy's PCG64 generator; the
seed is split with ``SeedSequence.spawn`` into an epoch-level and a
patch-level substream so each level is reproducible on its own.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

PATCHES = 30


class DegenerateMask(ValueError):
    pass


def _visible_count(n, ratio):
    # guard against 0.7 * 10 = 6.999... style flooring artefacts
    return int(math.floor(n * (1.0 - ratio) + 1e-9))


@dataclass(frozen=True)
class MaskPlan:
    e: int
    r_a: float
    r_e: float
    seed: int
    visible_epochs: tuple
    visible_patches: dict  # epoch index -> tuple of patch indices
    contiguous: bool = False

    @property
    def n_visible_epochs(self):
        return len(self.visible_epochs)

    @property
    def patches_per_epoch(self):
        return len(self.visible_patches[self.visible_epochs[0]])

    @property
    def n_visible(self):
        return self.n_visible_epochs * self.patches_per_epoch

    def masked_epochs(self):
        seen = set(self.visible_epochs)
        return tuple(i for i in range(self.e) if i not in seen)

    def patch_index(self):
        """``[n_visible_epochs, K]`` array of visible patch indices."""
        return np.array([self.visible_patches[i] for i in self.visible_epochs], dtype=np.int64)

    def global_positions(self):
        """Original positions ``epoch * 30 + patch`` in global order."""
        ep = np.asarray(self.visible_epochs, dtype=np.int64)[:, None]
        return (ep * PATCHES + self.patch_index()).reshape(-1)

    def epoch_mask(self):
        m = np.zeros(self.e, dtype=bool)
        m[list(self.visible_epochs)] = True
        return m

    def to_json(self):
        return json.dumps(
            {
                "e": self.e,
                "r_a": self.r_a,
                "r_e": self.r_e,
                "seed": self.seed,
                "contiguous": self.contiguous,
                "visible_epochs": list(self.visible_epochs),
                "visible_patches": {str(k): list(v) for k, v in self.visible_patches.items()},
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            e=d["e"],
            r_a=d["r_a"],
            r_e=d["r_e"],
            seed=d["seed"],
            visible_epochs=tuple(d["visible_epochs"]),
            visible_patches={int(k): tuple(v) for k, v in d["visible_patches"].items()},
            contiguous=d.get("contiguous", False),
        )


def gen_mask(e: int, r_a: float, r_e: float, seed: int, contiguous: bool = False) -> MaskPlan:
    """Draw a mask plan for a sequence of ``e`` epochs.

    ``contiguous=True`` masks one random run of consecutive epochs instead
    of an arbitrary subset (patch sampling is unchanged).
    """
    if e < 1:
        raise DegenerateMask(f"sequence length must be >= 1, got {e}")
    for name, r in (("r_a", r_a), ("r_e", r_e)):
        if not 0.0 <= r < 1.0:
            raise DegenerateMask(f"{name} must lie in [0, 1), got {r}")
    n_ep = _visible_count(e, r_e)
    n_pa = _visible_count(PATCHES, r_a)
    if n_ep < 1 or n_pa < 1:
        raise DegenerateMask(f"e={e}, r_e={r_e}, r_a={r_a} leaves nothing visible")

    epoch_ss, patch_ss = np.random.SeedSequence(seed).spawn(2)
    erng = np.random.default_rng(epoch_ss)
    prng = np.random.default_rng(patch_ss)
    if contiguous:
        n_masked = e - n_ep
        start = int(erng.integers(0, e - n_masked + 1))
        visible = tuple(i for i in range(e) if not start <= i < start + n_masked)
    else:
        visible = tuple(sorted(int(i) for i in erng.choice(e, size=n_ep, replace=False)))
    patches = {}
    for ep in visible:
        patches[ep] = tuple(sorted(int(i) for i in prng.choice(PATCHES, size=n_pa, replace=False)))
    return MaskPlan(e, float(r_a), float(r_e), int(seed), visible, patches, contiguous)


def signal_integrity(r_a: float, r_e: float) -> float:
    """Fraction of raw signal acquired: ``(1 - r_a) * (1 - r_e)``."""
    # rounded so decimal ratio pairs give exact decimal integrities (0.72, not 0.7200000000000001)
    return round((1.0 - r_a) * (1.0 - r_e), 12)


@dataclass(frozen=True)
class AmplifierSpec:
    name: str
    p_normal_mw: float
    p_standby_mw: float

    def __post_init__(self):
        if not self.p_normal_mw > self.p_standby_mw > 0:
            raise ValueError(f"{self.name}: need p_normal > p_standby > 0")


AMPLIFIERS = {
    "ads1299-4": AmplifierSpec("ADS1299-4", 22.0, 5.1),
    "ads131a04": AmplifierSpec("ADS131A04", 15.8, 2.6),
    "ads1294": AmplifierSpec("ADS1294", 10.1, 4.0),
}


def power_estimate(spec: AmplifierSpec, integrity: float) -> float:
    """Mean amplifier power (mW) when duty-cycled at ``integrity``."""
    if not 0.0 <= integrity <= 1.0:
        raise ValueError(f"integrity must lie in [0, 1], got {integrity}")
    return integrity * spec.p_normal_mw + (1.0 - integrity) * spec.p_standby_mw
