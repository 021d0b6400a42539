# coding: utf-8

# # From raw signal to a trained stager
#
# This walk-through builds a small synthetic night, turns it into spectral
# patches, trains the tiny configuration for a few hundred steps and then
# sweeps the mask ratios to see how accuracy falls as less signal is kept.
# Run it from the repository root: `python3 notebooks/01_synthetic_pipeline.py`.

# In[1]:

from pathlib import Path

import numpy as np

from mass_staging.config import load_config
from mass_staging.evaluation import evaluate, format_percent_grid, mask_sweep
from mass_staging.ingest import synth_dataset
from mass_staging.masking import signal_integrity
from mass_staging.spectral import featurize
from mass_staging.training import make_windows, train

ROOT = Path(__file__).resolve().parents[1]


# ## Synthetic recordings
#
# Each stage gets its own dominant band, and the stage sequence follows a
# Markov chain so that stage changes actually happen.

# In[2]:

train_sigs = synth_dataset(seed=7, n_records=8, e_per_record=128)
test_sigs = synth_dataset(seed=1007, n_records=4, e_per_record=128)
sig = train_sigs[0]
print(sig.epochs.shape, np.bincount(sig.labels, minlength=5))


# ## Spectral patches
#
# Every 30 s epoch becomes 30 one-second patches of 128 dB-scaled bins.

# In[3]:

feats = [featurize(s) for s in train_sigs]
print(feats[0].psd.shape, feats[0].psd.min().round(1), feats[0].psd.max().round(1))


# Windows of `e` consecutive epochs are the model input.

# In[4]:

cfg, seed = load_config(ROOT / "configs" / "tiny.toml")
psd, labels = make_windows(feats, cfg.model.e)
tpsd, tlabels = make_windows([featurize(s) for s in test_sigs], cfg.model.e)
print(psd.shape, labels.shape)


# ## Training
#
# The tiny config trains on a fresh mask setting from the sweep grid at every step.

# In[5]:

result = train(psd, labels, cfg, seed=seed)
print(result.steps, "steps, last loss", round(result.curve[-1]["loss_total"], 4))


# In[6]:

for r_a, r_e in [(0.0, 0.0), (0.2, 0.1), (0.5, 0.2), (0.8, 0.5)]:
    rep = evaluate(result.params, tpsd, tlabels, r_a, r_e, seed=123)
    print(f"integrity {signal_integrity(r_a, r_e):.2f}  acc {100 * rep.acc:5.1f}%  mf1 {100 * rep.mf1:5.1f}%")


# ## Mask sweep
#
# Rows are epoch-level ratios and columns are patch-level ratios.

# In[7]:

reports = mask_sweep(result.params, tpsd, tlabels, [0.0, 0.2, 0.5, 0.8], [0.0, 0.1, 0.2, 0.5], seed=123)
print(format_percent_grid(reports, "acc"))
