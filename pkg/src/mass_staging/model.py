"""The mask-aware staging network.

Data flow for a batch of ``B`` sequences of ``e`` epochs::

    visible patch spectra --Dense--> tokens
    [global CLS; tokens] + PE(global positions) --L_p layers--> prompt (row 0)
    per visible epoch: [epoch CLS; prompt; tokens + PE(local index)] --L_a--> h_patch (row 0)
    h_patch scattered into zeros[e] at visible epochs, concatenated with prompt
    --> L_e-layer BiGRU --> stage head [5] and transition head [1] per epoch

All sequences in a batch must share the same visible counts, which holds
whenever they were masked with the same ratios.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from .masking import MaskPlan
from .nn import autograd as ag
from .nn.layers import BiGRU, Dense, Module, TransformerLayer, param, sinusoidal_pe
from .spectral import BINS, PATCHES, SpectralEpochs


class EmptyVisibleSet(ValueError):
    pass


@dataclass
class MassConfig:
    d_a: int = 128
    d_e: int = 256
    heads: int = 8
    mlp_ratio: int = 4
    dropout: float = 0.1
    patches: int = 30
    e: int = 32
    L_p: int = 4
    L_a: int = 4
    L_e: int = 2
    classes: int = 5
    bins: int = 128

    def __post_init__(self):
        for key, value in asdict(self).items():
            if key != "dropout" and value <= 0:
                raise ValueError(f"{key} must be positive, got {value}")
        if self.d_a % self.heads:
            raise ValueError(f"d_a={self.d_a} not divisible by heads={self.heads}")
        if self.d_a % 2:
            raise ValueError("d_a must be even for sinusoidal encoding")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")


@dataclass
class ForwardOutput:
    stage_logits: ag.Tensor  # [B, e, 5]
    transition_logits: ag.Tensor  # [B, e]
    prompt: ag.Tensor  # [B, d_a]
    epoch_features: ag.Tensor  # [B, e, d_a], zero rows at masked epochs


class MassParams(Module):
    def __init__(self, cfg: MassConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        d = cfg.d_a
        self.cfg = cfg
        self.patch_embedding = Dense(cfg.bins, d, rng)
        self.global_cls = param(rng.normal(0.0, 0.02, size=(1, d)))
        self.prompt_encoder = [
            TransformerLayer(d, cfg.heads, cfg.mlp_ratio, cfg.dropout, rng) for _ in range(cfg.L_p)
        ]
        self.epoch_cls = param(rng.normal(0.0, 0.02, size=(1, d)))
        self.patch_encoder = [
            TransformerLayer(d, cfg.heads, cfg.mlp_ratio, cfg.dropout, rng) for _ in range(cfg.L_a)
        ]
        self.bigru = BiGRU(2 * d, cfg.d_e, cfg.L_e, rng)
        self.stage_head = Dense(2 * cfg.d_e, cfg.classes, rng)
        self.transition_head = Dense(2 * cfg.d_e, 1, rng)

    def describe(self):
        """Parameter count per top-level component."""
        groups = OrderedDict()
        for name, p in self.named_parameters().items():
            top = name.split(".")[0]
            groups[top] = groups.get(top, 0) + p.data.size
        groups["total"] = sum(groups.values())
        return groups


def _encode(layers, x, rng, train):
    for layer in layers:
        x = layer(x, rng=rng, train=train)
    return x


def _gather_visible(psd, plans):
    """``[B, n_ep, K, bins]`` spectra of visible patches only."""
    counts = {(p.n_visible_epochs, p.patches_per_epoch) for p in plans}
    if len(counts) != 1:
        raise ValueError(f"plans in one batch need equal visible counts, got {sorted(counts)}")
    ep = np.stack([np.asarray(p.visible_epochs) for p in plans])  # [B, n_ep]
    pa = np.stack([p.patch_index() for p in plans])  # [B, n_ep, K]
    b = np.arange(len(plans))[:, None, None]
    return psd[b, ep[:, :, None], pa], ep, pa


def prompt_from_tokens(tokens, positions, params: MassParams, rng=None, train=False):
    """Global prompt from embedded visible tokens ``[B, N, d_a]``."""
    B = tokens.shape[0]
    d = params.cfg.d_a
    cls = ag.broadcast_to(params.global_cls, (B, 1, d))
    seq = ag.concat([cls, tokens], axis=1)
    # CLS sits at position 0; patches keep their pre-mask positions
    pos = np.concatenate([np.zeros((B, 1)), positions], axis=1)
    seq = seq + sinusoidal_pe(pos, d)
    return _encode(params.prompt_encoder, seq, rng, train)[:, 0, :]


def patch_encode_tokens(tokens, local_idx, prompt, params: MassParams, rng=None, train=False):
    """Epoch features from ``tokens [M, K, d_a]`` and one prompt row per epoch ``[M, d_a]``.

    Only patch tokens receive positional encoding, at their within-epoch index.
    """
    M, K, d = tokens.shape
    cls = ag.broadcast_to(params.epoch_cls, (M, 1, d))
    tokens = tokens + sinusoidal_pe(local_idx, d)
    seq = ag.concat([cls, prompt.reshape(M, 1, d), tokens], axis=1)
    return _encode(params.patch_encoder, seq, rng, train)[:, 0, :]


def epoch_encode(h_patch, prompt, params: MassParams):
    """BiGRU over ``[h_patch || prompt]``.

    ``h_patch`` is ``[e, d_a]`` or ``[B, e, d_a]``; ``prompt`` is ``[1, d_a]``
    or ``[B, d_a]``.  Returns ``[e, 2 d_e]`` or ``[B, e, 2 d_e]``.
    """
    h_patch, prompt = ag.as_tensor(h_patch), ag.as_tensor(prompt)
    squeeze = h_patch.ndim == 2
    if squeeze:
        h_patch = h_patch.reshape(1, *h_patch.shape)
        prompt = prompt.reshape(1, -1)
    B, e, d = h_patch.shape
    if d != params.cfg.d_a or prompt.shape != (B, d):
        raise ValueError(f"epoch_encode shape mismatch: h_patch {h_patch.shape}, prompt {prompt.shape}")
    seq = ag.concat([h_patch, ag.broadcast_to(prompt.reshape(B, 1, d), (B, e, d))], axis=-1)
    g = params.bigru(seq)
    return g[0] if squeeze else g


def forward_batch(psd, plans, params: MassParams, train=False, rng=None) -> ForwardOutput:
    """Run the network on ``psd [B, e, 30, 128]`` under per-sequence ``plans``.

    Masked epochs and patches are never read from ``psd``.
    """
    psd = np.asarray(psd)
    B, e = psd.shape[:2]
    cfg = params.cfg
    if psd.shape[2:] != (PATCHES, cfg.bins):
        raise ValueError(f"expected [B, e, {PATCHES}, {cfg.bins}] spectra, got {psd.shape}")
    if len(plans) != B or any(p.e != e for p in plans):
        raise ValueError("need one plan per sequence with matching epoch count")
    if train and cfg.dropout > 0 and rng is None:
        raise ValueError("training with dropout needs an rng")
    vis, ep, pa = _gather_visible(psd, plans)
    _, n_ep, K, _ = vis.shape
    if n_ep * K == 0:
        raise EmptyVisibleSet("no visible patches")

    tokens = params.patch_embedding(ag.Tensor(vis))  # [B, n_ep, K, d]
    d = cfg.d_a
    positions = (ep[:, :, None] * PATCHES + pa).reshape(B, n_ep * K)
    prompt = prompt_from_tokens(tokens.reshape(B, n_ep * K, d), positions, params, rng, train)

    prompt_rows = ag.broadcast_to(prompt.reshape(B, 1, d), (B, n_ep, d)).reshape(B * n_ep, d)
    h = patch_encode_tokens(tokens.reshape(B * n_ep, K, d), pa.reshape(B * n_ep, K), prompt_rows, params, rng, train)
    b_idx = np.repeat(np.arange(B), n_ep)
    h_full = ag.scatter((B, e, d), (b_idx, ep.reshape(-1)), h)

    g = epoch_encode(h_full, prompt, params)
    stage = params.stage_head(g)
    trans = params.transition_head(g).reshape(B, e)
    return ForwardOutput(stage, trans, prompt, h_full)


def forward(features: SpectralEpochs, plan: MaskPlan, params: MassParams, train=False, rng=None):
    """Single-sequence forward; outputs drop the batch axis."""
    if len(features) != plan.e:
        raise ValueError(f"features hold {len(features)} epochs, plan expects {plan.e}")
    out = forward_batch(features.psd[None], [plan], params, train, rng)
    return ForwardOutput(
        out.stage_logits[0], out.transition_logits[0], out.prompt, out.epoch_features[0]
    )


def global_prompt(features: SpectralEpochs, plan: MaskPlan, params: MassParams):
    """``[1, d_a]`` prompt for one sequence (eval mode)."""
    vis, ep, pa = _gather_visible(features.psd[None], [plan])
    if vis.size == 0:
        raise EmptyVisibleSet("no visible patches")
    tokens = params.patch_embedding(ag.Tensor(vis))
    n = vis.shape[1] * vis.shape[2]
    positions = (ep[:, :, None] * PATCHES + pa).reshape(1, n)
    return prompt_from_tokens(tokens.reshape(1, n, params.cfg.d_a), positions, params)


def patch_encode(epoch_patches, prompt, params: MassParams, local_index=None):
    """``[1, d_a]`` CLS output for one epoch's embedded visible patches ``[K, d_a]``."""
    epoch_patches, prompt = ag.as_tensor(epoch_patches), ag.as_tensor(prompt)
    K, d = epoch_patches.shape
    if d != params.cfg.d_a or prompt.shape != (1, d):
        raise ValueError(f"patch_encode shape mismatch: {epoch_patches.shape}, prompt {prompt.shape}")
    idx = np.arange(K) if local_index is None else np.asarray(local_index)
    return patch_encode_tokens(epoch_patches.reshape(1, K, d), idx[None], prompt, params)
