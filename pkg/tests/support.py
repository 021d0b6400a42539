"""Shared fixtures for the model, training and acceptance tests."""

import numpy as np

from mass_staging.masking import gen_mask
from mass_staging.model import MassConfig, MassParams, forward_batch
from mass_staging.nn import autograd as ag
from mass_staging.nn import backward
from mass_staging.nn.layers import sinusoidal_pe
from mass_staging.training import LossWeights, total_loss


def tiny_config(**kw):
    base = dict(d_a=16, d_e=16, heads=8, L_p=1, L_a=1, L_e=1, e=4, dropout=0.0)
    base.update(kw)
    return MassConfig(**base)


def random_batch(cfg, batch=1, seed=0):
    rng = np.random.default_rng(seed)
    psd = rng.normal(-40.0, 15.0, size=(batch, cfg.e, 30, cfg.bins))
    labels = rng.integers(0, 5, size=(batch, cfg.e))
    return psd, labels


def count_parameters(cfg):
    """Closed-form parameter count of the network for ``cfg``."""

    def dense(i, o):
        return i * o + o

    d = cfg.d_a
    block = 2 * 2 * d + 4 * dense(d, d) + dense(d, cfg.mlp_ratio * d) + dense(cfg.mlp_ratio * d, d)
    h = cfg.d_e

    def gru(i):
        return 3 * h * i + 3 * h * h + 6 * h

    bigru = sum(2 * gru(2 * d if layer == 0 else 2 * h) for layer in range(cfg.L_e))
    return (
        dense(cfg.bins, d)
        + 2 * d
        + (cfg.L_p + cfg.L_a) * block
        + bigru
        + dense(2 * h, cfg.classes)
        + dense(2 * h, 1)
    )


def gradient_check(cfg, r_a=0.9, r_e=0.0, n_coords=200, step=1e-4, seed=0, floor=1e-6):
    """Compare autograd with central differences of the full loss.

    Coordinates are drawn so every parameter tensor is hit at least once.
    The relative error is ``|a - n| / max(|a|, |n|, floor)``; the floor keeps
    exactly-zero gradients (e.g. attention key biases) from dividing rounding
    noise by zero.  Returns a list of ``(rel_err, name, analytic, numeric)``
    sorted worst first.
    """
    params = MassParams(cfg, seed=seed)
    psd, labels = random_batch(cfg, seed=seed + 1)
    plans = [gen_mask(cfg.e, r_a, r_e, seed=seed + 2)]
    weights = LossWeights()

    def loss_value():
        loss, _ = total_loss(forward_batch(psd, plans, params), labels, weights)
        return loss

    named = params.named_parameters()
    loss = loss_value()
    backward(loss)
    rng = np.random.default_rng(seed + 3)
    names = sorted(named)
    picks = [(n, int(rng.integers(named[n].data.size))) for n in names]
    sizes = np.array([named[n].data.size for n in names], dtype=np.float64)
    while len(picks) < n_coords:
        n = names[rng.choice(len(names), p=sizes / sizes.sum())]
        picks.append((n, int(rng.integers(named[n].data.size))))

    rows = []
    for name, flat in picks:
        t = named[name]
        idx = np.unravel_index(flat, t.data.shape)
        analytic = t.grad[idx]
        orig = t.data[idx]
        t.data[idx] = orig + step
        up = float(loss_value().data)
        t.data[idx] = orig - step
        down = float(loss_value().data)
        t.data[idx] = orig
        numeric = (up - down) / (2 * step)
        denom = max(abs(analytic), abs(numeric), floor)
        rows.append((abs(analytic - numeric) / denom, f"{name}{list(map(int, idx))}", analytic, numeric))
    return sorted(rows, reverse=True)


def unmasked_forward(psd, params):
    """Reference pipeline with no masking machinery at all: every patch, every epoch."""
    cfg = params.cfg
    B, e = psd.shape[:2]
    d = cfg.d_a
    tok = params.patch_embedding(ag.Tensor(psd))  # [B, e, 30, d]

    seq = ag.concat([ag.broadcast_to(params.global_cls, (B, 1, d)), tok.reshape(B, e * 30, d)], axis=1)
    pos = np.concatenate([np.zeros((B, 1)), np.tile(np.arange(e * 30), (B, 1))], axis=1)
    z = seq + sinusoidal_pe(pos, d)
    for layer in params.prompt_encoder:
        z = layer(z)
    prompt = z[:, 0, :]

    local = np.tile(np.arange(30), (B * e, 1))
    x = ag.concat(
        [
            ag.broadcast_to(params.epoch_cls, (B * e, 1, d)),
            ag.broadcast_to(prompt.reshape(B, 1, d), (B, e, d)).reshape(B * e, 1, d),
            tok.reshape(B * e, 30, d) + sinusoidal_pe(local, d),
        ],
        axis=1,
    )
    for layer in params.patch_encoder:
        x = layer(x)
    h = x[:, 0, :].reshape(B, e, d)

    g = params.bigru(ag.concat([h, ag.broadcast_to(prompt.reshape(B, 1, d), (B, e, d))], axis=-1))
    return params.stage_head(g), params.transition_head(g).reshape(B, e)
