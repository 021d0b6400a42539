from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import autograd as ag


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass
class LossWeights:
    cosine: float = 2.0  # lambda_1
    transition: float = 0.5  # lambda_2

    def __post_init__(self):
        if self.cosine < 0 or self.transition < 0:
            raise ValueError("loss weights must be non-negative")


def transition_labels(stages) -> np.ndarray:
    """1 where an epoch differs from a neighbour, else 0.

    Interior epochs are stable only if both neighbours share their stage;
    the first and last epochs compare against their single neighbour.
    Works on ``[e]`` or ``[B, e]``.
    """
    s = np.asarray(stages)
    out = np.zeros(s.shape, dtype=np.int64)
    if s.shape[-1] < 2:
        return out
    diff = s[..., 1:] != s[..., :-1]
    out[..., 1:] |= diff
    out[..., :-1] |= diff
    return out


def _onehot(labels, classes):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValueError(f"labels must lie in [0, {classes}), got range [{labels.min()}, {labels.max()}]")
    return np.eye(classes)[labels]


def stage_loss(logits, labels):
    """Mean cross-entropy over every epoch."""
    logits = ag.as_tensor(logits)
    onehot = _onehot(labels, logits.shape[-1])
    return -(ag.log_softmax(logits, axis=-1) * onehot).sum(axis=-1).mean()


def cosine_loss(probs, labels):
    """Mean of ``1 - cos(probs_i, onehot(y_i))``; ``probs`` are softmax outputs."""
    probs = ag.as_tensor(probs)
    onehot = _onehot(labels, probs.shape[-1])
    p_true = (probs * onehot).sum(axis=-1)
    norm = ag.sqrt((probs * probs).sum(axis=-1))
    return (1.0 - p_true / norm).mean()


def transition_loss(logits, targets, select=None):
    """Binary cross-entropy with logits, ``softplus(x) - x*y``.

    ``select`` optionally restricts the average to a boolean subset.
    """
    logits = ag.as_tensor(logits)
    y = np.asarray(targets, dtype=np.float64)
    per = ag.softplus(logits) - logits * y
    if select is None:
        return per.mean()
    sel = np.asarray(select, dtype=bool)
    if not sel.any():
        return ag.Tensor(0.0)
    return (per * sel).sum() * (1.0 / sel.sum())


def total_loss(out, stages, weights: LossWeights, transition_select=None):
    """Returns ``(total, parts)`` with ``parts`` the three scalar terms as floats.

    Every term is averaged over all epochs of all sequences, which for equal
    length sequences equals the per-sequence mean averaged over the batch.
    """
    stages = np.asarray(stages)
    try:
        ce = stage_loss(out.stage_logits, stages)
        cos = cosine_loss(ag.softmax(out.stage_logits, axis=-1), stages)
        trans = transition_loss(out.transition_logits, transition_labels(stages), transition_select)
        total = ce + weights.cosine * cos + weights.transition * trans
    except ag.NonFiniteError as exc:
        raise NonFiniteLoss(str(exc)) from exc
    parts = {"ce": float(ce.data), "cos": float(cos.data), "trans": float(trans.data), "total": float(total.data)}
    return total, parts
