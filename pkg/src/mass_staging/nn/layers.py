"""Parameterised building blocks: dense, layer norm, pre-norm transformer
encoder layer, GRU cell and bidirectional GRU stack, sinusoidal positions."""

from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np

from . import autograd as ag
from .autograd import Tensor


class Module:
    """Minimal parameter container.

    Subclasses register parameters as :class:`Tensor` attributes and child
    modules as :class:`Module` attributes; ``named_parameters`` walks both in
    attribute-definition order so names are stable across runs.
    """

    def named_parameters(self, prefix=""):
        out = OrderedDict()
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out[prefix + key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(prefix + key + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{prefix}{key}.{i}."))
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def num_parameters(self):
        return int(sum(p.data.size for p in self.parameters()))


def param(array, name=None):
    return Tensor(np.asarray(array, dtype=ag.DEFAULT_DTYPE), requires_grad=True, name=name)


def xavier_uniform(rng, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Dense(Module):
    def __init__(self, d_in, d_out, rng):
        self.weight = param(xavier_uniform(rng, d_in, d_out))
        self.bias = param(np.zeros(d_out))

    def __call__(self, x):
        return ag.matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, d, eps=1e-5):
        self.gamma = param(np.ones(d))
        self.beta = param(np.zeros(d))
        self.eps = eps

    def __call__(self, x):
        return ag.layer_norm(x, self.gamma, self.beta, self.eps)


def sinusoidal_pe(positions, d):
    """Fixed sinusoidal encoding: even columns sin, odd columns cos."""
    if d % 2:
        raise ValueError(f"positional encoding width must be even, got {d}")
    pos = np.asarray(positions, dtype=np.float64)
    if np.any(pos < 0):
        raise ValueError("positions must be non-negative")
    two_i = np.arange(0, d, 2, dtype=np.float64)
    angle = pos[..., None] / np.power(10000.0, two_i / d)
    pe = np.empty(pos.shape + (d,))
    pe[..., 0::2] = np.sin(angle)
    pe[..., 1::2] = np.cos(angle)
    return pe


class TransformerLayer(Module):
    """Pre-norm encoder block: x + Drop(MHA(LN(x))), then + Drop(MLP(LN(.)))."""

    def __init__(self, d, heads, mlp_ratio, dropout, rng):
        if d % heads:
            raise ValueError(f"model width {d} not divisible by {heads} heads")
        self.heads = heads
        self.dropout = dropout
        self.ln1 = LayerNorm(d)
        self.q = Dense(d, d, rng)
        self.k = Dense(d, d, rng)
        self.v = Dense(d, d, rng)
        self.o = Dense(d, d, rng)
        self.ln2 = LayerNorm(d)
        self.fc1 = Dense(d, mlp_ratio * d, rng)
        self.fc2 = Dense(mlp_ratio * d, d, rng)
        self.last_attention = None

    def _split(self, x):
        *lead, n, d = x.shape
        h = self.heads
        x = x.reshape(*lead, n, h, d // h)
        return ag.swapaxes(x, -2, -3)

    def attention(self, x):
        *lead, n, d = x.shape
        q, k, v = self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x))
        scores = ag.matmul(q, ag.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(d // self.heads))
        weights = ag.softmax(scores, axis=-1)
        self.last_attention = weights.data
        ctx = ag.swapaxes(ag.matmul(weights, v), -2, -3).reshape(*lead, n, d)
        return self.o(ctx)

    def __call__(self, x, rng=None, train=False):
        if x.shape[-1] != self.q.weight.shape[0]:
            raise ValueError(f"expected width {self.q.weight.shape[0]}, got {x.shape[-1]}")
        x = x + ag.dropout(self.attention(self.ln1(x)), self.dropout, rng, train)
        h = self.fc2(ag.gelu(self.fc1(self.ln2(x))))
        return x + ag.dropout(h, self.dropout, rng, train)


class GRUCell(Module):
    """h = (1 - z) * h_prev + z * tanh(x W_n + b_n + r * (h_prev U_n + c_n)).

    Gate blocks are packed column-wise in the order (z, r, n).
    """

    def __init__(self, d_in, d_h, rng):
        self.d_h = d_h
        self.w_ih = param(np.concatenate([xavier_uniform(rng, d_in, d_h) for _ in range(3)], axis=1))
        self.w_hh = param(np.concatenate([xavier_uniform(rng, d_h, d_h) for _ in range(3)], axis=1))
        self.b_ih = param(np.zeros(3 * d_h))
        self.b_hh = param(np.zeros(3 * d_h))

    def input_projection(self, x):
        return ag.matmul(x, self.w_ih) + self.b_ih

    def step_projected(self, h_prev, xp):
        """One step given the precomputed input projection ``xp``."""
        d = self.d_h
        hp = ag.matmul(h_prev, self.w_hh) + self.b_hh
        z = ag.sigmoid(xp[..., :d] + hp[..., :d])
        r = ag.sigmoid(xp[..., d : 2 * d] + hp[..., d : 2 * d])
        n = ag.tanh(xp[..., 2 * d :] + r * hp[..., 2 * d :])
        return h_prev + z * (n - h_prev)

    def __call__(self, h_prev, x):
        h_prev, x = ag.as_tensor(h_prev), ag.as_tensor(x)
        if x.shape[-1] != self.w_ih.shape[0] or h_prev.shape[-1] != self.d_h:
            raise ValueError(
                f"GRU shape mismatch: x {x.shape} vs {self.w_ih.shape[0]}, "
                f"h {h_prev.shape} vs {self.d_h}"
            )
        if x.ndim == 1:
            out = self.step_projected(h_prev.reshape(1, -1), self.input_projection(x.reshape(1, -1)))
            return out.reshape(-1)
        return self.step_projected(h_prev, self.input_projection(x))


class BiGRU(Module):
    """Stacked bidirectional GRU over axis -2 of a ``[..., T, d_in]`` input."""

    def __init__(self, d_in, d_h, layers, rng):
        self.d_h = d_h
        self.fwd = []
        self.bwd = []
        for i in range(layers):
            width = d_in if i == 0 else 2 * d_h
            self.fwd.append(GRUCell(width, d_h, rng))
            self.bwd.append(GRUCell(width, d_h, rng))

    @staticmethod
    def _run(cell, xp, steps, lead):
        h = ag.Tensor(np.zeros(lead + (cell.d_h,)))
        outs = [None] * len(steps)
        for j, t in enumerate(steps):
            h = cell.step_projected(h, xp[..., t, :])
            outs[t] = h
        return ag.stack(outs, axis=-2)

    def __call__(self, x):
        T = x.shape[-2]
        lead = x.shape[:-2]
        for fcell, bcell in zip(self.fwd, self.bwd):
            f = self._run(fcell, fcell.input_projection(x), range(T), lead)
            b = self._run(bcell, bcell.input_projection(x), range(T - 1, -1, -1), lead)
            x = ag.concat([f, b], axis=-1)
        return x
