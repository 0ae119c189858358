"""Post-norm Transformer encoder over the criterion-prefixed input matrix.

Attention is fully bidirectional across all T+1 rows, including the
criterion row; batches carry a key-validity mask so attention weights on
padding are exactly zero. Row 0 is dropped by the caller after encoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .embedding import glorot_uniform


@dataclass
class EncoderConfig:
    d_model: int = 256
    num_layers: int = 6
    num_heads: int = 4
    d_ff: int = 1024  # 4 * d_model
    dropout: float = 0.2

    def __post_init__(self):
        if self.d_model % self.num_heads != 0:
            raise ValueError("d_model must be divisible by num_heads")

    @property
    def d_k(self) -> int:
        return self.d_model // self.num_heads


def init_encoder_params(config: EncoderConfig,
                        rng: np.random.Generator) -> list[dict[str, T.Tensor]]:
    """Glorot-uniform projections, identity-at-init layer norms."""
    d, f = config.d_model, config.d_ff
    layers = []
    for _ in range(config.num_layers):
        p = {
            "wq": glorot_uniform(rng, d, d),
            "wk": glorot_uniform(rng, d, d),
            "wv": glorot_uniform(rng, d, d),
            "wo": glorot_uniform(rng, d, d),
            "ff_w1": glorot_uniform(rng, d, f),
            "ff_b1": np.zeros(f),
            "ff_w2": glorot_uniform(rng, f, d),
            "ff_b2": np.zeros(d),
            "ln1_g": np.ones(d),
            "ln1_b": np.zeros(d),
            "ln2_g": np.ones(d),
            "ln2_b": np.zeros(d),
        }
        layers.append({k: T.Tensor(v, requires_grad=True) for k, v in p.items()})
    return layers


def named_encoder_params(layers: list[dict[str, T.Tensor]],
                         prefix: str = "enc") -> dict[str, T.Tensor]:
    out = {}
    for i, layer in enumerate(layers):
        for k, t in layer.items():
            out[f"{prefix}.{i}.{k}"] = t
    return out


def scaled_dot_attention(q: T.Tensor, k: T.Tensor, v: T.Tensor,
                         mask: np.ndarray | None = None,
                         return_weights: bool = False):
    """softmax(QK^T / sqrt(d_k)) V over the last two axes.

    ``mask`` marks valid key positions (broadcastable to the score shape);
    masked keys get exactly zero weight.
    """
    d_k = q.shape[-1]
    scores = T.scale(q @ T.transpose(k, _swap_axes(k.ndim)), 1.0 / math.sqrt(d_k))
    weights = T.softmax(scores, axis=-1, mask=mask)
    out = weights @ v
    if return_weights:
        return out, weights
    return out


def _swap_axes(ndim: int) -> tuple:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def _dropout(h: T.Tensor, rate: float, train: bool,
             rng: np.random.Generator | None) -> T.Tensor:
    if not train or rate <= 0.0:
        return h
    if rng is None:
        raise ValueError("dropout during training needs an RNG")
    keep = (rng.random(h.shape) >= rate) / (1.0 - rate)
    return T.mul(h, T.Tensor(keep))


def multi_head(h: T.Tensor, layer: dict[str, T.Tensor], num_heads: int,
               mask: np.ndarray | None = None) -> T.Tensor:
    """All heads in one pass via reshape; equivalent to per-head slices."""
    n_batch, n_rows, d_model = h.shape
    d_k = d_model // num_heads

    def split_heads(x: T.Tensor) -> T.Tensor:
        x = T.reshape(x, (n_batch, n_rows, num_heads, d_k))
        return T.transpose(x, (0, 2, 1, 3))

    q = split_heads(h @ layer["wq"])
    k = split_heads(h @ layer["wk"])
    v = split_heads(h @ layer["wv"])
    key_mask = None if mask is None else mask[:, None, None, :]
    ctx = scaled_dot_attention(q, k, v, mask=key_mask)
    ctx = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (n_batch, n_rows, d_model))
    return ctx @ layer["wo"]


def feed_forward(z: T.Tensor, layer: dict[str, T.Tensor]) -> T.Tensor:
    hidden = T.relu(z @ layer["ff_w1"] + layer["ff_b1"])
    return hidden @ layer["ff_w2"] + layer["ff_b2"]


def encoder_layer(h: T.Tensor, layer: dict[str, T.Tensor], config: EncoderConfig,
                  mask: np.ndarray | None = None, train: bool = False,
                  rng: np.random.Generator | None = None) -> T.Tensor:
    attn = multi_head(h, layer, config.num_heads, mask=mask)
    attn = _dropout(attn, config.dropout, train, rng)
    z = T.layer_norm(h + attn, layer["ln1_g"], layer["ln1_b"])
    ff = feed_forward(z, layer)
    ff = _dropout(ff, config.dropout, train, rng)
    return T.layer_norm(z + ff, layer["ln2_g"], layer["ln2_b"])


def encode(h: T.Tensor, layers: list[dict[str, T.Tensor]], config: EncoderConfig,
           mask: np.ndarray | None = None, train: bool = False,
           rng: np.random.Generator | None = None) -> T.Tensor:
    """Apply every encoder layer in order; zero layers is the identity."""
    if h.ndim != 3:
        raise ValueError("encode expects (batch, rows, d_model)")
    for layer in layers:
        h = encoder_layer(h, layer, config, mask=mask, train=train, rng=rng)
    return h
