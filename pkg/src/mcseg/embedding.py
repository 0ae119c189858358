"""Input assembly: fused unigram/bigram embeddings plus the criterion row.

Position t of a sentence contributes the concatenation of its character
embedding and the embeddings of its left and right bigrams (BOS/EOS padded),
mapped through one affine layer to model width. The criterion embedding is
prepended as row 0, sinusoidal position encodings are added to every row,
and one dropout is applied to the whole matrix during training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import tensor as T
from .corpus import BOS, EOS, Vocab, bigram_symbol

log = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def positional_matrix(n_positions: int, d_model: int) -> np.ndarray:
    """Sinusoidal position encodings: rows 0..n_positions-1, read-only."""
    pos = np.arange(n_positions, dtype=np.float64)[:, None]
    dim = np.arange(0, d_model, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, dim / d_model)
    pe = np.zeros((n_positions, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : pe[:, 1::2].shape[1]])
    pe.setflags(write=False)
    return pe


def positional_encoding(t: int, d_model: int) -> np.ndarray:
    if t < 0:
        raise ValueError("position must be non-negative")
    return positional_matrix(t + 1, d_model)[t]


@dataclass
class EmbeddingParams:
    unigram: T.Tensor     # (n_unigrams, d_embed)
    bigram: T.Tensor      # (n_bigrams, d_embed)
    criterion: T.Tensor   # (n_criteria, d_model)
    fuse_w: T.Tensor      # (3 * d_embed, d_model)
    fuse_b: T.Tensor      # (d_model,)

    def named(self, prefix: str = "emb") -> dict[str, T.Tensor]:
        return {
            f"{prefix}.unigram": self.unigram,
            f"{prefix}.bigram": self.bigram,
            f"{prefix}.criterion": self.criterion,
            f"{prefix}.fuse_w": self.fuse_w,
            f"{prefix}.fuse_b": self.fuse_b,
        }


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def init_embedding_params(vocab: Vocab, d_embed: int, d_model: int,
                          rng: np.random.Generator) -> EmbeddingParams:
    """Fresh tables: uniform(-0.1, 0.1) embeddings, Glorot fusion layer."""
    u = rng.uniform(-0.1, 0.1, size=(vocab.n_unigrams, d_embed))
    b = rng.uniform(-0.1, 0.1, size=(vocab.n_bigrams, d_embed))
    c = rng.uniform(-0.1, 0.1, size=(vocab.n_criteria, d_model))
    w = glorot_uniform(rng, 3 * d_embed, d_model)
    return EmbeddingParams(
        unigram=T.Tensor(u, requires_grad=True),
        bigram=T.Tensor(b, requires_grad=True),
        criterion=T.Tensor(c, requires_grad=True),
        fuse_w=T.Tensor(w, requires_grad=True),
        fuse_b=T.Tensor(np.zeros(d_model), requires_grad=True),
    )


def sentence_ids(tokens: list[str], vocab: Vocab):
    """Unigram ids plus left/right bigram ids with BOS/EOS padding."""
    padded = [BOS] + list(tokens) + [EOS]
    uni = np.array([vocab.uni_id(t) for t in tokens], dtype=np.int64)
    left = np.array([vocab.bi_id(a, b) for a, b in zip(padded, padded[1:-1])],
                    dtype=np.int64)
    right = np.array([vocab.bi_id(a, b) for a, b in zip(padded[1:-1], padded[2:])],
                     dtype=np.int64)
    return uni, left, right


def build_input(params: EmbeddingParams, uni: np.ndarray, bi_left: np.ndarray,
                bi_right: np.ndarray, criterion_ids: np.ndarray,
                use_bigrams: bool = True, train: bool = False,
                dropout: float = 0.0,
                rng: np.random.Generator | None = None) -> T.Tensor:
    """Assemble the (batch, T+1, d_model) input matrix.

    Row 0 carries the criterion embedding; rows 1..T carry the fused
    character features. Position encodings are added to every row. With
    use_bigrams=False the bigram slots are zeros and the bigram table
    receives no gradient.
    """
    if uni.ndim != 2:
        raise ValueError("expected (batch, T) id arrays")
    n_batch, n_tok = uni.shape
    d_model = params.criterion.shape[1]

    e_uni = T.embedding_lookup(params.unigram, uni)
    if use_bigrams:
        e_left = T.embedding_lookup(params.bigram, bi_left)
        e_right = T.embedding_lookup(params.bigram, bi_right)
    else:
        d_embed = params.unigram.shape[1]
        zeros = T.Tensor(np.zeros((n_batch, n_tok, d_embed)))
        e_left = e_right = zeros
    fused = T.concat([e_uni, e_left, e_right], axis=-1) @ params.fuse_w
    fused = fused + params.fuse_b

    crit = T.embedding_lookup(params.criterion, criterion_ids)
    crit = T.reshape(crit, (n_batch, 1, d_model))
    h = T.concat([crit, fused], axis=1)
    h = h + T.Tensor(positional_matrix(n_tok + 1, d_model))

    if train and dropout > 0.0:
        if rng is None:
            raise ValueError("dropout during training needs an RNG")
        keep = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
        h = T.mul(h, T.Tensor(keep))
    return h


def load_pretrained(path, table: dict[str, int], d_embed: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Read a text embedding file into a table-shaped array.

    Format: one symbol and its d values per line, space separated; an
    optional first line "count dim" is detected and skipped. Symbols absent
    from ``table`` are ignored; table entries missing from the file keep a
    fresh uniform(-0.1, 0.1) row. Returns (array, number of covered rows).
    """
    out = rng.uniform(-0.1, 0.1, size=(len(table), d_embed))
    covered = 0
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        parts = first.split()
        header = len(parts) == 2 and all(p.isdigit() for p in parts)
        if not header and parts:
            covered += _apply_row(out, table, parts, d_embed, path)
        for line in fh:
            parts = line.split()
            if parts:
                covered += _apply_row(out, table, parts, d_embed, path)
    log.info("pretrained %s: %d/%d symbols covered", path, covered, len(table))
    return out, covered


def _apply_row(out: np.ndarray, table: dict[str, int], parts: list[str],
               d_embed: int, path) -> int:
    symbol = parts[0]
    idx = table.get(symbol)
    if idx is None:
        return 0
    values = parts[1:]
    if len(values) != d_embed:
        raise ValueError(
            f"{path}: symbol '{symbol}' has {len(values)} values, expected {d_embed}")
    out[idx] = np.array([float(v) for v in values])
    return 1
