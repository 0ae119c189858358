"""Whole-model assembly: embeddings, encoder, and decoder behind one object.

The Segmenter owns every parameter tensor and exposes the three operations
training needs: a scalar batch loss, decoding, and a flat name -> tensor map
for the optimizer and checkpoints. Batches are padded id arrays; the
attention mask and the CRF length handling keep padding inert end to end.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .corpus import LABEL_TO_ID, LabeledSentence, Vocab
from .decoder import (
    crf_nll,
    emission_scores,
    init_crf_params,
    init_mlp_params,
    mlp_decode,
    mlp_log_probs,
    mlp_nll,
    viterbi_decode,
)
from .embedding import build_input, init_embedding_params, sentence_ids
from .encoder import EncoderConfig, encode, init_encoder_params, named_encoder_params

DECODERS = ("crf", "mlp")


@dataclass
class ModelConfig:
    d_embed: int = 100
    d_model: int = 256
    num_layers: int = 6
    num_heads: int = 4
    d_ff: int | None = None  # None means 4 * d_model
    dropout: float = 0.2
    decoder: str = "crf"
    use_bigrams: bool = True

    def __post_init__(self):
        if self.d_ff is None:
            self.d_ff = 4 * self.d_model
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}")

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(d_model=self.d_model, num_layers=self.num_layers,
                             num_heads=self.num_heads, d_ff=self.d_ff,
                             dropout=self.dropout)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class Batch:
    """Padded id arrays for one batch. Index 0 is the reserved PAD row."""

    uni: np.ndarray        # (batch, T) unigram ids
    bi_left: np.ndarray    # (batch, T)
    bi_right: np.ndarray   # (batch, T)
    criteria: np.ndarray   # (batch,)
    lengths: np.ndarray    # (batch,)
    labels: np.ndarray | None = None  # (batch, T) label ids

    def __len__(self) -> int:
        return self.uni.shape[0]

    def attention_mask(self) -> np.ndarray:
        """(batch, T+1) key validity; the criterion row is always valid."""
        n_batch, n_tok = self.uni.shape
        mask = np.zeros((n_batch, n_tok + 1), dtype=bool)
        mask[:, 0] = True
        mask[:, 1:] = np.arange(n_tok)[None, :] < self.lengths[:, None]
        return mask


def make_batch(sentences: list[LabeledSentence], vocab: Vocab) -> Batch:
    if not sentences:
        raise ValueError("cannot batch zero sentences")
    lengths = np.array([len(s.tokens) for s in sentences], dtype=np.int64)
    n_tok = int(lengths.max())
    n_batch = len(sentences)

    uni = np.zeros((n_batch, n_tok), dtype=np.int64)
    left = np.zeros((n_batch, n_tok), dtype=np.int64)
    right = np.zeros((n_batch, n_tok), dtype=np.int64)
    labels = np.zeros((n_batch, n_tok), dtype=np.int64)
    criteria = np.zeros(n_batch, dtype=np.int64)
    for i, s in enumerate(sentences):
        u, bl, br = sentence_ids(s.tokens, vocab)
        t = len(s.tokens)
        uni[i, :t] = u
        left[i, :t] = bl
        right[i, :t] = br
        labels[i, :t] = [LABEL_TO_ID[lab] for lab in s.labels]
        criteria[i] = s.criterion_id
    return Batch(uni=uni, bi_left=left, bi_right=right, criteria=criteria,
                 lengths=lengths, labels=labels)


class Segmenter:
    """Criterion-conditioned character tagger with a CRF or softmax decoder."""

    def __init__(self, config: ModelConfig, vocab: Vocab,
                 rng: np.random.Generator):
        self.config = config
        self.vocab = vocab
        self.enc_config = config.encoder_config()
        self.emb = init_embedding_params(vocab, config.d_embed, config.d_model, rng)
        self.layers = init_encoder_params(self.enc_config, rng)
        if config.decoder == "crf":
            self.dec = init_crf_params(config.d_model, rng)
        else:
            self.dec = init_mlp_params(config.d_model, rng)

    @property
    def params(self) -> dict[str, T.Tensor]:
        out = dict(self.emb.named())
        out.update(named_encoder_params(self.layers))
        out.update(self.dec.named())
        return out

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def encode_batch(self, batch: Batch, train: bool = False,
                     rng: np.random.Generator | None = None) -> T.Tensor:
        """(batch, T, d_model) encoded characters, criterion row removed."""
        h = build_input(self.emb, batch.uni, batch.bi_left, batch.bi_right,
                        batch.criteria, use_bigrams=self.config.use_bigrams,
                        train=train, dropout=self.config.dropout, rng=rng)
        h = encode(h, self.layers, self.enc_config, mask=batch.attention_mask(),
                   train=train, rng=rng)
        return h[:, 1:, :]

    def loss_batch(self, batch: Batch, train: bool = False,
                   rng: np.random.Generator | None = None) -> T.Tensor:
        """Mean per-sentence negative log-likelihood of the gold labels."""
        if batch.labels is None:
            raise ValueError("batch has no labels")
        encoded = self.encode_batch(batch, train=train, rng=rng)
        if self.config.decoder == "crf":
            nll = crf_nll(emission_scores(encoded, self.dec),
                          self.dec.transitions, batch.labels, batch.lengths)
        else:
            nll = mlp_nll(encoded, self.dec, batch.labels, batch.lengths)
        return T.tmean(nll)

    def decode_batch(self, batch: Batch) -> list[list[int]]:
        """Best label ids per sentence, trimmed to true lengths."""
        with T.no_grad():
            encoded = self.encode_batch(batch)
            if self.config.decoder == "crf":
                e = emission_scores(encoded, self.dec).data
                trans = self.dec.transitions.data
                return [viterbi_decode(e[i, : batch.lengths[i]], trans)
                        for i in range(len(batch))]
            logp = mlp_log_probs(encoded, self.dec).data
            return [mlp_decode(logp[i, : batch.lengths[i]])
                    for i in range(len(batch))]
