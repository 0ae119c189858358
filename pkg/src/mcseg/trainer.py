"""Multi-corpus training, few-shot criterion transfer, and inference.

Every batch holds sentences from a single corpus; the batch order within an
epoch is a seeded global shuffle across corpora. Model selection keeps the
parameters with the best macro-averaged dev F1 (strictly greater, so the
earliest best epoch wins ties). Runs are bit-reproducible for a given seed:
initialization, batch order, and dropout each draw from their own stream
spawned off the config seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .corpus import (
    LABELS,
    LabeledSentence,
    RawCorpus,
    Vocab,
    bmes_to_words,
    build_vocab,
    label_sentences,
    normalize_width,
    preprocess_corpus,
    replace_runs_with_surfaces,
    split_train_dev,
    tokenize,
    training_word_set,
)
from .embedding import load_pretrained
from .metrics import SegScores, evaluate_segmentation, macro_average
from .model import Batch, ModelConfig, Segmenter, make_batch
from .optim import AdamState, adam_step, clip_global_norm

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    warmup_steps: int = 4000
    freeze_pretrained_epochs: int = 80
    seed: int = 0
    dev_ratio: float = 0.10
    grad_clip: float | None = None
    min_count_unigram: int = 1
    min_count_bigram: int = 1
    pretrained_unigrams: str | None = None
    pretrained_bigrams: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainResult:
    segmenter: Segmenter
    history: list[dict] = field(default_factory=list)
    loss_steps: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_macro_f1: float = -1.0
    training_words: set[str] = field(default_factory=set)
    dev_corpora: dict[str, RawCorpus] = field(default_factory=dict)


def _spawn_rngs(seed: int) -> tuple[np.random.Generator, ...]:
    init_ss, shuffle_ss, dropout_ss = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(init_ss), np.random.default_rng(shuffle_ss),
            np.random.default_rng(dropout_ss))


def _epoch_batches(per_corpus: list[list], batch_size: int,
                   rng: np.random.Generator) -> list[list]:
    """Single-corpus batches in a globally shuffled order."""
    batches = []
    for sentences in per_corpus:
        order = rng.permutation(len(sentences))
        for lo in range(0, len(sentences), batch_size):
            batches.append([sentences[i] for i in order[lo:lo + batch_size]])
    return [batches[i] for i in rng.permutation(len(batches))]


def _snapshot(params: dict[str, T.Tensor]) -> dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in params.items()}


def _restore(params: dict[str, T.Tensor], snap: dict[str, np.ndarray]) -> None:
    for k, p in params.items():
        p.data[...] = snap[k]


def predict_words(segmenter: Segmenter, sentences, batch_size: int = 256
                  ) -> list[list[str]]:
    """Decode labeled sentences back into word sequences."""
    out: list[list[str]] = []
    for lo in range(0, len(sentences), batch_size):
        chunk = sentences[lo:lo + batch_size]
        paths = segmenter.decode_batch(make_batch(chunk, segmenter.vocab))
        for sent, path in zip(chunk, paths):
            labels = [LABELS[i] for i in path]
            out.append(bmes_to_words(sent.tokens, labels))
    return out


def evaluate_corpus(segmenter: Segmenter, corpus: RawCorpus,
                    batch_size: int = 256,
                    training_words: set[str] | None = None,
                    preprocess: bool = True) -> SegScores:
    """Score a segmented corpus; the input is preprocessed but never
    clause-split, so line structure is preserved."""
    if preprocess:
        corpus = preprocess_corpus(corpus, clause_split=False)
    sentences = label_sentences(corpus, segmenter.vocab)
    pred = predict_words(segmenter, sentences, batch_size)
    return evaluate_segmentation(corpus.sentences, pred, training_words)


def _run_epochs(segmenter: Segmenter, train_sets: list[list], dev_sets: dict,
                config: TrainConfig, result: TrainResult,
                shuffle_rng, dropout_rng,
                frozen_while_early: frozenset[str] = frozenset(),
                always_frozen: frozenset[str] = frozenset(),
                grad_masks: dict[str, np.ndarray] | None = None,
                pretrained_loaded: bool = False) -> None:
    params = segmenter.params
    state = AdamState(params, d_model=segmenter.config.d_model,
                      warmup_steps=config.warmup_steps)
    best = _snapshot(params)
    result.best_macro_f1 = -1.0

    for epoch in range(1, config.epochs + 1):
        frozen = set(always_frozen)
        if pretrained_loaded and epoch <= config.freeze_pretrained_epochs:
            frozen |= frozen_while_early
        losses = []
        for sentences in _epoch_batches(train_sets, config.batch_size,
                                        shuffle_rng):
            batch = make_batch(sentences, segmenter.vocab)
            segmenter.zero_grads()
            loss = segmenter.loss_batch(batch, train=True, rng=dropout_rng)
            value = loss.item()
            if not math.isfinite(value):
                raise RuntimeError(
                    f"training diverged at epoch {epoch}: loss={value}")
            loss.backward()
            if config.grad_clip is not None:
                clip_global_norm(params, config.grad_clip)
            adam_step(params, state, frozen=frozenset(frozen),
                      grad_masks=grad_masks)
            losses.append(value)
            result.loss_steps.append(value)

        dev_f1 = {}
        for name, (corpus, sentences) in dev_sets.items():
            pred = predict_words(segmenter, sentences, config.batch_size)
            dev_f1[name] = evaluate_segmentation(corpus.sentences, pred).f1
        macro = macro_average(list(dev_f1.values())) if dev_f1 else 0.0

        row = {"epoch": epoch, "mean_loss": float(np.mean(losses)),
               "macro_dev_f1": macro,
               "dev_f1": dict(dev_f1), "frozen": sorted(frozen)}
        result.history.append(row)
        log.info("epoch %d: loss %.4f, macro dev F1 %.4f (%s)", epoch,
                 row["mean_loss"], macro,
                 ", ".join(f"{k} {v:.4f}" for k, v in dev_f1.items()))
        if macro > result.best_macro_f1:
            result.best_macro_f1 = macro
            result.best_epoch = epoch
            best = _snapshot(params)

    _restore(params, best)


def train(corpora: list[RawCorpus], model_config: ModelConfig,
          config: TrainConfig) -> TrainResult:
    """Train one model over several corpora, one criterion token each.

    Corpora are preprocessed (with clause splitting) and split into
    train/dev per corpus; the vocabulary is built from the train splits
    only. Returns the parameters of the best macro-dev-F1 epoch.
    """
    if not corpora:
        raise ValueError("no corpora given")
    names = [c.name for c in corpora]
    if len(set(names)) != len(names):
        raise ValueError(f"corpus names must be unique, got {names}")

    init_rng, shuffle_rng, dropout_rng = _spawn_rngs(config.seed)

    splits = []
    for corpus in corpora:
        prepped = preprocess_corpus(corpus, clause_split=True)
        splits.append(split_train_dev(prepped, config.dev_ratio, config.seed))
    train_corpora = [tr for tr, _ in splits]

    vocab = build_vocab(train_corpora, config.min_count_unigram,
                        config.min_count_bigram)
    segmenter = Segmenter(model_config, vocab, init_rng)

    pretrained_loaded = False
    if config.pretrained_unigrams:
        arr, _ = load_pretrained(config.pretrained_unigrams, vocab.unigrams,
                                 model_config.d_embed, init_rng)
        segmenter.emb.unigram.data[...] = arr
        pretrained_loaded = True
    if config.pretrained_bigrams:
        arr, _ = load_pretrained(config.pretrained_bigrams, vocab.bigrams,
                                 model_config.d_embed, init_rng)
        segmenter.emb.bigram.data[...] = arr
        pretrained_loaded = True

    train_sets = [label_sentences(tr, vocab) for tr in train_corpora]
    dev_sets = {dv.name: (dv, label_sentences(dv, vocab)) for _, dv in splits}

    result = TrainResult(segmenter=segmenter,
                         training_words=training_word_set(train_corpora),
                         dev_corpora={dv.name: dv for _, dv in splits})
    _run_epochs(segmenter, train_sets, dev_sets, config, result,
                shuffle_rng, dropout_rng,
                frozen_while_early=frozenset({"emb.unigram", "emb.bigram"}),
                pretrained_loaded=pretrained_loaded)
    return result


def clone_segmenter(segmenter: Segmenter) -> Segmenter:
    """Independent copy: fresh vocab dicts, fresh parameter arrays."""
    vocab = Vocab.from_dict(segmenter.vocab.to_dict())
    clone = Segmenter(segmenter.config, vocab, np.random.default_rng(0))
    for name, p in segmenter.params.items():
        clone.params[name].data[...] = p.data
    return clone


def transfer(base: Segmenter, corpus: RawCorpus,
             config: TrainConfig) -> TrainResult:
    """Adapt a trained model to one new criterion from a few sentences.

    The new criterion gets a fresh embedding row (the mean of the existing
    rows); everything else stays frozen, so only that row trains. The base
    model is not modified. The corpus is split train/dev like full training
    and the best dev-F1 row is kept.
    """
    if corpus.criterion in base.vocab.criteria:
        raise ValueError(
            f"criterion '{corpus.criterion}' is already trained; "
            "transfer expects a new one")

    _, shuffle_rng, dropout_rng = _spawn_rngs(config.seed)
    segmenter = clone_segmenter(base)
    idx = segmenter.vocab.add_criterion(corpus.criterion)
    old = segmenter.emb.criterion.data
    grown = np.vstack([old, old.mean(axis=0, keepdims=True)])
    segmenter.emb.criterion = T.Tensor(grown, requires_grad=True)

    mask = np.zeros_like(grown)
    mask[idx, :] = 1.0
    always_frozen = frozenset(set(segmenter.params) - {"emb.criterion"})

    prepped = preprocess_corpus(corpus, clause_split=True)
    tr, dv = split_train_dev(prepped, config.dev_ratio, config.seed)
    train_sets = [label_sentences(tr, segmenter.vocab)]
    dev_sets = {dv.name: (dv, label_sentences(dv, segmenter.vocab))}

    result = TrainResult(segmenter=segmenter,
                         training_words=training_word_set([tr]),
                         dev_corpora={dv.name: dv})
    _run_epochs(segmenter, train_sets, dev_sets, config, result,
                shuffle_rng, dropout_rng, always_frozen=always_frozen,
                grad_masks={"emb.criterion": mask})
    return result


def segment(segmenter: Segmenter, text: str, criterion: str) -> list[str]:
    """Segment one raw line under a criterion, restoring digit/letter runs.

    Joining the returned words reproduces the width-normalized input.
    """
    normalized = normalize_width(text)
    tokens, surfaces = replace_runs_with_surfaces(tokenize(normalized))
    if not tokens:
        return []
    cid = segmenter.vocab.criterion_id(criterion)
    # placeholder labels; decoding ignores them
    sent = LabeledSentence(tokens=tokens, labels=["S"] * len(tokens),
                           criterion_id=cid)
    path = segmenter.decode_batch(make_batch([sent], segmenter.vocab))[0]
    labels = [LABELS[i] for i in path]
    return bmes_to_words(surfaces, labels)
