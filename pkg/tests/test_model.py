"""End-to-end model tests: batching, loss, decoding, and a full gradient check."""

import numpy as np
import pytest

from mcseg import tensor as T
from mcseg.corpus import RawCorpus, build_vocab, label_sentences
from mcseg.model import Batch, ModelConfig, Segmenter, make_batch
from mcseg.optim import AdamState, adam_step

from oracles import central_diff_grad, grads_close


def tiny_setup(decoder="crf", use_bigrams=True, seed=0):
    corpus = RawCorpus("a", "A", [["天气", "不错"], ["走"], ["天", "天气"]])
    vocab = build_vocab([corpus])
    config = ModelConfig(d_embed=4, d_model=8, num_layers=1, num_heads=2,
                         d_ff=16, dropout=0.0, decoder=decoder,
                         use_bigrams=use_bigrams)
    seg = Segmenter(config, vocab, np.random.default_rng(seed))
    batch = make_batch(label_sentences(corpus, vocab), vocab)
    return seg, vocab, batch


def test_invalid_decoder_rejected():
    with pytest.raises(ValueError):
        ModelConfig(decoder="beam")


def test_d_ff_defaults_to_four_d_model():
    assert ModelConfig(d_model=64).d_ff == 256
    assert ModelConfig(d_model=64, d_ff=100).d_ff == 100


def test_config_round_trip():
    c = ModelConfig(d_model=32, num_heads=2, decoder="mlp", use_bigrams=False)
    assert ModelConfig.from_dict(c.to_dict()) == c


def test_make_batch_shapes_and_padding():
    _, vocab, batch = tiny_setup()
    assert batch.uni.shape == (3, 4)
    assert list(batch.lengths) == [4, 1, 3]
    # BMES ids: B=0 M=1 E=2 S=3
    assert list(batch.labels[0]) == [0, 2, 0, 2]
    assert list(batch.labels[1]) == [3, 0, 0, 0]
    assert list(batch.labels[2]) == [3, 0, 2, 0]
    # padding uses the reserved PAD index
    assert batch.uni[1, 1] == 0 and batch.bi_left[1, 1] == 0


def test_attention_mask_marks_criterion_and_real_tokens():
    _, _, batch = tiny_setup()
    mask = batch.attention_mask()
    assert mask.shape == (3, 5)
    assert mask[:, 0].all()
    assert list(mask[1]) == [True, True, False, False, False]


def test_make_batch_rejects_empty():
    _, vocab, _ = tiny_setup()
    with pytest.raises(ValueError):
        make_batch([], vocab)


def test_param_map_covers_all_components():
    seg, _, _ = tiny_setup()
    names = set(seg.params)
    assert {"emb.unigram", "emb.criterion", "enc.0.wq", "enc.0.ln2_b",
            "crf.transitions"} <= names
    seg_mlp, _, _ = tiny_setup(decoder="mlp")
    assert "mlp.w1" in seg_mlp.params and "crf.transitions" not in seg_mlp.params


def test_loss_is_nonnegative_scalar():
    for decoder in ("crf", "mlp"):
        seg, _, batch = tiny_setup(decoder=decoder)
        loss = seg.loss_batch(batch)
        assert loss.shape == ()
        assert loss.item() >= 0.0


def test_decode_batch_lengths_and_label_range():
    for decoder in ("crf", "mlp"):
        seg, _, batch = tiny_setup(decoder=decoder)
        out = seg.decode_batch(batch)
        assert [len(p) for p in out] == [4, 1, 3]
        assert all(0 <= lab <= 3 for path in out for lab in path)


def test_padding_is_inert_in_decoding():
    # a short sentence decodes the same alone and padded inside a batch
    seg, vocab, batch = tiny_setup()
    alone = Batch(uni=batch.uni[1:2, :1], bi_left=batch.bi_left[1:2, :1],
                  bi_right=batch.bi_right[1:2, :1], criteria=batch.criteria[1:2],
                  lengths=batch.lengths[1:2], labels=batch.labels[1:2, :1])
    assert seg.decode_batch(batch)[1] == seg.decode_batch(alone)[0]


def test_padding_is_inert_in_loss():
    seg, vocab, batch = tiny_setup()
    alone = Batch(uni=batch.uni[1:2, :1], bi_left=batch.bi_left[1:2, :1],
                  bi_right=batch.bi_right[1:2, :1], criteria=batch.criteria[1:2],
                  lengths=batch.lengths[1:2], labels=batch.labels[1:2, :1])
    padded = Batch(uni=batch.uni[1:2], bi_left=batch.bi_left[1:2],
                   bi_right=batch.bi_right[1:2], criteria=batch.criteria[1:2],
                   lengths=batch.lengths[1:2], labels=batch.labels[1:2])
    assert seg.loss_batch(padded).item() == pytest.approx(
        seg.loss_batch(alone).item(), abs=1e-12)


def test_same_seed_reproduces_parameters():
    a, _, _ = tiny_setup(seed=7)
    b, _, _ = tiny_setup(seed=7)
    c, _, _ = tiny_setup(seed=8)
    for name in a.params:
        assert np.array_equal(a.params[name].data, b.params[name].data)
    assert any(not np.array_equal(a.params[n].data, c.params[n].data)
               for n in a.params)


def test_bigram_table_untouched_when_disabled():
    seg, _, batch = tiny_setup(use_bigrams=False)
    loss = seg.loss_batch(batch)
    loss.backward()
    assert seg.emb.bigram.grad is None
    assert seg.emb.unigram.grad is not None


def test_full_model_gradients_match_finite_differences():
    seg, _, batch = tiny_setup(seed=3)
    loss = seg.loss_batch(batch)
    loss.backward()

    def loss_given(param):
        def f(x):
            param.data[...] = x.reshape(param.data.shape)
            with T.no_grad():
                return seg.loss_batch(batch).item()
        return f

    for name, p in seg.params.items():
        base = p.data.copy()
        fd = central_diff_grad(loss_given(p), base.copy())
        p.data[...] = base
        assert grads_close(p.grad, fd, rtol=1e-4), name


def test_loss_decreases_under_adam():
    seg, _, batch = tiny_setup()
    params = seg.params
    state = AdamState(params, d_model=8, warmup_steps=10)
    first = seg.loss_batch(batch).item()
    for _ in range(20):
        seg.zero_grads()
        loss = seg.loss_batch(batch)
        loss.backward()
        adam_step(params, state, lr=5e-3)
    assert seg.loss_batch(batch).item() < first * 0.8
