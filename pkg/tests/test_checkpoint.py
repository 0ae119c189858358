"""Checkpoint round-trip and corruption handling."""

import struct

import numpy as np
import pytest

from mcseg.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from mcseg.corpus import RawCorpus, build_vocab, label_sentences
from mcseg.model import ModelConfig, Segmenter, make_batch


def small_model(decoder="crf"):
    corpus = RawCorpus("a", "A", [["天气", "不错"], ["走", "了"]])
    vocab = build_vocab([corpus])
    config = ModelConfig(d_embed=4, d_model=8, num_layers=1, num_heads=2,
                         d_ff=16, dropout=0.0, decoder=decoder)
    seg = Segmenter(config, vocab, np.random.default_rng(11))
    batch = make_batch(label_sentences(corpus, vocab), vocab)
    return seg, batch


def test_round_trip_is_bit_exact(tmp_path):
    seg, batch = small_model()
    path = tmp_path / "model.mseg"
    save_checkpoint(path, seg, extra={"epoch": 3, "dev_f1": 96.45})
    loaded, extra = load_checkpoint(path)

    assert extra == {"epoch": 3, "dev_f1": 96.45}
    assert loaded.config == seg.config
    assert loaded.vocab.to_dict() == seg.vocab.to_dict()
    for name, p in seg.params.items():
        assert np.array_equal(loaded.params[name].data, p.data), name
    assert loaded.decode_batch(batch) == seg.decode_batch(batch)


def test_round_trip_mlp_decoder(tmp_path):
    seg, batch = small_model(decoder="mlp")
    path = tmp_path / "model.mseg"
    save_checkpoint(path, seg)
    loaded, extra = load_checkpoint(path)
    assert extra == {}
    assert set(loaded.params) == set(seg.params)
    assert loaded.decode_batch(batch) == seg.decode_batch(batch)


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus.mseg"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError, match="not a model checkpoint"):
        load_checkpoint(path)


def test_rejects_unknown_version(tmp_path):
    seg, _ = small_model()
    path = tmp_path / "model.mseg"
    save_checkpoint(path, seg)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_file_starts_with_magic(tmp_path):
    seg, _ = small_model()
    path = tmp_path / "model.mseg"
    save_checkpoint(path, seg)
    assert path.read_bytes()[:4] == MAGIC
