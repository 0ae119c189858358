"""Single-file model checkpoints.

Layout: 4-byte magic, little-endian u32 format version, u64 header length,
a UTF-8 JSON header, then the raw little-endian float64 tensor payloads.
The header carries the model config, the vocabulary, a caller-supplied
``extra`` dict, and a tensor directory of (name, shape, offset) entries with
offsets relative to the payload start. Round trips are bit exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .corpus import Vocab
from .model import ModelConfig, Segmenter

MAGIC = b"MSEG"
VERSION = 1


def save_checkpoint(path, segmenter: Segmenter, extra: dict | None = None) -> None:
    params = segmenter.params
    directory = []
    payloads = []
    offset = 0
    for name in sorted(params):
        data = np.ascontiguousarray(params[name].data, dtype="<f8")
        directory.append({"name": name, "shape": list(data.shape),
                          "offset": offset})
        payloads.append(data.tobytes())
        offset += data.nbytes

    header = {
        "model_config": segmenter.config.to_dict(),
        "vocab": segmenter.vocab.to_dict(),
        "extra": extra or {},
        "tensors": directory,
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(blob)))
        fh.write(blob)
        for chunk in payloads:
            fh.write(chunk)


def load_checkpoint(path) -> tuple[Segmenter, dict]:
    """Rebuild a Segmenter and return it with the stored ``extra`` dict."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    version, header_len = struct.unpack_from("<IQ", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    start = 4 + 12
    header = json.loads(raw[start:start + header_len].decode("utf-8"))
    payload_start = start + header_len

    config = ModelConfig.from_dict(header["model_config"])
    vocab = Vocab.from_dict(header["vocab"])
    segmenter = Segmenter(config, vocab, np.random.default_rng(0))
    params = segmenter.params
    stored = {e["name"] for e in header["tensors"]}
    if stored != set(params):
        missing = sorted(set(params) - stored)
        surplus = sorted(stored - set(params))
        raise ValueError(f"{path}: tensor directory mismatch "
                         f"(missing {missing}, surplus {surplus})")
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=size,
                            offset=payload_start + entry["offset"])
        param = params[entry["name"]]
        if shape != param.data.shape:
            raise ValueError(f"{path}: tensor '{entry['name']}' has shape "
                             f"{shape}, model expects {param.data.shape}")
        param.data[...] = arr.reshape(shape)
    return segmenter, header["extra"]
