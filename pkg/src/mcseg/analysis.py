"""Embedding-space inspection: criterion geometry and bigram neighborhoods.

The projection works on the scatter matrix in whichever space is smaller
(rows or features), so projecting a handful of criterion vectors out of a
wide table costs a few-by-few eigendecomposition. Column signs follow a
fixed convention to make results reproducible across runs and backends.
"""

from __future__ import annotations

import numpy as np

from .corpus import RESERVED
from .model import Segmenter

_EIG_FLOOR = 1e-12


def _sign_fix(coords: np.ndarray) -> np.ndarray:
    """Flip each column so its first entry of visible magnitude is positive."""
    out = coords.copy()
    for j in range(out.shape[1]):
        nz = np.nonzero(np.abs(out[:, j]) > _EIG_FLOOR)[0]
        if nz.size and out[nz[0], j] < 0:
            out[:, j] = -out[:, j]
    return out


def pca_2d(rows) -> tuple[np.ndarray, np.ndarray]:
    """Principal 2-D coordinates of row vectors, plus explained variance.

    Returns (coords, ratio): coords is (M, 2); ratio holds each component's
    share of the total variance. Directions with eigenvalues at numerical
    zero produce zero coordinate columns (two points always line up on one
    axis, so the second column is zero then).
    """
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D array with at least two rows")
    centered = x - x.mean(axis=0, keepdims=True)
    n_rows, n_feat = centered.shape

    coords = np.zeros((n_rows, 2))
    if n_rows <= n_feat:
        eigvals, vecs = np.linalg.eigh(centered @ centered.T)
        top = np.argsort(eigvals)[::-1][:2]
        for j, idx in enumerate(top):
            if eigvals[idx] > _EIG_FLOOR:
                coords[:, j] = vecs[:, idx] * np.sqrt(eigvals[idx])
    else:
        eigvals, vecs = np.linalg.eigh(centered.T @ centered)
        top = np.argsort(eigvals)[::-1][:2]
        for j, idx in enumerate(top):
            if eigvals[idx] > _EIG_FLOOR:
                coords[:, j] = centered @ vecs[:, idx]

    kept = np.clip(eigvals[top], 0.0, None)
    total = float(np.clip(eigvals, 0.0, None).sum())
    ratio = kept / total if total > 0.0 else np.zeros(2)
    return _sign_fix(coords), ratio


def cosine_neighbors(table, index: int, k: int) -> list[tuple[int, float]]:
    """The k most cosine-similar rows to ``table[index]``, query excluded."""
    x = np.asarray(table, dtype=np.float64)
    if not 0 <= index < x.shape[0]:
        raise IndexError(f"row {index} outside table of {x.shape[0]}")
    q = x[index]
    denom = np.linalg.norm(x, axis=1) * np.linalg.norm(q)
    sims = np.where(denom > 0.0, x @ q / np.where(denom == 0.0, 1.0, denom), 0.0)
    order = [i for i in np.argsort(-sims, kind="stable") if i != index]
    return [(int(i), float(sims[i])) for i in order[: max(k, 0)]]


def criterion_map(segmenter: Segmenter) -> list[tuple[str, float, float]]:
    """2-D layout of the trained criterion embeddings, one row per criterion."""
    names = sorted(segmenter.vocab.criteria, key=segmenter.vocab.criteria.get)
    coords, _ = pca_2d(segmenter.emb.criterion.data)
    return [(name, float(coords[i, 0]), float(coords[i, 1]))
            for i, name in enumerate(names)]


def nearest_bigrams(segmenter: Segmenter, symbol: str,
                    k: int) -> list[tuple[str, float]]:
    """Closest bigrams to ``symbol`` in the learned table.

    Reserved rows are infrastructure, not data, so they never appear in the
    result.
    """
    vocab = segmenter.vocab
    if symbol not in vocab.bigrams:
        known = vocab.n_bigrams - len(RESERVED)
        raise KeyError(f"bigram '{symbol}' not in vocabulary ({known} known)")
    index = vocab.bigrams[symbol]
    by_index = {i: s for s, i in vocab.bigrams.items()}
    reserved = {vocab.bigrams[s] for s in RESERVED if s in vocab.bigrams}
    hits = []
    for i, sim in cosine_neighbors(segmenter.emb.bigram.data, index,
                                   k + len(reserved)):
        if i not in reserved:
            hits.append((by_index[i], sim))
        if len(hits) == k:
            break
    return hits
