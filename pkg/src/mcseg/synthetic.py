"""Rule-governed synthetic corpora with controllable segmentation conventions.

The generator draws character streams from a fixed CJK-range alphabet plus
ASCII digit runs, then segments each stream under named conventions:

* convention A keeps every character a separate word (digit runs always
  form one word, under every convention);
* convention B additionally merges an inventory of character pairs,
  greedily left to right;
* convention C merges a mostly-overlapping inventory: most of B's pairs
  plus a few of its own.

Identical streams segmented under different conventions disagree exactly
where the inventories differ, so a conditional model can only resolve them
through its criterion input. The pair inventories of all conventions are
planted into every stream, which keeps C's extra pairs present (unmerged)
in A/B corpora, the situation a transferred criterion must exploit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import RawCorpus

DIGITS = "0123456789"


@dataclass
class SyntheticSpec:
    n_chars: int = 150        # alphabet size, drawn from U+4E00 upward
    n_pairs: int = 50         # pair inventory of convention B
    n_shared: int = 45        # pairs C shares with B
    n_new: int = 5            # pairs only C merges
    p_digit: float = 0.05     # chance a slot emits a digit run
    p_pair: float = 0.24      # chance a slot emits a planted pair
    min_len: int = 8          # sentence length bounds, in characters
    max_len: int = 18

    def __post_init__(self):
        if self.n_shared > self.n_pairs:
            raise ValueError("cannot share more pairs than B has")
        if self.min_len < 2 or self.max_len < self.min_len:
            raise ValueError("bad sentence length bounds")


@dataclass
class SyntheticWorld:
    """Alphabet, per-convention pair inventories, and the planting pool."""

    spec: SyntheticSpec
    alphabet: list[str]
    conventions: dict[str, frozenset[tuple[str, str]]]
    plant_pairs: list[tuple[str, str]] = field(default_factory=list)


def make_alphabet(n_chars: int) -> list[str]:
    return [chr(0x4E00 + i) for i in range(n_chars)]


def build_world(spec: SyntheticSpec, seed: int) -> SyntheticWorld:
    rng = np.random.default_rng(seed)
    alphabet = make_alphabet(spec.n_chars)
    n_total = spec.n_pairs + spec.n_new

    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    while len(pairs) < n_total:
        a, b = rng.choice(len(alphabet), size=2, replace=False)
        pair = (alphabet[int(a)], alphabet[int(b)])
        if pair not in seen:
            seen.add(pair)
            pairs.append(pair)

    dict_b = frozenset(pairs[: spec.n_pairs])
    dict_c = frozenset(pairs[: spec.n_shared] + pairs[spec.n_pairs:])
    conventions = {"A": frozenset(), "B": dict_b, "C": dict_c}
    return SyntheticWorld(spec=spec, alphabet=alphabet,
                          conventions=conventions, plant_pairs=pairs)


def rule_segment(chars: list[str], pairs: frozenset[tuple[str, str]]) -> list[str]:
    """Deterministic gold segmentation of a character stream.

    Digit runs become one word. Elsewhere the scan is greedy left to right:
    a character starting an inventory pair merges with its right neighbor,
    anything else stands alone. Merges never cross into a digit.
    """
    words: list[str] = []
    i = 0
    n = len(chars)
    while i < n:
        if chars[i] in DIGITS:
            j = i
            while j < n and chars[j] in DIGITS:
                j += 1
            words.append("".join(chars[i:j]))
            i = j
        elif (i + 1 < n and chars[i + 1] not in DIGITS
              and (chars[i], chars[i + 1]) in pairs):
            words.append(chars[i] + chars[i + 1])
            i += 2
        else:
            words.append(chars[i])
            i += 1
    return words


def sample_stream(world: SyntheticWorld, rng: np.random.Generator) -> list[str]:
    spec = world.spec
    target = int(rng.integers(spec.min_len, spec.max_len + 1))
    chars: list[str] = []
    while len(chars) < target:
        roll = rng.random()
        if roll < spec.p_digit:
            run = int(rng.integers(1, 4))
            chars.extend(rng.choice(list(DIGITS), size=run))
        elif roll < spec.p_digit + spec.p_pair:
            a, b = world.plant_pairs[int(rng.integers(len(world.plant_pairs)))]
            chars.extend((a, b))
        else:
            chars.append(world.alphabet[int(rng.integers(len(world.alphabet)))])
    return chars


def make_corpus(world: SyntheticWorld, convention: str, n_sentences: int,
                rng: np.random.Generator, name: str | None = None) -> RawCorpus:
    """Fresh streams segmented under one convention."""
    pairs = world.conventions[convention]
    sentences = [rule_segment(sample_stream(world, rng), pairs)
                 for _ in range(n_sentences)]
    return RawCorpus(name=name or convention.lower(), criterion=convention,
                     sentences=sentences)


def make_parallel(world: SyntheticWorld, conventions: list[str],
                  n_sentences: int, rng: np.random.Generator
                  ) -> dict[str, RawCorpus]:
    """The same streams segmented under several conventions."""
    streams = [sample_stream(world, rng) for _ in range(n_sentences)]
    out = {}
    for conv in conventions:
        pairs = world.conventions[conv]
        out[conv] = RawCorpus(name=conv.lower(), criterion=conv,
                              sentences=[rule_segment(s, pairs) for s in streams])
    return out
