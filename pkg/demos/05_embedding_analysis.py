"""Look inside a trained model: criterion geometry and bigram neighbors.

Two small probes of what training left in the embedding tables. The
criterion embeddings of related conventions should sit closer together
than unrelated ones; here B and C share most of their pair dictionary
while A merges nothing, so after transferring C onto an A/B model the
2-D projection puts C near B. Bigram neighbors show which character
pairs the model treats alike.
"""

import numpy as np

from mcseg.analysis import criterion_map, nearest_bigrams
from mcseg.corpus import bigram_symbol
from mcseg.model import ModelConfig
from mcseg.synthetic import SyntheticSpec, build_world, make_corpus
from mcseg.trainer import TrainConfig, train, transfer

spec = SyntheticSpec(n_chars=60, n_pairs=20, n_shared=18, n_new=2)
world = build_world(spec, seed=5)
rng = np.random.default_rng(0)

model_config = ModelConfig(d_embed=16, d_model=32, num_layers=1, num_heads=2,
                           d_ff=64, dropout=0.1)
base = train([make_corpus(world, "A", 800, rng),
              make_corpus(world, "B", 800, rng)],
             model_config,
             TrainConfig(epochs=4, batch_size=32, warmup_steps=60, seed=1))
moved = transfer(base.segmenter, make_corpus(world, "C", 60,
                                             np.random.default_rng(7)),
                 TrainConfig(epochs=15, batch_size=16, warmup_steps=30,
                             seed=0))

print("criterion embeddings projected to 2-D:")
coords = {}
for name, x, y in criterion_map(moved.segmenter):
    coords[name] = np.array([x, y])
    print(f"  {name}  ({x:+.3f}, {y:+.3f})")

d_bc = float(np.linalg.norm(coords["B"] - coords["C"]))
d_ac = float(np.linalg.norm(coords["A"] - coords["C"]))
print(f"distance B-C {d_bc:.3f} vs A-C {d_ac:.3f}"
      f" (C was transferred from a model of A and B)")

# neighbors of a dictionary pair's internal bigram
a, b = sorted(world.conventions["B"])[0]
inside = bigram_symbol(a, b)
print(f"\nnearest bigrams to {inside!r} (a pair B merges):")
for symbol, cosine in nearest_bigrams(moved.segmenter, inside, k=5):
    merged = "merged by B" if tuple(symbol) in world.conventions["B"] else ""
    print(f"  {symbol!r}  cos {cosine:+.3f}  {merged}")
