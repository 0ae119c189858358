"""Multi-criteria Chinese word segmentation toolkit.

A single Transformer-encoder segmenter serves several segmentation
standards at once: each sentence is prefixed with a criterion token that
selects the output standard, unigram and bigram character embeddings are
fused at the input, and a shared linear-chain CRF decodes BMES tags.
Built on numpy with a small reverse-mode autodiff core; no deep-learning
framework involved.
"""

__version__ = "0.1.0"
