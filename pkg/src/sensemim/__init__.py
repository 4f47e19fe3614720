"""Word sense induction from paired contextual vectors.

Pipeline stages: train a small mutual-information network on original and
paraphrase vector pairs, take its first hidden layer as sense embeddings,
cluster those agglomeratively, and score the induced senses with the usual
clustering metrics.
"""

__version__ = "0.1.0"
