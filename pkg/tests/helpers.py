"""Shared builders for the test suite."""

import numpy as np

from semplaus.wk_features import FeatureSchema, NounProfile


def random_profiles(n: int, seed: int, schema: FeatureSchema | None = None):
    """n nouns with uniformly random (but in-range) bins per feature."""
    schema = schema or FeatureSchema.default()
    rng = np.random.default_rng(seed)
    out = {}
    for i in range(n):
        noun = f"noun{i}"
        bins = {f: int(rng.integers(1, schema.n_bins(f) + 1)) for f in schema.features}
        out[noun] = NounProfile(noun=noun, bins=bins)
    return out


def toy_embedding_file(path, words, dim, seed=0, scale=1.0):
    """Write a small word-vector text file and return the vectors."""
    rng = np.random.default_rng(seed)
    vectors = {w: rng.normal(0.0, scale, size=dim) for w in words}
    with open(path, "w", encoding="utf-8") as fh:
        for w, v in vectors.items():
            fh.write(w + " " + " ".join(f"{x:.8f}" for x in v) + "\n")
    return vectors
