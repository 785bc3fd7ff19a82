"""Synthetic dataset generators.

Two flavors: a tiny linearly separable set (every classifier should reach
accuracy 1.0 on it), and a richer "worldlet" whose labels are a deterministic
function of noun attribute bins, so attribute-aware models have real headroom
over word vectors alone. Both write the same file formats the loaders read,
which makes them usable as demo data and as the offline test fixture.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import LabeledTriple, save_triples
from .errors import ValidationError
from .seeding import rng_for
from .wk_features import FeatureSchema, NounProfile, save_bins


def _write_vocab(path: Path, verbs: list[str], nouns: list[str]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for v in verbs:
            fh.write(f"{v}\tverb\t5.0\n")
        for n in nouns:
            fh.write(f"{n}\tnoun\t5.0\n")


def _write_embeddings(path: Path, vectors: dict[str, np.ndarray]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for word, vec in vectors.items():
            fh.write(word + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")


def _random_profiles(nouns: list[str], schema: FeatureSchema,
                     rng: np.random.Generator) -> dict[str, NounProfile]:
    out = {}
    for noun in nouns:
        bins = {f: int(rng.integers(1, schema.n_bins(f) + 1)) for f in schema.features}
        out[noun] = NounProfile(noun=noun, bins=bins)
    return out


def write_separable_dataset(
    out_dir: str | Path,
    seed: int = 0,
    n_triples: int = 20,
    dim: int = 8,
    margin: float = 1.0,
) -> dict[str, Path]:
    """Toy set whose label is the sign of one embedding coordinate sum.

    Word vectors put +/-1.5 in their first coordinate and small noise in the
    rest; a triple is positive iff its three first coordinates sum above
    zero, with at least `margin` of slack. Linear models reach accuracy 1.0.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = rng_for(seed, "separable")
    n_verbs, n_nouns = 4, 8
    verbs = [f"verb{i}" for i in range(n_verbs)]
    nouns = [f"noun{i}" for i in range(n_nouns)]

    vectors: dict[str, np.ndarray] = {}
    for w in verbs + nouns:
        vec = rng.normal(0.0, 0.1, size=dim)
        vec[0] = rng.choice([-1.5, 1.5])
        vectors[w] = vec

    seen: set[tuple[str, str, str]] = set()
    triples: list[LabeledTriple] = []
    while len(triples) < n_triples:
        s, o = rng.choice(nouns, size=2, replace=False)
        v = rng.choice(verbs)
        t = (str(s), str(v), str(o))
        if t in seen:
            continue
        total = vectors[t[0]][0] + vectors[t[1]][0] + vectors[t[2]][0]
        if abs(total) < margin:
            continue
        seen.add(t)
        triples.append(LabeledTriple(triple=t, label=1 if total > 0 else 0))

    schema = FeatureSchema.default()
    profiles = _random_profiles(nouns, schema, rng)

    paths = {
        "vocab": out_dir / "vocab.tsv",
        "embeddings": out_dir / "embeddings.txt",
        "triples": out_dir / "triples.tsv",
        "bins": out_dir / "bins.tsv",
    }
    _write_vocab(paths["vocab"], verbs, nouns)
    _write_embeddings(paths["embeddings"], vectors)
    save_triples(paths["triples"], triples)
    save_bins(paths["bins"], profiles, schema)
    return paths


def write_world_dataset(
    out_dir: str | Path,
    seed: int = 0,
    n_verbs: int = 12,
    n_nouns: int = 60,
    n_triples: int = 600,
    dim: int = 16,
    attribute_noise: float = 0.4,
) -> dict[str, Path]:
    """Worldlet where plausibility is a size-relation rule.

    Each noun gets latent attribute positions (turned into landmark bins);
    each verb demands either a bigger or a smaller subject. Noun vectors leak
    the attributes through noise, verb vectors encode the rule direction
    cleanly, so embedding-only models are capped by the attribute noise while
    gold-attribute models are nearly unconstrained. Also writes a 5-vote file
    consistent with the labels.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = rng_for(seed, "world")
    schema = FeatureSchema.default()
    if dim < len(schema.features) + 4:
        raise ValidationError("world dataset needs dim >= 10")
    features = schema.features
    verbs = [f"verb{i}" for i in range(n_verbs)]
    nouns = [f"noun{i}" for i in range(n_nouns)]

    latent = {noun: rng.uniform(0.0, 1.0, size=len(features)) for noun in nouns}
    profiles: dict[str, NounProfile] = {}
    for noun in nouns:
        bins = {}
        for j, f in enumerate(features):
            b = schema.n_bins(f)
            bins[f] = int(min(b, 1 + int(latent[noun][j] * b)))
        profiles[noun] = NounProfile(noun=noun, bins=bins)

    # verb rule: 0 wants a bigger subject, 1 a smaller one; the skewed mix
    # leaves some linear signal for attribute-blind models
    rules = {v: (1 if i % 3 == 0 else 0) for i, v in enumerate(verbs)}

    def label_of(s: str, v: str, o: str) -> int:
        diff = profiles[s].bins["size"] - profiles[o].bins["size"]
        return 1 if (diff > 0 if rules[v] == 0 else diff < 0) else 0

    # noun vectors leak attributes through noise; verb vectors carry the
    # rule direction as a clean one-hot pair after the attribute slots
    n_feat = len(features)
    vectors: dict[str, np.ndarray] = {}
    for noun in nouns:
        vec = rng.normal(0.0, 0.3, size=dim)
        noisy = latent[noun] + rng.normal(0.0, attribute_noise, size=n_feat)
        vec[:n_feat] = noisy
        vectors[noun] = vec
    for v in verbs:
        vec = rng.normal(0.0, 0.3, size=dim)
        vec[n_feat : n_feat + 2] = 0.0
        vec[n_feat + rules[v]] = 1.0
        vectors[v] = vec

    seen: set[tuple[str, str, str]] = set()
    triples: list[LabeledTriple] = []
    attempts = 0
    target_pos = n_triples // 2
    n_pos = n_neg = 0
    while len(triples) < n_triples and attempts < 200 * n_triples:
        attempts += 1
        s, o = rng.choice(nouns, size=2, replace=False)
        v = str(rng.choice(verbs))
        t = (str(s), v, str(o))
        if t in seen:
            continue
        y = label_of(*t)
        if y == 1 and n_pos >= target_pos:
            continue
        if y == 0 and n_neg >= n_triples - target_pos:
            continue
        seen.add(t)
        n_pos += y
        n_neg += 1 - y
        triples.append(LabeledTriple(triple=t, label=y))
    if len(triples) < n_triples:
        raise ValidationError("could not generate enough balanced triples")
    # the quota fill skews late entries toward one class; randomize file order
    order = rng.permutation(len(triples))
    triples = [triples[i] for i in order]

    paths = {
        "vocab": out_dir / "vocab.tsv",
        "embeddings": out_dir / "embeddings.txt",
        "triples": out_dir / "triples.tsv",
        "bins": out_dir / "bins.tsv",
        "votes": out_dir / "votes.tsv",
    }
    _write_vocab(paths["vocab"], verbs, nouns)
    _write_embeddings(paths["embeddings"], vectors)
    save_triples(paths["triples"], triples)
    save_bins(paths["bins"], profiles, schema)

    with paths["votes"].open("w", encoding="utf-8", newline="\n") as fh:
        for t in triples:
            agreement = int(rng.choice([3, 4, 5], p=[0.05, 0.05, 0.90]))
            votes = [t.label] * agreement + [1 - t.label] * (5 - agreement)
            order = rng.permutation(5)
            votes = [votes[i] for i in order]
            fh.write(f"{t.subject}\t{t.verb}\t{t.object}\t"
                     + "\t".join(str(x) for x in votes) + "\n")
    return paths
