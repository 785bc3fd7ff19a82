"""World-knowledge attribute features.

Six physical attributes are annotated per noun by picking the closest
landmark on an ordered scale (bins are 1-based). A subject-object pair is
encoded per attribute either coarsely as the sign of the bin difference
(three_level, values -1/0/1) or as the signed bin difference itself
(bin_diff). Both encodings can be emitted as concatenated one-hot blocks or
as per-attribute indices for embedding lookup.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .corpus import Vocabulary
from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

SCHEMES = ("three_level", "bin_diff")

# Landmark words per attribute, ascending along the attribute's scale.
DEFAULT_LANDMARKS: dict[str, tuple[str, ...]] = {
    "sentience": ("rock", "tree", "ant", "cat", "chimp", "man"),
    "mass-count": ("milk", "sand", "pebbles", "car"),
    "phase": ("smoke", "milk", "wood"),
    "size": ("watch", "book", "cat", "person", "jeep", "stadium"),
    "weight": ("watch", "book", "dumbbell", "man", "jeep", "stadium"),
    "rigidity": ("water", "skin", "leather", "wood", "metal"),
}

FEATURE_ORDER = ("sentience", "mass-count", "phase", "size", "weight", "rigidity")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered attribute list with each attribute's landmark scale."""

    features: tuple[str, ...]
    landmarks: dict[str, tuple[str, ...]]

    def __post_init__(self):
        for f in self.features:
            if f not in self.landmarks:
                raise ValidationError(f"feature {f!r} has no landmark list")
            if len(self.landmarks[f]) < 2:
                raise ValidationError(f"feature {f!r} needs at least 2 landmarks")

    @classmethod
    def default(cls) -> "FeatureSchema":
        return cls(features=FEATURE_ORDER, landmarks=dict(DEFAULT_LANDMARKS))

    @classmethod
    def from_file(cls, path: str | Path) -> "FeatureSchema":
        """Read `feature TAB landmark1 landmark2 ...` rows, one per feature."""
        path = Path(path)
        features: list[str] = []
        landmarks: dict[str, tuple[str, ...]] = {}
        with path.open(encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError(
                        "expected `feature TAB landmarks`", path=path, line=lineno
                    )
                name = parts[0].strip()
                words = tuple(w for w in parts[1].split() if w)
                if name in landmarks:
                    raise ParseError(f"duplicate feature {name!r}", path=path, line=lineno)
                features.append(name)
                landmarks[name] = words
        if not features:
            raise ParseError("no entries", path=path)
        return cls(features=tuple(features), landmarks=landmarks)

    def n_bins(self, feature: str) -> int:
        try:
            return len(self.landmarks[feature])
        except KeyError:
            raise ValidationError(f"unknown feature {feature!r}") from None


@dataclass(frozen=True)
class NounProfile:
    """One noun's bin index (1-based) for every attribute in the schema."""

    noun: str
    bins: dict[str, int]


@dataclass(frozen=True)
class PairFeatures:
    """The six relative-attribute values of an ordered subject-object pair."""

    scheme: str
    values: dict[str, int]

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


def load_bins(
    path: str | Path,
    schema: FeatureSchema,
    vocab: Vocabulary | None = None,
) -> dict[str, NounProfile]:
    """Read `noun TAB feature TAB bin` annotation rows into complete profiles.

    Nouns lacking a bin for any schema feature are dropped with a warning.
    Out-of-range bins, unknown features, conflicting duplicates, and (when a
    vocabulary is given) non-vocabulary nouns are errors.
    """
    path = Path(path)
    known_nouns = set(vocab.nouns) if vocab is not None else None
    partial: dict[str, dict[str, int]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(
                    f"expected `noun TAB feature TAB bin`, got {len(parts)} columns",
                    path=path,
                    line=lineno,
                )
            noun = parts[0].strip().lower()
            feature = parts[1].strip()
            if feature not in schema.landmarks:
                raise ParseError(f"unknown feature {feature!r}", path=path, line=lineno)
            try:
                b = int(parts[2])
            except ValueError:
                raise ParseError(f"unreadable bin {parts[2]!r}", path=path, line=lineno) from None
            n_bins = schema.n_bins(feature)
            if not 1 <= b <= n_bins:
                raise ParseError(
                    f"bin {b} out of range [1, {n_bins}] for feature {feature!r}",
                    path=path,
                    line=lineno,
                )
            if known_nouns is not None and noun not in known_nouns:
                raise ParseError(f"noun {noun!r} not in vocabulary", path=path, line=lineno)
            bins = partial.setdefault(noun, {})
            if feature in bins and bins[feature] != b:
                raise ParseError(
                    f"conflicting bins for {noun!r}/{feature!r}", path=path, line=lineno
                )
            bins[feature] = b
    profiles: dict[str, NounProfile] = {}
    n_partial = 0
    for noun, bins in partial.items():
        if all(f in bins for f in schema.features):
            profiles[noun] = NounProfile(noun=noun, bins=dict(bins))
        else:
            n_partial += 1
    if n_partial:
        logger.warning("dropped %d partially annotated nouns", n_partial)
    if not profiles:
        raise ParseError("no complete profiles", path=path)
    return profiles


def save_bins(path: str | Path, profiles: Mapping[str, NounProfile],
              schema: FeatureSchema) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for noun in sorted(profiles):
            for f in schema.features:
                fh.write(f"{noun}\t{f}\t{profiles[noun].bins[f]}\n")


def bin_diff(s: NounProfile, o: NounProfile, feature: str) -> int:
    """Signed difference of the two nouns' bin indices for one attribute."""
    return s.bins[feature] - o.bins[feature]


def three_level(s: NounProfile, o: NounProfile, feature: str) -> int:
    """Coarse -1/0/+1 comparison: the sign of the bin difference."""
    return int(np.sign(bin_diff(s, o, feature)))


def pair_features(
    s: NounProfile, o: NounProfile, scheme: str, schema: FeatureSchema
) -> PairFeatures:
    """All-attribute relative values for an ordered (subject, object) pair."""
    if scheme == "three_level":
        values = {f: three_level(s, o, f) for f in schema.features}
    elif scheme == "bin_diff":
        values = {f: bin_diff(s, o, f) for f in schema.features}
    else:
        raise ValidationError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return PairFeatures(scheme=scheme, values=values)


def block_width(schema: FeatureSchema, feature: str, scheme: str) -> int:
    """One-hot block width for one attribute: 3 (three_level) or 2B-1 (bin_diff)."""
    if scheme == "three_level":
        return 3
    if scheme == "bin_diff":
        return 2 * schema.n_bins(feature) - 1
    raise ValidationError(f"scheme must be one of {SCHEMES}, got {scheme!r}")


def value_offset(schema: FeatureSchema, feature: str, scheme: str) -> int:
    """Shift that maps a legal value onto [0, block_width)."""
    return 1 if scheme == "three_level" else schema.n_bins(feature) - 1


def onehot_length(schema: FeatureSchema, scheme: str) -> int:
    return sum(block_width(schema, f, scheme) for f in schema.features)


def encode_indices(p: PairFeatures, schema: FeatureSchema) -> list[int]:
    """Per-attribute index of each value within its block, in schema order."""
    out = []
    for f in schema.features:
        idx = p.values[f] + value_offset(schema, f, p.scheme)
        width = block_width(schema, f, p.scheme)
        if not 0 <= idx < width:
            raise ValidationError(
                f"value {p.values[f]} out of range for feature {f!r} under {p.scheme}"
            )
        out.append(idx)
    return out


def index_to_value(schema: FeatureSchema, feature: str, scheme: str, index: int) -> int:
    """Inverse of the encode_indices offset map."""
    return index - value_offset(schema, feature, scheme)


def encode_raw_onehot(p: PairFeatures, schema: FeatureSchema) -> np.ndarray:
    """Concatenated per-attribute one-hot blocks in schema order.

    Lengths: 18 for three_level (6 blocks of 3), 54 for bin_diff with the
    default landmark counts (blocks of 2B-1).
    """
    indices = encode_indices(p, schema)
    vec = np.zeros(onehot_length(schema, p.scheme), dtype=np.float64)
    start = 0
    for f, idx in zip(schema.features, indices):
        vec[start + idx] = 1.0
        start += block_width(schema, f, p.scheme)
    return vec


def profile_matrix(
    profiles: Mapping[str, NounProfile], schema: FeatureSchema, nouns: Iterable[str]
) -> np.ndarray:
    """Bin indices as an (n_nouns, n_features) int array in schema order."""
    nouns = list(nouns)
    out = np.empty((len(nouns), len(schema.features)), dtype=np.int64)
    for i, noun in enumerate(nouns):
        prof = profiles.get(noun)
        if prof is None:
            raise ValidationError(f"no attribute profile for noun {noun!r}")
        for j, f in enumerate(schema.features):
            out[i, j] = prof.bins[f]
    return out
