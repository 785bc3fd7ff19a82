"""Pretrained word-vector loading and triple lookups.

Vectors come from the standard whitespace-separated text format
(`word v1 ... vd`, one word per line). Tables are read-only after load and
safe to share across threads.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Triple, Vocabulary
from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

OOV_POLICIES = ("zero", "error")


class EmbeddingTable:
    """Word -> float64 vector map with a fixed dimension and OOV policy."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray], oov_policy: str = "zero",
                 coverage: float | None = None):
        if oov_policy not in OOV_POLICIES:
            raise ValidationError(f"oov_policy must be one of {OOV_POLICIES}")
        self.dim = int(dim)
        self.oov_policy = oov_policy
        self.coverage = coverage
        self._vectors = vectors
        self._warned: set[str] = set()
        for w, vec in vectors.items():
            if vec.shape != (self.dim,):
                raise ValidationError(f"vector for {w!r} has shape {vec.shape}, want ({dim},)")
            if not np.all(np.isfinite(vec)):
                raise ValidationError(f"non-finite entries in vector for {w!r}")

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, word: str) -> bool:
        return word in self._vectors

    def words(self):
        return self._vectors.keys()

    def lookup(self, word: str) -> np.ndarray | None:
        """Resolve a word to its vector, or None if unknown.

        Multiword entries fall back to the hyphen-joined spelling and then to
        the mean of the per-token vectors.
        """
        vec = self._vectors.get(word)
        if vec is not None:
            return vec
        if " " in word:
            hyphenated = word.replace(" ", "-")
            vec = self._vectors.get(hyphenated)
            if vec is not None:
                return vec
            token_vecs = [self._vectors[t] for t in word.split() if t in self._vectors]
            if token_vecs:
                return np.mean(token_vecs, axis=0)
        return None

    def vector(self, word: str) -> np.ndarray:
        """Resolve a word under the table's OOV policy."""
        vec = self.lookup(word)
        if vec is not None:
            return vec
        if self.oov_policy == "error":
            raise ValidationError(f"no vector for word {word!r}")
        if word not in self._warned:
            logger.warning("no vector for %r; substituting zeros", word)
            self._warned.add(word)
        return np.zeros(self.dim, dtype=np.float64)


def load_embeddings(
    path: str | Path,
    vocab: Vocabulary | None = None,
    oov_policy: str = "zero",
) -> EmbeddingTable:
    """Load vectors from text, keeping only vocabulary words when given.

    The dimension is taken from the first line; any later line with a
    different width, or an unreadable float, raises with its line number.
    """
    path = Path(path)
    keep: set[str] | None = None
    if vocab is not None:
        keep = set(vocab.words)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ParseError("expected `word v1 ... vd`", path=path, line=lineno)
            word = parts[0]
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise ParseError(
                    f"dimension {len(parts) - 1} differs from {dim}", path=path, line=lineno
                )
            if keep is not None and word not in keep:
                continue
            try:
                vec = np.array([float(p) for p in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError("unreadable float", path=path, line=lineno) from None
            if not np.all(np.isfinite(vec)):
                raise ParseError("non-finite vector entry", path=path, line=lineno)
            vectors[word] = vec
    if dim is None:
        raise ParseError("no entries", path=path)
    coverage = None
    if keep is not None:
        coverage = len(vectors) / len(keep) if keep else 0.0
        logger.info("embedding coverage: %d/%d words (%.3f)", len(vectors), len(keep), coverage)
    return EmbeddingTable(dim=dim, vectors=vectors, oov_policy=oov_policy, coverage=coverage)


def triple_vector(t: Triple, table: EmbeddingTable) -> np.ndarray:
    """Concatenate the subject, verb, and object vectors into one 3*dim row."""
    s, v, o = t
    return np.concatenate([table.vector(s), table.vector(v), table.vector(o)])


def stack_triples(triples: Sequence[Triple], table: EmbeddingTable) -> np.ndarray:
    """Design matrix of triple_vector rows, shape (n, 3*dim)."""
    out = np.empty((len(triples), 3 * table.dim), dtype=np.float64)
    for i, t in enumerate(triples):
        out[i] = triple_vector(t, table)
    return out
