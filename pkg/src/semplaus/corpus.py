"""Dataset ingestion and bookkeeping.

Covers the vocabulary file, raw annotator votes, labeled s-v-o triples,
candidate-triple generation, cross-validation fold plans, and summary
statistics. All file formats are UTF-8, LF, tab-separated, headerless.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

Triple = tuple[str, str, str]

# Admission threshold for the concreteness column (0-5 scale).
CONCRETENESS_MIN = 4.95

_VERB_TAGS = {"v", "verb"}
_NOUN_TAGS = {"n", "noun"}


@dataclass(frozen=True)
class Vocabulary:
    """Fixed word lists the dataset is built from.

    verbs/nouns preserve file order and are disjoint; concreteness maps every
    admitted word to its rating when the source file carried one.
    """

    verbs: tuple[str, ...]
    nouns: tuple[str, ...]
    concreteness: dict[str, float] | None = None

    def __post_init__(self):
        if len(set(self.verbs)) != len(self.verbs):
            raise ValidationError("duplicate verbs in vocabulary")
        if len(set(self.nouns)) != len(self.nouns):
            raise ValidationError("duplicate nouns in vocabulary")
        overlap = set(self.verbs) & set(self.nouns)
        if overlap:
            raise ValidationError(f"verbs and nouns overlap: {sorted(overlap)[:5]}")
        if self.concreteness is not None:
            low = {w: c for w, c in self.concreteness.items() if c < CONCRETENESS_MIN}
            if low:
                raise ValidationError(
                    f"admitted words below concreteness {CONCRETENESS_MIN}: {sorted(low)[:5]}"
                )

    @property
    def words(self) -> tuple[str, ...]:
        return self.verbs + self.nouns

    def is_noun(self, w: str) -> bool:
        return w in set(self.nouns)

    def is_verb(self, w: str) -> bool:
        return w in set(self.verbs)


@dataclass(frozen=True)
class AnnotationRecord:
    """One triple with its raw binary votes (1 = plausible)."""

    triple: Triple
    votes: tuple[int, ...]


@dataclass(frozen=True)
class LabeledTriple:
    """An s-v-o triple with its aggregated binary label.

    agreement is the majority vote count (3..5) when the raw votes are known,
    or None for triples ingested from an already-filtered file.
    """

    triple: Triple
    label: int
    agreement: int | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label!r}")
        if self.agreement is not None and not 3 <= self.agreement <= 5:
            raise ValidationError(
                f"agreement must lie in [3, 5], got {self.agreement} for {self.triple}"
            )

    @property
    def subject(self) -> str:
        return self.triple[0]

    @property
    def verb(self) -> str:
        return self.triple[1]

    @property
    def object(self) -> str:
        return self.triple[2]


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Read a `word TAB pos [TAB concreteness]` file into a Vocabulary.

    Rows whose concreteness falls below CONCRETENESS_MIN are dropped. The
    concreteness column may be absent (two-column rows), in which case no
    filtering applies.
    """
    path = Path(path)
    verbs: list[str] = []
    nouns: list[str] = []
    conc: dict[str, float] = {}
    saw_concreteness = False
    n_dropped = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(
                    f"expected `word TAB pos [TAB concreteness]`, got {len(parts)} columns",
                    path=path,
                    line=lineno,
                )
            word = parts[0].strip().lower()
            pos = parts[1].strip().lower()
            if not word:
                raise ParseError("empty word", path=path, line=lineno)
            value = None
            if len(parts) == 3:
                saw_concreteness = True
                try:
                    value = float(parts[2])
                except ValueError:
                    raise ParseError(
                        f"unreadable concreteness {parts[2]!r}", path=path, line=lineno
                    ) from None
                if not 0.0 <= value <= 5.0:
                    raise ParseError(
                        f"concreteness {value} outside [0, 5]", path=path, line=lineno
                    )
                if value < CONCRETENESS_MIN:
                    n_dropped += 1
                    continue
            if pos in _VERB_TAGS:
                verbs.append(word)
            elif pos in _NOUN_TAGS:
                nouns.append(word)
            else:
                raise ParseError(f"unknown pos tag {parts[1]!r}", path=path, line=lineno)
            if value is not None:
                conc[word] = value
    if not verbs and not nouns:
        raise ParseError("no entries", path=path)
    if n_dropped:
        logger.info("dropped %d rows below concreteness %.2f", n_dropped, CONCRETENESS_MIN)
    return Vocabulary(
        verbs=tuple(verbs),
        nouns=tuple(nouns),
        concreteness=conc if saw_concreteness else None,
    )


def aggregate_votes(
    records: Iterable[AnnotationRecord],
    n_votes: int = 5,
    min_majority: int = 3,
) -> list[LabeledTriple]:
    """Collapse raw votes into majority labels.

    Keeps only records whose majority count reaches min_majority (always true
    for 5 binary votes; the filter matters for generalized vote counts, where
    ties are also dropped). Raises if any record does not carry exactly
    n_votes votes.
    """
    out: list[LabeledTriple] = []
    for rec in records:
        if len(rec.votes) != n_votes:
            raise ValidationError(
                f"triple {rec.triple} has {len(rec.votes)} votes, expected {n_votes}"
            )
        if any(v not in (0, 1) for v in rec.votes):
            raise ValidationError(f"triple {rec.triple} has non-binary votes {rec.votes}")
        ones = sum(rec.votes)
        zeros = n_votes - ones
        majority = max(ones, zeros)
        if majority < min_majority or ones == zeros:
            continue
        label = 1 if ones > zeros else 0
        out.append(LabeledTriple(triple=rec.triple, label=label, agreement=majority))
    return out


def generate_candidate_triples(
    sv_pairs: Sequence[tuple[str, str]],
    vo_pairs: Sequence[tuple[str, str]],
    seed: int,
    n: int,
) -> list[Triple]:
    """Join s-v and v-o pairs on the shared verb and sample n distinct triples.

    Sampling is uniform without replacement over the distinct joins and
    deterministic for a given seed.
    """
    if not sv_pairs or not vo_pairs:
        raise ValidationError("both pair lists must be nonempty")
    by_verb: dict[str, list[str]] = {}
    for v, o in vo_pairs:
        by_verb.setdefault(v, []).append(o)
    joins = {
        (s, v, o)
        for s, v in sv_pairs
        if v in by_verb
        for o in by_verb[v]
    }
    if not joins:
        raise ValidationError("no joinable verb between the s-v and v-o pair lists")
    if n > len(joins):
        raise ValidationError(
            f"requested {n} triples but only {len(joins)} distinct joins exist"
        )
    ordered = sorted(joins)
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(ordered), size=n, replace=False)
    return [ordered[i] for i in picked]


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic assignment of item indices to K folds."""

    seed: int
    k: int
    assignments: np.ndarray  # shape (n,), fold id per item

    @property
    def n_items(self) -> int:
        return int(self.assignments.shape[0])

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def fold_sizes(self) -> list[int]:
        return [int((self.assignments == f).sum()) for f in range(self.k)]


def make_folds(n_items: int, k: int, seed: int) -> FoldPlan:
    """Shuffle [0, n) with the given seed and deal it into K near-equal folds."""
    if k < 2:
        raise ValidationError(f"k must be at least 2, got {k}")
    if k > n_items:
        raise ValidationError(f"k={k} exceeds the number of items {n_items}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_items)
    assignments = np.empty(n_items, dtype=np.int64)
    base = n_items // k
    extra = n_items % k
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        assignments[perm[start : start + size]] = f
        start += size
    return FoldPlan(seed=seed, k=k, assignments=assignments)


@dataclass(frozen=True)
class DatasetStats:
    count: int
    n_positive: int
    balance: float
    agreement_hist: dict[int, int]
    n_unlabeled_agreement: int
    distinct_subjects: int
    distinct_verbs: int
    distinct_objects: int
    noun_coverage: float | None = None
    verb_coverage: float | None = None

    def to_kv(self) -> str:
        """Machine-readable key=value form, one entry per line, sorted."""
        items = {
            "count": self.count,
            "n_positive": self.n_positive,
            "n_negative": self.count - self.n_positive,
            "balance": f"{self.balance:.6f}",
            "distinct_subjects": self.distinct_subjects,
            "distinct_verbs": self.distinct_verbs,
            "distinct_objects": self.distinct_objects,
            "agreement_unknown": self.n_unlabeled_agreement,
        }
        for a in sorted(self.agreement_hist):
            items[f"agreement_{a}"] = self.agreement_hist[a]
        if self.noun_coverage is not None:
            items["noun_coverage"] = f"{self.noun_coverage:.6f}"
        if self.verb_coverage is not None:
            items["verb_coverage"] = f"{self.verb_coverage:.6f}"
        return "\n".join(f"{k}={items[k]}" for k in sorted(items)) + "\n"

    def to_text(self) -> str:
        lines = [
            f"triples:            {self.count}",
            f"positive / negative: {self.n_positive} / {self.count - self.n_positive}"
            f"  (balance {self.balance:.3f})",
            f"distinct s / v / o:  {self.distinct_subjects} / {self.distinct_verbs}"
            f" / {self.distinct_objects}",
        ]
        rated = sum(self.agreement_hist.values())
        if rated:
            parts = []
            for threshold in (3, 4, 5):
                at_least = sum(c for a, c in self.agreement_hist.items() if a >= threshold)
                parts.append(f">={threshold}: {100.0 * at_least / rated:.0f}%")
            lines.append("agreement:           " + ", ".join(parts))
        if self.n_unlabeled_agreement:
            lines.append(f"without vote record: {self.n_unlabeled_agreement}")
        if self.noun_coverage is not None:
            lines.append(f"noun coverage:       {self.noun_coverage:.3f}")
        if self.verb_coverage is not None:
            lines.append(f"verb coverage:       {self.verb_coverage:.3f}")
        return "\n".join(lines) + "\n"


def dataset_stats(
    dataset: Sequence[LabeledTriple], vocab: Vocabulary | None = None
) -> DatasetStats:
    """Counts, label balance, agreement histogram, and vocabulary coverage."""
    if not dataset:
        raise ValidationError("empty dataset")
    n_pos = sum(t.label for t in dataset)
    hist = Counter(t.agreement for t in dataset if t.agreement is not None)
    subjects = {t.subject for t in dataset}
    verbs = {t.verb for t in dataset}
    objects = {t.object for t in dataset}
    noun_cov = verb_cov = None
    if vocab is not None:
        used_nouns = subjects | objects
        noun_cov = len(used_nouns & set(vocab.nouns)) / len(vocab.nouns) if vocab.nouns else 0.0
        verb_cov = len(verbs & set(vocab.verbs)) / len(vocab.verbs) if vocab.verbs else 0.0
    return DatasetStats(
        count=len(dataset),
        n_positive=n_pos,
        balance=n_pos / len(dataset),
        agreement_hist=dict(hist),
        n_unlabeled_agreement=sum(1 for t in dataset if t.agreement is None),
        distinct_subjects=len(subjects),
        distinct_verbs=len(verbs),
        distinct_objects=len(objects),
        noun_coverage=noun_cov,
        verb_coverage=verb_cov,
    )


# ---------------------------------------------------------------------------
# File I/O for the canonical tab-separated formats.
# ---------------------------------------------------------------------------

def load_triples(path: str | Path) -> list[LabeledTriple]:
    """Read the canonical `s TAB v TAB o TAB label` file."""
    path = Path(path)
    out: list[LabeledTriple] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(
                    f"expected 4 columns `s v o label`, got {len(parts)}",
                    path=path,
                    line=lineno,
                )
            s, v, o, lab = (p.strip() for p in parts)
            if lab not in ("0", "1"):
                raise ParseError(f"label must be 0 or 1, got {lab!r}", path=path, line=lineno)
            out.append(LabeledTriple(triple=(s, v, o), label=int(lab)))
    if not out:
        raise ParseError("no entries", path=path)
    return out


def save_triples(path: str | Path, triples: Iterable[LabeledTriple]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for t in triples:
            fh.write(f"{t.subject}\t{t.verb}\t{t.object}\t{t.label}\n")


def load_votes(path: str | Path, n_votes: int = 5) -> list[AnnotationRecord]:
    """Read a raw-vote file: `s TAB v TAB o TAB vote1 .. voteN`."""
    path = Path(path)
    out: list[AnnotationRecord] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 + n_votes:
                raise ParseError(
                    f"expected {3 + n_votes} columns, got {len(parts)}",
                    path=path,
                    line=lineno,
                )
            try:
                votes = tuple(int(p) for p in parts[3:])
            except ValueError:
                raise ParseError("unreadable vote", path=path, line=lineno) from None
            if any(v not in (0, 1) for v in votes):
                raise ParseError(f"votes must be 0/1, got {votes}", path=path, line=lineno)
            out.append(
                AnnotationRecord(triple=(parts[0].strip(), parts[1].strip(), parts[2].strip()),
                                 votes=votes)
            )
    if not out:
        raise ParseError("no entries", path=path)
    return out


def _split_svo_line(line: str) -> Triple | None:
    """Accept `s TAB v TAB o`, `s v o`, or `s-v-o` rows from upstream files."""
    line = line.strip()
    if not line:
        return None
    for sep in ("\t", None, "-"):
        parts = line.split(sep) if sep else line.split()
        parts = [p.strip() for p in parts if p.strip()]
        if len(parts) == 3:
            return (parts[0], parts[1], parts[2])
    return None


def ingest_labeled_files(
    pos_path: str | Path | None,
    neg_path: str | Path | None,
    vocab: Vocabulary | None = None,
) -> list[LabeledTriple]:
    """Adapter for upstream distributions that ship plausible and implausible
    triples in separate one-triple-per-line files.

    Lines may be tab-, space-, or hyphen-separated. When a vocabulary is
    given, every word is checked against it.
    """
    out: list[LabeledTriple] = []
    for path, label in ((pos_path, 1), (neg_path, 0)):
        if path is None:
            continue
        path = Path(path)
        with path.open(encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                triple = _split_svo_line(raw)
                if triple is None:
                    if raw.strip():
                        raise ParseError(
                            f"cannot split {raw.strip()!r} into s-v-o", path=path, line=lineno
                        )
                    continue
                s, v, o = (w.lower() for w in triple)
                if vocab is not None:
                    for word, kind in ((s, "noun"), (v, "verb"), (o, "noun")):
                        known = vocab.is_noun(word) if kind == "noun" else vocab.is_verb(word)
                        if not known:
                            raise ValidationError(
                                f"{path}:{lineno}: {word!r} is not a vocabulary {kind}"
                            )
                out.append(LabeledTriple(triple=(s, v, o), label=label))
    if not out:
        raise ValidationError("no triples ingested")
    return out
