"""Experiment orchestration.

Runs the repeated cross-validation protocol, the pair-label propagation
benchmark, and the repeated-run error analysis, and writes deterministic
report artifacts (text + TSV, fingerprinted by the configuration). Every
random choice derives from the recorded base seed, so re-running a command
with an identical config reproduces its reports byte for byte.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import models as M
from . import propagation as P
from .corpus import LabeledTriple, Vocabulary, load_triples, load_vocabulary, make_folds
from .embeddings import EmbeddingTable, load_embeddings
from .errors import DivergenceError, ParseError, ValidationError
from .seeding import derive_seed
from .wk_features import FeatureSchema, load_bins

logger = logging.getLogger(__name__)

EXPERIMENT_MODELS = ("random", "lr", "nn", "wk", "nn+wk-gold", "nn+wk-prop")

SCHEME_ALIASES = {"3l": "three_level", "bin": "bin_diff",
                  "three_level": "three_level", "bin_diff": "bin_diff"}
MODE_ALIASES = {"raw": "raw_onehot", "embedding": "feature_embedding",
                "raw_onehot": "raw_onehot", "feature_embedding": "feature_embedding"}


def output_root(explicit: str | None = None) -> Path:
    """Output directory: explicit flag, then SEMPLAUS_OUT, then ./out."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("SEMPLAUS_OUT", "out"))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; the fingerprint hashes the canonical form."""

    model: str = "nn"
    scheme: str = "bin_diff"
    input_mode: str = "feature_embedding"
    prop_method: str = "ordinal"
    prop_fraction: float = 0.20
    prop_pairs: int = 10_000
    folds: int = 10
    runs: int = 20
    seed: int = 7
    triples: str = ""
    vocab: str = ""
    embeddings: str = ""
    bins: str = ""
    schema_file: str = ""
    oov: str = "zero"
    hidden_nn: int = 100
    hidden_wk: int = 32
    hidden_combiner: int = 32
    feat_dim: int = 16
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    max_epochs: int = 200
    patience: int = 10
    val_fraction: float = 0.1
    fine_tune_embeddings: bool = False

    def validate(self) -> None:
        if self.model not in EXPERIMENT_MODELS:
            raise ValidationError(
                f"model must be one of {EXPERIMENT_MODELS}, got {self.model!r}"
            )
        if self.folds < 2:
            raise ValidationError(f"folds must be at least 2, got {self.folds}")
        if self.runs < 1:
            raise ValidationError(f"runs must be at least 1, got {self.runs}")
        if self.scheme not in SCHEME_ALIASES.values():
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.input_mode not in MODE_ALIASES.values():
            raise ValidationError(f"unknown input mode {self.input_mode!r}")
        if self.prop_method not in P.PROP_METHODS:
            raise ValidationError(f"unknown propagation method {self.prop_method!r}")
        if not self.triples and self.model != "random":
            pass  # triples are validated at load time; random also needs them for folds
        for path_field in ("triples", "vocab", "embeddings", "bins", "schema_file"):
            value = getattr(self, path_field)
            if value and not Path(value).exists():
                raise ValidationError(f"{path_field} path does not exist: {value}")

    def to_kv(self) -> str:
        lines = []
        for f in sorted(fld.name for fld in fields(self)):
            lines.append(f"{f}={getattr(self, f)}")
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_kv().encode("utf-8")).hexdigest()[:12]

    def model_config(self) -> M.ModelConfig:
        return M.ModelConfig(
            hidden_nn=self.hidden_nn,
            hidden_wk=self.hidden_wk,
            hidden_combiner=self.hidden_combiner,
            feat_dim=self.feat_dim,
            scheme=self.scheme,
            input_mode=self.input_mode,
            fine_tune_embeddings=self.fine_tune_embeddings,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            val_fraction=self.val_fraction,
        )


def config_from_file(path: str | Path) -> dict[str, str]:
    """Flat key=value config file; `#` starts a comment (full-line or inline).

    Empty values are treated as unset.
    """
    out: dict[str, str] = {}
    known = {fld.name for fld in fields(ExperimentConfig)}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected key=value", path=path, line=lineno)
        key = key.strip()
        if key not in known:
            raise ParseError(f"unknown config key {key!r}", path=path, line=lineno)
        value = value.strip()
        if value:
            out[key] = value
    return out


def build_config(file_values: dict[str, str] | None = None, **overrides) -> ExperimentConfig:
    """Defaults -> config file -> explicit overrides; types coerced per field."""
    values: dict[str, object] = {}
    types = {fld.name: fld.type for fld in fields(ExperimentConfig)}
    defaults = ExperimentConfig()

    def coerce(name: str, value: object) -> object:
        if value is None:
            return None
        current = getattr(defaults, name)
        if isinstance(current, bool):
            return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
        if name == "scheme":
            key = str(value)
            if key not in SCHEME_ALIASES:
                raise ValidationError(f"unknown scheme {key!r}")
            return SCHEME_ALIASES[key]
        if name == "input_mode":
            key = str(value)
            if key not in MODE_ALIASES:
                raise ValidationError(f"unknown input mode {key!r}")
            return MODE_ALIASES[key]
        return str(value)

    for source in (file_values or {}), overrides:
        for key, value in source.items():
            if key not in types:
                raise ValidationError(f"unknown config key {key!r}")
            coerced = coerce(key, value)
            if coerced is not None:
                values[key] = coerced
    return replace(defaults, **values)


# ---------------------------------------------------------------------------
# Data loading
# ---------------------------------------------------------------------------

@dataclass
class ExperimentData:
    triples: list[LabeledTriple]
    vocab: Vocabulary | None
    emb: EmbeddingTable | None
    profiles: dict | None
    schema: FeatureSchema


def _restricting_vocab(triples: Sequence[LabeledTriple], profiles=None) -> Vocabulary:
    """Smallest word lists that cover the dataset, for embedding restriction."""
    verbs: dict[str, None] = {}
    nouns: dict[str, None] = {}
    for t in triples:
        nouns.setdefault(t.subject)
        verbs.setdefault(t.verb)
        nouns.setdefault(t.object)
    if profiles:
        for noun in profiles:
            nouns.setdefault(noun)
    for v in list(verbs):
        if v in nouns:
            del verbs[v]  # same surface form; noun list already covers it
    return Vocabulary(verbs=tuple(verbs), nouns=tuple(nouns))


def load_experiment_data(config: ExperimentConfig) -> ExperimentData:
    config.validate()
    if not config.triples:
        raise ValidationError("a triples file is required")
    triples = load_triples(config.triples)
    vocab = load_vocabulary(config.vocab) if config.vocab else None
    schema = (FeatureSchema.from_file(config.schema_file)
              if config.schema_file else FeatureSchema.default())

    needs_wk = config.model in ("wk", "nn+wk-gold", "nn+wk-prop")
    profiles = None
    if needs_wk:
        if not config.bins:
            raise ValidationError(f"model {config.model!r} needs a bins file")
        profiles = load_bins(config.bins, schema, vocab)

    needs_emb = config.model in ("lr", "nn", "nn+wk-gold", "nn+wk-prop")
    emb = None
    if needs_emb:
        if not config.embeddings:
            raise ValidationError(f"model {config.model!r} needs word vectors")
        restrict = vocab if vocab is not None else _restricting_vocab(triples, profiles)
        emb = load_embeddings(config.embeddings, restrict, oov_policy=config.oov)
    return ExperimentData(triples=triples, vocab=vocab, emb=emb,
                          profiles=profiles, schema=schema)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    """Everything run_cv measures, before any file formatting."""

    config: ExperimentConfig
    fold_acc: np.ndarray        # (runs, folds), NaN for failed runs
    predictions: np.ndarray     # (runs, n), -1 for failed runs
    fold_ids: np.ndarray        # (runs, n), each run's fold assignment
    gold: np.ndarray            # (n,)
    triples: list[LabeledTriple]
    failed_runs: list[int] = field(default_factory=list)

    @property
    def run_means(self) -> np.ndarray:
        ok = [r for r in range(self.fold_acc.shape[0]) if r not in self.failed_runs]
        return self.fold_acc[ok].mean(axis=1)

    @property
    def mean(self) -> float:
        return float(self.run_means.mean())

    @property
    def std(self) -> float:
        means = self.run_means
        return float(means.std(ddof=1)) if len(means) > 1 else 0.0

    @property
    def misclass_counts(self) -> np.ndarray:
        ok = [r for r in range(self.predictions.shape[0]) if r not in self.failed_runs]
        return (self.predictions[ok] != self.gold[None, :]).sum(axis=0)

    @property
    def n_completed(self) -> int:
        return self.fold_acc.shape[0] - len(self.failed_runs)


def _internal_kind(model: str) -> str:
    return "ensemble" if model.startswith("nn+wk") else model


def run_cv(config: ExperimentConfig, data: ExperimentData | None = None) -> RunReport:
    """K-fold CV repeated over derived-seed runs; fully deterministic."""
    config.validate()
    if data is None:
        data = load_experiment_data(config)
    triples = data.triples
    n = len(triples)
    kind = _internal_kind(config.model)
    mc = config.model_config()
    base = config.seed

    pair_universe = None
    if config.model == "nn+wk-prop":
        max_pairs = len(data.profiles) * (len(data.profiles) - 1) // 2
        pair_universe = P.sample_pairs(
            data.profiles, min(config.prop_pairs, max_pairs),
            derive_seed(base, "pair-universe"), data.emb, data.schema,
        )

    fold_acc = np.full((config.runs, config.folds), np.nan)
    predictions = np.full((config.runs, n), -1, dtype=np.int64)
    fold_ids = np.full((config.runs, n), -1, dtype=np.int64)
    gold = np.array([t.label for t in triples], dtype=np.int64)
    failed: list[int] = []

    for r in range(config.runs):
        run_seed = derive_seed(base, "run", r)
        plan = make_folds(n, config.folds, derive_seed(run_seed, "folds"))
        fold_ids[r] = plan.assignments
        features = None
        if config.model == "nn+wk-gold" or (kind in ("wk", "ensemble")
                                            and config.model != "nn+wk-prop"):
            features = M.GoldPairFeatures(data.profiles, data.schema)
        elif config.model == "nn+wk-prop":
            features = P.propagate_profiles(
                data.profiles, config.prop_method, config.scheme,
                config.prop_fraction, derive_seed(run_seed, "prop"),
                data.emb, data.schema, pair_ds=pair_universe,
            )
            features.prepare([(t.subject, t.object) for t in triples])
        try:
            for f in range(config.folds):
                train_rows = plan.train_indices(f)
                test_rows = plan.test_indices(f)
                train = [triples[i] for i in train_rows]
                test = [triples[i] for i in test_rows]
                model, _ = M.train_classifier(
                    kind, train, mc, derive_seed(run_seed, "fold", f),
                    emb=data.emb, features=features, schema=data.schema,
                )
                if kind == "random":
                    preds = model.predict_labels(len(test), salt=(r, f))
                else:
                    test_inputs = M.featurize(
                        kind, [t.triple for t in test], emb=data.emb,
                        features=features, schema=data.schema, config=mc,
                        word_input=getattr(model, "word_input", None),
                    )
                    preds = M.predict_labels(model, test_inputs)
                fold_acc[r, f] = float(np.mean(preds == gold[test_rows]))
                predictions[r, test_rows] = preds
        except DivergenceError as exc:
            logger.error("run %d failed: %s", r, exc)
            failed.append(r)
            fold_acc[r, :] = np.nan
            predictions[r, :] = -1
    if len(failed) == config.runs:
        raise DivergenceError("every run failed")
    return RunReport(config=config, fold_acc=fold_acc, predictions=predictions,
                     fold_ids=fold_ids, gold=gold, triples=triples,
                     failed_runs=failed)


def write_run_report(report: RunReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report/predictions/misclassification artifacts; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fp = report.config.fingerprint()
    stem = f"cv_{report.config.model.replace('+', '-')}_{fp}"
    paths: dict[str, Path] = {}

    lines = ["run\tfold\taccuracy"]
    for r in range(report.fold_acc.shape[0]):
        if r in report.failed_runs:
            continue
        for f in range(report.fold_acc.shape[1]):
            lines.append(f"{r}\t{f}\t{report.fold_acc[r, f]:.6f}")
    lines.append(f"mean\t\t{report.mean:.6f}")
    lines.append(f"std\t\t{report.std:.6f}")
    paths["report_tsv"] = out_dir / f"{stem}.report.tsv"
    paths["report_tsv"].write_text("\n".join(lines) + "\n", encoding="utf-8")

    pred_lines = ["run\tfold\tindex\tsubject\tverb\tobject\tgold\tpredicted"]
    for r in range(report.predictions.shape[0]):
        if r in report.failed_runs:
            continue
        for i, t in enumerate(report.triples):
            pred_lines.append(
                f"{r}\t{report.fold_ids[r, i]}\t{i}\t{t.subject}\t{t.verb}\t{t.object}"
                f"\t{report.gold[i]}\t{report.predictions[r, i]}"
            )
    paths["predictions_tsv"] = out_dir / f"{stem}.predictions.tsv"
    paths["predictions_tsv"].write_text("\n".join(pred_lines) + "\n", encoding="utf-8")

    counts = report.misclass_counts
    mis_lines = ["index\tsubject\tverb\tobject\tgold\tmisclassified\tfrequency"]
    for i, t in enumerate(report.triples):
        mis_lines.append(
            f"{i}\t{t.subject}\t{t.verb}\t{t.object}\t{report.gold[i]}"
            f"\t{counts[i]}\t{counts[i] / report.n_completed:.6f}"
        )
    paths["misclass_tsv"] = out_dir / f"{stem}.misclass.tsv"
    paths["misclass_tsv"].write_text("\n".join(mis_lines) + "\n", encoding="utf-8")

    text = [
        f"model:        {report.config.model}",
        f"fingerprint:  {fp}",
        f"protocol:     {report.config.folds}-fold CV x {report.config.runs} runs"
        f" (base seed {report.config.seed})",
        f"completed:    {report.n_completed}/{report.config.runs} runs",
        f"accuracy:     {report.mean:.4f} +/- {report.std:.4f}",
    ]
    paths["report_txt"] = out_dir / f"{stem}.report.txt"
    paths["report_txt"].write_text("\n".join(text) + "\n", encoding="utf-8")
    (out_dir / f"{stem}.config").write_text(report.config.to_kv(), encoding="utf-8")
    return paths


def recompute_mean_from_predictions(path: str | Path) -> float:
    """Independent re-aggregation of a predictions TSV (self-consistency)."""
    per_fold: dict[tuple[int, int], list[bool]] = {}
    with Path(path).open(encoding="utf-8") as fh:
        header = fh.readline()
        assert header.startswith("run\t")
        for line in fh:
            r, f, _, _, _, _, gold, pred = line.rstrip("\n").split("\t")
            per_fold.setdefault((int(r), int(f)), []).append(gold == pred)
    run_accs: dict[int, list[float]] = {}
    for (r, f), oks in per_fold.items():
        run_accs.setdefault(r, []).append(float(np.mean(oks)))
    means = [float(np.mean(accs)) for _, accs in sorted(run_accs.items())]
    return float(np.mean(means))


# ---------------------------------------------------------------------------
# Propagation benchmark
# ---------------------------------------------------------------------------

@dataclass
class BenchCell:
    dataset: str
    method: str
    fraction: float
    scheme: str
    mean: float
    std: float
    skipped: bool = False


def run_propagation_bench(
    config: ExperimentConfig,
    methods: Sequence[str] = ("lr", "ordinal", "spread"),
    fractions: Sequence[float] = (0.05, 0.20),
    schemes: Sequence[str] = ("three_level", "bin_diff"),
    reps: int = 20,
    forbes_path: str | Path | None = None,
    spread_cfg: P.SpreadConfig = P.SpreadConfig(),
) -> list[BenchCell]:
    """Per-method/fraction/scheme mean accuracy over seeded repetitions.

    The internal pair set is regenerated from the annotated bins; the
    external pair file is evaluated too when supplied, otherwise those rows
    are marked skipped.
    """
    config.validate()
    if not config.bins:
        raise ValidationError("the propagation benchmark needs a bins file")
    schema = (FeatureSchema.from_file(config.schema_file)
              if config.schema_file else FeatureSchema.default())
    vocab = load_vocabulary(config.vocab) if config.vocab else None
    profiles = load_bins(config.bins, schema, vocab)
    if not config.embeddings:
        raise ValidationError("the propagation benchmark needs word vectors")
    restrict = vocab if vocab is not None else Vocabulary(
        verbs=(), nouns=tuple(sorted(profiles))
    )
    emb = load_embeddings(config.embeddings, restrict, oov_policy=config.oov)

    datasets: list[tuple[str, P.PairDataset, list[str]]] = []
    max_pairs = len(profiles) * (len(profiles) - 1) // 2
    own = P.sample_pairs(profiles, min(config.prop_pairs, max_pairs),
                         derive_seed(config.seed, "bench-pairs"), emb, schema)
    datasets.append(("own", own, list(schemes)))
    if forbes_path is not None and Path(forbes_path).exists():
        external = P.load_pair_file(forbes_path, emb, scheme="three_level")
        datasets.append(("external", external, ["three_level"]))

    cells: list[BenchCell] = []
    for name, ds, ds_schemes in datasets:
        graph = None
        if "spread" in methods:
            graph = P.knn_similarity_graph(ds.X, spread_cfg.k)
        for method in methods:
            for fraction in fractions:
                for scheme in ds_schemes:
                    accs = []
                    for rep in range(reps):
                        split_seed = derive_seed(config.seed, "bench", name, method,
                                                 fraction, scheme, rep)
                        if fraction >= 1.0:
                            # resubstitution smoke mode: fit and score on all
                            tr = te = np.arange(ds.n)
                        else:
                            tr, te = P.split_fraction(ds, fraction, split_seed)
                        if method == "lr":
                            res = P.fit_predict_lr(ds, tr, te, scheme)
                        elif method == "ordinal":
                            res = P.fit_predict_ordinal(ds, tr, te, scheme)
                        else:
                            res = P.fit_predict_spread(ds, tr, te, scheme,
                                                       spread_cfg, graph)
                        accs.append(res.mean_accuracy)
                    cells.append(BenchCell(
                        dataset=name, method=method, fraction=fraction, scheme=scheme,
                        mean=float(np.mean(accs)),
                        std=float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
                    ))
    if forbes_path is None or not Path(forbes_path).exists():
        for method in methods:
            for fraction in fractions:
                cells.append(BenchCell(dataset="external", method=method,
                                       fraction=fraction, scheme="three_level",
                                       mean=float("nan"), std=float("nan"),
                                       skipped=True))
    return cells


def write_bench_report(cells: Sequence[BenchCell], config: ExperimentConfig,
                       out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fp = config.fingerprint()
    paths: dict[str, Path] = {}
    lines = ["dataset\tmethod\tfraction\tscheme\tmean\tstd\tstatus"]
    for c in cells:
        status = "skipped: data unavailable" if c.skipped else "ok"
        mean = "" if c.skipped else f"{c.mean:.6f}"
        std = "" if c.skipped else f"{c.std:.6f}"
        lines.append(f"{c.dataset}\t{c.method}\t{c.fraction:g}\t{c.scheme}"
                     f"\t{mean}\t{std}\t{status}")
    paths["bench_tsv"] = out_dir / f"bench_prop_{fp}.tsv"
    paths["bench_tsv"].write_text("\n".join(lines) + "\n", encoding="utf-8")

    text = ["pair-label propagation accuracy (mean over repetitions)", ""]
    for c in cells:
        if c.skipped:
            text.append(f"{c.dataset:<9} {c.method:<8} {c.fraction:>5g} {c.scheme:<12}"
                        f" skipped: data unavailable")
        else:
            text.append(f"{c.dataset:<9} {c.method:<8} {c.fraction:>5g} {c.scheme:<12}"
                        f" {c.mean:.4f} +/- {c.std:.4f}")
    paths["bench_txt"] = out_dir / f"bench_prop_{fp}.txt"
    paths["bench_txt"].write_text("\n".join(text) + "\n", encoding="utf-8")
    return paths


# ---------------------------------------------------------------------------
# Error analysis
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    repetitions: int
    ranked: list[tuple[LabeledTriple, float]]       # (triple, misclass frequency)
    tag_percentages: dict[str, float] = field(default_factory=dict)
    diff_model: str | None = None


def load_tag_file(path: str | Path) -> dict[tuple[str, str, str], list[str]]:
    """`s TAB v TAB o TAB tag` rows; a triple may carry several tags."""
    tags: dict[tuple[str, str, str], list[str]] = {}
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError("expected `s TAB v TAB o TAB tag`", path=path, line=lineno)
            key = (parts[0].strip(), parts[1].strip(), parts[2].strip())
            tags.setdefault(key, []).append(parts[3].strip())
    return tags


def error_analysis(
    config: ExperimentConfig,
    repetitions: int = 200,
    top: int = 200,
    tag_file: str | Path | None = None,
    diff_with: str | None = None,
    data: ExperimentData | None = None,
) -> ErrorReport:
    """Rank triples by misclassification frequency across repeated CV runs.

    With diff_with set, counts only repetitions where this config's model is
    wrong while the comparison model is right (both trained on the same fold
    plans).
    """
    cv_config = replace(config, runs=repetitions)
    report = run_cv(cv_config, data=data)
    n = len(report.triples)
    if top > n:
        logger.warning("top=%d exceeds dataset size %d; clamping", top, n)
        top = n

    ok_rows = [r for r in range(repetitions) if r not in report.failed_runs]
    wrong = report.predictions[ok_rows] != report.gold[None, :]
    if diff_with is not None:
        diff_config = replace(cv_config, model=diff_with)
        other_data = None
        if data is not None and _internal_kind(diff_with) == _internal_kind(config.model):
            other_data = data
        other = run_cv(diff_config, data=other_data)
        ok = [r for r in ok_rows if r not in other.failed_runs]
        wrong = ((report.predictions[ok] != report.gold[None, :])
                 & (other.predictions[ok] == other.gold[None, :]))
        denom = len(ok)
    else:
        denom = len(ok_rows)
    freq = wrong.sum(axis=0) / denom

    order = np.argsort(-freq, kind="stable")[:top]
    ranked = [(report.triples[i], float(freq[i])) for i in order]

    tag_pct: dict[str, float] = {}
    if tag_file is not None:
        tags = load_tag_file(tag_file)
        counter: dict[str, int] = {}
        for t, _ in ranked:
            for tag in tags.get(t.triple, []):
                counter[tag] = counter.get(tag, 0) + 1
        tag_pct = {tag: count / len(ranked) for tag, count in sorted(counter.items())}
    return ErrorReport(repetitions=repetitions, ranked=ranked,
                       tag_percentages=tag_pct, diff_model=diff_with)


def write_error_report(report: ErrorReport, config: ExperimentConfig,
                       out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fp = config.fingerprint()
    suffix = f"_vs_{report.diff_model.replace('+', '-')}" if report.diff_model else ""
    stem = f"errors_{config.model.replace('+', '-')}{suffix}_{fp}"
    paths: dict[str, Path] = {}
    lines = ["rank\tsubject\tverb\tobject\tgold\tfrequency"]
    for rank, (t, f) in enumerate(report.ranked, start=1):
        lines.append(f"{rank}\t{t.subject}\t{t.verb}\t{t.object}\t{t.label}\t{f:.6f}")
    paths["errors_tsv"] = out_dir / f"{stem}.tsv"
    paths["errors_tsv"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    if report.tag_percentages:
        tag_lines = ["tag\tshare_of_top"]
        for tag, pct in report.tag_percentages.items():
            tag_lines.append(f"{tag}\t{pct:.6f}")
        paths["tags_tsv"] = out_dir / f"{stem}.tags.tsv"
        paths["tags_tsv"].write_text("\n".join(tag_lines) + "\n", encoding="utf-8")
    return paths
