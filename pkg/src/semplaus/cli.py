"""Command-line interface.

Subcommands: ingest, stats, train, predict, propagate, cv, bench-prop,
errors, synth. Exit codes: 0 success, 1 validation/usage error, 2 runtime
failure. `--config` supplies key=value defaults that explicit flags override;
the output directory defaults to $SEMPLAUS_OUT or ./out.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import harness as H
from . import models as M
from . import propagation as P
from .corpus import (
    aggregate_votes,
    dataset_stats,
    ingest_labeled_files,
    load_triples,
    load_vocabulary,
    load_votes,
    save_triples,
)
from .embeddings import load_embeddings
from .errors import DivergenceError, ParseError, SemplausError, ValidationError
from .seeding import derive_seed
from .synth import write_separable_dataset, write_world_dataset
from .wk_features import FeatureSchema, load_bins

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad flags; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_config_flags(sub: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "model": dict(type=str, help="model kind: " + ", ".join(H.EXPERIMENT_MODELS)),
        "scheme": dict(type=str, choices=["3l", "bin"], help="pair encoding scheme"),
        "input_mode": dict(type=str, choices=["raw", "embedding"], dest="input_mode",
                           help="attribute input: raw one-hot or feature embeddings"),
        "triples": dict(type=str, help="canonical triples TSV"),
        "vocab": dict(type=str, help="vocabulary TSV"),
        "embeddings": dict(type=str, help="word-vector text file"),
        "bins": dict(type=str, help="attribute annotation TSV"),
        "schema_file": dict(type=str, dest="schema_file", help="feature schema override"),
        "oov": dict(type=str, choices=["zero", "error"], help="out-of-vocabulary policy"),
        "seed": dict(type=int, help="base seed"),
        "folds": dict(type=int, help="number of CV folds"),
        "runs": dict(type=int, help="number of derived-seed runs"),
        "prop_method": dict(type=str, choices=list(P.PROP_METHODS), dest="prop_method"),
        "prop_fraction": dict(type=float, dest="prop_fraction",
                              help="annotated fraction for propagation"),
        "prop_pairs": dict(type=int, dest="prop_pairs", help="size of the pair universe"),
        "hidden_nn": dict(type=int, dest="hidden_nn"),
        "hidden_wk": dict(type=int, dest="hidden_wk"),
        "hidden_combiner": dict(type=int, dest="hidden_combiner"),
        "feat_dim": dict(type=int, dest="feat_dim"),
        "batch_size": dict(type=int, dest="batch_size"),
        "learning_rate": dict(type=float, dest="learning_rate"),
        "optimizer": dict(type=str, choices=["sgd", "adam"]),
        "max_epochs": dict(type=int, dest="max_epochs"),
        "patience": dict(type=int),
        "val_fraction": dict(type=float, dest="val_fraction"),
        "fine_tune_embeddings": dict(action="store_true", default=None,
                                     dest="fine_tune_embeddings"),
    }
    for name in names:
        kwargs = dict(flags[name])
        sub.add_argument("--" + name.replace("_", "-"), **kwargs)
    sub.add_argument("--config", type=str, help="key=value config file")
    sub.add_argument("--out", type=str, help="output directory")


def _experiment_config(args) -> H.ExperimentConfig:
    file_values = H.config_from_file(args.config) if args.config else None
    overrides = {}
    for fld in ("model", "scheme", "input_mode", "triples", "vocab", "embeddings",
                "bins", "schema_file", "oov", "seed", "folds", "runs", "prop_method",
                "prop_fraction", "prop_pairs", "hidden_nn", "hidden_wk",
                "hidden_combiner", "feat_dim", "batch_size", "learning_rate",
                "optimizer", "max_epochs", "patience", "val_fraction",
                "fine_tune_embeddings"):
        value = getattr(args, fld, None)
        if value is not None:
            overrides[fld] = value
    return H.build_config(file_values, **overrides)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    vocab = load_vocabulary(args.vocab) if args.vocab else None
    if args.votes:
        records = load_votes(args.votes)
        triples = aggregate_votes(records)
        print(f"aggregated {len(records)} vote records into {len(triples)} triples")
    elif args.pos or args.neg:
        triples = ingest_labeled_files(args.pos, args.neg, vocab)
        print(f"ingested {len(triples)} labeled triples")
    else:
        raise ValidationError("ingest needs --votes or --pos/--neg")
    save_triples(args.out_file, triples)
    print(f"wrote {args.out_file}")
    return 0


def cmd_stats(args) -> int:
    triples = load_triples(args.triples)
    vocab = load_vocabulary(args.vocab) if args.vocab else None
    stats = dataset_stats(triples, vocab)
    print(stats.to_kv() if args.format == "kv" else stats.to_text(), end="")
    if args.out:
        out_dir = H.output_root(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "stats.txt").write_text(stats.to_text(), encoding="utf-8")
        (out_dir / "stats.kv").write_text(stats.to_kv(), encoding="utf-8")
        print(f"wrote {out_dir}/stats.txt and stats.kv")
    return 0


def _gold_provider(config: H.ExperimentConfig, data: H.ExperimentData):
    return M.GoldPairFeatures(data.profiles, data.schema)


def cmd_train(args) -> int:
    config = _experiment_config(args)
    config.validate()
    data = H.load_experiment_data(config)
    kind = "ensemble" if config.model.startswith("nn+wk") else config.model
    features = None
    if kind in ("wk", "ensemble"):
        if config.model == "nn+wk-prop":
            features = P.propagate_profiles(
                data.profiles, config.prop_method, config.scheme,
                config.prop_fraction, derive_seed(config.seed, "prop"),
                data.emb, data.schema, n_pairs=config.prop_pairs,
            )
            features.prepare([(t.subject, t.object) for t in data.triples])
        else:
            features = _gold_provider(config, data)
    model, log = M.train_classifier(kind, data.triples, config.model_config(),
                                    config.seed, emb=data.emb, features=features,
                                    schema=data.schema)
    out_dir = H.output_root(args.out) / f"model_{config.model.replace('+', '-')}_{config.fingerprint()}"
    M.save_model(model, out_dir, config.model_config())
    if log.val_losses:
        log_lines = ["epoch\ttrain_loss\tval_loss"]
        for e, (tr, va) in enumerate(zip(log.train_losses, log.val_losses)):
            log_lines.append(f"{e}\t{tr:.6f}\t{va:.6f}")
        log_lines.append(f"best_epoch\t{log.best_epoch}\t{log.best_val_loss:.6f}")
        (out_dir / "training.tsv").write_text("\n".join(log_lines) + "\n",
                                              encoding="utf-8")
    print(f"trained {config.model} on {len(data.triples)} triples; saved to {out_dir}")
    return 0


def cmd_predict(args) -> int:
    model, mconfig = M.load_model(args.model_dir)
    schema = (FeatureSchema.from_file(args.schema_file)
              if args.schema_file else FeatureSchema.default())
    vocab = load_vocabulary(args.vocab) if args.vocab else None

    if args.triple:
        triples = [tuple(w.lower() for w in args.triple)]
    elif args.triples:
        triples = [t.triple for t in load_triples(args.triples)]
    else:
        raise ValidationError("predict needs --triples FILE or --triple S V O")

    emb = None
    if model.kind in ("lr", "nn", "ensemble"):
        if not args.embeddings:
            raise ValidationError(f"model kind {model.kind!r} needs --embeddings")
        restrict = vocab
        if restrict is None:
            words = sorted({w for t in triples for w in t})
            from .corpus import Vocabulary

            restrict = Vocabulary(verbs=(), nouns=tuple(words))
        emb = load_embeddings(args.embeddings, restrict, oov_policy=args.oov or "zero")
    features = None
    if model.kind in ("wk", "ensemble"):
        if not args.bins:
            raise ValidationError(f"model kind {model.kind!r} needs --bins")
        profiles = load_bins(args.bins, schema, vocab)
        features = M.GoldPairFeatures(profiles, schema)

    lines = []
    for t in triples:
        if model.kind == "ensemble":
            label, probs = M.predict_ensemble(model, t, emb, features, schema)
            p1 = probs[1]
        elif model.kind == "nn":
            p1 = M.predict_nn(model, t, emb)
            label = int(p1 > 0.5)
        elif model.kind == "lr":
            p1 = M.predict_lr(model, t, emb)
            label = int(p1 > 0.5)
        elif model.kind == "wk":
            inputs = M.featurize("wk", [t], features=features, schema=schema,
                                 config=mconfig)
            p1 = float(model.predict_proba(inputs)[0])
            label = int(p1 > 0.5)
        else:
            raise ValidationError("the random model has no meaningful predictions")
        lines.append(f"{t[0]}\t{t[1]}\t{t[2]}\t{label}\t{p1:.6f}")
    body = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(body, end="")
    return 0


def cmd_propagate(args) -> int:
    config = _experiment_config(args)
    schema = (FeatureSchema.from_file(config.schema_file)
              if config.schema_file else FeatureSchema.default())
    vocab = load_vocabulary(config.vocab) if config.vocab else None
    fraction = args.fraction if args.fraction is not None else config.prop_fraction
    method = args.method if args.method else config.prop_method

    if args.pairs:
        if not config.embeddings:
            raise ValidationError("propagate needs --embeddings")
        emb = load_embeddings(config.embeddings, None, oov_policy=config.oov)
        ds = P.load_pair_file(args.pairs, emb)
        scheme = "three_level"
    else:
        if not config.bins:
            raise ValidationError("propagate needs --pairs FILE or --bins")
        profiles = load_bins(config.bins, schema, vocab)
        if not config.embeddings:
            raise ValidationError("propagate needs --embeddings")
        from .corpus import Vocabulary

        restrict = vocab if vocab is not None else Vocabulary(
            verbs=(), nouns=tuple(sorted(profiles)))
        emb = load_embeddings(config.embeddings, restrict, oov_policy=config.oov)
        max_pairs = len(profiles) * (len(profiles) - 1) // 2
        ds = P.sample_pairs(profiles, min(config.prop_pairs, max_pairs),
                            derive_seed(config.seed, "pair-universe"), emb, schema)
        scheme = config.scheme

    train_idx, test_idx = P.split_fraction(ds, fraction,
                                           derive_seed(config.seed, "gold-split"))
    train_set = set(train_idx.tolist())
    predicted: dict[str, np.ndarray] = {}
    for f in ds.features(scheme):
        y = ds.class_index(scheme, f, ds.labels[scheme][f])
        if method == "lr":
            clf = P.LrPairClassifier().fit(ds.X[train_idx], y[train_idx])
            pred = clf.predict(ds.X)
        elif method == "ordinal":
            clf = P.OrdinalPairClassifier(ds.n_classes(scheme, f))
            clf.fit(ds.X[train_idx], y[train_idx])
            pred = clf.predict(ds.X)
        else:
            S = P.knn_similarity_graph(ds.X, P.SpreadConfig().k)
            pred, _, _, _ = P.label_spread(S, train_idx, y[train_idx],
                                           ds.n_classes(scheme, f))
        predicted[f] = ds.index_value(scheme, f, pred)

    out_dir = H.output_root(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"propagate_{method}_{scheme}_{fraction:g}_{config.seed}.tsv"
    lines = ["noun_a\tnoun_b\tfeature\tvalue\tprovenance"]
    for i, (a, b) in enumerate(ds.pairs):
        for f in ds.features(scheme):
            if i in train_set:
                value, prov = int(ds.labels[scheme][f][i]), "gold"
            else:
                value, prov = int(predicted[f][i]), "predicted"
            lines.append(f"{a}\t{b}\t{f}\t{value}\t{prov}")
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    accs = {f: float(np.mean(predicted[f][test_idx]
                             == ds.labels[scheme][f][test_idx]))
            for f in ds.features(scheme)}
    mean_acc = float(np.mean(list(accs.values())))
    print(f"held-out accuracy ({method}, {scheme}, {fraction:g}): {mean_acc:.4f}")
    print(f"wrote {out_path}")
    return 0


def cmd_cv(args) -> int:
    config = _experiment_config(args)
    config.validate()
    report = H.run_cv(config)
    paths = H.write_run_report(report, H.output_root(args.out))
    print(f"{config.model}: accuracy {report.mean:.4f} +/- {report.std:.4f} "
          f"({report.n_completed}/{config.runs} runs)")
    for name, path in paths.items():
        print(f"wrote {path}")
    if len(report.failed_runs) > 0.10 * config.runs:
        print(f"error: {len(report.failed_runs)} of {config.runs} runs failed",
              file=sys.stderr)
        return 2
    return 0


def cmd_bench_prop(args) -> int:
    config = _experiment_config(args)
    methods = args.methods.split(",") if args.methods else ["lr", "ordinal", "spread"]
    for m in methods:
        if m not in P.PROP_METHODS:
            raise ValidationError(f"unknown method {m!r}")
    fractions = ([float(x) for x in args.fractions.split(",")]
                 if args.fractions else [0.05, 0.20])
    schemes = ([H.SCHEME_ALIASES[s] for s in args.schemes.split(",")]
               if args.schemes else ["three_level", "bin_diff"])
    cells = H.run_propagation_bench(
        config, methods=methods, fractions=fractions, schemes=schemes,
        reps=args.reps, forbes_path=args.pairs,
    )
    paths = H.write_bench_report(cells, config, H.output_root(args.out))
    for c in cells:
        if c.skipped:
            print(f"{c.dataset} {c.method} {c.fraction:g} {c.scheme}: "
                  f"skipped: data unavailable")
        else:
            print(f"{c.dataset} {c.method} {c.fraction:g} {c.scheme}: "
                  f"{c.mean:.4f} +/- {c.std:.4f}")
    for name, path in paths.items():
        print(f"wrote {path}")
    return 0


def cmd_errors(args) -> int:
    config = _experiment_config(args)
    config.validate()
    report = H.error_analysis(config, repetitions=args.reps, top=args.top,
                              tag_file=args.tags, diff_with=args.diff_with)
    paths = H.write_error_report(report, config, H.output_root(args.out))
    shown = min(10, len(report.ranked))
    print(f"top {shown} most frequently misclassified "
          f"(of {len(report.ranked)} reported):")
    for t, f in report.ranked[:shown]:
        print(f"  {f:.3f}  {t.subject} {t.verb} {t.object} (gold {t.label})")
    if report.tag_percentages:
        print("tag shares over the reported list:")
        for tag, pct in report.tag_percentages.items():
            print(f"  {tag}: {100 * pct:.1f}%")
    for name, path in paths.items():
        print(f"wrote {path}")
    return 0


def cmd_synth(args) -> int:
    if args.kind == "separable":
        paths = write_separable_dataset(args.out_dir, seed=args.seed,
                                        n_triples=args.triples_n, dim=args.dim)
    else:
        paths = write_world_dataset(args.out_dir, seed=args.seed,
                                    n_triples=args.triples_n, dim=args.dim,
                                    n_nouns=args.nouns, n_verbs=args.verbs)
    for name, path in paths.items():
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="semplaus",
                     description="semantic plausibility experiments over s-v-o triples")
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", parents=[], help="normalize raw data files")
    p.add_argument("--votes", type=str, help="raw 5-vote TSV")
    p.add_argument("--pos", type=str, help="plausible triples, one per line")
    p.add_argument("--neg", type=str, help="implausible triples, one per line")
    p.add_argument("--vocab", type=str)
    p.add_argument("--out-file", type=str, required=True, dest="out_file")
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("stats", help="dataset summary")
    p.add_argument("--triples", type=str, required=True)
    p.add_argument("--vocab", type=str)
    p.add_argument("--format", choices=["text", "kv"], default="text")
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_stats)

    p = subs.add_parser("train", help="train one classifier on a triples file")
    _add_config_flags(p, "model", "scheme", "input_mode", "triples", "vocab",
                      "embeddings", "bins", "schema_file", "oov", "seed",
                      "prop_method", "prop_fraction", "prop_pairs", "hidden_nn",
                      "hidden_wk", "hidden_combiner", "feat_dim", "batch_size",
                      "learning_rate", "optimizer", "max_epochs", "patience",
                      "val_fraction", "fine_tune_embeddings")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model-dir", type=str, required=True, dest="model_dir")
    p.add_argument("--triples", type=str)
    p.add_argument("--triple", nargs=3, metavar=("S", "V", "O"))
    p.add_argument("--embeddings", type=str)
    p.add_argument("--bins", type=str)
    p.add_argument("--vocab", type=str)
    p.add_argument("--schema-file", type=str, dest="schema_file")
    p.add_argument("--oov", choices=["zero", "error"])
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_predict)

    p = subs.add_parser("propagate", help="propagate pair labels from a fraction")
    p.add_argument("--method", choices=list(P.PROP_METHODS))
    p.add_argument("--fraction", type=float)
    p.add_argument("--pairs", type=str, help="external pair TSV (a b feature value)")
    _add_config_flags(p, "scheme", "vocab", "embeddings", "bins", "schema_file",
                      "oov", "seed", "prop_pairs")
    p.set_defaults(func=cmd_propagate)

    p = subs.add_parser("cv", help="repeated k-fold cross-validation")
    _add_config_flags(p, "model", "scheme", "input_mode", "triples", "vocab",
                      "embeddings", "bins", "schema_file", "oov", "seed", "folds",
                      "runs", "prop_method", "prop_fraction", "prop_pairs",
                      "hidden_nn", "hidden_wk", "hidden_combiner", "feat_dim",
                      "batch_size", "learning_rate", "optimizer", "max_epochs",
                      "patience", "val_fraction", "fine_tune_embeddings")
    p.set_defaults(func=cmd_cv)

    p = subs.add_parser("bench-prop", help="pair-label propagation benchmark")
    p.add_argument("--methods", type=str, help="comma list: lr,ordinal,spread")
    p.add_argument("--fractions", type=str, help="comma list, e.g. 0.05,0.20")
    p.add_argument("--schemes", type=str, help="comma list: 3l,bin")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--pairs", type=str, help="external pair TSV; skipped if absent")
    _add_config_flags(p, "vocab", "embeddings", "bins", "schema_file", "oov",
                      "seed", "prop_pairs")
    p.set_defaults(func=cmd_bench_prop)

    p = subs.add_parser("errors", help="repeated-run misclassification ranking")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--top", type=int, default=200)
    p.add_argument("--tags", type=str, help="tag file: s v o tag")
    p.add_argument("--diff-with", type=str, dest="diff_with",
                   help="count only cases this model gets wrong and that model right")
    _add_config_flags(p, "model", "scheme", "input_mode", "triples", "vocab",
                      "embeddings", "bins", "schema_file", "oov", "seed", "folds",
                      "prop_method", "prop_fraction", "prop_pairs", "hidden_nn",
                      "hidden_wk", "hidden_combiner", "feat_dim", "batch_size",
                      "learning_rate", "optimizer", "max_epochs", "patience",
                      "val_fraction")
    p.set_defaults(func=cmd_errors)

    p = subs.add_parser("synth", help="generate synthetic demo datasets")
    p.add_argument("--kind", choices=["separable", "world"], default="world")
    p.add_argument("--out-dir", type=str, required=True, dest="out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--triples-n", type=int, default=600, dest="triples_n")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--nouns", type=int, default=60)
    p.add_argument("--verbs", type=int, default=12)
    p.set_defaults(func=cmd_synth)
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValidationError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except SemplausError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(cli_main())
