import numpy as np
import pytest

from semplaus.cli import cli_main


def run(argv):
    return cli_main([str(a) for a in argv])


def toy_flags(data_dir, **extra):
    flags = {
        "--triples": data_dir / "triples.tsv",
        "--vocab": data_dir / "vocab.tsv",
        "--embeddings": data_dir / "embeddings.txt",
        "--bins": data_dir / "bins.tsv",
        "--seed": 3,
        "--max-epochs": 400,
        "--patience": 400,
        "--learning-rate": 0.02,
        "--batch-size": 4,
        "--val-fraction": 0.0,
        "--hidden-nn": 8,
        "--hidden-wk": 6,
        "--hidden-combiner": 6,
        "--feat-dim": 4,
    }
    flags.update(extra)
    out = []
    for key, value in flags.items():
        out.extend([key, value])
    return out


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_unknown_flag_exits_1():
    assert run(["cv", "--frobnicate"]) == 1


def test_unknown_subcommand_exits_1():
    assert run(["dance"]) == 1


def test_invalid_folds_exits_1(separable_dir, tmp_path):
    argv = ["cv", "--model", "lr", "--folds", 1, "--runs", 1,
            "--out", tmp_path] + toy_flags(separable_dir)
    assert run(argv) == 1


def test_missing_file_exits_1(tmp_path):
    assert run(["stats", "--triples", tmp_path / "absent.tsv"]) == 1


def test_help_exits_0(capsys):
    assert run(["--help"]) == 0
    assert "semplaus" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# synth + stats + ingest
# ---------------------------------------------------------------------------

def test_synth_writes_files(tmp_path):
    assert run(["synth", "--kind", "separable", "--out-dir", tmp_path / "d",
                "--seed", 4, "--triples-n", 12, "--dim", 8]) == 0
    for name in ("vocab.tsv", "embeddings.txt", "triples.tsv", "bins.tsv"):
        assert (tmp_path / "d" / name).exists()


def test_stats_text_and_kv(separable_dir, capsys):
    assert run(["stats", "--triples", separable_dir / "triples.tsv",
                "--vocab", separable_dir / "vocab.tsv"]) == 0
    text = capsys.readouterr().out
    assert "triples:" in text and "balance" in text
    assert run(["stats", "--triples", separable_dir / "triples.tsv",
                "--format", "kv"]) == 0
    kv = capsys.readouterr().out
    assert "count=20" in kv


def test_stats_writes_files(separable_dir, tmp_path):
    assert run(["stats", "--triples", separable_dir / "triples.tsv",
                "--out", tmp_path]) == 0
    assert (tmp_path / "stats.txt").exists()
    assert (tmp_path / "stats.kv").exists()


def test_ingest_votes(world_dir, tmp_path, capsys):
    out_file = tmp_path / "triples.tsv"
    assert run(["ingest", "--votes", world_dir / "votes.tsv",
                "--out-file", out_file]) == 0
    assert out_file.exists()
    reference = (world_dir / "triples.tsv").read_text(encoding="utf-8")
    assert out_file.read_text(encoding="utf-8") == reference  # labels match votes


def test_ingest_pos_neg(tmp_path):
    (tmp_path / "pos.txt").write_text("man swallow candy\n", encoding="utf-8")
    (tmp_path / "neg.txt").write_text("man swallow desk\n", encoding="utf-8")
    out_file = tmp_path / "t.tsv"
    assert run(["ingest", "--pos", tmp_path / "pos.txt",
                "--neg", tmp_path / "neg.txt", "--out-file", out_file]) == 0
    assert out_file.read_text(encoding="utf-8") == (
        "man\tswallow\tcandy\t1\nman\tswallow\tdesk\t0\n"
    )


def test_ingest_needs_some_input(tmp_path):
    assert run(["ingest", "--out-file", tmp_path / "t.tsv"]) == 1


# ---------------------------------------------------------------------------
# cv + determinism + errors
# ---------------------------------------------------------------------------

def test_cv_writes_reports_and_succeeds(separable_dir, tmp_path, capsys):
    argv = ["cv", "--model", "lr", "--folds", 2, "--runs", 1,
            "--out", tmp_path] + toy_flags(separable_dir)
    assert run(argv) == 0
    out = capsys.readouterr().out
    assert "accuracy 1.0000" in out
    reports = list(tmp_path.glob("cv_lr_*.report.tsv"))
    assert len(reports) == 1


def test_cv_byte_identical_reports(separable_dir, tmp_path):
    argv1 = ["cv", "--model", "nn", "--folds", 2, "--runs", 2,
             "--out", tmp_path / "a"] + toy_flags(separable_dir)
    argv2 = ["cv", "--model", "nn", "--folds", 2, "--runs", 2,
             "--out", tmp_path / "b"] + toy_flags(separable_dir)
    assert run(argv1) == 0
    assert run(argv2) == 0
    for pattern in ("cv_nn_*.report.tsv", "cv_nn_*.predictions.tsv",
                    "cv_nn_*.misclass.tsv"):
        (fa,) = (tmp_path / "a").glob(pattern)
        (fb,) = (tmp_path / "b").glob(pattern)
        assert fa.read_bytes() == fb.read_bytes()


def test_cv_env_output_root(separable_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("SEMPLAUS_OUT", str(tmp_path / "envout"))
    argv = ["cv", "--model", "lr", "--folds", 2, "--runs", 1] \
        + toy_flags(separable_dir)
    assert run(argv) == 0
    assert list((tmp_path / "envout").glob("cv_lr_*.report.tsv"))


def test_cv_exit_2_when_too_many_runs_fail(separable_dir, tmp_path, monkeypatch):
    from semplaus import harness as H
    from semplaus.errors import DivergenceError

    real = H.M.train_classifier
    state = {"n": 0}

    def flaky(*args, **kwargs):
        state["n"] += 1
        if state["n"] <= 2:  # both folds of run 0
            raise DivergenceError("boom")
        return real(*args, **kwargs)

    monkeypatch.setattr(H.M, "train_classifier", flaky)
    argv = ["cv", "--model", "lr", "--folds", 2, "--runs", 2,
            "--out", tmp_path] + toy_flags(separable_dir)
    assert run(argv) == 2


def test_errors_command(separable_dir, tmp_path, capsys):
    argv = ["errors", "--model", "random", "--reps", 2, "--top", 5,
            "--folds", 2, "--out", tmp_path] + toy_flags(separable_dir)
    assert run(argv) == 0
    out = capsys.readouterr().out
    assert "most frequently misclassified" in out
    (errors_tsv,) = tmp_path.glob("errors_random_*.tsv")
    lines = errors_tsv.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 6
    for line in lines[1:]:
        freq = float(line.split("\t")[-1])
        assert freq in (0.0, 0.5, 1.0)


# ---------------------------------------------------------------------------
# config file plumbing
# ---------------------------------------------------------------------------

def test_cv_with_config_file(separable_dir, tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "\n".join([
            "model=lr",
            f"triples={separable_dir / 'triples.tsv'}",
            f"vocab={separable_dir / 'vocab.tsv'}",
            f"embeddings={separable_dir / 'embeddings.txt'}",
            "folds=2",
            "runs=1",
            "seed=3",
            "max_epochs=400",
            "patience=400",
            "learning_rate=0.02",
            "batch_size=4",
            "val_fraction=0.0",
        ]) + "\n",
        encoding="utf-8",
    )
    assert run(["cv", "--config", cfg, "--out", tmp_path / "o"]) == 0
    assert list((tmp_path / "o").glob("cv_lr_*.report.tsv"))


def test_bad_config_key_exits_1(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("warp_drive=1\n", encoding="utf-8")
    assert run(["cv", "--config", cfg]) == 1


# ---------------------------------------------------------------------------
# train + predict
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trained_dir(separable_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    argv = ["train", "--model", "nn", "--out", out] + toy_flags(separable_dir)
    assert cli_main([str(a) for a in argv]) == 0
    (model_dir,) = out.glob("model_nn_*")
    return model_dir


def test_train_writes_model(trained_dir):
    assert (trained_dir / "model.ckpt").exists()
    assert (trained_dir / "model.manifest").exists()
    assert (trained_dir / "training.tsv").exists()
    manifest = (trained_dir / "model.manifest").read_text(encoding="utf-8")
    assert "kind=nn" in manifest


def test_predict_single_triple(separable_dir, trained_dir, capsys):
    argv = ["predict", "--model-dir", trained_dir,
            "--embeddings", separable_dir / "embeddings.txt",
            "--vocab", separable_dir / "vocab.tsv",
            "--triple", "noun0", "verb0", "noun1"]
    assert run(argv) == 0
    line = capsys.readouterr().out.strip()
    parts = line.split("\t")
    assert parts[:3] == ["noun0", "verb0", "noun1"]
    assert parts[3] in ("0", "1")
    assert 0.0 <= float(parts[4]) <= 1.0


def test_predict_file_matches_training_labels(separable_dir, trained_dir, tmp_path):
    out_file = tmp_path / "preds.tsv"
    argv = ["predict", "--model-dir", trained_dir,
            "--embeddings", separable_dir / "embeddings.txt",
            "--vocab", separable_dir / "vocab.tsv",
            "--triples", separable_dir / "triples.tsv",
            "--out", out_file]
    assert run(argv) == 0
    lines = out_file.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 20
    gold = [ln.split("\t")[3] for ln
            in (separable_dir / "triples.tsv").read_text().strip().splitlines()]
    pred = [ln.split("\t")[3] for ln in lines]
    agreement = np.mean([g == p for g, p in zip(gold, pred)])
    assert agreement == 1.0  # the toy set is memorizable


def test_predict_requires_inputs(trained_dir):
    assert run(["predict", "--model-dir", trained_dir]) == 1


def test_train_predict_ensemble_roundtrip(world_dir, tmp_path, capsys):
    argv = ["train", "--model", "nn+wk-gold", "--scheme", "bin",
            "--input-mode", "embedding", "--out", tmp_path] \
        + toy_flags(world_dir, **{"--max-epochs": 60, "--patience": 60,
                                  "--val-fraction": 0.1, "--batch-size": 32})
    assert run(argv) == 0
    (model_dir,) = tmp_path.glob("model_nn-wk-gold_*")
    assert (model_dir / "model.ckpt").exists()
    argv = ["predict", "--model-dir", model_dir,
            "--embeddings", world_dir / "embeddings.txt",
            "--bins", world_dir / "bins.tsv",
            "--vocab", world_dir / "vocab.tsv",
            "--triple", "noun0", "verb0", "noun1"]
    assert run(argv) == 0
    parts = capsys.readouterr().out.strip().splitlines()[-1].split("\t")
    assert parts[3] in ("0", "1") and 0.0 <= float(parts[4]) <= 1.0


# ---------------------------------------------------------------------------
# propagate + bench-prop
# ---------------------------------------------------------------------------

def test_propagate_from_bins(world_dir, tmp_path, capsys):
    argv = ["propagate", "--method", "ordinal", "--fraction", 0.2,
            "--scheme", "3l", "--bins", world_dir / "bins.tsv",
            "--vocab", world_dir / "vocab.tsv",
            "--embeddings", world_dir / "embeddings.txt",
            "--prop-pairs", 100, "--seed", 5, "--out", tmp_path]
    assert run(argv) == 0
    out = capsys.readouterr().out
    assert "held-out accuracy" in out
    (tsv,) = tmp_path.glob("propagate_ordinal_three_level_*.tsv")
    lines = tsv.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "noun_a\tnoun_b\tfeature\tvalue\tprovenance"
    provs = {ln.split("\t")[4] for ln in lines[1:]}
    assert provs == {"gold", "predicted"}
    values = {int(ln.split("\t")[3]) for ln in lines[1:]}
    assert values <= {-1, 0, 1}


def test_propagate_external_pairs(world_dir, tmp_path):
    rng = np.random.default_rng(1)
    rows = []
    for i in range(0, 30, 2):
        for f in ("size", "weight"):
            rows.append(f"noun{i}\tnoun{i+1}\t{f}\t{rng.integers(-1, 2)}")
    ext = tmp_path / "ext.tsv"
    ext.write_text("\n".join(rows) + "\n", encoding="utf-8")
    argv = ["propagate", "--method", "lr", "--fraction", 0.4,
            "--pairs", ext, "--embeddings", world_dir / "embeddings.txt",
            "--seed", 2, "--out", tmp_path]
    assert run(argv) == 0
    assert list(tmp_path.glob("propagate_lr_three_level_*.tsv"))


def test_bench_prop_cli(world_dir, tmp_path, capsys):
    argv = ["bench-prop", "--methods", "lr", "--fractions", "0.2",
            "--schemes", "3l", "--reps", 1,
            "--bins", world_dir / "bins.tsv",
            "--vocab", world_dir / "vocab.tsv",
            "--embeddings", world_dir / "embeddings.txt",
            "--prop-pairs", 80, "--seed", 4, "--out", tmp_path]
    assert run(argv) == 0
    out = capsys.readouterr().out
    assert "skipped: data unavailable" in out  # the external half
    assert list(tmp_path.glob("bench_prop_*.tsv"))
