import math

import numpy as np
import pytest

from helpers import random_profiles
from semplaus import models as M
from semplaus import neural_core as nc
from semplaus.corpus import LabeledTriple, load_triples, make_folds
from semplaus.embeddings import EmbeddingTable, load_embeddings, stack_triples
from semplaus.errors import ValidationError
from semplaus.wk_features import FeatureSchema, load_bins

SCHEMA = FeatureSchema.default()

SMALL = M.ModelConfig(hidden_nn=8, hidden_wk=6, hidden_combiner=5, feat_dim=4,
                      batch_size=8, max_epochs=40, patience=8)


def make_emb(words, dim=5, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(dim, {w: rng.normal(0.0, scale, size=dim) for w in words})


def toy_world(n=40, seed=3, dim=5):
    """Tiny labeled triples with profiles and embeddings for unit tests."""
    profiles = random_profiles(8, seed=seed)
    nouns = sorted(profiles)
    verbs = ["v0", "v1"]
    emb = make_emb(nouns + verbs, dim=dim, seed=seed)
    rng = np.random.default_rng(seed)
    triples = []
    for _ in range(n):
        s, o = rng.choice(nouns, size=2, replace=False)
        v = str(rng.choice(verbs))
        label = int(rng.integers(0, 2))
        triples.append(LabeledTriple(triple=(str(s), v, str(o)), label=label))
    return triples, profiles, emb


# ---------------------------------------------------------------------------
# prediction contracts
# ---------------------------------------------------------------------------

def test_zero_weight_nn_outputs_half():
    model = M.NnModel.build(15, SMALL, seed=1)
    for layer in model.stack.layers:
        layer.W[...] = 0.0
    emb = make_emb(["a", "v", "b"])
    assert M.predict_nn(model, ("a", "v", "b"), emb) == pytest.approx(0.5)


def test_zero_weight_lr_outputs_half():
    model = M.LrModel.build(15, seed=1)
    model.stack.layers[0].W[...] = 0.0
    emb = make_emb(["a", "v", "b"])
    assert M.predict_lr(model, ("a", "v", "b"), emb) == pytest.approx(0.5)


def test_nn_probability_in_unit_interval():
    triples, profiles, emb = toy_world(n=30)
    model = M.NnModel.build(3 * emb.dim, SMALL, seed=2)
    for t in triples:
        p = M.predict_nn(model, t.triple, emb)
        assert 0.0 < p < 1.0


def test_lr_sign_flip_symmetry():
    emb = make_emb(["a", "v", "b"], seed=4)
    model = M.LrModel.build(15, seed=3)
    p = M.predict_lr(model, ("a", "v", "b"), emb)
    model.stack.layers[0].W *= -1.0
    model.stack.layers[0].b *= -1.0
    q = M.predict_lr(model, ("a", "v", "b"), emb)
    assert p == pytest.approx(1.0 - q, abs=1e-12)


def test_lr_matches_scalar_oracle():
    emb = make_emb(["s", "v", "o", "x", "y"], dim=4, seed=9)
    model = M.LrModel.build(12, seed=5)
    rng = np.random.default_rng(0)
    model.stack.layers[0].W[...] = rng.normal(size=(1, 12))
    model.stack.layers[0].b[...] = rng.normal(size=1)
    for t in [("s", "v", "o"), ("x", "v", "y"), ("o", "v", "s"),
              ("y", "v", "x"), ("s", "v", "y")]:
        x = np.concatenate([emb.vector(w) for w in t])
        z = model.bias
        for j in range(12):
            z += model.weights[j] * x[j]
        expected = 1.0 / (1.0 + math.exp(-z))
        assert M.predict_lr(model, t, emb) == pytest.approx(expected, abs=1e-12)


def test_ensemble_probs_sum_to_one_and_argmax_consistent():
    triples, profiles, emb = toy_world(n=25)
    model = M.EnsembleModel.build(3 * emb.dim, SCHEMA, SMALL, seed=7)
    for t in triples:
        label, probs = M.predict_ensemble(model, t.triple, emb, profiles, SCHEMA)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert label == int(np.argmax(probs))


def test_ensemble_missing_profile_names_noun():
    _, profiles, emb = toy_world()
    model = M.EnsembleModel.build(3 * emb.dim, SCHEMA, SMALL, seed=7)
    emb2 = make_emb(list(emb.words()) + ["ghost"], dim=emb.dim)
    with pytest.raises(ValidationError, match="ghost"):
        M.predict_ensemble(model, ("ghost", "v0", "noun1"), emb2, profiles, SCHEMA)


# ---------------------------------------------------------------------------
# training behavior
# ---------------------------------------------------------------------------

def test_memorizes_single_positive_triple():
    emb = make_emb(["man", "swallow", "candy"], dim=6, seed=1)
    train = [LabeledTriple(("man", "swallow", "candy"), 1)] * 10
    config = M.ModelConfig(hidden_nn=8, batch_size=8, max_epochs=200, patience=50)
    model, _ = M.train_classifier("nn", train, config, seed=0, emb=emb)
    assert M.predict_nn(model, ("man", "swallow", "candy"), emb) > 0.9


def test_val_loss_at_best_epoch_not_worse_than_start():
    triples, profiles, emb = toy_world(n=60, seed=6)
    model, log = M.train_classifier("nn", triples, SMALL, seed=1, emb=emb)
    assert log.val_losses[log.best_epoch] <= log.val_losses[0] + 1e-12


def test_training_deterministic():
    triples, profiles, emb = toy_world(n=30, seed=8)
    m1, _ = M.train_classifier("ensemble", triples, SMALL, seed=5, emb=emb,
                               features=profiles, schema=SCHEMA)
    m2, _ = M.train_classifier("ensemble", triples, SMALL, seed=5, emb=emb,
                               features=profiles, schema=SCHEMA)
    for a, b in zip(m1.parameters(), m2.parameters()):
        assert a.tobytes() == b.tobytes()


def test_single_class_training_warns(caplog):
    emb = make_emb(["a", "v", "b"], dim=4)
    train = [LabeledTriple(("a", "v", "b"), 1)] * 12
    with caplog.at_level("WARNING"):
        M.train_classifier("lr", train, SMALL, seed=0, emb=emb)
    assert "single class" in caplog.text


def test_random_model_deterministic():
    model, _ = M.train_classifier("random", [LabeledTriple(("a", "v", "b"), 1)],
                                  SMALL, seed=3)
    a = model.predict_labels(50, salt=1)
    b = model.predict_labels(50, salt=1)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0, 1}


def test_unknown_kind_rejected():
    with pytest.raises(ValidationError, match="kind"):
        M.train_classifier("svm", [LabeledTriple(("a", "v", "b"), 1)], SMALL, 0)


def test_label_shuffle_gives_chance_level():
    triples, profiles, emb = toy_world(n=240, seed=12, dim=6)
    rng = np.random.default_rng(0)
    labels = np.array([t.label for t in triples])
    rng.shuffle(labels)
    shuffled = [LabeledTriple(t.triple, int(y)) for t, y in zip(triples, labels)]
    config = M.ModelConfig(hidden_nn=8, hidden_wk=6, hidden_combiner=5, feat_dim=4,
                           batch_size=16, max_epochs=25, patience=5)
    hits = total = 0
    for run in range(3):
        plan = make_folds(len(shuffled), 3, seed=run)
        for f in range(3):
            train = [shuffled[i] for i in plan.train_indices(f)]
            test = [shuffled[i] for i in plan.test_indices(f)]
            model, _ = M.train_classifier("lr", train, config, seed=100 + run * 3 + f,
                                          emb=emb)
            inputs = M.ModelInputs(x_nn=stack_triples([t.triple for t in test], emb))
            preds = M.predict_labels(model, inputs)
            hits += int(np.sum(preds == [t.label for t in test]))
            total += len(test)
    assert 0.45 <= hits / total <= 0.55


# ---------------------------------------------------------------------------
# gradient checks, end to end
# ---------------------------------------------------------------------------

def _one_example(kind, config, seed=0):
    triples, profiles, emb = toy_world(n=4, seed=seed)
    t = [triples[0].triple]
    word_input = None
    if config.fine_tune_embeddings and kind in ("nn", "ensemble"):
        word_input = M.TripleEmbeddingInput.from_table(emb, [w for w in t[0]])
    inputs = M.featurize(kind, t, emb=emb, features=profiles, schema=SCHEMA,
                         config=config, word_input=word_input)
    return inputs, emb, word_input


def test_grad_check_nn_model():
    config = SMALL
    inputs, emb, _ = _one_example("nn", config)
    model = M.NnModel.build(3 * emb.dim, config, seed=21)
    res = M.model_grad_check(model, inputs, np.array([1.0]))
    assert res.passed, res.max_rel_error


def test_grad_check_nn_fine_tuned():
    config = M.ModelConfig(hidden_nn=6, fine_tune_embeddings=True)
    inputs, emb, word_input = _one_example("nn", config, seed=2)
    model = M.NnModel.build(3 * emb.dim, config, seed=22, word_input=word_input)
    res = M.model_grad_check(model, inputs, np.array([0.0]))
    assert res.passed, res.max_rel_error


@pytest.mark.parametrize("mode", ["raw_onehot", "feature_embedding"])
def test_grad_check_wk_model(mode):
    config = M.ModelConfig(hidden_wk=6, feat_dim=4, input_mode=mode)
    inputs, _, _ = _one_example("wk", config, seed=3)
    model = M.WkModel.build(SCHEMA, config, seed=23)
    res = M.model_grad_check(model, inputs, np.array([1.0]))
    assert res.passed, res.max_rel_error


@pytest.mark.parametrize("mode", ["raw_onehot", "feature_embedding"])
def test_grad_check_ensemble_model(mode):
    config = M.ModelConfig(hidden_nn=8, hidden_wk=6, hidden_combiner=5,
                           feat_dim=4, input_mode=mode)
    inputs, emb, _ = _one_example("ensemble", config, seed=4)
    model = M.EnsembleModel.build(3 * emb.dim, SCHEMA, config, seed=24)
    res = M.model_grad_check(model, inputs, np.array([1]))
    assert res.passed, res.max_rel_error


def test_grad_check_ensemble_fine_tuned():
    config = M.ModelConfig(hidden_nn=6, hidden_wk=4, hidden_combiner=4,
                           feat_dim=3, fine_tune_embeddings=True)
    inputs, emb, word_input = _one_example("ensemble", config, seed=5)
    model = M.EnsembleModel.build(3 * emb.dim, SCHEMA, config, seed=25,
                                  word_input=word_input)
    res = M.model_grad_check(model, inputs, np.array([0]))
    assert res.passed, res.max_rel_error


# ---------------------------------------------------------------------------
# ensemble degeneration: zeroed attribute path, combiner retrained on a_nn
# ---------------------------------------------------------------------------

def test_ensemble_degenerates_to_nn(world_big_dir):
    triples = load_triples(world_big_dir / "triples.tsv")
    profiles = load_bins(world_big_dir / "bins.tsv", SCHEMA)
    emb = load_embeddings(world_big_dir / "embeddings.txt")
    config = M.ModelConfig(hidden_nn=16, hidden_wk=6, hidden_combiner=8,
                           input_mode="raw_onehot", batch_size=32,
                           max_epochs=200, patience=200)
    train, test = triples[:400], triples[400:]

    nn_model, _ = M.train_classifier("nn", train, config, seed=11, emb=emb)
    test_inputs = M.featurize("nn", [t.triple for t in test], emb=emb, config=config)
    nn_acc = float(np.mean(M.predict_labels(nn_model, test_inputs)
                           == [t.label for t in test]))

    ens = M.EnsembleModel.build(3 * emb.dim, SCHEMA, config, seed=12)
    ens.nn_stack.layers[0].W[...] = nn_model.stack.layers[0].W
    ens.nn_stack.layers[0].b[...] = nn_model.stack.layers[0].b
    ens.wk_stack.layers[0].W[...] = 0.0
    ens.wk_stack.layers[0].b[...] = 0.0
    provider = M.GoldPairFeatures(profiles, SCHEMA)
    train_inputs = M.featurize("ensemble", [t.triple for t in train], emb=emb,
                               features=provider, schema=SCHEMA, config=config)
    y = np.array([t.label for t in train], dtype=np.int64)
    M.fit(ens, train_inputs, y, config, seed=13,
          trainable=ens.combiner.parameters())
    assert np.all(ens.wk_stack.layers[0].W == 0.0)  # stayed frozen

    ens_inputs = M.featurize("ensemble", [t.triple for t in test], emb=emb,
                             features=provider, schema=SCHEMA, config=config)
    ens_acc = float(np.mean(M.predict_labels(ens, ens_inputs)
                            == [t.label for t in test]))
    assert abs(ens_acc - nn_acc) <= 0.02


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["lr", "nn", "wk", "ensemble"])
def test_save_load_round_trip(tmp_path, kind):
    triples, profiles, emb = toy_world(n=24, seed=14)
    model, _ = M.train_classifier(kind, triples, SMALL, seed=9, emb=emb,
                                  features=profiles, schema=SCHEMA)
    M.save_model(model, tmp_path / kind, SMALL)
    loaded, config = M.load_model(tmp_path / kind)
    assert loaded.kind == kind
    inputs = M.featurize(kind, [t.triple for t in triples], emb=emb,
                         features=profiles, schema=SCHEMA, config=SMALL)
    if kind == "ensemble":
        a = model.predict_proba(inputs)
        b = loaded.predict_proba(inputs)
    else:
        a = model.predict_proba(inputs)
        b = loaded.predict_proba(inputs)
    assert np.array_equal(a, b)


def test_save_load_random_model(tmp_path):
    model, _ = M.train_classifier("random", [LabeledTriple(("a", "v", "b"), 1)],
                                  SMALL, seed=17)
    M.save_model(model, tmp_path / "rnd", SMALL)
    loaded, _ = M.load_model(tmp_path / "rnd")
    assert np.array_equal(model.predict_labels(20, salt=0),
                          loaded.predict_labels(20, salt=0))


def test_save_load_fine_tuned_round_trip(tmp_path):
    triples, _, emb = toy_world(n=16, seed=19)
    config = M.ModelConfig(hidden_nn=6, fine_tune_embeddings=True,
                           batch_size=8, max_epochs=20, patience=20)
    model, _ = M.train_classifier("nn", triples, config, seed=4, emb=emb)
    M.save_model(model, tmp_path / "ft", config)
    loaded, _ = M.load_model(tmp_path / "ft")
    assert loaded.word_input is not None
    assert loaded.word_input.words == model.word_input.words
    t = triples[0].triple
    assert M.predict_nn(loaded, t, emb) == M.predict_nn(model, t, emb)
