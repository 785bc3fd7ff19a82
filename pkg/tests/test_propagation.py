import numpy as np
import pytest

from helpers import random_profiles
from semplaus import propagation as P
from semplaus.embeddings import EmbeddingTable
from semplaus.errors import ValidationError
from semplaus.wk_features import FeatureSchema, bin_diff, pair_features, three_level

SCHEMA = FeatureSchema.default()


def make_emb(words, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(dim, {w: rng.normal(size=dim) for w in words})


@pytest.fixture(scope="module")
def pair_world():
    profiles = random_profiles(24, seed=13)
    emb = make_emb(sorted(profiles), dim=6, seed=2)
    ds = P.sample_pairs(profiles, 150, seed=5, emb=emb, schema=SCHEMA)
    return profiles, emb, ds


# ---------------------------------------------------------------------------
# sample_pairs
# ---------------------------------------------------------------------------

def test_sample_pairs_count_and_uniqueness(pair_world):
    _, _, ds = pair_world
    assert ds.n == 150
    assert len(set(ds.pairs)) == 150
    for a, b in ds.pairs:
        assert a < b  # canonical orientation
    for scheme in ("three_level", "bin_diff"):
        assert set(ds.labels[scheme]) == set(SCHEMA.features)


def test_sample_pairs_labels_match_recompute(pair_world):
    profiles, _, ds = pair_world
    for i, (a, b) in enumerate(ds.pairs):
        for f in SCHEMA.features:
            assert ds.labels["bin_diff"][f][i] == bin_diff(profiles[a], profiles[b], f)
            assert ds.labels["three_level"][f][i] == three_level(profiles[a],
                                                                profiles[b], f)


def test_sample_pairs_single_pair():
    profiles = random_profiles(2, seed=1)
    emb = make_emb(sorted(profiles))
    ds = P.sample_pairs(profiles, 1, seed=0, emb=emb, schema=SCHEMA)
    assert ds.pairs == [("noun0", "noun1")]


def test_sample_pairs_overdraw():
    profiles = random_profiles(5, seed=1)
    emb = make_emb(sorted(profiles))
    with pytest.raises(ValidationError, match="only 10"):
        P.sample_pairs(profiles, 11, seed=0, emb=emb, schema=SCHEMA)


def test_sample_pairs_deterministic(pair_world):
    profiles, emb, ds = pair_world
    again = P.sample_pairs(profiles, 150, seed=5, emb=emb, schema=SCHEMA)
    assert again.pairs == ds.pairs
    assert again.X.tobytes() == ds.X.tobytes()


def test_pair_matrix_blocks(pair_world):
    profiles, emb, ds = pair_world
    a, b = ds.pairs[0]
    row = ds.X[0]
    d = emb.dim
    assert np.array_equal(row[:d], emb.vector(a))
    assert np.array_equal(row[d:2 * d], emb.vector(b))
    assert np.array_equal(row[2 * d:], emb.vector(a) - emb.vector(b))


# ---------------------------------------------------------------------------
# split_fraction
# ---------------------------------------------------------------------------

def test_split_fraction_sizes():
    tr, te = P.split_fraction(10_000, 0.05, seed=1)
    assert len(tr) == 500 and len(te) == 9_500
    tr, te = P.split_fraction(10_000, 0.20, seed=1)
    assert len(tr) == 2_000 and len(te) == 8_000


def test_split_fraction_partition():
    tr, te = P.split_fraction(321, 0.2, seed=9)
    assert not set(tr) & set(te)
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(321))


def test_split_fraction_stratified():
    labels = np.array([0] * 50 + [1] * 30 + [2] * 20)
    tr, _ = P.split_fraction(100, 0.2, seed=3, labels=labels)
    counts = np.bincount(labels[tr], minlength=3)
    assert counts.tolist() == [10, 6, 4]


def test_split_fraction_stratified_fallback(caplog):
    labels = np.array([0] * 99 + [1])  # the singleton class cannot be split
    with caplog.at_level("WARNING"):
        tr, te = P.split_fraction(100, 0.2, seed=3, labels=labels)
    assert "simple random" in caplog.text
    assert len(tr) == 20


def test_split_fraction_rejects_degenerate():
    with pytest.raises(ValidationError):
        P.split_fraction(10, 0.0, seed=0)
    with pytest.raises(ValidationError):
        P.split_fraction(10, 1.0, seed=0)
    with pytest.raises(ValidationError):
        P.split_fraction(3, 0.05, seed=0)


# ---------------------------------------------------------------------------
# ordinal regression
# ---------------------------------------------------------------------------

def _ordered_1d(n=400, n_classes=5, seed=0, noise=0.05, slope=1.7):
    """Spec-style oracle data: y = digitize(w*x + noise) on a 1-D input."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3.0, 3.0, size=n)
    z = slope * x + rng.normal(0.0, noise, size=n)
    edges = np.quantile(z, np.linspace(0, 1, n_classes + 1)[1:-1])
    y = np.digitize(z, edges)
    return x[:, None], y


def test_ordinal_high_accuracy_on_ordered_data():
    X, y = _ordered_1d()
    clf = P.OrdinalPairClassifier(5, n_iter=500)
    clf.fit(X[:300], y[:300])
    acc = float(np.mean(clf.predict(X[300:]) == y[300:]))
    assert acc >= 0.95


def test_ordinal_tracks_bayes_on_multivariate_data():
    # noisy multi-dim labels: the fit should land within 0.05 of the
    # noise-free oracle predictor, computed here independently
    rng = np.random.default_rng(0)
    w_true = rng.normal(size=4)
    X = rng.normal(size=(400, 4))
    z_true = X @ w_true
    z = z_true + rng.normal(0.0, 0.1, size=400)
    edges = np.quantile(z, np.linspace(0, 1, 6)[1:-1])
    y = np.digitize(z, edges)
    oracle_acc = float(np.mean(np.digitize(z_true, edges)[300:] == y[300:]))
    clf = P.OrdinalPairClassifier(5, n_iter=500)
    clf.fit(X[:300], y[:300])
    acc = float(np.mean(clf.predict(X[300:]) == y[300:]))
    assert acc >= oracle_acc - 0.05


def test_ordinal_thresholds_strictly_increasing():
    X, y = _ordered_1d(n_classes=7, seed=2)
    clf = P.OrdinalPairClassifier(7, n_iter=200)
    clf.fit(X, y)
    theta = clf.thresholds()
    assert np.all(np.diff(theta) > 0)


def test_ordinal_prediction_monotone_in_score():
    X, y = _ordered_1d(seed=3)
    clf = P.OrdinalPairClassifier(5, n_iter=300)
    clf.fit(X, y)
    scores = X @ clf.w
    order = np.argsort(scores)
    preds = clf.predict(X)[order]
    assert np.all(np.diff(preds) >= 0)


def test_ordinal_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(12, 3))
    y = rng.integers(0, 4, size=12)
    clf = P.OrdinalPairClassifier(4)
    w = rng.normal(size=3) * 0.5
    tp = np.array([-0.5, 0.1, -0.3])
    _, dw, dt = clf._loss_grads(X, y, w, tp)
    eps = 1e-6
    for vec, grad in ((w, dw), (tp, dt)):
        for i in range(len(vec)):
            orig = vec[i]
            vec[i] = orig + eps
            hi, *_ = clf._loss_grads(X, y, w, tp)
            vec[i] = orig - eps
            lo, *_ = clf._loss_grads(X, y, w, tp)
            vec[i] = orig
            num = (hi - lo) / (2 * eps)
            assert grad[i] == pytest.approx(num, rel=1e-4, abs=1e-8)


def test_ordinal_rejects_bad_labels():
    clf = P.OrdinalPairClassifier(3)
    with pytest.raises(ValidationError):
        clf.fit(np.zeros((2, 2)), np.array([0, 3]))
    with pytest.raises(ValidationError):
        P.OrdinalPairClassifier(1)


def test_ordinal_binary_case():
    X, y = _ordered_1d(n_classes=2, seed=5)
    clf = P.OrdinalPairClassifier(2, n_iter=300)
    clf.fit(X[:300], y[:300])
    acc = float(np.mean(clf.predict(X[300:]) == y[300:]))
    assert acc >= 0.95


# ---------------------------------------------------------------------------
# lr pair classifier
# ---------------------------------------------------------------------------

def test_lr_single_class_constant(caplog):
    X = np.random.default_rng(0).normal(size=(10, 3))
    with caplog.at_level("WARNING"):
        clf = P.LrPairClassifier().fit(X, np.zeros(10, dtype=int))
    assert np.all(clf.predict(X) == 0)
    assert "single-class" in caplog.text


def test_lr_separable():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 2))
    y = (X[:, 0] > 0).astype(int)
    clf = P.LrPairClassifier().fit(X, y)
    assert float(np.mean(clf.predict(X) == y)) >= 0.95


# ---------------------------------------------------------------------------
# label spreading
# ---------------------------------------------------------------------------

def _random_graph_setup(n=50, d=5, n_labeled=10, n_classes=3, seed=0, k=5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    S = P.knn_similarity_graph(X, k)
    labeled = rng.choice(n, size=n_labeled, replace=False)
    y = rng.integers(0, n_classes, size=n_labeled)
    return S, labeled, y, n_classes


def test_graph_symmetric_nonnegative():
    S, *_ = _random_graph_setup(seed=3)
    dense = S.toarray()
    assert np.allclose(dense, dense.T)
    assert np.all(dense >= 0)
    # symmetric normalization keeps the spectrum within [-1, 1]
    eigs = np.linalg.eigvalsh(dense)
    assert eigs.max() <= 1.0 + 1e-9


def test_spread_alpha_to_zero_keeps_seed_labels():
    S, labeled, y, C = _random_graph_setup(seed=4)
    cfg = P.SpreadConfig(alpha=0.01, tol=1e-10, max_iter=500)
    labels, _, _, converged = P.label_spread(S, labeled, y, C, cfg)
    assert converged
    assert np.array_equal(labels[labeled], y)


def test_spread_matches_closed_form():
    for seed in range(3):
        S, labeled, y, C = _random_graph_setup(seed=seed)
        cfg = P.SpreadConfig(alpha=0.9, tol=1e-9, max_iter=5000)
        _, F, _, converged = P.label_spread(S, labeled, y, C, cfg)
        assert converged
        F_star = P.spread_closed_form(S, labeled, y, C, 0.9)
        assert np.max(np.abs(F - F_star)) < 1e-6


def test_spread_unreachable_gets_majority(caplog):
    # two 3-node clusters with no cross edges; labels only in the first
    import scipy.sparse as sp

    W = np.zeros((6, 6))
    for i, j in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        W[i, j] = W[j, i] = 1.0
    deg = W.sum(axis=1)
    S = sp.csr_matrix(W / np.sqrt(np.outer(deg, deg)))
    with caplog.at_level("WARNING"):
        labels, _, _, _ = P.label_spread(S, np.array([0, 1]), np.array([1, 1]), 2)
    assert "unreachable" in caplog.text
    assert np.all(labels[3:] == 1)  # majority seed label


def test_spread_nonconvergence_warns(caplog):
    S, labeled, y, C = _random_graph_setup(seed=6)
    cfg = P.SpreadConfig(alpha=0.9, tol=1e-12, max_iter=3)
    with caplog.at_level("WARNING"):
        P.label_spread(S, labeled, y, C, cfg)
    assert "without converging" in caplog.text


# ---------------------------------------------------------------------------
# benchmark entry points
# ---------------------------------------------------------------------------

def test_fit_predict_full_training_beats_majority(pair_world):
    _, _, ds = pair_world
    idx = np.arange(ds.n)
    for scheme in ("three_level", "bin_diff"):
        for fn in (P.fit_predict_lr, P.fit_predict_ordinal, P.fit_predict_spread):
            res = fn(ds, idx, idx, scheme)
            for f, acc in res.per_feature.items():
                y = ds.labels[scheme][f]
                majority = np.max(np.bincount(ds.class_index(scheme, f, y)))
                assert acc >= majority / ds.n - 1e-9, (fn.__name__, scheme, f)


def test_fit_predict_reports_all_features(pair_world):
    _, _, ds = pair_world
    tr, te = P.split_fraction(ds, 0.2, seed=0)
    res = P.fit_predict_lr(ds, tr, te, "three_level")
    assert set(res.per_feature) == set(SCHEMA.features)
    assert res.mean_accuracy == pytest.approx(np.mean(list(res.per_feature.values())))


# ---------------------------------------------------------------------------
# propagated feature provider
# ---------------------------------------------------------------------------

def test_propagate_profiles_full_gold_matches_direct(pair_world):
    profiles, emb, ds = pair_world
    provider = P.propagate_profiles(profiles, "ordinal", "bin_diff", 1.0, seed=3,
                                    emb=emb, schema=SCHEMA, pair_ds=ds)
    nouns = sorted(profiles)
    for s in nouns[:6]:
        for o in nouns[6:12]:
            expected = pair_features(profiles[s], profiles[o], "bin_diff", SCHEMA)
            assert provider.get(s, o, "bin_diff") == expected
            assert provider.provenance(s, o) == "gold"


def test_propagate_profiles_mixes_gold_and_predicted(pair_world):
    profiles, emb, ds = pair_world
    provider = P.propagate_profiles(profiles, "ordinal", "bin_diff", 0.2, seed=3,
                                    emb=emb, schema=SCHEMA, pair_ds=ds)
    gold_pair = ds.pairs[sorted(provider.gold_idx)[0]]
    assert provider.provenance(*gold_pair) == "gold"
    # gold pairs answer with exact profile values, in either orientation
    s, o = gold_pair[1], gold_pair[0]
    assert provider.get(s, o, "bin_diff") == pair_features(
        profiles[s], profiles[o], "bin_diff", SCHEMA)
    provenances = {provider.provenance(a, b) for a, b in ds.pairs}
    assert provenances == {"gold", "predicted"}
    # predicted values stay within the scheme's legal range
    some_predicted = [p for p in ds.pairs if provider.provenance(*p) == "predicted"][:5]
    for a, b in some_predicted:
        pf = provider.get(a, b, "bin_diff")
        for f, v in pf.values.items():
            assert abs(v) <= SCHEMA.n_bins(f) - 1


def test_propagate_profiles_scheme_guard(pair_world):
    profiles, emb, ds = pair_world
    provider = P.propagate_profiles(profiles, "lr", "three_level", 0.2, seed=1,
                                    emb=emb, schema=SCHEMA, pair_ds=ds)
    with pytest.raises(ValidationError, match="scheme"):
        provider.get("noun0", "noun1", "bin_diff")


def test_propagate_profiles_spread_requires_prepare(pair_world):
    profiles, emb, ds = pair_world
    provider = P.propagate_profiles(profiles, "spread", "three_level", 0.2, seed=1,
                                    emb=emb, schema=SCHEMA, pair_ds=ds)
    target = [p for p in ds.pairs if provider.provenance(*p) == "predicted"][0]
    with pytest.raises(ValidationError, match="prepare"):
        provider.get(*target, "three_level")
    provider.prepare([target])
    pf = provider.get(*target, "three_level")
    assert set(pf.values.values()) <= {-1, 0, 1}


def test_propagate_profiles_unknown_method(pair_world):
    profiles, emb, ds = pair_world
    with pytest.raises(ValidationError, match="method"):
        P.propagate_profiles(profiles, "magic", "bin_diff", 0.2, seed=1,
                             emb=emb, schema=SCHEMA, pair_ds=ds)
