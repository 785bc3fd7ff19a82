"""Learning pair-level attribute labels from a small annotated fraction.

A pair (a, b) is represented by [vec(a); vec(b); vec(a) - vec(b)]; the
difference block carries the antisymmetry the relative labels have. Three
propagators are available: one-vs-rest logistic regression, an all-threshold
cumulative-link ordinal regressor, and transductive label spreading on a
cosine kNN graph. A provider wraps a trained propagator so classifier
training can consume gold attribute encodings where annotated and predicted
ones elsewhere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.linear_model import LogisticRegression
from sklearn.multiclass import OneVsRestClassifier

from .embeddings import EmbeddingTable
from .errors import ValidationError
from .seeding import derive_seed
from .wk_features import (
    FeatureSchema,
    NounProfile,
    PairFeatures,
    bin_diff,
    pair_features,
    three_level,
)

logger = logging.getLogger(__name__)

PROP_METHODS = ("lr", "ordinal", "spread")


# ---------------------------------------------------------------------------
# Pair dataset
# ---------------------------------------------------------------------------

@dataclass
class PairDataset:
    """Noun pairs with per-feature labels under one or both schemes."""

    pairs: list[tuple[str, str]]
    X: np.ndarray  # (n, 3*dim)
    labels: dict[str, dict[str, np.ndarray]]  # scheme -> feature -> values
    value_ranges: dict[str, dict[str, tuple[int, int]]]  # scheme -> feature -> (lo, hi)

    @property
    def n(self) -> int:
        return len(self.pairs)

    def features(self, scheme: str) -> list[str]:
        if scheme not in self.labels:
            raise ValidationError(f"no labels for scheme {scheme!r}")
        return list(self.labels[scheme])

    def n_classes(self, scheme: str, feature: str) -> int:
        lo, hi = self.value_ranges[scheme][feature]
        return hi - lo + 1

    def class_index(self, scheme: str, feature: str, values: np.ndarray) -> np.ndarray:
        lo, _ = self.value_ranges[scheme][feature]
        return np.asarray(values) - lo

    def index_value(self, scheme: str, feature: str, idx: np.ndarray) -> np.ndarray:
        lo, _ = self.value_ranges[scheme][feature]
        return np.asarray(idx) + lo


def pair_matrix(pairs: Sequence[tuple[str, str]], emb: EmbeddingTable) -> np.ndarray:
    """Design rows [vec(a); vec(b); vec(a) - vec(b)]."""
    d = emb.dim
    out = np.empty((len(pairs), 3 * d), dtype=np.float64)
    for i, (a, b) in enumerate(pairs):
        va, vb = emb.vector(a), emb.vector(b)
        out[i, :d] = va
        out[i, d : 2 * d] = vb
        out[i, 2 * d :] = va - vb
    return out


def scheme_ranges(schema: FeatureSchema, scheme: str) -> dict[str, tuple[int, int]]:
    if scheme == "three_level":
        return {f: (-1, 1) for f in schema.features}
    if scheme == "bin_diff":
        return {f: (-(schema.n_bins(f) - 1), schema.n_bins(f) - 1) for f in schema.features}
    raise ValidationError(f"unknown scheme {scheme!r}")


def sample_pairs(
    profiles: Mapping[str, NounProfile],
    n: int,
    seed: int,
    emb: EmbeddingTable,
    schema: FeatureSchema,
) -> PairDataset:
    """Sample n distinct unordered noun pairs and label them from gold bins.

    Pairs are stored in canonical alphabetical orientation and labeled under
    both schemes; sampling is uniform without replacement and deterministic
    per seed.
    """
    nouns = sorted(profiles)
    if len(nouns) < 2:
        raise ValidationError("need at least 2 profiled nouns")
    universe = list(combinations(nouns, 2))
    if n > len(universe):
        raise ValidationError(
            f"requested {n} pairs but only {len(universe)} distinct pairs exist"
        )
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(universe), size=n, replace=False)
    pairs = [universe[i] for i in picked]
    labels: dict[str, dict[str, np.ndarray]] = {}
    for scheme, fn in (("three_level", three_level), ("bin_diff", bin_diff)):
        labels[scheme] = {
            f: np.array([fn(profiles[a], profiles[b], f) for a, b in pairs],
                        dtype=np.int64)
            for f in schema.features
        }
    return PairDataset(
        pairs=pairs,
        X=pair_matrix(pairs, emb),
        labels=labels,
        value_ranges={s: scheme_ranges(schema, s) for s in ("three_level", "bin_diff")},
    )


def load_pair_file(path, emb: EmbeddingTable, scheme: str = "three_level") -> PairDataset:
    """Ingest external pair annotations: `a TAB b TAB feature TAB value` rows.

    Values must already be in the named scheme (3-level for the usual
    externally published pair data). Pairs keep their file orientation.
    """
    from pathlib import Path

    from .errors import ParseError

    path = Path(path)
    rows: list[tuple[str, str, str, int]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(
                    f"expected `a TAB b TAB feature TAB value`, got {len(parts)} columns",
                    path=path, line=lineno,
                )
            try:
                value = int(parts[3])
            except ValueError:
                raise ParseError(f"unreadable value {parts[3]!r}", path=path,
                                 line=lineno) from None
            rows.append((parts[0].strip().lower(), parts[1].strip().lower(),
                         parts[2].strip(), value))
    if not rows:
        raise ParseError("no entries", path=path)
    features = sorted({r[2] for r in rows})
    by_pair: dict[tuple[str, str], dict[str, int]] = {}
    for a, b, f, v in rows:
        by_pair.setdefault((a, b), {})[f] = v
    pairs = [p for p, fs in by_pair.items() if all(f in fs for f in features)]
    dropped = len(by_pair) - len(pairs)
    if dropped:
        logger.warning("dropped %d pairs lacking some feature", dropped)
    labels = {
        scheme: {
            f: np.array([by_pair[p][f] for p in pairs], dtype=np.int64)
            for f in features
        }
    }
    lo = min(min(arr) for arr in labels[scheme].values())
    hi = max(max(arr) for arr in labels[scheme].values())
    if scheme == "three_level":
        # keep the full value range even when extremes are unobserved
        lo, hi = min(lo, -1), max(hi, 1)
    ranges = {scheme: {f: (int(lo), int(hi)) for f in features}}
    return PairDataset(pairs=pairs, X=pair_matrix(pairs, emb), labels=labels,
                       value_ranges=ranges)


def split_fraction(
    ds_or_n,
    fraction: float,
    seed: int,
    labels: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into a `fraction` train part and the remaining test part.

    With a label array the split is stratified per class (largest-remainder
    rounding); if any class would be absent from the train side, falls back
    to a simple random split with a warning.
    """
    n = ds_or_n.n if isinstance(ds_or_n, PairDataset) else int(ds_or_n)
    if not 0 < fraction < 1:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    n_train = int(round(fraction * n))
    if n_train < 1 or n_train >= n:
        raise ValidationError(f"fraction {fraction} leaves an empty split for n={n}")
    rng = np.random.default_rng(seed)
    if labels is not None:
        labels = np.asarray(labels)
        classes, counts = np.unique(labels, return_counts=True)
        quotas = fraction * counts
        base = np.floor(quotas).astype(int)
        remainder = n_train - base.sum()
        if remainder > 0:
            order = np.argsort(-(quotas - base), kind="stable")
            base[order[:remainder]] += 1
        if np.any(base == 0) or np.any(base >= counts):
            logger.warning("stratified split impossible; using simple random split")
        else:
            train_parts = []
            for cls, take in zip(classes, base):
                rows = np.flatnonzero(labels == cls)
                train_parts.append(rng.permutation(rows)[:take])
            train_idx = np.sort(np.concatenate(train_parts))
            mask = np.ones(n, dtype=bool)
            mask[train_idx] = False
            return train_idx, np.flatnonzero(mask)
    perm = rng.permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# ---------------------------------------------------------------------------
# Propagators
# ---------------------------------------------------------------------------

class LrPairClassifier:
    """One-vs-rest logistic regression over the pair design rows."""

    def __init__(self, c: float = 1.0, max_iter: int = 1000):
        self._template = lambda: OneVsRestClassifier(
            LogisticRegression(C=c, max_iter=max_iter, solver="lbfgs")
        )
        self._clf = None
        self._single_class = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LrPairClassifier":
        classes = np.unique(y)
        if len(classes) < 2:
            logger.warning("single-class training labels; using a constant predictor")
            self._single_class = int(classes[0])
            return self
        self._clf = self._template()
        self._clf.fit(X, y)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self._single_class is not None:
            return np.full(X.shape[0], self._single_class, dtype=np.int64)
        if self._clf is None:
            raise ValidationError("classifier is not fitted")
        return self._clf.predict(X).astype(np.int64)


class OrdinalPairClassifier:
    """All-threshold cumulative-link logistic regression.

    Models P(y <= c) = sigmoid(theta_c - w.x) with strictly increasing
    thresholds kept ordered through a positive-increment reparameterization
    (theta_0 free, theta_c = theta_{c-1} + exp(gap_c)), and maximizes the
    all-threshold likelihood by full-batch Adam. Class labels are 0-based
    and the class count is fixed up front so unseen extreme classes keep a
    slot on the scale.
    """

    def __init__(self, n_classes: int, lr: float = 0.05, n_iter: int = 500,
                 l2: float = 1e-4):
        if n_classes < 2:
            raise ValidationError("ordinal regression needs at least 2 classes")
        self.n_classes = n_classes
        self.lr = lr
        self.n_iter = n_iter
        self.l2 = l2
        self.w: np.ndarray | None = None
        self._theta_params: np.ndarray | None = None

    # -- threshold reparameterization ------------------------------------
    def _thetas(self, params: np.ndarray) -> np.ndarray:
        gaps = np.exp(params[1:])
        return params[0] + np.concatenate([[0.0], np.cumsum(gaps)])

    def thresholds(self) -> np.ndarray:
        if self._theta_params is None:
            raise ValidationError("classifier is not fitted")
        return self._thetas(self._theta_params)

    def _loss_grads(self, X, y, w, theta_params):
        n, _ = X.shape
        z = X @ w
        theta = self._thetas(theta_params)  # (C-1,)
        # sign s_ic = +1 where y_i <= c else -1
        c_grid = np.arange(self.n_classes - 1)
        s = np.where(y[:, None] <= c_grid[None, :], 1.0, -1.0)
        margin = s * (theta[None, :] - z[:, None])
        # loss = mean softplus(-margin); d/dmargin = -sigmoid(-margin)
        loss = float(np.mean(np.sum(
            np.maximum(-margin, 0.0) + np.log1p(np.exp(-np.abs(margin))), axis=1
        )))
        sig = 1.0 / (1.0 + np.exp(np.clip(margin, -500, 500)))
        dmargin = -sig / n
        dtheta = (dmargin * s).sum(axis=0)
        dz = -(dmargin * s).sum(axis=1)
        dw = X.T @ dz + self.l2 * w
        loss += 0.5 * self.l2 * float(w @ w)
        # chain thresholds back through the increment parameterization
        dparams = np.empty_like(theta_params)
        dparams[0] = dtheta.sum()
        rev_cum = np.cumsum(dtheta[::-1])[::-1]
        dparams[1:] = rev_cum[1:] * np.exp(theta_params[1:])
        return loss, dw, dparams

    def fit(self, X: np.ndarray, y: np.ndarray) -> "OrdinalPairClassifier":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if np.any((y < 0) | (y >= self.n_classes)):
            raise ValidationError("labels out of [0, n_classes)")
        w = np.zeros(X.shape[1])
        # start at the intercept-only solution: thresholds at the logits of
        # the empirical cumulative marginals (so w = 0 already predicts the
        # majority class and training can only improve the likelihood)
        n = len(y)
        counts = np.bincount(y, minlength=self.n_classes)
        cum = np.cumsum(counts)[:-1] / n
        cum = np.clip(cum, 1.0 / (n + 1), 1.0 - 1.0 / (n + 1))
        theta0 = np.log(cum / (1.0 - cum))
        if self.n_classes == 2:
            theta_params = np.array([theta0[0]])
        else:
            gaps = np.maximum(np.diff(theta0), 1e-3)
            theta_params = np.concatenate([[theta0[0]], np.log(gaps)])
        mw = np.zeros_like(w)
        vw = np.zeros_like(w)
        mt = np.zeros_like(theta_params)
        vt = np.zeros_like(theta_params)
        b1, b2, eps = 0.9, 0.999, 1e-8
        for t in range(1, self.n_iter + 1):
            _, dw, dt = self._loss_grads(X, y, w, theta_params)
            mw = b1 * mw + (1 - b1) * dw
            vw = b2 * vw + (1 - b2) * dw * dw
            mt = b1 * mt + (1 - b1) * dt
            vt = b2 * vt + (1 - b2) * dt * dt
            w -= self.lr * (mw / (1 - b1 ** t)) / (np.sqrt(vw / (1 - b2 ** t)) + eps)
            theta_params -= self.lr * (mt / (1 - b1 ** t)) / (
                np.sqrt(vt / (1 - b2 ** t)) + eps
            )
        self.w = w
        self._theta_params = theta_params
        return self

    def class_probs(self, X: np.ndarray) -> np.ndarray:
        if self.w is None:
            raise ValidationError("classifier is not fitted")
        z = np.asarray(X, dtype=np.float64) @ self.w
        theta = self.thresholds()
        cum = 1.0 / (1.0 + np.exp(-(theta[None, :] - z[:, None])))
        cum = np.concatenate(
            [np.zeros((len(z), 1)), cum, np.ones((len(z), 1))], axis=1
        )
        return np.diff(cum, axis=1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.class_probs(X), axis=1).astype(np.int64)


@dataclass(frozen=True)
class SpreadConfig:
    k: int = 10
    alpha: float = 0.9
    max_iter: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")


def knn_similarity_graph(X: np.ndarray, k: int, chunk: int = 512) -> sp.csr_matrix:
    """Symmetric-normalized cosine kNN graph D^-1/2 W D^-1/2.

    Edge weights are cosine similarities clipped at zero; the kNN edge set is
    symmetrized by taking the elementwise maximum with its transpose.
    """
    n = X.shape[0]
    if n < 2:
        raise ValidationError("graph needs at least 2 nodes")
    k = min(k, n - 1)
    norms = np.linalg.norm(X, axis=1)
    norms[norms == 0] = 1.0
    Xn = X / norms[:, None]
    rows, cols, vals = [], [], []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        sims = Xn[start:stop] @ Xn.T
        for local, i in enumerate(range(start, stop)):
            sims[local, i] = -np.inf  # no self loops
        top = np.argpartition(sims, -k, axis=1)[:, -k:]
        for local, i in enumerate(range(start, stop)):
            for j in top[local]:
                w = max(float(sims[local, j]), 0.0)
                if w > 0.0:
                    rows.append(i)
                    cols.append(int(j))
                    vals.append(w)
    W = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    W = W.maximum(W.T)
    deg = np.asarray(W.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    D = sp.diags(inv_sqrt)
    return (D @ W @ D).tocsr()


def label_spread(
    S: sp.csr_matrix,
    labeled_idx: np.ndarray,
    y_labeled: np.ndarray,
    n_classes: int,
    cfg: SpreadConfig = SpreadConfig(),
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Iterate F <- alpha*S*F + (1-alpha)*Y to (near) its fixed point.

    Returns (labels, F, iterations, converged). Nodes that never receive any
    mass (unreachable from every labeled node) get the majority seed label,
    with a warning.
    """
    n = S.shape[0]
    labeled_idx = np.asarray(labeled_idx)
    y_labeled = np.asarray(y_labeled, dtype=np.int64)
    Y = np.zeros((n, n_classes), dtype=np.float64)
    Y[labeled_idx, y_labeled] = 1.0
    F = Y.copy()
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        F_next = cfg.alpha * (S @ F) + (1.0 - cfg.alpha) * Y
        delta = float(np.max(np.abs(F_next - F)))
        F = F_next
        if delta < cfg.tol:
            converged = True
            break
    if not converged:
        logger.warning("label spreading stopped at %d iterations without converging", it)
    mass = F.sum(axis=1)
    labels = np.argmax(F, axis=1).astype(np.int64)
    dry = mass <= 0.0
    if np.any(dry):
        counts = np.bincount(y_labeled, minlength=n_classes)
        majority = int(np.argmax(counts))
        labels[dry] = majority
        logger.warning("%d nodes unreachable from labels; assigned majority class",
                       int(dry.sum()))
    return labels, F, it, converged


def spread_closed_form(
    S: np.ndarray | sp.spmatrix,
    labeled_idx: np.ndarray,
    y_labeled: np.ndarray,
    n_classes: int,
    alpha: float,
) -> np.ndarray:
    """Direct fixed point (1-alpha)(I - alpha*S)^-1 Y for small graphs."""
    Sd = S.toarray() if sp.issparse(S) else np.asarray(S)
    n = Sd.shape[0]
    Y = np.zeros((n, n_classes), dtype=np.float64)
    Y[np.asarray(labeled_idx), np.asarray(y_labeled, dtype=np.int64)] = 1.0
    return (1.0 - alpha) * np.linalg.solve(np.eye(n) - alpha * Sd, Y)


# ---------------------------------------------------------------------------
# Benchmark entry points: fit on the labeled fraction, score the rest
# ---------------------------------------------------------------------------

class _ConstantClassifier:
    def __init__(self, label: int):
        self.label = label

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], self.label, dtype=np.int64)


def with_majority_floor(model, X_train: np.ndarray, y_train: np.ndarray):
    """Replace a fit that loses to the constant-majority predictor on its own
    training data (possible on signal-free features, where likelihood training
    trades 0/1 accuracy for calibration)."""
    counts = np.bincount(y_train)
    majority = int(np.argmax(counts))
    fit_acc = float(np.mean(model.predict(X_train) == y_train))
    if fit_acc < counts[majority] / len(y_train):
        logger.info("fitted model below the majority baseline; using the constant")
        return _ConstantClassifier(majority)
    return model


@dataclass
class PropagationResult:
    method: str
    scheme: str
    per_feature: dict[str, float]
    mean_accuracy: float


def _evaluate(ds: PairDataset, scheme: str, predict_feature) -> PropagationResult:
    accs: dict[str, float] = {}
    for f in ds.features(scheme):
        accs[f] = predict_feature(f)
    return PropagationResult(
        method="", scheme=scheme, per_feature=accs,
        mean_accuracy=float(np.mean(list(accs.values()))),
    )


def fit_predict_lr(
    ds: PairDataset, train_idx: np.ndarray, test_idx: np.ndarray, scheme: str
) -> PropagationResult:
    """Per-feature one-vs-rest LR accuracy on the held-out pairs."""
    def one(f: str) -> float:
        y = ds.class_index(scheme, f, ds.labels[scheme][f])
        clf = LrPairClassifier().fit(ds.X[train_idx], y[train_idx])
        clf = with_majority_floor(clf, ds.X[train_idx], y[train_idx])
        return float(np.mean(clf.predict(ds.X[test_idx]) == y[test_idx]))

    res = _evaluate(ds, scheme, one)
    res.method = "lr"
    return res


def fit_predict_ordinal(
    ds: PairDataset, train_idx: np.ndarray, test_idx: np.ndarray, scheme: str
) -> PropagationResult:
    """Per-feature cumulative-link ordinal accuracy on the held-out pairs."""
    def one(f: str) -> float:
        y = ds.class_index(scheme, f, ds.labels[scheme][f])
        clf = OrdinalPairClassifier(ds.n_classes(scheme, f))
        clf.fit(ds.X[train_idx], y[train_idx])
        clf = with_majority_floor(clf, ds.X[train_idx], y[train_idx])
        return float(np.mean(clf.predict(ds.X[test_idx]) == y[test_idx]))

    res = _evaluate(ds, scheme, one)
    res.method = "ordinal"
    return res


def fit_predict_spread(
    ds: PairDataset,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    scheme: str,
    cfg: SpreadConfig = SpreadConfig(),
    graph: sp.csr_matrix | None = None,
) -> PropagationResult:
    """Transductive label-spreading accuracy on the held-out pairs."""
    S = graph if graph is not None else knn_similarity_graph(ds.X, cfg.k)

    def one(f: str) -> float:
        y = ds.class_index(scheme, f, ds.labels[scheme][f])
        labels, _, _, _ = label_spread(S, train_idx, y[train_idx],
                                       ds.n_classes(scheme, f), cfg)
        counts = np.bincount(y[train_idx])
        majority = int(np.argmax(counts))
        if np.mean(labels[train_idx] == y[train_idx]) < counts[majority] / len(train_idx):
            labels = np.full_like(labels, majority)
        return float(np.mean(labels[test_idx] == y[test_idx]))

    res = _evaluate(ds, scheme, one)
    res.method = "spread"
    return res


# ---------------------------------------------------------------------------
# Provider: gold where annotated, predicted elsewhere
# ---------------------------------------------------------------------------

class PropagatedPairFeatures:
    """Pair-feature source mixing gold annotations with propagated labels.

    Gold values come straight from the noun profiles for pairs inside the
    annotated fraction; everything else is predicted by the trained
    propagator on the ordered pair's design row. Use ``prepare`` to batch
    the queries (required for the transductive spread method).
    """

    def __init__(self, method: str, scheme: str, schema: FeatureSchema,
                 profiles: Mapping[str, NounProfile], emb: EmbeddingTable,
                 gold_pairs: set[tuple[str, str]],
                 models: dict[str, object] | None,
                 pair_ds: PairDataset, gold_idx: np.ndarray,
                 spread_cfg: SpreadConfig = SpreadConfig(),
                 all_gold: bool = False):
        self.method = method
        self.scheme = scheme
        self.schema = schema
        self.profiles = profiles
        self.emb = emb
        self.gold_pairs = gold_pairs
        self.models = models
        self.pair_ds = pair_ds
        self.gold_idx = gold_idx
        self.spread_cfg = spread_cfg
        self.all_gold = all_gold
        self._cache: dict[tuple[str, str], PairFeatures] = {}

    def _canonical(self, s: str, o: str) -> tuple[str, str]:
        return (s, o) if s <= o else (o, s)

    def provenance(self, s: str, o: str) -> str:
        if self.all_gold:
            return "gold"
        return "gold" if self._canonical(s, o) in self.gold_pairs else "predicted"

    def get(self, s: str, o: str, scheme: str) -> PairFeatures:
        if scheme != self.scheme:
            raise ValidationError(
                f"provider was trained for scheme {self.scheme!r}, asked for {scheme!r}"
            )
        if self.provenance(s, o) == "gold":
            return pair_features(self.profiles[s], self.profiles[o], scheme, self.schema)
        cached = self._cache.get((s, o))
        if cached is not None:
            return cached
        if self.method == "spread":
            raise ValidationError(
                "spread provider answers only prepared pairs; call prepare() first"
            )
        self.prepare([(s, o)])
        return self._cache[(s, o)]

    def prepare(self, ordered_pairs: Sequence[tuple[str, str]]) -> None:
        """Predict and cache features for every non-gold pair in the list."""
        todo = [p for p in dict.fromkeys(ordered_pairs)
                if p not in self._cache and self.provenance(*p) == "predicted"]
        if not todo:
            return
        X = pair_matrix(todo, self.emb)
        ranges = scheme_ranges(self.schema, self.scheme)
        values: dict[str, np.ndarray] = {}
        S = None
        if self.method == "spread":
            # the graph depends only on the pair geometry, not the feature
            S = knn_similarity_graph(np.vstack([self.pair_ds.X, X]),
                                     self.spread_cfg.k)
        for f in self.schema.features:
            lo, _ = ranges[f]
            if self.method == "spread":
                y_all = self.pair_ds.class_index(
                    self.scheme, f, self.pair_ds.labels[self.scheme][f]
                )
                labels, _, _, _ = label_spread(
                    S, self.gold_idx, y_all[self.gold_idx],
                    self.pair_ds.n_classes(self.scheme, f), self.spread_cfg,
                )
                values[f] = labels[self.pair_ds.n :] + lo
            else:
                clf = self.models[f]
                values[f] = clf.predict(X) + lo
        for i, p in enumerate(todo):
            self._cache[p] = PairFeatures(
                scheme=self.scheme,
                values={f: int(values[f][i]) for f in self.schema.features},
            )


def propagate_profiles(
    profiles: Mapping[str, NounProfile],
    method: str,
    scheme: str,
    fraction: float,
    seed: int,
    emb: EmbeddingTable,
    schema: FeatureSchema,
    n_pairs: int = 10_000,
    pair_ds: PairDataset | None = None,
    spread_cfg: SpreadConfig = SpreadConfig(),
) -> PropagatedPairFeatures:
    """Train a propagator on a seeded fraction of pair annotations.

    The pair universe defaults to a fresh sample from the profiled nouns
    (capped at the number of distinct pairs); the annotated fraction is a
    seeded split of it.
    """
    if method not in PROP_METHODS:
        raise ValidationError(f"method must be one of {PROP_METHODS}, got {method!r}")
    if pair_ds is None:
        max_pairs = len(profiles) * (len(profiles) - 1) // 2
        pair_ds = sample_pairs(profiles, min(n_pairs, max_pairs),
                               derive_seed(seed, "pair-universe"), emb, schema)
    if fraction >= 1.0:
        # degenerate case: everything is annotated, nothing to propagate
        return PropagatedPairFeatures(
            method=method, scheme=scheme, schema=schema, profiles=profiles, emb=emb,
            gold_pairs=set(pair_ds.pairs), models=None, pair_ds=pair_ds,
            gold_idx=np.arange(pair_ds.n), spread_cfg=spread_cfg, all_gold=True,
        )
    gold_idx, _ = split_fraction(pair_ds, fraction, derive_seed(seed, "gold-split"))
    gold_pairs = {pair_ds.pairs[i] for i in gold_idx}

    models: dict[str, object] | None = None
    if method in ("lr", "ordinal"):
        models = {}
        for f in schema.features:
            y = pair_ds.class_index(scheme, f, pair_ds.labels[scheme][f])
            if method == "lr":
                clf = LrPairClassifier().fit(pair_ds.X[gold_idx], y[gold_idx])
            else:
                clf = OrdinalPairClassifier(pair_ds.n_classes(scheme, f))
                clf.fit(pair_ds.X[gold_idx], y[gold_idx])
            models[f] = with_majority_floor(clf, pair_ds.X[gold_idx], y[gold_idx])
    return PropagatedPairFeatures(
        method=method, scheme=scheme, schema=schema, profiles=profiles, emb=emb,
        gold_pairs=gold_pairs, models=models, pair_ds=pair_ds, gold_idx=gold_idx,
        spread_cfg=spread_cfg,
    )
