"""The plausibility classifiers.

Four model kinds share one training loop:

* ``lr``       - logistic regression over the concatenated word vectors
* ``nn``       - one-hidden-layer net over the same input
* ``wk``       - one-hidden-layer net over subject-object attribute encodings
* ``ensemble`` - the nn and wk hidden vectors concatenated and pushed through
                 an affine -> ReLU -> affine head with a 2-way softmax

``random`` is the seeded coin-flip floor. Binary kinds train on sigmoid
cross-entropy from logits; the ensemble trains on 2-class softmax
cross-entropy. Early stopping watches a held-out slice of the training split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import neural_core as nc
from .corpus import LabeledTriple, Triple
from .embeddings import EmbeddingTable, stack_triples, triple_vector
from .errors import DivergenceError, ValidationError
from .seeding import derive_seed, rng_for
from .wk_features import (
    FeatureSchema,
    NounProfile,
    PairFeatures,
    block_width,
    encode_indices,
    encode_raw_onehot,
    onehot_length,
    pair_features,
)

logger = logging.getLogger(__name__)

MODEL_KINDS = ("random", "lr", "nn", "wk", "ensemble")
INPUT_MODES = ("raw_onehot", "feature_embedding")


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters; defaults are the committed configuration."""

    hidden_nn: int = 100
    hidden_wk: int = 32
    hidden_combiner: int = 32
    feat_dim: int = 16
    scheme: str = "bin_diff"
    input_mode: str = "feature_embedding"
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"
    fine_tune_embeddings: bool = False
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    val_fraction: float = 0.1

    def validate(self) -> None:
        if self.input_mode not in INPUT_MODES:
            raise ValidationError(f"input_mode must be one of {INPUT_MODES}")
        if self.scheme not in ("three_level", "bin_diff"):
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.val_fraction < 1:
            raise ValidationError("val_fraction must lie in [0, 1)")
        for name in ("hidden_nn", "hidden_wk", "hidden_combiner", "feat_dim",
                     "batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# Pair-feature providers
# ---------------------------------------------------------------------------

class GoldPairFeatures:
    """Serves attribute encodings straight from annotated noun profiles."""

    def __init__(self, profiles: Mapping[str, NounProfile], schema: FeatureSchema):
        self.profiles = profiles
        self.schema = schema

    def get(self, s: str, o: str, scheme: str) -> PairFeatures:
        for noun in (s, o):
            if noun not in self.profiles:
                raise ValidationError(f"no attribute profile for noun {noun!r}")
        return pair_features(self.profiles[s], self.profiles[o], scheme, self.schema)

    def provenance(self, s: str, o: str) -> str:
        return "gold"


def as_feature_provider(features, schema: FeatureSchema):
    """Accept either a provider or a plain profiles mapping."""
    if features is None:
        raise ValidationError("this model kind needs pair features")
    if hasattr(features, "get") and hasattr(features, "provenance"):
        return features
    return GoldPairFeatures(features, schema)


# ---------------------------------------------------------------------------
# Trainable embedding inputs
# ---------------------------------------------------------------------------

class FeatureEmbeddingInput:
    """One trainable table per attribute; rows are selected by value index."""

    def __init__(self, tables: list[np.ndarray]):
        self.tables = tables

    @classmethod
    def build(cls, schema: FeatureSchema, scheme: str, feat_dim: int, seed: int):
        rng = np.random.default_rng(seed)
        tables = [
            nc.glorot_uniform(rng, block_width(schema, f, scheme), feat_dim)
            for f in schema.features
        ]
        return cls(tables)

    @property
    def out_dim(self) -> int:
        return sum(t.shape[1] for t in self.tables)

    def forward(self, idx: np.ndarray) -> np.ndarray:
        return np.concatenate([t[idx[:, j]] for j, t in enumerate(self.tables)], axis=1)

    def backward(self, idx: np.ndarray, dx: np.ndarray) -> list[np.ndarray]:
        grads = [np.zeros_like(t) for t in self.tables]
        start = 0
        for j, t in enumerate(self.tables):
            width = t.shape[1]
            np.add.at(grads[j], idx[:, j], dx[:, start : start + width])
            start += width
        return grads


class TripleEmbeddingInput:
    """Trainable copy of the word vectors, used when fine-tuning is on."""

    def __init__(self, words: list[str], table: np.ndarray):
        self.words = words
        self.index = {w: i for i, w in enumerate(words)}
        self.table = table

    @classmethod
    def from_table(cls, emb: EmbeddingTable, words: Sequence[str]):
        ordered = sorted(set(words))
        table = np.stack([emb.vector(w) for w in ordered])
        return cls(ordered, table)

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def encode(self, triples: Sequence[Triple]) -> np.ndarray:
        out = np.empty((len(triples), 3), dtype=np.int64)
        for i, t in enumerate(triples):
            for j, w in enumerate(t):
                if w not in self.index:
                    raise ValidationError(f"word {w!r} missing from the trainable table")
                out[i, j] = self.index[w]
        return out

    def forward(self, idx: np.ndarray) -> np.ndarray:
        n, d = idx.shape[0], self.dim
        out = np.empty((n, 3 * d), dtype=np.float64)
        for j in range(3):
            out[:, j * d : (j + 1) * d] = self.table[idx[:, j]]
        return out

    def backward(self, idx: np.ndarray, dx: np.ndarray) -> np.ndarray:
        grad = np.zeros_like(self.table)
        d = self.dim
        for j in range(3):
            np.add.at(grad, idx[:, j], dx[:, j * d : (j + 1) * d])
        return grad


# ---------------------------------------------------------------------------
# Model inputs
# ---------------------------------------------------------------------------

@dataclass
class ModelInputs:
    """Featurized design arrays for a list of triples."""

    x_nn: np.ndarray | None = None   # (n, 3*dim), frozen word vectors
    nn_idx: np.ndarray | None = None  # (n, 3), fine-tuning word rows
    wk_raw: np.ndarray | None = None  # (n, onehot width)
    wk_idx: np.ndarray | None = None  # (n, n_features)

    @property
    def n(self) -> int:
        for arr in (self.x_nn, self.nn_idx, self.wk_raw, self.wk_idx):
            if arr is not None:
                return arr.shape[0]
        raise ValidationError("empty model inputs")

    def take(self, rows: np.ndarray) -> "ModelInputs":
        pick = lambda a: None if a is None else a[rows]
        return ModelInputs(
            x_nn=pick(self.x_nn),
            nn_idx=pick(self.nn_idx),
            wk_raw=pick(self.wk_raw),
            wk_idx=pick(self.wk_idx),
        )


def wk_encode_triples(
    triples: Sequence[Triple],
    provider,
    schema: FeatureSchema,
    scheme: str,
    input_mode: str,
) -> np.ndarray:
    """Attribute encodings for the (subject, object) pair of each triple."""
    if input_mode == "raw_onehot":
        out = np.zeros((len(triples), onehot_length(schema, scheme)), dtype=np.float64)
        for i, (s, _, o) in enumerate(triples):
            out[i] = encode_raw_onehot(provider.get(s, o, scheme), schema)
        return out
    if input_mode == "feature_embedding":
        out = np.empty((len(triples), len(schema.features)), dtype=np.int64)
        for i, (s, _, o) in enumerate(triples):
            out[i] = encode_indices(provider.get(s, o, scheme), schema)
        return out
    raise ValidationError(f"input_mode must be one of {INPUT_MODES}")


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

class RandomModel:
    """Seeded coin flip; the chance floor for the benchmarks."""

    kind = "random"

    def __init__(self, seed: int):
        self.seed = seed

    def predict_labels(self, n: int, salt: object = 0) -> np.ndarray:
        return rng_for(self.seed, "random-pred", salt).integers(0, 2, size=n)


class LrModel:
    """Logistic regression over the concatenated word vectors."""

    kind = "lr"

    def __init__(self, stack: nc.LayerStack):
        self.stack = stack

    @classmethod
    def build(cls, in_dim: int, seed: int) -> "LrModel":
        return cls(nc.init_params([in_dim, 1], ["sigmoid"], derive_seed(seed, "lr")))

    @property
    def weights(self) -> np.ndarray:
        return self.stack.layers[0].W[0]

    @property
    def bias(self) -> float:
        return float(self.stack.layers[0].b[0])

    def parameters(self) -> list[np.ndarray]:
        return self.stack.parameters()

    def named_parameters(self) -> dict[str, np.ndarray]:
        return _stack_named("stack", self.stack)

    def predict_proba(self, inputs: ModelInputs) -> np.ndarray:
        out, _ = nc.forward(self.stack, inputs.x_nn)
        return out[:, 0]

    def loss_grads(self, inputs: ModelInputs, y: np.ndarray):
        _, cache = nc.forward(self.stack, inputs.x_nn)
        loss, dz = nc.sigmoid_xent_from_logits(cache.per_layer[-1].z[:, 0], y)
        sg = nc.backward(self.stack, cache, dz[:, None], from_preactivation=True)
        return loss, sg.parameter_grads()


class NnModel:
    """One-hidden-layer classifier over the triple's word vectors."""

    kind = "nn"

    def __init__(self, stack: nc.LayerStack, word_input: TripleEmbeddingInput | None = None):
        self.stack = stack
        self.word_input = word_input

    @classmethod
    def build(cls, in_dim: int, config: ModelConfig, seed: int,
              word_input: TripleEmbeddingInput | None = None) -> "NnModel":
        stack = nc.init_params(
            [in_dim, config.hidden_nn, 1],
            [config.hidden_activation, config.output_activation],
            derive_seed(seed, "nn"),
        )
        return cls(stack, word_input)

    @property
    def hidden_dim(self) -> int:
        return self.stack.layers[0].fan_out

    def parameters(self) -> list[np.ndarray]:
        params = self.stack.parameters()
        if self.word_input is not None:
            params.append(self.word_input.table)
        return params

    def named_parameters(self) -> dict[str, np.ndarray]:
        named = _stack_named("stack", self.stack)
        if self.word_input is not None:
            named["words.table"] = self.word_input.table
        return named

    def _input_matrix(self, inputs: ModelInputs) -> np.ndarray:
        if self.word_input is not None:
            return self.word_input.forward(inputs.nn_idx)
        return inputs.x_nn

    def hidden(self, inputs: ModelInputs) -> np.ndarray:
        """Penultimate activation (the vector the ensemble consumes)."""
        first = nc.LayerStack([self.stack.layers[0]])
        out, _ = nc.forward(first, self._input_matrix(inputs))
        return out

    def predict_proba(self, inputs: ModelInputs) -> np.ndarray:
        out, _ = nc.forward(self.stack, self._input_matrix(inputs))
        return out[:, 0]

    def loss_grads(self, inputs: ModelInputs, y: np.ndarray):
        x = self._input_matrix(inputs)
        _, cache = nc.forward(self.stack, x)
        loss, dz = nc.sigmoid_xent_from_logits(cache.per_layer[-1].z[:, 0], y)
        sg = nc.backward(self.stack, cache, dz[:, None], from_preactivation=True)
        grads = sg.parameter_grads()
        if self.word_input is not None:
            grads.append(self.word_input.backward(inputs.nn_idx, sg.dx))
        return loss, grads


class WkModel:
    """Classifier over the subject-object attribute encoding."""

    kind = "wk"

    def __init__(self, stack: nc.LayerStack, scheme: str, input_mode: str,
                 feat_input: FeatureEmbeddingInput | None = None):
        self.stack = stack
        self.scheme = scheme
        self.input_mode = input_mode
        self.feat_input = feat_input
        if input_mode == "feature_embedding" and feat_input is None:
            raise ValidationError("feature_embedding mode needs embedding tables")

    @classmethod
    def build(cls, schema: FeatureSchema, config: ModelConfig, seed: int) -> "WkModel":
        feat_input = None
        if config.input_mode == "feature_embedding":
            feat_input = FeatureEmbeddingInput.build(
                schema, config.scheme, config.feat_dim, derive_seed(seed, "wk-emb")
            )
            in_dim = feat_input.out_dim
        else:
            in_dim = onehot_length(schema, config.scheme)
        stack = nc.init_params(
            [in_dim, config.hidden_wk, 1],
            [config.hidden_activation, config.output_activation],
            derive_seed(seed, "wk"),
        )
        return cls(stack, config.scheme, config.input_mode, feat_input)

    @property
    def hidden_dim(self) -> int:
        return self.stack.layers[0].fan_out

    def parameters(self) -> list[np.ndarray]:
        params = self.stack.parameters()
        if self.feat_input is not None:
            params.extend(self.feat_input.tables)
        return params

    def named_parameters(self) -> dict[str, np.ndarray]:
        named = _stack_named("stack", self.stack)
        if self.feat_input is not None:
            for j, t in enumerate(self.feat_input.tables):
                named[f"feat.{j}"] = t
        return named

    def _input_matrix(self, inputs: ModelInputs) -> np.ndarray:
        if self.input_mode == "feature_embedding":
            return self.feat_input.forward(inputs.wk_idx)
        return inputs.wk_raw

    def hidden(self, inputs: ModelInputs) -> np.ndarray:
        first = nc.LayerStack([self.stack.layers[0]])
        out, _ = nc.forward(first, self._input_matrix(inputs))
        return out

    def predict_proba(self, inputs: ModelInputs) -> np.ndarray:
        out, _ = nc.forward(self.stack, self._input_matrix(inputs))
        return out[:, 0]

    def loss_grads(self, inputs: ModelInputs, y: np.ndarray):
        x = self._input_matrix(inputs)
        _, cache = nc.forward(self.stack, x)
        loss, dz = nc.sigmoid_xent_from_logits(cache.per_layer[-1].z[:, 0], y)
        sg = nc.backward(self.stack, cache, dz[:, None], from_preactivation=True)
        grads = sg.parameter_grads()
        if self.feat_input is not None:
            grads.extend(self.feat_input.backward(inputs.wk_idx, sg.dx))
        return loss, grads


class EnsembleModel:
    """Word-vector path and attribute path joined by a softmax head.

    The two paths expose their hidden activations; the combiner is
    affine -> ReLU -> affine over their concatenation, trained end to end
    with 2-class cross-entropy.
    """

    kind = "ensemble"

    def __init__(self, nn_stack: nc.LayerStack, wk_stack: nc.LayerStack,
                 combiner: nc.LayerStack, scheme: str, input_mode: str,
                 feat_input: FeatureEmbeddingInput | None = None,
                 word_input: TripleEmbeddingInput | None = None):
        self.nn_stack = nn_stack
        self.wk_stack = wk_stack
        self.combiner = combiner
        self.scheme = scheme
        self.input_mode = input_mode
        self.feat_input = feat_input
        self.word_input = word_input
        if combiner.in_dim != nn_stack.out_dim + wk_stack.out_dim:
            raise ValidationError(
                f"combiner input width {combiner.in_dim} != "
                f"{nn_stack.out_dim} + {wk_stack.out_dim}"
            )

    @classmethod
    def build(cls, in_dim_nn: int, schema: FeatureSchema, config: ModelConfig,
              seed: int, word_input: TripleEmbeddingInput | None = None) -> "EnsembleModel":
        feat_input = None
        if config.input_mode == "feature_embedding":
            feat_input = FeatureEmbeddingInput.build(
                schema, config.scheme, config.feat_dim, derive_seed(seed, "ens-emb")
            )
            in_dim_wk = feat_input.out_dim
        else:
            in_dim_wk = onehot_length(schema, config.scheme)
        act = config.hidden_activation
        nn_stack = nc.init_params([in_dim_nn, config.hidden_nn], [act],
                                  derive_seed(seed, "ens-nn"))
        wk_stack = nc.init_params([in_dim_wk, config.hidden_wk], [act],
                                  derive_seed(seed, "ens-wk"))
        combiner = nc.init_params(
            [config.hidden_nn + config.hidden_wk, config.hidden_combiner, 2],
            ["relu", "linear"],
            derive_seed(seed, "ens-comb"),
        )
        return cls(nn_stack, wk_stack, combiner, config.scheme, config.input_mode,
                   feat_input, word_input)

    def parameters(self) -> list[np.ndarray]:
        params = (self.nn_stack.parameters() + self.wk_stack.parameters()
                  + self.combiner.parameters())
        if self.feat_input is not None:
            params.extend(self.feat_input.tables)
        if self.word_input is not None:
            params.append(self.word_input.table)
        return params

    def named_parameters(self) -> dict[str, np.ndarray]:
        named = _stack_named("nn", self.nn_stack)
        named.update(_stack_named("wk", self.wk_stack))
        named.update(_stack_named("comb", self.combiner))
        if self.feat_input is not None:
            for j, t in enumerate(self.feat_input.tables):
                named[f"feat.{j}"] = t
        if self.word_input is not None:
            named["words.table"] = self.word_input.table
        return named

    def _paths(self, inputs: ModelInputs):
        x_nn = (self.word_input.forward(inputs.nn_idx)
                if self.word_input is not None else inputs.x_nn)
        x_wk = (self.feat_input.forward(inputs.wk_idx)
                if self.input_mode == "feature_embedding" else inputs.wk_raw)
        return x_nn, x_wk

    def logits(self, inputs: ModelInputs):
        x_nn, x_wk = self._paths(inputs)
        a_nn, c_nn = nc.forward(self.nn_stack, x_nn)
        a_wk, c_wk = nc.forward(self.wk_stack, x_wk)
        joined = np.concatenate([a_nn, a_wk], axis=1)
        logits, c_comb = nc.forward(self.combiner, joined)
        return logits, (c_nn, c_wk, c_comb)

    def predict_proba(self, inputs: ModelInputs) -> np.ndarray:
        logits, _ = self.logits(inputs)
        return nc.softmax(logits)

    def loss_grads(self, inputs: ModelInputs, y: np.ndarray):
        logits, (c_nn, c_wk, c_comb) = self.logits(inputs)
        loss, dlogits = nc.softmax_xent_batch(logits, y)
        g_comb = nc.backward(self.combiner, c_comb, dlogits, from_preactivation=True)
        h_nn = self.nn_stack.out_dim
        g_nn = nc.backward(self.nn_stack, c_nn, g_comb.dx[:, :h_nn])
        g_wk = nc.backward(self.wk_stack, c_wk, g_comb.dx[:, h_nn:])
        grads = (g_nn.parameter_grads() + g_wk.parameter_grads()
                 + g_comb.parameter_grads())
        if self.feat_input is not None:
            grads.extend(self.feat_input.backward(inputs.wk_idx, g_wk.dx))
        if self.word_input is not None:
            grads.append(self.word_input.backward(inputs.nn_idx, g_nn.dx))
        return loss, grads


def _stack_named(prefix: str, stack: nc.LayerStack) -> dict[str, np.ndarray]:
    named: dict[str, np.ndarray] = {}
    for i, layer in enumerate(stack.layers):
        named[f"{prefix}.{i}.W"] = layer.W
        named[f"{prefix}.{i}.b"] = layer.b
    return named


# ---------------------------------------------------------------------------
# Featurization and training
# ---------------------------------------------------------------------------

def featurize(
    kind: str,
    triples: Sequence[Triple],
    *,
    emb: EmbeddingTable | None = None,
    features=None,
    schema: FeatureSchema | None = None,
    config: ModelConfig,
    word_input: TripleEmbeddingInput | None = None,
) -> ModelInputs:
    """Build the design arrays a model kind consumes for these triples."""
    inputs = ModelInputs()
    if kind in ("lr", "nn", "ensemble"):
        if word_input is not None:
            inputs.nn_idx = word_input.encode(triples)
        else:
            if emb is None:
                raise ValidationError("word vectors are required for this model kind")
            inputs.x_nn = stack_triples(triples, emb)
    if kind in ("wk", "ensemble"):
        if schema is None:
            raise ValidationError("a feature schema is required for this model kind")
        provider = as_feature_provider(features, schema)
        encoded = wk_encode_triples(triples, provider, schema, config.scheme,
                                    config.input_mode)
        if config.input_mode == "feature_embedding":
            inputs.wk_idx = encoded
        else:
            inputs.wk_raw = encoded
    return inputs


@dataclass
class TrainingLog:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    @property
    def best_val_loss(self) -> float:
        return self.val_losses[self.best_epoch]


def fit(
    model,
    inputs: ModelInputs,
    y: np.ndarray,
    config: ModelConfig,
    seed: int,
    trainable: Sequence[np.ndarray] | None = None,
) -> TrainingLog:
    """Mini-batch training with early stopping on a held-out train slice.

    Deterministic for a fixed (model init, data order, config, seed). When
    ``trainable`` is given, only those parameter arrays are updated (the rest
    stay frozen); gradients for frozen arrays are discarded.
    """
    config.validate()
    y = np.asarray(y)
    n = inputs.n
    if n == 0 or y.shape[0] != n:
        raise ValidationError(f"labels ({y.shape[0]}) do not match inputs ({n})")
    if len(np.unique(y)) < 2:
        logger.warning("training labels contain a single class")

    all_params = model.parameters()
    if trainable is None:
        trainable = all_params
    trainable_pos = [i for i, p in enumerate(all_params)
                     if any(p is t for t in trainable)]
    if not trainable_pos:
        raise ValidationError("no trainable parameters selected")

    # Held-out early-stopping slice; tiny datasets fall back to train loss.
    n_val = int(round(config.val_fraction * n))
    if n_val >= 1 and n - n_val >= 2:
        if n_val < 4:
            logger.warning(
                "early-stopping split has only %d examples; checkpoint choice "
                "will be noisy (consider val_fraction=0 for tiny datasets)", n_val
            )
        perm = rng_for(seed, "valsplit").permutation(n)
        val_rows, train_rows = perm[:n_val], perm[n_val:]
    else:
        val_rows, train_rows = None, np.arange(n)
    train_inputs = inputs.take(train_rows)
    y_train = y[train_rows]
    if val_rows is not None:
        val_inputs = inputs.take(val_rows)
        y_val = y[val_rows]

    opt = nc.make_optimizer(config.optimizer, [all_params[i] for i in trainable_pos],
                            config.learning_rate)
    shuffle_rng = rng_for(seed, "shuffle")
    log = TrainingLog()
    best_loss = np.inf
    best_params = None
    patience_left = config.patience
    n_train = len(train_rows)

    for epoch in range(config.max_epochs):
        order = shuffle_rng.permutation(n_train)
        batch_losses = []
        for start in range(0, n_train, config.batch_size):
            rows = order[start : start + config.batch_size]
            loss, grads = model.loss_grads(train_inputs.take(rows), y_train[rows])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            nc.optimize_step(opt, [all_params[i] for i in trainable_pos],
                             [grads[i] for i in trainable_pos])
            batch_losses.append(loss)
        log.train_losses.append(float(np.mean(batch_losses)))
        if val_rows is not None:
            val_loss, _ = model.loss_grads(val_inputs, y_val)
        else:
            val_loss, _ = model.loss_grads(train_inputs, y_train)
        log.val_losses.append(float(val_loss))
        log.stopped_epoch = epoch
        if val_loss < best_loss - 1e-12:
            best_loss = val_loss
            best_params = [p.copy() for p in all_params]
            log.best_epoch = epoch
            patience_left = config.patience
        else:
            patience_left -= 1
            if patience_left <= 0:
                break

    if best_params is not None:
        for p, saved in zip(all_params, best_params):
            p[...] = saved
    return log


def train_classifier(
    kind: str,
    train: Sequence[LabeledTriple],
    config: ModelConfig,
    seed: int,
    *,
    emb: EmbeddingTable | None = None,
    features=None,
    schema: FeatureSchema | None = None,
):
    """Build, featurize, and fit one classifier; returns (model, log)."""
    if kind not in MODEL_KINDS:
        raise ValidationError(f"model kind must be one of {MODEL_KINDS}, got {kind!r}")
    if not train:
        raise ValidationError("empty training set")
    config.validate()
    if kind == "random":
        return RandomModel(seed=seed), TrainingLog()

    triples = [t.triple for t in train]
    y = np.array([t.label for t in train], dtype=np.int64)

    word_input = None
    if kind in ("nn", "ensemble") and config.fine_tune_embeddings:
        if emb is None:
            raise ValidationError("fine-tuning requires word vectors")
        words = [w for t in triples for w in t]
        word_input = TripleEmbeddingInput.from_table(emb, words)

    if kind == "lr":
        if emb is None:
            raise ValidationError("lr requires word vectors")
        model = LrModel.build(3 * emb.dim, seed)
    elif kind == "nn":
        if emb is None:
            raise ValidationError("nn requires word vectors")
        model = NnModel.build(3 * emb.dim, config, seed, word_input)
    elif kind == "wk":
        if schema is None:
            raise ValidationError("wk requires a feature schema")
        model = WkModel.build(schema, config, seed)
    else:
        if emb is None or schema is None:
            raise ValidationError("ensemble requires word vectors and a feature schema")
        model = EnsembleModel.build(3 * emb.dim, schema, config, seed, word_input)

    inputs = featurize(kind, triples, emb=emb, features=features, schema=schema,
                       config=config, word_input=word_input)
    y_fit = y.astype(np.float64) if kind in ("lr", "nn", "wk") else y
    log = fit(model, inputs, y_fit, config, seed)
    return model, log


# ---------------------------------------------------------------------------
# Single-triple prediction (the user-facing contracts)
# ---------------------------------------------------------------------------

def predict_lr(m: LrModel, t: Triple, emb: EmbeddingTable) -> float:
    x = triple_vector(t, emb)
    return float(m.predict_proba(ModelInputs(x_nn=x[None, :]))[0])


def predict_nn(m: NnModel, t: Triple, emb: EmbeddingTable) -> float:
    if m.word_input is not None:
        inputs = ModelInputs(nn_idx=m.word_input.encode([t]))
    else:
        inputs = ModelInputs(x_nn=triple_vector(t, emb)[None, :])
    return float(m.predict_proba(inputs)[0])


def predict_ensemble(
    m: EnsembleModel,
    t: Triple,
    emb: EmbeddingTable,
    features,
    schema: FeatureSchema,
) -> tuple[int, np.ndarray]:
    """Predicted label and the 2-class probabilities for one triple."""
    provider = as_feature_provider(features, schema)
    config = ModelConfig(scheme=m.scheme, input_mode=m.input_mode)
    inputs = featurize("ensemble", [t], emb=emb, features=provider, schema=schema,
                       config=config, word_input=m.word_input)
    probs = m.predict_proba(inputs)[0]
    return int(np.argmax(probs)), probs


def predict_labels(model, inputs: ModelInputs) -> np.ndarray:
    """Hard labels for a featurized batch, any trained model kind."""
    if isinstance(model, EnsembleModel):
        return np.argmax(model.predict_proba(inputs), axis=1)
    return (model.predict_proba(inputs) > 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# End-to-end gradient checking (embedding tables included)
# ---------------------------------------------------------------------------

def model_grad_check(
    model,
    inputs: ModelInputs,
    y: np.ndarray,
    step: float = 1e-5,
    tolerance: float = 1e-4,
) -> nc.GradCheckResult:
    """Central-difference check over every parameter a model trains."""
    params = model.parameters()
    _, analytic = model.loss_grads(inputs, y)
    numeric = nc.finite_difference_grads(
        lambda: model.loss_grads(inputs, y)[0], params, step
    )
    err = nc.max_relative_error(analytic, numeric)
    return nc.GradCheckResult(
        max_rel_error=err,
        tolerance=tolerance,
        n_params=int(sum(p.size for p in params)),
    )


# ---------------------------------------------------------------------------
# Persistence: binary checkpoint + plain-text manifest
# ---------------------------------------------------------------------------

def save_model(model, directory: str | Path, config: ModelConfig) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    named = model.named_parameters() if model.kind != "random" else {}
    nc.save_checkpoint(directory / "model.ckpt", named)
    lines = [f"kind={model.kind}"]
    for key in ("hidden_nn", "hidden_wk", "hidden_combiner", "feat_dim", "scheme",
                "input_mode", "hidden_activation", "output_activation",
                "fine_tune_embeddings", "optimizer", "learning_rate", "batch_size",
                "max_epochs", "patience", "val_fraction"):
        lines.append(f"{key}={getattr(config, key)}")
    if model.kind == "random":
        lines.append(f"seed={model.seed}")
    if getattr(model, "word_input", None) is not None:
        lines.append("words=" + " ".join(model.word_input.words))
    (directory / "model.manifest").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(directory: str | Path, schema: FeatureSchema | None = None):
    """Rebuild a saved model; returns (model, config)."""
    directory = Path(directory)
    manifest: dict[str, str] = {}
    for line in (directory / "model.manifest").read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            manifest[key] = value
    kind = manifest["kind"]
    config = ModelConfig(
        hidden_nn=int(manifest["hidden_nn"]),
        hidden_wk=int(manifest["hidden_wk"]),
        hidden_combiner=int(manifest["hidden_combiner"]),
        feat_dim=int(manifest["feat_dim"]),
        scheme=manifest["scheme"],
        input_mode=manifest["input_mode"],
        hidden_activation=manifest["hidden_activation"],
        output_activation=manifest["output_activation"],
        fine_tune_embeddings=manifest["fine_tune_embeddings"] == "True",
        optimizer=manifest["optimizer"],
        learning_rate=float(manifest["learning_rate"]),
        batch_size=int(manifest["batch_size"]),
        max_epochs=int(manifest["max_epochs"]),
        patience=int(manifest["patience"]),
        val_fraction=float(manifest["val_fraction"]),
    )
    if kind == "random":
        return RandomModel(seed=int(manifest["seed"])), config
    arrays = nc.load_checkpoint(directory / "model.ckpt")

    def stack_from(prefix: str, activations: list[str]) -> nc.LayerStack:
        layers = []
        for i, act in enumerate(activations):
            layers.append(nc.Layer(arrays[f"{prefix}.{i}.W"].copy(),
                                   arrays[f"{prefix}.{i}.b"].copy(), act))
        return nc.LayerStack(layers)

    word_input = None
    if "words" in manifest:
        words = manifest["words"].split()
        word_input = TripleEmbeddingInput(words, arrays["words.table"].copy())

    feat_input = None
    feat_keys = sorted(k for k in arrays if k.startswith("feat."))
    if feat_keys:
        feat_input = FeatureEmbeddingInput([arrays[k].copy() for k in feat_keys])

    if kind == "lr":
        return LrModel(stack_from("stack", ["sigmoid"])), config
    if kind == "nn":
        acts = [config.hidden_activation, config.output_activation]
        return NnModel(stack_from("stack", acts), word_input), config
    if kind == "wk":
        acts = [config.hidden_activation, config.output_activation]
        return WkModel(stack_from("stack", acts), config.scheme, config.input_mode,
                       feat_input), config
    if kind == "ensemble":
        return EnsembleModel(
            stack_from("nn", [config.hidden_activation]),
            stack_from("wk", [config.hidden_activation]),
            stack_from("comb", ["relu", "linear"]),
            config.scheme,
            config.input_mode,
            feat_input,
            word_input,
        ), config
    raise ValidationError(f"unknown model kind {kind!r} in manifest")
