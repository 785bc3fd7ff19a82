"""Minimal dense feedforward kernel.

Float64 numpy arrays carry all parameters and activations. The layer set is
fixed (affine + relu/sigmoid/tanh/linear), backward passes are hand-derived,
and a central-difference gradient checker validates them. Nothing here knows
about words or features; higher layers compose these pieces into the actual
classifiers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError, ParseError, ValidationError

CHECKPOINT_MAGIC = b"NNCP"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_ACT = {
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": np.tanh,
    "linear": lambda z: z,
}


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """d(activation)/dz expressed from the pre-activation z and output a."""
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    if name == "linear":
        return np.ones_like(z)
    raise ValidationError(f"unknown activation {name!r}")


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

@dataclass
class Layer:
    """One affine map plus activation. W is (fan_out, fan_in), b is (fan_out,)."""

    W: np.ndarray
    b: np.ndarray
    activation: str

    def __post_init__(self):
        if self.activation not in _ACT:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValidationError(
                f"layer shapes disagree: W {self.W.shape}, b {self.b.shape}"
            )

    @property
    def fan_in(self) -> int:
        return self.W.shape[1]

    @property
    def fan_out(self) -> int:
        return self.W.shape[0]


@dataclass
class LayerStack:
    """Ordered dense layers with chained dimensions."""

    layers: list[Layer]

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise ValidationError(
                    f"adjacent layer dimensions do not chain: "
                    f"{prev.fan_out} -> {nxt.fan_in}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def out_dim(self) -> int:
        return self.layers[-1].fan_out

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out

    def clone(self) -> "LayerStack":
        return LayerStack(
            [Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers]
        )


def init_params(dims: Sequence[int], activations: Sequence[str], seed: int) -> LayerStack:
    """Glorot-uniform weights, zero biases, deterministic per seed.

    dims is the full dimension chain (input first); activations has one entry
    per layer.
    """
    if len(dims) < 2:
        raise ValidationError("need at least an input and an output dimension")
    if len(activations) != len(dims) - 1:
        raise ValidationError(
            f"{len(dims) - 1} layers require {len(dims) - 1} activations, "
            f"got {len(activations)}"
        )
    if any(d <= 0 for d in dims):
        raise ValidationError(f"dimensions must be positive: {list(dims)}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(dims, dims[1:], activations):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-a, a, size=(fan_out, fan_in))
        b = np.zeros(fan_out, dtype=np.float64)
        layers.append(Layer(W=W, b=b, activation=act))
    return LayerStack(layers)


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

@dataclass
class LayerCache:
    x: np.ndarray  # layer input, (n, fan_in)
    z: np.ndarray  # pre-activation, (n, fan_out)
    a: np.ndarray  # post-activation, (n, fan_out)


@dataclass
class ForwardCache:
    per_layer: list[LayerCache]
    squeezed: bool

    @property
    def last_preactivation(self) -> np.ndarray:
        z = self.per_layer[-1].z
        return z[0] if self.squeezed else z


def forward(stack: LayerStack, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run the composed layers; accepts a single vector or an (n, d) batch."""
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.shape[1] != stack.in_dim:
        raise ValidationError(
            f"input width {x.shape[1]} does not match first layer fan-in {stack.in_dim}"
        )
    caches: list[LayerCache] = []
    a = x
    for layer in stack.layers:
        z = a @ layer.W.T + layer.b
        a_next = _ACT[layer.activation](z)
        caches.append(LayerCache(x=a, z=z, a=a_next))
        a = a_next
    out = a[0] if squeezed else a
    return out, ForwardCache(per_layer=caches, squeezed=squeezed)


@dataclass
class StackGrads:
    dW: list[np.ndarray]
    db: list[np.ndarray]
    dx: np.ndarray

    def parameter_grads(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.dW, self.db):
            out.extend((w, b))
        return out


def backward(
    stack: LayerStack,
    cache: ForwardCache,
    dout: np.ndarray,
    from_preactivation: bool = False,
) -> StackGrads:
    """Backpropagate dout through the stack.

    dout is the gradient wrt the network output, or wrt the last layer's
    pre-activation when from_preactivation is set (the stable path for
    losses folded together with the output nonlinearity).
    """
    if len(cache.per_layer) != len(stack.layers):
        raise ValidationError("cache does not match stack depth")
    d = np.asarray(dout, dtype=np.float64)
    if cache.squeezed:
        d = d[None, :] if d.ndim == 1 else d.reshape(1, -1)
    expected = cache.per_layer[-1].a.shape
    if d.shape != expected:
        raise ValidationError(f"upstream gradient shape {d.shape} != output shape {expected}")
    dW: list[np.ndarray] = [None] * len(stack.layers)  # type: ignore[list-item]
    db: list[np.ndarray] = [None] * len(stack.layers)  # type: ignore[list-item]
    for i in range(len(stack.layers) - 1, -1, -1):
        layer = stack.layers[i]
        lc = cache.per_layer[i]
        if i == len(stack.layers) - 1 and from_preactivation:
            dz = d
        else:
            dz = d * _act_grad(layer.activation, lc.z, lc.a)
        dW[i] = dz.T @ lc.x
        db[i] = dz.sum(axis=0)
        d = dz @ layer.W
    dx = d[0] if cache.squeezed else d
    return StackGrads(dW=dW, db=db, dx=dx)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of one logit vector against an integer class label.

    Returns (loss, gradient wrt logits); gradient is softmax - onehot.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 2:
        raise ValidationError("softmax_xent expects a vector of at least 2 logits")
    if not 0 <= label < z.shape[0]:
        raise ValidationError(f"label {label} out of range for {z.shape[0]} classes")
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    loss = lse - z[label]
    grad = softmax(z)
    grad[label] -= 1.0
    return float(loss), grad


def softmax_xent_batch(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch; gradient already includes the 1/n."""
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = z.shape[0]
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    loss = float(np.mean(lse - z[np.arange(n), labels]))
    grad = softmax(z)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def sigmoid_xent_from_logits(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy computed from pre-sigmoid logits.

    Stable for any |z|; returns gradient wrt z (already divided by n).
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if z.shape != y.shape:
        raise ValidationError(f"logit/label shape mismatch: {z.shape} vs {y.shape}")
    # softplus(z) - y*z, with softplus(z) = max(z, 0) + log1p(exp(-|z|))
    loss = float(np.mean(np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))))
    grad = (sigmoid(z) - y) / z.shape[0]
    return loss, grad


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def finite_difference_grads(
    loss_fn: Callable[[], float],
    params: Sequence[np.ndarray],
    step: float = 1e-5,
) -> list[np.ndarray]:
    """Central-difference gradient of loss_fn wrt each parameter array.

    loss_fn re-evaluates the loss from current parameter values; parameters
    are perturbed in place and restored exactly.
    """
    if step <= 0:
        raise ValidationError("step must be positive")
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_fn()
            flat[i] = orig - step
            lo = loss_fn()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def max_relative_error(
    analytic: Sequence[np.ndarray], numeric: Sequence[np.ndarray]
) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


@dataclass
class GradCheckResult:
    max_rel_error: float
    tolerance: float
    n_params: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def stack_loss(stack: LayerStack, x: np.ndarray, label: int, loss: str) -> float:
    """Scalar loss for a single example, computed from the last pre-activation."""
    _, cache = forward(stack, x)
    z_last = cache.last_preactivation
    if loss == "binary":
        value, _ = sigmoid_xent_from_logits(z_last, np.array([float(label)]))
        return value
    if loss == "softmax":
        value, _ = softmax_xent(np.atleast_1d(z_last), label)
        return value
    raise ValidationError(f"loss must be 'binary' or 'softmax', got {loss!r}")


def _infer_loss(stack: LayerStack) -> str:
    last = stack.layers[-1]
    if last.fan_out == 1 and last.activation == "sigmoid":
        return "binary"
    return "softmax"


def grad_check(
    stack: LayerStack,
    x: np.ndarray,
    label: int,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    loss: str = "auto",
) -> GradCheckResult:
    """Compare hand-derived parameter gradients against central differences."""
    if loss == "auto":
        loss = _infer_loss(stack)

    _, cache = forward(stack, x)
    z_last = cache.last_preactivation
    if loss == "binary":
        _, dz = sigmoid_xent_from_logits(z_last, np.array([float(label)]))
    else:
        _, dz = softmax_xent(np.atleast_1d(z_last), label)
    grads = backward(stack, cache, dz, from_preactivation=True)
    analytic = grads.parameter_grads()

    params = stack.parameters()
    numeric = finite_difference_grads(lambda: stack_loss(stack, x, label, loss), params, step)
    err = max_relative_error(analytic, numeric)
    return GradCheckResult(
        max_rel_error=err,
        tolerance=tolerance,
        n_params=int(sum(p.size for p in params)),
    )


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    algorithm: str
    lr: float
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS


def make_optimizer(algorithm: str, params: Sequence[np.ndarray], lr: float) -> OptimizerState:
    if algorithm not in ("sgd", "adam"):
        raise ValidationError(f"algorithm must be 'sgd' or 'adam', got {algorithm!r}")
    if lr <= 0:
        raise ValidationError("learning rate must be positive")
    state = OptimizerState(algorithm=algorithm, lr=lr)
    if algorithm == "adam":
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    return state


def optimize_step(
    state: OptimizerState,
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
) -> None:
    """Apply one update in place. Aborts on non-finite gradients."""
    if len(params) != len(grads):
        raise ValidationError("params/grads length mismatch")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValidationError(
                f"gradient {i} shape {g.shape} does not match parameter {p.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in parameter {i} (shape {g.shape})")
    if state.algorithm == "sgd":
        for p, g in zip(params, grads):
            p -= state.lr * g
        return
    state.t += 1
    b1t = 1.0 - state.beta1 ** state.t
    b2t = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / b1t) / (np.sqrt(v / b2t) + state.eps)


# ---------------------------------------------------------------------------
# Checkpoints: magic + version + shape table, then little-endian float64 data.
# ---------------------------------------------------------------------------

def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    with Path(path).open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HI", CHECKPOINT_VERSION, len(arrays)))
        for name, arr in arrays.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ParseError("bad checkpoint magic", path=path)
        version, count = struct.unpack("<HI", fh.read(6))
        if version != CHECKPOINT_VERSION:
            raise ParseError(f"unsupported checkpoint version {version}", path=path)
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim)) if ndim else ()
            shapes.append((name, tuple(dims)))
        out: dict[str, np.ndarray] = {}
        for name, dims in shapes:
            n = int(np.prod(dims)) if dims else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ParseError(f"truncated data for {name!r}", path=path)
            out[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(dims)
        return out
