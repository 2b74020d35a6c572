"""Feed-forward ReLU networks with a softmax output convention.

Layers operate on flattened row vectors. Convolutions are materialized as
explicit matrices, which is affordable at the sizes used here and lets every
linear-layer bound apply to conv layers unchanged.
"""
import copy
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import log_sum_exp, softmax


class ShapeError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class Linear:
    weight: np.ndarray
    bias: Optional[np.ndarray] = None
    kind = "linear"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ShapeError(f"linear weight must be 2-D, got shape {self.weight.shape}")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
            if self.bias.shape[0] != self.weight.shape[0]:
                raise ShapeError("linear bias length must equal out_dim")


@dataclass
class Conv2d:
    weight: np.ndarray
    bias: Optional[np.ndarray] = None
    stride: int = 1
    padding: int = 0
    kind = "conv2d"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 4:
            raise ShapeError(f"conv weight must be 4-D, got shape {self.weight.shape}")
        if self.stride < 1 or self.padding < 0:
            raise ShapeError("conv stride must be >= 1 and padding >= 0")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
            if self.bias.shape[0] != self.weight.shape[0]:
                raise ShapeError("conv bias length must equal out_channels")

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeError(f"conv2d needs a (C, H, W) input, got {tuple(input_shape)}")
        c, h, w = input_shape
        oc, ic, kh, kw = self.weight.shape
        if c != ic:
            raise ShapeError(f"conv2d expects {ic} input channels, got {c}")
        oh = (h + 2 * self.padding - kh) // self.stride + 1
        ow = (w + 2 * self.padding - kw) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"kernel {kh}x{kw} does not fit input {h}x{w}")
        return (oc, oh, ow)


@dataclass
class ReLU:
    kind = "relu"


Layer = Union[Linear, Conv2d, ReLU]


@dataclass
class IntermediateTrace:
    """Pre-activations of every linear/conv layer, in order (the last is the logits)."""

    pre_activations: List[np.ndarray] = field(default_factory=list)


def _conv_index(input_shape, layer):
    # For every nonzero of the conv matrix: its row, column and the flat kernel
    # index it copies. Each (row, col) pair occurs once.
    c, h, w = input_shape
    oc, ic, kh, kw = layer.weight.shape
    _, oh, ow = layer.output_shape(input_shape)
    s, p = layer.stride, layer.padding
    grid = np.meshgrid(
        np.arange(oc), np.arange(oh), np.arange(ow),
        np.arange(ic), np.arange(kh), np.arange(kw), indexing="ij",
    )
    o_c, o_h, o_w, i_c, k_h, k_w = (g.ravel() for g in grid)
    i_h = o_h * s - p + k_h
    i_w = o_w * s - p + k_w
    ok = (i_h >= 0) & (i_h < h) & (i_w >= 0) & (i_w < w)
    rows = ((o_c * oh + o_h) * ow + o_w)[ok]
    cols = ((i_c * h + i_h) * w + i_w)[ok]
    kidx = (((o_c * ic + i_c) * kh + k_h) * kw + k_w)[ok]
    return rows, cols, kidx, (oc * oh * ow, c * h * w)


def conv_as_matrix(layer, input_shape):
    """Return ``M`` with ``flatten(conv(X)) == M @ flatten(X)`` (bias excluded)."""
    if not isinstance(layer, Conv2d):
        raise ShapeError("conv_as_matrix needs a conv2d layer")
    rows, cols, kidx, shape = _conv_index(tuple(input_shape), layer)
    M = np.zeros(shape)
    M[rows, cols] = layer.weight.ravel()[kidx]
    return M


class Network:
    """Ordered stack of linear/conv/ReLU layers ending in ``class_count`` logits.

    Softmax is not a layer; :meth:`forward` returns logits and probabilities are
    ``softmax(logits)``.
    """

    def __init__(self, layers: Sequence[Layer], input_shape, class_count: int):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.class_count = int(class_count)
        self._conv_maps = {}
        self._conv_cache = {}
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = self._next_shape(i, layer, shape)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
        if int(np.prod(shape)) != self.class_count:
            raise ShapeError(
                f"layer {len(self.layers) - 1}: final output dim {int(np.prod(shape))} "
                f"!= class_count {self.class_count}"
            )
        if self.class_count < 1:
            raise ShapeError("class_count must be at least 1")

    def _next_shape(self, i, layer, shape):
        if isinstance(layer, Linear):
            in_dim = int(np.prod(shape))
            if layer.weight.shape[1] != in_dim:
                raise ShapeError(f"expects input dim {layer.weight.shape[1]}, got {in_dim}")
            return (layer.weight.shape[0],)
        if isinstance(layer, Conv2d):
            out = layer.output_shape(shape)
            self._conv_maps[i] = (_conv_index(shape, layer), shape, out)
            return out
        if isinstance(layer, ReLU):
            return shape
        raise ShapeError(f"unknown layer type {type(layer).__name__}")

    # -- structure -----------------------------------------------------------

    @property
    def input_dim(self):
        return int(np.prod(self.input_shape))

    @property
    def parametric_indices(self):
        return [i for i, layer in enumerate(self.layers) if not isinstance(layer, ReLU)]

    def layer_matrix(self, i):
        """Weight matrix of layer ``i`` acting on flattened inputs."""
        layer = self.layers[i]
        if isinstance(layer, Linear):
            return layer.weight
        if isinstance(layer, Conv2d):
            cached = self._conv_cache.get(i)
            if cached is not None and cached[0] is layer.weight:
                return cached[1]
            (rows, cols, kidx, shape), _, _ = self._conv_maps[i]
            M = np.zeros(shape)
            M[rows, cols] = layer.weight.ravel()[kidx]
            # keyed on the weight object: training swaps arrays, never edits them in place
            self._conv_cache[i] = (layer.weight, M)
            return M
        raise ShapeError(f"layer {i} (relu) has no weight matrix")

    def _layer_bias(self, i):
        layer = self.layers[i]
        if layer.bias is None:
            return None
        if isinstance(layer, Conv2d):
            _, _, (oc, oh, ow) = self._conv_maps[i]
            return np.repeat(layer.bias, oh * ow)
        return layer.bias

    def copy(self):
        return Network(copy.deepcopy(self.layers), self.input_shape, self.class_count)

    # -- forward / backward --------------------------------------------------

    def _flatten_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        # any per-sample layout with the right number of entries is read row-major
        if X.ndim >= 2 and int(np.prod(X.shape[1:])) == self.input_dim:
            return X.reshape(X.shape[0], -1)
        raise ShapeError(
            f"layer 0: input shape {X.shape[1:]} does not match network input {self.input_shape}"
        )

    def _run(self, X):
        A = self._flatten_batch(X)
        inputs, mats, pre = [], [], []
        for i, layer in enumerate(self.layers):
            inputs.append(A)
            if isinstance(layer, ReLU):
                mats.append(None)
                A = np.maximum(A, 0.0)
                continue
            M = self.layer_matrix(i)
            mats.append(M)
            A = A @ M.T
            b = self._layer_bias(i)
            if b is not None:
                A = A + b
            pre.append(A)
        return A, inputs, mats, pre

    def _backward(self, inputs, mats, G, want_params=False):
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if isinstance(layer, ReLU):
                # subgradient 0 at exactly 0
                G = G * (inputs[i] > 0)
                continue
            if want_params:
                dM = G.T @ inputs[i]
                db = None
                if isinstance(layer, Conv2d):
                    (rows, cols, kidx, _), _, (oc, oh, ow) = self._conv_maps[i]
                    dW = np.bincount(kidx, weights=dM[rows, cols], minlength=layer.weight.size)
                    dW = dW.reshape(layer.weight.shape)
                    if layer.bias is not None:
                        db = G.reshape(G.shape[0], oc, oh * ow).sum(axis=(0, 2))
                else:
                    dW = dM
                    if layer.bias is not None:
                        db = G.sum(axis=0)
                grads[i] = (dW, db)
            G = G @ mats[i]
        return G, grads

    def forward(self, x) -> Tuple[np.ndarray, IntermediateTrace]:
        x = np.asarray(x, dtype=np.float64)
        logits, _, _, pre = self._run(x[None])
        return logits[0], IntermediateTrace([p[0] for p in pre])

    def logits(self, X):
        return self._run(X)[0]

    def predict_proba(self, X):
        return softmax(self.logits(X), axis=1)

    def predict(self, X):
        return np.argmax(self.logits(X), axis=1)

    def _check_label(self, label):
        if not 0 <= int(label) < self.class_count:
            raise ValueError(f"label {label} out of range [0, {self.class_count})")
        return int(label)

    def loss(self, x, label):
        """Cross-entropy of the softmax output against class ``label``."""
        label = self._check_label(label)
        z, _ = self.forward(x)
        return log_sum_exp(z) - z[label]

    def losses(self, X, labels):
        z = self.logits(X)
        labels = np.asarray(labels, dtype=int)
        return log_sum_exp(z, axis=1) - z[np.arange(len(labels)), labels]

    def vjp(self, X, cotangent):
        """Pull a logit-space cotangent back to input space (batched)."""
        _, inputs, mats, _ = self._run(X)
        G, _ = self._backward(inputs, mats, np.asarray(cotangent, dtype=np.float64))
        return G.reshape(np.shape(X))

    def input_gradients(self, X, labels):
        X = np.asarray(X, dtype=np.float64)
        logits, inputs, mats, _ = self._run(X)
        labels = np.asarray(labels, dtype=int)
        G = softmax(logits, axis=1)
        G[np.arange(len(labels)), labels] -= 1.0
        G, _ = self._backward(inputs, mats, G)
        return G.reshape(X.shape)

    def input_gradient(self, x, label):
        """Gradient of :meth:`loss` with respect to ``x``."""
        label = self._check_label(label)
        x = np.asarray(x, dtype=np.float64)
        return self.input_gradients(x[None], [label])[0]

    def parameter_gradients(self, X, labels):
        """Mean batch loss and per-layer ``(dW, db)`` gradients (``None`` for ReLU)."""
        logits, inputs, mats, _ = self._run(X)
        labels = np.asarray(labels, dtype=int)
        n = len(labels)
        loss = float(np.mean(log_sum_exp(logits, axis=1) - logits[np.arange(n), labels]))
        G = softmax(logits, axis=1)
        G[np.arange(n), labels] -= 1.0
        _, grads = self._backward(inputs, mats, G / n, want_params=True)
        return loss, grads

    # -- persistence ---------------------------------------------------------

    def to_dict(self):
        out = []
        for layer in self.layers:
            if isinstance(layer, ReLU):
                out.append({"kind": "relu"})
                continue
            bias = None if layer.bias is None else [float(b) for b in layer.bias]
            weights = [float(w) for w in layer.weight.ravel()]
            if isinstance(layer, Linear):
                rows, cols = layer.weight.shape
                out.append({"kind": "linear", "rows": rows, "cols": cols,
                            "weights": weights, "bias": bias})
            else:
                oc, ic, kh, kw = layer.weight.shape
                out.append({"kind": "conv2d", "out_channels": oc, "in_channels": ic,
                            "kernel_h": kh, "kernel_w": kw, "stride": layer.stride,
                            "padding": layer.padding, "weights": weights, "bias": bias})
        return {"input_shape": list(self.input_shape), "class_count": self.class_count,
                "layers": out}

    @classmethod
    def from_dict(cls, doc):
        layers = []
        for i, spec in enumerate(doc["layers"]):
            kind = spec.get("kind")
            bias = spec.get("bias")
            if kind == "relu":
                layers.append(ReLU())
            elif kind == "linear":
                W = np.asarray(spec["weights"], dtype=np.float64).reshape(spec["rows"], spec["cols"])
                layers.append(Linear(W, bias))
            elif kind == "conv2d":
                shape = (spec["out_channels"], spec["in_channels"], spec["kernel_h"], spec["kernel_w"])
                W = np.asarray(spec["weights"], dtype=np.float64).reshape(shape)
                layers.append(Conv2d(W, bias, int(spec.get("stride", 1)), int(spec.get("padding", 0))))
            else:
                raise ShapeError(f"layer {i}: unknown kind {kind!r}")
        return cls(layers, doc["input_shape"], doc["class_count"])

    def to_json(self):
        # json writes floats with repr(), the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path):
        with open(path, "w", newline="\n") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


# -- construction --------------------------------------------------------------


def init_linear(rng, in_dim, out_dim, bias=True):
    a = np.sqrt(1.0 / in_dim)
    W = rng.uniform(-a, a, size=(out_dim, in_dim))
    return Linear(W, np.zeros(out_dim) if bias else None)


def init_conv(rng, in_channels, out_channels, kernel, stride=1, padding=0, bias=True):
    a = np.sqrt(1.0 / (in_channels * kernel * kernel))
    W = rng.uniform(-a, a, size=(out_channels, in_channels, kernel, kernel))
    return Conv2d(W, np.zeros(out_channels) if bias else None, stride, padding)


def build_mlp(dims, seed=0, bias=True):
    """``dims = [d0, d1, ..., dk]``: linear layers with ReLU between, linear last."""
    if len(dims) < 2:
        raise ShapeError("an mlp needs at least input and output dims")
    rng = np.random.default_rng(seed)
    layers = []
    for j in range(len(dims) - 1):
        if j:
            layers.append(ReLU())
        layers.append(init_linear(rng, dims[j], dims[j + 1], bias))
    return Network(layers, (dims[0],), dims[-1])


# -- training ------------------------------------------------------------------


@dataclass
class SGD:
    lr: float = 0.1


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def train(net, data, optimizer=None, epochs=10, batch_size=32, seed=0, log=None):
    """Minibatch cross-entropy training on a private copy of ``net``.

    :param data: a :class:`advprobe.data.Dataset` or an ``(X, y)`` pair.
    :param optimizer: :class:`SGD` or :class:`Adam`; defaults to ``SGD(0.1)``.
    :return: the trained copy; ``net`` is left untouched.
    """
    from .attacks.adam import AdamState, adam_step

    X, y = (data.inputs, data.labels) if hasattr(data, "inputs") else data
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if len(X) == 0 or len(X) != len(y):
        raise ValueError("training data must be nonempty with one label per input")
    optimizer = optimizer or SGD()
    net = net.copy()
    if epochs == 0:
        return net
    rng = np.random.default_rng(seed)
    params = [(i, name) for i in net.parametric_indices for name in ("weight", "bias")
              if getattr(net.layers[i], name) is not None]
    states = {p: AdamState.zeros(getattr(net.layers[p[0]], p[1]).shape) for p in params}

    for epoch in range(epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), batch_size):
            idx = order[start:start + batch_size]
            loss, grads = net.parameter_gradients(X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError("training diverged")
            total += loss * len(idx)
            for i, name in params:
                g = grads[i][0] if name == "weight" else grads[i][1]
                layer = net.layers[i]
                if isinstance(optimizer, Adam):
                    states[(i, name)], step = adam_step(
                        states[(i, name)], g, optimizer.lr, optimizer.beta1,
                        optimizer.beta2, optimizer.eps)
                else:
                    step = -optimizer.lr * g
                setattr(layer, name, getattr(layer, name) + step)
        if log is not None:
            log(epoch, total / len(X))
    return net
