"""Fully connected networks, gradient plumbing, and the Adam optimizer.

Parameters live in plain float64 numpy arrays inside ``NetParams``. The
fast inference path (``forward``) is pure numpy; the training path wraps
the same arrays in autodiff tensors (``net_tensors`` + ``forward_tape``)
so a loss built on top of them yields per-parameter gradients.

Checkpoint layout (see ``to_doc``/``from_doc``): one JSON object per net
with parallel lists ``weights``/``biases`` holding flattened float lists,
``shapes`` holding the 2-D weight shapes, and ``activations``. The layout
is stable: entries are ordered input -> output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, as_tensor
from .errors import ConfigError, NumericError

ACTIVATIONS = ("tanh", "relu", "linear")


@dataclass
class NetParams:
    """Weights, biases and per-layer activation kinds of an MLP."""

    weights: list
    biases: list
    activations: list

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ConfigError("layer lists must have equal length")
        for i, (w, b, a) in enumerate(zip(self.weights, self.biases, self.activations)):
            if a not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {a!r} in layer {i}")
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ConfigError(f"layer {i}: weight {w.shape} and bias {b.shape} do not chain")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ConfigError(f"layer {i}: input width {w.shape[0]} does not match previous output")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError(f"non-finite parameters in layer {i}")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "NetParams":
        return NetParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
        )

    def to_doc(self) -> dict:
        return {
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "shapes": [list(w.shape) for w in self.weights],
            "activations": list(self.activations),
        }

    @staticmethod
    def from_doc(doc: dict) -> "NetParams":
        ws = [np.asarray(w, dtype=np.float64).reshape(s) for w, s in zip(doc["weights"], doc["shapes"])]
        bs = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        return NetParams(ws, bs, list(doc["activations"]))


def init_mlp(
    in_dim: int,
    out_dim: int,
    hidden: int,
    n_hidden: int,
    rng: np.random.Generator,
    hidden_act: str = "relu",
    final_act: str = "linear",
    final_scale: float = 1.0,
) -> NetParams:
    """Uniform fan-in initialization; the output layer can be rescaled

    (small policy heads keep the initial action distribution near zero)."""
    sizes = [in_dim] + [hidden] * n_hidden + [out_dim]
    acts = [hidden_act] * n_hidden + [final_act]
    ws, bs = [], []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(a)
        w = rng.uniform(-bound, bound, size=(a, b))
        bias = rng.uniform(-bound, bound, size=b)
        if i == len(sizes) - 2 and final_scale != 1.0:
            w *= final_scale
            bias *= final_scale
        ws.append(w)
        bs.append(bias)
    return NetParams(ws, bs, acts)


def _activate(h, kind: str):
    if kind == "tanh":
        return h.tanh() if isinstance(h, Tensor) else np.tanh(h)
    if kind == "relu":
        return h.relu() if isinstance(h, Tensor) else np.maximum(h, 0.0)
    return h


def forward(net: NetParams, x: np.ndarray) -> np.ndarray:
    """Pure numpy forward pass; accepts a single vector or a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != net.in_dim:
        raise ConfigError(f"input width {x.shape[1]} != declared {net.in_dim}")
    h = x
    for w, b, a in zip(net.weights, net.biases, net.activations):
        h = _activate(h @ w + b, a)
    return h[0] if single else h


def net_tensors(net: NetParams) -> list:
    """Wrap the net's arrays as trainable leaf tensors (shared storage)."""
    return [(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True)) for w, b in zip(net.weights, net.biases)]


def forward_tape(net: NetParams, x, params: list | None = None) -> Tensor:
    """Forward pass on the autodiff tape.

    With `params` (from ``net_tensors``) the pass is differentiable in the
    parameters; without it the net's raw arrays act as constants and only
    the input carries gradient.
    """
    h = as_tensor(x)
    for i, act in enumerate(net.activations):
        w = params[i][0] if params is not None else net.weights[i]
        b = params[i][1] if params is not None else net.biases[i]
        h = _activate(h @ w + b, act)
    return h


def collect_grads(params: list) -> list:
    """Per-layer (dW, db) arrays after a backward pass (zeros if unused)."""
    out = []
    for w, b in params:
        gw = w.grad if w.grad is not None else np.zeros_like(w.data)
        gb = b.grad if b.grad is not None else np.zeros_like(b.data)
        out.append((gw, gb))
    return out


def gradients(net: NetParams, build_loss) -> tuple:
    """Evaluate a scalar loss over the net and return per-parameter gradients.

    `build_loss` receives a differentiable forward function (mirroring
    ``forward``) and must return a scalar Tensor.
    """
    params = net_tensors(net)
    loss = build_loss(lambda x: forward_tape(net, x, params))
    if loss.data.size != 1:
        raise ConfigError("loss must be scalar")
    if not np.isfinite(loss.data):
        raise NumericError("non-finite loss")
    loss.backward()
    return collect_grads(params), loss.item()


def fd_gradients(net: NetParams, loss_fn, h: float = 1e-5) -> list:
    """Central finite differences of a numpy loss over every parameter."""
    grads = []
    for w, b in zip(net.weights, net.biases):
        pair = []
        for arr in (w, b):
            g = np.zeros_like(arr)
            flat = arr.ravel()
            gf = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                hi = loss_fn(net)
                flat[i] = orig - h
                lo = loss_fn(net)
                flat[i] = orig
                gf[i] = (hi - lo) / (2.0 * h)
            pair.append(g)
        grads.append(tuple(pair))
    return grads


@dataclass
class AdamState:
    """Bias-corrected first/second moment accumulators for a parameter list."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def ensure(self, params: list) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]

    def apply(self, params: list, grads: list) -> None:
        """One Adam step, in place on `params`."""
        self.ensure(params)
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient in optimizer step")
        self.step += 1
        c1 = 1.0 - self.beta1**self.step
        c2 = 1.0 - self.beta2**self.step
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def flat_params(net: NetParams) -> list:
    """[W0, b0, W1, b1, ...] view used to bind a net to an AdamState."""
    out = []
    for w, b in zip(net.weights, net.biases):
        out.append(w)
        out.append(b)
    return out


def flat_grads(layer_grads: list) -> list:
    out = []
    for gw, gb in layer_grads:
        out.append(gw)
        out.append(gb)
    return out


def adam_step(net: NetParams, layer_grads: list, opt: AdamState) -> tuple:
    """Spec'd optimizer entry point: update `net` in place and return it."""
    opt.apply(flat_params(net), flat_grads(layer_grads))
    return net, opt


def blend(target: NetParams, online: NetParams, tau: float) -> NetParams:
    """Affine mix of two nets: (1 - tau) * target + tau * online."""
    if [w.shape for w in target.weights] != [w.shape for w in online.weights]:
        raise ConfigError("blend requires identically shaped nets")
    ws = [(1.0 - tau) * wt + tau * wo for wt, wo in zip(target.weights, online.weights)]
    bs = [(1.0 - tau) * bt + tau * bo for bt, bo in zip(target.biases, online.biases)]
    return NetParams(ws, bs, list(target.activations))


def blend_inplace(target: NetParams, online: NetParams, tau: float) -> None:
    for wt, wo in zip(target.weights, online.weights):
        wt *= 1.0 - tau
        wt += tau * wo
    for bt, bo in zip(target.biases, online.biases):
        bt *= 1.0 - tau
        bt += tau * bo
