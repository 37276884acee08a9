"""Minimal dense-network substrate: layers, reverse-mode gradients, Adam.

Everything is float64 numpy.  A forward pass records enough intermediates
on a tape to compute exact parameter and input gradients.  Batches are
processed by one matrix product per layer; with rowwise=True the batch is
evaluated one row at a time instead, which makes batched evaluation
bit-identical to separate single-row calls (the strict sequential mode
used by reproducibility tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedGradient, ToothfillError

ACTIVATIONS = ("relu", "tanh", "none", "sigmoid")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ToothfillError("inconsistent layer shapes")
        if self.activation not in ACTIVATIONS:
            raise ToothfillError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ToothfillError("non-finite layer parameters")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


def _activate(name: str, pre: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "tanh":
        return np.tanh(pre)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-pre))
    return pre


def _activation_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - post * post
    if name == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(pre)


@dataclass
class GradientTape:
    """Per-layer inputs and post-activations from one forward pass."""

    layers: list
    inputs: list = field(default_factory=list)   # x fed to each layer, (B, n_in)
    pres: list = field(default_factory=list)     # pre-activations, (B, n_out)
    posts: list = field(default_factory=list)    # activations, (B, n_out)


def forward(stack: list[DenseLayer], x: np.ndarray, rowwise: bool = False):
    """Apply the layer stack.  Returns (output, tape).

    Accepts a single vector or a (B, n_in) batch.  rowwise=True evaluates
    the batch row by row (sequential mode).
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    batch = arr.reshape(1, -1) if single else arr
    if batch.shape[1] != stack[0].n_in:
        raise ToothfillError(
            f"input width {batch.shape[1]} != layer width {stack[0].n_in}")
    for prev, nxt in zip(stack, stack[1:]):
        if prev.n_out != nxt.n_in:
            raise ToothfillError("inconsistent layer chain")

    if rowwise and len(batch) > 1:
        outs = []
        tapes = []
        for row in batch:
            y, tp = forward(stack, row.reshape(1, -1), rowwise=False)
            outs.append(y)
            tapes.append(tp)
        tape = GradientTape(layers=list(stack))
        for li in range(len(stack)):
            tape.inputs.append(np.concatenate([t.inputs[li] for t in tapes], axis=0))
            tape.pres.append(np.concatenate([t.pres[li] for t in tapes], axis=0))
            tape.posts.append(np.concatenate([t.posts[li] for t in tapes], axis=0))
        out = np.concatenate(outs, axis=0)
        return out, tape

    tape = GradientTape(layers=list(stack))
    cur = batch
    for layer in stack:
        pre = cur @ layer.weights.T + layer.bias
        post = _activate(layer.activation, pre)
        tape.inputs.append(cur)
        tape.pres.append(pre)
        tape.posts.append(post)
        cur = post
    out = cur[0] if single else cur
    return out, tape


def backward(tape: GradientTape, dl_dy: np.ndarray):
    """Exact reverse-mode gradients for a recorded forward pass.

    Returns (grads, dl_dx) where grads is a list of (dW, db) per layer and
    dl_dx is the gradient w.r.t. the stack input.  dl_dy may be a vector
    (single row) or a (B, n_out) batch; gradients are summed over rows.
    """
    g = np.asarray(dl_dy, dtype=np.float64)
    if g.ndim == 1:
        g = g.reshape(1, -1)
    if g.shape != tape.posts[-1].shape:
        raise ToothfillError(
            f"cotangent shape {g.shape} != output shape {tape.posts[-1].shape}")
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(tape.layers)
    for li in range(len(tape.layers) - 1, -1, -1):
        layer = tape.layers[li]
        dpre = g * _activation_grad(layer.activation, tape.pres[li], tape.posts[li])
        dw = dpre.T @ tape.inputs[li]
        db = dpre.sum(axis=0)
        grads[li] = (dw, db)
        g = dpre @ layer.weights
    return grads, g


def backward_input_only(tape: GradientTape, dl_dy: np.ndarray) -> np.ndarray:
    """Input gradient without materializing parameter gradients.

    Used when only a latent code is being optimized; skips the dW products.
    """
    g = np.asarray(dl_dy, dtype=np.float64)
    if g.ndim == 1:
        g = g.reshape(1, -1)
    for li in range(len(tape.layers) - 1, -1, -1):
        layer = tape.layers[li]
        dpre = g * _activation_grad(layer.activation, tape.pres[li], tape.posts[li])
        g = dpre @ layer.weights
    return g


def init_dense_stack(sizes: list[int], activations: list[str],
                     rng: np.random.Generator,
                     scheme: str = "he_uniform") -> list[DenseLayer]:
    """Seeded uniform initialization.

    he_uniform: weights in +-sqrt(6/fan_in) (gain-stable through deep ReLU
    stacks, the default); fanin_uniform: weights in +-1/sqrt(fan_in).
    Biases are always uniform in +-1/sqrt(fan_in).
    """
    if len(activations) != len(sizes) - 1:
        raise ToothfillError("need one activation per layer")
    if scheme not in ("he_uniform", "fanin_uniform"):
        raise ToothfillError(f"unknown init scheme {scheme!r}")
    stack = []
    for n_in, n_out, act in zip(sizes, sizes[1:], activations):
        w_bound = np.sqrt(6.0 / n_in) if scheme == "he_uniform" else 1.0 / np.sqrt(n_in)
        b_bound = 1.0 / np.sqrt(n_in)
        w = rng.uniform(-w_bound, w_bound, size=(n_out, n_in))
        b = rng.uniform(-b_bound, b_bound, size=n_out)
        stack.append(DenseLayer(w, b, act))
    return stack


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params],
                   beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, lr: float):
    """One bias-corrected Adam update.  Mutates params/state in place and
    returns them.  lr=0 leaves parameters unchanged."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ToothfillError("params/grads/state length mismatch")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise DivergedGradient("non-finite gradient")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if lr != 0.0:
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
