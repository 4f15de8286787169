"""Minimal dense-network numeric core: forward passes, exact reverse-mode
gradients, an adaptive-moment optimizer and Polyak target updates.

Everything is float64 numpy. Weights are stored as (fan_in, fan_out) matrices
so a batch forward is a chain of ``x @ W + b``. Gradients are computed by
hand-rolled backprop through the cached layer activations; activations are
restricted to ones whose derivative is recoverable from the output (relu,
tanh, linear), which keeps the cache small.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


def _apply(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _derivative_from_output(name: str, out: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (out > 0).astype(np.float64)
    if name == "tanh":
        return 1.0 - out * out
    return np.ones_like(out)


class DenseNet:
    """Fully connected net: dims = [in, hidden..., out]."""

    def __init__(
        self,
        dims: list[int],
        hidden_activation: str = "relu",
        output_activation: str = "linear",
        rng: np.random.Generator | None = None,
    ):
        if len(dims) < 2:
            raise ValueError(f"need at least input and output dims, got {dims}")
        if hidden_activation not in ACTIVATIONS or output_activation not in ACTIVATIONS:
            raise ValueError(f"activations must be one of {ACTIVATIONS}")
        self.dims = list(dims)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        rng = rng or np.random.default_rng()
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def _activation(self, layer: int) -> str:
        return self.output_activation if layer == self.n_layers - 1 else self.hidden_activation

    def parameters(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]; entries are live references."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        single = np.ndim(x) == 1
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if h.shape[1] != self.dims[0]:
            raise ValueError(f"input dim {h.shape[1]} != expected {self.dims[0]}")
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = _apply(self._activation(layer), h @ w + b)
        return h[0] if single else h

    def forward_cache(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batch forward keeping every layer's output for backprop.

        Returns (output, cache) where cache[0] is the input and cache[l+1]
        is layer l's post-activation output.
        """
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if h.shape[1] != self.dims[0]:
            raise ValueError(f"input dim {h.shape[1]} != expected {self.dims[0]}")
        cache = [h]
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = _apply(self._activation(layer), h @ w + b)
            cache.append(h)
        return h, cache

    def backward(
        self,
        cache: list[np.ndarray],
        grad_output: np.ndarray,
        param_grads: bool = True,
        input_grad: bool = False,
    ) -> tuple[list[np.ndarray] | None, np.ndarray | None]:
        """Reverse-mode gradients given dLoss/dOutput for the cached batch.

        Returns (grads, grad_input); grads is ordered like parameters().
        Skipping ``param_grads`` avoids the weight-gradient matmuls when only
        the input gradient is needed (critic-to-action backprop).
        """
        delta = np.atleast_2d(np.asarray(grad_output, dtype=np.float64))
        grads: list[np.ndarray] | None = [None] * (2 * self.n_layers) if param_grads else None
        for layer in range(self.n_layers - 1, -1, -1):
            delta = delta * _derivative_from_output(self._activation(layer), cache[layer + 1])
            if param_grads:
                grads[2 * layer] = cache[layer].T @ delta
                grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0 or input_grad:
                delta = delta @ self.weights[layer].T
        return grads, (delta if input_grad else None)

    def clone(self) -> "DenseNet":
        twin = DenseNet.__new__(DenseNet)
        twin.dims = list(self.dims)
        twin.hidden_activation = self.hidden_activation
        twin.output_activation = self.output_activation
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin

    def copy_from(self, other: "DenseNet") -> None:
        _check_same_architecture(self, other)
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine[...] = theirs

    def to_dict(self) -> dict:
        return {
            "dims": self.dims,
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNet":
        net = cls(d["dims"], d["hidden_activation"], d["output_activation"])
        net.weights = [np.asarray(w, dtype=np.float64) for w in d["weights"]]
        net.biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        for w, (fan_in, fan_out) in zip(net.weights, zip(net.dims[:-1], net.dims[1:])):
            if w.shape != (fan_in, fan_out):
                raise ValueError(f"stored weight shape {w.shape} != ({fan_in}, {fan_out})")
        return net


def _check_same_architecture(a: DenseNet, b: DenseNet) -> None:
    if (
        a.dims != b.dims
        or a.hidden_activation != b.hidden_activation
        or a.output_activation != b.output_activation
    ):
        raise ValueError(f"architecture mismatch: {a.dims} vs {b.dims}")


def gradients(net: DenseNet, x: np.ndarray, loss) -> list[np.ndarray]:
    """Parameter gradients of a scalar loss over the net's outputs at x.

    ``loss`` maps the (batch, out) output array to (value, dLoss/dOutput);
    only the gradient part is used here, the value is the caller's business.
    """
    out, cache = net.forward_cache(x)
    _, grad_out = loss(out)
    grads, _ = net.backward(cache, grad_out)
    return grads


def soft_update(target: DenseNet, source: DenseNet, tau: float) -> DenseNet:
    """target <- (1 - tau) * target + tau * source, elementwise, in place."""
    _check_same_architecture(target, source)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    for t, s in zip(target.parameters(), source.parameters()):
        t *= 1.0 - tau
        t += tau * s
    return target


@dataclass
class AdamState:
    """Adaptive-moment estimates with bias correction."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "step": self.step,
            "m": [a.tolist() for a in self.m],
            "v": [a.tolist() for a in self.v],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdamState":
        state = cls(d["learning_rate"], d["beta1"], d["beta2"], d["eps"], d["step"])
        state.m = [np.asarray(a, dtype=np.float64) for a in d["m"]]
        state.v = [np.asarray(a, dtype=np.float64) for a in d["v"]]
        return state

    def clone(self) -> "AdamState":
        twin = AdamState(self.learning_rate, self.beta1, self.beta2, self.eps, self.step)
        twin.m = [a.copy() for a in self.m]
        twin.v = [a.copy() for a in self.v]
        return twin


def optimizer_step(
    opt: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> list[np.ndarray]:
    """One in-place update of params along their gradients."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params vs {len(grads)} grads")
    if not opt.m:
        opt.m = [np.zeros_like(p) for p in params]
        opt.v = [np.zeros_like(p) for p in params]
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        if p.shape != g.shape:
            raise ValueError(f"param shape {p.shape} != grad shape {g.shape}")
    opt.step += 1
    b1c = 1.0 - opt.beta1**opt.step
    b2c = 1.0 - opt.beta2**opt.step
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + opt.eps)
    return params
