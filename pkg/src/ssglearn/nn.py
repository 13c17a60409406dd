"""Minimal dense network core with exact reverse-mode gradients.

An Mlp is a stack of affine layers; every hidden layer applies LeakyReLU
and, in training mode, inverted dropout. The forward pass records a tape
(layer inputs, pre-activations, dropout masks) from which the backward
pass reproduces the exact gradients of the recorded computation. ADAM
with bias correction drives the updates. Everything is float64 numpy and
deterministic given (params, input, rng).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TapeMismatch

__all__ = [
    "MlpSpec",
    "Mlp",
    "MlpTape",
    "MlpGrads",
    "AdamState",
    "leaky_relu",
    "init_mlp",
    "mlp_forward",
    "mlp_backward",
    "mlp_param_arrays",
    "mlp_grad_arrays",
    "adam_init",
    "adam_step",
]


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input first, output last) plus activation/dropout
    settings shared by all hidden layers."""

    widths: tuple[int, ...]
    slope: float = 0.01
    dropout: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ValueError(f"widths must be >= 2 positive entries, got {self.widths}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not math.isfinite(self.slope):
            raise ValueError(f"slope must be finite, got {self.slope}")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list[np.ndarray]  # (fan_in, fan_out) per affine layer
    biases: list[np.ndarray]  # (fan_out,) per affine layer


@dataclass
class MlpTape:
    """Everything the backward pass needs about one forward pass."""

    spec: MlpSpec
    n_rows: int
    inputs: list[np.ndarray]  # input to each affine layer
    preacts: list[np.ndarray]  # pre-activation of each hidden layer
    masks: list[np.ndarray | None]  # scaled dropout mask per hidden layer


@dataclass
class MlpGrads:
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]


def leaky_relu(z: np.ndarray, slope: float = 0.01) -> np.ndarray:
    return np.where(z > 0.0, z, slope * z)


def init_mlp(spec: MlpSpec, rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return Mlp(spec, weights, biases)


def mlp_forward(
    mlp: Mlp,
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, MlpTape]:
    """Batched forward pass over row vectors; returns output and tape.

    The final affine layer is linear; hidden layers use LeakyReLU and, in
    training mode, inverted dropout (masks scaled by 1/(1-rate) so
    evaluation needs no rescaling).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected 2-d input, got shape {x.shape}")
    if x.shape[1] != mlp.spec.widths[0]:
        raise ShapeMismatch(
            f"input width {x.shape[1]} does not match spec width {mlp.spec.widths[0]}"
        )
    use_dropout = training and mlp.spec.dropout > 0.0
    if use_dropout and rng is None:
        raise ValueError("training with dropout requires an rng")

    tape = MlpTape(mlp.spec, x.shape[0], [], [], [])
    h = x
    last = mlp.spec.n_layers - 1
    for layer, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        tape.inputs.append(h)
        z = h @ w + b
        if layer == last:
            h = z
            break
        tape.preacts.append(z)
        h = leaky_relu(z, mlp.spec.slope)
        if use_dropout:
            keep = 1.0 - mlp.spec.dropout
            mask = (rng.random(h.shape) < keep) / keep
            tape.masks.append(mask)
            h = h * mask
        else:
            tape.masks.append(None)
    return h, tape


def mlp_backward(mlp: Mlp, tape: MlpTape, dy: np.ndarray) -> tuple[MlpGrads, np.ndarray]:
    """Exact gradients of the recorded forward pass.

    dy holds the upstream gradient per output row; returns parameter
    gradients (accumulated over rows in order) and the gradient wrt the
    forward input.
    """
    dy = np.asarray(dy, dtype=np.float64)
    if tape.spec is not mlp.spec and tape.spec != mlp.spec:
        raise TapeMismatch("tape was recorded with a different spec")
    if dy.shape != (tape.n_rows, mlp.spec.widths[-1]):
        raise TapeMismatch(
            f"upstream gradient shape {dy.shape} does not match "
            f"({tape.n_rows}, {mlp.spec.widths[-1]})"
        )
    n_layers = mlp.spec.n_layers
    d_weights: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    d_biases: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    grad = dy
    for layer in range(n_layers - 1, -1, -1):
        if layer < n_layers - 1:
            mask = tape.masks[layer]
            if mask is not None:
                grad = grad * mask
            z = tape.preacts[layer]
            grad = grad * np.where(z > 0.0, 1.0, mlp.spec.slope)
        x = tape.inputs[layer]
        d_weights[layer] = x.T @ grad
        d_biases[layer] = grad.sum(axis=0)
        grad = grad @ mlp.weights[layer].T
    return MlpGrads(d_weights, d_biases), grad


def mlp_param_arrays(mlp: Mlp) -> list[np.ndarray]:
    """Flat parameter list in the fixed order W0, b0, W1, b1, ..."""
    out: list[np.ndarray] = []
    for w, b in zip(mlp.weights, mlp.biases):
        out.extend((w, b))
    return out


def mlp_grad_arrays(grads: MlpGrads) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for dw, db in zip(grads.d_weights, grads.d_biases):
        out.extend((dw, db))
    return out


@dataclass
class AdamState:
    """First/second moment estimates per parameter tensor plus the step
    counter used for bias correction."""

    learning_rate: float
    beta1: float
    beta2: float
    eps: float
    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]


def adam_init(
    params: list[np.ndarray],
    learning_rate: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    return AdamState(
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        step=0,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> list[np.ndarray]:
    """One ADAM update; mutates the moment state, returns new parameter
    arrays. From a fresh state a zero gradient is an exact no-op."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ShapeMismatch("parameter/gradient/state lengths disagree")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeMismatch(f"param {i}: shape {p.shape} vs grad {g.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        out.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
    return out
