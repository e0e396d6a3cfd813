"""Minimal dense neural-network engine.

Multilayer perceptrons with explicit reverse-mode gradients, an Adam
optimizer with coupled L2 weight decay, and the loss functions used by the
trainers in :mod:`mscale.pu` and :mod:`mscale.shosvd`. Everything is plain
numpy in double precision; parameters are treated as immutable values and
updates return new objects.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError

ACTIVATIONS = ("relu", "tanh", "identity")


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    # derivative w.r.t. pre-activation, expressed via z and the activation a
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class DenseLayer:
    """One affine layer ``a = act(W x + b)`` with W of shape (fan_out, fan_in)."""

    weight: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2:
            raise ValueError("layer weight must be a 2-D matrix")
        if b.shape != (w.shape[0],):
            raise ValueError(
                f"bias length {b.shape} does not match weight rows {w.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def fan_in(self) -> int:
        return self.weight.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class MLPParams:
    """Fully-connected network parameters, input to output order.

    Adjacent layer dimensions must chain and the final layer is linear
    (identity activation) so the output range is unconstrained.
    """

    layers: tuple[DenseLayer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for prev, cur in zip(layers, layers[1:]):
            if cur.fan_in != prev.fan_out:
                raise ValueError(
                    f"layer dimensions do not chain: {prev.fan_out} -> {cur.fan_in}"
                )
        if layers[-1].activation != "identity":
            raise ValueError("final layer activation must be identity")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out


@dataclass(frozen=True)
class GradientBundle:
    """Per-parameter partials mirroring an :class:`MLPParams`.

    ``aux`` optionally carries the gradient of an extra trainable vector
    that is optimized jointly with the network.
    """

    weight_grads: tuple[np.ndarray, ...]
    bias_grads: tuple[np.ndarray, ...]
    aux: np.ndarray | None = None


@dataclass(frozen=True)
class AdamState:
    """Adam moment estimates for a flat list of parameter arrays."""

    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 1e-4


def init_mlp(layer_dims: list[int], activations: list[str], seed: int) -> MLPParams:
    """Build an MLP with uniform fan-in-scaled weights and zero biases.

    ``layer_dims`` lists the widths including input and output, so
    ``len(activations) == len(layer_dims) - 1``. Reproducible under ``seed``.
    """
    if len(layer_dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    if any(d <= 0 for d in layer_dims):
        raise ValueError("layer dimensions must be positive")
    if len(activations) != len(layer_dims) - 1:
        raise ValueError("one activation per layer required")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(layer_dims, layer_dims[1:], activations):
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return MLPParams(tuple(layers))


def _forward_cached(params: MLPParams, x: np.ndarray):
    """Forward pass on a (batch, in) matrix, returning all layer activations."""
    acts = [x]
    pres = []
    a = x
    for layer in params.layers:
        z = a @ layer.weight.T + layer.bias
        a = _apply_activation(layer.activation, z)
        pres.append(z)
        acts.append(a)
    return acts, pres


def mlp_forward(params: MLPParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.input_dim,):
        raise ValueError(
            f"input shape {x.shape} does not match network input ({params.input_dim},)"
        )
    acts, _ = _forward_cached(params, x[None, :])
    return acts[-1][0]


def mlp_forward_batch(params: MLPParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a (batch, input_dim) matrix of inputs."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(
            f"batch shape {x.shape} does not match network input dim {params.input_dim}"
        )
    acts, _ = _forward_cached(params, x)
    return acts[-1]


def _backward_from_cache(params, acts, pres, upstream):
    weight_grads = []
    bias_grads = []
    delta = upstream
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        delta = delta * _activation_grad(layer.activation, pres[k], acts[k + 1])
        weight_grads.append(delta.T @ acts[k])
        bias_grads.append(delta.sum(axis=0))
        if k > 0:
            delta = delta @ layer.weight
    weight_grads.reverse()
    bias_grads.reverse()
    return GradientBundle(tuple(weight_grads), tuple(bias_grads))


def mlp_backward(params: MLPParams, x: np.ndarray, upstream: np.ndarray) -> GradientBundle:
    """Gradient of ``upstream . output`` w.r.t. every network parameter."""
    x = np.asarray(x, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    if x.shape != (params.input_dim,):
        raise ValueError(f"input shape {x.shape} does not match ({params.input_dim},)")
    if upstream.shape != (params.output_dim,):
        raise ValueError(
            f"upstream shape {upstream.shape} does not match ({params.output_dim},)"
        )
    acts, pres = _forward_cached(params, x[None, :])
    return _backward_from_cache(params, acts, pres, upstream[None, :])


def mlp_backward_batch(
    params: MLPParams, x: np.ndarray, upstream: np.ndarray
) -> GradientBundle:
    """Gradient of ``sum_b upstream[b] . output[b]`` over a batch of inputs."""
    x = np.asarray(x, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    if x.ndim != 2 or upstream.shape != (x.shape[0], params.output_dim):
        raise ValueError("batch input and upstream shapes do not match the network")
    acts, pres = _forward_cached(params, x)
    return _backward_from_cache(params, acts, pres, upstream)


# --- Adam -------------------------------------------------------------------

def _param_slots(params) -> list[np.ndarray]:
    """Flatten supported parameter containers into an ordered array list."""
    if isinstance(params, MLPParams):
        slots = []
        for layer in params.layers:
            slots.append(layer.weight)
            slots.append(layer.bias)
        return slots
    if isinstance(params, np.ndarray):
        return [params]
    return list(params)


def _grad_slots(grads) -> list[np.ndarray]:
    if isinstance(grads, GradientBundle):
        slots = []
        for dw, db in zip(grads.weight_grads, grads.bias_grads):
            slots.append(dw)
            slots.append(db)
        if grads.aux is not None:
            slots.append(grads.aux)
        return slots
    if isinstance(grads, np.ndarray):
        return [grads]
    return list(grads)


def _rebuild_like(params, slots: list[np.ndarray]):
    if isinstance(params, MLPParams):
        layers = []
        for k, layer in enumerate(params.layers):
            layers.append(replace(layer, weight=slots[2 * k], bias=slots[2 * k + 1]))
        return MLPParams(tuple(layers))
    if isinstance(params, np.ndarray):
        return slots[0]
    return slots


def init_adam(
    params,
    learning_rate: float = 1e-3,
    weight_decay: float = 1e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    """Fresh zero-moment optimizer state shaped like ``params``."""
    slots = _param_slots(params)
    zeros = tuple(np.zeros_like(s) for s in slots)
    return AdamState(
        first_moment=zeros,
        second_moment=tuple(np.zeros_like(s) for s in slots),
        step_count=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        weight_decay=weight_decay,
    )


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update with coupled L2 weight decay.

    The decay term is added to the gradient before the moment updates.
    ``params`` may be an :class:`MLPParams`, a bare array, or a list of
    arrays (with ``grads`` shaped to match); returns ``(new_params, new_state)``
    without mutating the inputs.
    """
    p_slots = _param_slots(params)
    g_slots = _grad_slots(grads)
    if len(p_slots) != len(g_slots):
        raise ValueError(
            f"got {len(g_slots)} gradient arrays for {len(p_slots)} parameter arrays"
        )
    t = state.step_count + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_p, new_m, new_v = [], [], []
    for k, (p, g, m, v) in enumerate(
        zip(p_slots, g_slots, state.first_moment, state.second_moment)
    ):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter slot {k}")
        g = g + state.weight_decay * p
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        new_p.append(p - state.learning_rate * update)
        new_m.append(m)
        new_v.append(v)
    new_state = replace(
        state,
        first_moment=tuple(new_m),
        second_moment=tuple(new_v),
        step_count=t,
    )
    return _rebuild_like(params, new_p), new_state


# --- losses -----------------------------------------------------------------

def relative_loss(prediction: np.ndarray, target: np.ndarray) -> float:
    """Normalized relative error ||p - t|| / ||t|| in percent."""
    p = np.asarray(prediction, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    t_norm = np.linalg.norm(t)
    if t_norm == 0.0:
        raise ValueError("relative loss undefined for a zero-norm target")
    return float(np.linalg.norm(p - t) / t_norm * 100.0)


def mse(prediction: np.ndarray, target: np.ndarray) -> float:
    """Mean squared componentwise difference."""
    p = np.asarray(prediction, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("mse undefined for empty vectors")
    return float(np.mean((p - t) ** 2))


# --- serialization ----------------------------------------------------------

def mlp_to_json(params: MLPParams) -> dict:
    """JSON-ready dict: row-major flat weights per layer, schema version 1."""
    return {
        "layers": [
            {
                "rows": layer.fan_out,
                "cols": layer.fan_in,
                "weights": [float(v) for v in layer.weight.ravel()],
                "bias": [float(v) for v in layer.bias],
                "activation": layer.activation,
            }
            for layer in params.layers
        ],
        "version": 1,
    }


def mlp_from_json(obj: dict) -> MLPParams:
    if obj.get("version") != 1:
        raise ValueError(f"unsupported network schema version {obj.get('version')!r}")
    layers = []
    for spec in obj["layers"]:
        rows, cols = int(spec["rows"]), int(spec["cols"])
        w = np.asarray(spec["weights"], dtype=float)
        if w.size != rows * cols:
            raise ValueError("weight data length does not match rows*cols")
        layers.append(
            DenseLayer(w.reshape(rows, cols), np.asarray(spec["bias"], dtype=float),
                       spec["activation"])
        )
    return MLPParams(tuple(layers))
