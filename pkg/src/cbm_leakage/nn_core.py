"""Single-hidden-layer network with dropout, exact backprop and Adam.

Everything here is plain numpy. The network maps ``in_dim`` features to
``out_dim`` sigmoid probabilities through one hidden layer of ``hidden_dim``
units (ELU by default, ReLU on request). ``hidden_dim = 0`` gives a
linear -> sigmoid model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

PARAM_NAMES = ("W1", "b1", "W2", "b2")
ACTIVATIONS = ("elu", "relu")


def activate(pre: np.ndarray, activation: str = "elu") -> np.ndarray:
    if activation == "relu":
        return np.maximum(pre, 0.0)
    if activation == "elu":
        return np.where(pre > 0.0, pre, np.expm1(np.minimum(pre, 0.0)))
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


def activation_grad(pre: np.ndarray, hidden: np.ndarray, activation: str = "elu") -> np.ndarray:
    """Derivative of the activation given its input and (unmasked) output.

    The ReLU derivative at exactly zero is 0. ELU is continuously
    differentiable, with derivative ``exp(z) = hidden + 1`` below zero.
    """
    if activation == "relu":
        return (pre > 0.0).astype(np.float64)
    if activation == "elu":
        return np.where(pre > 0.0, 1.0, hidden + 1.0)
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


@dataclass
class Mlp:
    in_dim: int
    hidden_dim: int
    out_dim: int
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    dropout_p: float = 0.5
    activation: str = "elu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1 or self.hidden_dim < 0:
            raise ValueError(
                f"invalid dimensions in={self.in_dim} hidden={self.hidden_dim} "
                f"out={self.out_dim}"
            )
        if not 0.0 <= self.dropout_p <= 1.0:
            raise ValueError(f"dropout_p must lie in [0, 1], got {self.dropout_p}")
        width = self.hidden_dim if self.hidden_dim else self.in_dim
        expected = {
            "W1": (self.hidden_dim, self.in_dim),
            "b1": (self.hidden_dim,),
            "W2": (self.out_dim, width),
            "b2": (self.out_dim,),
        }
        for name, shape in expected.items():
            value = getattr(self, name)
            if value.shape != shape:
                raise ValueError(f"{name} has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "Mlp":
        return replace(self, **{k: v.copy() for k, v in self.params.items()})


@dataclass(frozen=True)
class DropoutMask:
    keep: np.ndarray
    scale: float

    def __post_init__(self):
        if not np.isfinite(self.scale):
            raise ValueError("dropout scale must be finite")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


# Defaults per dataset family.
BLOB_TRAIN = TrainConfig(epochs=200, batch_size=32, learning_rate=4e-3)
MNIST_TRAIN = TrainConfig(epochs=20, batch_size=256)


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, mlp: Mlp) -> "AdamState":
        return cls(
            0,
            {k: np.zeros_like(p) for k, p in mlp.params.items()},
            {k: np.zeros_like(p) for k, p in mlp.params.items()},
        )


def init_mlp(in_dim, hidden_dim, out_dim, dropout_p=0.5, seed=0, activation="elu") -> Mlp:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    if in_dim < 1 or out_dim < 1 or hidden_dim < 0:
        raise ValueError(
            f"invalid dimensions in={in_dim} hidden={hidden_dim} out={out_dim}"
        )
    if not 0.0 <= dropout_p < 1.0:
        raise ValueError(f"dropout_p must lie in [0, 1), got {dropout_p}")
    rng = np.random.default_rng(seed)

    def glorot(fan_out, fan_in):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_out, fan_in))

    if hidden_dim:
        W1 = glorot(hidden_dim, in_dim)
        W2 = glorot(out_dim, hidden_dim)
    else:
        W1 = np.zeros((0, in_dim))
        W2 = glorot(out_dim, in_dim)
    return Mlp(
        in_dim, hidden_dim, out_dim,
        W1, np.zeros(hidden_dim), W2, np.zeros(out_dim),
        dropout_p=float(dropout_p), activation=activation,
    )


def sample_mask(rng: np.random.Generator, dropout_p: float, hidden_dim: int) -> DropoutMask:
    """One Bernoulli(1 - p) keep vector with inverted-dropout scaling."""
    if not 0.0 <= dropout_p < 1.0:
        raise ValueError(f"dropout_p must lie in [0, 1), got {dropout_p}")
    if dropout_p == 0.0:
        return DropoutMask(np.ones(hidden_dim), 1.0)
    keep = (rng.random(hidden_dim) >= dropout_p).astype(np.float64)
    return DropoutMask(keep, 1.0 / (1.0 - dropout_p))


def _check_X(mlp: Mlp, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != mlp.in_dim:
        raise ValueError(f"expected X of shape (n, {mlp.in_dim}), got {X.shape}")
    return X


def _check_mask(mlp: Mlp, mask: DropoutMask | None):
    if mask is not None and mlp.hidden_dim and mask.keep.shape != (mlp.hidden_dim,):
        raise ValueError(
            f"mask length {mask.keep.shape} does not match hidden_dim {mlp.hidden_dim}"
        )


def hidden_units(mlp: Mlp, X) -> np.ndarray:
    """Hidden-layer output before dropout (``X`` itself for the linear model)."""
    X = _check_X(mlp, X)
    if not mlp.hidden_dim:
        return X
    return activate(X @ mlp.W1.T + mlp.b1, mlp.activation)


def forward(mlp: Mlp, X, mask: DropoutMask | None = None):
    """Return ``(hidden, logits, probs)`` for a batch ``X`` of shape (n, in_dim).

    For the linear model (``hidden_dim == 0``) ``hidden`` is ``X`` itself and
    the mask is ignored.
    """
    X = _check_X(mlp, X)
    _check_mask(mlp, mask)
    if mlp.hidden_dim:
        hidden = activate(X @ mlp.W1.T + mlp.b1, mlp.activation)
        if mask is not None:
            hidden = hidden * (mask.keep * mask.scale)
    else:
        hidden = X
    logits = hidden @ mlp.W2.T + mlp.b2
    return hidden, logits, expit(logits)


def bce_loss(logits, targets) -> float:
    """Mean binary cross-entropy computed from logits.

    Uses ``max(z, 0) - z t + log1p(exp(-|z|))`` so large logits never overflow.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ValueError(f"shape mismatch {logits.shape} vs {targets.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits contain non-finite values")
    per_cell = np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))
    return float(per_cell.mean())


def backprop(mlp: Mlp, X, C_targets, mask: DropoutMask | None = None) -> dict[str, np.ndarray]:
    """Exact gradient of :func:`bce_loss` w.r.t. every parameter.

    With ReLU the derivative at exactly zero pre-activation is taken as 0.
    """
    X = _check_X(mlp, X)
    C_targets = np.asarray(C_targets, dtype=np.float64)
    if C_targets.shape != (X.shape[0], mlp.out_dim):
        raise ValueError(
            f"targets shape {C_targets.shape}, expected {(X.shape[0], mlp.out_dim)}"
        )
    _check_mask(mlp, mask)
    n = X.shape[0]

    if mlp.hidden_dim:
        pre = X @ mlp.W1.T + mlp.b1
        act = activate(pre, mlp.activation)
        unit_scale = mask.keep * mask.scale if mask is not None else 1.0
        hidden = act * unit_scale
    else:
        hidden = X
    logits = hidden @ mlp.W2.T + mlp.b2

    d_logits = (expit(logits) - C_targets) / (n * mlp.out_dim)
    grads = {
        "W2": d_logits.T @ hidden,
        "b2": d_logits.sum(axis=0),
    }
    if mlp.hidden_dim:
        d_pre = (d_logits @ mlp.W2) * unit_scale * activation_grad(pre, act, mlp.activation)
        grads["W1"] = d_pre.T @ X
        grads["b1"] = d_pre.sum(axis=0)
    else:
        grads["W1"] = np.zeros_like(mlp.W1)
        grads["b1"] = np.zeros_like(mlp.b1)
    return grads


def adam_step(mlp: Mlp, grads, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam update. Returns a new ``(Mlp, AdamState)``."""
    for name in PARAM_NAMES:
        if grads[name].shape != getattr(mlp, name).shape:
            raise ValueError(f"gradient {name} has shape {grads[name].shape}")
        if state.m and state.m[name].shape != getattr(mlp, name).shape:
            raise ValueError(f"optimizer state {name} does not match parameters")
    if not state.m:
        state = AdamState.zeros_like(mlp)

    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_params, m_new, v_new = {}, {}, {}
    for name, p in mlp.params.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        new_params[name] = p - config.learning_rate * (m / bc1) / (
            np.sqrt(v / bc2) + config.epsilon
        )
        m_new[name], v_new[name] = m, v
    return replace(mlp, **new_params), AdamState(t, m_new, v_new)


def train_network(mlp: Mlp, X, C_targets, config: TrainConfig):
    """Minibatch Adam training with a fresh dropout mask per batch.

    Row order is reshuffled every epoch from a generator seeded with
    ``config.seed``. ``loss_history`` holds the full-data, dropout-off loss
    after each epoch.
    """
    X = _check_X(mlp, X)
    C_targets = np.asarray(C_targets, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if C_targets.shape != (n, mlp.out_dim):
        raise ValueError(f"targets shape {C_targets.shape}, expected {(n, mlp.out_dim)}")

    rng = np.random.default_rng(config.seed)
    state = AdamState.zeros_like(mlp)
    mlp = mlp.copy()
    use_dropout = mlp.hidden_dim > 0 and mlp.dropout_p > 0.0
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            mask = sample_mask(rng, mlp.dropout_p, mlp.hidden_dim) if use_dropout else None
            grads = backprop(mlp, X[idx], C_targets[idx], mask)
            mlp, state = adam_step(mlp, grads, state, config)
        history.append(bce_loss(forward(mlp, X)[1], C_targets))
    return mlp, history
