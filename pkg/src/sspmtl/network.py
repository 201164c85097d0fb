"""Three-layer inverter network and its multi-task / task-learner training.

The network maps a standardized travel-time vector to a standardized
layered sound speed vector::

    hidden = sigmoid(W_h @ [x; 1])
    output = W_o @ [hidden; 1]

Pretraining shares ``W_h`` across profile clusters while every cluster keeps
its own ``W_o``. Only ``W_h`` is handed to the task learner, whose ``W_o``
starts from a fresh random draw. The task learner then runs per-sample
gradient steps. Each reference profile's step size is set by its inverse
spatio-temporal distance to the task.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .profile import (SoundSpeedProfile, Standardizer, TaskMeta, meta_fields,
                      spatiotemporal_distance)


@dataclass(frozen=True)
class NetworkParams:
    """``hidden``: (H, In+1) and ``output``: (Out, H+1); the last column is the bias."""

    hidden: np.ndarray
    output: np.ndarray

    def __post_init__(self):
        h = np.array(self.hidden, dtype=float)
        o = np.array(self.output, dtype=float)
        if h.ndim != 2 or o.ndim != 2 or o.shape[1] != h.shape[0] + 1:
            raise ShapeError(f"incompatible weight shapes {h.shape} and {o.shape}")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(o))):
            raise DataError("non-finite network weights")
        h.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "hidden", h)
        object.__setattr__(self, "output", o)

    @property
    def sizes(self):
        return self.hidden.shape[1] - 1, self.hidden.shape[0], self.output.shape[0]

    def l1(self) -> float:
        return float(np.abs(self.hidden).sum() + np.abs(self.output).sum())

    def with_output(self, output) -> NetworkParams:
        return NetworkParams(self.hidden, output)


@dataclass(frozen=True)
class MtlConfig:
    input_size: int = 120
    hidden_size: int = 300
    output_size: int = 50
    cluster_count: int = 10
    clusters_per_epoch: int = 3
    shots_per_cluster: int = 10
    pretrain_epochs: int = 20
    task_epochs: int = 20
    task_shots_per_epoch: int = 5
    base_rate: float = 2e-6
    task_base_rate: float = 0.01
    l1_coefficient: float = 1e-4
    l1_per_shot: bool = True
    lambda_rate: float = 0.9
    seed: int = 0

    def __post_init__(self):
        counts = ("input_size", "hidden_size", "output_size", "cluster_count",
                  "clusters_per_epoch", "shots_per_cluster", "task_shots_per_epoch")
        for name in counts:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.pretrain_epochs < 0 or self.task_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.clusters_per_epoch > self.cluster_count:
            raise ConfigError("clusters_per_epoch exceeds cluster_count")
        if self.base_rate <= 0 or self.task_base_rate <= 0:
            raise ConfigError("learning rates must be positive")
        if self.l1_coefficient < 0:
            raise ConfigError("l1_coefficient must be >= 0")
        if not 0.0 <= self.lambda_rate <= 1.0:
            raise ConfigError("lambda_rate must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> MtlConfig:
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def replace(self, **kw) -> MtlConfig:
        return replace(self, **kw)


def init_params(config: MtlConfig, seed: int = 0) -> NetworkParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    n_in, n_hid, n_out = config.input_size, config.hidden_size, config.output_size
    return NetworkParams(_glorot(rng, n_in, n_hid), _glorot(rng, n_hid, n_out))


def _glorot(rng, fan_in, fan_out):
    r = glorot_limit(fan_in, fan_out)
    w = np.zeros((fan_out, fan_in + 1))
    w[:, :-1] = rng.uniform(-r, r, size=(fan_out, fan_in))
    return w


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_output(config: MtlConfig, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return _glorot(rng, config.hidden_size, config.output_size)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _augment(x):
    return np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)


def forward(params: NetworkParams, x):
    """Network output and the cache needed for backpropagation.

    ``x`` is one input vector or a batch of row vectors.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.hidden.shape[1] - 1:
        raise ShapeError(f"input length {x.shape[-1]} != {params.hidden.shape[1] - 1}")
    xa = _augment(x)
    h = _sigmoid(xa @ params.hidden.T)
    ha = _augment(h)
    y = ha @ params.output.T
    return y, (xa, h, ha)


def data_cost(params: NetworkParams, x, y) -> float:
    """Half squared error summed over outputs (and over rows of a batch)."""
    pred, _ = forward(params, x)
    y = np.asarray(y, dtype=float)
    if y.shape != pred.shape:
        raise ShapeError(f"label shape {y.shape} != output shape {pred.shape}")
    return 0.5 * float(np.sum((y - pred) ** 2))


def task_cost(params: NetworkParams, x, y) -> float:
    """Per-sample cost of the task learner (no regularizer)."""
    return data_cost(params, x, y)


def pretrain_cost(params: NetworkParams, x, y, mu: float, per_shot: bool = True) -> float:
    """Cluster cost: summed data cost plus an L1 weight penalty.

    With ``per_shot`` the penalty is counted once per shot, as it sits inside
    the per-shot sum.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    count = x.shape[0] if per_shot else 1
    return data_cost(params, x, y) + mu * count * params.l1()


def gradients(params: NetworkParams, x, y, mu: float = 0.0, l1_count: int = 0):
    """Cost and (d/dW_h, d/dW_o) for a sample or batch.

    The L1 term ``mu * l1_count * |W|_1`` uses subgradient 0 at w = 0.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    pred, (xa, h, ha) = forward(params, x)
    if y.shape != pred.shape:
        raise ShapeError(f"label shape {y.shape} != output shape {pred.shape}")
    err = pred - y
    g_out = err.T @ ha
    back = (err @ params.output[:, :-1]) * h * (1.0 - h)
    g_hid = back.T @ xa
    cost = 0.5 * float(np.sum(err * err))
    if mu and l1_count:
        cost += mu * l1_count * params.l1()
        g_out = g_out + mu * l1_count * np.sign(params.output)
        g_hid = g_hid + mu * l1_count * np.sign(params.hidden)
    return cost, g_hid, g_out


# --- multi-task pretraining --------------------------------------------------


@dataclass
class ClusterData:
    """Standardized (inputs, labels) for one profile cluster."""

    inputs: np.ndarray
    labels: np.ndarray
    cluster_id: int = 0

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=float))
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError("inputs and labels differ in sample count")

    def __len__(self):
        return self.inputs.shape[0]


@dataclass
class PretrainState:
    """Shared input-to-hidden weights plus one output head per cluster."""

    hidden: np.ndarray
    heads: list
    losses: list = field(default_factory=list)

    def params_for(self, n: int) -> NetworkParams:
        return NetworkParams(self.hidden, self.heads[n])


def _draw(rng, count, k):
    """``k`` indices out of ``count``; with replacement only when ``count < k``."""
    if count >= k:
        return rng.choice(count, size=k, replace=False)
    return rng.integers(count, size=k)


def pretrain_epoch(state: PretrainState, clusters: Sequence[ClusterData], config: MtlConfig,
                   epoch: int) -> PretrainState:
    """One round of updates over ``clusters_per_epoch`` randomly drawn clusters.

    All per-cluster gradients are taken at the epoch's starting weights.
    The shared weights receive the sum of the per-cluster steps, each
    scaled by ``base_rate / N``. Each head moves only with its own
    cluster's step.
    """
    if len(clusters) < config.clusters_per_epoch:
        raise ConfigError("fewer clusters than clusters_per_epoch")
    rng = np.random.default_rng([config.seed, 7919, epoch])
    chosen = rng.choice(len(clusters), size=config.clusters_per_epoch, replace=False)
    n = config.clusters_per_epoch
    step = config.base_rate / n
    d_hidden = np.zeros_like(state.hidden)
    heads = list(state.heads)
    total = 0.0
    for c in chosen:
        data = clusters[c]
        if len(data) == 0:
            raise DataError(f"cluster {data.cluster_id} is empty")
        idx = _draw(rng, len(data), config.shots_per_cluster)
        l1_count = len(idx) if config.l1_per_shot else 1
        cost, g_h, g_o = gradients(
            state.params_for(c), data.inputs[idx], data.labels[idx],
            config.l1_coefficient, l1_count,
        )
        total += cost
        d_hidden += step * g_h
        heads[c] = state.heads[c] - step * g_o
    return PretrainState(state.hidden - d_hidden, heads, state.losses + [total / n])


def pretrain(clusters: Sequence[ClusterData], config: MtlConfig, seed: int | None = None
             ) -> PretrainState:
    """Multi-task learner training. Returns the shared weights and the discarded heads."""
    if not clusters:
        raise DataError("no pretraining clusters")
    seed = config.seed if seed is None else seed
    config = config.replace(seed=seed)
    base = init_params(config, seed)
    heads = [init_output(config, seed + 1 + n) for n in range(len(clusters))]
    state = PretrainState(base.hidden.copy(), heads)
    for p in range(config.pretrain_epochs):
        state = pretrain_epoch(state, clusters, config, p)
    return state


# --- task learner --------------------------------------------------------------


def task_learning_rates(task: TaskMeta, references: Sequence, base_rate: float,
                        lam: float = 0.9) -> np.ndarray:
    """Per-reference step sizes proportional to inverse spatio-temporal distance.

    The rates sum to ``base_rate``. References at zero distance share the
    whole rate equally and the others get none.
    """
    if not references:
        raise DataError("no reference samples")
    phi = np.array([spatiotemporal_distance(task, r, lam) for r in references])
    return rates_from_distances(phi, base_rate)


def rates_from_distances(phi, base_rate: float) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise DataError("negative distance")
    zero = phi == 0
    if zero.any():
        return np.where(zero, base_rate / zero.sum(), 0.0)
    # scaled so equal distances give weights of exactly 1 and rates of exactly base/I
    inv = phi.min() / phi
    return base_rate * inv / inv.sum()


@dataclass
class TrainResult:
    params: NetworkParams
    losses: list


def train_task_learner(params: NetworkParams, inputs, labels, rates, epochs: int,
                       shots_per_epoch: int, seed: int) -> TrainResult:
    """Per-sample gradient descent with one step size per training sample.

    Each epoch draws ``shots_per_epoch`` samples and takes one step on each.
    ``losses[j]`` is the mean task cost over all samples after epoch ``j+1``.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    rates = np.broadcast_to(np.asarray(rates, dtype=float), (inputs.shape[0],))
    if inputs.shape[0] == 0:
        raise DataError("no task samples")
    if inputs.shape[0] != labels.shape[0]:
        raise ShapeError("inputs and labels differ in sample count")
    rng = np.random.default_rng([seed, 104729])
    w_h, w_o = params.hidden.copy(), params.output.copy()
    losses = []
    count = inputs.shape[0]
    for _ in range(epochs):
        for i in _draw(rng, count, shots_per_epoch):
            if rates[i] == 0.0:
                continue
            _, g_h, g_o = gradients(NetworkParams(w_h, w_o), inputs[i], labels[i])
            w_h -= rates[i] * g_h
            w_o -= rates[i] * g_o
        losses.append(data_cost(NetworkParams(w_h, w_o), inputs, labels) / count)
    return TrainResult(NetworkParams(w_h, w_o), losses)


def finetune_task(shared_hidden, inputs, labels, rates, config: MtlConfig, seed: int
                  ) -> TrainResult:
    """Task learner: pretrained ``W_h``, fresh random ``W_o``."""
    start = NetworkParams(shared_hidden, init_output(config, seed))
    return train_task_learner(start, inputs, labels, rates, config.task_epochs,
                              config.task_shots_per_epoch, seed)


# --- inversion -------------------------------------------------------------------


def invert(params: NetworkParams, observation, input_std: Standardizer,
           label_std: Standardizer, depths, meta: TaskMeta | None = None,
           id: str = "inverted") -> SoundSpeedProfile:
    """One forward pass from travel times to a layered profile."""
    times = getattr(observation, "times", observation)
    z = input_std.transform(times)
    out, _ = forward(params, z)
    speeds = label_std.inverse(out)
    if np.shape(depths) != speeds.shape:
        raise ShapeError("depth grid does not match network output")
    kwargs = meta_fields(meta) if meta is not None else {}
    return SoundSpeedProfile(depths, speeds, id=id, **kwargs)


def invert_speeds(params: NetworkParams, times, input_std: Standardizer,
                  label_std: Standardizer) -> np.ndarray:
    out, _ = forward(params, input_std.transform(times))
    return label_std.inverse(out)
