"""Comparison inverters: inverse-distance interpolation, EOF matched-field
search driven by particle swarm optimization, and a plain feed-forward net."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .eof import EofBasis
from .errors import ConfigError, DataError, ShapeError
from .network import (MtlConfig, NetworkParams, TrainResult, init_output, init_params,
                      invert_speeds, train_task_learner)
from .profile import SoundSpeedProfile, Standardizer, TaskMeta, location_distance, meta_fields
from .ray import ObservationGeometry


# --- spatial interpolation ------------------------------------------------------


def sip_weights(task: TaskMeta, references: Sequence[SoundSpeedProfile]) -> np.ndarray:
    """Normalized inverse spatial-distance weights (day of year ignored)."""
    if not references:
        raise DataError("no reference profiles")
    d = np.array([location_distance(task.location, r.meta.location) for r in references])
    zero = d == 0.0
    if zero.any():
        return zero / zero.sum()
    w = 1.0 / d
    return w / w.sum()


def sip_invert(task: TaskMeta, references: Sequence[SoundSpeedProfile], depths=None
               ) -> SoundSpeedProfile:
    """Weighted mean of ``references`` sampled on ``depths`` (default: the first
    reference's grid)."""
    references = list(references)
    w = sip_weights(task, references)
    if depths is None:
        depths = references[0].depths
    depths = np.asarray(depths, dtype=float)
    for r in references:
        if r.depths[0] > depths[0] + 1e-9 or r.depths[-1] < depths[-1] - 1e-9:
            raise ShapeError(f"reference {r.id!r} does not cover the output grid")
    speeds = w @ np.array([np.interp(depths, r.depths, r.speeds) for r in references])
    return SoundSpeedProfile(depths, speeds, id="sip", **meta_fields(task))


# --- particle swarm ------------------------------------------------------------------


@dataclass(frozen=True)
class PsoConfig:
    particles: int = 20
    iterations: int = 30
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    bound_scale: float = 3.0
    velocity_clamp: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.particles < 2:
            raise ConfigError("need at least 2 particles")
        if self.iterations < 1:
            raise ConfigError("need at least 1 iteration")
        if self.bound_scale < 0 or self.velocity_clamp <= 0:
            raise ConfigError("bound_scale must be >= 0 and velocity_clamp > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> PsoConfig:
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    def replace(self, **kw) -> PsoConfig:
        return replace(self, **kw)


@dataclass(frozen=True)
class PsoResult:
    position: np.ndarray
    fitness: float
    history: tuple


def pso_minimize(fitness: Callable[[np.ndarray], float], lower, upper, cfg: PsoConfig
                 ) -> PsoResult:
    """Global-best particle swarm over the box ``[lower, upper]``.

    ``history[k]`` is the best fitness after iteration ``k`` (index 0 is the
    initial swarm), so it never increases.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or np.any(upper < lower):
        raise ConfigError("invalid search box")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ConfigError("search box must be finite")
    rng = np.random.default_rng([cfg.seed, 271828])
    span = upper - lower
    vmax = cfg.velocity_clamp * span
    dim = lower.size
    x = lower + rng.random((cfg.particles, dim)) * span
    v = (2 * rng.random((cfg.particles, dim)) - 1) * vmax

    def score(p):
        f = float(fitness(p))
        return f if np.isfinite(f) else np.inf

    f = np.array([score(p) for p in x])
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmin(pbest_f))
    gbest, gbest_f = pbest[g].copy(), pbest_f[g]
    history = [gbest_f]
    for _ in range(cfg.iterations):
        r1 = rng.random((cfg.particles, dim))
        r2 = rng.random((cfg.particles, dim))
        v = (cfg.inertia * v + cfg.cognitive * r1 * (pbest - x)
             + cfg.social * r2 * (gbest - x))
        v = np.clip(v, -vmax, vmax)
        x = np.clip(x + v, lower, upper)
        f = np.array([score(p) for p in x])
        better = f < pbest_f
        pbest[better], pbest_f[better] = x[better], f[better]
        g = int(np.argmin(pbest_f))
        if pbest_f[g] < gbest_f:
            gbest, gbest_f = pbest[g].copy(), pbest_f[g]
        history.append(gbest_f)
    return PsoResult(gbest, float(gbest_f), tuple(float(h) for h in history))


# --- EOF matched-field processing ---------------------------------------------------


def mfp_bounds(basis: EofBasis, scale: float = 3.0):
    half = scale * np.sqrt(np.maximum(basis.values, 0.0))
    return -half, half


def mfp_fitness(basis: EofBasis, geometry: ObservationGeometry, observed, input_std: Standardizer):
    """L2 misfit between standardized simulated and observed travel times."""
    if geometry.base_depths.shape != basis.grid.shape or not np.allclose(
            geometry.base_depths, basis.grid):
        raise ShapeError("basis and observation geometry use different depth grids")
    target = input_std.transform(np.ravel(observed))
    if target.size != geometry.ranges.size:
        raise ShapeError(f"{target.size} observed times for {geometry.ranges.size} paths")

    def fitness(cf):
        speeds = basis.reconstruct(cf)
        if np.any(speeds <= 0):
            return np.inf
        t = geometry.times(speeds, strict=False).ravel()
        return float(np.linalg.norm(input_std.transform(t) - target))

    return fitness


def mfp_invert(observed, basis: EofBasis, geometry: ObservationGeometry,
               input_std: Standardizer, pso: PsoConfig = PsoConfig()):
    """Search EOF coefficients whose simulated times match ``observed``.

    Returns ``(speeds on basis.grid, PsoResult)``.
    """
    lower, upper = mfp_bounds(basis, pso.bound_scale)
    result = pso_minimize(mfp_fitness(basis, geometry, observed, input_std), lower, upper, pso)
    return basis.reconstruct(result.position), result


# --- plain feed-forward network ------------------------------------------------------


def fnn_start(config: MtlConfig, init_seed: int, output_seed: int) -> NetworkParams:
    """Random starting weights: ``W_h`` as the multi-task learner would start
    with ``init_seed`` and ``W_o`` as the task learner would draw with ``output_seed``."""
    return NetworkParams(init_params(config, init_seed).hidden, init_output(config, output_seed))


def fnn_train(inputs, labels, config: MtlConfig, init_seed: int, output_seed: int
              ) -> TrainResult:
    """Same task-learner loop as the multi-task model, without pretraining and
    with one fixed step size for every sample."""
    start = fnn_start(config, init_seed, output_seed)
    return train_task_learner(start, inputs, labels, config.task_base_rate, config.task_epochs,
                              config.task_shots_per_epoch, output_seed)


def fnn_invert(inputs, labels, observed, config: MtlConfig, input_std: Standardizer,
               label_std: Standardizer, init_seed: int = 0, output_seed: int = 1):
    """Train on standardized ``(inputs, labels)`` and invert raw ``observed`` times.

    Returns ``(speeds, TrainResult)``.
    """
    result = fnn_train(inputs, labels, config, init_seed, output_seed)
    return invert_speeds(result.params, observed, input_std, label_std), result
