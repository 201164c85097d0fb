"""Synthetic ocean: clustered historical profiles, a held-out task profile and
the acoustic geometry used to observe it.

Each cluster is a Munk-shaped deep-ocean profile family with its own axis
depth/speed, a geographic region and a seasonal window. Individual profiles
add two sinusoidal upper-ocean modes whose amplitudes depend on the
sampling day (seasonal cycle plus a few-day "weather" oscillation) and
position (regional gradient), plus noise.

The task is observed during a short survey campaign: a handful of reference
casts taken within a few kilometres and a few days of the task, the task
itself being the last cast of the campaign.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .profile import SoundSpeedProfile, TaskMeta

MUNK_EPSILON = 0.00737


def munk_profile(z, axis_speed: float = 1500.0, axis_depth: float = 1300.0,
                 scale: float = 1300.0, epsilon: float = MUNK_EPSILON):
    """Canonical Munk profile c(z) = c1 (1 + eps (eta - 1 + exp(-eta)))."""
    eta = 2.0 * (np.asarray(z, dtype=float) - axis_depth) / scale
    return axis_speed * (1.0 + epsilon * (eta - 1.0 + np.exp(-eta)))


def perturbation_modes(z, depth_scale: float = 1200.0) -> np.ndarray:
    """Two surface-intensified sinusoidal modes, shape (len(z), 2)."""
    z = np.asarray(z, dtype=float)
    taper = np.exp(-z / depth_scale)
    return np.column_stack(
        [np.cos(0.5 * math.pi * z / depth_scale) * taper,
         np.sin(math.pi * z / depth_scale) * taper]
    )


@dataclass(frozen=True)
class SyntheticWorldConfig:
    cluster_count: int = 10
    profiles_per_cluster: int = 30
    max_depth: float = 3500.0
    sample_spacing: float = 10.0
    axis_speed: tuple = (1478.0, 1492.0)
    axis_depth: tuple = (900.0, 1300.0)
    axis_scale: tuple = (1000.0, 1400.0)
    epsilon: tuple = (0.0060, 0.0080)
    mode_amplitude: float = 4.0
    seasonal_amplitude: float = 3.0
    spatial_gradient: float = 1.0
    profile_noise: float = 0.6
    region_spread_deg: float = 1.5
    season_spread_days: float = 25.0
    weather_amplitude: float = 1.5
    weather_periods: tuple = (2.0, 6.0)
    task_reference_count: int = 13
    task_offset_deg: float = 1.0
    campaign_spread_deg: float = 0.05
    campaign_days: int = 3
    campaign_noise: float = 0.3
    shallow_reference_count: int = 9
    shallow_depth: float = 2000.0
    receiver_depth: float = 3400.0
    receiver_radius: float = 2500.0
    ping_count: int = 30
    ping_radius: float = 1500.0
    source_depth: float = 7.5
    noise_sigma: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.cluster_count < 1 or self.profiles_per_cluster < 1:
            raise ConfigError("cluster and profile counts must be >= 1")
        if self.max_depth <= 0 or self.sample_spacing <= 0:
            raise ConfigError("depths must be positive")
        if not 0 < self.receiver_depth <= self.max_depth:
            raise ConfigError("receiver depth outside the water column")
        if self.ping_count < 1 or self.task_reference_count < 1:
            raise ConfigError("ping and reference counts must be >= 1")
        if not 0 <= self.shallow_reference_count <= self.task_reference_count:
            raise ConfigError("shallow_reference_count exceeds task_reference_count")
        if not 0 < self.shallow_depth <= self.max_depth:
            raise ConfigError("shallow_depth outside the water column")
        if not 1 <= self.campaign_days <= 180:
            raise ConfigError("campaign must last 1..180 days")
        lo, hi = self.weather_periods
        if not 0 < lo <= hi:
            raise ConfigError("weather periods must be positive and ordered")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> SyntheticWorldConfig:
        known = {}
        for k, v in d.items():
            if k in cls.__dataclass_fields__:
                known[k] = tuple(v) if isinstance(v, list) else v
        return cls(**known)

    def replace(self, **kw) -> SyntheticWorldConfig:
        return replace(self, **kw)


@dataclass(frozen=True)
class ClusterFamily:
    cluster_id: int
    axis_speed: float
    axis_depth: float
    axis_scale: float
    epsilon: float
    mean_modes: np.ndarray
    center: tuple
    season_day: int
    season_phase: float
    weather_periods: np.ndarray = field(repr=False, default=None)
    weather_phases: np.ndarray = field(repr=False, default=None)

    def weather(self, day: float, amplitude: float) -> np.ndarray:
        """Few-day oscillation of the two mode amplitudes."""
        if self.weather_periods is None:
            return np.zeros(2)
        arg = 2 * math.pi * day / self.weather_periods + self.weather_phases
        return amplitude * np.sin(arg).sum(axis=1) / math.sqrt(0.5 * arg.shape[1])


@dataclass(frozen=True, eq=False)
class World:
    config: SyntheticWorldConfig
    families: tuple
    profiles: tuple = field(repr=False)
    labels: np.ndarray = field(repr=False)
    task: SoundSpeedProfile = field(repr=False)
    references: tuple = field(repr=False, default=())
    task_cluster: int = 0
    receivers: tuple = ()
    pings: tuple = ()

    @property
    def task_meta(self) -> TaskMeta:
        return self.task.meta

    def by_cluster(self, cid: int) -> list:
        return [p for p, l in zip(self.profiles, self.labels) if l == cid]


def _wrap_day(day: float) -> int:
    return int((round(day) - 1) % 365) + 1


def _draw_family(rng, cfg, cid):
    lo, hi = cfg.axis_speed
    lon = rng.uniform(-179.0, 179.0)
    lat = rng.uniform(-40.0, 40.0)
    return ClusterFamily(
        cluster_id=cid,
        axis_speed=rng.uniform(lo, hi),
        axis_depth=rng.uniform(*cfg.axis_depth),
        axis_scale=rng.uniform(*cfg.axis_scale),
        epsilon=rng.uniform(*cfg.epsilon),
        mean_modes=rng.normal(0.0, cfg.mode_amplitude, 2),
        center=(lon, lat),
        season_day=int(rng.integers(1, 366)),
        season_phase=rng.uniform(0.0, 2 * math.pi),
        weather_periods=rng.uniform(*cfg.weather_periods, (2, 3)),
        weather_phases=rng.uniform(0.0, 2 * math.pi, (2, 3)),
    )


def _profile(rng, cfg, fam, depths, pid, lon=None, lat=None, day=None, noise=None):
    if lon is None:
        lon = fam.center[0] + rng.normal(0.0, cfg.region_spread_deg)
        lat = fam.center[1] + rng.normal(0.0, cfg.region_spread_deg)
        day = _wrap_day(fam.season_day + rng.normal(0.0, cfg.season_spread_days))
    lon = (lon + 180.0) % 360.0 - 180.0
    lat = float(np.clip(lat, -89.0, 89.0))
    season = math.cos(2 * math.pi * day / 365.0 + fam.season_phase)
    dlon = lon - fam.center[0]
    dlat = lat - fam.center[1]
    amps = fam.mean_modes + np.array([
        cfg.seasonal_amplitude * season + cfg.spatial_gradient * dlat,
        0.5 * cfg.seasonal_amplitude * season + cfg.spatial_gradient * dlon,
    ]) + fam.weather(day, cfg.weather_amplitude)
    amps = amps + rng.normal(0.0, cfg.profile_noise if noise is None else noise, 2)
    base = munk_profile(depths, fam.axis_speed, fam.axis_depth, fam.axis_scale, fam.epsilon)
    speeds = base + perturbation_modes(depths) @ amps
    return SoundSpeedProfile(depths, speeds, lon=lon, lat=lat, day=day, id=pid)


def scenario_layout(cfg: SyntheticWorldConfig):
    """Receivers on a diamond around the origin and pings on a circle."""
    r = cfg.receiver_radius
    receivers = tuple((x, y, cfg.receiver_depth) for x, y in ((r, 0), (0, r), (-r, 0), (0, -r)))
    ang = 2 * math.pi * np.arange(cfg.ping_count) / cfg.ping_count
    rad = cfg.ping_radius * (0.3 + 0.7 * np.arange(cfg.ping_count) / max(1, cfg.ping_count - 1))
    pings = tuple(
        (float(rr * math.cos(a)), float(rr * math.sin(a)), cfg.source_depth)
        for a, rr in zip(ang, rad)
    )
    return receivers, pings


def generate_world(cfg: SyntheticWorldConfig = SyntheticWorldConfig()) -> World:
    """Deterministic synthetic world for ``cfg.seed``."""
    rng = np.random.default_rng([cfg.seed, 31337])
    depths = np.arange(0.0, cfg.max_depth + 1e-9, cfg.sample_spacing)
    if depths[-1] < cfg.max_depth:
        depths = np.append(depths, cfg.max_depth)
    families = tuple(_draw_family(rng, cfg, c) for c in range(cfg.cluster_count))
    profiles, labels = [], []
    for fam in families:
        for j in range(cfg.profiles_per_cluster):
            profiles.append(_profile(rng, cfg, fam, depths, f"c{fam.cluster_id:02d}-p{j:03d}"))
            labels.append(fam.cluster_id)
    task_cluster = int(rng.integers(cfg.cluster_count))
    task, references = _campaign(rng, cfg, families[task_cluster], depths)
    receivers, pings = scenario_layout(cfg)
    return World(cfg, families, tuple(profiles), np.array(labels), task, references,
                 task_cluster, receivers, pings)


def _campaign(rng, cfg, fam, depths):
    lon = fam.center[0] + rng.normal(0.0, cfg.task_offset_deg)
    lat = fam.center[1] + rng.normal(0.0, cfg.task_offset_deg)
    last = int(rng.integers(cfg.campaign_days, 366))
    refs = []
    for i in range(cfg.task_reference_count):
        dx, dy = rng.uniform(-cfg.campaign_spread_deg, cfg.campaign_spread_deg, 2)
        day = last - int(rng.integers(0, cfg.campaign_days))
        ref = _profile(rng, cfg, fam, depths, f"ref-{i:02d}", lon + dx, lat + dy, day,
                       cfg.campaign_noise)
        if i >= cfg.task_reference_count - cfg.shallow_reference_count:
            # expendable probe: only the upper water column is measured
            keep = depths <= cfg.shallow_depth
            ref = ref.replace(depths[keep], ref.speeds[keep])
        refs.append(ref)
    task = _profile(rng, cfg, fam, depths, "task", lon, lat, last, cfg.campaign_noise)
    return task, tuple(refs)
