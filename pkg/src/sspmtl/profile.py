"""Sound speed profiles, resampling, spatio-temporal distances and clustering."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DepthCoverageError, DomainError, InvalidProfileError

SPEED_BOUNDS = (1300.0, 1700.0)
DAYS_PER_YEAR = 365


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SoundSpeedProfile:
    """Depth-indexed sound speeds with sampling metadata.

    ``lon`` is signed degrees, east positive, in (-180, 180]. ``day`` is the
    day of year; 366 is folded onto 365.
    """

    depths: np.ndarray
    speeds: np.ndarray
    lon: float = 0.0
    lat: float = 0.0
    day: int = 1
    id: str = ""

    def __post_init__(self):
        d = _frozen(self.depths).ravel()
        s = _frozen(self.speeds).ravel()
        if d.shape != s.shape:
            raise InvalidProfileError("depths and speeds differ in length")
        if d.size < 2:
            raise InvalidProfileError(f"profile {self.id!r} has fewer than 2 samples")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(s))):
            raise InvalidProfileError(f"profile {self.id!r} contains NaN/Inf")
        if d[0] < 0 or np.any(np.diff(d) <= 0):
            raise InvalidProfileError(
                f"profile {self.id!r}: depths must be >= 0 and strictly increasing"
            )
        lo, hi = SPEED_BOUNDS
        if np.any(s < lo) or np.any(s > hi):
            raise InvalidProfileError(
                f"profile {self.id!r}: speeds outside [{lo}, {hi}] m/s"
            )
        day = int(self.day)
        if day < 1 or day > 366:
            raise DomainError(f"day of year {day} outside 1..366")
        if not (-180.0 <= self.lon <= 180.0) or not (-90.0 <= self.lat <= 90.0):
            raise DomainError(f"location ({self.lon}, {self.lat}) out of range")
        object.__setattr__(self, "depths", d)
        object.__setattr__(self, "speeds", s)
        object.__setattr__(self, "day", min(day, DAYS_PER_YEAR))
        object.__setattr__(self, "lon", float(self.lon))
        object.__setattr__(self, "lat", float(self.lat))

    @property
    def max_depth(self) -> float:
        return float(self.depths[-1])

    @property
    def meta(self) -> TaskMeta:
        return TaskMeta(coded_location(self.lon, self.lat), self.day)

    def speed_at(self, z):
        return np.interp(z, self.depths, self.speeds)

    def replace(self, depths, speeds) -> SoundSpeedProfile:
        """Same metadata, new samples."""
        return SoundSpeedProfile(depths, speeds, self.lon, self.lat, self.day, self.id)


class CodedLocation(NamedTuple):
    x: float
    y: float


class TaskMeta(NamedTuple):
    location: CodedLocation
    day: int


@dataclass(frozen=True)
class ProfileCluster:
    cluster_id: int
    members: tuple
    centroid: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.members:
            raise ConfigError("cluster must have at least one member")
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "centroid", _frozen(self.centroid))


@dataclass(frozen=True)
class TaskSelectionConfig:
    psi: int = 5
    lambda_tk: float = 0.02

    def __post_init__(self):
        if self.psi < 1:
            raise ConfigError("psi must be >= 1")
        if not 0.0 <= self.lambda_tk <= 1.0:
            raise ConfigError("lambda_tk must lie in [0, 1]")


# --- resampling -----------------------------------------------------------


def resample_uniform(profile: SoundSpeedProfile, spacing: float = 1.0) -> SoundSpeedProfile:
    """Linearly interpolate onto an arithmetic depth grid.

    The grid starts at the first depth; the last original depth is always
    kept even when it does not fall on a multiple of ``spacing``.
    """
    if spacing <= 0:
        raise ConfigError("spacing must be positive")
    d0, d1 = profile.depths[0], profile.depths[-1]
    n = int(np.floor((d1 - d0) / spacing + 1e-9))
    grid = d0 + spacing * np.arange(n + 1)
    if d1 - grid[-1] > 1e-9 * max(1.0, d1):
        grid = np.append(grid, d1)
    else:
        grid[-1] = d1
    return profile.replace(grid, np.interp(grid, profile.depths, profile.speeds))


def layer_depths(max_depth: float, layer_count: int = 50) -> np.ndarray:
    if layer_count < 2:
        raise ConfigError("layer_count must be >= 2")
    return np.linspace(0.0, float(max_depth), layer_count)


def downsample_to_layers(
    profile: SoundSpeedProfile, layer_count: int = 50, max_depth: float | None = None
) -> np.ndarray:
    """Speeds at ``layer_count`` evenly spaced depths spanning [0, max_depth]."""
    if layer_count < 2:
        raise ConfigError("layer_count must be >= 2")
    if max_depth is None:
        max_depth = profile.max_depth
    elif max_depth > profile.max_depth + 1e-9:
        raise DepthCoverageError(
            f"profile {profile.id!r} reaches {profile.max_depth} m < {max_depth} m"
        )
    return np.interp(layer_depths(max_depth, layer_count), profile.depths, profile.speeds)


# --- spatio-temporal distance ---------------------------------------------


def _check_day(day) -> int:
    day = int(day)
    if day < 1 or day > 366:
        raise DomainError(f"day of year {day} outside 1..366")
    return min(day, DAYS_PER_YEAR)


def time_difference(day_a: int, day_b: int) -> int:
    """Cyclic day-of-year difference on a 365-day calendar."""
    a, b = _check_day(day_a), _check_day(day_b)
    diff = abs(a - b)
    if diff < 183:
        return diff
    return DAYS_PER_YEAR + min(a, b) - max(a, b)


def code_longitude(lon: float) -> float:
    """Recode signed longitude so the antimeridian is continuous.

    East longitudes map to ``|lon| - 180`` and west to ``180 - |lon|``. The
    boundaries 0 and +/-180 are treated as east, giving -180 and 0.
    """
    lon = float(lon)
    if not -180.0 <= lon <= 180.0:
        raise DomainError(f"longitude {lon} outside [-180, 180]")
    if lon >= 0.0 or lon == -180.0:
        return abs(lon) - 180.0
    return 180.0 - abs(lon)


def decode_longitude(x: float) -> float:
    """Inverse of :func:`code_longitude` (-180 comes back as 180)."""
    x = float(x)
    if not -180.0 <= x <= 180.0:
        raise DomainError(f"coded longitude {x} outside [-180, 180]")
    return x + 180.0 if x <= 0.0 else x - 180.0


def meta_fields(meta: TaskMeta) -> dict:
    """``lon``/``lat``/``day`` keyword arguments for a profile tagged with ``meta``."""
    return {"lon": decode_longitude(meta.location.x), "lat": meta.location.y, "day": meta.day}


def coded_location(lon: float, lat: float) -> CodedLocation:
    return CodedLocation(code_longitude(lon), float(lat))


def location_distance(a: CodedLocation, b: CodedLocation) -> float:
    return float(np.hypot(a.x - b.x, a.y - b.y))


def spatiotemporal_distance(task: TaskMeta, ref, lam: float) -> float:
    """Blend of cyclic day difference and planar coded-coordinate distance.

    ``ref`` may be a :class:`SoundSpeedProfile` or a :class:`TaskMeta`.
    """
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("lambda must lie in [0, 1]")
    ref_meta = ref.meta if isinstance(ref, SoundSpeedProfile) else ref
    phi_t = time_difference(task.day, ref_meta.day)
    phi_s = location_distance(task.location, ref_meta.location)
    return lam * phi_t + (1.0 - lam) * phi_s


def select_task_cluster(
    task: TaskMeta,
    clusters: Sequence[ProfileCluster],
    profiles: Sequence[SoundSpeedProfile],
    cfg: TaskSelectionConfig = TaskSelectionConfig(),
) -> int:
    """Id of the cluster owning the plurality of the ``psi`` nearest profiles.

    Ties go to the cluster whose best-ranked member is nearest.
    """
    if not clusters:
        raise ConfigError("no clusters to select from")
    if cfg.psi > len(profiles):
        raise ConfigError(f"psi={cfg.psi} exceeds profile count {len(profiles)}")
    owner = {}
    for c in clusters:
        for m in c.members:
            owner[m] = c.cluster_id
    phi = np.array([spatiotemporal_distance(task, p, cfg.lambda_tk) for p in profiles])
    order = np.argsort(phi, kind="stable")[: cfg.psi]
    ranked = [owner[profiles[i].id] for i in order if profiles[i].id in owner]
    if not ranked:
        raise ConfigError("none of the nearest profiles belongs to a cluster")
    votes = Counter(ranked)
    top = max(votes.values())
    for cid in ranked:
        if votes[cid] == top:
            return cid
    raise AssertionError("unreachable")


# --- clustering -------------------------------------------------------------


def kmeans(x: np.ndarray, k: int, seed: int = 0, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding. Returns (labels, centroids)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > n:
        raise ConfigError(f"k={k} exceeds point count {n}")
    rng = np.random.default_rng(seed)
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # remaining points coincide with chosen centers
            idx = int(np.argmax(d2))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    centers = np.array(centers)
    labels = np.full(n, -1)
    for _ in range(max_iter):
        dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        for j in range(k):
            if not np.any(new == j):
                # steal the point farthest from its own center
                far = int(np.argmax(dist[np.arange(n), new]))
                new[far] = j
        if np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([x[labels == j].mean(axis=0) for j in range(k)])
    return labels, centers


def cluster_profiles(
    profiles: Sequence[SoundSpeedProfile],
    k: int,
    seed: int = 0,
    layer_count: int = 50,
    max_depth: float | None = None,
    max_iter: int = 100,
) -> list[ProfileCluster]:
    if k < 1:
        raise ConfigError("k must be >= 1")
    if max_depth is None:
        max_depth = min(p.max_depth for p in profiles)
    x = np.array([downsample_to_layers(p, layer_count, max_depth) for p in profiles])
    labels, centers = kmeans(x, k, seed, max_iter)
    out = []
    for j in range(k):
        ids = [profiles[i].id for i in np.flatnonzero(labels == j)]
        out.append(ProfileCluster(j, tuple(ids), centers[j]))
    return out


# --- standardization --------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    """Z-score transform; ``mean``/``std`` are scalars or per-component."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data, per_component: bool = True) -> Standardizer:
        data = np.asarray(data, dtype=float)
        if per_component:
            mean, std = data.mean(axis=0), data.std(axis=0)
        else:
            mean, std = np.asarray(data.mean()), np.asarray(data.std())
        std = np.where(std > 0, std, 1.0)
        return cls(_frozen(mean), _frozen(std))

    @classmethod
    def identity(cls, size: int | None = None) -> Standardizer:
        if size is None:
            return cls(_frozen(0.0), _frozen(1.0))
        return cls(_frozen(np.zeros(size)), _frozen(np.ones(size)))

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": np.ravel(self.mean).tolist() if self.mean.ndim else float(self.mean),
                "std": np.ravel(self.std).tolist() if self.std.ndim else float(self.std)}

    @classmethod
    def from_dict(cls, d) -> Standardizer:
        return cls(_frozen(d["mean"]), _frozen(d["std"]))
