"""Direct-path ray theory through a piecewise-linear layered sound speed profile.

Within each layer the speed varies linearly with depth, so a ray is a circular
arc and both the horizontal range and the travel time have closed forms. The
per-layer expressions used here are the algebraically rearranged versions
that stay finite when two neighbouring speeds coincide::

    range_d = dz * a * (s_d + s_{d+1}) / (sin_d + sin_{d+1})
    time_d  = |dz / ds * log(s_d (1 + sin_{d+1}) / (s_{d+1} (1 + sin_d)))|

with ``a = cos(theta) / s_source`` the Snell invariant and
``sin_d = sqrt(1 - (a s_d)^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, NoDirectPathError, RayTurnsError, ShapeError
from .profile import SoundSpeedProfile

RANGE_TOL = 1e-3
MAX_BISECTIONS = 200


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LayeredMedium:
    depths: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        d, s = _frozen(self.depths).ravel(), _frozen(self.speeds).ravel()
        if d.shape != s.shape or d.size < 2:
            raise ShapeError("medium needs >= 2 matching depth/speed samples")
        if np.any(np.diff(d) <= 0):
            raise ShapeError("layer thicknesses must be positive")
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ShapeError("speeds must be positive and finite")
        object.__setattr__(self, "depths", d)
        object.__setattr__(self, "speeds", s)

    @classmethod
    def from_profile(cls, profile: SoundSpeedProfile) -> LayeredMedium:
        return cls(profile.depths, profile.speeds)

    @property
    def thickness(self) -> np.ndarray:
        return np.diff(self.depths)

    def nearest_index(self, z: float) -> int:
        return int(np.argmin(np.abs(self.depths - z)))

    def with_nodes(self, zs: Sequence[float]):
        """Medium with extra nodes at ``zs`` (speeds interpolated) and their indices."""
        zs = np.atleast_1d(np.asarray(zs, dtype=float))
        if np.any(zs < self.depths[0]) or np.any(zs > self.depths[-1]):
            raise ShapeError("node depth outside medium")
        grid = np.union1d(self.depths, zs)
        medium = LayeredMedium(grid, np.interp(grid, self.depths, self.speeds))
        return medium, np.searchsorted(grid, zs)


def _check_index(medium, i):
    n = medium.depths.size
    if not -n <= i < n:
        raise ShapeError(f"depth index {i} outside medium of {n} nodes")
    return i % n


def _sums(medium, theta, src, rcv):
    if not 0.0 < theta <= math.pi / 2 + 1e-15:
        raise ConfigError("grazing angle must lie in (0, pi/2]")
    src, rcv = _check_index(medium, src), _check_index(medium, rcv)
    r, t, turn = kernels.ray_sums(medium.depths, medium.speeds, src, rcv, math.cos(theta))
    if turn >= 0:
        raise RayTurnsError(medium.depths[turn], turn)
    return r, t


def horizontal_range(medium: LayeredMedium, theta: float, src: int = 0, rcv: int = -1) -> float:
    """Horizontal distance covered by a ray leaving node ``src`` at grazing angle ``theta``."""
    return _sums(medium, theta, src, rcv)[0]


def travel_time(medium: LayeredMedium, theta: float, src: int = 0, rcv: int = -1) -> float:
    return _sums(medium, theta, src, rcv)[1]


def local_cosines(medium: LayeredMedium, theta: float, src: int = 0) -> np.ndarray:
    """cos of the local grazing angle at every node (Snell's law)."""
    return math.cos(theta) / medium.speeds[src] * medium.speeds


def turning_angle(medium: LayeredMedium, src: int = 0, rcv: int = -1) -> float:
    """Smallest grazing angle whose ray still reaches ``rcv`` without turning."""
    src, rcv = _check_index(medium, src), _check_index(medium, rcv)
    lo, hi = min(src, rcv), max(src, rcv)
    smax = medium.speeds[lo : hi + 1].max()
    if smax <= medium.speeds[src]:
        return 0.0
    return math.acos(medium.speeds[src] / smax)


def solve_grazing_angle(
    medium: LayeredMedium, src: int, rcv: int, target_range: float, tol: float = RANGE_TOL
) -> float:
    """Bisect for the grazing angle whose ray lands ``target_range`` metres away."""
    if target_range < 0:
        raise ConfigError("target range must be >= 0")
    src, rcv = _check_index(medium, src), _check_index(medium, rcv)
    theta, _, status, hmax = kernels.solve_angle(
        medium.depths, medium.speeds, src, rcv, float(target_range), tol, MAX_BISECTIONS
    )
    if status != 0:
        raise NoDirectPathError(target_range, hmax)
    return theta


# --- scenarios and observations ----------------------------------------------


@dataclass(frozen=True)
class AcousticScenario:
    """Source (buoy) and receivers (anchor nodes) in metres, z positive down."""

    source: tuple
    receivers: tuple
    medium: LayeredMedium = field(repr=False)

    def __post_init__(self):
        recv = tuple(tuple(float(c) for c in r) for r in self.receivers)
        if not recv:
            raise ConfigError("need at least one receiver")
        lo, hi = self.medium.depths[0], self.medium.depths[-1]
        for r in recv:
            if not lo <= r[2] <= hi:
                raise ShapeError(f"receiver depth {r[2]} outside medium [{lo}, {hi}]")
        object.__setattr__(self, "receivers", recv)
        object.__setattr__(self, "source", tuple(float(c) for c in self.source))

    def with_medium(self, medium: LayeredMedium) -> AcousticScenario:
        return AcousticScenario(self.source, self.receivers, medium)


@dataclass(frozen=True, eq=False)
class TravelTimeObservation:
    """Propagation times flattened ping-major, receiver-minor."""

    times: np.ndarray
    ping_count: int
    receiver_count: int
    sigma: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        t = _frozen(self.times).ravel()
        if t.size != self.ping_count * self.receiver_count:
            raise ShapeError(
                f"{t.size} times != {self.ping_count} pings x {self.receiver_count} receivers"
            )
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise ShapeError("travel times must be positive and finite")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    def as_matrix(self) -> np.ndarray:
        return self.times.reshape(self.ping_count, self.receiver_count)


class ObservationGeometry:
    """Ping/receiver layout on a fixed depth grid, reusable across speed vectors.

    Receiver depths become exact nodes of the working grid; each ping's source
    is snapped to the nearest grid depth.
    """

    def __init__(self, grid_depths, receivers, pings):
        grid = np.asarray(grid_depths, dtype=float)
        recv = np.asarray(receivers, dtype=float).reshape(-1, 3)
        pings = np.asarray(pings, dtype=float).reshape(-1, 3)
        if np.any(recv[:, 2] < grid[0]) or np.any(recv[:, 2] > grid[-1]):
            raise ShapeError("receiver depth outside medium")
        self.base_depths = grid
        self.depths = np.union1d(grid, recv[:, 2])
        self.rcv_index = np.searchsorted(self.depths, recv[:, 2]).astype(np.int64)
        self.src_index = np.array(
            [int(np.argmin(np.abs(self.depths - z))) for z in pings[:, 2]], dtype=np.int64
        )
        dx = pings[:, None, 0] - recv[None, :, 0]
        dy = pings[:, None, 1] - recv[None, :, 1]
        self.ranges = np.hypot(dx, dy)
        self.ping_count, self.receiver_count = self.ranges.shape

    @classmethod
    def from_scenario(cls, scenario: AcousticScenario, pings=None) -> ObservationGeometry:
        if pings is None:
            pings = [scenario.source]
        return cls(scenario.medium.depths, scenario.receivers, pings)

    def times(self, speeds, strict: bool = True) -> np.ndarray:
        """Noise-free (pings, receivers) travel times for speeds on the base grid.

        With ``strict=False`` unreachable pairs come back as ``inf`` instead of
        raising.
        """
        s = np.interp(self.depths, self.base_depths, np.asarray(speeds, dtype=float))
        out = np.empty(self.ranges.shape)
        for src in np.unique(self.src_index):
            rows = np.flatnonzero(self.src_index == src)
            rcv = np.tile(self.rcv_index, rows.size)
            tgt = self.ranges[rows].ravel()
            _, t, status, hmax = kernels.solve_many(
                self.depths, s, int(src), rcv, tgt, RANGE_TOL, MAX_BISECTIONS
            )
            bad = status != 0
            if bad.any():
                if strict:
                    k = int(np.flatnonzero(bad)[0])
                    raise NoDirectPathError(tgt[k], hmax[k])
                t = np.where(bad, np.inf, t)
            out[rows] = t.reshape(rows.size, -1)
        return out


def simulate_observation(
    scenario: AcousticScenario,
    pings=None,
    noise_sigma: float = 0.0,
    seed: int | None = 0,
) -> TravelTimeObservation:
    """Travel times for every (ping, receiver) pair plus seeded Gaussian noise."""
    if noise_sigma < 0:
        raise ConfigError("noise sigma must be >= 0")
    geom = ObservationGeometry.from_scenario(scenario, pings)
    times = geom.times(scenario.medium.speeds)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        times = times + rng.normal(0.0, noise_sigma, times.shape)
    return TravelTimeObservation(
        times.ravel(), geom.ping_count, geom.receiver_count, noise_sigma, seed
    )
