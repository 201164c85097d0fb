import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import munk, nearest_plurality
from sspmtl.errors import ConfigError, DomainError, InvalidProfileError
from sspmtl.profile import (CodedLocation, ProfileCluster, SoundSpeedProfile, Standardizer,
                            TaskMeta, TaskSelectionConfig, cluster_profiles, code_longitude,
                            coded_location, decode_longitude, downsample_to_layers, layer_depths,
                            resample_uniform, select_task_cluster, spatiotemporal_distance,
                            time_difference)


def profile(depths, speeds, **kw):
    return SoundSpeedProfile(np.asarray(depths, float), np.asarray(speeds, float), **kw)


# --- profile invariants ------------------------------------------------------------


@pytest.mark.parametrize("depths, speeds", [
    ([0.0], [1500.0]),
    ([0.0, 0.0], [1500.0, 1501.0]),
    ([10.0, 5.0], [1500.0, 1501.0]),
    ([-1.0, 5.0], [1500.0, 1501.0]),
    ([0.0, 5.0], [1500.0, 1800.0]),
    ([0.0, 5.0], [1500.0, np.nan]),
    ([0.0, 5.0], [1299.0, 1500.0]),
])
def test_invalid_profiles_rejected(depths, speeds):
    with pytest.raises(InvalidProfileError):
        profile(depths, speeds)


def test_profile_arrays_are_read_only():
    p = profile([0, 1], [1500, 1501])
    with pytest.raises(ValueError):
        p.speeds[0] = 1400.0


def test_leap_day_folds_to_365():
    assert profile([0, 1], [1500, 1501], day=366).day == 365


# --- resampling ----------------------------------------------------------------------


def test_resample_midpoint():
    out = resample_uniform(profile([0, 2], [1500, 1502]), 1.0)
    assert out.depths.tolist() == [0.0, 1.0, 2.0]
    assert out.speeds.tolist() == [1500.0, 1501.0, 1502.0]


def test_resample_constant_profile():
    out = resample_uniform(profile([0, 7, 33], [1490, 1490, 1490]), 0.7)
    assert np.all(out.speeds == 1490.0)
    assert out.depths[0] == 0.0 and out.depths[-1] == 33.0


def test_resample_munk_against_analytic():
    coarse = np.arange(0.0, 3501.0, 10.0)
    fine = resample_uniform(profile(coarse, munk(coarse)), 1.0)
    assert np.array_equal(fine.depths, np.arange(0.0, 3501.0))
    assert np.max(np.abs(fine.speeds - munk(fine.depths))) < 0.05


def test_resample_keeps_endpoints_off_grid():
    out = resample_uniform(profile([0.5, 3.2], [1500, 1510]), 1.0)
    assert out.depths[0] == 0.5 and out.depths[-1] == 3.2
    assert out.speeds[-1] == 1510.0
    assert np.allclose(np.diff(out.depths[:-1]), 1.0)


def test_resample_rejects_bad_spacing():
    with pytest.raises(ConfigError):
        resample_uniform(profile([0, 1], [1500, 1501]), 0.0)


def test_downsample_linear_profile():
    p = profile([0, 3500], [1500, 1550])
    out = downsample_to_layers(resample_uniform(p), 50)
    assert np.allclose(out, np.linspace(1500, 1550, 50), atol=1e-9)


def test_downsample_two_layers_are_endpoints():
    p = resample_uniform(profile([0, 1000, 3500], [1520, 1490, 1510]))
    assert downsample_to_layers(p, 2).tolist() == [1520.0, 1510.0]


def test_downsample_idempotent():
    z = np.arange(0.0, 3501.0, 10.0)
    p = resample_uniform(profile(z, munk(z)))
    layers = downsample_to_layers(p, 50)
    again = resample_uniform(profile(layer_depths(3500, 50), layers))
    assert np.allclose(downsample_to_layers(again, 50), layers, atol=1e-9)


def test_downsample_rejects_one_layer():
    with pytest.raises(ConfigError):
        downsample_to_layers(profile([0, 1], [1500, 1501]), 1)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.95, 1.05), b=st.floats(-30.0, 30.0), seed=st.integers(0, 2**31))
def test_layers_commute_with_affine_speed_maps(a, b, seed):
    rng = np.random.default_rng(seed)
    z = np.sort(rng.choice(np.arange(1.0, 3500.0), 20, replace=False))
    z = np.concatenate([[0.0], z, [3500.0]])
    s = 1480.0 + 20.0 * rng.random(z.size)
    base = downsample_to_layers(resample_uniform(profile(z, s)), 50)
    mapped = downsample_to_layers(resample_uniform(profile(z, a * s + b)), 50)
    assert np.allclose(mapped, a * base + b, atol=1e-9)


# --- time and location ---------------------------------------------------------------


@pytest.mark.parametrize("a, b, expected", [(100, 110, 10), (1, 365, 1), (10, 193, 182)])
def test_time_difference_examples(a, b, expected):
    assert time_difference(a, b) == expected


@pytest.mark.parametrize("day", [0, 367, -3])
def test_time_difference_rejects_out_of_range(day):
    with pytest.raises(DomainError):
        time_difference(day, 10)


@pytest.mark.parametrize("lon, coded", [(90.0, -90.0), (-90.0, 90.0), (179.0, -1.0),
                                        (-179.0, 1.0), (0.0, -180.0), (180.0, 0.0)])
def test_code_longitude(lon, coded):
    assert code_longitude(lon) == coded


@given(st.floats(0.0, 180.0))
def test_decode_inverts_code(lon):
    assert decode_longitude(code_longitude(lon)) == pytest.approx(lon, abs=1e-12)


def test_decode_maps_minus_180_to_180():
    assert decode_longitude(code_longitude(-180.0)) == 180.0


@given(st.floats(-179.999, -1e-6))
def test_decode_inverts_code_west(lon):
    assert decode_longitude(code_longitude(lon)) == pytest.approx(lon, abs=1e-12)


@given(st.floats(1e-9, 1.0))
def test_coding_continuous_across_antimeridian(eps):
    assert abs(code_longitude(180.0 - eps) - code_longitude(-(180.0 - eps))) <= 2 * eps + 1e-12


@given(st.lists(st.floats(0.0, 180.0), min_size=2, max_size=2, unique=True))
def test_coding_monotone_within_branch(pair):
    lo, hi = sorted(pair)
    assume(hi - lo > 1e-9)
    # eastward travel in the east branch
    assert code_longitude(lo) < code_longitude(hi)
    # eastward travel in the west branch means decreasing |lon|
    if lo > 0:
        assert code_longitude(-hi) < code_longitude(-lo)


def meta(lon, lat, day):
    return TaskMeta(coded_location(lon, lat), day)


def test_distance_examples():
    a = meta(120.0, 20.0, 40)
    assert spatiotemporal_distance(a, a, 0.3) == 0.0
    assert spatiotemporal_distance(a, meta(-10.0, -5.0, 50), 1.0) == 10.0
    task = TaskMeta(CodedLocation(0.0, 0.0), 100)
    ref = TaskMeta(CodedLocation(2.0, 0.0), 150)
    assert spatiotemporal_distance(task, ref, 0.02) == pytest.approx(2.96, abs=1e-12)


coords = st.tuples(st.floats(-179.9, 179.9), st.floats(-80, 80), st.integers(1, 365))


@given(coords, coords, st.floats(0.0, 1.0))
def test_distance_nonnegative_and_symmetric(a, b, lam):
    ma, mb = meta(*a), meta(*b)
    d = spatiotemporal_distance(ma, mb, lam)
    assert d >= 0.0
    assert d == pytest.approx(spatiotemporal_distance(mb, ma, lam), abs=1e-12)
    assert spatiotemporal_distance(ma, ma, lam) == 0.0


def test_distance_accepts_profiles():
    p = profile([0, 1], [1500, 1501], lon=100.0, lat=10.0, day=20)
    assert spatiotemporal_distance(p.meta, p, 0.5) == 0.0


# --- cluster selection -----------------------------------------------------------------


def layout(seed=0):
    """Two clusters sampled in disjoint boxes, plus their profiles."""
    rng = np.random.default_rng(seed)
    profiles, owner = [], {}
    for cid, (lon0, lat0) in enumerate([(120.0, 15.0), (125.0, 22.0)]):
        for i in range(12):
            pid = f"c{cid}-{i}"
            profiles.append(profile([0, 1], [1500, 1501], lon=lon0 + rng.uniform(-1, 1),
                                    lat=lat0 + rng.uniform(-1, 1),
                                    day=int(rng.integers(1, 366)), id=pid))
            owner[pid] = cid
    clusters = [ProfileCluster(c, tuple(k for k, v in owner.items() if v == c), np.zeros(2))
                for c in (0, 1)]
    return profiles, clusters, owner


def test_select_single_cluster():
    profiles, _, _ = layout()
    one = [ProfileCluster(7, tuple(p.id for p in profiles), np.zeros(2))]
    assert select_task_cluster(meta(0.0, 0.0, 1), one, profiles) == 7


def test_select_psi_one_is_nearest_owner():
    profiles, clusters, owner = layout()
    target = profiles[17]
    task = meta(target.lon + 1e-4, target.lat, target.day)
    got = select_task_cluster(task, clusters, profiles, TaskSelectionConfig(1, 0.02))
    assert got == owner[target.id]


@pytest.mark.parametrize("seed", range(5))
def test_select_matches_brute_force(seed):
    profiles, clusters, owner = layout(seed)
    task = meta(120.3, 15.2, 100)
    cfg = TaskSelectionConfig(5, 0.02)
    got = select_task_cluster(task, clusters, profiles, cfg)
    assert got == 0
    assert got == nearest_plurality((120.3, 15.2, 100), profiles, owner, 5, 0.02)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), psi=st.integers(1, 24), lam=st.floats(0.0, 1.0),
       task=coords)
def test_select_agrees_with_oracle_everywhere(seed, psi, lam, task):
    profiles, clusters, owner = layout(seed)
    got = select_task_cluster(meta(*task), clusters, profiles, TaskSelectionConfig(psi, lam))
    assert got == nearest_plurality(task, profiles, owner, psi, lam)


def test_select_rejects_empty_and_large_psi():
    profiles, clusters, _ = layout()
    with pytest.raises(ConfigError):
        select_task_cluster(meta(0, 0, 1), [], profiles)
    with pytest.raises(ConfigError):
        select_task_cluster(meta(0, 0, 1), clusters, profiles, TaskSelectionConfig(99, 0.1))


@pytest.mark.parametrize("psi, lam", [(0, 0.1), (3, 1.5), (3, -0.1)])
def test_selection_config_validation(psi, lam):
    with pytest.raises(ConfigError):
        TaskSelectionConfig(psi, lam)


# --- clustering --------------------------------------------------------------------------


def family_profiles(seed=0, n=10):
    rng = np.random.default_rng(seed)
    z = layer_depths(3500, 50)
    base = munk(z)
    out, truth = [], {}
    for fam, offset in enumerate((-20.0, 20.0)):
        for i in range(n):
            pid = f"f{fam}-{i}"
            out.append(profile(z, base + offset + rng.normal(0, 1.0, z.size), id=pid))
            truth[pid] = fam
    return out, truth, base


def test_kmeans_singletons_when_k_equals_count():
    profiles, _, _ = family_profiles(n=3)
    clusters = cluster_profiles(profiles, len(profiles), seed=1)
    assert sorted(len(c.members) for c in clusters) == [1] * len(profiles)


def test_kmeans_recovers_separated_families():
    profiles, truth, base = family_profiles()
    clusters = cluster_profiles(profiles, 2, seed=3)
    means = {0: base - 20.0, 1: base + 20.0}
    for c in clusters:
        # oracle: label each member by its nearest family mean
        labels = {min(means, key=lambda f: np.linalg.norm(p.speeds - means[f]))
                  for p in profiles if p.id in c.members}
        assert len(labels) == 1
        assert {truth[m] for m in c.members} == labels


def test_kmeans_single_cluster_is_mean():
    profiles, _, _ = family_profiles(n=4)
    (c,) = cluster_profiles(profiles, 1)
    assert len(c.members) == len(profiles)
    assert np.allclose(c.centroid, np.mean([p.speeds for p in profiles], axis=0), atol=1e-9)


def test_kmeans_bit_deterministic():
    profiles, _, _ = family_profiles(seed=9)
    a = cluster_profiles(profiles, 3, seed=11)
    b = cluster_profiles(profiles, 3, seed=11)
    assert [c.members for c in a] == [c.members for c in b]
    assert all(np.array_equal(x.centroid, y.centroid) for x, y in zip(a, b))


def test_kmeans_rejects_k_zero():
    profiles, _, _ = family_profiles(n=2)
    with pytest.raises(ConfigError):
        cluster_profiles(profiles, 0)


def test_empty_cluster_rejected():
    with pytest.raises(ConfigError):
        ProfileCluster(0, (), np.zeros(3))


# --- standardization -----------------------------------------------------------------------


def test_standardizer_round_trip():
    rng = np.random.default_rng(0)
    x = 1500 + 10 * rng.random((20, 5))
    std = Standardizer.fit(x)
    z = std.transform(x)
    assert np.allclose(z.mean(axis=0), 0.0, atol=1e-10)
    assert np.allclose(z.std(axis=0), 1.0)
    assert np.allclose(std.inverse(z), x)
    again = Standardizer.from_dict(std.to_dict())
    assert np.array_equal(again.transform(x), z)


def test_standardizer_scale_invariance():
    rng = np.random.default_rng(1)
    x = rng.random((30, 4)) + 2.0
    a = Standardizer.fit(x).transform(x)
    b = Standardizer.fit(x * 7.5).transform(x * 7.5)
    assert np.allclose(a, b, atol=1e-12)


def test_standardizer_identity():
    std = Standardizer.identity()
    assert std.transform(3.5) == 3.5 and math.isclose(std.inverse(-2.0), -2.0)
