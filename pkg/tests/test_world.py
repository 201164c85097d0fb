import dataclasses

import numpy as np
import pytest

from oracles import munk
from sspmtl.errors import ConfigError, DataError
from sspmtl.harness import prepare_experiment
from sspmtl.world import SyntheticWorldConfig, generate_world, munk_profile, scenario_layout


@pytest.fixture(scope="module")
def world():
    return generate_world(SyntheticWorldConfig(seed=3))


def test_munk_matches_oracle():
    z = np.linspace(0, 5000, 101)
    assert np.allclose(munk_profile(z), munk(z), rtol=0, atol=1e-9)
    assert munk_profile(1300.0) == pytest.approx(1500.0, abs=1e-12)


def test_default_world_size(world):
    assert len(world.profiles) == 300
    assert np.bincount(world.labels).tolist() == [30] * 10
    assert len(world.references) == 13
    assert len({p.id for p in world.profiles}) == 300


def test_profiles_are_physical(world):
    for p in list(world.profiles) + [world.task]:
        assert p.depths[0] == 0 and p.depths[-1] == 3500
        assert np.all((p.speeds > 1400) & (p.speeds < 1600))
        assert 1 <= p.day <= 365 and -180 <= p.lon < 180 and -90 <= p.lat <= 90


def test_same_seed_same_world(world):
    again = generate_world(SyntheticWorldConfig(seed=3))
    for a, b in zip(world.profiles + (world.task,), again.profiles + (again.task,)):
        assert np.array_equal(a.speeds, b.speeds) and (a.lon, a.lat, a.day) == (b.lon, b.lat, b.day)


def test_different_seed_changes_world(world):
    other = generate_world(SyntheticWorldConfig(seed=4))
    assert not np.array_equal(world.task.speeds, other.task.speeds)


def test_campaign_is_near_the_task(world):
    t = world.task
    shallow = 0
    for r in world.references:
        assert abs(r.lon - t.lon) <= 0.05 + 1e-9 and abs(r.lat - t.lat) <= 0.05 + 1e-9
        gap = t.day - r.day
        assert 0 <= gap < 3
        shallow += r.depths[-1] <= 2000
    assert shallow == 9


def test_task_is_held_out(world):
    ids = {p.id for p in world.profiles} | {r.id for r in world.references}
    assert world.task.id not in ids
    assert all(not np.array_equal(p.speeds, world.task.speeds) for p in world.profiles)


def test_leakage_guard_rejects_task_in_corpus(small_cfg):
    w = generate_world(small_cfg.world)
    leaked = dataclasses.replace(w, profiles=w.profiles + (w.task,))
    with pytest.raises(DataError):
        prepare_experiment(small_cfg, leaked)


def test_scenario_layout_counts():
    receivers, pings = scenario_layout(SyntheticWorldConfig())
    assert len(pings) == 30
    assert all(r[2] == 3400.0 for r in receivers)
    assert all(p[2] == 7.5 for p in pings)


@pytest.mark.parametrize("kw", [{"cluster_count": 0}, {"receiver_depth": 4000.0},
                                {"shallow_reference_count": 20}, {"campaign_days": 0},
                                {"weather_periods": (6.0, 2.0)}])
def test_world_config_validation(kw):
    with pytest.raises(ConfigError):
        SyntheticWorldConfig(**kw)
