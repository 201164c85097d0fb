import inspect

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import idw, in_span_family
from sspmtl import baselines, network
from sspmtl.baselines import (PsoConfig, fnn_invert, fnn_start, fnn_train, mfp_bounds,
                              mfp_fitness, mfp_invert, pso_minimize, sip_invert, sip_weights)
from sspmtl.eof import build_eof_basis
from sspmtl.errors import ConfigError, DataError, ShapeError
from sspmtl.network import MtlConfig, NetworkParams, init_params, train_task_learner
from sspmtl.profile import SoundSpeedProfile, Standardizer, layer_depths
from sspmtl.ray import ObservationGeometry

Z = layer_depths(3500, 50)


def ref(lon, lat, shift=0.0, day=100, rid="r"):
    return SoundSpeedProfile(Z, 1500.0 + shift + 0.01 * Z / 35, lon=lon, lat=lat, day=day, id=rid)


def task(lon=120.0, lat=20.0, day=100):
    return ref(lon, lat, day=day).meta


# --- spatial interpolation -------------------------------------------------------------------


def test_single_reference_is_returned():
    r = ref(121.0, 19.0, 3.0)
    assert np.array_equal(sip_invert(task(), [r]).speeds, r.speeds)


def test_equidistant_references_average():
    a, b = ref(121.0, 20.0, 0.0), ref(119.0, 20.0, 4.0)
    assert np.allclose(sip_invert(task(), [a, b]).speeds, 0.5 * (a.speeds + b.speeds))


def test_zero_distance_reference_wins():
    a, b = ref(120.0, 20.0, 1.0, day=300), ref(119.0, 20.0, 4.0)
    assert np.array_equal(sip_invert(task(), [a, b]).speeds, a.speeds)


def test_day_of_year_is_ignored():
    a, b = ref(121.0, 20.0, 0.0, day=1), ref(119.5, 20.0, 4.0, day=100)
    w = sip_weights(task(day=100), [a, b])
    assert np.allclose(w, [1 / 3, 2 / 3])


point = st.tuples(st.floats(110, 130), st.floats(10, 30))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(point, st.floats(-20, 20)), min_size=1, max_size=8), point)
def test_sip_matches_idw_oracle_and_is_convex(refs, at):
    profiles = [ref(lon, lat, s, rid=f"r{i}") for i, ((lon, lat), s) in enumerate(refs)]
    out = sip_invert(task(*at), profiles)
    w = sip_weights(task(*at), profiles)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w >= 0)
    stack = np.array([p.speeds for p in profiles])
    assert np.all(out.speeds >= stack.min(axis=0) - 1e-9)
    assert np.all(out.speeds <= stack.max(axis=0) + 1e-9)
    pts = [(-(lon - 180.0) if lon >= 0 else lon, lat) for (lon, lat), _ in refs]
    at_c = (-(at[0] - 180.0), at[1])
    expected = idw(pts, [p.speeds[7] for p in profiles], at_c)
    assert out.speeds[7] == pytest.approx(expected, abs=1e-9)


def test_sip_errors():
    with pytest.raises(DataError):
        sip_invert(task(), [])
    short = SoundSpeedProfile(Z[:10], np.full(10, 1500.0))
    with pytest.raises(ShapeError):
        sip_invert(task(), [short], Z)


def test_sip_carries_task_metadata():
    out = sip_invert(task(121.5, 22.0, 40), [ref(120.0, 20.0)])
    assert (out.lon, out.lat, out.day) == (121.5, 22.0, 40)


# --- particle swarm -------------------------------------------------------------------------------


def sphere(center):
    return lambda p: float(np.sum((p - center) ** 2))


def test_pso_history_non_increasing_and_deterministic():
    cfg = PsoConfig(seed=4)
    f = sphere(np.array([0.3, -0.2, 0.1]))
    a = pso_minimize(f, -np.ones(3), np.ones(3), cfg)
    b = pso_minimize(f, -np.ones(3), np.ones(3), cfg)
    assert len(a.history) == cfg.iterations + 1
    assert all(y <= x for x, y in zip(a.history, a.history[1:]))
    assert a.history[-1] == a.fitness
    assert np.array_equal(a.position, b.position)


def test_pso_converges_on_sphere():
    res = pso_minimize(sphere(np.array([0.3, -0.2])), -np.ones(2), np.ones(2),
                       PsoConfig(particles=20, iterations=60))
    assert res.fitness < 1e-6


def test_pso_collapsed_box_returns_point():
    p = np.array([0.25, -1.5])
    res = pso_minimize(sphere(np.zeros(2)), p, p, PsoConfig())
    assert np.array_equal(res.position, p)


def test_pso_non_finite_fitness_is_infinite():
    def f(p):
        return np.nan if p[0] > 0 else float(p[0] ** 2)
    res = pso_minimize(f, -np.ones(1), np.ones(1), PsoConfig(seed=1))
    assert res.position[0] <= 0 and np.isfinite(res.fitness)


def test_pso_box_validation():
    with pytest.raises(ConfigError):
        pso_minimize(sphere(0), np.ones(2), -np.ones(2), PsoConfig())
    with pytest.raises(ConfigError):
        pso_minimize(sphere(0), np.zeros(2), np.array([1.0, np.inf]), PsoConfig())


@pytest.mark.parametrize("kw", [{"particles": 1}, {"iterations": 0}, {"bound_scale": -1.0},
                                {"velocity_clamp": 0.0}])
def test_pso_config_validation(kw):
    with pytest.raises(ConfigError):
        PsoConfig(**kw)


# --- EOF matched-field processing -----------------------------------------------------------------


@pytest.fixture(scope="module")
def mfp_setup():
    speeds, _, _ = in_span_family(Z, 15, seed=2, amplitude=2.0)
    basis = build_eof_basis(speeds, 3, grid=Z)
    receivers = [(2500.0, 0.0, 3400.0), (0.0, 2500.0, 3400.0), (-2500.0, 0.0, 3400.0),
                 (0.0, -2500.0, 3400.0)]
    pings = [(300.0 * np.cos(a), 300.0 * np.sin(a), 7.5) for a in np.linspace(0, 6, 5)]
    geo = ObservationGeometry(Z, receivers, pings)
    sample = np.array([geo.times(s).ravel() for s in speeds])
    return basis, geo, Standardizer.fit(sample)


def test_mfp_planted_solution(mfp_setup):
    basis, geo, std = mfp_setup
    lower, upper = mfp_bounds(basis)
    cf0 = 0.4 * upper * np.array([1.0, -0.5, 0.3])
    observed = geo.times(basis.reconstruct(cf0)).ravel()
    fit = mfp_fitness(basis, geo, observed, std)
    assert fit(cf0) == pytest.approx(0.0, abs=1e-6)
    short = mfp_invert(observed, basis, geo, std, PsoConfig(particles=10, iterations=5, seed=2))
    long = mfp_invert(observed, basis, geo, std, PsoConfig(particles=10, iterations=60, seed=2))
    assert long[1].fitness < fit(np.zeros(3))
    assert long[1].fitness <= short[1].fitness
    err = lambda r: np.linalg.norm((r[1].position - cf0) / upper)
    assert err(long) <= err(short) + 1e-12


def test_mfp_collapsed_bounds(mfp_setup):
    basis, geo, std = mfp_setup
    observed = geo.times(basis.mean).ravel()
    speeds, res = mfp_invert(observed, basis, geo, std, PsoConfig(bound_scale=0.0))
    assert np.array_equal(speeds, basis.mean)
    assert np.all(res.position == 0)


def test_mfp_history_monotone_and_seeded(mfp_setup):
    basis, geo, std = mfp_setup
    observed = geo.times(basis.reconstruct([1.0, 0.0, 0.0])).ravel()
    cfg = PsoConfig(particles=5, iterations=6, seed=9)
    a = mfp_invert(observed, basis, geo, std, cfg)
    b = mfp_invert(observed, basis, geo, std, cfg)
    assert np.array_equal(a[0], b[0])
    h = a[1].history
    assert all(y <= x for x, y in zip(h, h[1:]))


def test_mfp_grid_mismatch(mfp_setup):
    basis, _, std = mfp_setup
    geo = ObservationGeometry(Z[::2], [(100.0, 0.0, 3000.0)], [(0.0, 0.0, 0.0)])
    with pytest.raises(ShapeError):
        mfp_fitness(basis, geo, np.ones(1), std)


# --- plain feed-forward net -----------------------------------------------------------------------


def test_fnn_is_the_task_learner_with_uniform_rate():
    cfg = MtlConfig(task_epochs=3)
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(4, 120)), rng.normal(size=(4, 50))
    got = fnn_train(x, y, cfg, 5, 6)
    start = NetworkParams(init_params(cfg, 5).hidden, network.init_output(cfg, 6))
    want = train_task_learner(start, x, y, np.full(4, cfg.task_base_rate), 3,
                              cfg.task_shots_per_epoch, 6)
    assert np.array_equal(got.params.hidden, want.params.hidden)
    assert np.array_equal(got.params.output, want.params.output)
    assert got.losses == want.losses


def test_fnn_and_finetune_share_one_code_path():
    src = inspect.getsource(baselines.fnn_train)
    assert "train_task_learner(" in src
    assert "train_task_learner(" in inspect.getsource(network.finetune_task)
    # same starting W_o draw when the seeds agree
    cfg = MtlConfig()
    assert np.array_equal(fnn_start(cfg, 1, 2).output, network.init_output(cfg, 2))


def test_fnn_descends_on_single_sample():
    cfg = MtlConfig(task_epochs=20, task_shots_per_epoch=5)
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(1, 120)), rng.normal(size=(1, 50))
    res = fnn_train(x, y, cfg, 0, 1)
    assert all(b <= a + 1e-12 for a, b in zip(res.losses, res.losses[1:]))
    assert res.losses[0] < network.task_cost(fnn_start(cfg, 0, 1), x[0], y[0])
    assert len(res.losses) == 20


def test_fnn_invert_returns_speeds():
    cfg = MtlConfig(task_epochs=2)
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(3, 120)), rng.normal(size=(3, 50))
    times = 2.0 + rng.random(120)
    in_std = Standardizer(np.full(120, 2.0), np.ones(120))
    out_std = Standardizer(np.full(50, 1500.0), np.full(50, 5.0))
    speeds, res = fnn_invert(x, y, times, cfg, in_std, out_std)
    assert speeds.shape == (50,) and len(res.losses) == 2
