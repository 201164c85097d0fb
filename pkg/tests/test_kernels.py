import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_gradient_medium, safe_angle
from sspmtl import kernels

py = kernels.python_backend
compiled = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def test_selected_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.backend.BACKEND == kernels.BACKEND


def test_environment_variable_forces_fallback():
    env = dict(os.environ, SSPMTL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import sspmtl.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ray_sums_agree(seed):
    rng = np.random.default_rng(seed)
    z, s = random_gradient_medium(rng)
    c = math.cos(safe_angle(rng, s))
    i1 = int(rng.integers(1, z.size))
    a = compiled.ray_sums(z, s, 0, i1, c)
    b = py.ray_sums(z, s, 0, i1, c)
    assert a[2] == b[2] == -1
    assert a[0] == pytest.approx(b[0], rel=1e-12, abs=1e-9)
    assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-12)


@needs_compiled
def test_turning_detected_identically():
    z = np.array([0.0, 100.0, 200.0])
    s = np.array([1500.0, 1520.0, 1540.0])
    c = 0.999
    assert compiled.ray_sums(z, s, 0, 2, c)[2] == py.ray_sums(z, s, 0, 2, c)[2] >= 0


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_solve_many_agrees(seed):
    rng = np.random.default_rng(seed)
    z, s = random_gradient_medium(rng, nodes=(6, 20))
    i1 = rng.integers(1, z.size, size=12).astype(np.int64)
    targets = rng.uniform(0.0, 3000.0, size=12)
    targets[0] = 0.0
    targets[1] = 1e8
    ta, tt, sa, ha = compiled.solve_many(z, s, 0, i1, targets, 1e-3, 200)
    tb, tu, sb, hb = py.solve_many(z, s, 0, i1, targets, 1e-3, 200)
    assert np.array_equal(sa, sb)
    assert np.allclose(ha, hb, rtol=1e-12, atol=1e-9)
    ok = sa == 0
    assert np.allclose(ta[ok], tb[ok], atol=1e-9)
    assert np.allclose(tt[ok], tu[ok], rtol=1e-10)


@needs_compiled
def test_solve_angle_agrees():
    rng = np.random.default_rng(12)
    z, s = random_gradient_medium(rng)
    for target in (0.0, 10.0, 500.0, 2000.0):
        a = compiled.solve_angle(z, s, 0, z.size - 1, target, 1e-3, 200)
        b = py.solve_angle(z, s, 0, z.size - 1, target, 1e-3, 200)
        assert a[2] == b[2]
        assert a[0] == pytest.approx(b[0], abs=1e-9)


@pytest.mark.parametrize("backend", [py, compiled], ids=["python", "cython"])
def test_jacobi_reproduces_matrix(backend):
    if backend is None:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(0)
    a = rng.normal(size=(12, 12))
    a = a + a.T
    w, v, sweeps = backend.jacobi_eigh(a, 1e-12, 100)
    assert sweeps <= 100
    assert np.allclose(v.T @ v, np.eye(12), atol=1e-12)
    assert np.max(np.abs(v @ np.diag(w) @ v.T - a)) < 1e-10
    assert np.allclose(np.sort(w), np.linalg.eigvalsh(a), atol=1e-10)


@needs_compiled
def test_jacobi_backends_identical():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(9, 30))
    c = x @ x.T / 30
    wa, va, na = compiled.jacobi_eigh(c, 1e-12, 100)
    wb, vb, nb = py.jacobi_eigh(c, 1e-12, 100)
    assert na == nb
    assert np.allclose(wa, wb, atol=1e-13)
    assert np.allclose(va, vb, atol=1e-12)


@pytest.mark.parametrize("backend", [py, compiled], ids=["python", "cython"])
def test_jacobi_zero_matrix(backend):
    if backend is None:
        pytest.skip("compiled kernels not built")
    w, v, sweeps = backend.jacobi_eigh(np.zeros((4, 4)), 1e-12, 100)
    assert np.all(w == 0) and np.array_equal(v, np.eye(4)) and sweeps == 0
