"""Pure NumPy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and return conventions. ``solve_many`` runs the bisection
for every ray at once instead of one ray at a time.
"""

import math

import numpy as np

ISO_EPS = 1e-9
GUARD = 1e-10
ANGLE_TOL = 1e-11

BACKEND = "python"


def _layer_terms(z, s, a, lo, hi):
    """Per-layer range and time for nodes lo..hi with Snell constant ``a``."""
    sl = s[lo : hi + 1]
    c = a * sl
    gam = 1.0 - c * c
    bad = np.flatnonzero(gam <= 0.0)
    if bad.size:
        return None, None, lo + int(bad[0])
    g = np.sqrt(gam)
    g0, g1 = g[:-1], g[1:]
    s0, s1 = sl[:-1], sl[1:]
    dz = np.diff(z[lo : hi + 1])
    ds = s1 - s0
    r = dz * a * (s0 + s1) / (g0 + g1)
    q = 1.0 + g0 + a * a * s0 * (s0 + s1) / (g0 + g1)
    iso = np.abs(ds) < ISO_EPS
    safe = np.where(iso, 1.0, ds)
    t = np.where(
        iso,
        dz / (s0 * g0),
        np.abs(dz * np.log1p(-safe * q / (s1 * (1.0 + g0))) / safe),
    )
    return r, t, -1


def ray_sums(z, s, i0, i1, cos_theta):
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    lo, hi = min(i0, i1), max(i0, i1)
    r, t, turn = _layer_terms(z, s, cos_theta / s[i0], lo, hi)
    if turn >= 0:
        return 0.0, 0.0, turn
    return float(r.sum()), float(t.sum()), -1


def _theta_floor(s, i0, i1):
    lo, hi = min(i0, i1), max(i0, i1)
    smax = float(np.max(s[lo : hi + 1]))
    if smax <= s[i0]:
        return 0.0
    return math.acos(s[i0] / smax)


def solve_angle(z, s, i0, i1, target, tol=1e-3, max_iter=200):
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    floor = _theta_floor(s, i0, i1)
    lo, hi = floor + GUARD, math.pi / 2
    r, t, turn = ray_sums(z, s, i0, i1, math.cos(lo))
    while turn >= 0 and lo < hi:
        lo += 10.0 * (lo - floor) + GUARD
        r, t, turn = ray_sums(z, s, i0, i1, math.cos(lo))
    hmax = r
    if target > r:
        return 0.0, 0.0, 1, hmax
    if target <= 0.0:
        _, t, _ = ray_sums(z, s, i0, i1, 0.0)
        return hi, t, 0, hmax
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= ANGLE_TOL:
            break
        r, _, _ = ray_sums(z, s, i0, i1, math.cos(mid))
        if r > target:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    r, t, _ = ray_sums(z, s, i0, i1, math.cos(mid))
    return mid, t, (2 if abs(r - target) >= tol else 0), hmax


def _batch_sums(z, s, i0, mask, cos_theta, with_time=True):
    """Range/time for many rays; ``mask[k, d]`` selects layer d for ray k."""
    a = (cos_theta / s[i0])[:, None]
    c = a * s[None, :]
    gam = 1.0 - c * c
    nodes = np.zeros((mask.shape[0], s.size), dtype=bool)
    nodes[:, :-1] |= mask
    nodes[:, 1:] |= mask
    turning = np.any((gam <= 0.0) & nodes, axis=1)
    g = np.sqrt(np.clip(gam, 1e-300, None))
    g0, g1 = g[:, :-1], g[:, 1:]
    s0, s1 = s[:-1][None, :], s[1:][None, :]
    dz = np.diff(z)[None, :]
    ds = (s1 - s0)
    iso = np.abs(ds) < ISO_EPS
    safe = np.where(iso, 1.0, ds)
    r = dz * a * (s0 + s1) / (g0 + g1)
    if not with_time:
        return np.where(mask, r, 0.0).sum(axis=1), None, turning
    q = 1.0 + g0 + a * a * s0 * (s0 + s1) / (g0 + g1)
    with np.errstate(invalid="ignore"):
        t = np.where(
            iso, dz / (s0 * g0), np.abs(dz * np.log1p(-safe * q / (s1 * (1.0 + g0))) / safe)
        )
    r = np.where(mask, r, 0.0).sum(axis=1)
    t = np.where(mask, t, 0.0).sum(axis=1)
    return r, t, turning


def solve_many(z, s, i0, i1, targets, tol=1e-3, max_iter=200):
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    i1 = np.asarray(i1, dtype=np.int64)
    targets = np.asarray(targets, dtype=float)
    n = targets.size
    layer = np.arange(s.size - 1)[None, :]
    lo_idx = np.minimum(i0, i1)[:, None]
    hi_idx = np.maximum(i0, i1)[:, None]
    mask = (layer >= lo_idx) & (layer < hi_idx)
    floor = np.array([_theta_floor(s, i0, int(k)) for k in i1])
    lo = floor + GUARD
    hi = np.full(n, math.pi / 2)
    r, t, turning = _batch_sums(z, s, i0, mask, np.cos(lo))
    while np.any(turning & (lo < hi)):
        fix = turning & (lo < hi)
        lo[fix] += 10.0 * (lo[fix] - floor[fix]) + GUARD
        r2, t2, turning2 = _batch_sums(z, s, i0, mask, np.cos(lo))
        r = np.where(fix, r2, r)
        turning = np.where(fix, turning2, turning)
    r = np.where(turning, 0.0, r)
    hmax = r.copy()
    status = np.where(targets > hmax, 1, 0)
    active = status == 0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        moving = active & (mid > lo) & (mid < hi) & (hi - lo > ANGLE_TOL)
        if not moving.any():
            break
        r, _, _ = _batch_sums(z, s, i0, mask, np.cos(mid), with_time=False)
        up = moving & (r > targets)
        down = moving & ~(r > targets)
        lo = np.where(up, mid, lo)
        hi = np.where(down, mid, hi)
    theta = 0.5 * (lo + hi)
    theta = np.where(targets <= 0.0, math.pi / 2, theta)
    r, t, _ = _batch_sums(z, s, i0, mask, np.cos(theta))
    status = np.where(active & (np.abs(r - np.maximum(targets, 0.0)) >= tol), 2, status)
    theta = np.where(status == 1, 0.0, theta)
    t = np.where(status == 1, 0.0, t)
    return theta, t, status.astype(np.int64), hmax


def jacobi_eigh(a_in, tol_rel=1e-12, max_sweeps=100):
    a = np.array(a_in, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    fro = math.sqrt(float(np.sum(a * a)))
    if fro == 0.0:
        return np.zeros(n), v, 0
    sweep = 0
    while sweep < max_sweeps:
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2) * 2.0))
        if off <= tol_rel * fro:
            break
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                g = 100.0 * abs(apq)
                if abs(a[p, p]) + g == abs(a[p, p]) and abs(a[q, q]) + g == abs(a[q, q]):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta >= 0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * c
                cp, cq = a[:, p].copy(), a[:, q]
                a[:, p] = c * cp - sn * cq
                a[:, q] = sn * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :]
                a[p, :] = c * rp - sn * rq
                a[q, :] = sn * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q]
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
    return np.diag(a).copy(), v, sweep
