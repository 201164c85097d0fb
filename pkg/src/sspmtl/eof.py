"""Empirical orthogonal function (EOF) bases and partial-depth profile extension.

The extension pipeline:

1. cut the full-depth empirical profiles at the target's maximum depth;
2. build an EOF basis for the cut set and another for the full-depth set;
3. project the target onto the cut basis;
4. rebuild a full-depth profile from those coefficients and the full basis.

Below the cut the reconstruction is returned. Above it the measured samples
are kept and the reconstruction is blended in over a short cross-fade.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DepthCoverageError, ExtensionWarning, ShapeError
from .profile import SoundSpeedProfile, layer_depths

DIRECT_MAX = 400
JACOBI_TOL = 1e-12
JACOBI_SWEEPS = 100
EIG_CLAMP = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def symmetric_eigen(c: np.ndarray):
    """Eigenpairs of a symmetric matrix, descending, via cyclic Jacobi.

    Each eigenvector is signed so that its largest-magnitude entry is
    positive. Tiny negative eigenvalues from round-off are clamped to zero.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError("matrix must be square")
    w, v, _ = kernels.jacobi_eigh(c, JACOBI_TOL, JACOBI_SWEEPS)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    w = np.where((w < 0) & (w > -EIG_CLAMP * scale), 0.0, w)
    return w, _orient(v)


def _orient(v):
    v = np.array(v, dtype=float)
    for j in range(v.shape[1]):
        k = int(np.argmax(np.abs(v[:, j])))
        if v[k, j] < 0:
            v[:, j] = -v[:, j]
    return v


@dataclass(frozen=True, eq=False)
class EofBasis:
    """Mean profile plus retained eigenvectors (columns) and eigenvalues."""

    grid: np.ndarray
    mean: np.ndarray
    vectors: np.ndarray
    values: np.ndarray
    total_variance: float = field(default=float("nan"))

    def __post_init__(self):
        for name in ("grid", "mean", "vectors", "values"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.grid.size
        if self.mean.shape != (n,) or self.vectors.ndim != 2 or self.vectors.shape[0] != n:
            raise ShapeError("basis arrays do not match the grid")
        if self.values.shape != (self.vectors.shape[1],):
            raise ShapeError("one eigenvalue per retained vector")

    @property
    def order(self) -> int:
        return self.vectors.shape[1]

    def project(self, speeds) -> np.ndarray:
        speeds = np.asarray(speeds, dtype=float)
        if speeds.shape != self.mean.shape:
            raise ShapeError(f"target has {speeds.size} samples, basis grid {self.grid.size}")
        return self.vectors.T @ (speeds - self.mean)

    def reconstruct(self, coefficients) -> np.ndarray:
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (self.order,):
            raise ShapeError(f"expected {self.order} coefficients")
        return self.mean + self.vectors @ coefficients

    def truncated(self, order: int) -> EofBasis:
        return EofBasis(self.grid, self.mean, self.vectors[:, :order], self.values[:order],
                        self.total_variance)


def _as_matrix(profiles, grid=None):
    if isinstance(profiles, np.ndarray):
        if grid is None:
            raise ShapeError("a depth grid is required with a raw matrix")
        return np.asarray(grid, dtype=float), np.atleast_2d(profiles).astype(float)
    profiles = list(profiles)
    if grid is None:
        grid = profiles[0].depths
        for p in profiles[1:]:
            if p.depths.shape != grid.shape or not np.allclose(p.depths, grid, atol=1e-9):
                raise ShapeError("profiles are not on a common depth grid")
        return np.array(grid), np.array([p.speeds for p in profiles])
    grid = np.asarray(grid, dtype=float)
    for p in profiles:
        if p.depths[0] > grid[0] + 1e-9 or p.depths[-1] < grid[-1] - 1e-9:
            raise DepthCoverageError(f"profile {p.id!r} does not span the grid")
    return grid, np.array([np.interp(grid, p.depths, p.speeds) for p in profiles])


def build_eof_basis(profiles, retain_order: int = 3, grid=None) -> EofBasis:
    """EOF basis of a profile set.

    ``profiles`` is a sequence of :class:`SoundSpeedProfile` on one grid (or
    sampled onto ``grid``), or an ``(I, n)`` array together with ``grid``.
    The covariance is ``R R^T / I`` with ``R`` the residuals about the mean.
    """
    grid, x = _as_matrix(profiles, grid)
    count, n = x.shape
    if count < 2:
        raise ConfigError("need at least 2 profiles for an EOF basis")
    if not 1 <= retain_order <= min(n, count):
        raise ConfigError(f"retain order {retain_order} outside 1..{min(n, count)}")
    # shifted mean: identical profiles give exactly zero residuals
    mean = x[0] + (x - x[0]).mean(axis=0)
    resid = (x - mean).T  # n x I
    trace = float(np.sum(resid * resid) / count)
    if n <= DIRECT_MAX or n <= count:
        cov = resid @ resid.T / count
        w, v = symmetric_eigen(cov)
    else:
        w, v = _snapshot_eigen(resid, count)
    return EofBasis(grid, mean, v[:, :retain_order], w[:retain_order], trace)


def _snapshot_eigen(resid, count):
    """Eigenpairs of R R^T / I from the smaller Gram matrix R^T R / I."""
    gram = resid.T @ resid / count
    mu, u = symmetric_eigen(gram)
    n = resid.shape[0]
    tol = EIG_CLAMP * max(1.0, float(mu[0]))
    keep = mu > tol
    v = resid @ u[:, keep] / np.sqrt(count * mu[keep])
    # complete with an orthonormal set for the zero-variance directions
    extra = []
    basis = [v[:, j] for j in range(v.shape[1])]
    for k in range(n):
        if len(basis) >= count:
            break
        e = np.zeros(n)
        e[k] = 1.0
        for b in basis:
            e = e - (b @ e) * b
        norm = np.linalg.norm(e)
        if norm > 1e-8:
            e = e / norm
            basis.append(e)
            extra.append(e)
    if extra:
        v = np.column_stack([v] + extra)
    w = np.concatenate([mu[keep], np.zeros(v.shape[1] - int(keep.sum()))])
    return w, _orient(v)


def project_onto_basis(basis: EofBasis, target) -> np.ndarray:
    """Projection coefficients of ``target`` (profile or speed vector)."""
    if isinstance(target, SoundSpeedProfile):
        if target.depths.shape != basis.grid.shape or not np.allclose(
            target.depths, basis.grid, atol=1e-9
        ):
            raise ShapeError("target is not on the basis grid")
        target = target.speeds
    return basis.project(target)


def intercept_profiles(
    full: Sequence[SoundSpeedProfile], cut_depth: float
) -> list[SoundSpeedProfile]:
    """Truncate every profile at ``cut_depth``, ending with a sample exactly there."""
    out = []
    for p in full:
        if p.max_depth < cut_depth - 1e-9:
            raise DepthCoverageError(
                f"profile {p.id!r} reaches {p.max_depth} m, shallower than {cut_depth} m"
            )
        keep = p.depths < cut_depth - 1e-9
        d = np.append(p.depths[keep], cut_depth)
        out.append(p.replace(d, np.append(p.speeds[keep], p.speed_at(cut_depth))))
    return out


def _working_grid(empirical, full_resolution, layer_count):
    full_depth = min(p.max_depth for p in empirical)
    if not full_resolution:
        return layer_depths(full_depth, layer_count)
    ref = empirical[0].depths
    shared = all(p.depths.shape == ref.shape and np.allclose(p.depths, ref) for p in empirical)
    if shared:
        return ref[ref <= full_depth + 1e-9]
    return np.arange(0.0, np.floor(full_depth) + 1.0)


def align_signs(partial: EofBasis, full: EofBasis) -> EofBasis:
    """Flip full-depth modes whose shallow part opposes the partial-depth mode of the same rank."""
    cut = np.column_stack(
        [np.interp(partial.grid, full.grid, full.vectors[:, j]) for j in range(full.order)]
    )
    sign = np.where(np.sum(cut * partial.vectors, axis=0) < 0, -1.0, 1.0)
    return EofBasis(full.grid, full.mean, full.vectors * sign, full.values, full.total_variance)


def transfer_coefficients(partial: EofBasis, full: EofBasis, cf, mapping: str = "aligned"):
    """Turn partial-depth coefficients into full-depth ones.

    ``"direct"`` reuses them unchanged. ``"aligned"`` solves for the
    full-depth coefficients whose shallow section reproduces
    ``partial.vectors @ cf`` in the least-squares sense, which is exact for
    targets lying in the retained full-depth span.
    """
    if partial.order != full.order:
        raise ConfigError(
            f"partial ({partial.order}) and full ({full.order}) retain orders differ"
        )
    cf = np.asarray(cf, dtype=float)
    if mapping == "direct":
        return cf
    if mapping != "aligned":
        raise ConfigError(f"unknown coefficient mapping {mapping!r}")
    cut = np.column_stack(
        [np.interp(partial.grid, full.grid, full.vectors[:, j]) for j in range(full.order)]
    )
    coeffs, *_ = np.linalg.lstsq(cut, partial.vectors @ cf, rcond=None)
    return coeffs


def extend_with_bases(target: SoundSpeedProfile, partial: EofBasis, full: EofBasis,
                      mapping: str = "aligned") -> np.ndarray:
    """Full-depth reconstruction (on ``full.grid``) for a target on ``partial.grid``."""
    if partial.order != full.order:
        raise ConfigError(
            f"partial ({partial.order}) and full ({full.order}) retain orders differ"
        )
    speeds = np.interp(partial.grid, target.depths, target.speeds)
    cf = partial.project(speeds)
    full = align_signs(partial, full)
    return full.reconstruct(transfer_coefficients(partial, full, cf, mapping))


def extend_profile(
    partial_target: SoundSpeedProfile,
    empirical_full: Sequence[SoundSpeedProfile],
    retain_order: int = 3,
    *,
    full_resolution: bool = False,
    layer_count: int = 50,
    mapping: str = "aligned",
    crossfade: float = 20.0,
    output_spacing: float = 1.0,
    splice: bool = True,
) -> SoundSpeedProfile:
    """Extend a partial-depth profile to the common depth of ``empirical_full``.

    The returned profile keeps the measured samples down to the cut depth
    (when ``splice``) and continues with the EOF reconstruction below it,
    shifted near the junction so the two meet without a step.
    """
    empirical_full = list(empirical_full)
    if len(empirical_full) < 2:
        raise ConfigError("need at least 2 empirical profiles")
    cut = partial_target.max_depth
    grid = _working_grid(empirical_full, full_resolution, layer_count)
    full_depth = grid[-1]
    if cut > full_depth + 1e-9:
        raise DepthCoverageError(
            f"target reaches {cut} m, deeper than the empirical set ({full_depth} m)"
        )
    if cut >= full_depth - 1e-9:
        return partial_target
    if partial_target.depths[0] > grid[0] + 1e-9:
        raise DepthCoverageError("target must start at the surface of the working grid")
    partial_grid = np.append(grid[grid < cut - 1e-9], cut)
    cut_set = intercept_profiles(empirical_full, cut)
    partial_basis = build_eof_basis(cut_set, retain_order, grid=partial_grid)
    full_basis = build_eof_basis(empirical_full, retain_order, grid=grid)
    recon = extend_with_bases(partial_target, partial_basis, full_basis, mapping)

    if output_spacing:
        below = np.arange(np.floor(cut / output_spacing) + 1, np.floor(full_depth / output_spacing) + 1)
        below = below * output_spacing
        if below.size == 0 or below[-1] < full_depth - 1e-9:
            below = np.append(below, full_depth)
    else:
        below = grid[grid > cut + 1e-9]
    below = below[below > cut + 1e-9]
    deep = np.interp(below, grid, recon)
    if not splice:
        shallow_d = grid[grid <= cut + 1e-9]
        return partial_target.replace(np.concatenate([shallow_d, below]),
                                      np.concatenate([np.interp(shallow_d, grid, recon), deep]))
    if crossfade > 0:
        offset = partial_target.speeds[-1] - np.interp(cut, grid, recon)
        weight = np.clip(1.0 - (below - cut) / crossfade, 0.0, 1.0)
        deep = deep + offset * weight
    return partial_target.replace(
        np.concatenate([partial_target.depths, below]),
        np.concatenate([partial_target.speeds, deep]),
    )


def linear_extend(profile: SoundSpeedProfile, to_depth: float, window: float = 50.0,
                  spacing: float = 1.0) -> SoundSpeedProfile:
    """Continue a profile to ``to_depth`` along the least-squares slope of its last ``window`` metres."""
    if to_depth <= profile.max_depth:
        warnings.warn(
            f"profile {profile.id!r} already reaches {profile.max_depth} m; "
            f"not extended to {to_depth} m",
            ExtensionWarning,
            stacklevel=2,
        )
        return profile
    if profile.max_depth - profile.depths[0] < window:
        raise DepthCoverageError(f"profile shorter than the {window} m gradient window")
    tail = profile.depths >= profile.max_depth - window - 1e-9
    slope = np.polyfit(profile.depths[tail], profile.speeds[tail], 1)[0]
    new = np.arange(profile.max_depth + spacing, to_depth, spacing)
    new = new[new < to_depth - 1e-9]
    new = np.append(new, to_depth)
    speeds = profile.speeds[-1] + slope * (new - profile.max_depth)
    return profile.replace(
        np.concatenate([profile.depths, new]), np.concatenate([profile.speeds, speeds])
    )


def two_step_extend(
    partial_target: SoundSpeedProfile,
    empirical_full: Sequence[SoundSpeedProfile],
    eof_depth: float = 3200.0,
    final_depth: float = 3500.0,
    retain_order: int = 3,
    window: float = 50.0,
    **kwargs,
) -> SoundSpeedProfile:
    """EOF matching down to ``eof_depth``, then a linear tail down to ``final_depth``."""
    out = partial_target
    if out.max_depth < eof_depth:
        basis_set = intercept_profiles(empirical_full, eof_depth)
        out = extend_profile(out, basis_set, retain_order, **kwargs)
    if out.max_depth < final_depth:
        out = linear_extend(out, final_depth, window)
    return out
