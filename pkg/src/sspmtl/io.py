"""Readers and writers for profiles, cluster manifests, observations, EOF
bases and network checkpoints.

Every reader raises :class:`DataError` on malformed content, including any
NaN or infinite number.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .eof import EofBasis
from .errors import DataError, SspError
from .network import MtlConfig, NetworkParams
from .profile import ProfileCluster, SoundSpeedProfile, Standardizer
from .ray import TravelTimeObservation


def _number(text, what, path):
    try:
        x = float(text)
    except ValueError:
        raise DataError(f"{path}: {what} {text!r} is not a number") from None
    if not math.isfinite(x):
        raise DataError(f"{path}: {what} is not finite")
    return x


def _integer(text, what, path):
    # parsed as int directly: u64 seeds do not survive a float round trip
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{path}: {what} {text!r} is not an integer") from None


def _open(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None
    return path


def _header_fields(line):
    """``# a=1, b=2`` or ``# a=1`` -> dict."""
    out = {}
    for part in line.lstrip("#").split(","):
        if "=" in part:
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# --- profiles -------------------------------------------------------------------


def write_profile_csv(path, profile: SoundSpeedProfile) -> Path:
    lines = [f"# id={profile.id}", f"# lon={profile.lon!r}", f"# lat={profile.lat!r}",
             f"# day={profile.day}", "depth_m,speed_mps"]
    lines += [f"{d!r},{s!r}" for d, s in zip(profile.depths.tolist(), profile.speeds.tolist())]
    return _write(path, "\n".join(lines) + "\n")


def read_profile_csv(path) -> SoundSpeedProfile:
    meta = {}
    depths, speeds = [], []
    for n, raw in enumerate(_open(path).splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            meta.update(_header_fields(line))
            continue
        if line.replace(" ", "") == "depth_m,speed_mps":
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise DataError(f"{path}:{n}: expected 'depth_m,speed_mps'")
        depths.append(_number(cells[0], "depth", f"{path}:{n}"))
        speeds.append(_number(cells[1], "speed", f"{path}:{n}"))
    kwargs = {"id": meta.get("id", Path(path).stem)}
    for key in ("lon", "lat"):
        if key in meta:
            kwargs[key] = _number(meta[key], key, path)
    if "day" in meta:
        day = _number(meta["day"], "day", path)
        if day != int(day):
            raise DataError(f"{path}: day must be an integer")
        kwargs["day"] = int(day)
    try:
        return SoundSpeedProfile(np.array(depths), np.array(speeds), **kwargs)
    except SspError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def read_profile_dir(directory) -> list[SoundSpeedProfile]:
    """Every ``*.csv`` profile in ``directory``, sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory} is not a directory")
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise DataError(f"no profile CSV files in {directory}")
    return [read_profile_csv(f) for f in files]


# --- JSON helpers -------------------------------------------------------------------


def _reject_constant(name):
    raise DataError(f"non-finite number {name} in JSON")


def read_json(path):
    try:
        return json.loads(_open(path), parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def dumps_json(obj) -> str:
    try:
        return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    except ValueError:
        raise DataError("refusing to write NaN/Inf to JSON") from None


def write_json(path, obj) -> Path:
    return _write(path, dumps_json(obj))


def _matrix(value, what, path, ndim=2):
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise DataError(f"{path}: {what} is not a numeric array") from None
    if a.ndim != ndim:
        raise DataError(f"{path}: {what} must be {ndim}-dimensional")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{path}: {what} contains NaN/Inf")
    return a


def _field(doc, key, path):
    if not isinstance(doc, dict) or key not in doc:
        raise DataError(f"{path}: missing field {key!r}")
    return doc[key]


# --- cluster manifest ---------------------------------------------------------------


def write_cluster_manifest(path, clusters: Sequence[ProfileCluster]) -> Path:
    return write_json(path, [{"clusterId": int(c.cluster_id), "memberIds": list(c.members)}
                             for c in clusters])


def read_cluster_manifest(path) -> list[ProfileCluster]:
    doc = read_json(path)
    if not isinstance(doc, list):
        raise DataError(f"{path}: manifest must be a JSON array")
    out, seen = [], set()
    for entry in doc:
        cid = _field(entry, "clusterId", path)
        members = _field(entry, "memberIds", path)
        if not isinstance(cid, int) or not isinstance(members, list) or not members:
            raise DataError(f"{path}: bad cluster entry {entry!r}")
        dup = seen.intersection(members)
        if dup:
            raise DataError(f"{path}: profile(s) {sorted(dup)} in more than one cluster")
        seen.update(members)
        out.append(ProfileCluster(cid, tuple(str(m) for m in members), np.empty(0)))
    return out


# --- observations --------------------------------------------------------------------


def write_observation_csv(path, obs: TravelTimeObservation) -> Path:
    seed = "none" if obs.seed is None else str(int(obs.seed))
    lines = [f"# pings={obs.ping_count}, receivers={obs.receiver_count}, "
             f"sigma={obs.sigma!r}, seed={seed}", "ping,receiver,time_s"]
    m = obs.as_matrix()
    for p in range(obs.ping_count):
        for r in range(obs.receiver_count):
            lines.append(f"{p},{r},{float(m[p, r])!r}")
    return _write(path, "\n".join(lines) + "\n")


def read_observation_csv(path) -> TravelTimeObservation:
    meta, rows = {}, []
    for n, raw in enumerate(_open(path).splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            meta.update(_header_fields(line))
            continue
        if line.replace(" ", "") == "ping,receiver,time_s":
            continue
        cells = line.split(",")
        if len(cells) != 3:
            raise DataError(f"{path}:{n}: expected 'ping,receiver,time_s'")
        where = f"{path}:{n}"
        rows.append((_number(cells[0], "ping", where), _number(cells[1], "receiver", where),
                     _number(cells[2], "time", where)))
    missing = [k for k in ("pings", "receivers") if k not in meta]
    if missing:
        raise DataError(f"{path}: header lacks {', '.join(missing)}")
    pings = int(_number(meta["pings"], "pings", path))
    receivers = int(_number(meta["receivers"], "receivers", path))
    sigma = _number(meta.get("sigma", "0"), "sigma", path)
    seed_text = meta.get("seed", "none")
    seed = None if seed_text.lower() == "none" else _integer(seed_text, "seed", path)
    times = np.full((pings, receivers), np.nan)
    for p, r, t in rows:
        if p != int(p) or r != int(r) or not (0 <= p < pings and 0 <= r < receivers):
            raise DataError(f"{path}: index ({p}, {r}) outside {pings}x{receivers}")
        if not np.isnan(times[int(p), int(r)]):
            raise DataError(f"{path}: duplicate entry for ping {int(p)}, receiver {int(r)}")
        times[int(p), int(r)] = t
    if np.isnan(times).any():
        raise DataError(f"{path}: {int(np.isnan(times).sum())} (ping, receiver) pairs missing")
    return TravelTimeObservation(times.ravel(), pings, receivers, sigma, seed)


# --- EOF basis -------------------------------------------------------------------------


def basis_to_dict(basis: EofBasis) -> dict:
    return {
        "grid": basis.grid.tolist(),
        "mean": basis.mean.tolist(),
        "eigenvalues": basis.values.tolist(),
        # column-major: one inner list per eigenvector
        "eigenvectors": basis.vectors.T.tolist(),
    }


def basis_from_dict(doc, path="<basis>") -> EofBasis:
    grid = _matrix(_field(doc, "grid", path), "grid", path, 1)
    mean = _matrix(_field(doc, "mean", path), "mean", path, 1)
    values = _matrix(_field(doc, "eigenvalues", path), "eigenvalues", path, 1)
    vectors = _matrix(_field(doc, "eigenvectors", path), "eigenvectors", path).T
    return EofBasis(grid, mean, vectors, values)


def write_basis_json(path, basis: EofBasis) -> Path:
    return write_json(path, basis_to_dict(basis))


def read_basis_json(path) -> EofBasis:
    return basis_from_dict(read_json(path), path)


# --- network checkpoint -------------------------------------------------------------------


def checkpoint_to_dict(params: NetworkParams, config: MtlConfig, input_std: Standardizer,
                       label_std: Standardizer, depths, seed: int) -> dict:
    return {
        "config": config.to_dict(),
        "seed": int(seed),
        "W_h": params.hidden.tolist(),
        "W_o": params.output.tolist(),
        "standardizer": {"input": input_std.to_dict(), "label": label_std.to_dict()},
        "depths": np.asarray(depths, dtype=float).tolist(),
    }


def write_checkpoint(path, params, config, input_std, label_std, depths, seed) -> Path:
    return write_json(path, checkpoint_to_dict(params, config, input_std, label_std, depths, seed))


def read_checkpoint(path):
    """``(params, config, input_std, label_std, depths, seed)``."""
    doc = read_json(path)
    try:
        config = MtlConfig.from_dict(_field(doc, "config", path))
    except TypeError as exc:
        raise DataError(f"{path}: bad config echo ({exc})") from None
    params = NetworkParams(_matrix(_field(doc, "W_h", path), "W_h", path),
                           _matrix(_field(doc, "W_o", path), "W_o", path))
    if params.sizes != (config.input_size, config.hidden_size, config.output_size):
        raise DataError(f"{path}: weight shapes {params.sizes} disagree with the config echo")
    stats = _field(doc, "standardizer", path)
    std = []
    for key, size in (("input", config.input_size), ("label", config.output_size)):
        d = _field(stats, key, path)
        mean = _matrix(_field(d, "mean", path), f"{key} mean", path, np.ndim(d["mean"]))
        scale = _matrix(_field(d, "std", path), f"{key} std", path, np.ndim(d["std"]))
        if mean.ndim > 1 or mean.shape != scale.shape or mean.size not in (1, size):
            raise DataError(f"{path}: {key} standardizer has the wrong shape")
        if np.any(scale <= 0):
            raise DataError(f"{path}: {key} standardizer has non-positive std")
        std.append(Standardizer.from_dict({"mean": mean, "std": scale}))
    depths = _matrix(_field(doc, "depths", path), "depths", path, 1)
    if depths.size != config.output_size:
        raise DataError(f"{path}: {depths.size} depths for {config.output_size} outputs")
    seed = _field(doc, "seed", path)
    if not isinstance(seed, int):
        raise DataError(f"{path}: seed must be an integer")
    return params, config, std[0], std[1], depths, seed
