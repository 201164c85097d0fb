"""End-to-end experiment: synthetic world -> training data -> four inverters
-> depth-banded RMSE and inversion timing.

A run is fully determined by its :class:`ExperimentConfig`. Timing fields
(keys ending in ``_time_s``) are the only non-reproducible report entries.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import fnn_train, mfp_invert, sip_invert
from .config import ExperimentConfig
from .eof import build_eof_basis, extend_profile
from .errors import DataError, ShapeError, SspError
from .io import dumps_json, write_json
from .network import (ClusterData, finetune_task, invert_speeds, pretrain,
                      task_learning_rates)
from .profile import (Standardizer, TaskSelectionConfig, cluster_profiles,
                      downsample_to_layers, layer_depths, select_task_cluster)
from .ray import ObservationGeometry
from .world import World, generate_world

REPORT_FORMAT = "sspmtl-report/1"


# --- metrics ----------------------------------------------------------------------


def band_name(band) -> str:
    return f"{band[0]:g}-{band[1]:g} (m)"


def band_masks(depths, bands):
    """Boolean layer masks; a layer on a shared edge belongs to the shallower band."""
    depths = np.asarray(depths, dtype=float)
    masks = []
    for k, (lo, hi) in enumerate(bands):
        m = (depths > lo) & (depths <= hi)
        if k == 0:
            m |= depths == lo
        masks.append(m)
    return masks


def rmse_by_band(truth, estimate, depths, bands) -> dict:
    """``{"average": ..., "<lo>-<hi> (m)": ...}``; a band with no layers maps to None."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape or truth.shape != np.shape(depths):
        raise ShapeError("truth, estimate and depths must share one grid")
    err2 = (estimate - truth) ** 2
    out = {"average": float(math.sqrt(err2.mean()))}
    for band, m in zip(bands, band_masks(depths, bands)):
        out[band_name(band)] = float(math.sqrt(err2[m].mean())) if m.any() else None
    return out


def sign_test(wins: int, losses: int) -> float:
    """One-sided exact binomial p-value for ``wins`` out of ``wins + losses`` (ties dropped)."""
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0**n


def repetition_seeds(master_seed: int, repetitions: int) -> list:
    """Per-repetition ``(init, task, swarm)`` seeds derived from one master seed."""
    out = []
    for r in range(repetitions):
        s = np.random.SeedSequence([master_seed, r]).generate_state(3, np.uint32)
        out.append(tuple(int(x) for x in s))
    return out


# --- experiment preparation ---------------------------------------------------------


@dataclass(eq=False)
class Experiment:
    config: ExperimentConfig
    world: World
    grid: np.ndarray
    geometry: ObservationGeometry
    input_std: Standardizer
    label_std: Standardizer
    clusters: list
    selected_cluster: int
    cluster_data: list
    references: list
    ref_labels: np.ndarray
    ref_inputs: np.ndarray
    rates: np.ndarray
    truth: np.ndarray
    observed: np.ndarray
    mfp_basis: object = field(repr=False, default=None)

    @property
    def ref_targets(self) -> np.ndarray:
        return self.label_std.transform(self.ref_labels)

    @property
    def ref_features(self) -> np.ndarray:
        return self.input_std.transform(self.ref_inputs)


def _leakage_guard(world: World):
    task = world.task
    others = list(world.profiles) + list(world.references)
    for p in others:
        if p.id == task.id:
            raise DataError(f"task id {task.id!r} also used for training")
        if p.depths.shape == task.depths.shape and np.array_equal(p.speeds, task.speeds):
            raise DataError(f"profile {p.id!r} duplicates the task profile")


def _noisy_times(geometry, speeds, sigma, rng):
    t = geometry.times(speeds).ravel()
    return t + rng.normal(0.0, sigma, t.shape) if sigma > 0 else t


def extend_references(references, empirical, cfg: ExperimentConfig) -> list:
    """Deepen partial-depth references to the working depth with the empirical EOFs."""
    out = []
    max_depth = cfg.ssp.max_depth
    for r in references:
        if r.max_depth >= max_depth - 1e-9:
            out.append(r)
            continue
        out.append(extend_profile(r, empirical, cfg.eof.retain_order, mapping=cfg.eof.mapping,
                                  crossfade=cfg.eof.crossfade, layer_count=cfg.ssp.layer_count,
                                  full_resolution=cfg.eof.full_resolution))
    return out


def prepare_experiment(cfg: ExperimentConfig, world: World | None = None) -> Experiment:
    """Everything the inverters share: standardized training sets, references,
    the task's observation and its ground truth on the layer grid."""
    world = generate_world(cfg.world) if world is None else world
    _leakage_guard(world)
    wc, sc = world.config, cfg.ssp
    rng = np.random.default_rng([wc.seed, 4242])
    grid = layer_depths(sc.max_depth, sc.layer_count)
    geometry = ObservationGeometry(grid, world.receivers, world.pings)

    profiles = list(world.profiles)
    labels = np.array([downsample_to_layers(p, sc.layer_count, sc.max_depth) for p in profiles])
    times = np.array([_noisy_times(geometry, y, wc.noise_sigma, rng) for y in labels])
    input_std = Standardizer.fit(times)
    corpus_label_std = Standardizer.fit(labels)

    clusters = cluster_profiles(profiles, cfg.mtl.cluster_count, seed=sc.kmeans_seed,
                                layer_count=sc.layer_count, max_depth=sc.max_depth)
    index = {p.id: i for i, p in enumerate(profiles)}
    cluster_data = []
    for c in clusters:
        rows = [index[m] for m in c.members]
        cluster_data.append(ClusterData(input_std.transform(times[rows]),
                                        corpus_label_std.transform(labels[rows]), c.cluster_id))
    task_meta = world.task.meta
    selected = select_task_cluster(task_meta, clusters, profiles,
                                   TaskSelectionConfig(sc.psi, sc.lambda_tk))
    empirical = [profiles[index[m]] for m in clusters[selected].members]
    if len(empirical) < 2:
        raise DataError(f"selected cluster {selected} has fewer than 2 profiles")

    references = extend_references(world.references, empirical, cfg)
    ref_labels = np.array([downsample_to_layers(r, sc.layer_count, sc.max_depth)
                           for r in references])
    ref_inputs = np.array([_noisy_times(geometry, y, wc.noise_sigma, rng) for y in ref_labels])
    rates = task_learning_rates(task_meta, references, cfg.mtl.task_base_rate,
                                cfg.mtl.lambda_rate)

    truth = downsample_to_layers(world.task, sc.layer_count, sc.max_depth)
    native = ObservationGeometry(world.task.depths, world.receivers, world.pings)
    observed = _noisy_times(native, world.task.speeds, wc.noise_sigma, rng)
    basis = build_eof_basis(ref_labels, min(cfg.eof.retain_order, len(references)), grid=grid)
    return Experiment(cfg, world, grid, geometry, input_std, Standardizer.fit(ref_labels),
                      clusters, selected, cluster_data, references, ref_labels, ref_inputs,
                      rates, truth, observed, basis)


# --- one repetition ----------------------------------------------------------------------


@dataclass
class RepetitionResult:
    index: int
    seeds: tuple
    speeds: dict
    rmse: dict
    failures: dict
    losses: dict
    params: dict = field(repr=False, default_factory=dict)


def run_repetition(exp: Experiment, index: int, seeds: tuple, methods) -> RepetitionResult:
    cfg = exp.config
    init_seed, task_seed, swarm_seed = seeds
    mtl_cfg = cfg.mtl.replace(seed=init_seed)
    speeds, failures, losses, params = {}, {}, {}, {}
    x, y = exp.ref_features, exp.ref_targets
    for name in methods:
        try:
            if name == "SIP":
                speeds[name] = sip_invert(exp.world.task.meta, exp.references, exp.grid).speeds
            elif name == "EOF-MFP":
                est, _ = mfp_invert(exp.observed, exp.mfp_basis, exp.geometry, exp.input_std,
                                    cfg.pso.replace(seed=swarm_seed))
                speeds[name] = est
            elif name == "FNN":
                res = fnn_train(x, y, mtl_cfg, init_seed, task_seed)
                params[name], losses[name] = res.params, res.losses
            elif name == "MTL":
                state = pretrain(exp.cluster_data, mtl_cfg, seed=init_seed)
                res = finetune_task(state.hidden, x, y, exp.rates, mtl_cfg, task_seed)
                params[name], losses[name] = res.params, res.losses
            if name in params:
                speeds[name] = invert_speeds(params[name], exp.observed, exp.input_std,
                                             exp.label_std)
            if not np.all(np.isfinite(speeds[name])):
                raise DataError(f"{name} produced non-finite speeds")
        except SspError as exc:
            speeds.pop(name, None)
            failures[name] = f"{type(exc).__name__}: {exc}"
    rmse = {m: rmse_by_band(exp.truth, s, exp.grid, cfg.benchmark.bands)
            for m, s in speeds.items()}
    return RepetitionResult(index, tuple(seeds), speeds, rmse, failures, losses, params)


def _median_time(fn, calls: int) -> float:
    fn()
    samples = []
    for _ in range(calls):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def time_inversions(exp: Experiment, rep: RepetitionResult, methods) -> dict:
    """Median wall time of the inversion stage only (training excluded)."""
    cfg = exp.config.benchmark
    out = {}
    for name in methods:
        if name in rep.failures:
            continue
        if name == "SIP":
            fn = lambda: sip_invert(exp.world.task.meta, exp.references, exp.grid)
            out[name] = _median_time(fn, cfg.timing_calls)
        elif name == "EOF-MFP":
            pso = exp.config.pso.replace(seed=rep.seeds[2])
            fn = lambda: mfp_invert(exp.observed, exp.mfp_basis, exp.geometry, exp.input_std, pso)
            out[name] = _median_time(fn, cfg.mfp_timing_calls)
        else:
            p = rep.params[name]
            fn = lambda p=p: invert_speeds(p, exp.observed, exp.input_std, exp.label_std)
            out[name] = _median_time(fn, cfg.timing_calls)
    return out


# --- the benchmark -------------------------------------------------------------------------


@dataclass
class BenchmarkResult:
    report: dict
    example: dict
    truth: np.ndarray
    grid: np.ndarray
    loss_curves: dict


_WORKER_EXP = None


def _worker_init(cfg):
    global _WORKER_EXP
    _WORKER_EXP = prepare_experiment(cfg)


def _worker_run(args):
    index, seeds, methods = args
    rep = run_repetition(_WORKER_EXP, index, seeds, methods)
    rep.params = {}
    return rep


def _summarize(values):
    a = np.array(values, dtype=float)
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


def run_benchmark(cfg: ExperimentConfig, exp: Experiment | None = None,
                  timing: bool = True) -> BenchmarkResult:
    """Repeat every method ``cfg.benchmark.repetitions`` times on one world."""
    bc = cfg.benchmark
    exp = prepare_experiment(cfg) if exp is None else exp
    methods = bc.methods
    seeds = repetition_seeds(bc.master_seed, bc.repetitions)
    first = run_repetition(exp, 0, seeds[0], methods)
    reps = [first]
    rest = [(r, seeds[r], methods) for r in range(1, bc.repetitions)]
    if bc.workers > 1 and rest:
        with ProcessPoolExecutor(bc.workers, initializer=_worker_init, initargs=(cfg,)) as pool:
            reps += list(pool.map(_worker_run, rest))
    else:
        reps += [run_repetition(exp, *args) for args in rest]
    timings = time_inversions(exp, first, methods) if timing else {}

    names = ["average"] + [band_name(b) for b in bc.bands]
    rows = []
    for m in methods:
        ok = [r for r in reps if m in r.rmse]
        row = {"method": m, "runs": len(ok), "failures": len(reps) - len(ok),
               "failure_messages": sorted({r.failures[m] for r in reps if m in r.failures})}
        row["rmse"], row["rmse_sd"] = {}, {}
        for n in names:
            vals = [r.rmse[m][n] for r in ok if r.rmse[m][n] is not None]
            mean, sd = _summarize(vals) if vals else (None, None)
            row["rmse"][n], row["rmse_sd"][n] = mean, sd
        if m in timings:
            row["inversion_time_s"] = timings[m]
        row["per_repetition"] = [r.rmse[m]["average"] if m in r.rmse else None for r in reps]
        rows.append(row)

    comparisons = []
    for other in ("FNN", "SIP", "EOF-MFP"):
        if "MTL" not in methods or other not in methods:
            continue
        wins = losses = ties = 0
        for r in reps:
            if "MTL" in r.rmse and other in r.rmse:
                a, b = r.rmse["MTL"]["average"], r.rmse[other]["average"]
                wins += a < b
                losses += a > b
                ties += a == b
        comparisons.append({"better": "MTL", "worse": other, "wins": wins, "losses": losses,
                            "ties": ties, "p_value": sign_test(wins, losses)})

    curves = {}
    for m in ("MTL", "FNN"):
        series = [r.losses[m] for r in reps if m in r.losses]
        if series:
            curves[m] = np.mean(np.array(series), axis=0).tolist()

    task = exp.world.task
    report = {
        "format": REPORT_FORMAT,
        "master_seed": bc.master_seed,
        "world_seed": exp.world.config.seed,
        "repetitions": bc.repetitions,
        "seeds": [list(s) for s in seeds],
        "bands": [list(b) for b in bc.bands],
        "task": {"id": task.id, "lon": task.lon, "lat": task.lat, "day": task.day,
                 "true_cluster": exp.world.task_cluster,
                 "selected_cluster": exp.selected_cluster,
                 "references": len(exp.references)},
        "methods": rows,
        "comparisons": comparisons,
        "loss_curves": curves,
        "config": cfg.to_dict(),
    }
    example = dict(first.speeds)
    return BenchmarkResult(report, example, exp.truth, exp.grid, curves)


def mask_timing(obj):
    """Copy of a report with every ``*_time_s`` field removed."""
    if isinstance(obj, dict):
        return {k: mask_timing(v) for k, v in obj.items() if not k.endswith("_time_s")}
    if isinstance(obj, list):
        return [mask_timing(v) for v in obj]
    return obj


# --- rendering ---------------------------------------------------------------------------------


def _fmt(x, digits=4):
    return "n/a" if x is None else f"{x:.{digits}f}"


def markdown_report(report: dict) -> str:
    """Accuracy table (methods as columns, bands as rows) followed by the timing table."""
    rows = report["methods"]
    names = [r["method"] for r in rows]
    lines = ["| Methods | " + " | ".join(f"{n} (m/s)" for n in names) + " |",
             "|" + "---|" * (len(names) + 1)]
    keys = ["average"] + [band_name(b) for b in report["bands"]]
    for k in keys:
        label = "Average RMSE" if k == "average" else k
        lines.append(f"| {label} | " + " | ".join(_fmt(r["rmse"][k]) for r in rows) + " |")
    lines += ["", "| Methods | " + " | ".join(names) + " |", "|" + "---|" * (len(names) + 1)]
    lines.append("| Inversion stage (s) | "
                 + " | ".join(_fmt(r.get("inversion_time_s"), 6) for r in rows) + " |")
    fails = [f"{r['method']}: {r['failures']}" for r in rows if r["failures"]]
    lines += ["", f"Repetitions: {report['repetitions']}; master seed {report['master_seed']}."]
    if fails:
        lines.append("Failed runs (excluded from averages): " + ", ".join(fails) + ".")
    for c in report["comparisons"]:
        lines.append(f"MTL < {c['worse']}: {c['wins']} wins, {c['losses']} losses, "
                     f"{c['ties']} ties, sign-test p = {c['p_value']:.3g}.")
    return "\n".join(lines) + "\n"


def write_report(out_dir, result: BenchmarkResult) -> tuple:
    out = Path(out_dir)
    js = write_json(out / "report.json", result.report)
    md = out / "report.md"
    try:
        md.write_text(markdown_report(result.report))
    except OSError as exc:
        raise DataError(f"cannot write {md}: {exc.strerror}") from None
    return js, md


def report_bytes(result: BenchmarkResult, masked: bool = True) -> bytes:
    rep = mask_timing(result.report) if masked else result.report
    return dumps_json(rep).encode()


# --- plot data -------------------------------------------------------------------------------

_COLORS = ("#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def _svg_lines(series: dict, x_label: str, y_label: str, title: str,
               swap_axes: bool = False, invert_y: bool = False) -> str:
    """Minimal static line chart. ``series`` maps a name to (x, y) arrays."""
    w, h, pad = 640, 480, 60
    xs = np.concatenate([np.asarray(v[0], float) for v in series.values()])
    ys = np.concatenate([np.asarray(v[1], float) for v in series.values()])
    if swap_axes:
        xs, ys = ys, xs
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (w - 2 * pad)

    def py(y):
        f = (y - y0) / (y1 - y0)
        return pad + (f if invert_y else 1.0 - f) * (h - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
             f'viewBox="0 0 {w} {h}">',
             f'<rect width="{w}" height="{h}" fill="white"/>',
             f'<text x="{w / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
             f'<rect x="{pad}" y="{pad}" width="{w - 2 * pad}" height="{h - 2 * pad}" '
             'fill="none" stroke="#888"/>',
             f'<text x="{w / 2}" y="{h - 15}" text-anchor="middle" font-size="13">{x_label}</text>',
             f'<text x="15" y="{h / 2}" text-anchor="middle" font-size="13" '
             f'transform="rotate(-90 15 {h / 2})">{y_label}</text>']
    for val, anchor in ((x0, "start"), (x1, "end")):
        parts.append(f'<text x="{px(val):.1f}" y="{h - pad + 16}" text-anchor="{anchor}" '
                     f'font-size="11">{val:.6g}</text>')
    for val in (y0, y1):
        parts.append(f'<text x="{pad - 4}" y="{py(val):.1f}" text-anchor="end" '
                     f'font-size="11">{val:.6g}</text>')
    for k, (name, (x, y)) in enumerate(series.items()):
        x, y = np.asarray(x, float), np.asarray(y, float)
        if swap_axes:
            x, y = y, x
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        color = _COLORS[k % len(_COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{w - pad - 4}" y="{pad + 16 + 16 * k}" text-anchor="end" '
                     f'font-size="12" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot_data(result: BenchmarkResult, out_dir) -> list:
    """CSV series and SVG renderings of the example inversion and loss curves."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out}: {exc.strerror}") from None
    methods = list(result.example)
    written = []

    def put(name, text):
        path = out / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise DataError(f"cannot write {path}: {exc.strerror}") from None
        written.append(path)

    lines = ["depth_m,truth_mps," + ",".join(f"{m}_mps" for m in methods)]
    for i, z in enumerate(result.grid):
        vals = [result.truth[i]] + [result.example[m][i] for m in methods]
        lines.append(f"{z!r}," + ",".join(repr(float(v)) for v in vals))
    put("profiles.csv", "\n".join(lines) + "\n")
    series = {"truth": (result.grid, result.truth)}
    series.update({m: (result.grid, result.example[m]) for m in methods})
    put("profiles.svg", _svg_lines(series, "sound speed (m/s)", "depth (m)",
                                   "Inverted sound speed profiles", swap_axes=True,
                                   invert_y=True))

    curves = result.loss_curves
    if curves:
        names = list(curves)
        epochs = len(next(iter(curves.values())))
        lines = ["epoch," + ",".join(f"{n}_loss" for n in names)]
        for j in range(epochs):
            lines.append(f"{j + 1}," + ",".join(repr(float(curves[n][j])) for n in names))
        put("losses.csv", "\n".join(lines) + "\n")
        loss_series = {n: (np.arange(1, epochs + 1), curves[n]) for n in names}
        put("losses.svg", _svg_lines(loss_series, "epoch", "mean task loss",
                                     "Task-learner training loss"))
    return written
