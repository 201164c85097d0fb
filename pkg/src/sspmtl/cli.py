"""Command-line entry point: ``sspmtl <command> [--config F] [--seed N] [--out DIR]``.

Exit status: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import U64_MAX, load_config
from .eof import build_eof_basis, extend_profile, linear_extend
from .errors import ConfigError, DataError, SspError
from .harness import (BenchmarkResult, emit_plot_data, prepare_experiment, run_benchmark,
                      write_report)
from .network import finetune_task, invert, pretrain
from .profile import layer_depths
from .ray import ObservationGeometry, TravelTimeObservation
from .world import generate_world


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _out(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out}: {exc.strerror}") from None
    return out


def cmd_gen_world(args, cfg):
    world = generate_world(cfg.world)
    out = _out(args)
    for p in world.profiles:
        io.write_profile_csv(out / "profiles" / f"{p.id}.csv", p)
    for p in world.references:
        io.write_profile_csv(out / "references" / f"{p.id}.csv", p)
    io.write_profile_csv(out / "task.csv", world.task)
    exp = prepare_experiment(cfg, world)
    io.write_cluster_manifest(out / "clusters.json", exp.clusters)
    io.write_json(out / "world.json", {
        "config": cfg.to_dict(),
        "true_task_cluster": world.task_cluster,
        "selected_cluster": exp.selected_cluster,
        "receivers": [list(r) for r in world.receivers],
        "pings": [list(p) for p in world.pings],
    })
    print(f"wrote {len(world.profiles)} profiles, {len(world.references)} references "
          f"and the task to {out}")


def cmd_extend(args, cfg):
    if not args.profile or not args.empirical:
        raise ConfigError("extend needs --profile and --empirical")
    target = io.read_profile_csv(args.profile)
    empirical = io.read_profile_dir(args.empirical)
    ec = cfg.eof
    depth = min(p.max_depth for p in empirical)
    if ec.eof_depth < depth:
        empirical = [p.replace(p.depths[p.depths <= ec.eof_depth],
                               p.speeds[p.depths <= ec.eof_depth]) for p in empirical]
        depth = min(p.max_depth for p in empirical)
    extended = extend_profile(target, empirical, ec.retain_order, mapping=ec.mapping,
                              crossfade=ec.crossfade, layer_count=cfg.ssp.layer_count,
                              full_resolution=ec.full_resolution)
    if ec.final_depth > extended.max_depth:
        extended = linear_extend(extended, ec.final_depth, ec.slope_window)
    out = _out(args)
    path = io.write_profile_csv(out / f"{target.id or 'profile'}-extended.csv", extended)
    grid = layer_depths(depth, cfg.ssp.layer_count)
    io.write_basis_json(out / "basis.json", build_eof_basis(empirical, ec.retain_order, grid=grid))
    print(f"extended {target.id!r} from {target.max_depth:g} m to {extended.max_depth:g} m: {path}")


def cmd_simulate(args, cfg):
    world = generate_world(cfg.world)
    profile = io.read_profile_csv(args.profile) if args.profile else world.task
    geometry = ObservationGeometry(profile.depths, world.receivers, world.pings)
    times = geometry.times(profile.speeds)
    sigma = cfg.world.noise_sigma
    seed = cfg.world.seed
    if sigma > 0:
        times = times + np.random.default_rng(seed).normal(0.0, sigma, times.shape)
    obs = TravelTimeObservation(times.ravel(), geometry.ping_count, geometry.receiver_count,
                                sigma, seed)
    path = io.write_observation_csv(_out(args) / "observation.csv", obs)
    print(f"wrote {obs.ping_count} pings x {obs.receiver_count} receivers to {path}")


def cmd_pretrain(args, cfg):
    exp = prepare_experiment(cfg)
    seed = cfg.mtl.seed
    state = pretrain(exp.cluster_data, cfg.mtl, seed=seed)
    result = finetune_task(state.hidden, exp.ref_features, exp.ref_targets, exp.rates,
                           cfg.mtl, seed + 1)
    out = _out(args)
    path = io.write_checkpoint(out / "checkpoint.json", result.params, cfg.mtl, exp.input_std,
                               exp.label_std, exp.grid, seed)
    io.write_json(out / "training.json", {"pretrain_losses": state.losses,
                                          "task_losses": result.losses,
                                          "selected_cluster": exp.selected_cluster})
    print(f"pretrained on {len(exp.cluster_data)} clusters, fine-tuned on "
          f"{len(exp.references)} references: {path}")


def cmd_invert(args, cfg):
    if not args.checkpoint or not args.observation:
        raise ConfigError("invert needs --checkpoint and --observation")
    params, mcfg, input_std, label_std, depths, _ = io.read_checkpoint(args.checkpoint)
    obs = io.read_observation_csv(args.observation)
    if len(obs) != mcfg.input_size:
        raise DataError(f"observation has {len(obs)} times, network expects {mcfg.input_size}")
    profile = invert(params, obs, input_std, label_std, depths, id="inverted")
    path = io.write_profile_csv(_out(args) / "inverted.csv", profile)
    print(f"inverted profile written to {path}")


def cmd_benchmark(args, cfg):
    result = run_benchmark(cfg)
    out = _out(args)
    js, md = write_report(out, result)
    io.write_json(out / "inversions.json", {
        "depth_m": result.grid.tolist(),
        "truth_mps": result.truth.tolist(),
        "methods": {m: np.asarray(s).tolist() for m, s in result.example.items()},
    })
    print(md.read_text(), end="")
    print(f"report: {js}")


def cmd_plot_data(args, cfg):
    src = Path(args.report or args.out)
    report = io.read_json(src / "report.json")
    inv = io.read_json(src / "inversions.json")
    try:
        result = BenchmarkResult(
            report,
            {m: np.array(v, dtype=float) for m, v in inv["methods"].items()},
            np.array(inv["truth_mps"], dtype=float),
            np.array(inv["depth_m"], dtype=float),
            {m: list(v) for m, v in report.get("loss_curves", {}).items()},
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise DataError(f"{src}: malformed benchmark output ({exc})") from None
    files = emit_plot_data(result, _out(args))
    for f in files:
        print(f)


COMMANDS = {
    "gen-world": (cmd_gen_world, "generate the synthetic historical set, references and task"),
    "extend": (cmd_extend, "extend a partial-depth profile with empirical EOFs"),
    "simulate": (cmd_simulate, "simulate ping/receiver travel times for a profile"),
    "pretrain": (cmd_pretrain, "multi-task pretraining plus task fine-tuning -> checkpoint"),
    "invert": (cmd_invert, "invert an observation file with a checkpoint"),
    "benchmark": (cmd_benchmark, "run the four-method comparison and write the report"),
    "plot-data": (cmd_plot_data, "CSV/SVG series from a benchmark output directory"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sspmtl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (defaults if omitted)")
        p.add_argument("--seed", type=_seed, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        if name in ("extend", "simulate"):
            p.add_argument("--profile", help="profile CSV")
        if name == "extend":
            p.add_argument("--empirical", help="directory of full-depth profile CSVs")
        if name == "invert":
            p.add_argument("--checkpoint", help="checkpoint JSON from 'pretrain'")
            p.add_argument("--observation", help="observation CSV from 'simulate'")
        if name == "plot-data":
            p.add_argument("--report", help="benchmark output directory (default: --out)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        COMMANDS[args.command][0](args, cfg)
    except SspError as exc:
        print(f"sspmtl {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
