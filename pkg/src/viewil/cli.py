"""Command-line entry point: ``viewil <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness
from .compress import CompressionSpec, squishe
from .core import Trajectory
from .harness import RunConfig
from .ingest import extract_prior, load_recording, save_recording
from .sim import default_task, record_demo, synth_demo, world_at

ABLATIONS = {
    "ablate-noise": harness.ablate_noise,
    "ablate-compression": harness.ablate_compression,
    "ablate-exploration": harness.ablate_exploration,
    "ablate-residual": harness.ablate_residual,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    """One flag per RunConfig field; unset flags stay None so config files show through."""
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            typ = {"int": int, "float": float}.get(f.type if isinstance(f.type, str) else f.type.__name__, str)
            p.add_argument(flag, dest=f.name, type=typ, default=None, metavar=f.name.upper())
    p.add_argument("--tasks", help="comma-separated task subset for ablations")
    p.add_argument("--no-episodes", action="store_true", help="skip per-rollout episode records")


def resolve_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(json.loads(Path(args.config).read_text()))
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig.from_dict(values)


def cmd_ingest(args) -> int:
    cam, frames = load_recording(args.recording)
    ex = extract_prior(cam, frames, tag=args.tag)
    spec = CompressionSpec.count(args.target_count) if args.target_count else CompressionSpec.error(args.max_error)
    prior = squishe(ex.hand, spec)
    doc = {
        "tag": ex.tag,
        "hand": ex.hand.to_list(),
        "prior": prior.to_list(),
        "track": ex.track.as_array().tolist(),
        "track_times": ex.track_times.tolist(),
        "object": [w.to_dict() for w in ex.object_3d],
    }
    text = json.dumps(doc, indent=1)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "prior.json").write_text(text)
    print(f"tag={ex.tag} frames={len(frames)} hand={len(ex.hand)} prior={len(prior)}")
    return 0


def cmd_compress(args) -> int:
    if args.trajectory:
        doc = json.loads(Path(args.trajectory).read_text())
        traj = Trajectory.from_list(doc["waypoints"] if isinstance(doc, dict) else doc)
    else:
        world = world_at(args.object_x, args.object_y)
        traj = synth_demo(world, default_task(args.task, world)).traj
    spec = CompressionSpec.count(args.target_count) if args.target_count else CompressionSpec.error(args.max_error)
    out = squishe(traj, spec)
    text = json.dumps(out.to_list(), indent=1)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "compressed.json").write_text(text)
    else:
        print(text)
    print(f"{len(traj)} -> {len(out)} waypoints", file=sys.stderr)
    return 0


def cmd_record(args) -> int:
    world = world_at(args.object_x, args.object_y)
    demo = synth_demo(world, default_task(args.task, world))
    cam, frames = record_demo(world, demo)
    save_recording(args.path, cam, frames)
    print(f"wrote {len(frames)} frames to {args.path}")
    return 0


def cmd_run(args, name: str) -> int:
    cfg = resolve_config(args)
    log = not args.no_episodes
    if name == "run":
        result = harness.run_view(cfg, log_episodes=log)
    else:
        tasks = tuple(args.tasks.split(",")) if args.tasks else None
        kw = {"log_episodes": log}
        if name != "ablate-residual":
            kw["workers"] = cfg.workers
        if tasks is not None:
            kw["tasks"] = tasks
        result = ABLATIONS[name](cfg, **kw)
    out = harness.write_outputs(result, cfg, cfg.out)
    sys.stdout.write(harness.csv_text(result.rows))
    print(f"wrote {out}/results.csv", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="viewil", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("ingest", help="extract and compress a prior from a recording file")
    q.add_argument("recording")
    q.add_argument("--tag", default=None, help="object tag (voted from anchor boxes when omitted)")
    q.add_argument("--max-error", type=float, default=0.01)
    q.add_argument("--target-count", type=int, default=None)
    q.add_argument("--out", default=None)

    q = sub.add_parser("compress", help="SQUISH-E compress a trajectory JSON (or a scripted demo)")
    q.add_argument("trajectory", nargs="?")
    q.add_argument("--task", default="pick")
    q.add_argument("--object-x", type=float, default=0.6)
    q.add_argument("--object-y", type=float, default=0.1)
    q.add_argument("--max-error", type=float, default=0.01)
    q.add_argument("--target-count", type=int, default=None)
    q.add_argument("--out", default=None)

    q = sub.add_parser("record", help="write a synthetic recording of a scripted demo")
    q.add_argument("path")
    q.add_argument("--task", default="pick")
    q.add_argument("--object-x", type=float, default=0.6)
    q.add_argument("--object-y", type=float, default=0.1)

    for name in ("run",) + tuple(ABLATIONS):
        q = sub.add_parser(name, help="full pipeline" if name == "run" else f"{name[7:]} ablation")
        _add_config_flags(q)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "ingest":
        return cmd_ingest(args)
    if args.command == "compress":
        return cmd_compress(args)
    if args.command == "record":
        return cmd_record(args)
    return cmd_run(args, args.command)


if __name__ == "__main__":
    sys.exit(main())
