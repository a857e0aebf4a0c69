"""Command line tools: build synthetic sequences, map them and score the results.

Every command reads one experiment config (``--config`` file or preset name,
further adjusted by ``--set section.key=value``). Commands working on a
sequence directory fall back to the ``config.yaml`` stored there.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import config as cfgmod
from . import io
from .evaluation.depth import DELTA_THRESHOLDS, ause, depth_metrics
from .evaluation.mapeval import compare_free_space
from .evaluation.mesh import marching_cubes, mesh_accuracy, write_ply
from .occupancy import OccupancyOctree
from .pipeline import FusionMode, build_gt_map, load_tum_sequence, mock_complete, run_sequence
from .sensor_models import degrade_depth, synthesize_holes
from .synthetic import BoxRoom, orbit_poses, roam_trajectory, room_trajectory

FRAME_RATE = 30.0
UNKNOWN_RGB = (190, 190, 190)
REPORT_COLUMNS = ["correct_free_m3", "incorrect_free_m3", "mesh_accuracy_m"]


class CliError(Exception):
    pass


def _config(args, sequence_dir=None) -> cfgmod.ExperimentConfig:
    if args.config:
        cfg = cfgmod.load(args.config)
    elif sequence_dir is not None and (Path(sequence_dir) / "config.yaml").is_file():
        cfg = cfgmod.load(Path(sequence_dir) / "config.yaml")
    else:
        cfg = cfgmod.ExperimentConfig()
    return cfg.override(args.set or [])


def _pngs(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(f"directory not found: {d}")
    return sorted(d.glob("*.png"))


def _write_json(path, data):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_synth_scene(args):
    cfg = _config(args)
    out = Path(args.out)
    room = BoxRoom.default(cfg.scene.side)
    n = cfg.scene.frames
    if cfg.scene.trajectory == "roam":
        poses = roam_trajectory(room, n)
    elif cfg.scene.trajectory == "walk":
        poses = room_trajectory(room, n)
    else:
        poses = orbit_poses((room.room_min + room.room_max) / 2, 0.25 * cfg.scene.side, n)
    lines = ["# timestamp tx ty tz qx qy qz qw"]
    for i, pose in enumerate(poses):
        stamp = f"{i / FRAME_RATE:.6f}"
        io.write_depth(out / "gt_depth" / f"{stamp}.png", room.render(pose, cfg.camera).values)
        lines.append(" ".join([stamp] + [repr(float(v)) for v in (*pose.translation, *pose.rotation)]))
    (out / "groundtruth.txt").write_text("\n".join(lines) + "\n")
    cfg.save(out / "config.yaml")
    print(f"wrote {n} ground-truth frames to {out}")


def cmd_degrade(args):
    cfg = _config(args, args.sequence)
    root = Path(args.sequence) if args.sequence else None
    src = Path(args.input) if args.input else root / "gt_depth"
    dst = Path(args.out) if args.out else root / "depth"
    files = _pngs(src)
    entries = []
    for i, f in enumerate(files):
        noise_seed, hole_seed = cfg.seeds.degrade + i, cfg.seeds.holes + i
        noisy = degrade_depth(io.read_depth(f), cfg.kinect, noise_seed)
        holed = synthesize_holes(noisy, cfg.holes, hole_seed)
        io.write_depth(dst / f.name, holed.values)
        entries.append({"file": f.name, "noise_seed": noise_seed, "hole_seed": hole_seed})
    _write_json(dst / "manifest.json", {"source": str(src), "images": entries})
    print(f"degraded {len(files)} images into {dst}")


def cmd_mock_complete(args):
    cfg = _config(args, args.sequence)
    root = Path(args.sequence)
    gt_dir, holed_dir = root / "gt_depth", root / "depth"
    files = _pngs(holed_dir)
    entries = []
    for i, f in enumerate(files):
        gt_path = gt_dir / f.name
        if not gt_path.is_file():
            raise CliError(f"no ground truth for {f.name} in {gt_dir}")
        seed = cfg.seeds.complete + i
        depth, unc = mock_complete(io.read_depth(gt_path), io.read_depth(f), cfg.mock.noise_scale,
                                   cfg.mock.unc_floor, seed, cfg.sigma, cfg.kinect, cfg.mock.unc_scale)
        io.write_depth(root / "completed" / f.name, depth.values)
        io.write_depth(root / "uncertainty" / f.name, unc.values)
        entries.append({"file": f.name, "seed": seed})
    _write_json(root / "completed" / "manifest.json", {"images": entries})
    print(f"completed {len(files)} images in {root}")


def cmd_map(args):
    cfg = _config(args, args.sequence)
    root = Path(args.sequence)
    mode = FusionMode.parse(args.mode) if args.mode else cfg.mode
    if mode is not FusionMode.RAW_ONLY and not args.ground_truth:
        for sub in ("completed", "uncertainty"):
            if not (root / sub).is_dir():
                raise CliError(f"mode {mode.value} needs completed depth but {root / sub} does not exist")
    frames = load_tum_sequence(root)
    if args.ground_truth:
        gt_map = None
        tree = build_gt_map(frames, cfg.camera, cfg.map, cfg.sensors)
        stats = None
    else:
        gt_map = OccupancyOctree.load(args.gt_map) if args.gt_map else None
        eval_every = args.eval_every or cfg.fusion.eval_every
        tree, stats = run_sequence(frames, mode, cfg.camera, cfg.map, cfg.sensors, gt_map, eval_every,
                                   cfg.fusion.gate_factor, cfg.thresholds.recon_free, cfg.thresholds.gt_free,
                                   record_timing=args.timing)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    tree.save(args.out)
    if stats is not None and args.stats:
        stats.write_csv(args.stats)
    print(f"mapped {len(frames)} frames; free volume {tree.free_space_volume(cfg.thresholds.recon_free):.3f} m3")


def _mesh_accuracy(recon, gt, cfg) -> float:
    gt_mesh = marching_cubes(gt, cfg.thresholds.iso)
    out_mesh = marching_cubes(recon, cfg.thresholds.iso)
    if gt_mesh.is_empty or out_mesh.is_empty:
        print("warning: empty mesh, mesh accuracy unavailable", file=sys.stderr)
        return math.nan
    return mesh_accuracy(gt_mesh, out_mesh, cfg.evaluation.mesh_samples, cfg.seeds.mesh)


def cmd_eval_map(args):
    cfg = _config(args)
    recon, gt = OccupancyOctree.load(args.map), OccupancyOctree.load(args.gt_map)
    if not recon.same_config(gt):
        raise CliError("map and ground-truth map have different configurations")
    rep = compare_free_space(recon, gt, cfg.thresholds.recon_free, cfg.thresholds.gt_free)
    acc = _mesh_accuracy(recon, gt, cfg)
    row = [rep.correct_free, rep.incorrect_free, acc]
    for name, value in zip(REPORT_COLUMNS, row):
        print(f"{name}: {value:.6f}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            w.writerow([repr(float(v)) for v in row])


def _depth_row(name, pred, gt, unc, cfg):
    m = depth_metrics(pred, gt, DELTA_THRESHOLDS, cfg.evaluation.delta_convention)
    valid = gt > 0
    a = ause(np.abs(pred[valid] - gt[valid]), unc[valid])
    return [name, m.n_pixels, m.rmse, m.mae, a] + [m.delta_percentages[t] for t in DELTA_THRESHOLDS]


def cmd_eval_depth(args):
    cfg = _config(args)
    preds = {f.name for f in _pngs(args.pred)}
    uncs = {f.name for f in _pngs(args.unc)}
    gts = {f.name for f in _pngs(args.gt)}
    if not (preds == uncs == gts):
        odd = sorted((preds | uncs | gts) - (preds & uncs & gts))
        raise CliError(f"prediction, uncertainty and ground-truth directories are misaligned: {', '.join(odd[:5])}")
    if not preds:
        raise CliError("no images to evaluate")
    header = ["image", "n_pixels", "rmse_m", "mae_m", "ause"] + [f"delta_{t:.6g}" for t in DELTA_THRESHOLDS]
    rows, pooled = [], ([], [], [])
    for name in sorted(preds):
        p = io.read_depth(Path(args.pred) / name).values
        u = io.read_uncertainty(Path(args.unc) / name).values
        g = io.read_depth(Path(args.gt) / name).values
        if not (p.shape == u.shape == g.shape):
            raise CliError(f"image dimensions differ for {name}")
        if not np.any(g > 0):
            raise CliError(f"ground truth {name} has no valid pixels")
        rows.append(_depth_row(name, p, g, u, cfg))
        valid = g > 0
        for acc, arr in zip(pooled, (p, g, u)):
            acc.append(arr[valid])
    p, g, u = (np.concatenate(a) for a in pooled)
    rows.append(_depth_row("pooled", p, g, u, cfg))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r[:2] + [repr(float(v)) for v in r[2:]])
    last = rows[-1]
    print(f"pooled over {last[1]} pixels: rmse {last[2]:.4f} m, mae {last[3]:.4f} m, ause {last[4]:.4f}")


def colorize(prob) -> np.ndarray:
    """Blue (free) to red (occupied) with probability 0.5 at the midpoint; NaN is grey."""
    p = np.asarray(prob, dtype=np.float64)
    known = ~np.isnan(p)
    q = np.where(known, np.clip(p, 0.0, 1.0), 0.0)
    rgb = np.empty(p.shape + (3,), dtype=np.uint8)
    rgb[..., 0] = np.rint(255 * q)
    rgb[..., 1] = 0
    rgb[..., 2] = np.rint(255 * (1 - q))
    rgb[~known] = UNKNOWN_RGB
    return rgb


def cmd_slice(args):
    tree = OccupancyOctree.load(args.map)
    try:
        img = tree.slice_image(args.axis, args.coordinate)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(colorize(img), mode="RGB").save(args.out, format="PNG")
    print(f"wrote {img.shape[0]}x{img.shape[1]} slice to {args.out}")


def cmd_mesh(args):
    cfg = _config(args)
    mesh = marching_cubes(OccupancyOctree.load(args.map), cfg.thresholds.iso)
    write_ply(mesh, args.out)
    print(f"wrote {len(mesh.vertices)} vertices, {len(mesh.triangles)} faces to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file or preset name (desk, interiornet, tum)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value, e.g. map.voxel_res=0.02")

    parser = argparse.ArgumentParser(prog="compmap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-scene", parents=[common], help="render a boxed-room ground-truth sequence")
    p.add_argument("out")
    p.set_defaults(func=cmd_synth_scene)

    p = sub.add_parser("degrade", parents=[common], help="add sensor noise and holes to ground-truth depth")
    p.add_argument("sequence", nargs="?", help="sequence directory (reads gt_depth/, writes depth/)")
    p.add_argument("--input", help="ground-truth depth directory")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("mock-complete", parents=[common], help="fill holes from ground truth with calibrated noise")
    p.add_argument("sequence")
    p.set_defaults(func=cmd_mock_complete)

    p = sub.add_parser("map", parents=[common], help="fuse a sequence into an occupancy map")
    p.add_argument("sequence")
    p.add_argument("--mode", choices=[m.value for m in FusionMode])
    p.add_argument("--out", required=True, help="map file to write")
    p.add_argument("--stats", help="per-frame statistics CSV")
    p.add_argument("--gt-map", help="ground-truth map for free-space statistics")
    p.add_argument("--ground-truth", action="store_true", help="map gt_depth/ instead, producing a reference map")
    p.add_argument("--eval-every", type=int)
    p.add_argument("--timing", action="store_true", help="record wall-clock integration time")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("eval-map", parents=[common], help="free-space volumes and mesh accuracy against ground truth")
    p.add_argument("map")
    p.add_argument("gt_map")
    p.add_argument("--out", help="report CSV")
    p.set_defaults(func=cmd_eval_map)

    p = sub.add_parser("eval-depth", parents=[common], help="depth and uncertainty metrics over image directories")
    p.add_argument("pred")
    p.add_argument("unc")
    p.add_argument("gt")
    p.add_argument("--out", required=True, help="report CSV")
    p.set_defaults(func=cmd_eval_depth)

    p = sub.add_parser("slice", parents=[common], help="render an occupancy cross-section PNG")
    p.add_argument("map")
    p.add_argument("--axis", choices=["x", "y", "z"], default="z")
    p.add_argument("--coordinate", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("mesh", parents=[common], help="extract the iso-surface as an ASCII PLY")
    p.add_argument("map")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "degrade" and not args.sequence and not (args.input and args.out):
        print("error: give a sequence directory or both --input and --out", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
