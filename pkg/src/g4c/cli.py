"""Command line entry point: ``g4c <command> ...``.

Exit codes: 0 success, 2 bad input or options, 3 unreadable or corrupt
container, 4 file system errors.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import os
import sys

from . import __version__
from .codec import decode_scene, encode_scene, read_container, size_report
from .container import read_layout
from .errors import G4CError, ValidationError
from .experiments import CSV_SCHEMA, ablate_opacity, ablate_wavelet, sweep
from .model import scene_digest
from .presets import LEVELS, level_preset, read_config
from .render import ProbeSet, write_ppm
from .scenefile import read_scene, write_scene
from .synth import SMOOTH_ORBIT, STANDARD, STANDARD_SEED, SynthConfig, generate_synthetic_scene

EXIT_IO = 4
SCENE_PRESETS = {"standard": STANDARD, "smooth-orbit": SMOOTH_ORBIT}


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.6f}"
    return str(v)


def rows_to_csv(rows, kind) -> str:
    """CSV text with a schema comment row; numbers printed at fixed precision."""
    buf = io.StringIO()
    buf.write(f"# g4c {kind} schema {CSV_SCHEMA}\n")
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def _emit(rows, kind, path, columns):
    text = rows_to_csv(rows, kind)
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
    widths = {c: max(len(c), *(len(_fmt(r[c])) for r in rows)) for c in columns}
    print("  ".join(f"{c:>{widths[c]}}" for c in columns))
    for r in rows:
        print("  ".join(f"{_fmt(r[c]):>{widths[c]}}" for c in columns))


def _overrides(args):
    out = read_config(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "wavelet_levels", None) is not None:
        out["wavelet_levels"] = args.wavelet_levels
    if getattr(args, "no_wavelet", False):
        out["wavelet_levels"] = 0
    if getattr(args, "lambda_r", None) is not None:
        out["lambda_r"] = args.lambda_r
    if getattr(args, "codebook_size", None) is not None:
        out["codebook_size"] = args.codebook_size
    if "wavelet_levels" in out:
        out.setdefault("keep_levels", 0)
        out["keep_levels"] = min(out["keep_levels"], out["wavelet_levels"])
    return out


def _levels(raw):
    try:
        levels = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"levels must be a comma-separated list of integers: {raw!r}")
    bad = [lvl for lvl in levels if lvl not in LEVELS]
    if bad or not levels:
        raise ValidationError(f"levels must be drawn from {LEVELS}")
    return levels


# ---------------------------------------------------------------------------
# commands

def cmd_gen(args):
    config = SCENE_PRESETS[args.preset]
    if args.config:
        cp = configparser.ConfigParser()
        try:
            with open(args.config) as f:
                cp.read_file(f)
        except configparser.Error as exc:
            raise ValidationError(f"config file unreadable: {exc}") from None
        if cp.has_section("scene"):
            base = {f: getattr(config, f) for f in config.__dataclass_fields__}
            base.update(dict(cp.items("scene")))
            config = SynthConfig.from_mapping(base)
    scene, probes = generate_synthetic_scene(config, args.seed, probes=bool(args.frames))
    write_scene(args.output, scene)
    if args.frames:
        os.makedirs(args.frames, exist_ok=True)
        for i, img in enumerate(probes.truth):
            write_ppm(os.path.join(args.frames, f"probe_{i:03d}.ppm"), img)
    print(f"wrote {args.output}: {len(scene.statics)} static, {len(scene.dynamics)} dynamic, "
          f"digest {scene_digest(scene)}")
    return 0


def cmd_encode(args):
    scene = read_scene(args.input)
    preset = level_preset(args.level, **_overrides(args))
    container, report = encode_scene(scene, preset, seed=args.seed)
    container.write(args.output)
    print(report.format_table())
    print(f"model digest {scene_digest(container.model)}")
    if args.csv:
        rows = [{"component": n, "bytes": b, "percent": p} for n, b, p in report.rows()]
        rows.append({"component": "total", "bytes": report.total_bytes, "percent": 100.0})
        with open(args.csv, "w", newline="") as f:
            f.write(rows_to_csv(rows, "size"))
    return 0


def cmd_decode(args):
    scene = decode_scene(read_container(args.input))
    write_scene(args.output, scene)
    print(f"wrote {args.output}: digest {scene_digest(scene)}")
    return 0


def cmd_inspect(args):
    data = read_container(args.input)
    h = read_layout(data).header
    print(f"level {h.level}  sh degree {h.sh_degree}  duration {h.duration:g}  "
          f"keyframe interval {h.keyframe_interval}  wavelet levels {h.wavelet_levels} "
          f"(kept {h.kept_levels})")
    print(size_report(data).format_table())
    return 0


def cmd_sweep(args):
    scene = read_scene(args.input)
    rows, blobs = sweep(scene, _levels(args.levels), seed=args.seed,
                        overrides=_overrides(args), with_data=True)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        for row, data in zip(rows, blobs):
            with open(os.path.join(args.out_dir, f"level_{row['level']}.g4c"), "wb") as f:
                f.write(data)
    _emit(rows, "sweep", args.csv, ["level", "size", "psnr", "ssim", "traj_psnr",
                                    "static_pruned", "dynamic_pruned", "sh_pruned"])
    return 0


def cmd_ablate_opacity(args):
    scene = read_scene(args.input)
    rows = ablate_opacity(scene, args.level, seed=args.seed, overrides=_overrides(args))
    _emit(rows, "ablate-opacity", args.csv, ["policy", "size", "psnr", "ssim"])
    return 0


def cmd_ablate_wavelet(args):
    scene = read_scene(args.input)
    depths = [int(x) for x in args.depths.split(",")]
    if any(d < 1 or d > 8 for d in depths):
        raise ValidationError("depths must lie in 1..8")
    rows = ablate_wavelet(scene, depths, args.level, seed=args.seed, overrides=_overrides(args))
    _emit(rows, "ablate-wavelet", args.csv,
          ["depth", "size", "bytes_F_masked", "retained", "padded", "psnr", "traj_psnr"])
    return 0


def cmd_render(args):
    scene = read_scene(args.input)
    probes = ProbeSet.standard(scene, seed=args.seed)
    os.makedirs(args.output, exist_ok=True)
    for i, img in enumerate(probes.truth):
        write_ppm(os.path.join(args.output, f"probe_{i:03d}.ppm"), img)
    print(f"wrote {len(probes.truth)} probe images to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _preset_flags(p, level=True):
    if level:
        p.add_argument("--level", type=int, default=1, choices=LEVELS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wavelet-levels", type=int)
    p.add_argument("--no-wavelet", action="store_true", help="code keyframes directly")
    p.add_argument("--lambda-r", type=float)
    p.add_argument("--codebook-size", type=int)
    p.add_argument("--config", help="INI file with a [preset] section")
    p.add_argument("--csv", help="also write the table as CSV")


def build_parser():
    ap = argparse.ArgumentParser(prog="g4c", description="Rate-distortion codec for dynamic "
                                 "Gaussian splatting scenes.")
    ap.add_argument("--version", action="version", version=f"g4c {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic scene")
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=STANDARD_SEED)
    p.add_argument("--preset", choices=sorted(SCENE_PRESETS), default="standard")
    p.add_argument("--config", help="INI file; a [scene] section overrides generator settings")
    p.add_argument("--frames", help="directory for ground-truth probe images (PPM)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("encode", help="compress a scene file")
    p.add_argument("input")
    p.add_argument("output")
    _preset_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress a container to a scene file")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("inspect", help="print the size report of a container")
    p.add_argument("input")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("sweep", help="encode at several levels and score each")
    p.add_argument("input")
    p.add_argument("--levels", default=",".join(map(str, LEVELS)))
    p.add_argument("--out-dir", help="also write each level's container here")
    _preset_flags(p, level=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate-opacity", help="opacity quantization ladder")
    p.add_argument("input")
    _preset_flags(p)
    p.set_defaults(func=cmd_ablate_opacity, level=6)

    p = sub.add_parser("ablate-wavelet", help="trajectory wavelet depth study")
    p.add_argument("input")
    p.add_argument("--depths", default="1,2,3")
    _preset_flags(p)
    p.set_defaults(func=cmd_ablate_wavelet, level=6)

    p = sub.add_parser("render", help="write probe images of a scene")
    p.add_argument("input")
    p.add_argument("output", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except G4CError as exc:
        print(f"g4c: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"g4c: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
