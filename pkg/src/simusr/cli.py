"""Command-line surface: build-pairs, train, zssr, infer, eval, bench.

Every command resolves its configuration (flags win over a key=value
config file, which wins over built-in defaults; SIMUSR_SEED supplies the
default seed), runs, and writes an experiment manifest next to its outputs.
The manifest's hash covers the command, resolved config, input hashes, and
the hashes of all timing-free outputs, so re-running an invocation yields
the same manifest hash; wall time and timing-bearing outputs (loss logs,
bench reports) are recorded outside the hashed section.

Exit codes: 0 success; 2 bad usage, missing/invalid inputs, or config
conflicts; 1 unexpected internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, nn
from .denoise import parse_denoise_setting
from .image import load_image, save_image
from .metrics import bench_latency, psnr, ssim
from .pairs import AugmentPolicy, PairSetSpec, build_pairs, load_pairs, save_pairs
from .resample import parse_kernel
from .train import (
    TrainConfig,
    ZssrConfig,
    infer,
    model_config_for,
    train_simusr,
    train_zssr,
    write_log_csv,
)


class CommandError(Exception):
    """User-facing failure mapped to exit code 2."""


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _default_seed() -> int:
    return int(os.environ.get("SIMUSR_SEED", "0"))


def _apply_config_file(args: argparse.Namespace, parser_flags: dict[str, list[str]], argv):
    """Overlay key=value config entries onto args not given on the command line."""
    if not args.config:
        return
    path = Path(args.config)
    if not path.is_file():
        raise CommandError(f"config file not found: {path}")
    entries = {}
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CommandError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    for key, value in entries.items():
        if key not in parser_flags:
            raise CommandError(f"{path}: unknown config key {key!r}")
        if any(flag in argv for flag in parser_flags[key]):
            continue  # explicit flag wins
        current = getattr(args, key)
        caster = type(current) if current is not None else str
        try:
            setattr(args, key, caster(value) if caster is not bool else value in ("1", "true", "yes"))
        except ValueError as exc:
            raise CommandError(f"{path}: bad value for {key}: {exc}") from exc


def _write_manifest(out_dir: Path, command: str, config: dict, inputs: dict,
                    outputs: dict, timing_outputs: dict, wall_ms: float) -> Path:
    deterministic = {
        "command": command,
        "version": __version__,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    }
    blob = json.dumps(deterministic, sort_keys=True).encode()
    manifest = {
        "deterministic": deterministic,
        "manifest_hash": hashlib.sha256(blob).hexdigest(),
        "timing_outputs": timing_outputs,
        "wall_time_ms": round(wall_ms, 3),
    }
    path = out_dir / "experiment.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _png_inputs(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise CommandError(f"input directory not found: {directory}")
    files = sorted(directory.glob("*.png"))
    if not files:
        raise CommandError(f"no PNG files in {directory}")
    return files


def _load_ckpt(path: str) -> nn.Checkpoint:
    p = Path(path)
    if not p.is_file():
        raise CommandError(f"checkpoint not found: {p}")
    try:
        return nn.load_checkpoint(p)
    except ValueError as exc:
        raise CommandError(f"corrupt checkpoint: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_build_pairs(args, argv) -> int:
    begin = time.perf_counter()
    parse_denoise_setting(args.denoise)
    kernel = parse_kernel(args.kernel)
    files = _png_inputs(Path(args.inputs))
    images = [load_image(f) for f in files]
    names = [f"{i:04d}_{f.stem}" for i, f in enumerate(files)]
    spec = PairSetSpec(
        count=len(images),
        scale=args.scale,
        kernel=kernel,
        antialias=not args.no_antialias,
        denoise=args.denoise,
        son_from_noisy=args.son_from_noisy,
        seed=args.seed,
    )
    pairs = build_pairs(spec, images, names=names, workers=args.workers)
    out = _out_dir(args)
    save_pairs(out, pairs, spec)
    outputs = {p.name: _sha256_file(p) for p in sorted(out.iterdir()) if p.name != "experiment.json"}
    _write_manifest(
        out,
        "build-pairs",
        {
            "scale": args.scale,
            "kernel": kernel.spec(),
            "antialias": not args.no_antialias,
            "denoise": args.denoise,
            "son_from_noisy": args.son_from_noisy,
            "seed": args.seed,
            "count": len(pairs),
        },
        {f.name: _sha256_file(f) for f in files},
        outputs,
        {},
        (time.perf_counter() - begin) * 1e3,
    )
    print(f"built {len(pairs)} pairs at scale x{args.scale} -> {out}")
    return 0


def cmd_train(args, argv) -> int:
    begin = time.perf_counter()
    pairs_dir = Path(args.pairs)
    if not (pairs_dir / "manifest").is_file():
        raise CommandError(f"no pair set at {pairs_dir}")
    pairs, spec = load_pairs(pairs_dir)
    cfg = TrainConfig(
        steps=args.steps,
        batch=args.batch,
        lr_patch=args.lr_patch,
        lr=args.lr,
        seed=args.seed,
        scale=spec.scale,
        augment=AugmentPolicy.named(args.augment),
    )
    model_cfg = model_config_for(pairs, spec.scale, features=args.features, blocks=args.blocks)
    ckpt, log = train_simusr(pairs, cfg, model_cfg)
    out = _out_dir(args)
    ckpt_path = out / "model.ckpt"
    log_path = out / "train_log.csv"
    nn.save_checkpoint(ckpt_path, ckpt)
    write_log_csv(log_path, log)
    _write_manifest(
        out,
        "train",
        {
            "pairs": str(pairs_dir),
            "steps": args.steps,
            "batch": args.batch,
            "lr_patch": args.lr_patch,
            "lr": args.lr,
            "seed": args.seed,
            "augment": args.augment,
            "features": args.features,
            "blocks": args.blocks,
            "scale": spec.scale,
        },
        {"manifest": _sha256_file(pairs_dir / "manifest")},
        {ckpt_path.name: _sha256_file(ckpt_path)},
        {log_path.name: _sha256_file(log_path)},
        (time.perf_counter() - begin) * 1e3,
    )
    print(f"trained {cfg.steps} steps; final loss {log[-1][1]:.6f}; checkpoint -> {ckpt_path}")
    return 0


def cmd_zssr(args, argv) -> int:
    begin = time.perf_counter()
    src = Path(args.input)
    if not src.is_file():
        raise CommandError(f"input image not found: {src}")
    cfg = ZssrConfig(
        steps=args.steps,
        lr=args.lr,
        lr_patch=args.lr_patch,
        seed=args.seed,
        denoise=args.denoise,
    )
    image = load_image(src)
    model_cfg = nn.ModelConfig(
        in_channels=image.shape[0], features=args.features, blocks=args.blocks, scale=args.scale
    )
    result = train_zssr(image, cfg, model_cfg)
    out = _out_dir(args)
    sr_path = out / f"{src.stem}_sr.png"
    log_path = out / "zssr_log.csv"
    save_image(result.sr, sr_path)
    write_log_csv(log_path, result.log)
    _write_manifest(
        out,
        "zssr",
        {
            "input": src.name,
            "scale": args.scale,
            "steps": args.steps,
            "lr": args.lr,
            "lr_patch": args.lr_patch,
            "denoise": args.denoise,
            "seed": args.seed,
            "features": args.features,
            "blocks": args.blocks,
        },
        {src.name: _sha256_file(src)},
        {sr_path.name: _sha256_file(sr_path)},
        {log_path.name: _sha256_file(log_path)},
        (time.perf_counter() - begin) * 1e3,
    )
    print(f"online-trained {args.steps} steps in {result.elapsed_ms / 1e3:.1f}s -> {sr_path}")
    return 0


def cmd_infer(args, argv) -> int:
    begin = time.perf_counter()
    ckpt = _load_ckpt(args.ckpt)
    if args.scale is not None and args.scale != ckpt.cfg.scale:
        raise CommandError(
            f"checkpoint was trained for scale x{ckpt.cfg.scale}, requested x{args.scale}"
        )
    sources = [Path(p) for p in args.inputs]
    for src in sources:
        if not src.is_file():
            raise CommandError(f"input image not found: {src}")
    out = _out_dir(args)
    outputs = {}
    for src in sources:
        sr = infer(ckpt, load_image(src), denoise=args.denoise)
        sr_path = out / f"{src.stem}_sr.png"
        save_image(sr, sr_path)
        outputs[sr_path.name] = _sha256_file(sr_path)
    _write_manifest(
        out,
        "infer",
        {"ckpt": str(args.ckpt), "denoise": args.denoise, "scale": ckpt.cfg.scale},
        {src.name: _sha256_file(src) for src in sources},
        outputs,
        {},
        (time.perf_counter() - begin) * 1e3,
    )
    print(f"wrote {len(outputs)} image(s) at x{ckpt.cfg.scale} -> {out}")
    return 0


def cmd_eval(args, argv) -> int:
    begin = time.perf_counter()
    sr_dir, ref_dir = Path(args.sr_dir), Path(args.ref_dir)
    sr_files = _png_inputs(sr_dir)
    if not ref_dir.is_dir():
        raise CommandError(f"reference directory not found: {ref_dir}")
    rows = []
    for sr_path in sr_files:
        ref_path = ref_dir / sr_path.name
        if not ref_path.is_file():
            raise CommandError(f"no reference image for {sr_path.name} in {ref_dir}")
        a, b = load_image(sr_path), load_image(ref_path)
        rows.append(
            (
                sr_path.name,
                psnr(a, b, mode=args.mode, shave=args.shave),
                ssim(a, b, mode=args.mode, shave=args.shave),
            )
        )
    mean_psnr = float(np.mean([r[1] for r in rows]))
    mean_ssim = float(np.mean([r[2] for r in rows]))
    rows.append(("mean", mean_psnr, mean_ssim))

    def fmt(value: float) -> str:
        return "inf" if math.isinf(value) else f"{value:.4f}"

    lines = ["image,psnr_db,ssim,mode,shave"]
    lines += [f"{name},{fmt(p)},{fmt(s)},{args.mode},{args.shave}" for name, p, s in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        out = _out_dir(args)
        csv_path = out / "eval.csv"
        csv_path.write_text(text)
        _write_manifest(
            out,
            "eval",
            {"sr_dir": str(sr_dir), "ref_dir": str(ref_dir), "mode": args.mode, "shave": args.shave},
            {f.name: _sha256_file(f) for f in sr_files},
            {csv_path.name: _sha256_file(csv_path)},
            {},
            (time.perf_counter() - begin) * 1e3,
        )
    sys.stdout.write(text)
    return 0


def cmd_bench(args, argv) -> int:
    begin = time.perf_counter()
    src = Path(args.input)
    if not src.is_file():
        raise CommandError(f"input image not found: {src}")
    ckpt = _load_ckpt(args.ckpt)
    if args.scale != ckpt.cfg.scale:
        raise CommandError(
            f"checkpoint was trained for scale x{ckpt.cfg.scale}, requested x{args.scale}"
        )
    image = load_image(src)
    params = ckpt.param_count()
    infer_report = bench_latency(
        "simusr_infer",
        lambda: infer(ckpt, image, denoise=args.denoise),
        repeats=args.repeats,
        params_count=params,
    )
    zssr_cfg = ZssrConfig(
        steps=args.zssr_steps,
        lr_patch=args.zssr_lr_patch,
        seed=args.seed,
        denoise=args.denoise,
    )
    zssr_report = bench_latency(
        "zssr_full",
        lambda: train_zssr(image, zssr_cfg, ckpt.cfg),
        repeats=1,
        params_count=params,
    )
    report = {
        "input": src.name,
        "scale": ckpt.cfg.scale,
        "zssr_steps": args.zssr_steps,
        "jobs": {r.job: r.as_dict() for r in (infer_report, zssr_report)},
        "ratio_zssr_over_infer": round(zssr_report.median_ms / infer_report.median_ms, 3),
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = _out_dir(args)
        bench_path = out / "bench.json"
        bench_path.write_text(text)
        _write_manifest(
            out,
            "bench",
            {
                "input": src.name,
                "ckpt": str(args.ckpt),
                "scale": args.scale,
                "zssr_steps": args.zssr_steps,
                "zssr_lr_patch": args.zssr_lr_patch,
                "repeats": args.repeats,
                "denoise": args.denoise,
                "seed": args.seed,
            },
            {src.name: _sha256_file(src)},
            {},
            {bench_path.name: _sha256_file(bench_path)},
            (time.perf_counter() - begin) * 1e3,
        )
    sys.stdout.write(text)
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file; explicit flags win")
    sub.add_argument("--seed", type=int, default=_default_seed(),
                     help="RNG seed (default: SIMUSR_SEED env var or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simusr",
        description="Unsupervised super-resolution from pseudo-pairs of LR images.",
    )
    parser.add_argument("--version", action="version", version=f"simusr {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("build-pairs", help="build a pseudo-pair set from LR images")
    p.add_argument("inputs", help="directory of LR PNG images")
    p.add_argument("--out", required=True, help="output pair-set directory")
    p.add_argument("--scale", type=int, default=2, help="downscale factor for sons")
    p.add_argument("--kernel", default="keys:-0.5", help="keys:<a>, box, or gauss:<sigma>")
    p.add_argument("--no-antialias", action="store_true", help="disable kernel stretching")
    p.add_argument("--denoise", default="off", help="off, auto, or sigma=<v>")
    p.add_argument("--son-from-noisy", action="store_true",
                   help="derive sons from the raw inputs instead of the denoised fathers")
    p.add_argument("--workers", type=int, default=1, help="data-stage threads")
    _add_common(p)
    p.set_defaults(func=cmd_build_pairs)

    p = subs.add_parser("train", help="train the micro SR network on a pair set")
    p.add_argument("--pairs", required=True, help="pair-set directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr-patch", type=int, default=16, dest="lr_patch")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--augment", choices=("off", "geo", "moa"), default="moa")
    p.add_argument("--features", type=int, default=32)
    p.add_argument("--blocks", type=int, default=3)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("zssr", help="online-train on a single image and upscale it")
    p.add_argument("input", help="LR PNG image")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-patch", type=int, default=48, dest="lr_patch")
    p.add_argument("--denoise", default="off")
    p.add_argument("--features", type=int, default=32)
    p.add_argument("--blocks", type=int, default=3)
    _add_common(p)
    p.set_defaults(func=cmd_zssr)

    p = subs.add_parser("infer", help="upscale images with a trained checkpoint")
    p.add_argument("inputs", nargs="+", help="LR PNG image(s)")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scale", type=int, default=None,
                   help="expected scale; must match the checkpoint")
    p.add_argument("--denoise", default="off")
    _add_common(p)
    p.set_defaults(func=cmd_infer)

    p = subs.add_parser("eval", help="PSNR/SSIM of an SR directory against a reference")
    p.add_argument("sr_dir")
    p.add_argument("ref_dir")
    p.add_argument("--mode", choices=("rgb", "y"), default="rgb")
    p.add_argument("--shave", type=int, default=0,
                   help="border crop before metrics (convention: the scale factor)")
    p.add_argument("--out", default=None, help="also write eval.csv and a manifest here")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("bench", help="latency of online training vs plain inference")
    p.add_argument("--input", required=True, help="LR PNG image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--zssr-steps", type=int, default=1000, dest="zssr_steps")
    p.add_argument("--zssr-lr-patch", type=int, default=48, dest="zssr_lr_patch")
    p.add_argument("--repeats", type=int, default=3, help="timed inference repeats")
    p.add_argument("--denoise", default="off")
    p.add_argument("--out", default=None, help="also write bench.json and a manifest here")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def _flag_map(parser: argparse.ArgumentParser) -> dict[str, list[str]]:
    flags: dict[str, list[str]] = {}
    for action in parser._actions:  # noqa: SLF001 - argparse has no public accessor
        if action.option_strings and action.dest != "help":
            flags[action.dest] = list(action.option_strings)
    return flags


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = next(
        p for p in parser._subparsers._group_actions[0].choices.values()  # noqa: SLF001
        if p.get_default("func") is args.func
    )
    try:
        _apply_config_file(args, _flag_map(sub), argv)
        return args.func(args, argv)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
