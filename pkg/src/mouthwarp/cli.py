"""Command-line driver.

Subcommands: ``bank`` (build a texture bank from a clip), ``warp``
(retrieve + warp + composite a query landmark sequence), ``metrics``
(photometric error and aperture-style similarity), ``synth`` (synthetic
corpus generator) and ``adain-check`` (feature-normalization self-test).

Options may come from a JSON config file (``--config``); explicit flags
win over the file. All commands are deterministic for a fixed seed and
config, re-running them produces byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reporting
from .bank import build_bank, load_bank, save_bank
from .blending import mouth_mask
from .core import load_landmarks
from .errors import InvalidInputError
from .features import StyleParams, adain, instance_norm
from .imgio import load_frame_dir, save_image
from .metrics import lip_aperture, photometric_error, ssiou
from .pipeline import MODES, PipelineConfig, run_warp
from .synth import SynthConfig, write_corpus
from .tps import RADIAL_NORMS


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file; flags override it")
    parser.add_argument("--window-len", type=int, dest="window_len")
    parser.add_argument("--crop", type=int, dest="crop_side", help="mouth crop side in px")
    parser.add_argument("--alpha1", type=float, help="fitting-error weight")
    parser.add_argument("--alpha2", type=float, help="bending-energy weight")
    parser.add_argument("--alpha3", type=float, help="temporal-energy weight")
    parser.add_argument("--max-iters", type=int, dest="max_iters")
    parser.add_argument("--levels", type=int, help="blend pyramid levels")
    parser.add_argument("--tps-distance", choices=RADIAL_NORMS, dest="tps_distance")
    parser.add_argument("--ridge", type=float, help="kernel ridge for noisy landmarks")


def _build_config(args) -> PipelineConfig:
    base = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    return base.overridden(
        window_len=getattr(args, "window_len", None),
        crop_side=getattr(args, "crop_side", None),
        alpha1=getattr(args, "alpha1", None),
        alpha2=getattr(args, "alpha2", None),
        alpha3=getattr(args, "alpha3", None),
        max_iters=getattr(args, "max_iters", None),
        levels=getattr(args, "levels", None),
        tps_distance=getattr(args, "tps_distance", None),
        ridge=getattr(args, "ridge", None),
    )


def _cmd_bank(args) -> int:
    config = _build_config(args)
    frames = load_frame_dir(args.frames_dir)
    landmarks, fps = load_landmarks(args.landmarks)
    bank = build_bank(frames, landmarks, window_len=config.window_len,
                      crop=config.crop(), fps=fps)
    save_bank(bank, args.out)
    print(f"bank: {bank.size} entries of {bank.window_len} frames "
          f"({bank.crop.side}x{bank.crop.side} crops) -> {args.out}")
    return 0


def _cmd_warp(args) -> int:
    config = _build_config(args)
    bank = load_bank(args.bank_dir)
    if args.crop_side is not None and args.crop_side != bank.crop.side:
        raise InvalidInputError(
            f"--crop {args.crop_side} conflicts with the bank's {bank.crop.side} px crops"
        )
    query, _ = load_landmarks(args.query)
    faces = load_frame_dir(args.faces)
    report = run_warp(bank, query, faces, args.out, args.mode, config,
                      emit_masks=args.emit_masks)
    n = len(report["windows"])
    failures = report["failures"]
    for entry in report["windows"]:
        if entry.get("error"):
            print(f"window {entry['index']}: {entry['error']}", file=sys.stderr)
        else:
            print(f"window {entry['index']:4d}: retrieved {entry['retrieved_index']:4d}  "
                  f"l_tw {entry['init']['l_tw']:.6g} -> {entry['final']['l_tw']:.6g}")
    print(f"warp: {n - failures}/{n} windows ok -> {args.out}")
    return 0 if failures == 0 else 1


def _cmd_metrics(args) -> int:
    if not (args.ssiou or args.photometric):
        raise InvalidInputError("nothing to do: pass --ssiou and/or --photometric")
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    summary: dict = {}
    curves = None
    distance_map = None

    if args.photometric:
        gen = load_frame_dir(args.gen)
        gt = load_frame_dir(args.gt)
        mask = None
        if args.landmarks:
            landmarks, _ = load_landmarks(args.landmarks)
            if landmarks.shape[0] != gen.shape[0]:
                raise InvalidInputError(
                    f"landmark count {landmarks.shape[0]} does not match "
                    f"frame count {gen.shape[0]}"
                )
            height, width = gen.shape[1:3]
            mask = np.zeros((height, width), dtype=np.uint8)
            for frame in landmarks:
                mask |= mouth_mask(frame, width, height)
        mean, dist_map = photometric_error(gen, gt, mask)
        summary["photometric_mean"] = mean
        peak = float(dist_map.max())
        scaled = np.zeros_like(dist_map, dtype=np.uint8) if peak == 0 else \
            np.rint(dist_map / peak * 255.0).astype(np.uint8)
        save_image(out_root / "distance_map.png", scaled)
        (out_root / "distance_map.json").write_text(json.dumps(
            {"max_distance": peak, "distance_per_level": peak / 255.0}, sort_keys=True))
        distance_map = dist_map

    if args.ssiou:
        if not args.landmarks:
            raise InvalidInputError("--ssiou needs --landmarks (and optionally --gen-landmarks)")
        gt_landmarks, gt_fps = load_landmarks(args.landmarks)
        gen_path = args.gen_landmarks or args.landmarks
        gen_landmarks, gen_fps = load_landmarks(gen_path)
        curve_gt = lip_aperture(gt_landmarks, fps=gt_fps)
        curve_gen = lip_aperture(gen_landmarks, fps=gen_fps)
        summary["ssiou"] = ssiou(curve_gen, curve_gt)
        curves = [("generated", curve_gen), ("reference", curve_gt)]

    (out_root / "metrics.json").write_text(json.dumps(summary, sort_keys=True))
    reporting.write_metric_outputs(out_root, summary, curves=curves, distance_map=distance_map)
    for key, value in sorted(summary.items()):
        print(f"{key}: {value:.6g}")
    return 0


def _cmd_synth(args) -> int:
    config = SynthConfig(seed=args.seed, frames=args.frames, jitter=args.jitter,
                         size=args.size, fps=args.fps)
    meta = write_corpus(args.out, config)
    print(f"synth: {meta['frames']} frames (seed {meta['seed']}, "
          f"jitter {meta['jitter']}) -> {args.out}")
    return 0


def _load_adain_inputs(args):
    if args.input:
        doc = json.loads(Path(args.input).read_text())
        content = np.asarray(doc["content"], dtype=np.float64)
        gamma = np.asarray(doc.get("gamma", np.ones(content.shape[0])), dtype=np.float64)
        beta = np.asarray(doc.get("beta", np.zeros(content.shape[0])), dtype=np.float64)
        return content, gamma, beta
    rng = np.random.default_rng(args.seed)
    content = rng.normal(size=(args.channels, args.length))
    gamma = rng.uniform(0.5, 2.0, size=args.channels)
    beta = rng.normal(size=args.channels)
    return content, gamma, beta


def _cmd_adain_check(args) -> int:
    content, gamma, beta = _load_adain_inputs(args)
    normalized = instance_norm(content)
    modulated = adain(content, StyleParams(gamma=gamma, beta=beta))

    rows = []
    ok = True
    for c in range(content.shape[0]):
        norm_mean = float(normalized[c].mean())
        norm_std = float(normalized[c].std())
        ada_mean = float(modulated[c].mean())
        passed = bool(abs(norm_mean) <= 1e-9 and abs(norm_std - 1.0) <= 1e-3
                      and abs(ada_mean - beta[c]) <= 1e-9)
        ok &= passed
        rows.append({
            "channel": c,
            "normalized_mean": norm_mean,
            "normalized_std": norm_std,
            "modulated_mean": ada_mean,
            "beta": float(beta[c]),
            "pass": passed,
        })
        print(f"channel {c:3d}: mean {norm_mean:+.3e} std {norm_std:.6f} "
              f"adain-mean {ada_mean:+.6f} (beta {beta[c]:+.6f}) "
              f"{'ok' if passed else 'FAIL'}")
    if args.out:
        Path(args.out).write_text(json.dumps({"channels": rows, "pass": ok}, sort_keys=True))
    print(f"adain-check: {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mouthwarp",
        description="Landmark-driven mouth video warping toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bank = sub.add_parser("bank", help="build a texture bank from a clip")
    p_bank.add_argument("frames_dir", type=Path, help="directory of PNG frames")
    p_bank.add_argument("landmarks", type=Path, help="landmark JSON for the clip")
    p_bank.add_argument("--out", type=Path, required=True, help="bank output directory")
    _add_config_flags(p_bank)
    p_bank.set_defaults(func=_cmd_bank)

    p_warp = sub.add_parser("warp", help="warp bank textures onto query landmarks")
    p_warp.add_argument("bank_dir", type=Path, help="texture bank directory")
    p_warp.add_argument("--query", type=Path, required=True, help="query landmark JSON")
    p_warp.add_argument("--faces", type=Path, required=True, help="target face frames")
    p_warp.add_argument("--out", type=Path, required=True, help="output directory")
    p_warp.add_argument("--mode", choices=MODES, default="temporal")
    p_warp.add_argument("--emit-masks", action="store_true", help="also write mouth masks")
    _add_config_flags(p_warp)
    p_warp.set_defaults(func=_cmd_warp)

    p_metrics = sub.add_parser("metrics", help="evaluate generated frames against references")
    p_metrics.add_argument("--gen", type=Path, required=True, help="generated frame directory")
    p_metrics.add_argument("--gt", type=Path, required=True, help="reference frame directory")
    p_metrics.add_argument("--landmarks", type=Path,
                           help="reference landmarks (mask source, ssiou reference)")
    p_metrics.add_argument("--gen-landmarks", type=Path, dest="gen_landmarks",
                           help="landmarks of the generated frames for --ssiou")
    p_metrics.add_argument("--out", type=Path, required=True)
    p_metrics.add_argument("--ssiou", action="store_true")
    p_metrics.add_argument("--photometric", action="store_true")
    p_metrics.set_defaults(func=_cmd_metrics)

    p_synth = sub.add_parser("synth", help="generate a synthetic mouth clip")
    p_synth.add_argument("--out", type=Path, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--frames", type=int, default=25)
    p_synth.add_argument("--jitter", type=float, default=0.0,
                         help="landmark noise sigma in px")
    p_synth.add_argument("--size", type=int, default=192, help="canvas side in px")
    p_synth.add_argument("--fps", type=float, default=30.0)
    p_synth.set_defaults(func=_cmd_synth)

    p_adain = sub.add_parser("adain-check", help="feature-normalization self-test")
    p_adain.add_argument("--input", type=Path,
                         help='JSON {"content": [[..]], "gamma": [..], "beta": [..]}')
    p_adain.add_argument("--channels", type=int, default=8)
    p_adain.add_argument("--length", type=int, default=256)
    p_adain.add_argument("--seed", type=int, default=0)
    p_adain.add_argument("--out", type=Path, help="write the per-channel report JSON here")
    p_adain.set_defaults(func=_cmd_adain_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"mouthwarp {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
