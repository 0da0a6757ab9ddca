"""Command-line entry point: ``rainstack <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .ensemble import DEFAULT_WEIGHT, tune_weight
from .errors import RainstackError
from .patchmatch import PatchMatchConfig
from .pipeline import (
    STAGES,
    ConfigError,
    PipelineConfig,
    evaluate_outputs,
    format_csv,
    format_table,
    run_pipeline,
)
from .provider import ProviderKind, provide_restored
from .scene_io import discover_scenes, load_image, load_scene
from .synth import RainSceneSpec, default_suite, generate_reference_library, write_dataset
from .temporal import temporal_mean, temporal_median

logger = logging.getLogger("rainstack")

COMMAND_STAGES = {
    "median": {"median", "evaluate"},
    "mean": {"mean", "evaluate"},
    "ensemble": {"median", "mean", "ensemble", "evaluate"},
}


def _common(parser, need_out=True):
    parser.add_argument("--dataset", type=Path, required=True, help="dataset root")
    if need_out:
        parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--jobs", type=int, default=1, help="parallel scene workers")
    parser.add_argument("--seed", type=int, default=0)


def _provider_args(parser):
    parser.add_argument("--provider", default="identity", choices=["identity", "from-directory"])
    parser.add_argument("--restored-dir", type=Path, default=None,
                        help="root holding <scene_id>/*.png restored frames (default: each scene's restored/)")
    parser.add_argument("--scene-provider", action="append", default=[], metavar="SCENE=KIND",
                        help="per-scene provider override; repeatable")


def _processing_args(parser):
    _provider_args(parser)
    parser.add_argument("--weight", type=float, default=DEFAULT_WEIGHT, help="ensemble weight w")
    parser.add_argument("--library", type=Path, default=None, help="reference library directory")
    parser.add_argument("--patch-size", type=int, default=9)
    parser.add_argument("--top-m", type=int, default=1)
    parser.add_argument("--search-stride", type=int, default=1)
    parser.add_argument("--samples-k", type=int, default=10)
    parser.add_argument("--num-sets", type=int, default=10)
    parser.add_argument("--match-on", choices=["median", "ensemble"], default="median",
                        help="image whose patches are matched against the library")
    parser.add_argument("--quantized-metrics", action="store_true",
                        help="score after 8-bit quantization")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rainstack", description=__doc__)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset (and optionally a reference library)")
    p.add_argument("--out", type=Path, required=True, help="dataset root to create")
    p.add_argument("--scenes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--frames", type=int, default=31)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--streak-length", type=int, default=9)
    p.add_argument("--intensity", type=float, default=0.5)
    p.add_argument("--gain", type=float, nargs=3, default=None, help="fixed per-channel gain (default: random)")
    p.add_argument("--offset", type=float, nargs=3, default=None, help="fixed per-channel offset (default: random)")
    p.add_argument("--restorer-residual", type=float, default=0.5)
    p.add_argument("--restorer-noise", type=float, default=0.01)
    p.add_argument("--no-restored", action="store_true", help="do not write simulated restored frames")
    p.add_argument("--library", type=Path, default=None,
                   help="also write (median, clean) reference pairs for the generated scenes here")

    for name, text in [("median", "temporal median per scene"),
                       ("mean", "temporal mean of restored frames per scene"),
                       ("ensemble", "weighted average of mean and median"),
                       ("postprocess", "ensemble followed by brightness correction"),
                       ("pipeline", "every stage, with evaluation")]:
        p = sub.add_parser(name, help=text)
        _common(p)
        _processing_args(p)
        if name == "pipeline":
            p.add_argument("--stages", default=",".join(STAGES),
                           help=f"comma-separated subset of {','.join(STAGES)}")

    p = sub.add_parser("evaluate", help="score written stage images against ground truth")
    _common(p)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--quantized-metrics", action="store_true")

    p = sub.add_parser("tune-weight", help="grid-search the ensemble weight against ground truth")
    _common(p, need_out=False)
    _provider_args(p)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--show-grid", action="store_true", help="print the PSNR of every grid weight")
    return parser


def _scene_providers(items):
    out = {}
    for item in items:
        scene, sep, kind = item.partition("=")
        if not sep:
            raise ConfigError(f"--scene-provider expects SCENE=KIND, got {item!r}")
        out[scene] = ProviderKind.parse(kind)
    return out


def _stages_for(args):
    if args.command in COMMAND_STAGES:
        return COMMAND_STAGES[args.command]
    if args.command == "postprocess":
        final = "postprocess_plus" if args.num_sets > 1 else "postprocess"
        return {"median", "mean", "ensemble", final, "evaluate"}
    return {s.strip() for s in args.stages.split(",") if s.strip()}


def config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        dataset_root=args.dataset,
        out_dir=args.out,
        library_dir=args.library,
        provider=args.provider,
        scene_providers=_scene_providers(args.scene_provider),
        restored_root=args.restored_dir,
        w=args.weight,
        K=args.samples_k,
        N=args.num_sets,
        patch=PatchMatchConfig(args.patch_size, args.top_m, args.search_stride),
        seed=args.seed,
        stages=_stages_for(args),
        match_on=args.match_on,
        quantized_metrics=args.quantized_metrics,
        jobs=args.jobs,
    )


def cmd_synth(args) -> int:
    overrides = dict(height=args.height, width=args.width, T=args.frames, rain_density=args.density,
                     streak_length=args.streak_length, streak_intensity=args.intensity,
                     restorer_residual=args.restorer_residual, restorer_noise=args.restorer_noise)
    if args.gain is not None:
        overrides["brightness_gain"] = tuple(args.gain)
    if args.offset is not None:
        overrides["brightness_offset"] = tuple(args.offset)
    specs = default_suite(args.scenes, seed=args.seed, **overrides)
    write_dataset(specs, args.out, with_restored=not args.no_restored)
    if args.library is not None:
        generate_reference_library(specs, args.library)
    print(f"wrote {len(specs)} scenes to {args.out}")
    return 0


def cmd_process(args) -> int:
    cfg = config_from_args(args)
    result = run_pipeline(cfg)
    if result.rows:
        sys.stdout.write(format_table(result.rows))
    for failed in result.failures:
        print(f"FAILED {failed.scene_id}: {failed.error}", file=sys.stderr)
    return 1 if result.failures else 0


def cmd_evaluate(args) -> int:
    rows = evaluate_outputs(args.dataset, args.out, quantized=args.quantized_metrics)
    if not rows:
        print("no scenes with both ground truth and stage outputs", file=sys.stderr)
        return 1
    sys.stdout.write(format_csv(rows) if args.format == "csv" else format_table(rows))
    return 0


def cmd_tune_weight(args) -> int:
    providers = _scene_providers(args.scene_provider)
    means, medians, truths = [], [], []
    for record in discover_scenes(args.dataset):
        if record.clean_path is None:
            continue
        rainy = load_scene(record.rainy_dir, scene_id=record.scene_id)
        restored_dir = args.restored_dir / record.scene_id if args.restored_dir else record.restored_dir
        kind = providers.get(record.scene_id, ProviderKind.parse(args.provider))
        means.append(temporal_mean(provide_restored(rainy, kind, restored_dir)))
        medians.append(temporal_median(rainy))
        truths.append(load_image(record.clean_path))
    if not truths:
        print("tune-weight needs scenes with clean.png ground truth", file=sys.stderr)
        return 1
    best, scores = tune_weight(means, medians, truths, step=args.step)
    if args.show_grid:
        print("w,mean_psnr")
        for w, s in scores.items():
            print(f"{w:.4f},{s!r}")
    print(f"best_w={best:.4f} mean_psnr={scores[best]:.4f} scenes={len(truths)}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    handlers = {"synth": cmd_synth, "evaluate": cmd_evaluate, "tune-weight": cmd_tune_weight}
    try:
        return handlers.get(args.command, cmd_process)(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RainstackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
