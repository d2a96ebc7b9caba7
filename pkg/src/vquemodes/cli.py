"""Command-line entry point.

Exit status is 0 on success, 2 for invalid input (bad arguments, malformed
files, failed validation) and 3 for failures while running.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline, spatial, svr, synthgen
from .media_io import load_manifest, read_frame_pair

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _config(args):
    return pipeline.load_config(
        getattr(args, "config", None),
        motion_range=getattr(args, "motion_range", None),
        disparity_range=getattr(args, "disparity_range", None),
        pristine_model=getattr(args, "pristine", None),
        external_scores=getattr(args, "external_scores", None),
        spatial_provider="external" if getattr(args, "external_scores", None) else None,
        patch_size=getattr(args, "patch_size", None),
        workers=getattr(args, "workers", None),
        trials=getattr(args, "trials", None),
        seed=getattr(args, "seed", None),
        group_by_content=True if getattr(args, "group_by_content", False) else None,
    )


def cmd_synth(args):
    specs = synthgen.load_scene_specs(args.spec)
    if not specs:
        raise ValueError(f"{args.spec}: no scenes defined")
    print(synthgen.generate_corpus(specs, args.out))


def cmd_train_pristine(args):
    entries = load_manifest(args.manifest)
    frames = []
    for e in entries:
        for i in range(min(args.frames_per_video, e.usable_frames)):
            pair = read_frame_pair(e, i)
            frames += [pair.left, pair.right]
    model = spatial.train_pristine(frames, patch_size=args.patch_size or spatial.DEFAULT_PATCH)
    model.save(args.out)
    print(f"{args.out}: {model.patch_count} patches from {len(frames)} frames")


def cmd_extract(args):
    cfg = _config(args)
    entries = load_manifest(args.manifest)
    cache = pipeline.extract_corpus(entries, cfg)
    pipeline.write_cache(args.out, cache)
    n = sum(len(v.frames) for v in cache.videos.values())
    print(f"{args.out}: {n} frames from {len(cache.videos)} videos")


def _read_split(path):
    ids = [ln.strip() for ln in Path(path).read_text().splitlines()
           if ln.strip() and not ln.startswith("#")]
    if not ids:
        raise ValueError(f"{path}: empty split file")
    return ids


def cmd_train(args):
    cfg = _config(args)
    cache = pipeline.read_cache(args.cache)
    model = pipeline.train_quality_model(cache, _read_split(args.split_file), cfg)
    svr.save_model(model, args.model)
    print(f"{args.model}: {len(model.dual_coeffs)} support vectors")


def cmd_predict(args):
    model = svr.load_model(args.model)
    if args.cache:
        frames = pipeline.read_cache(args.cache)[args.video].frames
    else:
        cfg = _config(args)
        entries = {e.id: e for e in load_manifest(args.manifest)}
        if args.video not in entries:
            raise KeyError(f"video {args.video!r} not in manifest")
        frames = pipeline.extract_features(entries[args.video], cfg)
    mean, std = pipeline.predict_video_quality(model, frames)
    print(f"{args.video} {mean:.6f} {std:.6f}")


def cmd_evaluate(args):
    cfg = _config(args)
    cache = pipeline.read_cache(args.cache)
    report = pipeline.format_report(pipeline.run_trials(cache, cfg))
    if args.report:
        Path(args.report).write_text(report)
    sys.stdout.write(report)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vquemodes", description="No-reference stereoscopic video quality.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="render synthetic stereo scenes")
    s.add_argument("--spec", required=True, help="INI scene file")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train-pristine", help="fit the spatial pristine model")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--frames-per-video", type=int, default=5)
    s.add_argument("--patch-size", type=int)
    s.set_defaults(func=cmd_train_pristine)

    def extraction_opts(sp):
        sp.add_argument("--config")
        sp.add_argument("--motion-range", type=int)
        sp.add_argument("--disparity-range", type=int)
        sp.add_argument("--pristine", help="pristine model file")
        sp.add_argument("--external-scores", help="use external spatial scores")
        sp.add_argument("--patch-size", type=int)
        sp.add_argument("--workers", type=int)

    s = sub.add_parser("extract", help="compute the per-frame feature cache")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    extraction_opts(s)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train", help="train the quality regressor")
    s.add_argument("--cache", required=True)
    s.add_argument("--split-file", required=True, help="training video ids, one per line")
    s.add_argument("--model", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="score one video")
    s.add_argument("--model", required=True)
    s.add_argument("--video", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--cache")
    src.add_argument("--manifest")
    extraction_opts(s)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="repeated train/test trials")
    s.add_argument("--cache", required=True)
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--report")
    s.add_argument("--group-by-content", action="store_true")
    s.add_argument("--workers", type=int)
    s.add_argument("--config")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"vquemodes: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        args.func(args)
    except (pipeline.ExtractionError, RuntimeError) as exc:
        print(f"vquemodes: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"vquemodes: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"vquemodes: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
