"""Command line entry point: ``lunarhda {synth,assess,bench}``.

Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 no candidate
sites, 4 parse/validation error in an input file, 5 I/O error,
6 degenerate geometry.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig, config_to_dict, load_config
from .errors import BoundsError, DegenerateGeometry, NoCandidates, ParseError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NO_CANDIDATES = 3
EXIT_PARSE = 4
EXIT_IO = 5
EXIT_DEGENERATE = 6

log = logging.getLogger("lunarhda")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON pipeline config (defaults if omitted)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="lunarhda", description="Landing-site hazard assessment pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="generate a synthetic scene and its inputs")
    a = sub.add_parser("assess", parents=[common], help="rank candidate landing sites")
    a.add_argument("--detections", type=Path, help="override paths.detections")
    a.add_argument("--correspondences", type=Path, help="override paths.correspondences")
    a.add_argument("--scene", type=Path, help="override paths.scene")
    a.add_argument("--min-leaf", type=int, help="override mask.min_leaf")
    a.add_argument("--margin", type=float, help="override mask.margin")
    a.add_argument("--score-threshold", type=float, help="override mask.score_threshold")
    b = sub.add_parser("bench", parents=[common], help="time mask + quadtree at full resolution")
    b.add_argument("--repeats", type=int, help="override bench.repeats")
    return p


def _apply_overrides(cfg: PipelineConfig, args) -> None:
    for flag, target, attr in (
        ("detections", cfg.paths, "detections"),
        ("correspondences", cfg.paths, "correspondences"),
        ("scene", cfg.paths, "scene"),
        ("min_leaf", cfg.mask, "min_leaf"),
        ("margin", cfg.mask, "margin"),
        ("score_threshold", cfg.mask, "score_threshold"),
        ("repeats", cfg.bench, "repeats"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(target, attr, str(Path(value).resolve()) if isinstance(value, Path) else value)


def _run(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    _apply_overrides(cfg, args)
    if args.print_config:
        print(json.dumps(config_to_dict(cfg), indent=2))
        return EXIT_OK

    if args.command == "synth":
        paths = pipeline.run_synth(cfg, args.seed, args.out)
        for name, path in paths.items():
            print(f"{name}: {path}")
        return EXIT_OK

    if args.command == "assess":
        try:
            result = pipeline.run_assess(cfg, args.out)
        except NoCandidates as exc:
            print(json.dumps({"status": "no_candidates", "message": str(exc)}))
            return EXIT_NO_CANDIDATES
        best = pipeline.top_site(result.ranked)
        summary = {
            "candidates": len(result.candidates),
            "required_px": result.required_px,
            "points": len(result.cloud),
            "top": None if best is None else pipeline.report_records([best], cfg)[0],
            "timings_ms": {t.stage: round(t.ms, 2) for t in result.timings},
        }
        print(json.dumps(summary, indent=1))
        return EXIT_OK

    stats = pipeline.run_bench(cfg, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "bench.json").write_text(json.dumps(stats, indent=1) + "\n", encoding="utf-8")
    print(json.dumps(stats, indent=1))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (ParseError, BoundsError) as exc:
        print(f"error [{getattr(exc, 'stage', 'input')}]: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateGeometry as exc:
        print(f"error [{getattr(exc, 'stage', 'geometry')}]: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"error [{getattr(exc, 'stage', 'io')}]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
